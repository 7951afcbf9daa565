#pragma once
// Prompt construction: interval dictionary, vocabulary, and fact-block
// serialization of Tigs into token sequences.
//
// Every fact renders as
//   [EVE] <bucket> <interval phrase words> [ENT-s] <relation words> [ENT-o]
// where <bucket> is [SHT]/[MID]/[LNG] by interval length and the phrase is
// looked up in the interval dictionary ("on the same day", "the next day",
// "after four months", ...). Entities are single special tokens; relation
// surfaces are lowercased word lists, preposition-completed via an editable
// lexicon. No punctuation tokens are emitted.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ppt/common.hpp"
#include "ppt/kg_store.hpp"
#include "ppt/sampler.hpp"

namespace ppt {

struct PromptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Interval buckets and dictionary
// ---------------------------------------------------------------------------

enum class IntervalBucket { SHT, MID, LNG };

// SHT iff delta <= 60, MID iff 60 < delta <= 365, LNG iff delta > 365.
IntervalBucket bucket_of(int64_t delta_days);

const char* bucket_name(IntervalBucket bucket);

struct IntervalRange {
    int64_t lo = 0;
    int64_t hi = 0;  // inclusive; -1 means unbounded
    IntervalBucket bucket{};
    std::vector<std::string> phrase;

    bool contains(int64_t delta) const {
        return delta >= lo && (hi < 0 || delta <= hi);
    }
};

// Ordered ranges partitioning [0, inf), each with a bucket and a phrase.
class IntervalDictionary {
public:
    // 0 -> "on the same day"; 1 -> "the next day"; 2..6 -> "after <n> days";
    // 7..13 -> "after one week"; 14..29 -> "after <n> weeks" (n = delta/7
    // rounded); 30..60 -> "after one/two months" (nearest 30); 61..365 ->
    // "after <n> months" (n = delta/30 rounded); above 365 -> "after <n>
    // years" (n = delta/365 rounded), the last entry open-ended.
    static IntervalDictionary default_dictionary(int max_years = 30);

    static IntervalDictionary from_entries(std::vector<IntervalRange> entries);

    const std::vector<IntervalRange>& entries() const { return entries_; }
    const IntervalRange& range_of(int64_t delta) const;
    const std::vector<std::string>& phrase_of(int64_t delta) const {
        return range_of(delta).phrase;
    }

    // Text form: "lo\thi\tBUCKET\tphrase" per line, hi = -1 meaning infinity.
    void save(const std::string& path) const;
    static IntervalDictionary load(const std::string& path);

private:
    void validate() const;

    std::vector<IntervalRange> entries_;
};

// Spelled out up to twenty, digits beyond.
std::string spell_number(int64_t n);

// ---------------------------------------------------------------------------
// Relation surfaces
// ---------------------------------------------------------------------------

// relation name -> preposition to append ("Make a visit" -> "to").
using PrepositionLexicon = std::map<std::string, std::string>;

// "relation_name\tpreposition" lines; '#' comments and blank lines ignored.
PrepositionLexicon load_lexicon(const std::string& path);

// Lowercases, treats punctuation as separators, splits into words, and
// appends the lexicon preposition when the relation has an entry.
std::vector<std::string> relation_surface(const std::string& name,
                                          const PrepositionLexicon& lexicon);

// Bare word splitting used everywhere a text surface becomes tokens.
std::vector<std::string> tokenize_words(const std::string& text);

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

using TokenId = int32_t;

class Vocabulary {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kMask = 1;
    static constexpr TokenId kEve = 2;
    static constexpr TokenId kSht = 3;
    static constexpr TokenId kMid = 4;
    static constexpr TokenId kLng = 5;

    // Special tokens, one [ENT-i] per entity, then word tokens harvested from
    // relation surfaces (in relation id order) and dictionary phrases (in
    // entry order). Deterministic given the same graph/dictionary/lexicon.
    static Vocabulary build(const TemporalKG& kg, const IntervalDictionary& dict,
                            const PrepositionLexicon& lexicon);

    size_t size() const { return tokens_.size(); }
    size_t entity_count() const { return entity_count_; }

    const std::string& token(TokenId id) const { return tokens_.at(static_cast<size_t>(id)); }
    TokenId id_of(const std::string& token) const;        // -1 when absent
    TokenId require(const std::string& token) const;      // throws when absent

    TokenId entity_token(EntityId e) const {
        return kFirstEntity + static_cast<TokenId>(e);
    }
    bool is_entity_token(TokenId id) const {
        return id >= kFirstEntity &&
               id < kFirstEntity + static_cast<TokenId>(entity_count_);
    }
    EntityId entity_of(TokenId id) const {
        if (!is_entity_token(id)) throw PromptError("not an entity token");
        return static_cast<EntityId>(id - kFirstEntity);
    }
    // [first, last) of the entity-token id block.
    std::pair<TokenId, TokenId> entity_token_range() const {
        return {kFirstEntity, kFirstEntity + static_cast<TokenId>(entity_count_)};
    }

    TokenId bucket_token(IntervalBucket bucket) const {
        switch (bucket) {
            case IntervalBucket::SHT: return kSht;
            case IntervalBucket::MID: return kMid;
            case IntervalBucket::LNG: return kLng;
        }
        throw PromptError("unknown bucket");
    }

    // Precomputed relation surface token ids.
    const std::vector<TokenId>& relation_tokens(RelationId r) const {
        return relation_tokens_.at(r);
    }

    uint64_t hash() const;

    // "token\tid" lines.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    static constexpr TokenId kFirstEntity = 6;

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> ids_;
    std::vector<std::vector<TokenId>> relation_tokens_;
    size_t entity_count_ = 0;
};

// ---------------------------------------------------------------------------
// Sequences
// ---------------------------------------------------------------------------

enum class PromptVariant {
    Full,        // real intervals
    NoPrompts,   // every time-prompt replaced by [SHT] "on the same day"
    RandPrompts  // timestamps randomized upstream; serialization unchanged
};

struct PromptSequence {
    std::vector<TokenId> tokens;  // content only, no padding
    int seq_len = 0;              // capacity the sequence was built for

    std::vector<TokenId> padded() const {
        std::vector<TokenId> out(static_cast<size_t>(seq_len), Vocabulary::kPad);
        std::copy(tokens.begin(), tokens.end(), out.begin());
        return out;
    }
};

// One fact block. subject_token/object_token are entity tokens or kMask.
std::vector<TokenId> fact_block(const Vocabulary& vocab, const IntervalDictionary& dict,
                                TokenId subject_token, RelationId relation,
                                TokenId object_token, int64_t interval,
                                PromptVariant variant = PromptVariant::Full);

// Concatenates blocks oldest-first, dropping oldest blocks while the total
// exceeds seq_len. Throws "fact does not fit" when the newest block alone is
// longer than seq_len.
PromptSequence assemble_blocks(const std::vector<std::vector<TokenId>>& blocks,
                               int seq_len);

// Full serialization of a Tig (oldest fact first, [PAD] suffix implied by
// seq_len). Empty Tig yields an all-pad sequence.
PromptSequence serialize_tig(const Tig& tig, const Vocabulary& vocab,
                             const IntervalDictionary& dict, int seq_len,
                             PromptVariant variant = PromptVariant::Full);

// Token ids back to strings, [PAD] suffix stripped.
std::vector<std::string> detokenize(const PromptSequence& seq, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Entity embedding initialization
// ---------------------------------------------------------------------------

// Mean of the word vectors of the entity name's words. Unknown words get a
// deterministic N(0, 0.02) vector seeded by (seed, word); an empty name gives
// the zero vector.
using WordLookup = std::function<std::optional<std::vector<double>>(const std::string&)>;

std::vector<double> entity_init_embedding(const std::string& entity_name,
                                          const WordLookup& word_table, int dim,
                                          uint64_t seed);

}  // namespace ppt
