#include "ppt/prompter.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ppt {

IntervalBucket bucket_of(int64_t delta_days) {
    if (delta_days <= 60) return IntervalBucket::SHT;
    if (delta_days <= 365) return IntervalBucket::MID;
    return IntervalBucket::LNG;
}

const char* bucket_name(IntervalBucket bucket) {
    switch (bucket) {
        case IntervalBucket::SHT: return "SHT";
        case IntervalBucket::MID: return "MID";
        case IntervalBucket::LNG: return "LNG";
    }
    return "?";
}

std::string spell_number(int64_t n) {
    static const char* words[] = {"zero",    "one",     "two",      "three",
                                  "four",    "five",    "six",      "seven",
                                  "eight",   "nine",    "ten",      "eleven",
                                  "twelve",  "thirteen", "fourteen", "fifteen",
                                  "sixteen", "seventeen", "eighteen", "nineteen",
                                  "twenty"};
    if (n >= 0 && n <= 20) return words[n];
    return std::to_string(n);
}

namespace {

std::vector<std::string> phrase_words(const std::string& text) {
    return tokenize_words(text);
}

IntervalRange make_range(int64_t lo, int64_t hi, const std::string& phrase) {
    IntervalRange r;
    r.lo = lo;
    r.hi = hi;
    r.bucket = bucket_of(lo);
    r.phrase = phrase_words(phrase);
    return r;
}

int64_t round_div(int64_t delta, int64_t unit) {
    return std::llround(static_cast<double>(delta) / static_cast<double>(unit));
}

}  // namespace

IntervalDictionary IntervalDictionary::default_dictionary(int max_years) {
    if (max_years < 2) throw PromptError("default dictionary needs max_years >= 2");
    std::vector<IntervalRange> entries;
    entries.push_back(make_range(0, 0, "on the same day"));
    entries.push_back(make_range(1, 1, "the next day"));
    for (int64_t d = 2; d <= 6; ++d)
        entries.push_back(make_range(d, d, "after " + spell_number(d) + " days"));
    entries.push_back(make_range(7, 13, "after one week"));
    // Weeks, months, and years bucketize by rounding to the nearest unit.
    auto emit_unit_ranges = [&](int64_t lo, int64_t hi, int64_t unit,
                                const std::string& singular, const std::string& plural) {
        int64_t start = lo;
        while (start <= hi) {
            const int64_t n = round_div(start, unit);
            int64_t end = start;
            while (end + 1 <= hi && round_div(end + 1, unit) == n) ++end;
            const std::string noun = n == 1 ? singular : plural;
            entries.push_back(
                make_range(start, end, "after " + spell_number(n) + " " + noun));
            start = end + 1;
        }
    };
    emit_unit_ranges(14, 29, 7, "week", "weeks");
    emit_unit_ranges(30, 60, 30, "month", "months");
    emit_unit_ranges(61, 365, 30, "month", "months");
    emit_unit_ranges(366, 365 * static_cast<int64_t>(max_years), 365, "year", "years");
    entries.back().hi = -1;  // open-ended tail
    return from_entries(std::move(entries));
}

IntervalDictionary IntervalDictionary::from_entries(std::vector<IntervalRange> entries) {
    IntervalDictionary dict;
    dict.entries_ = std::move(entries);
    dict.validate();
    return dict;
}

void IntervalDictionary::validate() const {
    if (entries_.empty()) throw PromptError("interval dictionary: no entries");
    int64_t expected_lo = 0;
    for (size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.lo != expected_lo)
            throw PromptError("interval dictionary: ranges must partition [0, inf), gap at " +
                              std::to_string(expected_lo));
        const bool last = i + 1 == entries_.size();
        if (last) {
            if (e.hi != -1)
                throw PromptError("interval dictionary: last range must be open (hi = -1)");
        } else {
            if (e.hi < e.lo)
                throw PromptError("interval dictionary: empty range at lo " +
                                  std::to_string(e.lo));
            expected_lo = e.hi + 1;
        }
        if (e.phrase.empty())
            throw PromptError("interval dictionary: empty phrase at lo " +
                              std::to_string(e.lo));
        const int64_t probe_hi = e.hi < 0 ? e.lo : e.hi;
        if (bucket_of(e.lo) != e.bucket || bucket_of(probe_hi) != e.bucket)
            throw PromptError("interval dictionary: bucket mismatch at lo " +
                              std::to_string(e.lo));
    }
}

const IntervalRange& IntervalDictionary::range_of(int64_t delta) const {
    if (delta < 0) throw PromptError("negative interval");
    // Last range with lo <= delta.
    auto it = std::upper_bound(entries_.begin(), entries_.end(), delta,
                               [](int64_t d, const IntervalRange& r) { return d < r.lo; });
    return *(it - 1);
}

void IntervalDictionary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PromptError("cannot write " + path);
    for (const auto& e : entries_) {
        out << e.lo << '\t' << e.hi << '\t' << bucket_name(e.bucket) << '\t';
        for (size_t i = 0; i < e.phrase.size(); ++i)
            out << (i ? " " : "") << e.phrase[i];
        out << '\n';
    }
}

IntervalDictionary IntervalDictionary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PromptError("cannot open " + path);
    std::vector<IntervalRange> entries;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        IntervalRange r;
        std::string bucket, phrase;
        if (!(fields >> r.lo >> r.hi >> bucket))
            throw PromptError(path + ":" + std::to_string(lineno) + ": bad entry");
        std::getline(fields, phrase);
        if (bucket == "SHT") r.bucket = IntervalBucket::SHT;
        else if (bucket == "MID") r.bucket = IntervalBucket::MID;
        else if (bucket == "LNG") r.bucket = IntervalBucket::LNG;
        else throw PromptError(path + ":" + std::to_string(lineno) + ": bad bucket " + bucket);
        r.phrase = phrase_words(phrase);
        entries.push_back(std::move(r));
    }
    return from_entries(std::move(entries));
}

// ---------------------------------------------------------------------------
// Words and relation surfaces
// ---------------------------------------------------------------------------

std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (const char ch : text) {
        const auto uc = static_cast<unsigned char>(ch);
        if (std::isalnum(uc)) {
            current.push_back(static_cast<char>(std::tolower(uc)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

PrepositionLexicon load_lexicon(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PromptError("cannot open " + path);
    PrepositionLexicon lexicon;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw PromptError(path + ":" + std::to_string(lineno) +
                              ": expected \"relation\\tpreposition\"");
        lexicon[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return lexicon;
}

std::vector<std::string> relation_surface(const std::string& name,
                                          const PrepositionLexicon& lexicon) {
    if (name.empty()) throw PromptError("empty relation name");
    auto words = tokenize_words(name);
    const auto it = lexicon.find(name);
    if (it != lexicon.end()) {
        auto extra = tokenize_words(it->second);
        words.insert(words.end(), extra.begin(), extra.end());
    }
    return words;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

Vocabulary Vocabulary::build(const TemporalKG& kg, const IntervalDictionary& dict,
                             const PrepositionLexicon& lexicon) {
    Vocabulary v;
    v.tokens_ = {"[PAD]", "[MASK]", "[EVE]", "[SHT]", "[MID]", "[LNG]"};
    v.entity_count_ = kg.entity_count();
    for (size_t e = 0; e < kg.entity_count(); ++e)
        v.tokens_.push_back("[ENT-" + std::to_string(e) + "]");

    for (size_t i = 0; i < v.tokens_.size(); ++i)
        v.ids_[v.tokens_[i]] = static_cast<TokenId>(i);

    auto intern = [&](const std::string& word) -> TokenId {
        const auto it = v.ids_.find(word);
        if (it != v.ids_.end()) return it->second;
        const auto id = static_cast<TokenId>(v.tokens_.size());
        v.tokens_.push_back(word);
        v.ids_[word] = id;
        return id;
    };

    v.relation_tokens_.resize(kg.relation_count());
    for (size_t r = 0; r < kg.relation_count(); ++r) {
        const auto words = relation_surface(kg.relation_name(static_cast<RelationId>(r)),
                                            lexicon);
        for (const auto& w : words)
            v.relation_tokens_[r].push_back(intern(w));
    }
    for (const auto& entry : dict.entries())
        for (const auto& w : entry.phrase) intern(w);
    return v;
}

TokenId Vocabulary::id_of(const std::string& token) const {
    const auto it = ids_.find(token);
    return it == ids_.end() ? -1 : it->second;
}

TokenId Vocabulary::require(const std::string& token) const {
    const TokenId id = id_of(token);
    if (id < 0) throw PromptError("token not in vocabulary: " + token);
    return id;
}

uint64_t Vocabulary::hash() const {
    uint64_t h = 14695981039346656037ull;
    for (size_t i = 0; i < tokens_.size(); ++i) {
        h = fnv1a64(tokens_[i], h);
        h = fnv1a64("\t", h);
        const std::string id = std::to_string(i);
        h = fnv1a64(id, h);
        h = fnv1a64("\n", h);
    }
    return h;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PromptError("cannot write " + path);
    for (size_t i = 0; i < tokens_.size(); ++i)
        out << tokens_[i] << '\t' << i << '\n';
}

// Loading restores tokens/ids; relation surfaces are not persisted, so a
// loaded vocabulary supports scoring and detokenization but not fresh
// serialization (rebuild from the graph for that).
Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PromptError("cannot open " + path);
    Vocabulary v;
    v.tokens_.clear();
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t tab = line.rfind('\t');
        if (tab == std::string::npos)
            throw PromptError(path + ":" + std::to_string(lineno) + ": expected token\\tid");
        const std::string token = line.substr(0, tab);
        const size_t id = std::stoull(line.substr(tab + 1));
        if (id != v.tokens_.size())
            throw PromptError(path + ":" + std::to_string(lineno) + ": ids must be dense");
        v.ids_[token] = static_cast<TokenId>(v.tokens_.size());
        v.tokens_.push_back(token);
        if (token.rfind("[ENT-", 0) == 0) ++v.entity_count_;
    }
    return v;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::vector<TokenId> fact_block(const Vocabulary& vocab, const IntervalDictionary& dict,
                                TokenId subject_token, RelationId relation,
                                TokenId object_token, int64_t interval,
                                PromptVariant variant) {
    const int64_t rendered = variant == PromptVariant::NoPrompts ? 0 : interval;
    std::vector<TokenId> block;
    block.push_back(Vocabulary::kEve);
    block.push_back(vocab.bucket_token(bucket_of(rendered)));
    for (const auto& word : dict.phrase_of(rendered))
        block.push_back(vocab.require(word));
    block.push_back(subject_token);
    const auto& rel = vocab.relation_tokens(relation);
    block.insert(block.end(), rel.begin(), rel.end());
    block.push_back(object_token);
    return block;
}

PromptSequence assemble_blocks(const std::vector<std::vector<TokenId>>& blocks,
                               int seq_len) {
    if (seq_len < 1) throw PromptError("seq_len must be positive");
    size_t total = 0;
    for (const auto& b : blocks) total += b.size();
    size_t first = 0;
    while (total > static_cast<size_t>(seq_len) && first < blocks.size()) {
        total -= blocks[first].size();
        ++first;  // drop oldest
    }
    if (total > static_cast<size_t>(seq_len))
        throw PromptError("fact does not fit in seq_len " + std::to_string(seq_len));
    PromptSequence seq;
    seq.seq_len = seq_len;
    seq.tokens.reserve(total);
    for (size_t i = first; i < blocks.size(); ++i)
        seq.tokens.insert(seq.tokens.end(), blocks[i].begin(), blocks[i].end());
    return seq;
}

PromptSequence serialize_tig(const Tig& tig, const Vocabulary& vocab,
                             const IntervalDictionary& dict, int seq_len,
                             PromptVariant variant) {
    std::vector<std::vector<TokenId>> blocks;
    blocks.reserve(tig.items.size());
    for (const auto& item : tig.items)
        blocks.push_back(fact_block(vocab, dict, vocab.entity_token(item.subject),
                                    item.relation, vocab.entity_token(item.object),
                                    item.interval, variant));
    return assemble_blocks(blocks, seq_len);
}

std::vector<std::string> detokenize(const PromptSequence& seq, const Vocabulary& vocab) {
    std::vector<std::string> out;
    out.reserve(seq.tokens.size());
    for (const TokenId id : seq.tokens) {
        if (id == Vocabulary::kPad) break;
        out.push_back(vocab.token(id));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Entity embedding initialization
// ---------------------------------------------------------------------------

std::vector<double> entity_init_embedding(const std::string& entity_name,
                                          const WordLookup& word_table, int dim,
                                          uint64_t seed) {
    const auto words = tokenize_words(entity_name);
    std::vector<double> mean(static_cast<size_t>(dim), 0.0);
    if (words.empty()) return mean;
    for (const auto& word : words) {
        std::vector<double> vec;
        if (auto known = word_table(word)) {
            vec = std::move(*known);
            if (vec.size() != static_cast<size_t>(dim))
                throw PromptError("word vector dimension mismatch for \"" + word + "\"");
        } else {
            Rng rng(mix64(seed, fnv1a64(word)));
            vec.resize(static_cast<size_t>(dim));
            for (auto& x : vec) x = rng.normal(0.0, 0.02);
        }
        for (int i = 0; i < dim; ++i) mean[static_cast<size_t>(i)] += vec[static_cast<size_t>(i)];
    }
    for (auto& x : mean) x /= static_cast<double>(words.size());
    return mean;
}

}  // namespace ppt
