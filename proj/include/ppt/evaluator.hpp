#pragma once
// Link-prediction evaluation under the raw schema (no candidate filtering),
// ablation variants, and time-sensitive relation-pair mining.
//
// A test quadruple yields two queries (missing object, missing subject).
// Each query samples history context anchored on the known entity, strictly
// before the query timestamp, appends the query fact with the unknown slot
// as [MASK], and ranks all entities by the masked-position logits.

#include <string>
#include <vector>

#include "ppt/encoder.hpp"
#include "ppt/kg_store.hpp"
#include "ppt/prompter.hpp"
#include "ppt/sampler.hpp"
#include "ppt/trainer.hpp"

namespace ppt {

enum class Direction { PredictObject, PredictSubject };

struct Query {
    Direction direction = Direction::PredictObject;
    EntityId known = 0;  // subject when predicting the object, object otherwise
    RelationId relation = 0;
    Timestamp t = 0;
    EntityId truth = 0;
};

struct RankingResult {
    Query query;
    uint32_t rank = 0;
};

struct Metrics {
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits3 = 0.0;
    double hits10 = 0.0;
    size_t count = 0;

    static Metrics from_ranks(const std::vector<uint32_t>& ranks);
};

struct EvalConfig {
    SamplerConfig sampler;  // context length range; strategy unused here
    int seq_len = 256;
    PromptVariant variant = PromptVariant::Full;
    int context_draws = 1;  // logits averaged over this many context samples
    uint64_t seed = 7;
    int threads = 1;
};

struct EvalReport {
    Metrics pooled;
    Metrics object_queries;
    Metrics subject_queries;
    std::vector<RankingResult> ranks;
};

Query query_from_quadruple(const Quadruple& quad, Direction direction);

// Context blocks (subject-fixed history for PredictObject, object-fixed for
// PredictSubject, timestamps strictly below query.t) followed by the query
// block whose unknown slot is [MASK] and whose interval runs from the last
// context fact to query.t (0 when there is no history).
PromptSequence build_query_sequence(const TemporalKG& kg, const Query& query,
                                    const Vocabulary& vocab,
                                    const IntervalDictionary& dict,
                                    const EvalConfig& config, Rng& rng);

// Logits at the single [MASK] position restricted to entity tokens, indexed
// by EntityId. Throws unless the sequence has exactly one [MASK].
std::vector<float> score_entities(const Parameters<float>& params,
                                  const PromptSequence& seq,
                                  const Vocabulary& vocab);

// Optimistic tie rule: 1 + |{entities with strictly greater score}|.
uint32_t rank_of(const std::vector<float>& scores, EntityId truth);

// Scores one query, averaging logits over config.context_draws context samples.
std::vector<float> score_query(const TemporalKG& kg, const Query& query,
                               const Parameters<float>& params,
                               const Vocabulary& vocab,
                               const IntervalDictionary& dict,
                               const EvalConfig& config, Rng& rng);

// Per-query generators derive from (config.seed, query index), so results
// are independent of thread count.
EvalReport evaluate_queries(const TemporalKG& kg, const std::vector<Query>& queries,
                            const Parameters<float>& params, const Vocabulary& vocab,
                            const IntervalDictionary& dict, const EvalConfig& config);

// Both directions for every quadruple of the split, pooled.
EvalReport evaluate(const TemporalKG& kg, Split split, const Parameters<float>& params,
                    const Vocabulary& vocab, const IntervalDictionary& dict,
                    const EvalConfig& config);

// Ablation: trains from scratch with the variant applied to the training
// corpus, then evaluates the split with the same variant.
EvalReport run_ablation(const TemporalKG& kg, const Vocabulary& vocab,
                        const IntervalDictionary& dict, TrainConfig train_config,
                        EvalConfig eval_config, PromptVariant variant, Split split,
                        std::ostream* progress = nullptr);

// Validation hook for the trainer: a fixed random subset of valid-split
// queries, returning pooled MRR.
ValidationHook make_validation_hook(const TemporalKG& kg, const Vocabulary& vocab,
                                    const IntervalDictionary& dict,
                                    const EvalConfig& config, size_t max_queries);

// "metric\tvalue" lines.
std::string metrics_tsv(const EvalReport& report);

// Layer/head attention matrices for a query sequence, as a text dump.
std::string attention_report(const Parameters<float>& params,
                             const PromptSequence& seq, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Time-sensitive relation pairs
// ---------------------------------------------------------------------------

struct MinerConfig {
    int64_t window = 365;      // days
    uint32_t min_support = 3;
    double order_purity = 0.9;
};

struct RelationPair {
    RelationId pre = 0;
    RelationId post = 0;
    uint32_t support = 0;
    double purity = 0.0;
    double median_interval = 0.0;  // days
};

struct MinerResult {
    std::vector<RelationPair> pairs;          // support desc, then ids
    std::vector<Quadruple> filtered_test;     // test quads whose relation occurs
                                              // in some emitted pair
};

// Over train quadruples sharing the same (subject, object) pair, counts
// ordered co-occurrences rA-then-rB with 0 < t_B - t_A <= window. A pair is
// emitted when support >= min_support and support / (support + reverse
// support) >= order_purity.
MinerResult mine_relation_pairs(const TemporalKG& kg, const MinerConfig& config);

// "pre_relation\tpost_relation\tsupport\tmedian_interval" lines.
std::string pairs_tsv(const MinerResult& result, const TemporalKG& kg);

}  // namespace ppt
