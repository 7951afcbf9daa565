#include "ppt/evaluator.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

namespace ppt {

Metrics Metrics::from_ranks(const std::vector<uint32_t>& ranks) {
    Metrics m;
    m.count = ranks.size();
    if (ranks.empty()) return m;
    for (const uint32_t r : ranks) {
        m.mrr += 1.0 / static_cast<double>(r);
        m.hits1 += r <= 1;
        m.hits3 += r <= 3;
        m.hits10 += r <= 10;
    }
    const auto n = static_cast<double>(ranks.size());
    m.mrr /= n;
    m.hits1 /= n;
    m.hits3 /= n;
    m.hits10 /= n;
    return m;
}

Query query_from_quadruple(const Quadruple& quad, Direction direction) {
    Query q;
    q.direction = direction;
    q.relation = quad.relation;
    q.t = quad.t;
    if (direction == Direction::PredictObject) {
        q.known = quad.subject;
        q.truth = quad.object;
    } else {
        q.known = quad.object;
        q.truth = quad.subject;
    }
    return q;
}

PromptSequence build_query_sequence(const TemporalKG& kg, const Query& query,
                                    const Vocabulary& vocab,
                                    const IntervalDictionary& dict,
                                    const EvalConfig& config, Rng& rng) {
    const TsgKind kind = query.direction == Direction::PredictObject
                             ? TsgKind::FixSubject
                             : TsgKind::FixObject;
    const int k = draw_k(config.sampler, rng);
    auto tsg = sample_tsg(kg, query.known, kind, k, rng, query.t);
    if (tsg && config.variant == PromptVariant::RandPrompts)
        randomize_timestamps(*tsg, kg.min_timestamp(), kg.max_timestamp(), rng);

    std::vector<std::vector<TokenId>> blocks;
    Timestamp last_t = query.t;  // empty history renders the query at delta 0
    if (tsg) {
        const Tig tig = tsg_to_tig(*tsg);
        for (const auto& item : tig.items)
            blocks.push_back(fact_block(vocab, dict, vocab.entity_token(item.subject),
                                        item.relation, vocab.entity_token(item.object),
                                        item.interval, config.variant));
        last_t = tsg->quads.back().t;
    }
    const int64_t delta = std::max<int64_t>(0, query.t - last_t);
    const TokenId subject_token = query.direction == Direction::PredictObject
                                      ? vocab.entity_token(query.known)
                                      : Vocabulary::kMask;
    const TokenId object_token = query.direction == Direction::PredictObject
                                     ? Vocabulary::kMask
                                     : vocab.entity_token(query.known);
    blocks.push_back(fact_block(vocab, dict, subject_token, query.relation,
                                object_token, delta, config.variant));
    return assemble_blocks(blocks, config.seq_len);
}

std::vector<float> score_entities(const Parameters<float>& params,
                                  const PromptSequence& seq,
                                  const Vocabulary& vocab) {
    int mask_pos = -1;
    for (size_t i = 0; i < seq.tokens.size(); ++i) {
        if (seq.tokens[i] == Vocabulary::kMask) {
            if (mask_pos >= 0)
                throw EncoderError("score_entities: multiple [MASK] tokens");
            mask_pos = static_cast<int>(i);
        }
    }
    if (mask_pos < 0) throw EncoderError("score_entities: no [MASK] token");

    const auto batch = assemble_batch({unmasked_row(seq.tokens)}, Vocabulary::kPad);
    const auto logits = forward(params, batch);
    const auto [first, last] = vocab.entity_token_range();
    std::vector<float> scores(static_cast<size_t>(last - first));
    for (TokenId id = first; id < last; ++id)
        scores[static_cast<size_t>(id - first)] = logits(mask_pos, id);
    return scores;
}

uint32_t rank_of(const std::vector<float>& scores, EntityId truth) {
    const float target = scores.at(truth);
    uint32_t greater = 0;
    for (const float s : scores) greater += s > target;
    return greater + 1;
}

std::vector<float> score_query(const TemporalKG& kg, const Query& query,
                               const Parameters<float>& params,
                               const Vocabulary& vocab,
                               const IntervalDictionary& dict,
                               const EvalConfig& config, Rng& rng) {
    const int draws = std::max(1, config.context_draws);
    std::vector<double> sum;
    for (int d = 0; d < draws; ++d) {
        const auto seq = build_query_sequence(kg, query, vocab, dict, config, rng);
        const auto scores = score_entities(params, seq, vocab);
        if (sum.empty()) sum.assign(scores.size(), 0.0);
        for (size_t i = 0; i < scores.size(); ++i) sum[i] += scores[i];
    }
    std::vector<float> mean(sum.size());
    for (size_t i = 0; i < sum.size(); ++i)
        mean[i] = static_cast<float>(sum[i] / draws);
    return mean;
}

EvalReport evaluate_queries(const TemporalKG& kg, const std::vector<Query>& queries,
                            const Parameters<float>& params, const Vocabulary& vocab,
                            const IntervalDictionary& dict, const EvalConfig& config) {
    std::vector<uint32_t> ranks(queries.size(), 0);
    parallel_for(queries.size(), config.threads, [&](size_t i) {
        Rng rng(mix64(config.seed, fnv1a64("eval"), i));
        const auto scores = score_query(kg, queries[i], params, vocab, dict, config, rng);
        ranks[i] = rank_of(scores, queries[i].truth);
    });

    EvalReport report;
    report.ranks.reserve(queries.size());
    std::vector<uint32_t> object_ranks, subject_ranks;
    for (size_t i = 0; i < queries.size(); ++i) {
        report.ranks.push_back(RankingResult{queries[i], ranks[i]});
        if (queries[i].direction == Direction::PredictObject)
            object_ranks.push_back(ranks[i]);
        else
            subject_ranks.push_back(ranks[i]);
    }
    report.pooled = Metrics::from_ranks(ranks);
    report.object_queries = Metrics::from_ranks(object_ranks);
    report.subject_queries = Metrics::from_ranks(subject_ranks);
    return report;
}

EvalReport evaluate(const TemporalKG& kg, Split split, const Parameters<float>& params,
                    const Vocabulary& vocab, const IntervalDictionary& dict,
                    const EvalConfig& config) {
    const auto [begin, end] = kg.split_range(split);
    std::vector<Query> queries;
    queries.reserve(2 * (end - begin));
    for (size_t i = begin; i < end; ++i) {
        queries.push_back(query_from_quadruple(kg.quadruples()[i], Direction::PredictObject));
        queries.push_back(query_from_quadruple(kg.quadruples()[i], Direction::PredictSubject));
    }
    return evaluate_queries(kg, queries, params, vocab, dict, config);
}

EvalReport run_ablation(const TemporalKG& kg, const Vocabulary& vocab,
                        const IntervalDictionary& dict, TrainConfig train_config,
                        EvalConfig eval_config, PromptVariant variant, Split split,
                        std::ostream* progress) {
    train_config.variant = variant;
    eval_config.variant = variant;
    const auto trained = train(kg, vocab, dict, train_config, nullptr, nullptr, progress);
    return evaluate(kg, split, trained.params, vocab, dict, eval_config);
}

ValidationHook make_validation_hook(const TemporalKG& kg, const Vocabulary& vocab,
                                    const IntervalDictionary& dict,
                                    const EvalConfig& config, size_t max_queries) {
    const auto [begin, end] = kg.split_range(Split::Valid);
    std::vector<Query> all;
    for (size_t i = begin; i < end; ++i) {
        all.push_back(query_from_quadruple(kg.quadruples()[i], Direction::PredictObject));
        all.push_back(query_from_quadruple(kg.quadruples()[i], Direction::PredictSubject));
    }
    Rng rng(mix64(config.seed, fnv1a64("validation_subset")));
    rng.shuffle(all);
    if (all.size() > max_queries) all.resize(max_queries);
    return [=, &kg, &vocab, &dict](const Parameters<float>& params) {
        return evaluate_queries(kg, all, params, vocab, dict, config).pooled.mrr;
    };
}

std::string metrics_tsv(const EvalReport& report) {
    std::ostringstream os;
    auto emit = [&](const std::string& prefix, const Metrics& m) {
        os << prefix << "mrr\t" << m.mrr << '\n';
        os << prefix << "hits@1\t" << m.hits1 << '\n';
        os << prefix << "hits@3\t" << m.hits3 << '\n';
        os << prefix << "hits@10\t" << m.hits10 << '\n';
        os << prefix << "queries\t" << m.count << '\n';
    };
    emit("", report.pooled);
    emit("object.", report.object_queries);
    emit("subject.", report.subject_queries);
    return os.str();
}

std::string attention_report(const Parameters<float>& params,
                             const PromptSequence& seq, const Vocabulary& vocab) {
    const auto batch = assemble_batch({unmasked_row(seq.tokens)}, Vocabulary::kPad);
    const auto probs = attention_probs(params, batch);
    std::ostringstream os;
    os << "tokens";
    for (const TokenId id : seq.tokens) os << '\t' << vocab.token(id);
    os << '\n';
    for (size_t layer = 0; layer < probs.size(); ++layer) {
        for (size_t head = 0; head < probs[layer].size(); ++head) {
            os << "layer " << layer << " head " << head << '\n';
            const auto& m = probs[layer][head];
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                for (Eigen::Index j = 0; j < m.cols(); ++j)
                    os << (j ? "\t" : "") << m(i, j);
                os << '\n';
            }
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Relation-pair mining
// ---------------------------------------------------------------------------

MinerResult mine_relation_pairs(const TemporalKG& kg, const MinerConfig& config) {
    // Group train facts by (subject, object).
    std::unordered_map<uint64_t, std::vector<std::pair<Timestamp, RelationId>>> groups;
    const auto [begin, end] = kg.split_range(Split::Train);
    for (size_t i = begin; i < end; ++i) {
        const auto& q = kg.quadruples()[i];
        const uint64_t key =
            (static_cast<uint64_t>(q.subject) << 32) | static_cast<uint64_t>(q.object);
        groups[key].emplace_back(q.t, q.relation);
    }

    std::map<std::pair<RelationId, RelationId>, std::vector<int64_t>> intervals;
    for (auto& [key, facts] : groups) {
        std::sort(facts.begin(), facts.end());
        for (size_t i = 0; i < facts.size(); ++i) {
            for (size_t j = i + 1; j < facts.size(); ++j) {
                const int64_t gap = facts[j].first - facts[i].first;
                if (gap <= 0) continue;  // same-day facts have no order
                if (gap > config.window) break;
                intervals[{facts[i].second, facts[j].second}].push_back(gap);
            }
        }
    }

    MinerResult result;
    for (const auto& [pair, gaps] : intervals) {
        const auto support = static_cast<uint32_t>(gaps.size());
        if (support < config.min_support) continue;
        const auto reverse_it = intervals.find({pair.second, pair.first});
        const size_t reverse =
            reverse_it == intervals.end() ? 0 : reverse_it->second.size();
        const double purity = static_cast<double>(support) /
                              static_cast<double>(support + reverse);
        if (purity < config.order_purity) continue;
        auto sorted = gaps;
        std::sort(sorted.begin(), sorted.end());
        const size_t n = sorted.size();
        const double median =
            n % 2 == 1 ? static_cast<double>(sorted[n / 2])
                       : (static_cast<double>(sorted[n / 2 - 1]) +
                          static_cast<double>(sorted[n / 2])) / 2.0;
        result.pairs.push_back(RelationPair{pair.first, pair.second, support,
                                            purity, median});
    }
    std::sort(result.pairs.begin(), result.pairs.end(),
              [](const RelationPair& a, const RelationPair& b) {
                  return std::tie(b.support, a.pre, a.post) <
                         std::tie(a.support, b.pre, b.post);
              });

    std::vector<bool> keep(kg.relation_count(), false);
    for (const auto& p : result.pairs) {
        keep[p.pre] = true;
        keep[p.post] = true;
    }
    const auto [tb, te] = kg.split_range(Split::Test);
    for (size_t i = tb; i < te; ++i)
        if (keep[kg.quadruples()[i].relation])
            result.filtered_test.push_back(kg.quadruples()[i]);
    return result;
}

std::string pairs_tsv(const MinerResult& result, const TemporalKG& kg) {
    std::ostringstream os;
    for (const auto& p : result.pairs)
        os << kg.relation_name(p.pre) << '\t' << kg.relation_name(p.post) << '\t'
           << p.support << '\t' << p.median_interval << '\n';
    return os.str();
}

}  // namespace ppt
