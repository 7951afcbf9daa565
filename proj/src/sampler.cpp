#include "ppt/sampler.hpp"

#include <algorithm>
#include <sstream>

namespace ppt {

int draw_k(const SamplerConfig& config, Rng& rng) {
    config.validate();
    return static_cast<int>(rng.uniform_int(config.k_min, config.k_max));
}

namespace {

// Candidate pool: the prefix of an inverted-index list that falls inside the
// train split and (optionally) strictly before the bound. Index lists are in
// ascending quadruple position, hence ascending timestamp, so the pool is a
// prefix found by binary search.
size_t pool_size(const TemporalKG& kg, const std::vector<uint32_t>& index,
                 std::optional<Timestamp> upper) {
    const auto& quads = kg.quadruples();
    const size_t train_end = kg.split_range(Split::Train).second;
    auto it = std::partition_point(index.begin(), index.end(), [&](uint32_t qi) {
        if (qi >= train_end) return false;
        if (upper && quads[qi].t >= *upper) return false;
        return true;
    });
    return static_cast<size_t>(it - index.begin());
}

}  // namespace

std::optional<Tsg> sample_tsg(const TemporalKG& kg, uint32_t anchor, TsgKind kind,
                              int k, Rng& rng,
                              std::optional<Timestamp> time_upper_bound) {
    if (k < 1) throw std::invalid_argument("sample_tsg: k must be positive");

    const std::vector<uint32_t>* index = nullptr;
    switch (kind) {
        case TsgKind::FixSubject: index = &kg.by_subject(anchor); break;
        case TsgKind::FixObject: index = &kg.by_object(anchor); break;
        case TsgKind::FixRelation: index = &kg.by_relation(anchor); break;
    }
    const size_t pool = pool_size(kg, *index, time_upper_bound);
    if (pool == 0) return std::nullopt;

    Tsg tsg;
    tsg.kind = kind;
    tsg.anchor = anchor;
    tsg.quads.reserve(static_cast<size_t>(k));
    const auto& quads = kg.quadruples();
    for (int i = 0; i < k; ++i)
        tsg.quads.push_back(quads[(*index)[rng.uniform_index(pool)]]);
    std::stable_sort(tsg.quads.begin(), tsg.quads.end(),
                     [](const Quadruple& a, const Quadruple& b) { return a.t < b.t; });
    return tsg;
}

Tig tsg_to_tig(const Tsg& tsg) {
    Tig tig;
    tig.kind = tsg.kind;
    tig.anchor = tsg.anchor;
    tig.items.reserve(tsg.quads.size());
    for (size_t i = 0; i < tsg.quads.size(); ++i) {
        const auto& q = tsg.quads[i];
        const int64_t interval = i == 0 ? 0 : q.t - tsg.quads[i - 1].t;
        tig.items.push_back(TigItem{q.subject, q.relation, q.object, interval});
    }
    return tig;
}

void randomize_timestamps(Tsg& tsg, Timestamp lo, Timestamp hi, Rng& rng) {
    for (auto& q : tsg.quads) q.t = rng.uniform_int(lo, hi);
    std::stable_sort(tsg.quads.begin(), tsg.quads.end(),
                     [](const Quadruple& a, const Quadruple& b) { return a.t < b.t; });
}

AnchorPicker::AnchorPicker(const TemporalKG& kg, SamplingStrategy strategy) {
    const size_t n = kg.entity_count();
    if (strategy == SamplingStrategy::FrequencyBased) {
        weights_ = kg.entity_frequency();
    } else {
        weights_.assign(n, 1.0 / static_cast<double>(n));
    }
    cdf_.resize(n);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        acc += weights_[i];
        cdf_[i] = acc;
    }
    if (!cdf_.empty()) cdf_.back() = 1.0;
}

EntityId AnchorPicker::pick(Rng& rng) const {
    const double u = rng.uniform_real();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    size_t i = static_cast<size_t>(it - cdf_.begin());
    if (i >= cdf_.size()) i = cdf_.size() - 1;
    return static_cast<EntityId>(i);
}

std::string to_tsv(const Tig& tig) {
    std::ostringstream os;
    for (const auto& item : tig.items)
        os << item.subject << '\t' << item.relation << '\t' << item.object << '\t'
           << item.interval << '\n';
    return os.str();
}

}  // namespace ppt
