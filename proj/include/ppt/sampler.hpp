#pragma once
// Anchored random sampling of fact sequences.
//
// A Tsg is k quadruples drawn with replacement from the train split while one
// slot (subject, object, or relation) stays fixed to an anchor, then sorted
// by timestamp (stable, so same-day facts keep their sampled order). A Tig
// replaces absolute timestamps with the interval to the previous fact, with
// the first interval defined as 0.

#include <optional>
#include <vector>

#include "ppt/common.hpp"
#include "ppt/kg_store.hpp"

namespace ppt {

// Which slot the anchor occupies.
enum class TsgKind { FixSubject, FixObject, FixRelation };

enum class SamplingStrategy { Uniform, FrequencyBased };

struct Tsg {
    TsgKind kind{};
    uint32_t anchor = 0;  // EntityId or RelationId depending on kind
    std::vector<Quadruple> quads;  // timestamps non-decreasing
};

struct TigItem {
    EntityId subject{};
    RelationId relation{};
    EntityId object{};
    int64_t interval = 0;  // days since the previous fact; first item 0
};

struct Tig {
    TsgKind kind{};
    uint32_t anchor = 0;
    std::vector<TigItem> items;
};

struct SamplerConfig {
    int k_min = 2;
    int k_max = 12;
    int samples_per_anchor = 1;  // B
    SamplingStrategy strategy = SamplingStrategy::Uniform;
    uint64_t seed = 0;

    void validate() const {
        if (k_min < 1 || k_max < k_min)
            throw std::invalid_argument("sampler: need 1 <= k_min <= k_max");
        if (samples_per_anchor < 1)
            throw std::invalid_argument("sampler: samples_per_anchor must be positive");
    }
};

// Uniform integer in [k_min, k_max].
int draw_k(const SamplerConfig& config, Rng& rng);

// Draws k quadruples with replacement from the train quadruples matching the
// anchor (strictly before time_upper_bound when given) and sorts them by
// timestamp. Returns nullopt when the candidate pool is empty ("no history");
// the caller substitutes an empty-context sequence.
std::optional<Tsg> sample_tsg(const TemporalKG& kg, uint32_t anchor, TsgKind kind,
                              int k, Rng& rng,
                              std::optional<Timestamp> time_upper_bound = std::nullopt);

// Interval conversion: interval_0 = 0, interval_i = t_i - t_{i-1}.
Tig tsg_to_tig(const Tsg& tsg);

// Replaces every timestamp with a uniform draw from [lo, hi] and restores the
// non-decreasing order (used by the rand-prompts ablation).
void randomize_timestamps(Tsg& tsg, Timestamp lo, Timestamp hi, Rng& rng);

// Entity anchor selection. Under FrequencyBased, entities are drawn in
// proportion to their train-split frequency; under Uniform, all entities are
// equally likely.
class AnchorPicker {
public:
    AnchorPicker(const TemporalKG& kg, SamplingStrategy strategy);

    EntityId pick(Rng& rng) const;
    const std::vector<double>& weights() const { return weights_; }

private:
    std::vector<double> weights_;
    std::vector<double> cdf_;
};

// Debug dump, one "s\tr\to\tinterval" line per item. Not a stability contract.
std::string to_tsv(const Tig& tig);

}  // namespace ppt
