#pragma once
// Temporal knowledge graph store.
//
// Loads the tab-separated ICEWS-style distribution (train/valid/test data
// files plus entity2id/relation2id name maps), normalizes raw timestamps to
// day indexes, validates the chronological split ordering required by the
// extrapolation setting, and builds inverted indexes for anchored sampling.
// Immutable after load; safe for concurrent readers.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ppt {

using EntityId = uint32_t;
using RelationId = uint32_t;
using Timestamp = int64_t;  // day index (raw file value / granularity)

struct Quadruple {
    EntityId subject{};
    RelationId relation{};
    EntityId object{};
    Timestamp t{};

    friend bool operator==(const Quadruple&, const Quadruple&) = default;
};

struct Triple {
    EntityId subject{};
    RelationId relation{};
    EntityId object{};

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

enum class Split { Train, Valid, Test };

struct KgError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class TemporalKG {
public:
    // Throws KgError on malformed lines (with file:line), ids outside the
    // vocabularies, raw timestamps not divisible by the granularity, empty
    // splits, or a chronological-split violation.
    static TemporalKG load(const std::string& train_path,
                           const std::string& valid_path,
                           const std::string& test_path,
                           const std::string& entity_map_path,
                           const std::string& relation_map_path,
                           int64_t granularity);

    // All quadruples sorted by (t, subject, relation, object); because the
    // split ordering is validated, each split occupies a contiguous range.
    const std::vector<Quadruple>& quadruples() const { return quads_; }

    // [begin, end) into quadruples().
    std::pair<size_t, size_t> split_range(Split split) const;
    size_t split_size(Split split) const {
        auto [b, e] = split_range(split);
        return e - b;
    }

    size_t entity_count() const { return entity_names_.size(); }
    size_t relation_count() const { return relation_names_.size(); }
    const std::string& entity_name(EntityId e) const { return entity_names_.at(e); }
    const std::string& relation_name(RelationId r) const { return relation_names_.at(r); }

    int64_t granularity() const { return granularity_; }
    Timestamp min_timestamp() const { return quads_.front().t; }
    Timestamp max_timestamp() const { return quads_.back().t; }

    // Triples of all quadruples with timestamp t (duplicates preserved).
    std::vector<Triple> snapshot(Timestamp t) const;

    // Train-split sampling weights: weight(e) proportional to the number of
    // train quadruples in which e appears as subject or object (a quad with
    // s == o counts once). Sums to 1.
    std::vector<double> entity_frequency() const;

    // Inverted indexes: quadruple positions in ascending order (hence
    // ascending timestamp).
    const std::vector<uint32_t>& by_subject(EntityId e) const { return by_subject_.at(e); }
    const std::vector<uint32_t>& by_object(EntityId e) const { return by_object_.at(e); }
    const std::vector<uint32_t>& by_relation(RelationId r) const { return by_relation_.at(r); }

    // Writes the loaded graph back in the input format: raw timestamps
    // (day index * granularity), single tabs, every line newline-terminated.
    void dump(const std::string& train_path, const std::string& valid_path,
              const std::string& test_path, const std::string& entity_map_path,
              const std::string& relation_map_path) const;

private:
    TemporalKG() = default;

    std::vector<Quadruple> quads_;
    size_t train_end_ = 0;
    size_t valid_end_ = 0;
    std::vector<std::string> entity_names_;
    std::vector<std::string> relation_names_;
    std::vector<std::vector<uint32_t>> by_subject_;
    std::vector<std::vector<uint32_t>> by_object_;
    std::vector<std::vector<uint32_t>> by_relation_;
    int64_t granularity_ = 1;
};

}  // namespace ppt
