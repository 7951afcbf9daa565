#pragma once
// Shared test fixtures: temp directories and ICEWS-format dataset writers.
// Datasets are written as real files and loaded through the production
// loader so every fixture also exercises parsing and validation.

#include <array>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "ppt/kg_store.hpp"

namespace ppt::testing {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("ppt_test_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

// Quads are given as day indexes; files are written with raw timestamps
// (day * granularity).
struct DatasetSpec {
    size_t entities = 0;
    size_t relations = 0;
    std::vector<std::array<int64_t, 4>> train;  // s, r, o, day
    std::vector<std::array<int64_t, 4>> valid;
    std::vector<std::array<int64_t, 4>> test;
    int64_t granularity = 24;
    std::vector<std::string> entity_names;    // default: e<i>
    std::vector<std::string> relation_names;  // default: rel <i>
};

inline void write_dataset(const TempDir& dir, const DatasetSpec& spec) {
    auto write_quads = [&](const std::string& name,
                           const std::vector<std::array<int64_t, 4>>& quads) {
        std::ofstream out(dir.str(name), std::ios::binary);
        for (const auto& q : quads)
            out << q[0] << '\t' << q[1] << '\t' << q[2] << '\t'
                << q[3] * spec.granularity << '\n';
    };
    write_quads("train.txt", spec.train);
    write_quads("valid.txt", spec.valid);
    write_quads("test.txt", spec.test);

    std::ofstream ents(dir.str("entity2id.txt"), std::ios::binary);
    for (size_t i = 0; i < spec.entities; ++i) {
        const std::string name =
            i < spec.entity_names.size() ? spec.entity_names[i] : "e" + std::to_string(i);
        ents << name << '\t' << i << '\n';
    }
    std::ofstream rels(dir.str("relation2id.txt"), std::ios::binary);
    for (size_t i = 0; i < spec.relations; ++i) {
        const std::string name = i < spec.relation_names.size()
                                     ? spec.relation_names[i]
                                     : "rel " + std::to_string(i);
        rels << name << '\t' << i << '\n';
    }
}

inline TemporalKG load_dataset(const TempDir& dir, const DatasetSpec& spec) {
    write_dataset(dir, spec);
    return TemporalKG::load(dir.str("train.txt"), dir.str("valid.txt"),
                            dir.str("test.txt"), dir.str("entity2id.txt"),
                            dir.str("relation2id.txt"), spec.granularity);
}

// Small general-purpose graph: 4 entities, 2 relations, a few facts per split.
inline DatasetSpec tiny_dataset() {
    DatasetSpec spec;
    spec.entities = 4;
    spec.relations = 2;
    spec.train = {{0, 0, 1, 0}, {0, 0, 2, 1}, {1, 1, 2, 1},
                  {2, 0, 3, 5}, {2, 1, 3, 5}, {0, 1, 3, 6}};
    spec.valid = {{1, 0, 2, 10}, {3, 1, 0, 11}};
    spec.test = {{2, 0, 1, 20}, {3, 0, 2, 21}};
    return spec;
}

}  // namespace ppt::testing
