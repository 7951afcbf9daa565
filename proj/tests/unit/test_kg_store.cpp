#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "ppt/kg_store.hpp"
#include "support/fixtures.hpp"

using namespace ppt;
using namespace ppt::testing;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("loader normalizes raw timestamps by granularity") {
    TempDir dir;
    auto spec = tiny_dataset();
    const auto kg = load_dataset(dir, spec);
    REQUIRE(kg.granularity() == 24);
    CHECK(kg.quadruples().front().t == 0);
    bool found = false;
    for (const auto& q : kg.quadruples())
        if (q.t == 5) found = true;
    CHECK(found);
    CHECK(kg.entity_count() == 4);
    CHECK(kg.relation_count() == 2);
    CHECK(kg.split_size(Split::Train) == 6);
    CHECK(kg.split_size(Split::Valid) == 2);
    CHECK(kg.split_size(Split::Test) == 2);
    CHECK(kg.entity_name(2) == "e2");
}

TEST_CASE("loader accepts a fifth field and ignores it") {
    TempDir dir;
    auto spec = tiny_dataset();
    write_dataset(dir, spec);
    write_file(dir.path() / "train.txt",
               "0\t0\t1\t0\t77\n0\t0\t2\t24\t-1\n1\t1\t2\t24\t0\n");
    const auto kg = TemporalKG::load(dir.str("train.txt"), dir.str("valid.txt"),
                                     dir.str("test.txt"), dir.str("entity2id.txt"),
                                     dir.str("relation2id.txt"), 24);
    CHECK(kg.split_size(Split::Train) == 3);
}

TEST_CASE("loader rejects bad inputs with located diagnostics") {
    TempDir dir;
    auto spec = tiny_dataset();
    write_dataset(dir, spec);
    auto load = [&] {
        return TemporalKG::load(dir.str("train.txt"), dir.str("valid.txt"),
                                dir.str("test.txt"), dir.str("entity2id.txt"),
                                dir.str("relation2id.txt"), 24);
    };

    SUBCASE("empty train file") {
        write_file(dir.path() / "train.txt", "");
        CHECK_THROWS_WITH_AS(load(), doctest::Contains("empty split"), KgError);
    }
    SUBCASE("malformed line reports its number") {
        write_file(dir.path() / "train.txt", "0\t0\t1\t0\n0\t0\tx\t24\n");
        CHECK_THROWS_WITH_AS(load(), doctest::Contains("train.txt:2"), KgError);
    }
    SUBCASE("wrong field count reports its number") {
        write_file(dir.path() / "train.txt", "0\t0\t1\n");
        CHECK_THROWS_WITH_AS(load(), doctest::Contains(":1"), KgError);
    }
    SUBCASE("entity id out of vocabulary") {
        write_file(dir.path() / "train.txt", "0\t0\t9\t0\n");
        CHECK_THROWS_WITH_AS(load(), doctest::Contains("out of vocabulary"), KgError);
    }
    SUBCASE("relation id out of vocabulary") {
        write_file(dir.path() / "train.txt", "0\t5\t1\t0\n");
        CHECK_THROWS_WITH_AS(load(), doctest::Contains("out of vocabulary"), KgError);
    }
    SUBCASE("granularity must divide raw timestamps") {
        write_file(dir.path() / "train.txt", "0\t0\t1\t25\n");
        CHECK_THROWS_WITH_AS(load(), doctest::Contains("not divisible"), KgError);
    }
    SUBCASE("valid timestamp at or before train is a split-order violation") {
        // train max day is 6; a valid fact on day 6 violates strict ordering
        write_file(dir.path() / "valid.txt", "1\t0\t2\t144\n3\t1\t0\t264\n");
        CHECK_THROWS_WITH_AS(load(), doctest::Contains("split-order"), KgError);
    }
    SUBCASE("test timestamp at or before valid is a split-order violation") {
        write_file(dir.path() / "test.txt", "2\t0\t1\t264\n");
        CHECK_THROWS_WITH_AS(load(), doctest::Contains("split-order"), KgError);
    }
    SUBCASE("sparse id map is rejected") {
        write_file(dir.path() / "entity2id.txt", "e0\t0\ne1\t1\ne3\t3\ne9\t9\n");
        CHECK_THROWS_WITH_AS(load(), doctest::Contains("dense"), KgError);
    }
}

TEST_CASE("snapshot returns exactly the triples at a timestamp") {
    TempDir dir;
    DatasetSpec spec;
    spec.entities = 5;
    spec.relations = 2;
    spec.train = {{0, 0, 1, 5}, {1, 1, 2, 5}, {2, 0, 3, 5}, {3, 1, 4, 6}, {0, 1, 4, 6}};
    spec.valid = {{1, 0, 2, 10}};
    spec.test = {{2, 1, 0, 20}};
    const auto kg = load_dataset(dir, spec);

    SUBCASE("absent timestamp gives the empty set") {
        CHECK(kg.snapshot(3).empty());
    }
    SUBCASE("linear-scan oracle at t = 5") {
        auto got = kg.snapshot(5);
        std::vector<Triple> expected;
        for (const auto& q : kg.quadruples())
            if (q.t == 5) expected.push_back({q.subject, q.relation, q.object});
        std::sort(got.begin(), got.end());
        std::sort(expected.begin(), expected.end());
        CHECK(got == expected);
        CHECK(got.size() == 3);
    }
    SUBCASE("snapshots partition the quadruple multiset") {
        std::multiset<std::tuple<EntityId, RelationId, EntityId>> all, unioned;
        for (const auto& q : kg.quadruples())
            all.insert({q.subject, q.relation, q.object});
        for (Timestamp t = 0; t <= kg.max_timestamp(); ++t)
            for (const auto& tr : kg.snapshot(t))
                unioned.insert({tr.subject, tr.relation, tr.object});
        CHECK(all == unioned);
    }
}

TEST_CASE("entity_frequency weights train appearances") {
    SUBCASE("skewed 4-quad fixture gives 0.75 / 0.25") {
        TempDir dir;
        DatasetSpec spec;
        spec.entities = 3;
        spec.relations = 1;
        // e0 appears in 3 train quads, e1 in 1, e2 in none
        spec.train = {{0, 0, 0, 1}, {0, 0, 0, 2}, {0, 0, 0, 3}, {1, 0, 1, 4}};
        spec.valid = {{0, 0, 1, 10}};
        spec.test = {{1, 0, 2, 20}};
        const auto kg = load_dataset(dir, spec);
        const auto w = kg.entity_frequency();
        CHECK(w[0] == doctest::Approx(0.75));
        CHECK(w[1] == doctest::Approx(0.25));
        CHECK(w[2] == 0.0);
    }
    SUBCASE("symmetric fixture gives uniform weights") {
        TempDir dir;
        DatasetSpec spec;
        spec.entities = 4;
        spec.relations = 1;
        spec.train = {{0, 0, 1, 1}, {2, 0, 3, 2}};
        spec.valid = {{0, 0, 1, 10}};
        spec.test = {{0, 0, 1, 20}};
        const auto kg = load_dataset(dir, spec);
        const auto w = kg.entity_frequency();
        for (const auto x : w) CHECK(x == doctest::Approx(0.25));
        double sum = 0;
        for (const auto x : w) sum += x;
        CHECK(sum == doctest::Approx(1.0));
    }
}

TEST_CASE("inverted indexes agree with an exhaustive scan") {
    TempDir dir;
    auto spec = tiny_dataset();
    const auto kg = load_dataset(dir, spec);
    const auto& quads = kg.quadruples();
    for (EntityId e = 0; e < kg.entity_count(); ++e) {
        std::vector<uint32_t> expected_s, expected_o, merged;
        for (uint32_t i = 0; i < quads.size(); ++i) {
            if (quads[i].subject == e) expected_s.push_back(i);
            if (quads[i].object == e) expected_o.push_back(i);
            if (quads[i].subject == e || quads[i].object == e) merged.push_back(i);
        }
        CHECK(kg.by_subject(e) == expected_s);
        CHECK(kg.by_object(e) == expected_o);
        std::vector<uint32_t> got(kg.by_subject(e));
        got.insert(got.end(), kg.by_object(e).begin(), kg.by_object(e).end());
        std::sort(got.begin(), got.end());
        got.erase(std::unique(got.begin(), got.end()), got.end());
        CHECK(got == merged);
    }
    for (RelationId r = 0; r < kg.relation_count(); ++r) {
        std::vector<uint32_t> expected;
        for (uint32_t i = 0; i < quads.size(); ++i)
            if (quads[i].relation == r) expected.push_back(i);
        CHECK(kg.by_relation(r) == expected);
    }
}

TEST_CASE("dump then reload round-trips the graph") {
    TempDir dir;
    DatasetSpec spec = tiny_dataset();
    // duplicates are kept, not deduplicated
    spec.train.push_back(spec.train.front());
    const auto kg = load_dataset(dir, spec);

    TempDir out;
    kg.dump(out.str("train.txt"), out.str("valid.txt"), out.str("test.txt"),
            out.str("entity2id.txt"), out.str("relation2id.txt"));
    const auto kg2 = TemporalKG::load(out.str("train.txt"), out.str("valid.txt"),
                                      out.str("test.txt"), out.str("entity2id.txt"),
                                      out.str("relation2id.txt"), spec.granularity);
    CHECK(kg.quadruples() == kg2.quadruples());
    CHECK(kg.entity_count() == kg2.entity_count());
    CHECK(kg.relation_count() == kg2.relation_count());
    for (EntityId e = 0; e < kg.entity_count(); ++e)
        CHECK(kg.entity_name(e) == kg2.entity_name(e));
    CHECK(kg.split_size(Split::Train) == 7);

    // format details: single tabs, every line newline-terminated
    const auto text = slurp(out.str("train.txt"));
    CHECK(text.back() == '\n');
    const auto first_line = text.substr(0, text.find('\n'));
    CHECK(std::count(first_line.begin(), first_line.end(), '\t') == 3);
}
