#include "doctest.h"

#include <algorithm>
#include <map>

#include "ppt/sampler.hpp"
#include "support/fixtures.hpp"

using namespace ppt;
using namespace ppt::testing;

TEST_CASE("draw_k") {
    SamplerConfig cfg;
    Rng rng(1);

    SUBCASE("degenerate range always returns the single value") {
        cfg.k_min = cfg.k_max = 4;
        for (int i = 0; i < 20; ++i) CHECK(draw_k(cfg, rng) == 4);
    }
    SUBCASE("values stay inside [2, 12]") {
        cfg.k_min = 2;
        cfg.k_max = 12;
        for (int i = 0; i < 500; ++i) {
            const int k = draw_k(cfg, rng);
            CHECK(k >= 2);
            CHECK(k <= 12);
        }
    }
    SUBCASE("empirical histogram is uniform within 0.03") {
        cfg.k_min = 2;
        cfg.k_max = 4;
        std::map<int, int> counts;
        const int n = 10000;
        for (int i = 0; i < n; ++i) ++counts[draw_k(cfg, rng)];
        for (const auto& [k, c] : counts) {
            const double freq = static_cast<double>(c) / n;
            CHECK(std::abs(freq - 1.0 / 3.0) < 0.03);
        }
        CHECK(counts.size() == 3);
    }
    SUBCASE("invalid range throws") {
        cfg.k_min = 5;
        cfg.k_max = 4;
        CHECK_THROWS_AS(draw_k(cfg, rng), std::invalid_argument);
    }
}

TEST_CASE("sample_tsg") {
    TempDir dir;
    DatasetSpec spec;
    spec.entities = 5;
    spec.relations = 2;
    spec.train = {{0, 0, 1, 3}, {0, 1, 2, 1}, {0, 0, 3, 7},
                  {2, 0, 0, 5}, {3, 1, 0, 2}, {1, 1, 4, 9}};
    spec.valid = {{0, 0, 1, 20}};
    spec.test = {{0, 1, 2, 30}};
    const auto kg = load_dataset(dir, spec);

    SUBCASE("pool of size one forces identical copies") {
        Rng rng(3);
        const auto tsg = sample_tsg(kg, 1, TsgKind::FixSubject, 3, rng);
        REQUIRE(tsg.has_value());
        CHECK(tsg->quads.size() == 3);
        for (const auto& q : tsg->quads)
            CHECK(q == Quadruple{1, 1, 4, 9});
    }
    SUBCASE("timestamps come out sorted and the fixed slot is constant") {
        Rng rng(7);
        for (int trial = 0; trial < 50; ++trial) {
            const auto tsg = sample_tsg(kg, 0, TsgKind::FixSubject, 4, rng);
            REQUIRE(tsg.has_value());
            for (size_t i = 1; i < tsg->quads.size(); ++i)
                CHECK(tsg->quads[i - 1].t <= tsg->quads[i].t);
            for (const auto& q : tsg->quads) CHECK(q.subject == 0);
        }
        for (int trial = 0; trial < 50; ++trial) {
            const auto tsg = sample_tsg(kg, 0, TsgKind::FixObject, 4, rng);
            REQUIRE(tsg.has_value());
            for (const auto& q : tsg->quads) CHECK(q.object == 0);
        }
        for (int trial = 0; trial < 50; ++trial) {
            const auto tsg = sample_tsg(kg, 1, TsgKind::FixRelation, 4, rng);
            REQUIRE(tsg.has_value());
            for (const auto& q : tsg->quads) CHECK(q.relation == 1);
        }
    }
    SUBCASE("only train facts are sampled") {
        Rng rng(11);
        for (int trial = 0; trial < 100; ++trial) {
            const auto tsg = sample_tsg(kg, 0, TsgKind::FixSubject, 5, rng);
            REQUIRE(tsg.has_value());
            for (const auto& q : tsg->quads) CHECK(q.t <= 7);
        }
    }
    SUBCASE("time upper bound is strict") {
        Rng rng(13);
        for (int trial = 0; trial < 100; ++trial) {
            const auto tsg = sample_tsg(kg, 0, TsgKind::FixSubject, 5, rng, Timestamp{3});
            REQUIRE(tsg.has_value());
            for (const auto& q : tsg->quads) CHECK(q.t < 3);
        }
    }
    SUBCASE("empty pool signals no history") {
        Rng rng(17);
        CHECK_FALSE(sample_tsg(kg, 4, TsgKind::FixSubject, 3, rng).has_value());
        CHECK_FALSE(sample_tsg(kg, 0, TsgKind::FixSubject, 3, rng, Timestamp{1}).has_value());
    }
    SUBCASE("identical seeds reproduce identical draws") {
        Rng a(42), b(42);
        for (int trial = 0; trial < 20; ++trial) {
            const auto ta = sample_tsg(kg, 0, TsgKind::FixSubject, 4, a);
            const auto tb = sample_tsg(kg, 0, TsgKind::FixSubject, 4, b);
            REQUIRE(ta.has_value());
            REQUIRE(tb.has_value());
            CHECK(ta->quads == tb->quads);
        }
    }
}

TEST_CASE("tsg_to_tig computes adjacent intervals") {
    Tsg tsg;
    tsg.kind = TsgKind::FixSubject;
    tsg.anchor = 0;

    SUBCASE("worked two-fact example: 2 and 130 give intervals 0 and 128") {
        tsg.quads = {{0, 0, 1, 2}, {0, 1, 2, 130}};
        const auto tig = tsg_to_tig(tsg);
        REQUIRE(tig.items.size() == 2);
        CHECK(tig.items[0].interval == 0);
        CHECK(tig.items[1].interval == 128);
        CHECK(tig.items[1].subject == 0);
        CHECK(tig.items[1].relation == 1);
        CHECK(tig.items[1].object == 2);
    }
    SUBCASE("single element has interval 0") {
        tsg.quads = {{0, 0, 1, 99}};
        const auto tig = tsg_to_tig(tsg);
        REQUIRE(tig.items.size() == 1);
        CHECK(tig.items[0].interval == 0);
    }
    SUBCASE("pairwise differences by hand: 5, 5, 9") {
        tsg.quads = {{0, 0, 1, 5}, {0, 0, 2, 5}, {0, 0, 3, 9}};
        const auto tig = tsg_to_tig(tsg);
        REQUIRE(tig.items.size() == 3);
        CHECK(tig.items[0].interval == 0);
        CHECK(tig.items[1].interval == 0);
        CHECK(tig.items[2].interval == 4);
    }
}

TEST_CASE("interval telescoping holds for sampled sequences") {
    TempDir dir;
    auto spec = tiny_dataset();
    const auto kg = load_dataset(dir, spec);
    Rng rng(5);
    SamplerConfig cfg;
    cfg.k_min = 1;
    cfg.k_max = 6;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto anchor = static_cast<EntityId>(rng.uniform_index(kg.entity_count()));
        const auto tsg = sample_tsg(kg, anchor, TsgKind::FixSubject, draw_k(cfg, rng), rng);
        if (!tsg) continue;
        const auto tig = tsg_to_tig(*tsg);
        int64_t total = 0;
        for (const auto& item : tig.items) total += item.interval;
        CHECK(total == tsg->quads.back().t - tsg->quads.front().t);
        CHECK(tig.items.size() == tsg->quads.size());
        CHECK(tig.items[0].interval == 0);
    }
}

TEST_CASE("anchor picker follows configured weights") {
    TempDir dir;
    DatasetSpec spec;
    spec.entities = 3;
    spec.relations = 1;
    spec.train = {{0, 0, 0, 1}, {0, 0, 0, 2}, {0, 0, 0, 3}, {1, 0, 1, 4}};
    spec.valid = {{0, 0, 1, 10}};
    spec.test = {{1, 0, 2, 20}};
    const auto kg = load_dataset(dir, spec);

    SUBCASE("frequency weights 0.75/0.25 over a thousand draws") {
        AnchorPicker picker(kg, SamplingStrategy::FrequencyBased);
        Rng rng(6);
        std::vector<int> counts(3, 0);
        const int n = 1000;
        for (int i = 0; i < n; ++i) ++counts[picker.pick(rng)];
        CHECK(std::abs(counts[0] / static_cast<double>(n) - 0.75) < 0.05);
        CHECK(std::abs(counts[1] / static_cast<double>(n) - 0.25) < 0.05);
        CHECK(counts[2] == 0);  // zero train appearances
    }
    SUBCASE("uniform strategy spreads draws evenly") {
        AnchorPicker picker(kg, SamplingStrategy::Uniform);
        Rng rng(8);
        std::vector<int> counts(3, 0);
        for (int i = 0; i < 3000; ++i) ++counts[picker.pick(rng)];
        for (const int c : counts)
            CHECK(std::abs(c / 3000.0 - 1.0 / 3.0) < 0.05);
    }
}

TEST_CASE("randomize_timestamps stays ordered, bounded, and reproducible") {
    Tsg base;
    base.kind = TsgKind::FixRelation;
    base.anchor = 0;
    base.quads = {{0, 0, 1, 10}, {1, 0, 2, 20}, {2, 0, 3, 30}, {3, 0, 4, 40}};

    Tsg a = base, b = base;
    Rng ra(9), rb(9);
    randomize_timestamps(a, 0, 100, ra);
    randomize_timestamps(b, 0, 100, rb);
    CHECK(a.quads == b.quads);
    for (size_t i = 0; i < a.quads.size(); ++i) {
        CHECK(a.quads[i].t >= 0);
        CHECK(a.quads[i].t <= 100);
        if (i > 0) CHECK(a.quads[i - 1].t <= a.quads[i].t);
    }
    // fact triples survive, only order and timestamps change
    auto triples = [](const Tsg& t) {
        std::vector<std::tuple<EntityId, RelationId, EntityId>> v;
        for (const auto& q : t.quads) v.emplace_back(q.subject, q.relation, q.object);
        std::sort(v.begin(), v.end());
        return v;
    };
    CHECK(triples(a) == triples(base));
}

TEST_CASE("tig debug dump is line-oriented") {
    Tig tig;
    tig.items = {{1, 2, 3, 0}, {4, 5, 6, 42}};
    CHECK(to_tsv(tig) == "1\t2\t3\t0\n4\t5\t6\t42\n");
}
