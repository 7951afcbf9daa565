#include "doctest.h"

#include <cmath>
#include <vector>

#include "ppt/encoder.hpp"

using namespace ppt;

namespace {

ModelConfig tiny_config(int vocab, int seq, int layers = 1, int heads = 1,
                        int dim = 8, int ff = 16) {
    ModelConfig cfg;
    cfg.layers = layers;
    cfg.heads = heads;
    cfg.model_dim = dim;
    cfg.ff_dim = ff;
    cfg.max_seq_len = seq;
    cfg.vocab_size = vocab;
    return cfg;
}

// ---------------------------------------------------------------------------
// Independent dense-algebra oracle for the single-token, 1-layer, 1-head
// case: attention over one position is the identity on V, so the whole
// network is a chain of affine maps, layer norms, and GELU, reproduced here
// with plain loops.
// ---------------------------------------------------------------------------

std::vector<double> oracle_layer_norm(const std::vector<double>& x,
                                      const double* gain, const double* bias) {
    const size_t d = x.size();
    double mean = 0.0;
    for (const double v : x) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (const double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    std::vector<double> out(d);
    for (size_t i = 0; i < d; ++i)
        out[i] = (x[i] - mean) * inv * gain[i] + bias[i];
    return out;
}

// y = x * W + b with W stored row-major (in x out).
std::vector<double> oracle_affine(const std::vector<double>& x, const Mat<double>& w,
                                  const Vec<double>& b) {
    std::vector<double> y(static_cast<size_t>(w.cols()), 0.0);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
        double acc = b(j);
        for (Eigen::Index i = 0; i < w.rows(); ++i) acc += x[static_cast<size_t>(i)] * w(i, j);
        y[static_cast<size_t>(j)] = acc;
    }
    return y;
}

std::vector<double> oracle_single_token_logits(const Parameters<double>& p,
                                               int32_t token) {
    const int d = p.config.model_dim;
    std::vector<double> x(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) x[static_cast<size_t>(i)] = p.token_emb(token, i) + p.pos_emb(0, i);
    const auto& l = p.layers[0];

    const auto v = oracle_affine(x, l.wv, l.bv);          // softmax over self = 1
    const auto attn = oracle_affine(v, l.wo, l.bo);
    std::vector<double> r1(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) r1[static_cast<size_t>(i)] = x[static_cast<size_t>(i)] + attn[static_cast<size_t>(i)];
    const auto h1 = oracle_layer_norm(r1, l.ln1_gain.data(), l.ln1_bias.data());

    auto z = oracle_affine(h1, l.w1, l.b1);
    for (auto& zi : z) zi = 0.5 * zi * (1.0 + std::erf(zi / std::sqrt(2.0)));
    const auto f = oracle_affine(z, l.w2, l.b2);
    std::vector<double> r2(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) r2[static_cast<size_t>(i)] = h1[static_cast<size_t>(i)] + f[static_cast<size_t>(i)];
    const auto h2 = oracle_layer_norm(r2, l.ln2_gain.data(), l.ln2_bias.data());

    std::vector<double> logits(static_cast<size_t>(p.config.vocab_size));
    for (int t = 0; t < p.config.vocab_size; ++t) {
        double acc = p.out_bias(t);
        for (int i = 0; i < d; ++i) acc += h2[static_cast<size_t>(i)] * p.token_emb(t, i);
        logits[static_cast<size_t>(t)] = acc;
    }
    return logits;
}

MaskedBatch single_row_batch(const std::vector<int32_t>& tokens,
                             const std::vector<int>& masked_positions = {}) {
    MaskedRow row = unmasked_row(tokens);
    for (const int i : masked_positions) {
        row.masked[static_cast<size_t>(i)] = 1;
        row.target[static_cast<size_t>(i)] = tokens[static_cast<size_t>(i)];
    }
    return assemble_batch({row}, 0);
}

}  // namespace

TEST_CASE("init_params is deterministic and honors entity overrides") {
    const auto cfg = tiny_config(12, 6);
    const auto a = init_params<double>(cfg, nullptr, 99);
    const auto b = init_params<double>(cfg, nullptr, 99);
    auto& am = const_cast<Parameters<double>&>(a);
    auto& bm = const_cast<Parameters<double>&>(b);
    auto ab = am.blocks();
    auto bb = bm.blocks();
    for (size_t i = 0; i < ab.size(); ++i)
        for (size_t j = 0; j < ab[i].size; ++j)
            CHECK(ab[i].data[j] == bb[i].data[j]);

    const auto c = init_params<double>(cfg, nullptr, 100);
    CHECK(c.token_emb(0, 0) != a.token_emb(0, 0));

    std::unordered_map<int32_t, std::vector<double>> inits;
    inits[7] = std::vector<double>(8, 0.5);
    const auto d = init_params<double>(cfg, &inits, 99);
    for (int j = 0; j < 8; ++j) CHECK(d.token_emb(7, j) == doctest::Approx(0.5));
    // other rows match the no-override init
    for (int j = 0; j < 8; ++j) CHECK(d.token_emb(3, j) == a.token_emb(3, j));
    CHECK(a.layers[0].ln1_gain(0) == 1.0);
    CHECK(a.layers[0].bq(0) == 0.0);
}

TEST_CASE("forward matches the dense-algebra oracle on a single token") {
    const auto cfg = tiny_config(13, 1);
    const auto params = init_params<double>(cfg, nullptr, 7);
    const auto batch = single_row_batch({5});
    const auto logits = forward(params, batch);
    const auto expected = oracle_single_token_logits(params, 5);
    for (int t = 0; t < cfg.vocab_size; ++t)
        CHECK(logits(0, t) == doctest::Approx(expected[static_cast<size_t>(t)]).epsilon(1e-10));
}

TEST_CASE("padding is isolated from real positions") {
    const auto cfg = tiny_config(12, 8, 2, 2, 8, 16);
    const auto params = init_params<double>(cfg, nullptr, 3);
    const std::vector<int32_t> tokens = {4, 9, 6};

    const auto bare = single_row_batch(tokens);
    MaskedRow row = unmasked_row(tokens);
    MaskedRow longer = unmasked_row({4, 9, 6, 2, 2});
    auto padded = assemble_batch({row, longer}, 0);  // row 0 padded to width 5
    const auto logits_bare = forward(params, bare);
    const auto logits_padded = forward(params, padded);
    for (int c = 0; c < 3; ++c)
        for (int t = 0; t < cfg.vocab_size; ++t)
            CHECK(logits_bare(c, t) ==
                  doctest::Approx(logits_padded(c, t)).epsilon(1e-12));

    // an all-pad row still produces finite logits
    MaskedBatch all_pad;
    all_pad.rows = 1;
    all_pad.cols = 4;
    all_pad.input.assign(4, 0);
    all_pad.attend.assign(4, 0);
    all_pad.masked.assign(4, 0);
    all_pad.target.assign(4, -1);
    const auto logits_pad = forward(params, all_pad);
    CHECK(logits_pad.allFinite());
}

TEST_CASE("reversing a padding-free sequence with its positions permutes logits") {
    const auto cfg = tiny_config(15, 5, 2, 2, 8, 16);
    const auto params = init_params<double>(cfg, nullptr, 11);
    const std::vector<int32_t> tokens = {3, 8, 14, 2, 6};
    const auto logits = forward(params, single_row_batch(tokens));

    auto reversed_params = params;
    for (int i = 0; i < 5; ++i)
        reversed_params.pos_emb.row(i) = params.pos_emb.row(4 - i);
    std::vector<int32_t> reversed_tokens(tokens.rbegin(), tokens.rend());
    const auto reversed_logits =
        forward(reversed_params, single_row_batch(reversed_tokens));

    for (int c = 0; c < 5; ++c)
        for (int t = 0; t < cfg.vocab_size; ++t)
            CHECK(logits(c, t) ==
                  doctest::Approx(reversed_logits(4 - c, t)).epsilon(1e-10));
}

TEST_CASE("mlm_loss on hand-computable cases") {
    const auto cfg = tiny_config(10, 4);

    SUBCASE("uniform logits give ln(vocab)") {
        const auto batch = single_row_batch({1, 2, 3}, {0, 2});
        Mat<double> logits = Mat<double>::Zero(3, 10);
        CHECK(mlm_loss(logits, batch) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
    }

    SUBCASE("near-one-hot logits give near-zero loss") {
        const auto batch = single_row_batch({1, 2, 3}, {1});
        Mat<double> logits = Mat<double>::Zero(3, 10);
        logits(1, 2) = 50.0;  // target of position 1 is token 2
        CHECK(mlm_loss(logits, batch) < 1e-3);
    }

    SUBCASE("two masked positions match scalar arithmetic") {
        const auto batch = single_row_batch({4, 5}, {0, 1});
        Mat<double> logits(2, 10);
        logits.setConstant(0.0);
        logits(0, 4) = 1.0;
        logits(0, 7) = 2.0;
        logits(1, 5) = -1.0;
        // position 0: CE = log(8*e^0 + e^1 + e^2) - 1
        const double ce0 = std::log(8.0 + std::exp(1.0) + std::exp(2.0)) - 1.0;
        // position 1: CE = log(9*e^0 + e^-1) + 1
        const double ce1 = std::log(9.0 + std::exp(-1.0)) + 1.0;
        CHECK(mlm_loss(logits, batch) ==
              doctest::Approx(0.5 * (ce0 + ce1)).epsilon(1e-12));
    }

    SUBCASE("no masked positions is an error") {
        const auto batch = single_row_batch({1, 2, 3});
        Mat<double> logits = Mat<double>::Zero(3, 10);
        CHECK_THROWS_WITH_AS(mlm_loss(logits, batch),
                             doctest::Contains("nothing to predict"), EncoderError);
    }
}

TEST_CASE("apply_random_mask") {
    Rng rng(5);

    SUBCASE("tiny ratio masks exactly one position") {
        for (int trial = 0; trial < 50; ++trial) {
            const auto row = apply_random_mask({2, 3, 4, 5, 6}, 1e-12, rng, 1);
            size_t masked = 0;
            for (const auto m : row.masked) masked += m;
            CHECK(masked == 1);
        }
    }

    SUBCASE("masked fraction concentrates near the ratio") {
        size_t masked = 0, total = 0;
        std::vector<int32_t> tokens(64, 9);
        while (total < 120000) {
            const auto row = apply_random_mask(tokens, 0.30, rng, 1);
            for (size_t i = 0; i < row.masked.size(); ++i) {
                masked += row.masked[i];
                if (row.masked[i]) {
                    CHECK(row.input[i] == 1);
                    CHECK(row.target[i] == 9);
                }
            }
            total += tokens.size();
        }
        const double fraction = static_cast<double>(masked) / static_cast<double>(total);
        CHECK(fraction >= 0.28);
        CHECK(fraction <= 0.32);
    }

    SUBCASE("padding is never masked") {
        auto row = apply_random_mask({7, 8}, 0.9, rng, 1);
        auto batch = assemble_batch({row, unmasked_row({5, 5, 5, 5})}, 0);
        for (int c = 2; c < 4; ++c) {
            CHECK(batch.attend[batch.index(0, c)] == 0);
            CHECK(batch.masked[batch.index(0, c)] == 0);
            CHECK(batch.input[batch.index(0, c)] == 0);
        }
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    const auto cfg = tiny_config(13, 6, 1, 1, 8, 16);
    auto params = init_params<double>(cfg, nullptr, 21);

    MaskedRow r1 = unmasked_row({3, 7, 12, 5});
    r1.masked[1] = 1;
    r1.target[1] = 7;
    r1.input[1] = 1;
    r1.masked[3] = 1;
    r1.target[3] = 5;
    r1.input[3] = 1;
    MaskedRow r2 = unmasked_row({9, 2, 11, 4, 6, 8});
    r2.masked[0] = 1;
    r2.target[0] = 9;
    r2.input[0] = 1;
    const auto batch = assemble_batch({r1, r2}, 0);

    auto grads = Parameters<double>::shaped(cfg);
    grads.set_zero();
    const double base_loss = loss_and_gradients(params, batch, grads);
    CHECK(base_loss > 0.0);

    double worst = 0.0;
    auto pblocks = params.blocks();
    auto gblocks = grads.blocks();
    for (size_t b = 0; b < pblocks.size(); ++b) {
        for (size_t i = 0; i < pblocks[b].size; ++i) {
            double& x = pblocks[b].data[i];
            const double saved = x;
            const double h = 1e-5 * std::max(1.0, std::abs(saved));
            x = saved + h;
            const double up = mlm_loss(forward(params, batch), batch);
            x = saved - h;
            const double down = mlm_loss(forward(params, batch), batch);
            x = saved;
            const double fd = (up - down) / (2.0 * h);
            const double g = gblocks[b].data[i];
            // floor keeps the ratio meaningful where both values sit below
            // finite-difference noise
            const double rel = std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("adamw on hand-derived cases") {
    const auto cfg = tiny_config(4, 2, 1, 1, 4, 8);

    SUBCASE("zero gradient moves parameters only by weight decay") {
        auto params = Parameters<double>::shaped(cfg);
        params.token_emb(0, 0) = 2.0;
        auto grads = Parameters<double>::shaped(cfg);
        auto state = OptimizerState<double>::make(cfg, 0.1, 0.5);
        adamw_step(params, grads, state);
        CHECK(params.token_emb(0, 0) == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
        CHECK(state.step == 1);
    }

    SUBCASE("one step on a scalar quadratic matches the closed form") {
        // objective f(x) = x^2 at x0 = 3 -> gradient 6
        auto params = Parameters<double>::shaped(cfg);
        params.token_emb(1, 2) = 3.0;
        auto grads = Parameters<double>::shaped(cfg);
        grads.token_emb(1, 2) = 6.0;
        auto state = OptimizerState<double>::make(cfg, 0.01, 0.1);
        adamw_step(params, grads, state);
        // m_hat = g, v_hat = g^2 after bias correction at step 1
        const double expected =
            3.0 - 0.01 * (6.0 / (std::sqrt(36.0) + 1e-8) + 0.1 * 3.0);
        CHECK(params.token_emb(1, 2) == doctest::Approx(expected).epsilon(1e-12));
        // untouched coordinates stay exactly zero
        CHECK(params.token_emb(0, 0) == 0.0);
    }
}

TEST_CASE("two hundred steps memorize a fixed micro-corpus") {
    ModelConfig cfg = tiny_config(30, 10, 2, 4, 32, 64);
    auto params = init_params<float>(cfg, nullptr, 17);
    auto state = OptimizerState<float>::make(cfg, 1e-3, 0.01);
    auto grads = Parameters<float>::shaped(cfg);

    Rng data_rng(123);
    std::vector<std::vector<int32_t>> corpus;
    for (int s = 0; s < 8; ++s) {
        std::vector<int32_t> seq(10);
        for (auto& t : seq) t = static_cast<int32_t>(data_rng.uniform_int(2, 29));
        corpus.push_back(seq);
    }

    Rng mask_rng(7);
    double first_loss = -1.0;
    double last_loss = -1.0;
    for (int step = 0; step < 200; ++step) {
        std::vector<MaskedRow> rows;
        for (const auto& seq : corpus)
            rows.push_back(apply_random_mask(seq, 0.30, mask_rng, 1));
        const auto batch = assemble_batch(rows, 0);
        grads.set_zero();
        const double loss = loss_and_gradients(params, batch, grads);
        adamw_step(params, grads, state);
        if (step == 0) first_loss = loss;
        last_loss = loss;
    }
    CHECK(first_loss > 0.0);
    CHECK(last_loss < 0.5 * first_loss);
}

TEST_CASE("thousand-step fuzz training stays finite at lr 5e-5") {
    ModelConfig cfg = tiny_config(40, 8, 1, 2, 16, 32);
    auto params = init_params<float>(cfg, nullptr, 4);
    auto state = OptimizerState<float>::make(cfg, 5e-5, 0.01);
    auto grads = Parameters<float>::shaped(cfg);
    Rng rng(99);
    for (int step = 0; step < 1000; ++step) {
        std::vector<MaskedRow> rows;
        for (int r = 0; r < 4; ++r) {
            std::vector<int32_t> seq(static_cast<size_t>(rng.uniform_int(2, 8)));
            for (auto& t : seq) t = static_cast<int32_t>(rng.uniform_int(2, 39));
            rows.push_back(apply_random_mask(seq, 0.30, rng, 1));
        }
        const auto batch = assemble_batch(rows, 0);
        grads.set_zero();
        const double loss = loss_and_gradients(params, batch, grads);
        CHECK(std::isfinite(loss));
        adamw_step(params, grads, state);
    }
    CHECK(params.all_finite());
}
