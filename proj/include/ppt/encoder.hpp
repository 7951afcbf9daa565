#pragma once
// Compact bidirectional masked-token encoder with hand-derived exact
// gradients and AdamW.
//
// Post-LN transformer blocks (attention -> add&norm -> GELU feed-forward ->
// add&norm), learned position embeddings, output projection tied to the
// token embeddings plus a per-token bias. Padding is excluded from attention
// in both directions and from the loss. Everything is templated on the
// scalar so the same code runs in float32 for training and float64 for
// gradient checking.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ppt/common.hpp"

namespace ppt {

struct EncoderError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class Real>
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Real>
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ModelConfig {
    int layers = 2;
    int heads = 4;
    int model_dim = 64;
    int ff_dim = 256;
    int max_seq_len = 256;
    int vocab_size = 0;
    double mask_ratio = 0.30;
    double dropout = 0.0;

    void validate() const {
        if (layers < 1 || heads < 1 || model_dim < 1 || ff_dim < 1 ||
            max_seq_len < 1 || vocab_size < 1)
            throw EncoderError("model config: all dimensions must be positive");
        if (model_dim % heads != 0)
            throw EncoderError("model config: model_dim must be divisible by heads");
        if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
            throw EncoderError("model config: mask_ratio must be in (0,1)");
        if (!(dropout >= 0.0 && dropout < 1.0))
            throw EncoderError("model config: dropout must be in [0,1)");
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// ---------------------------------------------------------------------------
// Batches and masking
// ---------------------------------------------------------------------------

struct MaskedBatch {
    int rows = 0;
    int cols = 0;
    std::vector<int32_t> input;    // rows*cols token ids
    std::vector<uint8_t> attend;   // 1 = real token, 0 = padding
    std::vector<uint8_t> masked;   // 1 = loss position
    std::vector<int32_t> target;   // original id where masked, -1 elsewhere

    size_t index(int r, int c) const {
        return static_cast<size_t>(r) * static_cast<size_t>(cols) +
               static_cast<size_t>(c);
    }
    size_t masked_count() const {
        size_t n = 0;
        for (const auto m : masked) n += m;
        return n;
    }
};

struct MaskedRow {
    std::vector<int32_t> input;
    std::vector<uint8_t> masked;
    std::vector<int32_t> target;
};

// Each token independently becomes [MASK] with probability ratio; when a
// pass masks nothing, one position is chosen uniformly so that every row has
// at least one prediction target (the ratio -> 0 limit masks exactly one).
inline MaskedRow apply_random_mask(const std::vector<int32_t>& tokens, double ratio,
                                   Rng& rng, int32_t mask_token) {
    if (tokens.empty())
        throw EncoderError("apply_random_mask: sequence has no tokens");
    MaskedRow row;
    row.input = tokens;
    row.masked.assign(tokens.size(), 0);
    row.target.assign(tokens.size(), -1);
    size_t count = 0;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (rng.uniform_real() < ratio) {
            row.masked[i] = 1;
            row.target[i] = tokens[i];
            row.input[i] = mask_token;
            ++count;
        }
    }
    if (count == 0) {
        const size_t i = rng.uniform_index(tokens.size());
        row.masked[i] = 1;
        row.target[i] = tokens[i];
        row.input[i] = mask_token;
    }
    return row;
}

inline MaskedRow unmasked_row(const std::vector<int32_t>& tokens) {
    MaskedRow row;
    row.input = tokens;
    row.masked.assign(tokens.size(), 0);
    row.target.assign(tokens.size(), -1);
    return row;
}

// Pads rows to the longest one (never masking padding).
inline MaskedBatch assemble_batch(const std::vector<MaskedRow>& rows,
                                  int32_t pad_token) {
    if (rows.empty()) throw EncoderError("assemble_batch: empty batch");
    size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.input.size());
    if (width == 0) width = 1;
    MaskedBatch batch;
    batch.rows = static_cast<int>(rows.size());
    batch.cols = static_cast<int>(width);
    const size_t n = rows.size() * width;
    batch.input.assign(n, pad_token);
    batch.attend.assign(n, 0);
    batch.masked.assign(n, 0);
    batch.target.assign(n, -1);
    for (size_t r = 0; r < rows.size(); ++r) {
        for (size_t c = 0; c < rows[r].input.size(); ++c) {
            const size_t i = r * width + c;
            batch.input[i] = rows[r].input[c];
            batch.attend[i] = 1;
            batch.masked[i] = rows[r].masked[c];
            batch.target[i] = rows[r].target[c];
        }
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

template <class Real>
struct LayerParams {
    Mat<Real> wq, wk, wv, wo;      // model_dim x model_dim
    Vec<Real> bq, bk, bv, bo;      // model_dim
    Vec<Real> ln1_gain, ln1_bias;  // model_dim
    Mat<Real> w1;                  // model_dim x ff_dim
    Vec<Real> b1;                  // ff_dim
    Mat<Real> w2;                  // ff_dim x model_dim
    Vec<Real> b2;                  // model_dim
    Vec<Real> ln2_gain, ln2_bias;  // model_dim
};

template <class Real>
struct BlockRef {
    std::string name;
    Real* data;
    size_t size;
};

template <class Real>
struct Parameters {
    ModelConfig config;
    Mat<Real> token_emb;  // vocab_size x model_dim (also the output projection)
    Mat<Real> pos_emb;    // max_seq_len x model_dim
    std::vector<LayerParams<Real>> layers;
    Vec<Real> out_bias;   // vocab_size

    static Parameters shaped(const ModelConfig& config) {
        config.validate();
        Parameters p;
        p.config = config;
        p.token_emb = Mat<Real>::Zero(config.vocab_size, config.model_dim);
        p.pos_emb = Mat<Real>::Zero(config.max_seq_len, config.model_dim);
        p.layers.resize(static_cast<size_t>(config.layers));
        for (auto& l : p.layers) {
            l.wq = Mat<Real>::Zero(config.model_dim, config.model_dim);
            l.wk = Mat<Real>::Zero(config.model_dim, config.model_dim);
            l.wv = Mat<Real>::Zero(config.model_dim, config.model_dim);
            l.wo = Mat<Real>::Zero(config.model_dim, config.model_dim);
            l.bq = Vec<Real>::Zero(config.model_dim);
            l.bk = Vec<Real>::Zero(config.model_dim);
            l.bv = Vec<Real>::Zero(config.model_dim);
            l.bo = Vec<Real>::Zero(config.model_dim);
            l.ln1_gain = Vec<Real>::Zero(config.model_dim);
            l.ln1_bias = Vec<Real>::Zero(config.model_dim);
            l.w1 = Mat<Real>::Zero(config.model_dim, config.ff_dim);
            l.b1 = Vec<Real>::Zero(config.ff_dim);
            l.w2 = Mat<Real>::Zero(config.ff_dim, config.model_dim);
            l.b2 = Vec<Real>::Zero(config.model_dim);
            l.ln2_gain = Vec<Real>::Zero(config.model_dim);
            l.ln2_bias = Vec<Real>::Zero(config.model_dim);
        }
        p.out_bias = Vec<Real>::Zero(config.vocab_size);
        return p;
    }

    void set_zero() {
        for (auto& b : blocks()) std::fill(b.data, b.data + b.size, Real(0));
    }

    // Canonical block order; init, AdamW, checkpointing, and the gradient
    // check all walk this list.
    std::vector<BlockRef<Real>> blocks() {
        std::vector<BlockRef<Real>> out;
        auto add = [&](const std::string& name, auto& m) {
            out.push_back(BlockRef<Real>{name, m.data(), static_cast<size_t>(m.size())});
        };
        add("token_emb", token_emb);
        add("pos_emb", pos_emb);
        for (size_t i = 0; i < layers.size(); ++i) {
            const std::string p = "layer" + std::to_string(i) + ".";
            auto& l = layers[i];
            add(p + "wq", l.wq); add(p + "bq", l.bq);
            add(p + "wk", l.wk); add(p + "bk", l.bk);
            add(p + "wv", l.wv); add(p + "bv", l.bv);
            add(p + "wo", l.wo); add(p + "bo", l.bo);
            add(p + "ln1_gain", l.ln1_gain); add(p + "ln1_bias", l.ln1_bias);
            add(p + "w1", l.w1); add(p + "b1", l.b1);
            add(p + "w2", l.w2); add(p + "b2", l.b2);
            add(p + "ln2_gain", l.ln2_gain); add(p + "ln2_bias", l.ln2_bias);
        }
        add("out_bias", out_bias);
        return out;
    }

    bool all_finite() const {
        auto& self = const_cast<Parameters&>(*this);
        for (const auto& b : self.blocks())
            for (size_t i = 0; i < b.size; ++i)
                if (!std::isfinite(static_cast<double>(b.data[i]))) return false;
        return true;
    }

    template <class Other>
    Parameters<Other> cast() const {
        Parameters<Other> out = Parameters<Other>::shaped(config);
        auto& self = const_cast<Parameters&>(*this);
        auto src = self.blocks();
        auto dst = out.blocks();
        for (size_t i = 0; i < src.size(); ++i)
            for (size_t j = 0; j < src[i].size; ++j)
                dst[i].data[j] = static_cast<Other>(src[i].data[j]);
        return out;
    }
};

// Seeded scaled-normal init (sigma 0.02) for embeddings and linear weights,
// zeros for biases, ones for layer-norm gains. Entity rows (keyed by token
// id) are overwritten by the provided initial embeddings.
template <class Real>
Parameters<Real> init_params(
    const ModelConfig& config,
    const std::unordered_map<int32_t, std::vector<Real>>* entity_inits,
    uint64_t seed) {
    auto params = Parameters<Real>::shaped(config);
    Rng rng(mix64(seed, fnv1a64("init_params")));
    const double sigma = 0.02;
    for (auto& block : params.blocks()) {
        const bool gain = block.name.ends_with("_gain");
        const bool weight = block.name == "token_emb" || block.name == "pos_emb" ||
                            block.name.find(".w") != std::string::npos;
        if (gain) {
            std::fill(block.data, block.data + block.size, Real(1));
        } else if (weight) {
            for (size_t i = 0; i < block.size; ++i)
                block.data[i] = static_cast<Real>(rng.normal(0.0, sigma));
        } else {
            std::fill(block.data, block.data + block.size, Real(0));
        }
    }
    if (entity_inits) {
        for (const auto& [token_id, vec] : *entity_inits) {
            if (token_id < 0 || token_id >= config.vocab_size)
                throw EncoderError("entity init: token id out of range");
            if (static_cast<int>(vec.size()) != config.model_dim)
                throw EncoderError("entity init: dimension mismatch");
            for (int d = 0; d < config.model_dim; ++d)
                params.token_emb(token_id, d) = vec[static_cast<size_t>(d)];
        }
    }
    return params;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

namespace detail {

template <class Real>
Real gelu(Real x) {
    return Real(0.5) * x * (Real(1) + std::erf(x * Real(M_SQRT1_2)));
}

template <class Real>
Real gelu_grad(Real x) {
    const Real cdf = Real(0.5) * (Real(1) + std::erf(x * Real(M_SQRT1_2)));
    const Real pdf = std::exp(Real(-0.5) * x * x) * Real(0.3989422804014326779);
    return cdf + x * pdf;
}

constexpr double kLnEps = 1e-5;

// Row-wise layer norm. Caches the normalized rows and 1/std per row.
template <class Real>
void layer_norm(const Mat<Real>& x, const Vec<Real>& gain, const Vec<Real>& bias,
                Mat<Real>& normalized, Vec<Real>& inv_std, Mat<Real>& out) {
    const auto rows = x.rows();
    const auto dim = x.cols();
    normalized.resize(rows, dim);
    inv_std.resize(rows);
    out.resize(rows, dim);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Real mean = x.row(i).mean();
        const Real var = (x.row(i).array() - mean).square().sum() / Real(dim);
        const Real is = Real(1) / std::sqrt(var + Real(kLnEps));
        inv_std(i) = is;
        normalized.row(i) = ((x.row(i).array() - mean) * is).matrix();
        out.row(i) = normalized.row(i).cwiseProduct(gain.transpose()) + bias.transpose();
    }
}

template <class Real>
void layer_norm_backward(const Mat<Real>& d_out, const Mat<Real>& normalized,
                         const Vec<Real>& inv_std, const Vec<Real>& gain,
                         Mat<Real>& d_x, Vec<Real>& d_gain, Vec<Real>& d_bias) {
    const auto rows = d_out.rows();
    const auto dim = d_out.cols();
    d_x.resize(rows, dim);
    for (Eigen::Index i = 0; i < rows; ++i) {
        d_gain += d_out.row(i).cwiseProduct(normalized.row(i)).transpose();
        d_bias += d_out.row(i).transpose();
        const Eigen::Matrix<Real, 1, Eigen::Dynamic> d_hat =
            d_out.row(i).cwiseProduct(gain.transpose());
        const Real m1 = d_hat.mean();
        const Real m2 = d_hat.cwiseProduct(normalized.row(i)).mean();
        d_x.row(i) =
            ((d_hat.array() - m1 - normalized.row(i).array() * m2) * inv_std(i))
                .matrix();
    }
}

template <class Real>
struct LayerCache {
    Mat<Real> x_in;                 // S x D layer input
    Mat<Real> q, k, v;              // S x D projections
    std::vector<Mat<Real>> probs;   // per head S x S attention (zeros at pads)
    Mat<Real> concat;               // S x D head-concatenated context
    Mat<Real> attn_drop_mask;       // empty unless dropout active
    Mat<Real> residual1;            // x_in + attention output
    Mat<Real> ln1_normalized;
    Vec<Real> ln1_inv_std;
    Mat<Real> h1;                   // LN1 output
    Mat<Real> ff_z;                 // S x F pre-activation
    Mat<Real> ff_a;                 // S x F gelu(ff_z)
    Mat<Real> ff_drop_mask;
    Mat<Real> residual2;            // h1 + feed-forward output
    Mat<Real> ln2_normalized;
    Vec<Real> ln2_inv_std;
    Mat<Real> h2;                   // layer output
};

template <class Real>
struct SequenceCache {
    std::vector<int> positions;     // real (non-pad) positions
    Mat<Real> x0;                   // embedded input (post dropout)
    Mat<Real> emb_drop_mask;
    std::vector<LayerCache<Real>> layers;
};

template <class Real>
Mat<Real> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Mat<Real> mask(rows, cols);
    const Real keep_scale = static_cast<Real>(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            mask(i, j) = rng.uniform_real() < rate ? Real(0) : keep_scale;
    return mask;
}

// Forward for one batch row. Caches everything backward needs.
template <class Real>
void forward_sequence(const Parameters<Real>& params, const MaskedBatch& batch,
                      int row, Rng* dropout_rng, SequenceCache<Real>& cache) {
    const auto& cfg = params.config;
    const int seq = batch.cols;
    const int dim = cfg.model_dim;
    const int heads = cfg.heads;
    const int head_dim = dim / heads;
    const Real scale = Real(1) / std::sqrt(static_cast<Real>(head_dim));
    const bool drop = dropout_rng != nullptr && cfg.dropout > 0.0;

    cache.positions.clear();
    for (int c = 0; c < seq; ++c)
        if (batch.attend[batch.index(row, c)]) cache.positions.push_back(c);

    Mat<Real> x(seq, dim);
    for (int c = 0; c < seq; ++c) {
        const int32_t id = batch.input[batch.index(row, c)];
        if (id < 0 || id >= cfg.vocab_size)
            throw EncoderError("forward: token id out of range");
        x.row(c) = params.token_emb.row(id) + params.pos_emb.row(c);
    }
    if (drop) {
        cache.emb_drop_mask = dropout_mask<Real>(seq, dim, cfg.dropout, *dropout_rng);
        x = x.cwiseProduct(cache.emb_drop_mask);
    } else {
        cache.emb_drop_mask.resize(0, 0);
    }
    cache.x0 = x;

    cache.layers.resize(static_cast<size_t>(cfg.layers));
    for (int li = 0; li < cfg.layers; ++li) {
        auto& lp = params.layers[static_cast<size_t>(li)];
        auto& lc = cache.layers[static_cast<size_t>(li)];
        lc.x_in = x;
        lc.q.noalias() = x * lp.wq;
        lc.q.rowwise() += lp.bq.transpose();
        lc.k.noalias() = x * lp.wk;
        lc.k.rowwise() += lp.bk.transpose();
        lc.v.noalias() = x * lp.wv;
        lc.v.rowwise() += lp.bv.transpose();

        lc.probs.assign(static_cast<size_t>(heads), Mat<Real>::Zero(seq, seq));
        lc.concat = Mat<Real>::Zero(seq, dim);
        for (int h = 0; h < heads; ++h) {
            const auto qh = lc.q.middleCols(h * head_dim, head_dim);
            const auto kh = lc.k.middleCols(h * head_dim, head_dim);
            const auto vh = lc.v.middleCols(h * head_dim, head_dim);
            auto& p = lc.probs[static_cast<size_t>(h)];
            for (const int i : cache.positions) {
                // max-subtracted softmax over real key positions only
                Real best = -std::numeric_limits<Real>::infinity();
                for (const int j : cache.positions) {
                    const Real s = qh.row(i).dot(kh.row(j)) * scale;
                    p(i, j) = s;
                    best = std::max(best, s);
                }
                Real total = Real(0);
                for (const int j : cache.positions) {
                    const Real e = std::exp(p(i, j) - best);
                    p(i, j) = e;
                    total += e;
                }
                for (const int j : cache.positions) p(i, j) /= total;
            }
            lc.concat.middleCols(h * head_dim, head_dim).noalias() = p * vh;
        }

        Mat<Real> attn = lc.concat * lp.wo;
        attn.rowwise() += lp.bo.transpose();
        if (drop) {
            lc.attn_drop_mask = dropout_mask<Real>(seq, dim, cfg.dropout, *dropout_rng);
            attn = attn.cwiseProduct(lc.attn_drop_mask);
        } else {
            lc.attn_drop_mask.resize(0, 0);
        }
        lc.residual1 = x + attn;
        layer_norm(lc.residual1, lp.ln1_gain, lp.ln1_bias, lc.ln1_normalized,
                   lc.ln1_inv_std, lc.h1);

        lc.ff_z.noalias() = lc.h1 * lp.w1;
        lc.ff_z.rowwise() += lp.b1.transpose();
        lc.ff_a = lc.ff_z.unaryExpr([](Real v) { return gelu(v); });
        Mat<Real> ff = lc.ff_a * lp.w2;
        ff.rowwise() += lp.b2.transpose();
        if (drop) {
            lc.ff_drop_mask = dropout_mask<Real>(seq, dim, cfg.dropout, *dropout_rng);
            ff = ff.cwiseProduct(lc.ff_drop_mask);
        } else {
            lc.ff_drop_mask.resize(0, 0);
        }
        lc.residual2 = lc.h1 + ff;
        layer_norm(lc.residual2, lp.ln2_gain, lp.ln2_bias, lc.ln2_normalized,
                   lc.ln2_inv_std, lc.h2);
        x = lc.h2;
    }
}

}  // namespace detail

// Logits for every position, rows stacked as (batch.rows * batch.cols) x
// vocab. Padding positions neither attend nor are attended to; their logits
// are finite but meaningless and excluded from the loss.
template <class Real>
Mat<Real> forward(const Parameters<Real>& params, const MaskedBatch& batch) {
    const auto& cfg = params.config;
    if (batch.cols > cfg.max_seq_len)
        throw EncoderError("forward: sequence longer than max_seq_len");
    Mat<Real> logits(static_cast<Eigen::Index>(batch.rows) * batch.cols,
                     cfg.vocab_size);
    detail::SequenceCache<Real> cache;
    for (int r = 0; r < batch.rows; ++r) {
        detail::forward_sequence(params, batch, r, nullptr, cache);
        const Mat<Real>& h = cache.layers.empty() ? cache.x0 : cache.layers.back().h2;
        auto rows = logits.middleRows(static_cast<Eigen::Index>(r) * batch.cols,
                                      batch.cols);
        rows.noalias() = h * params.token_emb.transpose();
        rows.rowwise() += params.out_bias.transpose();
    }
    return logits;
}

// Per-layer, per-head attention probabilities for a single-row batch.
template <class Real>
std::vector<std::vector<Mat<Real>>> attention_probs(const Parameters<Real>& params,
                                                    const MaskedBatch& batch) {
    if (batch.rows != 1) throw EncoderError("attention_probs: expects one row");
    detail::SequenceCache<Real> cache;
    detail::forward_sequence(params, batch, 0, nullptr, cache);
    std::vector<std::vector<Mat<Real>>> out;
    for (const auto& layer : cache.layers) out.push_back(layer.probs);
    return out;
}

// Mean cross-entropy over masked positions.
template <class Real>
double mlm_loss(const Mat<Real>& logits, const MaskedBatch& batch) {
    const size_t total = batch.masked_count();
    if (total == 0) throw EncoderError("mlm_loss: nothing to predict");
    double loss = 0.0;
    for (int r = 0; r < batch.rows; ++r) {
        for (int c = 0; c < batch.cols; ++c) {
            const size_t i = batch.index(r, c);
            if (!batch.masked[i]) continue;
            const auto row = logits.row(static_cast<Eigen::Index>(r) * batch.cols + c);
            const double best = static_cast<double>(row.maxCoeff());
            double denom = 0.0;
            for (Eigen::Index j = 0; j < row.size(); ++j)
                denom += std::exp(static_cast<double>(row(j)) - best);
            const double logit_t = static_cast<double>(row(batch.target[i]));
            loss += std::log(denom) - (logit_t - best);
        }
    }
    return loss / static_cast<double>(total);
}

// Exact gradients of mlm_loss(forward(params, batch)). Returns the loss.
// Gradients accumulate into `grads` (call set_zero() first for a fresh
// gradient). Pass dropout_rng to train with dropout; inference-mode
// gradients (gradient checks) leave it null. Throws EncoderError naming the
// first parameter block with a non-finite gradient.
template <class Real>
double loss_and_gradients(const Parameters<Real>& params, const MaskedBatch& batch,
                          Parameters<Real>& grads, Rng* dropout_rng = nullptr) {
    const auto& cfg = params.config;
    if (batch.cols > cfg.max_seq_len)
        throw EncoderError("backward: sequence longer than max_seq_len");
    const size_t total_masked = batch.masked_count();
    if (total_masked == 0) throw EncoderError("mlm_loss: nothing to predict");

    const int seq = batch.cols;
    const int dim = cfg.model_dim;
    const int heads = cfg.heads;
    const int head_dim = dim / heads;
    const Real scale = Real(1) / std::sqrt(static_cast<Real>(head_dim));
    const Real inv_total = Real(1) / static_cast<Real>(total_masked);

    double loss = 0.0;
    detail::SequenceCache<Real> cache;
    for (int r = 0; r < batch.rows; ++r) {
        detail::forward_sequence(params, batch, r, dropout_rng, cache);
        const Mat<Real>& h_final =
            cache.layers.empty() ? cache.x0 : cache.layers.back().h2;

        // Output head: softmax CE at masked positions, tied projection.
        Mat<Real> d_h = Mat<Real>::Zero(seq, dim);
        for (int c = 0; c < seq; ++c) {
            const size_t i = batch.index(r, c);
            if (!batch.masked[i]) continue;
            Vec<Real> logits_row = params.token_emb * h_final.row(c).transpose();
            logits_row += params.out_bias;
            const Real best = logits_row.maxCoeff();
            Vec<Real> probs = (logits_row.array() - best).exp().matrix();
            const Real denom = probs.sum();
            probs /= denom;
            const int32_t target = batch.target[i];
            loss += static_cast<double>(std::log(denom) -
                                        (logits_row(target) - best));
            probs(target) -= Real(1);
            probs *= inv_total;  // d loss / d logits_row
            grads.out_bias += probs;
            grads.token_emb.noalias() += probs * h_final.row(c);
            d_h.row(c).noalias() = probs.transpose() * params.token_emb;
        }

        // Walk layers in reverse.
        for (int li = cfg.layers - 1; li >= 0; --li) {
            const auto& lp = params.layers[static_cast<size_t>(li)];
            auto& lg = grads.layers[static_cast<size_t>(li)];
            const auto& lc = cache.layers[static_cast<size_t>(li)];

            Mat<Real> d_residual2;
            detail::layer_norm_backward(d_h, lc.ln2_normalized, lc.ln2_inv_std,
                                        lp.ln2_gain, d_residual2, lg.ln2_gain,
                                        lg.ln2_bias);

            // residual2 = h1 + drop(ff_a * w2 + b2)
            Mat<Real> d_ff_out = d_residual2;
            if (lc.ff_drop_mask.size() > 0)
                d_ff_out = d_ff_out.cwiseProduct(lc.ff_drop_mask);
            lg.w2.noalias() += lc.ff_a.transpose() * d_ff_out;
            lg.b2 += d_ff_out.colwise().sum().transpose();
            Mat<Real> d_ff_a = d_ff_out * lp.w2.transpose();
            Mat<Real> d_ff_z =
                d_ff_a.cwiseProduct(lc.ff_z.unaryExpr([](Real v) {
                    return detail::gelu_grad(v);
                }));
            lg.w1.noalias() += lc.h1.transpose() * d_ff_z;
            lg.b1 += d_ff_z.colwise().sum().transpose();
            Mat<Real> d_h1 = d_residual2;
            d_h1.noalias() += d_ff_z * lp.w1.transpose();

            Mat<Real> d_residual1;
            detail::layer_norm_backward(d_h1, lc.ln1_normalized, lc.ln1_inv_std,
                                        lp.ln1_gain, d_residual1, lg.ln1_gain,
                                        lg.ln1_bias);

            // residual1 = x_in + drop(concat * wo + bo)
            Mat<Real> d_attn = d_residual1;
            if (lc.attn_drop_mask.size() > 0)
                d_attn = d_attn.cwiseProduct(lc.attn_drop_mask);
            lg.wo.noalias() += lc.concat.transpose() * d_attn;
            lg.bo += d_attn.colwise().sum().transpose();
            Mat<Real> d_concat = d_attn * lp.wo.transpose();

            Mat<Real> d_q = Mat<Real>::Zero(seq, dim);
            Mat<Real> d_k = Mat<Real>::Zero(seq, dim);
            Mat<Real> d_v = Mat<Real>::Zero(seq, dim);
            for (int h = 0; h < heads; ++h) {
                const auto& p = lc.probs[static_cast<size_t>(h)];
                const auto vh = lc.v.middleCols(h * head_dim, head_dim);
                const auto qh = lc.q.middleCols(h * head_dim, head_dim);
                const auto kh = lc.k.middleCols(h * head_dim, head_dim);
                const auto d_ctx = d_concat.middleCols(h * head_dim, head_dim);
                Mat<Real> d_p = d_ctx * vh.transpose();
                d_v.middleCols(h * head_dim, head_dim).noalias() =
                    p.transpose() * d_ctx;
                // softmax backward; zero rows/entries stay zero
                Mat<Real> d_scores(seq, seq);
                for (int i = 0; i < seq; ++i) {
                    const Real dot = d_p.row(i).dot(p.row(i));
                    d_scores.row(i) = p.row(i).cwiseProduct(
                        (d_p.row(i).array() - dot).matrix());
                }
                d_q.middleCols(h * head_dim, head_dim).noalias() =
                    d_scores * kh * scale;
                d_k.middleCols(h * head_dim, head_dim).noalias() =
                    d_scores.transpose() * qh * scale;
            }

            lg.wq.noalias() += lc.x_in.transpose() * d_q;
            lg.bq += d_q.colwise().sum().transpose();
            lg.wk.noalias() += lc.x_in.transpose() * d_k;
            lg.bk += d_k.colwise().sum().transpose();
            lg.wv.noalias() += lc.x_in.transpose() * d_v;
            lg.bv += d_v.colwise().sum().transpose();

            Mat<Real> d_x = d_residual1;  // residual path
            d_x.noalias() += d_q * lp.wq.transpose();
            d_x.noalias() += d_k * lp.wk.transpose();
            d_x.noalias() += d_v * lp.wv.transpose();
            d_h = std::move(d_x);
        }

        if (cache.emb_drop_mask.size() > 0)
            d_h = d_h.cwiseProduct(cache.emb_drop_mask);
        for (int c = 0; c < seq; ++c) {
            const int32_t id = batch.input[batch.index(r, c)];
            grads.token_emb.row(id) += d_h.row(c);
            grads.pos_emb.row(c) += d_h.row(c);
        }
    }

    for (const auto& block : grads.blocks()) {
        for (size_t i = 0; i < block.size; ++i) {
            if (!std::isfinite(static_cast<double>(block.data[i])))
                throw EncoderError("non-finite gradient in " + block.name);
        }
    }
    return loss / static_cast<double>(total_masked);
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

template <class Real>
struct OptimizerState {
    int64_t step = 0;
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    Parameters<Real> m, v;

    static OptimizerState make(const ModelConfig& config, double learning_rate,
                               double weight_decay) {
        OptimizerState st;
        st.learning_rate = learning_rate;
        st.weight_decay = weight_decay;
        st.m = Parameters<Real>::shaped(config);
        st.v = Parameters<Real>::shaped(config);
        return st;
    }
};

// Decoupled weight decay: x -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * x).
template <class Real>
void adamw_step(Parameters<Real>& params, Parameters<Real>& grads,
                OptimizerState<Real>& state) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    auto pb = params.blocks();
    auto gb = grads.blocks();
    auto mb = state.m.blocks();
    auto vb = state.v.blocks();
    for (size_t b = 0; b < pb.size(); ++b) {
        Real* x = pb[b].data;
        const Real* g = gb[b].data;
        Real* m = mb[b].data;
        Real* v = vb[b].data;
        for (size_t i = 0; i < pb[b].size; ++i) {
            const double gi = static_cast<double>(g[i]);
            const double mi = state.beta1 * static_cast<double>(m[i]) +
                              (1.0 - state.beta1) * gi;
            const double vi = state.beta2 * static_cast<double>(v[i]) +
                              (1.0 - state.beta2) * gi * gi;
            m[i] = static_cast<Real>(mi);
            v[i] = static_cast<Real>(vi);
            const double update = (mi / bc1) / (std::sqrt(vi / bc2) + state.epsilon) +
                                  state.weight_decay * static_cast<double>(x[i]);
            x[i] = static_cast<Real>(static_cast<double>(x[i]) -
                                     state.learning_rate * update);
        }
    }
}

}  // namespace ppt
