#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "irp/optimizer.hpp"
#include "irp/pipeline.hpp"
#include "irp/rng.hpp"
#include "irp/tape.hpp"
#include "irp/tensor.hpp"

namespace irp {

enum class FusionMode { full_concat, mmr };

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t d_model = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t d_ff = 256;
    std::size_t max_len = 128;
    double dropout = 0.1;
    FusionMode fusion_mode = FusionMode::full_concat;

    void validate() const {
        if (vocab_size < 4) throw std::invalid_argument("ModelConfig: vocab_size too small");
        if (d_model == 0 || d_model % n_heads != 0)
            throw std::invalid_argument("ModelConfig: d_model must be divisible by n_heads");
        if (max_len < 8) throw std::invalid_argument("ModelConfig: max_len must be >= 8");
        if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("ModelConfig: bad dropout");
    }
};

struct LayerParams {
    Tensor wq, wk, wv, wo;      // d x d
    Tensor bq, bv, bo;          // 1 x d; keys carry no bias: softmax cancels
                                // a per-row constant shift exactly
    Tensor ln1_g, ln1_b;        // 1 x d
    Tensor ln2_g, ln2_b;        // 1 x d
    Tensor w_ff1, b_ff1;        // d x d_ff, 1 x d_ff
    Tensor w_ff2, b_ff2;        // d_ff x d, 1 x d
};

/// All trainable weights. Tensors are visited in a fixed order by
/// for_each_param; the optimizer, checkpoints and gradient plumbing all rely
/// on that order being stable.
struct ModelParams {
    ModelConfig config;
    Tensor tok_emb;  // vocab x d
    Tensor pos_emb;  // max_len x d
    std::vector<LayerParams> layers;
    Tensor ln_f_g, ln_f_b;  // 1 x d
    Tensor head_w;          // d x 1
    Tensor head_b;          // 1 x 1

    template <typename F>
    void for_each_param(F&& f) {
        const_cast<const ModelParams*>(this)->for_each_param(
            [&](const std::string& n, const Tensor& t) { f(n, const_cast<Tensor&>(t)); });
    }

    template <typename F>
    void for_each_param(F&& f) const {
        f("tok_emb", tok_emb);
        f("pos_emb", pos_emb);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            const LayerParams& L = layers[l];
            f(p + "attn.wq", L.wq);
            f(p + "attn.bq", L.bq);
            f(p + "attn.wk", L.wk);
            f(p + "attn.wv", L.wv);
            f(p + "attn.bv", L.bv);
            f(p + "attn.wo", L.wo);
            f(p + "attn.bo", L.bo);
            f(p + "ln1.g", L.ln1_g);
            f(p + "ln1.b", L.ln1_b);
            f(p + "ln2.g", L.ln2_g);
            f(p + "ln2.b", L.ln2_b);
            f(p + "ffn.w1", L.w_ff1);
            f(p + "ffn.b1", L.b_ff1);
            f(p + "ffn.w2", L.w_ff2);
            f(p + "ffn.b2", L.b_ff2);
        }
        f("ln_f.g", ln_f_g);
        f("ln_f.b", ln_f_b);
        f("head.w", head_w);
        f("head.b", head_b);
    }

    std::vector<std::pair<std::string, Tensor*>> named_tensors() {
        std::vector<std::pair<std::string, Tensor*>> out;
        for_each_param([&](const std::string& n, Tensor& t) { out.emplace_back(n, &t); });
        return out;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for_each_param([&](const std::string&, Tensor& t) { n += t.numel(); });
        return n;
    }
};

namespace detail {

inline Tensor glorot(std::size_t fan_in, std::size_t fan_out, std::size_t rows, std::size_t cols, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

} // namespace detail

/// Glorot-uniform weights, zero biases, unit layer-norm scales.
/// Deterministic in the seed.
inline ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(derive_seed(seed, "init"));
    const std::size_t d = config.d_model, ff = config.d_ff;
    ModelParams p;
    p.config = config;
    p.tok_emb = detail::glorot(config.vocab_size, d, config.vocab_size, d, rng);
    p.pos_emb = detail::glorot(config.max_len, d, config.max_len, d, rng);
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        LayerParams L;
        L.wq = detail::glorot(d, d, d, d, rng);
        L.wk = detail::glorot(d, d, d, d, rng);
        L.wv = detail::glorot(d, d, d, d, rng);
        L.wo = detail::glorot(d, d, d, d, rng);
        L.bq = Tensor({1, d});
        L.bv = Tensor({1, d});
        L.bo = Tensor({1, d});
        L.ln1_g = Tensor::full({1, d}, 1.0);
        L.ln1_b = Tensor({1, d});
        L.ln2_g = Tensor::full({1, d}, 1.0);
        L.ln2_b = Tensor({1, d});
        L.w_ff1 = detail::glorot(d, ff, d, ff, rng);
        L.b_ff1 = Tensor({1, ff});
        L.w_ff2 = detail::glorot(ff, d, ff, d, rng);
        L.b_ff2 = Tensor({1, d});
        p.layers.push_back(std::move(L));
    }
    p.ln_f_g = Tensor::full({1, d}, 1.0);
    p.ln_f_b = Tensor({1, d});
    p.head_w = detail::glorot(d, 1, d, 1, rng);
    p.head_b = Tensor({1, 1});
    return p;
}

/// Tape-bound mirror of ModelParams, valid for the lifetime of one tape.
struct BoundParams {
    std::vector<Value> values;  // for_each_param order
    const ModelConfig* config = nullptr;

    Value at(std::size_t i) const { return values[i]; }
};

inline BoundParams bind_params(Tape& tape, const ModelParams& params, bool requires_grad) {
    BoundParams b;
    b.config = &params.config;
    params.for_each_param([&](const std::string&, const Tensor& t) {
        b.values.push_back(tape.leaf(t, requires_grad));
    });
    return b;
}

/// Per-parameter gradients in for_each_param order; call after tape.backward.
inline std::vector<Tensor> extract_grads(const Tape& tape, const BoundParams& bound) {
    std::vector<Tensor> grads;
    grads.reserve(bound.values.size());
    for (Value v : bound.values) grads.push_back(tape.grad(v));
    return grads;
}

namespace detail {

struct BoundLayer {
    Value wq, bq, wk, wv, bv, wo, bo, ln1_g, ln1_b, ln2_g, ln2_b, w1, b1, w2, b2;
};

struct BoundModel {
    Value tok_emb, pos_emb, ln_f_g, ln_f_b, head_w, head_b;
    std::vector<BoundLayer> layers;
};

inline BoundModel structure(const BoundParams& b) {
    BoundModel m;
    std::size_t i = 0;
    m.tok_emb = b.at(i++);
    m.pos_emb = b.at(i++);
    const std::size_t n_layers = b.config->n_layers;
    for (std::size_t l = 0; l < n_layers; ++l) {
        BoundLayer L;
        L.wq = b.at(i++); L.bq = b.at(i++);
        L.wk = b.at(i++);
        L.wv = b.at(i++); L.bv = b.at(i++);
        L.wo = b.at(i++); L.bo = b.at(i++);
        L.ln1_g = b.at(i++); L.ln1_b = b.at(i++);
        L.ln2_g = b.at(i++); L.ln2_b = b.at(i++);
        L.w1 = b.at(i++); L.b1 = b.at(i++);
        L.w2 = b.at(i++); L.b2 = b.at(i++);
        m.layers.push_back(L);
    }
    m.ln_f_g = b.at(i++);
    m.ln_f_b = b.at(i++);
    m.head_w = b.at(i++);
    m.head_b = b.at(i++);
    return m;
}

} // namespace detail

/// Forward pass for one (possibly padded) sequence already on a tape.
/// Pre-norm residual blocks, [CLS]-position readout, sigmoid head.
/// Positions >= valid_len are [PAD] and masked out of attention.
inline Value forward_sequence(Tape& tape, const BoundParams& bound,
                              const std::vector<std::int32_t>& ids, std::size_t valid_len,
                              bool train, Rng* dropout_rng) {
    const ModelConfig& cfg = *bound.config;
    if (ids.empty() || ids.size() > cfg.max_len)
        throw std::invalid_argument("forward: sequence length out of range");
    if (valid_len == 0 || valid_len > ids.size())
        throw std::invalid_argument("forward: bad valid_len");
    if (train && cfg.dropout > 0.0 && dropout_rng == nullptr)
        throw std::invalid_argument("forward: training with dropout requires an RNG");
    auto m = detail::structure(bound);
    const std::size_t L = ids.size();

    std::vector<std::int32_t> positions(L);
    for (std::size_t i = 0; i < L; ++i) positions[i] = static_cast<std::int32_t>(i);

    auto drop = [&](Value v) {
        return train && cfg.dropout > 0.0 ? tape.dropout(v, cfg.dropout, train, *dropout_rng) : v;
    };

    Value h = tape.add(tape.embedding_lookup(m.tok_emb, ids),
                       tape.embedding_lookup(m.pos_emb, positions));
    h = drop(h);
    for (const auto& Lp : m.layers) {
        Value a = tape.layer_norm(h, Lp.ln1_g, Lp.ln1_b);
        Value q = tape.add_row(tape.matmul(a, Lp.wq), Lp.bq);
        Value k = tape.matmul(a, Lp.wk);
        Value v = tape.add_row(tape.matmul(a, Lp.wv), Lp.bv);
        Value att = tape.multi_head_attention(q, k, v, cfg.n_heads, valid_len);
        att = drop(tape.add_row(tape.matmul(att, Lp.wo), Lp.bo));
        h = tape.add(h, att);
        Value f = tape.layer_norm(h, Lp.ln2_g, Lp.ln2_b);
        f = tape.gelu(tape.add_row(tape.matmul(f, Lp.w1), Lp.b1));
        f = drop(tape.add_row(tape.matmul(f, Lp.w2), Lp.b2));
        h = tape.add(h, f);
    }
    h = tape.layer_norm(h, m.ln_f_g, m.ln_f_b);
    Value cls = tape.slice_row(h, 0);
    Value logit = tape.add(tape.matmul(cls, m.head_w), m.head_b);
    return tape.sigmoid(logit);
}

/// Batched forward: sequences are padded to the batch max length with [PAD]
/// and attention-masked at their true lengths. Returns a [B x 1] column of
/// probabilities.
inline Value forward_batch(Tape& tape, const BoundParams& bound,
                           const std::vector<TokenSequence>& batch,
                           bool train = false, Rng* dropout_rng = nullptr) {
    if (batch.empty()) throw std::invalid_argument("forward_batch: empty batch");
    std::size_t max_l = 0;
    for (const auto& s : batch) max_l = std::max(max_l, s.size());
    std::vector<Value> probs;
    probs.reserve(batch.size());
    for (const auto& s : batch) {
        std::vector<std::int32_t> ids = s.ids;
        ids.resize(max_l, kPadId);
        probs.push_back(forward_sequence(tape, bound, ids, s.size(), train, dropout_rng));
    }
    return tape.concat_rows(probs);
}

/// Inference probability for one sequence; dropout off, no gradients.
inline double forward_prob(const ModelParams& params, const TokenSequence& seq) {
    Tape tape;
    BoundParams bound = bind_params(tape, params, /*requires_grad=*/false);
    Value p = forward_sequence(tape, bound, seq.ids, seq.size(), /*train=*/false, nullptr);
    const double out = p.item();
    if (!std::isfinite(out)) throw std::runtime_error("forward: non-finite probability");
    return out;
}

/// Build the fused input sequence for one interaction:
/// f_up -> (f_sum -> f_pp | MMR selection) -> f_fusion.
inline TokenSequence build_input_sequence(const Interaction& it, const Vocabulary& vocab,
                                          const FeatureMask& mask, const SummarizerConfig& summarizer,
                                          const ModelParams& params) {
    TokenSequence seq_u = tokenize_utterance(it.utterance, vocab, mask);
    std::optional<TokenSequence> seq_p;
    if (mask.any_product_field() && !it.products.empty()) {
        if (summarizer.mode == SummarizerMode::mean) {
            seq_p = tokenize_product_summary(summarize_mean(it.products, mask), vocab, summarizer.decimals);
        } else {
            seq_p = select_product_tokens(it.products, seq_u, params.tok_emb, summarizer, mask, vocab);
        }
    }
    return fuse(seq_u, seq_p, params.config.max_len);
}

struct Prediction {
    double probability = 0.0;
    int decision = 0;
};

/// Full pipeline for one interaction; decision = 1 iff probability >= threshold.
inline Prediction predict(const ModelParams& params, const Interaction& it, const Vocabulary& vocab,
                          const FeatureMask& mask, const SummarizerConfig& summarizer,
                          double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("predict: threshold must be in (0,1)");
    const TokenSequence x = build_input_sequence(it, vocab, mask, summarizer, params);
    Prediction out;
    out.probability = forward_prob(params, x);
    out.decision = out.probability >= threshold ? 1 : 0;
    return out;
}

} // namespace irp
