#pragma once
// Post-layer-norm transformer encoder (BERT layout) with hand-written
// backward passes, plus the entity and triple representation heads used by
// the contrastive relation objective.
//
// Everything is templated on the scalar type: training runs in float, the
// gradient check in double. Explicit instantiations live in encoder.cpp.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ckbert/tensor.hpp"
#include "ckbert/vocab.hpp"

namespace ckbert {

struct EncoderConfig {
    std::string name = "tiny";
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t head_dim = 16;
    std::size_t ff_dim = 128;
    std::size_t model_dim = 32;
    std::size_t vocab_size = 0;
    std::size_t max_len = 128;

    std::size_t inner_dim() const noexcept { return heads * head_dim; }
    void validate() const;  // throws ConfigError

    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// base / large / huge follow the published architecture table; tiny is the
// desk-scale preset. vocab_size of tiny is 0 until bound to a vocabulary.
EncoderConfig encoder_preset(std::string_view name);
std::vector<std::string> encoder_preset_names();

// Total learnable scalars, heads included.
std::size_t parameter_count(const EncoderConfig& cfg);

inline constexpr double kLayerNormEps = 1e-12;
inline constexpr double kInitStd = 0.02;

template <typename T>
struct LayerParams {
    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<T> ln1_g, ln1_b;
    Tensor<T> ff1_w, ff1_b, ff2_w, ff2_b;
    Tensor<T> ln2_g, ln2_b;
};

template <typename T>
struct Parameters {
    EncoderConfig config;
    Tensor<T> tok_emb;  // V x D, shared with the LM head
    Tensor<T> pos_emb;  // M x D
    Tensor<T> emb_ln_g, emb_ln_b;
    std::vector<LayerParams<T>> layers;
    Tensor<T> mlm_bias;  // 1 x V
    // self-attentive pooling: score_i = v . tanh(h_i W_s)
    Tensor<T> pool_w, pool_v;
    // entity transform: LN(GELU(pooled W1))
    Tensor<T> ent_w1, ent_ln_g, ent_ln_b;

    static Parameters zeros(const EncoderConfig& cfg);
    // Truncated normal (std 0.02) weights, zero biases, unit LN scales.
    static Parameters init(const EncoderConfig& cfg, std::uint64_t seed);

    // Visits every tensor in a fixed order with its stable name.
    template <typename F>
    void for_each(F&& f) {
        visit_impl(*this, f);
    }
    template <typename F>
    void for_each(F&& f) const {
        visit_impl(*this, f);
    }

    std::size_t scalar_count() const;

    template <typename U>
    Parameters<U> cast() const;

private:
    template <typename Self, typename F>
    static void visit_impl(Self& p, F& f) {
        f("embeddings.token", p.tok_emb);
        f("embeddings.position", p.pos_emb);
        f("embeddings.ln.gamma", p.emb_ln_g);
        f("embeddings.ln.beta", p.emb_ln_b);
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            auto& L = p.layers[l];
            const std::string pre = "layer" + std::to_string(l) + ".";
            f(pre + "attn.wq", L.wq);
            f(pre + "attn.bq", L.bq);
            f(pre + "attn.wk", L.wk);
            f(pre + "attn.bk", L.bk);
            f(pre + "attn.wv", L.wv);
            f(pre + "attn.bv", L.bv);
            f(pre + "attn.wo", L.wo);
            f(pre + "attn.bo", L.bo);
            f(pre + "ln1.gamma", L.ln1_g);
            f(pre + "ln1.beta", L.ln1_b);
            f(pre + "ffn.w1", L.ff1_w);
            f(pre + "ffn.b1", L.ff1_b);
            f(pre + "ffn.w2", L.ff2_w);
            f(pre + "ffn.b2", L.ff2_b);
            f(pre + "ln2.gamma", L.ln2_g);
            f(pre + "ln2.beta", L.ln2_b);
        }
        f("mlm.bias", p.mlm_bias);
        f("pool.w", p.pool_w);
        f("pool.v", p.pool_v);
        f("entity.w1", p.ent_w1);
        f("entity.ln.gamma", p.ent_ln_g);
        f("entity.ln.beta", p.ent_ln_b);
    }
};

template <typename T>
template <typename U>
Parameters<U> Parameters<T>::cast() const {
    auto out = Parameters<U>::zeros(config);
    std::vector<const Tensor<T>*> src;
    for_each([&](const std::string&, const Tensor<T>& t) { src.push_back(&t); });
    std::size_t i = 0;
    out.for_each([&](const std::string&, Tensor<U>& t) {
        const auto& s = *src[i++];
        for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<U>(s[k]);
    });
    return out;
}

// --- building blocks ---------------------------------------------------------

template <typename T>
T gelu(T x);
template <typename T>
T gelu_grad(T x);

template <typename T>
struct LayerNormCache {
    Tensor<T> xhat;
    std::vector<T> rstd;
};

// Row-wise LayerNorm with learned scale/offset.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, LayerNormCache<T>* cache);
template <typename T>
Tensor<T> layer_norm_backward(const Tensor<T>& dy, const Tensor<T>& gamma, const LayerNormCache<T>& cache,
                              Tensor<T>& dgamma, Tensor<T>& dbeta);

// --- encoder -----------------------------------------------------------------

template <typename T>
struct LayerCache {
    Tensor<T> x_in, q, k, v;
    std::vector<Tensor<T>> probs;  // per head, n x n
    Tensor<T> ctx;
    LayerNormCache<T> ln1;
    Tensor<T> x1, ff_pre, ff_act;
    LayerNormCache<T> ln2;
};

template <typename T>
struct EncoderCache {
    std::vector<TokenId> ids;
    std::size_t attention_length = 0;
    LayerNormCache<T> emb_ln;
    std::vector<LayerCache<T>> layers;
    Tensor<T> output;  // n x D
};

// Positions >= attention_length are padding: they are masked out as keys,
// so they never influence rows below attention_length.
template <typename T>
EncoderCache<T> encoder_forward(const Parameters<T>& p, std::span<const TokenId> ids, std::size_t attention_length);

template <typename T>
Tensor<T> forward(const Parameters<T>& p, std::span<const TokenId> ids, std::size_t attention_length);

template <typename T>
Tensor<T> forward(const Parameters<T>& p, std::span<const TokenId> ids) {
    return forward(p, ids, ids.size());
}

template <typename T>
void encoder_backward(const Parameters<T>& p, const EncoderCache<T>& cache, const Tensor<T>& d_output,
                      Parameters<T>& grads);

// --- CMRM heads --------------------------------------------------------------

template <typename T>
struct PoolCache {
    Tensor<T> rows;  // k x D inputs
    Tensor<T> u;     // tanh(rows W_s)
    std::vector<T> weights;
};

template <typename T>
std::vector<T> self_attentive_pool(const Parameters<T>& p, const Tensor<T>& rows, PoolCache<T>* cache = nullptr);

// Accumulates parameter gradients and returns d rows.
template <typename T>
Tensor<T> self_attentive_pool_backward(const Parameters<T>& p, const PoolCache<T>& cache, std::span<const T> d_out,
                                       Parameters<T>& grads);

template <typename T>
struct EntityCache {
    std::size_t start = 0, end = 0;
    PoolCache<T> pool;
    Tensor<T> pooled, pre, act;
    LayerNormCache<T> ln;
};

// h_e = LN(GELU(pool(H[start..end)) W1)).
template <typename T>
std::vector<T> entity_rep(const Parameters<T>& p, const Tensor<T>& H, std::size_t start, std::size_t end,
                          EntityCache<T>* cache = nullptr);

// Accumulates parameter gradients and adds into dH.
template <typename T>
void entity_rep_backward(const Parameters<T>& p, const EntityCache<T>& cache, std::span<const T> d_out,
                         Parameters<T>& grads, Tensor<T>& dH);

enum class TriplePooling { cls, mean };

template <typename T>
struct TripleCache {
    EncoderCache<T> encoder;
    TriplePooling pooling = TriplePooling::cls;
};

// Triple sentences run through the shared encoder; no padding.
template <typename T>
std::vector<T> triple_rep(const Parameters<T>& p, std::span<const TokenId> ids, TriplePooling pooling,
                          TripleCache<T>* cache = nullptr);

template <typename T>
void triple_rep_backward(const Parameters<T>& p, const TripleCache<T>& cache, std::span<const T> d_out,
                         Parameters<T>& grads);

}  // namespace ckbert
