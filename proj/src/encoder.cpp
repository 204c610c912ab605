#include "ckbert/encoder.hpp"

#include <cmath>
#include <limits>

#include "ckbert/errors.hpp"
#include "ckbert/rng.hpp"

namespace ckbert {

// --- config --------------------------------------------------------------------

void EncoderConfig::validate() const {
    auto positive = [](std::size_t v, const char* field) {
        if (v == 0) throw ConfigError(std::string("encoder ") + field + " must be positive");
    };
    positive(layers, "layers");
    positive(heads, "heads");
    positive(head_dim, "head_dim");
    positive(ff_dim, "ff_dim");
    positive(model_dim, "model_dim");
    positive(vocab_size, "vocab_size");
    positive(max_len, "max_len");
}

EncoderConfig encoder_preset(std::string_view name) {
    // The published presets assume the 30522-entry BERT-base vocabulary and
    // 512 positions; tiny is bound to the training vocabulary at run time.
    if (name == "base") return {"base", 12, 12, 64, 3072, 768, 30522, 512};
    if (name == "large") return {"large", 24, 16, 64, 4096, 1024, 30522, 512};
    if (name == "huge") return {"huge", 24, 8, 256, 8192, 2048, 30522, 512};
    if (name == "tiny") return {"tiny", 2, 2, 16, 128, 32, 0, 128};
    throw ConfigError("unknown encoder preset '" + std::string(name) + "' (valid: base, large, huge, tiny)");
}

std::vector<std::string> encoder_preset_names() { return {"base", "large", "huge", "tiny"}; }

std::size_t parameter_count(const EncoderConfig& c) {
    const std::size_t D = c.model_dim, A = c.inner_dim(), F = c.ff_dim, V = c.vocab_size, M = c.max_len;
    const std::size_t embeddings = V * D + M * D + 2 * D;
    const std::size_t attention = 3 * (D * A + A) + A * D + D;
    const std::size_t ffn = D * F + F + F * D + D;
    const std::size_t per_layer = attention + ffn + 4 * D;
    const std::size_t heads = V /* mlm bias */ + D * D + D /* pooling */ + D * D + 2 * D /* entity */;
    return embeddings + c.layers * per_layer + heads;
}

// --- parameters -------------------------------------------------------------------

template <typename T>
Parameters<T> Parameters<T>::zeros(const EncoderConfig& c) {
    c.validate();
    const std::size_t D = c.model_dim, A = c.inner_dim(), F = c.ff_dim;
    Parameters p;
    p.config = c;
    p.tok_emb = Tensor<T>(c.vocab_size, D);
    p.pos_emb = Tensor<T>(c.max_len, D);
    p.emb_ln_g = Tensor<T>(1, D);
    p.emb_ln_b = Tensor<T>(1, D);
    p.layers.resize(c.layers);
    for (auto& L : p.layers) {
        L.wq = Tensor<T>(D, A);
        L.bq = Tensor<T>(1, A);
        L.wk = Tensor<T>(D, A);
        L.bk = Tensor<T>(1, A);
        L.wv = Tensor<T>(D, A);
        L.bv = Tensor<T>(1, A);
        L.wo = Tensor<T>(A, D);
        L.bo = Tensor<T>(1, D);
        L.ln1_g = Tensor<T>(1, D);
        L.ln1_b = Tensor<T>(1, D);
        L.ff1_w = Tensor<T>(D, F);
        L.ff1_b = Tensor<T>(1, F);
        L.ff2_w = Tensor<T>(F, D);
        L.ff2_b = Tensor<T>(1, D);
        L.ln2_g = Tensor<T>(1, D);
        L.ln2_b = Tensor<T>(1, D);
    }
    p.mlm_bias = Tensor<T>(1, c.vocab_size);
    p.pool_w = Tensor<T>(D, D);
    p.pool_v = Tensor<T>(1, D);
    p.ent_w1 = Tensor<T>(D, D);
    p.ent_ln_g = Tensor<T>(1, D);
    p.ent_ln_b = Tensor<T>(1, D);
    return p;
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

template <typename T>
Parameters<T> Parameters<T>::init(const EncoderConfig& c, std::uint64_t seed) {
    auto p = zeros(c);
    Rng rng(derive_seed(seed, 0x1417));
    p.for_each([&](const std::string& name, Tensor<T>& t) {
        if (ends_with(name, ".gamma")) {
            t.fill(T{1});
        } else if (t.rows() > 1 || name == "pool.v") {
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.truncated_normal(kInitStd));
        }
    });
    return p;
}

template <typename T>
std::size_t Parameters<T>::scalar_count() const {
    std::size_t n = 0;
    for_each([&n](const std::string&, const Tensor<T>& t) { n += t.size(); });
    return n;
}

// --- building blocks ------------------------------------------------------------

template <typename T>
T gelu(T x) {
    return static_cast<T>(0.5) * x * (T{1} + std::erf(x * static_cast<T>(0.70710678118654752440)));
}

template <typename T>
T gelu_grad(T x) {
    const T cdf = static_cast<T>(0.5) * (T{1} + std::erf(x * static_cast<T>(0.70710678118654752440)));
    const T pdf = static_cast<T>(0.39894228040143267794) * std::exp(-static_cast<T>(0.5) * x * x);
    return cdf + x * pdf;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, LayerNormCache<T>* cache) {
    const std::size_t n = x.rows(), d = x.cols();
    Tensor<T> y(n, d);
    Tensor<T> xhat(n, d);
    std::vector<T> rstd(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = x.row(i);
        T mean{0};
        for (auto v : r) mean += v;
        mean /= static_cast<T>(d);
        T var{0};
        for (auto v : r) var += (v - mean) * (v - mean);
        var /= static_cast<T>(d);
        rstd[i] = T{1} / std::sqrt(var + static_cast<T>(kLayerNormEps));
        for (std::size_t j = 0; j < d; ++j) {
            xhat(i, j) = (r[j] - mean) * rstd[i];
            y(i, j) = xhat(i, j) * gamma[j] + beta[j];
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->rstd = std::move(rstd);
    }
    return y;
}

template <typename T>
Tensor<T> layer_norm_backward(const Tensor<T>& dy, const Tensor<T>& gamma, const LayerNormCache<T>& cache,
                              Tensor<T>& dgamma, Tensor<T>& dbeta) {
    const std::size_t n = dy.rows(), d = dy.cols();
    Tensor<T> dx(n, d);
    std::vector<T> dxhat(d);
    for (std::size_t i = 0; i < n; ++i) {
        T mean_dxhat{0}, mean_dxhat_xhat{0};
        for (std::size_t j = 0; j < d; ++j) {
            dgamma[j] += dy(i, j) * cache.xhat(i, j);
            dbeta[j] += dy(i, j);
            dxhat[j] = dy(i, j) * gamma[j];
            mean_dxhat += dxhat[j];
            mean_dxhat_xhat += dxhat[j] * cache.xhat(i, j);
        }
        mean_dxhat /= static_cast<T>(d);
        mean_dxhat_xhat /= static_cast<T>(d);
        for (std::size_t j = 0; j < d; ++j) {
            dx(i, j) = cache.rstd[i] * (dxhat[j] - mean_dxhat - cache.xhat(i, j) * mean_dxhat_xhat);
        }
    }
    return dx;
}

namespace {

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    Tensor<T> y(x.rows(), w.cols());
    gemm_nn_acc(x, w, y);
    add_row_bias(y, b);
    return y;
}

// Given dy for y = x W + b: accumulates dW, db and returns dx.
template <typename T>
Tensor<T> linear_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>& dw, Tensor<T>& db) {
    gemm_tn_acc(x, dy, dw);
    accumulate_bias_grad(dy, db);
    Tensor<T> dx(x.rows(), x.cols());
    gemm_nt_acc(dy, w, dx);
    return dx;
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace

// --- encoder ------------------------------------------------------------------------

template <typename T>
EncoderCache<T> encoder_forward(const Parameters<T>& p, std::span<const TokenId> ids, std::size_t attention_length) {
    const auto& c = p.config;
    const std::size_t n = ids.size(), D = c.model_dim, A = c.inner_dim(), H = c.heads, dh = c.head_dim;
    if (n == 0) throw ContractViolation("forward: empty input");
    if (n > c.max_len) {
        throw ContractViolation("forward: sequence length " + std::to_string(n) + " exceeds max_len " +
                                std::to_string(c.max_len));
    }
    if (attention_length == 0 || attention_length > n) {
        throw ContractViolation("forward: attention_length must lie in [1, sequence length]");
    }
    for (auto id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
            throw ContractViolation("forward: token id " + std::to_string(id) + " outside vocabulary of " +
                                    std::to_string(c.vocab_size));
        }
    }

    EncoderCache<T> cache;
    cache.ids.assign(ids.begin(), ids.end());
    cache.attention_length = attention_length;

    Tensor<T> x0(n, D);
    for (std::size_t i = 0; i < n; ++i) {
        auto tok = p.tok_emb.row(static_cast<std::size_t>(ids[i]));
        auto pos = p.pos_emb.row(i);
        auto r = x0.row(i);
        for (std::size_t j = 0; j < D; ++j) r[j] = tok[j] + pos[j];
    }
    Tensor<T> x = layer_norm(x0, p.emb_ln_g, p.emb_ln_b, &cache.emb_ln);

    const T scale = T{1} / std::sqrt(static_cast<T>(dh));
    cache.layers.resize(p.layers.size());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& L = p.layers[l];
        auto& lc = cache.layers[l];
        lc.x_in = x;
        lc.q = linear(x, L.wq, L.bq);
        lc.k = linear(x, L.wk, L.bk);
        lc.v = linear(x, L.wv, L.bv);
        lc.ctx = Tensor<T>(n, A);
        lc.probs.assign(H, Tensor<T>(n, n));
        for (std::size_t h = 0; h < H; ++h) {
            auto& P = lc.probs[h];
            const std::size_t off = h * dh;
            for (std::size_t i = 0; i < n; ++i) {
                T max_s = -std::numeric_limits<T>::infinity();
                for (std::size_t j = 0; j < attention_length; ++j) {
                    T s{0};
                    for (std::size_t d = 0; d < dh; ++d) s += lc.q(i, off + d) * lc.k(j, off + d);
                    s *= scale;
                    P(i, j) = s;
                    max_s = std::max(max_s, s);
                }
                T z{0};
                for (std::size_t j = 0; j < attention_length; ++j) {
                    P(i, j) = std::exp(P(i, j) - max_s);
                    z += P(i, j);
                }
                for (std::size_t j = 0; j < attention_length; ++j) {
                    P(i, j) /= z;
                    const T pij = P(i, j);
                    for (std::size_t d = 0; d < dh; ++d) lc.ctx(i, off + d) += pij * lc.v(j, off + d);
                }
            }
        }
        Tensor<T> r1 = linear(lc.ctx, L.wo, L.bo);
        add_inplace(r1, x);
        lc.x1 = layer_norm(r1, L.ln1_g, L.ln1_b, &lc.ln1);
        lc.ff_pre = linear(lc.x1, L.ff1_w, L.ff1_b);
        lc.ff_act = Tensor<T>(n, c.ff_dim);
        for (std::size_t i = 0; i < lc.ff_pre.size(); ++i) lc.ff_act[i] = gelu(lc.ff_pre[i]);
        Tensor<T> r2 = linear(lc.ff_act, L.ff2_w, L.ff2_b);
        add_inplace(r2, lc.x1);
        x = layer_norm(r2, L.ln2_g, L.ln2_b, &lc.ln2);
    }
    cache.output = std::move(x);
    return cache;
}

template <typename T>
Tensor<T> forward(const Parameters<T>& p, std::span<const TokenId> ids, std::size_t attention_length) {
    return encoder_forward(p, ids, attention_length).output;
}

template <typename T>
void encoder_backward(const Parameters<T>& p, const EncoderCache<T>& cache, const Tensor<T>& d_output,
                      Parameters<T>& grads) {
    const auto& c = p.config;
    const std::size_t n = cache.ids.size(), A = c.inner_dim(), H = c.heads, dh = c.head_dim;
    const std::size_t al = cache.attention_length;
    if (d_output.rows() != n || d_output.cols() != c.model_dim) {
        throw ContractViolation("encoder_backward: gradient shape mismatch");
    }
    const T scale = T{1} / std::sqrt(static_cast<T>(dh));

    Tensor<T> dx = d_output;
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        const auto& L = p.layers[l];
        auto& G = grads.layers[l];
        const auto& lc = cache.layers[l];

        Tensor<T> dr2 = layer_norm_backward(dx, L.ln2_g, lc.ln2, G.ln2_g, G.ln2_b);
        Tensor<T> dact = linear_backward(lc.ff_act, L.ff2_w, dr2, G.ff2_w, G.ff2_b);
        for (std::size_t i = 0; i < dact.size(); ++i) dact[i] *= gelu_grad(lc.ff_pre[i]);
        Tensor<T> dx1 = linear_backward(lc.x1, L.ff1_w, dact, G.ff1_w, G.ff1_b);
        add_inplace(dx1, dr2);

        Tensor<T> dr1 = layer_norm_backward(dx1, L.ln1_g, lc.ln1, G.ln1_g, G.ln1_b);
        Tensor<T> dctx = linear_backward(lc.ctx, L.wo, dr1, G.wo, G.bo);

        Tensor<T> dq(n, A), dk(n, A), dv(n, A);
        std::vector<T> dP(al);
        for (std::size_t h = 0; h < H; ++h) {
            const auto& P = lc.probs[h];
            const std::size_t off = h * dh;
            for (std::size_t i = 0; i < n; ++i) {
                T dot{0};
                for (std::size_t j = 0; j < al; ++j) {
                    T s{0};
                    for (std::size_t d = 0; d < dh; ++d) {
                        s += dctx(i, off + d) * lc.v(j, off + d);
                        dv(j, off + d) += P(i, j) * dctx(i, off + d);
                    }
                    dP[j] = s;
                    dot += P(i, j) * s;
                }
                for (std::size_t j = 0; j < al; ++j) {
                    const T dS = P(i, j) * (dP[j] - dot) * scale;
                    for (std::size_t d = 0; d < dh; ++d) {
                        dq(i, off + d) += dS * lc.k(j, off + d);
                        dk(j, off + d) += dS * lc.q(i, off + d);
                    }
                }
            }
        }
        Tensor<T> dx_in = linear_backward(lc.x_in, L.wq, dq, G.wq, G.bq);
        add_inplace(dx_in, linear_backward(lc.x_in, L.wk, dk, G.wk, G.bk));
        add_inplace(dx_in, linear_backward(lc.x_in, L.wv, dv, G.wv, G.bv));
        add_inplace(dx_in, dr1);
        dx = std::move(dx_in);
    }

    Tensor<T> dx0 = layer_norm_backward(dx, p.emb_ln_g, cache.emb_ln, grads.emb_ln_g, grads.emb_ln_b);
    for (std::size_t i = 0; i < n; ++i) {
        auto src = dx0.row(i);
        auto tok = grads.tok_emb.row(static_cast<std::size_t>(cache.ids[i]));
        auto pos = grads.pos_emb.row(i);
        for (std::size_t j = 0; j < src.size(); ++j) {
            tok[j] += src[j];
            pos[j] += src[j];
        }
    }
}

// --- CMRM heads -----------------------------------------------------------------

template <typename T>
std::vector<T> self_attentive_pool(const Parameters<T>& p, const Tensor<T>& rows, PoolCache<T>* cache) {
    const std::size_t k = rows.rows(), D = rows.cols();
    if (k == 0) throw ContractViolation("self_attentive_pool: empty span");
    if (D != p.config.model_dim) throw ContractViolation("self_attentive_pool: width mismatch");
    Tensor<T> u = matmul(rows, p.pool_w);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::tanh(u[i]);
    std::vector<T> w(k);
    T max_s = -std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        T s{0};
        for (std::size_t j = 0; j < D; ++j) s += u(i, j) * p.pool_v[j];
        w[i] = s;
        max_s = std::max(max_s, s);
    }
    T z{0};
    for (auto& wi : w) {
        wi = std::exp(wi - max_s);
        z += wi;
    }
    std::vector<T> out(D, T{0});
    for (std::size_t i = 0; i < k; ++i) {
        w[i] /= z;
        for (std::size_t j = 0; j < D; ++j) out[j] += w[i] * rows(i, j);
    }
    if (cache) {
        cache->rows = rows;
        cache->u = std::move(u);
        cache->weights = std::move(w);
    }
    return out;
}

template <typename T>
Tensor<T> self_attentive_pool_backward(const Parameters<T>& p, const PoolCache<T>& cache, std::span<const T> d_out,
                                       Parameters<T>& grads) {
    const std::size_t k = cache.rows.rows(), D = cache.rows.cols();
    Tensor<T> d_rows(k, D);
    std::vector<T> dw(k);
    T dot{0};
    for (std::size_t i = 0; i < k; ++i) {
        T s{0};
        for (std::size_t j = 0; j < D; ++j) {
            d_rows(i, j) = cache.weights[i] * d_out[j];
            s += d_out[j] * cache.rows(i, j);
        }
        dw[i] = s;
        dot += cache.weights[i] * s;
    }
    Tensor<T> dz(k, D);
    for (std::size_t i = 0; i < k; ++i) {
        const T ds = cache.weights[i] * (dw[i] - dot);
        for (std::size_t j = 0; j < D; ++j) {
            const T u = cache.u(i, j);
            grads.pool_v[j] += ds * u;
            dz(i, j) = ds * p.pool_v[j] * (T{1} - u * u);
        }
    }
    gemm_tn_acc(cache.rows, dz, grads.pool_w);
    gemm_nt_acc(dz, p.pool_w, d_rows);
    return d_rows;
}

template <typename T>
std::vector<T> entity_rep(const Parameters<T>& p, const Tensor<T>& H, std::size_t start, std::size_t end,
                          EntityCache<T>* cache) {
    if (start >= end || end > H.rows()) {
        throw ContractViolation("entity_rep: span [" + std::to_string(start) + ", " + std::to_string(end) +
                                ") invalid for " + std::to_string(H.rows()) + " rows");
    }
    const std::size_t D = H.cols();
    Tensor<T> rows(end - start, D);
    for (std::size_t i = start; i < end; ++i) std::copy(H.row(i).begin(), H.row(i).end(), rows.row(i - start).begin());
    PoolCache<T> pc;
    const auto pooled_vec = self_attentive_pool(p, rows, &pc);
    Tensor<T> pooled(1, D);
    std::copy(pooled_vec.begin(), pooled_vec.end(), pooled.row(0).begin());
    Tensor<T> pre = matmul(pooled, p.ent_w1);
    Tensor<T> act(1, D);
    for (std::size_t j = 0; j < D; ++j) act[j] = gelu(pre[j]);
    LayerNormCache<T> ln;
    Tensor<T> out = layer_norm(act, p.ent_ln_g, p.ent_ln_b, &ln);
    if (cache) {
        cache->start = start;
        cache->end = end;
        cache->pool = std::move(pc);
        cache->pooled = std::move(pooled);
        cache->pre = std::move(pre);
        cache->act = std::move(act);
        cache->ln = std::move(ln);
    }
    return {out.values().begin(), out.values().end()};
}

template <typename T>
void entity_rep_backward(const Parameters<T>& p, const EntityCache<T>& cache, std::span<const T> d_out,
                         Parameters<T>& grads, Tensor<T>& dH) {
    const std::size_t D = p.config.model_dim;
    Tensor<T> dy(1, D);
    std::copy(d_out.begin(), d_out.end(), dy.row(0).begin());
    Tensor<T> dact = layer_norm_backward(dy, p.ent_ln_g, cache.ln, grads.ent_ln_g, grads.ent_ln_b);
    for (std::size_t j = 0; j < D; ++j) dact[j] *= gelu_grad(cache.pre[j]);
    gemm_tn_acc(cache.pooled, dact, grads.ent_w1);
    Tensor<T> dpooled(1, D);
    gemm_nt_acc(dact, p.ent_w1, dpooled);
    const Tensor<T> d_rows = self_attentive_pool_backward<T>(p, cache.pool, std::span<const T>(dpooled.row(0)), grads);
    for (std::size_t i = cache.start; i < cache.end; ++i) {
        auto dst = dH.row(i);
        auto src = d_rows.row(i - cache.start);
        for (std::size_t j = 0; j < D; ++j) dst[j] += src[j];
    }
}

template <typename T>
std::vector<T> triple_rep(const Parameters<T>& p, std::span<const TokenId> ids, TriplePooling pooling,
                          TripleCache<T>* cache) {
    auto enc = encoder_forward(p, ids, ids.size());
    const auto& Hm = enc.output;
    std::vector<T> out(Hm.cols(), T{0});
    if (pooling == TriplePooling::cls) {
        std::copy(Hm.row(0).begin(), Hm.row(0).end(), out.begin());
    } else {
        for (std::size_t i = 0; i < Hm.rows(); ++i) {
            for (std::size_t j = 0; j < Hm.cols(); ++j) out[j] += Hm(i, j);
        }
        for (auto& v : out) v /= static_cast<T>(Hm.rows());
    }
    if (cache) {
        cache->encoder = std::move(enc);
        cache->pooling = pooling;
    }
    return out;
}

template <typename T>
void triple_rep_backward(const Parameters<T>& p, const TripleCache<T>& cache, std::span<const T> d_out,
                         Parameters<T>& grads) {
    const auto& Hm = cache.encoder.output;
    Tensor<T> dH(Hm.rows(), Hm.cols());
    if (cache.pooling == TriplePooling::cls) {
        std::copy(d_out.begin(), d_out.end(), dH.row(0).begin());
    } else {
        const T inv = T{1} / static_cast<T>(Hm.rows());
        for (std::size_t i = 0; i < Hm.rows(); ++i) {
            for (std::size_t j = 0; j < Hm.cols(); ++j) dH(i, j) = d_out[j] * inv;
        }
    }
    encoder_backward(p, cache.encoder, dH, grads);
}

#define CKBERT_INSTANTIATE(T)                                                                                    \
    template struct Parameters<T>;                                                                               \
    template T gelu<T>(T);                                                                                       \
    template T gelu_grad<T>(T);                                                                                  \
    template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, LayerNormCache<T>*); \
    template Tensor<T> layer_norm_backward<T>(const Tensor<T>&, const Tensor<T>&, const LayerNormCache<T>&,     \
                                              Tensor<T>&, Tensor<T>&);                                           \
    template EncoderCache<T> encoder_forward<T>(const Parameters<T>&, std::span<const TokenId>, std::size_t);   \
    template Tensor<T> forward<T>(const Parameters<T>&, std::span<const TokenId>, std::size_t);                 \
    template void encoder_backward<T>(const Parameters<T>&, const EncoderCache<T>&, const Tensor<T>&,           \
                                      Parameters<T>&);                                                           \
    template std::vector<T> self_attentive_pool<T>(const Parameters<T>&, const Tensor<T>&, PoolCache<T>*);      \
    template Tensor<T> self_attentive_pool_backward<T>(const Parameters<T>&, const PoolCache<T>&,               \
                                                       std::span<const T>, Parameters<T>&);                     \
    template std::vector<T> entity_rep<T>(const Parameters<T>&, const Tensor<T>&, std::size_t, std::size_t,     \
                                          EntityCache<T>*);                                                      \
    template void entity_rep_backward<T>(const Parameters<T>&, const EntityCache<T>&, std::span<const T>,       \
                                         Parameters<T>&, Tensor<T>&);                                            \
    template std::vector<T> triple_rep<T>(const Parameters<T>&, std::span<const TokenId>, TriplePooling,        \
                                          TripleCache<T>*);                                                      \
    template void triple_rep_backward<T>(const Parameters<T>&, const TripleCache<T>&, std::span<const T>,       \
                                         Parameters<T>&);

CKBERT_INSTANTIATE(float)
CKBERT_INSTANTIATE(double)

#undef CKBERT_INSTANTIATE

}  // namespace ckbert
