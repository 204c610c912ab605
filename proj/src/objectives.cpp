#include "ckbert/objectives.hpp"

#include <cmath>
#include <limits>

#include "ckbert/errors.hpp"

namespace ckbert {

template <typename T>
T lmlm_loss(const Tensor<T>& logits, std::span<const TokenId> labels, Tensor<T>* d_logits) {
    const std::size_t K = logits.rows(), V = logits.cols();
    if (K == 0) throw ContractViolation("lmlm_loss: no masked positions");
    if (labels.size() != K) throw ContractViolation("lmlm_loss: label count does not match logits rows");
    if (d_logits && !d_logits->same_shape(logits)) *d_logits = Tensor<T>(K, V);
    T total{0};
    for (std::size_t k = 0; k < K; ++k) {
        const auto label = labels[k];
        if (label < 0 || static_cast<std::size_t>(label) >= V) {
            throw ContractViolation("lmlm_loss: label " + std::to_string(label) + " outside vocabulary");
        }
        auto row = logits.row(k);
        T max_v = -std::numeric_limits<T>::infinity();
        for (auto v : row) max_v = std::max(max_v, v);
        T z{0};
        for (auto v : row) z += std::exp(v - max_v);
        const T log_z = max_v + std::log(z);
        total += log_z - row[static_cast<std::size_t>(label)];
        if (d_logits) {
            auto d = d_logits->row(k);
            for (std::size_t j = 0; j < V; ++j) d[j] = std::exp(row[j] - log_z) / static_cast<T>(K);
            d[static_cast<std::size_t>(label)] -= T{1} / static_cast<T>(K);
        }
    }
    return total / static_cast<T>(K);
}

namespace {

template <typename T>
T norm(std::span<const T> a) {
    T s{0};
    for (auto v : a) s += v * v;
    return std::sqrt(s);
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
    T s{0};
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

template <typename T>
T log_sum_exp(std::span<const T> xs) {
    T m = -std::numeric_limits<T>::infinity();
    for (auto x : xs) m = std::max(m, x);
    T s{0};
    for (auto x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace

template <typename T>
CosineResult<T> cosine(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw ContractViolation("cosine: length mismatch");
    const T floor = static_cast<T>(kNormFloor);
    const T na = norm(a), nb = norm(b);
    CosineResult<T> r;
    r.clamped = na < floor || nb < floor;
    r.value = dot(a, b) / (std::max(na, floor) * std::max(nb, floor));
    return r;
}

template <typename T>
void cosine_backward(std::span<const T> a, std::span<const T> b, T upstream, std::span<T> da, std::span<T> db) {
    const T floor = static_cast<T>(kNormFloor);
    const T na_raw = norm(a), nb_raw = norm(b);
    const T na = std::max(na_raw, floor), nb = std::max(nb_raw, floor);
    const T c = dot(a, b) / (na * nb);
    const T ka = na_raw < floor ? T{0} : c / (na * na);
    const T kb = nb_raw < floor ? T{0} : c / (nb * nb);
    for (std::size_t i = 0; i < a.size(); ++i) {
        da[i] += upstream * (b[i] / (na * nb) - ka * a[i]);
        db[i] += upstream * (a[i] / (na * nb) - kb * b[i]);
    }
}

template <typename T>
T cmrm_loss_from_cosines(T c_pos, std::span<const T> c_negs, double tau, bool include_positive, T* d_pos,
                         std::span<T> d_negs) {
    if (!(tau > 0.0)) throw ConfigError("cmrm_loss: temperature must be positive");
    if (c_negs.empty()) throw ContractViolation("cmrm_loss: at least one negative is required");
    const T t = static_cast<T>(tau);
    std::vector<T> logits;
    logits.reserve(c_negs.size() + 1);
    if (include_positive) logits.push_back(c_pos / t);
    for (auto c : c_negs) logits.push_back(c / t);
    const T lse = log_sum_exp<T>(logits);
    const T loss = -c_pos / t + lse;
    if (d_pos) {
        *d_pos = -T{1} / t;
        if (include_positive) *d_pos += std::exp(logits[0] - lse) / t;
    }
    if (!d_negs.empty()) {
        const std::size_t off = include_positive ? 1 : 0;
        for (std::size_t l = 0; l < c_negs.size(); ++l) d_negs[l] = std::exp(logits[l + off] - lse) / t;
    }
    return loss;
}

template <typename T>
T cmrm_loss(std::span<const T> h_e, std::span<const T> h_pos, const std::vector<std::vector<T>>& h_negs, double tau,
            bool include_positive) {
    std::vector<T> c_negs;
    for (const auto& h : h_negs) c_negs.push_back(cosine<T>(h_e, h).value);
    return cmrm_loss_from_cosines<T>(cosine<T>(h_e, h_pos).value, c_negs, tau, include_positive);
}

double total_loss(double l_mlm, double l_cl) {
    if (!std::isfinite(l_mlm) || !std::isfinite(l_cl)) {
        throw NumericError("non-finite loss (l_mlm=" + std::to_string(l_mlm) + ", l_cl=" + std::to_string(l_cl) + ")");
    }
    return l_mlm + l_cl;
}

template <typename T>
LossReport instance_loss(const Parameters<T>& p, const TrainingInstance& inst, const LossOptions& opts,
                         Parameters<T>* grads, T mlm_weight, T cl_weight) {
    // Only the unpadded prefix is encoded: padding is masked as attention
    // keys, so the rows that matter are identical either way.
    const std::size_t n = inst.attention_length;
    if (n == 0 || n > inst.input_ids.size()) throw ContractViolation("instance_loss: bad attention length");
    const std::span<const TokenId> ids(inst.input_ids.data(), n);
    const auto enc = encoder_forward(p, ids, n);
    const auto& H = enc.output;
    const std::size_t D = p.config.model_dim;

    std::vector<std::size_t> positions;
    std::vector<TokenId> targets;
    for (std::size_t i = 0; i < n; ++i) {
        if (inst.labels[i] != kIgnoreLabel) {
            positions.push_back(i);
            targets.push_back(inst.labels[i]);
        }
    }
    const std::size_t K = positions.size();
    Tensor<T> h_sel(K, D);
    for (std::size_t k = 0; k < K; ++k) std::copy(H.row(positions[k]).begin(), H.row(positions[k]).end(), h_sel.row(k).begin());
    Tensor<T> logits(K, p.config.vocab_size);
    gemm_nt_acc(h_sel, p.tok_emb, logits);
    add_row_bias(logits, p.mlm_bias);
    Tensor<T> d_logits;
    const T l_mlm = lmlm_loss(logits, targets, grads ? &d_logits : nullptr);

    LossReport report;
    report.masked = K;
    report.l_mlm = static_cast<double>(l_mlm);

    Tensor<T> dH;
    if (grads) {
        dH = Tensor<T>(n, D);
        for (std::size_t i = 0; i < d_logits.size(); ++i) d_logits[i] *= mlm_weight;
        accumulate_bias_grad(d_logits, grads->mlm_bias);
        gemm_tn_acc(d_logits, h_sel, grads->tok_emb);
        Tensor<T> d_sel(K, D);
        gemm_nn_acc(d_logits, p.tok_emb, d_sel);
        for (std::size_t k = 0; k < K; ++k) {
            auto dst = dH.row(positions[k]);
            auto src = d_sel.row(k);
            for (std::size_t j = 0; j < D; ++j) dst[j] += src[j];
        }
    }

    if (inst.cmrm_active) {
        const std::size_t L = inst.negative_ids.size();
        EntityCache<T> ecache;
        const auto h_e = entity_rep(p, H, inst.entity_start, inst.entity_end, &ecache);
        TripleCache<T> pos_cache;
        const auto h_pos = triple_rep<T>(p, inst.positive_ids, opts.triple_pooling, &pos_cache);
        std::vector<TripleCache<T>> neg_caches(L);
        std::vector<std::vector<T>> h_negs(L);
        std::vector<T> c_negs(L);
        const auto c_pos = cosine<T>(h_e, h_pos);
        bool clamped = c_pos.clamped;
        for (std::size_t l = 0; l < L; ++l) {
            h_negs[l] = triple_rep<T>(p, inst.negative_ids[l], opts.triple_pooling, &neg_caches[l]);
            const auto c = cosine<T>(h_e, h_negs[l]);
            c_negs[l] = c.value;
            clamped = clamped || c.clamped;
        }
        T d_pos{0};
        std::vector<T> d_negs(L);
        const T l_cl = cmrm_loss_from_cosines<T>(c_pos.value, c_negs, opts.tau, opts.include_positive_in_denominator,
                                                 &d_pos, d_negs);
        report.l_cl = static_cast<double>(l_cl);
        report.negatives = L;
        report.cmrm_active = true;
        report.norm_clamped = clamped;

        if (grads) {
            std::vector<T> dh_e(D, T{0});
            std::vector<T> dh_t(D, T{0});
            cosine_backward<T>(h_e, h_pos, cl_weight * d_pos, dh_e, dh_t);
            triple_rep_backward<T>(p, pos_cache, dh_t, *grads);
            for (std::size_t l = 0; l < L; ++l) {
                std::fill(dh_t.begin(), dh_t.end(), T{0});
                cosine_backward<T>(h_e, h_negs[l], cl_weight * d_negs[l], dh_e, dh_t);
                triple_rep_backward<T>(p, neg_caches[l], dh_t, *grads);
            }
            entity_rep_backward<T>(p, ecache, dh_e, *grads, dH);
        }
    }

    if (grads) encoder_backward(p, enc, dH, *grads);
    report.l_total = total_loss(report.l_mlm, report.l_cl);
    return report;
}

#define CKBERT_INSTANTIATE(T)                                                                                     \
    template T lmlm_loss<T>(const Tensor<T>&, std::span<const TokenId>, Tensor<T>*);                             \
    template CosineResult<T> cosine<T>(std::span<const T>, std::span<const T>);                                   \
    template void cosine_backward<T>(std::span<const T>, std::span<const T>, T, std::span<T>, std::span<T>);       \
    template T cmrm_loss_from_cosines<T>(T, std::span<const T>, double, bool, T*, std::span<T>);                   \
    template T cmrm_loss<T>(std::span<const T>, std::span<const T>, const std::vector<std::vector<T>>&, double,   \
                            bool);                                                                                \
    template LossReport instance_loss<T>(const Parameters<T>&, const TrainingInstance&, const LossOptions&,       \
                                         Parameters<T>*, T, T);

CKBERT_INSTANTIATE(float)
CKBERT_INSTANTIATE(double)

#undef CKBERT_INSTANTIATE

}  // namespace ckbert
