#pragma once
// Pre-training losses: masked-token cross-entropy, the contrastive relation
// loss over cosine similarities, and their sum.

#include <cstddef>
#include <span>
#include <vector>

#include "ckbert/encoder.hpp"
#include "ckbert/sample_builder.hpp"
#include "ckbert/tensor.hpp"

namespace ckbert {

inline constexpr double kNormFloor = 1e-12;

struct LossReport {
    double l_mlm = 0.0;
    double l_cl = 0.0;  // 0 when the contrastive branch is inactive
    double l_total = 0.0;
    std::size_t masked = 0;
    std::size_t negatives = 0;
    bool cmrm_active = false;
    bool norm_clamped = false;
};

// Mean softmax cross-entropy over the K rows of `logits` (K x V).
// d_logits, when given, receives (softmax - onehot) / K.
template <typename T>
T lmlm_loss(const Tensor<T>& logits, std::span<const TokenId> labels, Tensor<T>* d_logits = nullptr);

template <typename T>
struct CosineResult {
    T value{};
    bool clamped = false;  // a norm hit kNormFloor
};

// a.b / (max(|a|, eps) max(|b|, eps)); gradients are accumulated into da/db
// scaled by `upstream`.
template <typename T>
CosineResult<T> cosine(std::span<const T> a, std::span<const T> b);
template <typename T>
void cosine_backward(std::span<const T> a, std::span<const T> b, T upstream, std::span<T> da, std::span<T> db);

// -log(exp(c_pos/tau) / sum_l exp(c_neg_l/tau)); with include_positive the
// positive term also joins the denominator.
template <typename T>
T cmrm_loss_from_cosines(T c_pos, std::span<const T> c_negs, double tau, bool include_positive,
                         T* d_pos = nullptr, std::span<T> d_negs = {});

template <typename T>
T cmrm_loss(std::span<const T> h_e, std::span<const T> h_pos, const std::vector<std::vector<T>>& h_negs, double tau,
            bool include_positive);

// Unweighted sum; non-finite input raises NumericError.
double total_loss(double l_mlm, double l_cl);

struct LossOptions {
    double tau = 0.5;
    bool include_positive_in_denominator = false;
    TriplePooling triple_pooling = TriplePooling::cls;
};

// Losses for one instance. With `grads`, d(mlm_weight * l_mlm + cl_weight * l_cl)
// is accumulated into it.
template <typename T>
LossReport instance_loss(const Parameters<T>& p, const TrainingInstance& inst, const LossOptions& opts,
                         Parameters<T>* grads = nullptr, T mlm_weight = T{1}, T cl_weight = T{1});

}  // namespace ckbert
