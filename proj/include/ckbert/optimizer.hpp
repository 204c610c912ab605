#pragma once

#include <cstdint>
#include <span>

#include "ckbert/encoder.hpp"

namespace ckbert {

struct AdamOptions {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    Parameters<T> m;
    Parameters<T> v;
    std::uint64_t step = 0;

    static AdamState zeros(const EncoderConfig& cfg) { return {Parameters<T>::zeros(cfg), Parameters<T>::zeros(cfg), 0}; }
};

// One bias-corrected Adam update of a flat block at 1-based step `t`.
template <typename T>
void adam_update(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v, std::uint64_t t,
                 const AdamOptions& opt);

// Advances state.step and updates every parameter tensor.
template <typename T>
void adam_step(Parameters<T>& params, const Parameters<T>& grads, AdamState<T>& state, const AdamOptions& opt);

}  // namespace ckbert
