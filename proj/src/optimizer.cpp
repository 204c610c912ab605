#include "ckbert/optimizer.hpp"

#include <cmath>
#include <vector>

#include "ckbert/errors.hpp"

namespace ckbert {

template <typename T>
void adam_update(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v, std::uint64_t t,
                 const AdamOptions& opt) {
    if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
        throw ContractViolation("adam_update: shape mismatch");
    }
    if (t == 0) throw ContractViolation("adam_update: step counter starts at 1");
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = static_cast<double>(grads[i]);
        const double mi = opt.beta1 * static_cast<double>(m[i]) + (1.0 - opt.beta1) * g;
        const double vi = opt.beta2 * static_cast<double>(v[i]) + (1.0 - opt.beta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double update = opt.lr * (mi / bc1) / (std::sqrt(vi / bc2) + opt.eps);
        params[i] = static_cast<T>(static_cast<double>(params[i]) - update);
    }
}

template <typename T>
void adam_step(Parameters<T>& params, const Parameters<T>& grads, AdamState<T>& state, const AdamOptions& opt) {
    if (params.config != grads.config || params.config != state.m.config) {
        throw ContractViolation("adam_step: parameter/gradient/state configs differ");
    }
    std::vector<Tensor<T>*> p_list, m_list, v_list;
    std::vector<const Tensor<T>*> g_list;
    params.for_each([&](const std::string&, Tensor<T>& t) { p_list.push_back(&t); });
    grads.for_each([&](const std::string&, const Tensor<T>& t) { g_list.push_back(&t); });
    state.m.for_each([&](const std::string&, Tensor<T>& t) { m_list.push_back(&t); });
    state.v.for_each([&](const std::string&, Tensor<T>& t) { v_list.push_back(&t); });
    ++state.step;
    for (std::size_t i = 0; i < p_list.size(); ++i) {
        if (!p_list[i]->same_shape(*g_list[i])) throw ContractViolation("adam_step: shape mismatch");
        adam_update<T>(p_list[i]->values(), g_list[i]->values(), m_list[i]->values(), v_list[i]->values(), state.step,
                       opt);
    }
}

template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                                 std::uint64_t, const AdamOptions&);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>, std::span<double>,
                                  std::uint64_t, const AdamOptions&);
template void adam_step<float>(Parameters<float>&, const Parameters<float>&, AdamState<float>&, const AdamOptions&);
template void adam_step<double>(Parameters<double>&, const Parameters<double>&, AdamState<double>&,
                                const AdamOptions&);

}  // namespace ckbert
