#pragma once
// Central finite-difference check of every parameter group's gradient of
// the total pre-training loss, in double precision.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ckbert/encoder.hpp"
#include "ckbert/objectives.hpp"
#include "ckbert/sample_builder.hpp"

namespace ckbert {

struct GradCheckOptions {
    std::uint64_t seed = 11;
    double step = 1e-4;
    // Denominator floor of the relative error, so coordinates whose true
    // gradient is ~0 are judged on absolute error instead.
    double floor = 1e-6;
    std::size_t max_per_group = 0;  // 0 = every coordinate
    LossOptions loss;
};

struct GroupError {
    std::string name;
    std::size_t checked = 0;
    double max_rel_error = 0.0;
    double max_abs_grad = 0.0;
};

struct GradCheckReport {
    std::vector<GroupError> groups;
    double max_rel_error = 0.0;
    std::string worst_group;
    double seconds = 0.0;
    LossReport probe;  // losses at the unperturbed point
};

double relative_error(double analytic, double numeric, double floor);

// A contrastive-active instance plus tiny-preset parameters drawn from an
// in-memory synthetic fixture.
struct GradProbe {
    Parameters<double> params;
    TrainingInstance instance;
};
GradProbe make_grad_probe(std::uint64_t seed);

GradCheckReport check_gradients(const Parameters<double>& params, const TrainingInstance& inst,
                                const GradCheckOptions& opts);
GradCheckReport check_gradients(const GradCheckOptions& opts = {});

}  // namespace ckbert
