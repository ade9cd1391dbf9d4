#pragma once

// Finite-difference gradient oracle shared by the unit tests and the
// acceptance suite. Independent of the autograd path it checks: it only uses
// forward evaluations.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tinyavsr/tensor.hpp"

namespace avsr::testsupport {

// Max relative error between analytic gradients (reverse mode) and central
// finite differences, over all elements of all leaves. The denominator floors
// at 1 so near-zero gradients compare absolutely.
template <typename F>
double finite_diff_max_rel_err(std::vector<Tensor64*> leaves, F&& f, double step = 1e-5) {
    for (auto* leaf : leaves) {
        leaf->set_requires_grad(true);
        leaf->zero_grad();
    }
    Tensor64 loss = f();
    loss.backward();

    double max_rel = 0.0;
    for (auto* leaf : leaves) {
        const std::vector<double> analytic = leaf->grad();
        auto& values = leaf->mutable_data();
        for (size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            double fp, fm;
            {
                NoGradGuard ng;
                values[i] = saved + step;
                fp = f().item();
                values[i] = saved - step;
                fm = f().item();
                values[i] = saved;
            }
            const double numeric = (fp - fm) / (2.0 * step);
            const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1.0});
            max_rel = std::max(max_rel, std::fabs(analytic[i] - numeric) / denom);
        }
    }
    return max_rel;
}

struct GradCheckResult {
    std::string op;
    double max_rel_err;
};

// Runs `instances` random finite-difference checks for every differentiable
// primitive. Returns per-op worst relative error.
std::vector<GradCheckResult> check_all_primitives(int instances, uint64_t seed);

}  // namespace avsr::testsupport
