#ifndef TARD_NN_GRADCHECK_HPP
#define TARD_NN_GRADCHECK_HPP

#include "tard/nn/dense.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace tard {

template <typename Scalar>
struct GradientCheckReport {
    std::vector<Scalar> max_relative_error; // one entry per parameter
    Scalar worst = 0;
    Scalar tolerance = 0;
    bool passed = true;
};

/// Compares the gradients already stored in `params` against central differences
/// of `loss`. Relative error is |a - n| / max(|a|, |n|, floor), so entries whose
/// true gradient is near zero are judged on an absolute scale of `floor`.
/// Parameter values are restored exactly after each probe.
template <typename Scalar>
GradientCheckReport<Scalar> finite_difference_check(const std::function<Scalar()>& loss,
                                                     std::span<ParameterT<Scalar>* const> params, Scalar tolerance,
                                                     Scalar step = Scalar(1e-5), Scalar floor = Scalar(1e-4))
{
    GradientCheckReport<Scalar> report;
    report.tolerance = tolerance;
    for (auto* p : params) {
        Scalar worst = 0;
        for (Eigen::Index i = 0; i < p->value.size(); ++i) {
            Scalar& x = p->value.data()[i];
            const Scalar saved = x;
            x = saved + step;
            const Scalar up = loss();
            x = saved - step;
            const Scalar down = loss();
            x = saved;
            const Scalar numeric = (up - down) / (Scalar(2) * step);
            const Scalar analytic = p->grad.data()[i];
            const Scalar denom = std::max({std::abs(analytic), std::abs(numeric), floor});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
        report.max_relative_error.push_back(worst);
        report.worst = std::max(report.worst, worst);
    }
    report.passed = report.worst < tolerance;
    return report;
}

} // namespace tard

#endif // TARD_NN_GRADCHECK_HPP
