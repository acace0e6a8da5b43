#ifndef TARD_NN_ADAM_HPP
#define TARD_NN_ADAM_HPP

#include "tard/nn/dense.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace tard {

template <typename Scalar>
struct AdamOptions {
    Scalar learning_rate = Scalar(5e-3);
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar epsilon = Scalar(1e-8);
};

/// Moment accumulators for one ordered parameter set. The same set, in the same
/// order, must be passed to every adam_step call that shares this state.
template <typename Scalar>
struct OptimizerStateT {
    AdamOptions<Scalar> options;
    std::vector<MatrixX<Scalar>> first_moment;
    std::vector<MatrixX<Scalar>> second_moment;
    std::int64_t step = 0;

    OptimizerStateT() = default;
    explicit OptimizerStateT(AdamOptions<Scalar> opts) : options(opts) {}
};

using OptimizerState = OptimizerStateT<double>;

/// One bias-corrected adaptive-moment update over exactly the given parameters.
template <typename Scalar>
void adam_step(std::span<ParameterT<Scalar>* const> params, OptimizerStateT<Scalar>& state)
{
    if (state.first_moment.empty()) {
        for (const auto* p : params) {
            state.first_moment.push_back(MatrixX<Scalar>::Zero(p->value.rows(), p->value.cols()));
            state.second_moment.push_back(MatrixX<Scalar>::Zero(p->value.rows(), p->value.cols()));
        }
    }
    require_shape(state.first_moment.size() == params.size(), "adam_step: parameter set changed between steps");

    ++state.step;
    const auto& o = state.options;
    const Scalar correction1 = Scalar(1) - std::pow(o.beta1, Scalar(state.step));
    const Scalar correction2 = Scalar(1) - std::pow(o.beta2, Scalar(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        require_shape(m.rows() == p.value.rows() && m.cols() == p.value.cols() && p.grad.rows() == p.value.rows() &&
                          p.grad.cols() == p.value.cols(),
                      "adam_step: accumulator shape does not match parameter " + std::to_string(i));
        m = o.beta1 * m + (Scalar(1) - o.beta1) * p.grad;
        v = o.beta2 * v + (Scalar(1) - o.beta2) * p.grad.cwiseAbs2();
        p.value.array() -= o.learning_rate * (m.array() / correction1) /
                           ((v.array() / correction2).sqrt() + o.epsilon);
    }
}

} // namespace tard

#endif // TARD_NN_ADAM_HPP
