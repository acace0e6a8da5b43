#ifndef TARD_NN_DENSE_HPP
#define TARD_NN_DENSE_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace tard {

/// Row-major dense matrix. Node matrices store one node per row.
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Row vector, used for readouts, logits and embedding means.
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;

class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

inline void require_shape(bool ok, const std::string& what)
{
    if (!ok)
        throw DimensionError(what);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m)
{
    return m.allFinite();
}

/// A trainable tensor and its gradient buffer. Shapes always match.
template <typename Scalar>
struct ParameterT {
    MatrixX<Scalar> value;
    MatrixX<Scalar> grad;

    ParameterT() = default;
    explicit ParameterT(MatrixX<Scalar> v) : value(std::move(v)), grad(MatrixX<Scalar>::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using Parameter = ParameterT<double>;

} // namespace tard

#endif // TARD_NN_DENSE_HPP
