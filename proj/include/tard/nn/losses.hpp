#ifndef TARD_NN_LOSSES_HPP
#define TARD_NN_LOSSES_HPP

#include "tard/nn/layers.hpp"

#include <cmath>
#include <span>

namespace tard {

/// Probabilities are clamped below at this value before taking logs.
inline constexpr double kLogClamp = 1e-12;

template <typename Scalar>
struct ContrastiveLoss {
    Scalar value = 0;
    MatrixX<Scalar> grad_h0;
    MatrixX<Scalar> grad_h1;
    RowVectorX<Scalar> grad_g0;
};

/// Node-vs-summary contrastive objective over an original view (h0) and a corrupted
/// view (h1), both scored against the summary g0:
///   L = -1/(2N) sum_i [ log D(h0_i, g0) + log(1 - D(h1_i, g0)) ]
/// Gradients are w.r.t. h0, h1 and g0 as independent inputs; chaining g0 back
/// into h0 through the readout is the caller's job.
template <typename Scalar>
ContrastiveLoss<Scalar> contrastive_loss(const MatrixX<Scalar>& h0, const MatrixX<Scalar>& h1,
                                         const RowVectorX<Scalar>& g0)
{
    require_shape(h0.rows() == h1.rows() && h0.cols() == h1.cols(), "contrastive_loss: views differ in shape");
    require_shape(h0.cols() == g0.cols(), "contrastive_loss: summary length does not match embedding width");
    require_shape(h0.rows() >= 1, "contrastive_loss: empty graph");
    const Eigen::Index n = h0.rows();
    const Scalar cap = -std::log(Scalar(kLogClamp));
    const Scalar scale = Scalar(1) / (Scalar(2) * Scalar(n));

    const RowVectorX<Scalar> pos_scores = (h0 * g0.transpose()).transpose();
    const RowVectorX<Scalar> neg_scores = (h1 * g0.transpose()).transpose();

    ContrastiveLoss<Scalar> out;
    RowVectorX<Scalar> dpos(n), dneg(n);
    Scalar total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        // -log D = softplus(-s), -log(1 - D) = softplus(s)
        const Scalar lp = softplus(-pos_scores(i));
        const Scalar ln = softplus(neg_scores(i));
        if (lp < cap) {
            total += lp;
            dpos(i) = -(Scalar(1) - sigmoid(pos_scores(i))) * scale;
        } else {
            total += cap;
            dpos(i) = 0;
        }
        if (ln < cap) {
            total += ln;
            dneg(i) = sigmoid(neg_scores(i)) * scale;
        } else {
            total += cap;
            dneg(i) = 0;
        }
    }
    out.value = total * scale;
    out.grad_h0 = dpos.transpose() * g0;
    out.grad_h1 = dneg.transpose() * g0;
    out.grad_g0 = dpos * h0 + dneg * h1;
    return out;
}

template <typename Scalar>
MatrixX<Scalar> row_softmax(const MatrixX<Scalar>& logits)
{
    MatrixX<Scalar> p = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp().matrix();
    p.array().colwise() /= p.rowwise().sum().array();
    return p;
}

inline Matrix one_hot(std::span<const int> labels, int num_classes)
{
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
    for (std::size_t k = 0; k < labels.size(); ++k) {
        require_shape(labels[k] >= 0 && labels[k] < num_classes,
                      "one_hot: label " + std::to_string(labels[k]) + " outside [0, " + std::to_string(num_classes) + ")");
        y(static_cast<Eigen::Index>(k), labels[k]) = 1.0;
    }
    return y;
}

template <typename Scalar>
struct SoftmaxCrossEntropy {
    Scalar value = 0;
    MatrixX<Scalar> probabilities;
    MatrixX<Scalar> grad_logits;
};

/// Mean cross-entropy of row-softmax(logits) against one-hot targets.
template <typename Scalar>
SoftmaxCrossEntropy<Scalar> softmax_cross_entropy(const MatrixX<Scalar>& logits, const MatrixX<Scalar>& targets)
{
    require_shape(logits.rows() == targets.rows() && logits.cols() == targets.cols(),
                  "softmax_cross_entropy: logits and targets differ in shape");
    require_shape(logits.rows() >= 1, "softmax_cross_entropy: empty batch");
    const Eigen::Index batch = logits.rows();
    for (Eigen::Index k = 0; k < batch; ++k) {
        const bool binary = ((targets.row(k).array() == Scalar(0)) || (targets.row(k).array() == Scalar(1))).all();
        require_shape(binary && targets.row(k).sum() == Scalar(1), "softmax_cross_entropy: row " + std::to_string(k) +
                                                                        " of targets is not one-hot");
    }
    const Scalar floor = std::log(Scalar(kLogClamp));

    SoftmaxCrossEntropy<Scalar> out;
    const MatrixX<Scalar> shifted = logits.colwise() - logits.rowwise().maxCoeff();
    const auto log_norm = shifted.array().exp().rowwise().sum().log();
    const MatrixX<Scalar> log_probs = shifted.array().colwise() - log_norm;
    out.probabilities = log_probs.array().exp().matrix();
    out.grad_logits = MatrixX<Scalar>::Zero(batch, logits.cols());
    Scalar total = 0;
    for (Eigen::Index k = 0; k < batch; ++k) {
        Eigen::Index label = 0;
        targets.row(k).maxCoeff(&label);
        if (log_probs(k, label) > floor) {
            total -= log_probs(k, label);
            out.grad_logits.row(k) = out.probabilities.row(k) - targets.row(k);
        } else {
            total -= floor;
        }
    }
    out.value = total / Scalar(batch);
    out.grad_logits /= Scalar(batch);
    return out;
}

} // namespace tard

#endif // TARD_NN_LOSSES_HPP
