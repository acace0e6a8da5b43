#ifndef TARD_NN_LAYERS_HPP
#define TARD_NN_LAYERS_HPP

#include "tard/nn/dense.hpp"

#include <cmath>

namespace tard {

enum class Activation { relu, identity };

/// State kept by gcn_forward for the matching backward call.
/// Holds a pointer to the adjacency, so it must not outlive that matrix.
template <typename Scalar>
struct GcnCache {
    const MatrixX<Scalar>* adj = nullptr;
    MatrixX<Scalar> aggregated; // adj * h
    MatrixX<Scalar> weight;
    MatrixX<Scalar> output;
    Activation activation = Activation::identity;
};

template <typename Scalar>
struct GcnForward {
    MatrixX<Scalar> output;
    GcnCache<Scalar> cache;
};

template <typename Scalar>
struct GcnGradients {
    MatrixX<Scalar> grad_h;
    MatrixX<Scalar> grad_w;
};

/// act(adj * h * w)
template <typename Scalar>
GcnForward<Scalar> gcn_forward(const MatrixX<Scalar>& adj, const MatrixX<Scalar>& h, const MatrixX<Scalar>& w,
                               Activation activation)
{
    require_shape(adj.rows() == adj.cols(), "gcn_forward: adjacency must be square");
    require_shape(adj.cols() == h.rows(), "gcn_forward: adjacency has " + std::to_string(adj.cols()) +
                                              " columns but h has " + std::to_string(h.rows()) + " rows");
    require_shape(h.cols() == w.rows(), "gcn_forward: h has " + std::to_string(h.cols()) +
                                            " columns but w has " + std::to_string(w.rows()) + " rows");
    GcnForward<Scalar> f;
    f.cache.adj = &adj;
    f.cache.aggregated.noalias() = adj * h;
    f.cache.weight = w;
    f.cache.activation = activation;
    f.output.noalias() = f.cache.aggregated * w;
    if (activation == Activation::relu)
        f.output = f.output.cwiseMax(Scalar(0));
    f.cache.output = f.output;
    return f;
}

/// Exact gradients of gcn_forward; the adjacency is a constant.
template <typename Scalar>
GcnGradients<Scalar> gcn_backward(const GcnCache<Scalar>& cache, const MatrixX<Scalar>& upstream)
{
    require_shape(cache.adj != nullptr, "gcn_backward: empty cache");
    require_shape(upstream.rows() == cache.output.rows() && upstream.cols() == cache.output.cols(),
                  "gcn_backward: upstream gradient shape does not match layer output");
    MatrixX<Scalar> delta = upstream;
    if (cache.activation == Activation::relu)
        delta = (cache.output.array() > Scalar(0)).select(upstream, Scalar(0));
    GcnGradients<Scalar> g;
    g.grad_w.noalias() = cache.aggregated.transpose() * delta;
    MatrixX<Scalar> dw_t = delta * cache.weight.transpose();
    g.grad_h.noalias() = cache.adj->transpose() * dw_t;
    return g;
}

/// Column-wise mean over nodes.
template <typename Scalar>
RowVectorX<Scalar> mean_readout(const MatrixX<Scalar>& h)
{
    require_shape(h.rows() >= 1, "mean_readout: need at least one row");
    return h.colwise().mean();
}

/// Gradient of mean_readout: each of the n rows receives grad / n.
template <typename Scalar>
MatrixX<Scalar> mean_readout_backward(const RowVectorX<Scalar>& grad, Eigen::Index n)
{
    return grad.replicate(n, 1) / Scalar(n);
}

template <typename Scalar>
Scalar sigmoid(Scalar x)
{
    if (x >= Scalar(0))
        return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

/// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x)
{
    return x > Scalar(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Bilinear-free discriminator: sigmoid(<h, g>).
template <typename DerivedH, typename DerivedG>
typename DerivedH::Scalar discriminator(const Eigen::MatrixBase<DerivedH>& h, const Eigen::MatrixBase<DerivedG>& g)
{
    require_shape(h.size() == g.size(), "discriminator: length mismatch");
    return sigmoid(h.reshaped().dot(g.reshaped()));
}

} // namespace tard

#endif // TARD_NN_LAYERS_HPP
