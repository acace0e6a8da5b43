#include "tard/model.hpp"

#include <cmath>
#include <cstring>

namespace tard {

namespace {

Parameter glorot(int fan_in, int fan_out, Rng& rng)
{
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i)
        w.data()[i] = u(rng);
    return Parameter(std::move(w));
}

void check_features(const PropGraph& graph, const TardParams& params)
{
    require_shape(graph.features.cols() == params.dims.d_in,
                  "graph has feature dimension " + std::to_string(graph.features.cols()) + " but model expects " +
                      std::to_string(params.dims.d_in));
    require_shape(graph.adj_norm.rows() == graph.features.rows() && graph.adj_norm.cols() == graph.features.rows(),
                  "graph adjacency does not match its node count");
}

// Runs a stack of GCN layers; relu everywhere except possibly the last layer.
Matrix run_stack(const Matrix& adj, Matrix h, const std::vector<Parameter>& weights, std::size_t count,
                 bool identity_last, std::vector<GcnCache<double>>& caches)
{
    caches.clear();
    caches.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const bool last = k + 1 == count;
        const auto act = (identity_last && last) ? Activation::identity : Activation::relu;
        auto f = gcn_forward<double>(adj, h, weights[k].value, act);
        h = std::move(f.output);
        caches.push_back(std::move(f.cache));
    }
    return h;
}

Matrix backprop_stack(const std::vector<GcnCache<double>>& caches, Matrix grad, std::vector<Parameter>& weights,
                      double scale)
{
    for (std::size_t k = caches.size(); k-- > 0;) {
        auto g = gcn_backward<double>(caches[k], grad);
        weights[k].grad += scale * g.grad_w;
        grad = std::move(g.grad_h);
    }
    return grad;
}

} // namespace

void validate_dims(const ModelDims& dims)
{
    if (dims.d_in < 1 || dims.d_hidden < 1 || dims.num_classes < 2)
        throw DimensionError("model dims: d_in, d_hidden must be >= 1 and num_classes >= 2");
    if (dims.shared_layers < 1 || dims.main_layers < 1 || dims.ssl_layers < 1)
        throw DimensionError("model dims: every branch needs at least one GCN layer");
}

TardParams init_params(const ModelDims& dims, Rng& rng)
{
    validate_dims(dims);
    TardParams p;
    p.dims = dims;
    for (int k = 0; k < dims.shared_layers; ++k)
        p.shared.push_back(glorot(k == 0 ? dims.d_in : dims.d_hidden, dims.d_hidden, rng));
    for (int k = 0; k < dims.main_layers; ++k)
        p.main.push_back(glorot(dims.d_hidden, dims.d_hidden, rng));
    p.main.push_back(glorot(dims.d_hidden, dims.num_classes, rng));
    p.main.push_back(Parameter(Matrix::Zero(1, dims.num_classes)));
    for (int k = 0; k < dims.ssl_layers; ++k)
        p.ssl.push_back(glorot(dims.d_hidden, dims.d_hidden, rng));
    return p;
}

TardParams zero_params(const ModelDims& dims)
{
    Rng rng(0);
    TardParams p = init_params(dims, rng);
    for (auto* q : parameter_group(p, kAllGroups))
        q->value.setZero();
    return p;
}

void validate_params(const TardParams& p)
{
    validate_dims(p.dims);
    const auto& d = p.dims;
    auto expect = [](const Parameter& q, Eigen::Index r, Eigen::Index c, const std::string& name) {
        require_shape(q.value.rows() == r && q.value.cols() == c && q.grad.rows() == r && q.grad.cols() == c,
                      name + ": expected shape " + std::to_string(r) + "x" + std::to_string(c));
    };
    require_shape(p.shared.size() == static_cast<std::size_t>(d.shared_layers), "shared layer count mismatch");
    require_shape(p.main.size() == static_cast<std::size_t>(d.main_layers) + 2, "main layer count mismatch");
    require_shape(p.ssl.size() == static_cast<std::size_t>(d.ssl_layers), "ssl layer count mismatch");
    for (std::size_t k = 0; k < p.shared.size(); ++k)
        expect(p.shared[k], k == 0 ? d.d_in : d.d_hidden, d.d_hidden, "shared." + std::to_string(k));
    for (int k = 0; k < d.main_layers; ++k)
        expect(p.main[static_cast<std::size_t>(k)], d.d_hidden, d.d_hidden, "main." + std::to_string(k));
    expect(p.head_weight(), d.d_hidden, d.num_classes, "main.head_weight");
    expect(p.head_bias(), 1, d.num_classes, "main.head_bias");
    for (std::size_t k = 0; k < p.ssl.size(); ++k)
        expect(p.ssl[k], d.d_hidden, d.d_hidden, "ssl." + std::to_string(k));
}

namespace {

template <typename Params, typename Ptr>
std::vector<Ptr> collect_group(Params& params, unsigned groups)
{
    std::vector<Ptr> out;
    auto add = [&out](auto& v) {
        for (auto& q : v)
            out.push_back(&q);
    };
    if (groups & kShared)
        add(params.shared);
    if (groups & kMain)
        add(params.main);
    if (groups & kSsl)
        add(params.ssl);
    return out;
}

} // namespace

std::vector<Parameter*> parameter_group(TardParams& params, unsigned groups)
{
    return collect_group<TardParams, Parameter*>(params, groups);
}

std::vector<const Parameter*> parameter_group(const TardParams& params, unsigned groups)
{
    return collect_group<const TardParams, const Parameter*>(params, groups);
}

void zero_grad(TardParams& params)
{
    for (auto* q : parameter_group(params, kAllGroups))
        q->zero_grad();
}

bool params_finite(const TardParams& params)
{
    for (const auto* q : parameter_group(params, kAllGroups))
        if (!q->value.allFinite())
            return false;
    return true;
}

std::vector<NamedMatrix> named_values(const TardParams& p)
{
    std::vector<NamedMatrix> out;
    for (std::size_t k = 0; k < p.shared.size(); ++k)
        out.push_back({"shared." + std::to_string(k), p.shared[k].value});
    for (int k = 0; k < p.dims.main_layers; ++k)
        out.push_back({"main." + std::to_string(k), p.main[static_cast<std::size_t>(k)].value});
    out.push_back({"main.head_weight", p.head_weight().value});
    out.push_back({"main.head_bias", p.head_bias().value});
    for (std::size_t k = 0; k < p.ssl.size(); ++k)
        out.push_back({"ssl." + std::to_string(k), p.ssl[k].value});
    return out;
}

TardParams params_from_named(const ModelDims& dims, const std::vector<NamedMatrix>& tensors)
{
    TardParams p = zero_params(dims);
    const auto expected = named_values(p);
    require_shape(tensors.size() == expected.size(), "parameter file has " + std::to_string(tensors.size()) +
                                                         " tensors, model needs " + std::to_string(expected.size()));
    auto slots = parameter_group(p, kAllGroups);
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        require_shape(tensors[i].name == expected[i].name,
                      "parameter file: expected '" + expected[i].name + "', found '" + tensors[i].name + "'");
        require_shape(tensors[i].value.rows() == expected[i].value.rows() &&
                          tensors[i].value.cols() == expected[i].value.cols(),
                      "parameter file: wrong shape for '" + tensors[i].name + "'");
        *slots[i] = Parameter(tensors[i].value);
    }
    return p;
}

std::string value_bytes(const TardParams& params, unsigned groups)
{
    std::string out;
    for (const auto* q : parameter_group(params, groups)) {
        const auto* bytes = reinterpret_cast<const char*>(q->value.data());
        out.append(bytes, static_cast<std::size_t>(q->value.size()) * sizeof(double));
    }
    return out;
}

SharedForward forward_shared(const Matrix& adj_norm, const Matrix& features, const TardParams& params)
{
    require_shape(features.cols() == params.dims.d_in,
                  "graph has feature dimension " + std::to_string(features.cols()) + " but model expects " +
                      std::to_string(params.dims.d_in));
    SharedForward f;
    f.embeddings = run_stack(adj_norm, features, params.shared, params.shared.size(), false, f.layers);
    return f;
}

SharedForward forward_shared(const PropGraph& graph, const TardParams& params)
{
    check_features(graph, params);
    return forward_shared(graph.adj_norm, graph.features, params);
}

void backward_shared(const SharedForward& fwd, const Matrix& grad_embeddings, TardParams& params, double scale)
{
    backprop_stack(fwd.layers, grad_embeddings, params.shared, scale);
}

MainForward forward_main(const Matrix& shared_h, const PropGraph& graph, const TardParams& params)
{
    require_shape(shared_h.cols() == params.dims.d_hidden && shared_h.rows() == graph.adj_norm.rows(),
                  "forward_main: embeddings do not match graph or hidden width");
    MainForward f;
    f.num_nodes = shared_h.rows();
    const Matrix h = run_stack(graph.adj_norm, shared_h, params.main,
                               static_cast<std::size_t>(params.dims.main_layers), false, f.layers);
    f.readout = mean_readout<double>(h);
    f.logits = f.readout * params.head_weight().value + params.head_bias().value;
    f.probabilities = row_softmax<double>(f.logits);
    return f;
}

Matrix backward_main(const MainForward& fwd, const RowVector& grad_logits, TardParams& params, double scale)
{
    params.head_weight().grad += scale * (fwd.readout.transpose() * grad_logits);
    params.head_bias().grad += scale * grad_logits;
    const RowVector grad_readout = grad_logits * params.head_weight().value.transpose();
    Matrix grad = mean_readout_backward<double>(grad_readout, fwd.num_nodes);
    return backprop_stack(fwd.layers, std::move(grad), params.main, scale);
}

SslForward forward_ssl(const PropGraph& graph, const TardParams& params, Rng& rng)
{
    const auto perm = random_permutation(graph.num_nodes, rng);
    return forward_ssl(graph, params, perm);
}

SslForward forward_ssl(const PropGraph& graph, const TardParams& params, std::span<const int> permutation)
{
    check_features(graph, params);
    SslForward f;
    f.permutation.assign(permutation.begin(), permutation.end());
    f.shared_original = forward_shared(graph.adj_norm, graph.features, params);
    f.shared_shuffled = forward_shared(graph.adj_norm, permute_rows(graph.features, permutation), params);
    f.h0 = run_stack(graph.adj_norm, f.shared_original.embeddings, params.ssl, params.ssl.size(), true,
                     f.head_original);
    f.h1 = run_stack(graph.adj_norm, f.shared_shuffled.embeddings, params.ssl, params.ssl.size(), true,
                     f.head_shuffled);
    f.g0 = mean_readout<double>(f.h0);
    return f;
}

namespace {

struct SslBackward {
    double value = 0;
    Matrix grad_shared_original;
    Matrix grad_shared_shuffled;
};

SslBackward ssl_backward(const SslForward& f, TardParams& params, double scale)
{
    const auto loss = contrastive_loss<double>(f.h0, f.h1, f.g0);
    Matrix grad_h0 = loss.grad_h0 + mean_readout_backward<double>(loss.grad_g0, f.h0.rows());
    SslBackward b;
    b.value = loss.value;
    b.grad_shared_original = backprop_stack(f.head_original, std::move(grad_h0), params.ssl, scale);
    b.grad_shared_shuffled = backprop_stack(f.head_shuffled, loss.grad_h1, params.ssl, scale);
    return b;
}

} // namespace

double ssl_loss(const PropGraph& graph, TardParams& params, Rng& rng, double scale)
{
    const auto perm = random_permutation(graph.num_nodes, rng);
    return ssl_loss(graph, params, perm, scale);
}

double ssl_loss(const PropGraph& graph, TardParams& params, std::span<const int> permutation, double scale)
{
    const auto f = forward_ssl(graph, params, permutation);
    const auto b = ssl_backward(f, params, scale);
    backward_shared(f.shared_original, b.grad_shared_original, params, scale);
    backward_shared(f.shared_shuffled, b.grad_shared_shuffled, params, scale);
    return b.value;
}

double main_loss(const PropGraph& graph, int label, TardParams& params, double scale)
{
    if (label < 0 || label >= params.dims.num_classes)
        throw std::invalid_argument("main_loss: label " + std::to_string(label) + " outside [0, " +
                                    std::to_string(params.dims.num_classes) + ")");
    const auto shared = forward_shared(graph, params);
    const auto head = forward_main(shared.embeddings, graph, params);
    const int labels[] = {label};
    const auto ce = softmax_cross_entropy<double>(head.logits, one_hot(labels, params.dims.num_classes));
    const Matrix grad_shared = backward_main(head, ce.grad_logits, params, scale);
    backward_shared(shared, grad_shared, params, scale);
    return ce.value;
}

EmbeddingStats embedding_stats(const Matrix& embeddings)
{
    require_shape(embeddings.rows() >= 1, "embedding_stats: no embeddings");
    EmbeddingStats s;
    s.count = embeddings.rows();
    s.mu = embeddings.colwise().mean();
    const Matrix centered = embeddings.rowwise() - s.mu;
    s.eta = (centered.transpose() * centered) / static_cast<double>(s.count);
    s.eta = 0.5 * (s.eta + s.eta.transpose()).eval();
    return s;
}

EmbeddingStats compute_embedding_stats(std::span<const PropGraph> graphs, const TardParams& params)
{
    if (graphs.empty())
        throw std::invalid_argument("compute_embedding_stats: empty graph collection");
    Eigen::Index total = 0;
    for (const auto& g : graphs)
        total += g.num_nodes;
    Matrix pooled(total, params.dims.d_hidden);
    Eigen::Index row = 0;
    for (const auto& g : graphs) {
        const auto f = forward_shared(g, params);
        pooled.middleRows(row, f.embeddings.rows()) = f.embeddings;
        row += f.embeddings.rows();
    }
    return embedding_stats(pooled);
}

double constraint_loss(const EmbeddingStats& train_stats, const EmbeddingStats& test_stats)
{
    require_shape(train_stats.mu.size() == test_stats.mu.size() && train_stats.eta.rows() == test_stats.eta.rows() &&
                      train_stats.eta.cols() == test_stats.eta.cols(),
                  "constraint_loss: statistics differ in dimension");
    double value = (train_stats.mu - test_stats.mu).squaredNorm();
    if (test_stats.count > 1)
        value += (train_stats.eta - test_stats.eta).squaredNorm();
    return value;
}

ConstraintGradient constraint_loss_with_grad(const EmbeddingStats& train_stats, const Matrix& test_embeddings)
{
    const auto test = embedding_stats(test_embeddings);
    ConstraintGradient out;
    out.value = constraint_loss(train_stats, test);
    const double n = static_cast<double>(test.count);
    const RowVector grad_mu = 2.0 * (test.mu - train_stats.mu);
    out.grad_embeddings = grad_mu.replicate(test.count, 1) / n;
    if (test.count > 1) {
        // d/dz_i ||eta_t - eta||_F^2 = (2/N) * G (z_i - mu_t), G = 2 (eta_t - eta) symmetric;
        // the dependence through mu_t vanishes because the centered rows sum to zero.
        const Matrix centered = test_embeddings.rowwise() - test.mu;
        const Matrix g = 2.0 * (test.eta - train_stats.eta);
        out.grad_embeddings += (2.0 / n) * centered * g;
    }
    return out;
}

AdaptationLoss adaptation_loss(const PropGraph& graph, TardParams& params, const EmbeddingStats& train_stats,
                               double alpha2, std::span<const int> permutation, double scale)
{
    const auto f = forward_ssl(graph, params, permutation);
    auto b = ssl_backward(f, params, scale);
    AdaptationLoss out;
    out.ssl = b.value;
    const auto c = constraint_loss_with_grad(train_stats, f.shared_original.embeddings);
    out.constraint = c.value;
    if (alpha2 != 0.0)
        b.grad_shared_original += alpha2 * c.grad_embeddings;
    backward_shared(f.shared_original, b.grad_shared_original, params, scale);
    backward_shared(f.shared_shuffled, b.grad_shared_shuffled, params, scale);
    return out;
}

bool ParamsSnapshot::operator==(const ParamsSnapshot& other) const
{
    if (!params_ || !other.params_)
        return params_ == other.params_;
    return params_->dims == other.params_->dims &&
           value_bytes(*params_, kAllGroups) == value_bytes(*other.params_, kAllGroups);
}

ParamsSnapshot snapshot(const TardParams& params)
{
    return ParamsSnapshot(std::make_shared<const TardParams>(params));
}

TardParams restore(const ParamsSnapshot& snap)
{
    return snap.params();
}

} // namespace tard
