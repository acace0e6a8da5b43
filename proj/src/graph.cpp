#include "tard/graph.hpp"

#include <algorithm>
#include <numeric>

namespace tard {

void validate_event(const PropagationEvent& event)
{
    const std::string where = "event '" + event.id + "': ";
    if (event.num_nodes < 1)
        throw InvalidEvent(where + "needs at least one node");
    if (event.label < 0)
        throw InvalidEvent(where + "negative label " + std::to_string(event.label));
    if (event.features.rows() != event.num_nodes)
        throw InvalidEvent(where + "has " + std::to_string(event.features.rows()) + " feature rows for " +
                           std::to_string(event.num_nodes) + " nodes");
    if (!event.features.allFinite())
        throw InvalidEvent(where + "non-finite feature value");
    for (const auto& e : event.edges) {
        if (e.parent < 0 || e.parent >= event.num_nodes || e.child < 0 || e.child >= event.num_nodes)
            throw InvalidEvent(where + "edge (" + std::to_string(e.parent) + "," + std::to_string(e.child) +
                               ") has an endpoint outside [0, " + std::to_string(event.num_nodes) + ")");
        if (e.parent == e.child)
            throw InvalidEvent(where + "self-edge at node " + std::to_string(e.parent));
    }
}

Matrix build_adjacency(std::span<const Edge> edges, int n)
{
    if (n < 1)
        throw InvalidEvent("build_adjacency: node count must be positive");
    Matrix a = Matrix::Zero(n, n);
    for (const auto& e : edges) {
        if (e.parent < 0 || e.parent >= n || e.child < 0 || e.child >= n)
            throw InvalidEvent("build_adjacency: edge (" + std::to_string(e.parent) + "," + std::to_string(e.child) +
                               ") out of range for " + std::to_string(n) + " nodes");
        a(e.parent, e.child) = 1.0;
    }
    return a;
}

Matrix normalize_adjacency(const Matrix& adjacency, AdjacencyMode mode)
{
    require_shape(adjacency.rows() == adjacency.cols(), "normalize_adjacency: matrix must be square");
    const Eigen::Index n = adjacency.rows();
    if (mode == AdjacencyMode::directed_row) {
        Matrix a = adjacency + Matrix::Identity(n, n);
        a.array().colwise() /= a.rowwise().sum().array();
        return a;
    }
    Matrix a = adjacency.cwiseMax(adjacency.transpose());
    a.diagonal().setOnes();
    const Eigen::VectorXd inv_sqrt = a.rowwise().sum().array().rsqrt();
    return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

PropGraph to_prop_graph(const PropagationEvent& event, AdjacencyMode mode)
{
    validate_event(event);
    PropGraph g;
    g.num_nodes = event.num_nodes;
    g.adj_norm = normalize_adjacency(build_adjacency(event.edges, event.num_nodes), mode);
    g.features = event.features;
    return g;
}

std::vector<int> random_permutation(int n, Rng& rng)
{
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<int> pick(0, i);
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
    }
    return perm;
}

Matrix permute_rows(const Matrix& x, std::span<const int> perm)
{
    require_shape(static_cast<Eigen::Index>(perm.size()) == x.rows(), "permute_rows: permutation length mismatch");
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        out.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    return out;
}

Matrix shuffle_features(const Matrix& x, Rng& rng)
{
    require_shape(x.rows() >= 1, "shuffle_features: empty matrix");
    const auto perm = random_permutation(static_cast<int>(x.rows()), rng);
    return permute_rows(x, perm);
}

PropGraph relabel_nodes(const PropGraph& graph, std::span<const int> perm)
{
    const Eigen::Index n = graph.num_nodes;
    require_shape(static_cast<Eigen::Index>(perm.size()) == n, "relabel_nodes: permutation length mismatch");
    PropGraph out;
    out.num_nodes = graph.num_nodes;
    out.adj_norm.resize(n, n);
    out.features.resize(n, graph.features.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto pi = perm[static_cast<std::size_t>(i)];
        out.features.row(pi) = graph.features.row(i);
        for (Eigen::Index j = 0; j < n; ++j)
            out.adj_norm(pi, perm[static_cast<std::size_t>(j)]) = graph.adj_norm(i, j);
    }
    return out;
}

} // namespace tard
