#ifndef TARD_GRAPH_HPP
#define TARD_GRAPH_HPP

#include "tard/nn/dense.hpp"
#include "tard/random.hpp"

#include <compare>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tard {

class InvalidEvent : public std::invalid_argument {
public:
    explicit InvalidEvent(const std::string& what) : std::invalid_argument(what) {}
};

struct Edge {
    int parent = 0;
    int child = 0;
    auto operator<=>(const Edge&) const = default;
};

/// One news event: a source post (node 0), its responses, the reply/repost edges
/// and one feature row per post.
struct PropagationEvent {
    std::string id;
    int label = 0;
    int num_nodes = 1;
    std::vector<Edge> edges;
    Matrix features;

    bool operator==(const PropagationEvent&) const = default;
};

enum class AdjacencyMode {
    undirected_sym, // D^-1/2 (max(A, A^T) + I) D^-1/2
    directed_row,   // row-normalized (A + I)
};

/// Runtime form of an event: normalized adjacency plus features.
/// Dense storage; practical up to a few thousand nodes per graph.
struct PropGraph {
    int num_nodes = 0;
    Matrix adj_norm;
    Matrix features;
};

/// Throws InvalidEvent on out-of-range endpoints, self-edges, row-count mismatch,
/// non-finite features or a negative label.
void validate_event(const PropagationEvent& event);

/// Binary matrix with entry (s, t) = 1 iff (s, t) is an edge. Not symmetrized.
Matrix build_adjacency(std::span<const Edge> edges, int n);

Matrix normalize_adjacency(const Matrix& adjacency, AdjacencyMode mode = AdjacencyMode::undirected_sym);

PropGraph to_prop_graph(const PropagationEvent& event, AdjacencyMode mode = AdjacencyMode::undirected_sym);

/// Uniform permutation of [0, n).
std::vector<int> random_permutation(int n, Rng& rng);

/// Row i of the result is row perm[i] of x.
Matrix permute_rows(const Matrix& x, std::span<const int> perm);

/// Features randomly shuffled across nodes; x itself is untouched.
Matrix shuffle_features(const Matrix& x, Rng& rng);

/// Relabels nodes: node i of the input becomes node perm[i] of the result.
/// Features follow their nodes. Used for equivariance checks.
PropGraph relabel_nodes(const PropGraph& graph, std::span<const int> perm);

} // namespace tard

#endif // TARD_GRAPH_HPP
