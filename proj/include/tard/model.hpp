#ifndef TARD_MODEL_HPP
#define TARD_MODEL_HPP

#include "tard/checkpoint.hpp"
#include "tard/graph.hpp"
#include "tard/nn.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tard {

/// Layer counts and widths of the Y-shaped model.
struct ModelDims {
    int d_in = 0;
    int d_hidden = 16;
    int num_classes = 2;
    int shared_layers = 1; // l
    int main_layers = 1;   // p
    int ssl_layers = 1;    // t

    bool operator==(const ModelDims&) const = default;
};

void validate_dims(const ModelDims& dims);

/// Shared extractor, classification head and self-supervised head.
///
/// `main` holds the p GCN weights followed by the affine head weight
/// (d_hidden x C) and bias (1 x C).
struct TardParams {
    ModelDims dims;
    std::vector<Parameter> shared;
    std::vector<Parameter> main;
    std::vector<Parameter> ssl;

    const Parameter& head_weight() const { return main[static_cast<std::size_t>(dims.main_layers)]; }
    const Parameter& head_bias() const { return main[static_cast<std::size_t>(dims.main_layers) + 1]; }
    Parameter& head_weight() { return main[static_cast<std::size_t>(dims.main_layers)]; }
    Parameter& head_bias() { return main[static_cast<std::size_t>(dims.main_layers) + 1]; }
};

enum ParamGroup : unsigned {
    kShared = 1u << 0,
    kMain = 1u << 1,
    kSsl = 1u << 2,
    kAllGroups = kShared | kMain | kSsl,
};

/// Glorot-uniform GCN and head weights, zero head bias.
TardParams init_params(const ModelDims& dims, Rng& rng);
TardParams zero_params(const ModelDims& dims);
void validate_params(const TardParams& params);

std::vector<Parameter*> parameter_group(TardParams& params, unsigned groups);
std::vector<const Parameter*> parameter_group(const TardParams& params, unsigned groups);
void zero_grad(TardParams& params);
bool params_finite(const TardParams& params);

/// Names are "shared.K", "main.K", "main.head_weight", "main.head_bias", "ssl.K".
std::vector<NamedMatrix> named_values(const TardParams& params);
TardParams params_from_named(const ModelDims& dims, const std::vector<NamedMatrix>& tensors);

/// Raw bytes of the selected parameter values, for bitwise comparisons.
std::string value_bytes(const TardParams& params, unsigned groups);

struct SharedForward {
    Matrix embeddings;
    std::vector<GcnCache<double>> layers;
};

/// l relu GCN layers. The returned cache points at graph.adj_norm.
SharedForward forward_shared(const PropGraph& graph, const TardParams& params);
SharedForward forward_shared(const Matrix& adj_norm, const Matrix& features, const TardParams& params);

/// Accumulates scale * dL/dTheta_e into the shared grads.
void backward_shared(const SharedForward& fwd, const Matrix& grad_embeddings, TardParams& params, double scale);

struct MainForward {
    RowVector probabilities;
    RowVector logits;
    RowVector readout;
    std::vector<GcnCache<double>> layers;
    Eigen::Index num_nodes = 0;
};

/// p relu GCN layers, mean readout, affine map, softmax.
MainForward forward_main(const Matrix& shared_h, const PropGraph& graph, const TardParams& params);

/// Accumulates scale * dL/dTheta_m and returns dL/d(shared_h) (unscaled).
Matrix backward_main(const MainForward& fwd, const RowVector& grad_logits, TardParams& params, double scale);

struct SslForward {
    std::vector<int> permutation;
    SharedForward shared_original;
    SharedForward shared_shuffled;
    std::vector<GcnCache<double>> head_original;
    std::vector<GcnCache<double>> head_shuffled;
    Matrix h0;
    Matrix h1;
    RowVector g0;
};

/// Runs the original view and a feature-shuffled view (same adjacency) through
/// the shared extractor and the SSL head; g0 is the mean readout of h0.
SslForward forward_ssl(const PropGraph& graph, const TardParams& params, Rng& rng);
SslForward forward_ssl(const PropGraph& graph, const TardParams& params, std::span<const int> permutation);

/// Loss functions below return the loss value and ADD scale * gradient into the
/// grad buffers of the groups they depend on. Callers zero grads first.

/// Contrastive loss; touches Theta_e and Theta_s only.
double ssl_loss(const PropGraph& graph, TardParams& params, Rng& rng, double scale = 1.0);
double ssl_loss(const PropGraph& graph, TardParams& params, std::span<const int> permutation, double scale = 1.0);

/// Cross-entropy of the classification branch; touches Theta_e and Theta_m only.
double main_loss(const PropGraph& graph, int label, TardParams& params, double scale = 1.0);

/// Mean and population covariance of node embeddings.
struct EmbeddingStats {
    RowVector mu;
    Matrix eta;
    Eigen::Index count = 0;

    bool operator==(const EmbeddingStats&) const = default;
};

EmbeddingStats embedding_stats(const Matrix& embeddings);

/// Pools every node embedding of every graph under the shared extractor.
EmbeddingStats compute_embedding_stats(std::span<const PropGraph> graphs, const TardParams& params);

/// ||mu - mu_t||^2 + ||eta - eta_t||_F^2. The covariance term is dropped when
/// the test side pooled a single node.
double constraint_loss(const EmbeddingStats& train_stats, const EmbeddingStats& test_stats);

struct ConstraintGradient {
    double value = 0;
    Matrix grad_embeddings;
};

/// constraint_loss with test stats taken from `test_embeddings`, differentiated
/// w.r.t. those embeddings; train stats are constants.
ConstraintGradient constraint_loss_with_grad(const EmbeddingStats& train_stats, const Matrix& test_embeddings);

struct AdaptationLoss {
    double ssl = 0;
    double constraint = 0;
};

/// L_s + alpha2 * L_c on one graph; touches Theta_e and Theta_s only.
AdaptationLoss adaptation_loss(const PropGraph& graph, TardParams& params, const EmbeddingStats& train_stats,
                               double alpha2, std::span<const int> permutation, double scale = 1.0);

/// Immutable deep copy of a parameter set; cheap to share across threads.
class ParamsSnapshot {
public:
    ParamsSnapshot() = default;
    explicit ParamsSnapshot(std::shared_ptr<const TardParams> p) : params_(std::move(p)) {}

    const TardParams& params() const { return *params_; }
    bool operator==(const ParamsSnapshot& other) const;

private:
    std::shared_ptr<const TardParams> params_;
};

ParamsSnapshot snapshot(const TardParams& params);
TardParams restore(const ParamsSnapshot& snap);

} // namespace tard

#endif // TARD_MODEL_HPP
