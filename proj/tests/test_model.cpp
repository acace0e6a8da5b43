#include "support.hpp"

#include "tard/model.hpp"
#include "tard/nn.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tard;
using namespace tard::testing;

namespace {

// Triple-loop relu(adj * h * w), kept separate from the Eigen path on purpose.
Matrix loop_gcn(const Matrix& adj, const Matrix& h, const Matrix& w, bool relu)
{
    const auto n = adj.rows(), din = h.cols(), dout = w.cols();
    Matrix agg = Matrix::Zero(n, din);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < din; ++k)
                agg(i, k) += adj(i, j) * h(j, k);
    Matrix out = Matrix::Zero(n, dout);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < dout; ++c) {
            double s = 0;
            for (Eigen::Index k = 0; k < din; ++k)
                s += agg(i, k) * w(k, c);
            out(i, c) = relu ? std::max(s, 0.0) : s;
        }
    return out;
}

double joint_value(const PropGraph& g, int label, TardParams p, double alpha1, std::span<const int> perm)
{
    return main_loss(g, label, p) + alpha1 * ssl_loss(g, p, perm);
}

double adaptation_value(const PropGraph& g, TardParams p, const EmbeddingStats& stats, double alpha2,
                        std::span<const int> perm)
{
    const auto l = adaptation_loss(g, p, stats, alpha2, perm);
    return l.ssl + alpha2 * l.constraint;
}

std::vector<Parameter*> all_params(TardParams& p)
{
    return parameter_group(p, kAllGroups);
}

} // namespace

TEST(InitParams, ShapesAndGroups)
{
    Rng rng(1);
    const auto p = init_params(small_dims(3, 5, 2, 2, 3), rng);
    EXPECT_EQ(p.shared.size(), 2u);
    EXPECT_EQ(p.main.size(), 4u);
    EXPECT_EQ(p.ssl.size(), 3u);
    EXPECT_EQ(p.shared[0].value.rows(), 3);
    EXPECT_EQ(p.head_weight().value.rows(), 5);
    EXPECT_EQ(p.head_weight().value.cols(), 2);
    EXPECT_EQ(p.head_bias().value.rows(), 1);
    EXPECT_TRUE(p.head_bias().value.isZero(0));
    validate_params(p);
}

TEST(InitParams, RejectsBadDims)
{
    Rng rng(1);
    auto dims = small_dims(3);
    dims.shared_layers = 0;
    EXPECT_THROW(init_params(dims, rng), std::invalid_argument);
    dims = small_dims(0);
    EXPECT_THROW(init_params(dims, rng), std::invalid_argument);
}

TEST(ForwardShared, ZeroWeightsGiveZeroEmbeddings)
{
    Rng rng(2);
    const auto g = random_graph(rng, 5, 3);
    const auto p = zero_params(small_dims(3));
    EXPECT_TRUE(forward_shared(g, p).embeddings.isZero(0));
}

TEST(ForwardShared, MatchesLoopImplementation)
{
    Rng rng(3);
    const auto g = random_graph(rng, 4, 3);
    const auto p = init_params(small_dims(3, 4, 2), rng);
    const Matrix expected =
        loop_gcn(g.adj_norm, loop_gcn(g.adj_norm, g.features, p.shared[0].value, true), p.shared[1].value, true);
    EXPECT_TRUE(forward_shared(g, p).embeddings.isApprox(expected, 1e-12));
    EXPECT_LT((forward_shared(g, p).embeddings - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ForwardShared, EquivariantUnderRelabeling)
{
    Rng rng(4);
    const auto g = random_graph(rng, 7, 3);
    const auto p = init_params(small_dims(3), rng);
    const auto perm = random_permutation(7, rng);
    const Matrix a = forward_shared(g, p).embeddings;
    const Matrix b = forward_shared(relabel_nodes(g, perm), p).embeddings;
    for (int i = 0; i < 7; ++i)
        EXPECT_LT((b.row(perm[static_cast<std::size_t>(i)]) - a.row(i)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ForwardMain, ZeroHeadGivesUniform)
{
    Rng rng(5);
    const auto g = random_graph(rng, 5, 3);
    auto p = init_params(small_dims(3), rng);
    p.head_weight().value.setZero();
    p.head_bias().value.setZero();
    const auto f = forward_main(forward_shared(g, p).embeddings, g, p);
    EXPECT_EQ(f.probabilities(0), 0.5);
    EXPECT_EQ(f.probabilities(1), 0.5);
}

TEST(ForwardMain, ProbabilitiesSumToOneAndAreRelabelInvariant)
{
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 9;
        const auto g = random_graph(rng, n, 3);
        const auto p = init_params(small_dims(3, 6, 1, 2), rng);
        const RowVector a = forward_main(forward_shared(g, p).embeddings, g, p).probabilities;
        EXPECT_NEAR(a.sum(), 1.0, 1e-12);
        const auto r = relabel_nodes(g, random_permutation(n, rng));
        const RowVector b = forward_main(forward_shared(r, p).embeddings, r, p).probabilities;
        EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(ForwardSsl, SingleNodeViewsCoincide)
{
    Rng rng(7);
    const auto g = random_graph(rng, 1, 3);
    auto p = init_params(small_dims(3), rng);
    const auto f = forward_ssl(g, p, rng);
    EXPECT_EQ(f.h0, f.h1);
}

TEST(ForwardSsl, ConstantFeaturesGiveEqualViews)
{
    Rng rng(8);
    auto g = random_graph(rng, 6, 3);
    g.features = Matrix::Constant(6, 3, 0.7);
    const auto p = init_params(small_dims(3), rng);
    const auto f = forward_ssl(g, p, rng);
    EXPECT_EQ(f.h0, f.h1);
}

TEST(ForwardSsl, DeterministicForSeed)
{
    Rng rng(9);
    const auto g = random_graph(rng, 8, 3);
    const auto p = init_params(small_dims(3), rng);
    Rng a(77), b(77);
    EXPECT_EQ(forward_ssl(g, p, a).h1, forward_ssl(g, p, b).h1);
}

TEST(SslLoss, ZeroWeightsGiveLn2)
{
    Rng rng(10);
    const auto g = random_graph(rng, 5, 3);
    auto p = zero_params(small_dims(3));
    EXPECT_NEAR(ssl_loss(g, p, rng), std::log(2.0), 1e-15);
}

TEST(SslLoss, LeavesMainGradsAlone)
{
    Rng rng(11);
    const auto g = random_graph(rng, 5, 3);
    auto p = init_params(small_dims(3), rng);
    zero_grad(p);
    ssl_loss(g, p, rng);
    for (const auto* q : parameter_group(p, kMain))
        EXPECT_TRUE(q->grad.isZero(0));
    bool any = false;
    for (const auto* q : parameter_group(p, kSsl))
        any = any || !q->grad.isZero(0);
    EXPECT_TRUE(any);
}

TEST(MainLoss, ZeroWeightsGiveLn2AndLeaveSslGrads)
{
    Rng rng(12);
    const auto g = random_graph(rng, 5, 3);
    auto p = zero_params(small_dims(3));
    EXPECT_NEAR(main_loss(g, 1, p), std::log(2.0), 1e-15);
    auto q = init_params(small_dims(3), rng);
    zero_grad(q);
    main_loss(g, 0, q);
    for (const auto* s : parameter_group(q, kSsl))
        EXPECT_TRUE(s->grad.isZero(0));
}

TEST(MainLoss, RejectsOutOfRangeLabel)
{
    Rng rng(13);
    const auto g = random_graph(rng, 3, 3);
    auto p = init_params(small_dims(3), rng);
    EXPECT_THROW(main_loss(g, 2, p), std::invalid_argument);
}

TEST(JointLoss, GradientsMatchFiniteDifferences)
{
    Rng rng(14);
    for (int trial = 0; trial < 4; ++trial) {
        const auto g = random_graph(rng, 5, 3);
        auto p = init_params(small_dims(3, 4, 1 + trial % 2, 1 + trial / 2, 1 + trial % 2), rng);
        const auto perm = random_permutation(5, rng);
        const int label = trial % 2;
        zero_grad(p);
        main_loss(g, label, p);
        ssl_loss(g, p, perm, 0.7);
        const auto report = finite_difference_check<double>(
            [&] { return joint_value(g, label, p, 0.7, perm); }, all_params(p), 1e-5);
        EXPECT_TRUE(report.passed) << "trial " << trial << " worst " << report.worst;
    }
}

TEST(EmbeddingStats, IdenticalRowsGiveZeroCovariance)
{
    const auto s = embedding_stats(Matrix::Constant(4, 3, 1.5));
    EXPECT_EQ(s.mu, RowVector::Constant(3, 1.5));
    EXPECT_TRUE(s.eta.isZero(0));
}

TEST(EmbeddingStats, TwoPointsByHand)
{
    Matrix z(2, 2);
    z << 0, 0, 2, 2;
    const auto s = embedding_stats(z);
    EXPECT_EQ(s.mu, RowVector::Ones(2));
    EXPECT_EQ(s.eta, Matrix::Ones(2, 2));
    EXPECT_EQ(s.count, 2);
}

TEST(EmbeddingStats, PooledOrderInvariant)
{
    Rng rng(15);
    std::vector<PropGraph> graphs;
    for (int i = 0; i < 6; ++i)
        graphs.push_back(random_graph(rng, 3 + i, 3));
    const auto p = init_params(small_dims(3), rng);
    const auto a = compute_embedding_stats(graphs, p);
    std::reverse(graphs.begin(), graphs.end());
    const auto b = compute_embedding_stats(graphs, p);
    EXPECT_LT((a.mu - b.mu).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((a.eta - b.eta).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(a.count, 3 + 4 + 5 + 6 + 7 + 8);
}

TEST(ConstraintLoss, Anchors)
{
    EmbeddingStats a{RowVector::Ones(2), Matrix::Identity(2, 2), 5};
    EXPECT_EQ(constraint_loss(a, a), 0.0);
    EmbeddingStats b = a;
    b.mu(0) += 1.0;
    EXPECT_DOUBLE_EQ(constraint_loss(a, b), 1.0);
}

TEST(ConstraintLoss, GradientMatchesFiniteDifferences)
{
    Rng rng(16);
    EmbeddingStats train{random_matrix(rng, 1, 3), Matrix::Identity(3, 3) * 0.4, 100};
    Parameter z(random_matrix(rng, 4, 3));
    z.grad = constraint_loss_with_grad(train, z.value).grad_embeddings;
    Parameter* ps[] = {&z};
    const auto report =
        finite_difference_check<double>([&] { return constraint_loss(train, embedding_stats(z.value)); }, ps, 1e-5);
    EXPECT_TRUE(report.passed) << report.worst;
}

TEST(AdaptationLoss, GradientsMatchFiniteDifferences)
{
    Rng rng(17);
    std::vector<PropGraph> train;
    for (int i = 0; i < 4; ++i)
        train.push_back(random_graph(rng, 6, 4));
    for (int trial = 0; trial < 4; ++trial) {
        const auto g = random_graph(rng, 4 + trial, 4);
        auto p = init_params(small_dims(4, 5, 1 + trial % 2, 1, 2 - trial % 2), rng);
        const auto stats = compute_embedding_stats(train, p);
        // Move away from the point the stats were measured at.
        for (auto* q : parameter_group(p, kShared))
            q->value += random_matrix(rng, q->value.rows(), q->value.cols(), 0.2);
        const auto perm = random_permutation(g.num_nodes, rng);
        zero_grad(p);
        adaptation_loss(g, p, stats, 0.5, perm);
        for (const auto* q : parameter_group(p, kMain))
            EXPECT_TRUE(q->grad.isZero(0));
        const auto report = finite_difference_check<double>(
            [&] { return adaptation_value(g, p, stats, 0.5, perm); }, parameter_group(p, kShared | kSsl), 1e-5);
        EXPECT_TRUE(report.passed) << "trial " << trial << " worst " << report.worst;
    }
}

TEST(Snapshot, RestoreIsBitIdentical)
{
    Rng rng(18);
    auto p = init_params(small_dims(3), rng);
    const auto snap = snapshot(p);
    EXPECT_EQ(snap, snapshot(p));
    const auto g = random_graph(rng, 5, 3);
    OptimizerState state;
    for (int i = 0; i < 3; ++i) {
        zero_grad(p);
        ssl_loss(g, p, rng);
        main_loss(g, 1, p);
        adam_step<double>(all_params(p), state);
    }
    EXPECT_NE(value_bytes(p, kAllGroups), value_bytes(snap.params(), kAllGroups));
    const auto back = restore(snap);
    EXPECT_EQ(value_bytes(back, kAllGroups), value_bytes(snap.params(), kAllGroups));
}

TEST(NamedValues, RoundTrip)
{
    Rng rng(19);
    const auto p = init_params(small_dims(3, 4, 2, 1, 2), rng);
    const auto named = named_values(p);
    EXPECT_EQ(named.front().name, "shared.0");
    const auto q = params_from_named(p.dims, named);
    EXPECT_EQ(value_bytes(p, kAllGroups), value_bytes(q, kAllGroups));
    auto missing = named;
    missing.pop_back();
    EXPECT_THROW(params_from_named(p.dims, missing), std::exception);
}
