#ifndef TARD_TESTS_SUPPORT_HPP
#define TARD_TESTS_SUPPORT_HPP

#include "tard/graph.hpp"
#include "tard/model.hpp"
#include "tard/random.hpp"

#include <random>
#include <vector>

namespace tard::testing {

// Random rooted tree on n nodes with gaussian features.
inline PropagationEvent random_event(Rng& rng, int n, int d, int label = 0)
{
    PropagationEvent ev;
    ev.id = "g" + std::to_string(rng() % 100000);
    ev.label = label;
    ev.num_nodes = n;
    for (int v = 1; v < n; ++v) {
        std::uniform_int_distribution<int> parent(0, v - 1);
        ev.edges.push_back({parent(rng), v});
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    ev.features = Matrix(n, d);
    for (Eigen::Index i = 0; i < ev.features.size(); ++i)
        ev.features.data()[i] = normal(rng);
    return ev;
}

inline PropGraph random_graph(Rng& rng, int n, int d)
{
    return to_prop_graph(random_event(rng, n, d));
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0)
{
    std::normal_distribution<double> normal(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = normal(rng);
    return m;
}

inline ModelDims small_dims(int d_in, int hidden = 4, int shared = 1, int main = 1, int ssl = 1)
{
    ModelDims dims;
    dims.d_in = d_in;
    dims.d_hidden = hidden;
    dims.num_classes = 2;
    dims.shared_layers = shared;
    dims.main_layers = main;
    dims.ssl_layers = ssl;
    return dims;
}

} // namespace tard::testing

#endif
