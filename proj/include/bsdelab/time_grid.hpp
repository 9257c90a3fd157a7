#pragma once

#include <stdexcept>
#include <vector>

namespace bsdelab {

// Discretization of [t0, T] into K steps; nodes strictly increasing with
// nodes[0] = t0, nodes[K] = T.  Uniform unless constructed from custom nodes.
struct TimeGrid {
    double t0 = 0.0;
    double T = 1.0;
    int K = 1;
    std::vector<double> nodes;

    double dt(int k) const { return nodes[k + 1] - nodes[k]; }
};

inline TimeGrid make_uniform_grid(double t0, double T, int K) {
    if (!(T > t0)) throw std::domain_error("make_uniform_grid: need T > t0");
    if (K < 1) throw std::domain_error("make_uniform_grid: need K >= 1");
    TimeGrid g;
    g.t0 = t0;
    g.T = T;
    g.K = K;
    g.nodes.resize(K + 1);
    for (int k = 0; k <= K; ++k)
        g.nodes[k] = t0 + (T - t0) * (static_cast<double>(k) / K);
    g.nodes[0] = t0;
    g.nodes[K] = T;
    return g;
}

inline TimeGrid make_custom_grid(std::vector<double> nodes) {
    if (nodes.size() < 2)
        throw std::domain_error("make_custom_grid: need at least 2 nodes");
    for (size_t k = 0; k + 1 < nodes.size(); ++k)
        if (!(nodes[k + 1] > nodes[k]))
            throw std::domain_error("make_custom_grid: nodes must increase strictly");
    TimeGrid g;
    g.t0 = nodes.front();
    g.T = nodes.back();
    g.K = static_cast<int>(nodes.size()) - 1;
    g.nodes = std::move(nodes);
    return g;
}

} // namespace bsdelab
