#pragma once

// Exponential-Euler simulation of the truncated forward SDE in mild form,
//   X_{k+1} = e^{dt_k A}(X_k + b(t_k,X_k) dt_k + sigma(t_k,X_k) dW_k),
// plus the linearized (variational) process along the same noise.
// Increments are counter-based draws: dW[k](i,c) depends only on
// (seed, i, k, c), never on the path count.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "csv.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "state_model.hpp"
#include "time_grid.hpp"

namespace bsdelab {

struct PathBatch {
    VectorXd x0;
    int n_paths = 0;
    uint64_t seed = 0;
    std::vector<MatrixXd> X;  // K+1 entries, each n_paths x d
    std::vector<MatrixXd> dW; // K entries, each n_paths x m

    int steps() const { return static_cast<int>(dW.size()); }
    int dim_state() const { return static_cast<int>(x0.size()); }
    int dim_noise() const { return dW.empty() ? 0 : static_cast<int>(dW[0].cols()); }
};

struct VariationalBatch {
    VectorXd h;
    std::vector<MatrixXd> DX; // K+1 entries, each n_paths x d
};

namespace detail {

template <class Fn>
void parallel_over_paths(int n_paths, int n_threads, Fn&& body) {
    if (n_threads <= 1) {
        body(0, n_paths);
        return;
    }
    std::vector<std::thread> ws;
    const int block = (n_paths + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
        const int lo = t * block, hi = std::min(n_paths, lo + block);
        if (lo >= hi) break;
        ws.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& w : ws) w.join();
}

} // namespace detail

inline PathBatch simulate_forward(const StateModel& model, const TimeGrid& grid,
                                  int n_paths, const VectorXd& x0,
                                  uint64_t seed, int n_threads = 1) {
    if (n_paths < 1)
        throw std::domain_error("simulate_forward: n_paths must be >= 1");
    if (x0.size() != model.dim_state)
        throw shape_error("simulate_forward: x0 dimension mismatch");
    const int d = model.dim_state, m = model.dim_noise, K = grid.K;

    PathBatch batch;
    batch.x0 = x0;
    batch.n_paths = n_paths;
    batch.seed = seed;
    batch.X.assign(K + 1, MatrixXd(n_paths, d));
    batch.dW.assign(K, MatrixXd(n_paths, m));
    batch.X[0] = x0.transpose().replicate(n_paths, 1);

    // One matrix exponential per distinct step size.
    std::vector<MatrixXd> Efac(K);
    std::vector<int> share(K, -1);
    for (int k = 0; k < K; ++k) {
        for (int j = 0; j < k; ++j)
            if (grid.dt(j) == grid.dt(k)) { share[k] = j; break; }
        Efac[k] = (share[k] >= 0) ? Efac[share[k]] : semigroup_step(model, grid.dt(k));
    }

    for (int k = 0; k < K; ++k) {
        const double t = grid.nodes[k];
        const double sdt = std::sqrt(grid.dt(k));
        const MatrixXd& E = Efac[k];
        bool bad = false;
        detail::parallel_over_paths(n_paths, n_threads, [&](int lo, int hi) {
            for (int i = lo; i < hi; ++i) {
                for (int c = 0; c < m; ++c)
                    batch.dW[k](i, c) =
                        sdt * gaussian_draw(seed, static_cast<uint64_t>(i),
                                            static_cast<uint32_t>(k),
                                            static_cast<uint32_t>(c));
                const VectorXd xi = batch.X[k].row(i).transpose();
                const VectorXd step = xi + model.b(t, xi) * grid.dt(k) +
                                      model.sigma(t, xi) *
                                          batch.dW[k].row(i).transpose();
                batch.X[k + 1].row(i) = (E * step).transpose();
            }
        });
        if (!batch.X[k + 1].allFinite()) bad = true;
        if (bad)
            throw simulation_error("simulate_forward: non-finite state at step " +
                                   std::to_string(k + 1));
    }
    return batch;
}

inline VariationalBatch simulate_variational(const StateModel& model,
                                             const TimeGrid& grid,
                                             const PathBatch& batch,
                                             const VectorXd& h,
                                             int n_threads = 1) {
    const int d = model.dim_state, K = grid.K, n = batch.n_paths;
    if (h.size() != d)
        throw shape_error("simulate_variational: direction dimension mismatch");
    if (batch.steps() != K || batch.X.size() != static_cast<size_t>(K + 1))
        throw shape_error("simulate_variational: batch/grid shape mismatch");

    VariationalBatch var;
    var.h = h;
    var.DX.assign(K + 1, MatrixXd(n, d));
    var.DX[0] = h.transpose().replicate(n, 1);

    std::vector<MatrixXd> Efac(K);
    for (int k = 0; k < K; ++k) {
        int j = -1;
        for (int jj = 0; jj < k; ++jj)
            if (grid.dt(jj) == grid.dt(k)) { j = jj; break; }
        Efac[k] = (j >= 0) ? Efac[j] : semigroup_step(model, grid.dt(k));
    }

    for (int k = 0; k < K; ++k) {
        const double t = grid.nodes[k];
        const MatrixXd& E = Efac[k];
        detail::parallel_over_paths(n, n_threads, [&](int lo, int hi) {
            for (int i = lo; i < hi; ++i) {
                const VectorXd xi = batch.X[k].row(i).transpose();
                const VectorXd vi = var.DX[k].row(i).transpose();
                VectorXd step = vi + model.grad_b(t, xi) * vi * grid.dt(k);
                const std::vector<MatrixXd> gs = model.grad_sigma(t, xi);
                MatrixXd dsig = MatrixXd::Zero(d, batch.dim_noise());
                for (int l = 0; l < d; ++l) dsig += vi(l) * gs[l];
                step += dsig * batch.dW[k].row(i).transpose();
                var.DX[k + 1].row(i) = (E * step).transpose();
            }
        });
    }
    return var;
}

// E[sup_k |X_k|^p]^{1/p}; fixed summation order over the path index.
inline double moment_report(const PathBatch& batch, double p) {
    if (!(p >= 1.0)) throw std::domain_error("moment_report: p must be >= 1");
    double acc = 0.0;
    for (int i = 0; i < batch.n_paths; ++i) {
        double sup = 0.0;
        for (const MatrixXd& Xk : batch.X)
            sup = std::max(sup, Xk.row(i).norm());
        acc += std::pow(sup, p);
    }
    return std::pow(acc / batch.n_paths, 1.0 / p);
}

// Columnar export: path, step, time, x_0..x_{d-1}.
inline void write_batch_csv(std::ostream& os, const PathBatch& batch,
                            const TimeGrid& grid) {
    std::vector<std::string> header = {"path", "step", "time"};
    for (int c = 0; c < batch.dim_state(); ++c)
        header.push_back("x_" + std::to_string(c));
    CsvWriter w(os, header);
    for (int i = 0; i < batch.n_paths; ++i)
        for (int k = 0; k <= batch.steps(); ++k) {
            std::vector<std::string> cells = {std::to_string(i),
                                              std::to_string(k),
                                              format_sig17(grid.nodes[k])};
            for (int c = 0; c < batch.dim_state(); ++c)
                cells.push_back(format_sig17(batch.X[k](i, c)));
            w.raw_row(cells);
        }
}

// Compact binary dump, little-endian: magic "BSDB", u32 version, u32 d,
// u32 K, u64 n_paths, u64 seed, then X row-major as double[n][K+1][d].
inline void write_batch_binary(std::ostream& os, const PathBatch& batch) {
    const char magic[4] = {'B', 'S', 'D', 'B'};
    os.write(magic, 4);
    auto put_u32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_u64 = [&](uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    put_u32(1u);
    put_u32(static_cast<uint32_t>(batch.dim_state()));
    put_u32(static_cast<uint32_t>(batch.steps()));
    put_u64(static_cast<uint64_t>(batch.n_paths));
    put_u64(batch.seed);
    for (int i = 0; i < batch.n_paths; ++i)
        for (int k = 0; k <= batch.steps(); ++k)
            for (int c = 0; c < batch.dim_state(); ++c) {
                const double v = batch.X[k](i, c);
                os.write(reinterpret_cast<const char*>(&v), 8);
            }
}

} // namespace bsdelab
