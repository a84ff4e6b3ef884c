#pragma once

// Detuning ensembles: seeded per-realization draws, Gauss-Hermite nodes and a
// small deterministic parallel map.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "pulsetls/core.hpp"

namespace pulsetls {

/// How a detuning ensemble is averaged: seeded Monte-Carlo draws, or
/// Gauss-Hermite quadrature over the Gaussian (noise-free).
enum class EnsembleMode { monte_carlo, gauss_hermite };

/// Static detuning (rad/s) of realization `index`. Each index owns an
/// independent generator stream, so draws do not depend on evaluation order.
inline double draw_detuning(const DetuningModel& model, std::uint64_t index)
{
    if (model.deterministic())
        return model.mean;
    std::seed_seq seq{static_cast<std::uint32_t>(model.seed), static_cast<std::uint32_t>(model.seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 engine(seq);
    std::normal_distribution<double> normal(model.mean, model.sigma);
    return normal(engine);
}

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Hermite rule for int exp(-x^2) f(x) dx (Golub-Welsch).
inline QuadratureRule gauss_hermite(int order)
{
    if (order < 1)
        throw ConfigError("Gauss-Hermite order must be >= 1");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int i = 1; i < order; ++i) {
        const double b = std::sqrt(0.5 * i);
        jacobi(i, i - 1) = b;
        jacobi(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    QuadratureRule rule;
    for (int i = 0; i < order; ++i) {
        rule.nodes.push_back(eig.eigenvalues()(i));
        const double v0 = eig.eigenvectors()(0, i);
        rule.weights.push_back(std::sqrt(std::numbers::pi) * v0 * v0);
    }
    return rule;
}

/// Detunings and probability weights for a Gaussian ensemble evaluated by
/// Gauss-Hermite quadrature.
inline QuadratureRule gaussian_detuning_nodes(const DetuningModel& model, int order)
{
    if (model.deterministic())
        return {{model.mean}, {1.0}};
    auto rule = gauss_hermite(order);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        rule.nodes[i] = model.mean + std::numbers::sqrt2 * model.sigma * rule.nodes[i];
        rule.weights[i] /= std::sqrt(std::numbers::pi);
    }
    return rule;
}

inline unsigned default_threads()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Evaluates fn(i) for i in [0, n) on up to `threads` workers and returns the
/// results in index order. The first exception thrown by a worker is
/// rethrown.
template <class Fn>
auto parallel_map(std::size_t n, unsigned threads, Fn&& fn)
{
    using Result = decltype(fn(std::size_t{}));
    std::vector<Result> out(n);
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        out[i] = fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure)
                            failure = std::current_exception();
                        next = n;
                    }
                }
            });
    }
    if (failure)
        std::rethrow_exception(failure);
    return out;
}

}  // namespace pulsetls
