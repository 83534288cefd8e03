#pragma once

// Generators and independent oracles shared by the unit and acceptance
// suites. Nothing here calls the library routine it is used to check.

#include <cmath>
#include <vector>

#include "perfsmooth/chain_core.hpp"
#include "perfsmooth/rng.hpp"

namespace perfsmooth::testing {

/// Random row-stochastic matrix; `zero_prob` of the entries are forced to
/// zero (each row keeps at least one positive entry).
inline StochasticMatrix random_kernel(std::size_t s, RngStream& rng, double zero_prob = 0.0) {
    std::vector<std::vector<double>> rows(s, std::vector<double>(s));
    for (auto& row : rows) {
        double sum = 0.0;
        for (auto& v : row) {
            v = rng.uniform() < zero_prob ? 0.0 : -std::log(1.0 - rng.uniform());
            sum += v;
        }
        if (sum == 0.0) {
            row[static_cast<std::size_t>(rng.uniform() * s)] = 1.0;
            sum = 1.0;
        }
        for (auto& v : row) v /= sum;
        // Absorb rounding in the largest entry.
        double total = 0.0;
        for (double v : row) total += v;
        *std::max_element(row.begin(), row.end()) += 1.0 - total;
    }
    return StochasticMatrix(rows);
}

inline ProbVector random_prob(std::size_t s, RngStream& rng) {
    std::vector<double> w(s);
    for (auto& v : w) v = -std::log(1.0 - rng.uniform());
    return ProbVector::normalized(w);
}

/// Plain triple-loop product, independent of StochasticMatrix::operator*.
inline std::vector<double> dense_product(const std::vector<double>& a, const std::vector<double>& b,
                                         std::size_t s) {
    std::vector<double> c(s * s, 0.0);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j)
            for (std::size_t k = 0; k < s; ++k) c[i * s + j] += a[i * s + k] * b[k * s + j];
    return c;
}

/// Max over row pairs of row TV, evaluated by brute force.
inline double brute_dobrushin(const std::vector<double>& k, std::size_t s) {
    double worst = 0.0;
    for (std::size_t x = 0; x < s; ++x)
        for (std::size_t y = 0; y < s; ++y) {
            double tv = 0.0;
            for (std::size_t z = 0; z < s; ++z) tv += std::abs(k[x * s + z] - k[y * s + z]);
            worst = std::max(worst, 0.5 * tv);
        }
    return worst;
}

/// Stationary law by power iteration from uniform.
inline std::vector<double> power_iteration(const std::vector<double>& k, std::size_t s,
                                           std::size_t iters = 100000) {
    std::vector<double> v(s, 1.0 / s), next(s);
    for (std::size_t it = 0; it < iters; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t x = 0; x < s; ++x)
            for (std::size_t y = 0; y < s; ++y) next[y] += v[x] * k[x * s + y];
        double diff = 0.0;
        for (std::size_t x = 0; x < s; ++x) diff += std::abs(next[x] - v[x]);
        v.swap(next);
        if (diff < 1e-16) break;
    }
    return v;
}

inline std::vector<double> empirical(const std::vector<std::size_t>& draws, std::size_t s) {
    std::vector<double> law(s, 0.0);
    for (auto d : draws) law[d] += 1.0;
    for (auto& v : law) v /= static_cast<double>(draws.size());
    return law;
}

inline double tv(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return 0.5 * acc;
}

}  // namespace perfsmooth::testing
