#pragma once

// Brute-force oracles for alignment costs: enumerate every monotone path
// through the cost lattice (moves: down, right, diagonal) and reduce the
// path costs directly. Exponential, intended for T <= 6.

#include <cmath>
#include <functional>
#include <vector>

namespace signflow::testing {

using CostMatrix = std::vector<std::vector<double>>;  // [n][m] cell costs

inline void enumerate_path_costs(const CostMatrix& d, int i, int j, double acc,
                                 std::vector<double>& out) {
    const int n = static_cast<int>(d.size());
    const int m = static_cast<int>(d[0].size());
    acc += d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    if (i == n - 1 && j == m - 1) {
        out.push_back(acc);
        return;
    }
    if (i + 1 < n) enumerate_path_costs(d, i + 1, j, acc, out);
    if (j + 1 < m) enumerate_path_costs(d, i, j + 1, acc, out);
    if (i + 1 < n && j + 1 < m) enumerate_path_costs(d, i + 1, j + 1, acc, out);
}

inline std::vector<double> all_path_costs(const CostMatrix& d) {
    std::vector<double> out;
    enumerate_path_costs(d, 0, 0, 0.0, out);
    return out;
}

inline double min_path_cost(const CostMatrix& d) {
    double best = std::numeric_limits<double>::infinity();
    for (double c : all_path_costs(d)) best = std::min(best, c);
    return best;
}

// -gamma log sum_paths exp(-cost / gamma), computed with a min shift.
inline double soft_path_cost(const CostMatrix& d, double gamma) {
    const std::vector<double> costs = all_path_costs(d);
    double m = std::numeric_limits<double>::infinity();
    for (double c : costs) m = std::min(m, c);
    double sum = 0.0;
    for (double c : costs) sum += std::exp(-(c - m) / gamma);
    return m - gamma * std::log(sum);
}

inline CostMatrix squared_cost_matrix(const std::vector<std::vector<double>>& x,
                                      const std::vector<std::vector<double>>& y) {
    CostMatrix d(x.size(), std::vector<double>(y.size(), 0.0));
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < x[i].size(); ++k) {
                const double diff = x[i][k] - y[j][k];
                acc += diff * diff;
            }
            d[i][j] = acc;
        }
    }
    return d;
}

}  // namespace signflow::testing
