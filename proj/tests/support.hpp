#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "datekit/core.hpp"

namespace testing {

inline double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

inline double sample_var(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / double(v.size() - 1);
}

inline double std_error(const std::vector<double>& v) { return std::sqrt(sample_var(v) / double(v.size())); }

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
inline std::pair<double, double> ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    const double ne = double(a.size()) * b.size() / double(a.size() + b.size());
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) p += 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return {d, std::clamp(p, 0.0, 1.0)};
}

inline datekit::SeriesPanel single(std::vector<double> path, int t_c, bool treated = true) {
    return datekit::SeriesPanel({datekit::UnitSeries{std::move(path), treated}}, t_c);
}

/// Exhaustive search over simplex weights on a grid of step 1/steps.
inline Eigen::VectorXd simplex_grid_oracle(const Eigen::MatrixXd& donors, const Eigen::VectorXd& target, int steps) {
    const auto J = donors.cols();
    Eigen::VectorXd best, w(J);
    double best_obj = std::numeric_limits<double>::infinity();
    std::vector<int> k(J, 0);
    auto visit = [&](auto&& self, Eigen::Index j, int left) -> void {
        if (j == J - 1) {
            k[j] = left;
            for (Eigen::Index i = 0; i < J; ++i) w[i] = double(k[i]) / steps;
            const double obj = (target - donors * w).squaredNorm();
            if (obj < best_obj) {
                best_obj = obj;
                best = w;
            }
            return;
        }
        for (int a = 0; a <= left; ++a) {
            k[j] = a;
            self(self, j + 1, left - a);
        }
    };
    visit(visit, 0, steps);
    return best;
}

}  // namespace testing
