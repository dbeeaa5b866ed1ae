#include "datekit/dipw.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

namespace datekit {

FeatureSpec default_feature_spec() {
    return {PropensityFeature::Intercept, PropensityFeature::LastOutcome, PropensityFeature::PreMean,
            PropensityFeature::LastChange};
}

std::string describe(const FeatureSpec& spec) {
    std::string out;
    for (auto f : spec) {
        if (!out.empty()) out += "+";
        switch (f) {
            case PropensityFeature::Intercept: out += "intercept"; break;
            case PropensityFeature::LastOutcome: out += "y_last"; break;
            case PropensityFeature::PreMean: out += "pre_mean"; break;
            case PropensityFeature::LastChange: out += "last_change"; break;
        }
    }
    return out;
}

std::vector<double> propensity_features(const SeriesPanel& panel, const UnitSeries& unit, const FeatureSpec& spec) {
    const int tc = panel.t_c();
    const auto& y = unit.path;
    std::vector<double> row;
    row.reserve(spec.size());
    for (auto f : spec) {
        switch (f) {
            case PropensityFeature::Intercept: row.push_back(1.0); break;
            case PropensityFeature::LastOutcome: row.push_back(y[tc - 1]); break;
            case PropensityFeature::PreMean:
                row.push_back(std::accumulate(y.begin(), y.begin() + tc, 0.0) / tc);
                break;
            case PropensityFeature::LastChange:
                row.push_back(tc >= 2 ? y[tc - 1] - y[tc - 2] : 0.0);
                break;
        }
    }
    return row;
}

PropensityFit PropensityFit::known(std::vector<double> p) {
    PropensityFit fit;
    for (double& v : p) {
        require(v > 0.0 && v < 1.0, "known propensities must lie in (0, 1)");
        v = std::clamp(v, kPropensityClip, 1.0 - kPropensityClip);
    }
    fit.p = std::move(p);
    return fit;
}

PropensityFit PropensityFit::design_based(const SeriesPanel& panel) {
    const int n1 = panel.n_treated();
    if (n1 == 0 || n1 == static_cast<int>(panel.size()))
        fail(ErrorKind::SingleArm, "design-based propensity needs both arms");
    return known(std::vector<double>(panel.size(), double(n1) / double(panel.size())));
}

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double bernoulli_deviance(const Eigen::VectorXd& z, const Eigen::VectorXd& eta) {
    // -2 log-likelihood, computed stably from the linear predictor.
    double dev = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double e = eta[i];
        const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        dev += 2.0 * (log1pexp - z[i] * e);
    }
    return dev;
}

}  // namespace

PropensityFit fit_propensity(const SeriesPanel& panel, const FeatureSpec& spec) {
    require(!spec.empty(), "feature spec is empty");
    const auto n = static_cast<Eigen::Index>(panel.size());
    const int n1 = panel.n_treated();
    if (n1 == 0 || n1 == n) fail(ErrorKind::SingleArm, "propensity fit needs treated and control units");

    const auto k = static_cast<Eigen::Index>(spec.size());
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = propensity_features(panel, panel.unit(i), spec);
        for (Eigen::Index j = 0; j < k; ++j) X(i, j) = row[j];
        z[i] = panel.unit(i).treated ? 1.0 : 0.0;
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd p(n);
    Eigen::MatrixXd info(k, k);
    int iter = 0;
    constexpr int kMaxIter = 100;
    constexpr double kGradTol = 1e-8;
    for (; iter < kMaxIter; ++iter) {
        const Eigen::VectorXd eta = X * beta;
        for (Eigen::Index i = 0; i < n; ++i) p[i] = sigmoid(eta[i]);
        const Eigen::VectorXd grad = X.transpose() * (z - p);
        if (bernoulli_deviance(z, eta) < 1e-6 * double(n))
            fail(ErrorKind::PerfectSeparation, "deviance collapsed; treatment is separable by the features");
        if (grad.lpNorm<Eigen::Infinity>() < kGradTol) break;
        const Eigen::VectorXd w = (p.array() * (1.0 - p.array())).matrix();
        info = X.transpose() * w.asDiagonal() * X;
        const Eigen::VectorXd step = info.completeOrthogonalDecomposition().solve(grad);
        if (!step.allFinite()) fail(ErrorKind::PerfectSeparation, "Newton step diverged");
        beta += step;
        if (beta.lpNorm<Eigen::Infinity>() > 1e8)
            fail(ErrorKind::PerfectSeparation, "coefficients diverged; treatment is separable by the features");
    }
    {
        const Eigen::VectorXd eta = X * beta;
        for (Eigen::Index i = 0; i < n; ++i) p[i] = sigmoid(eta[i]);
        const Eigen::VectorXd w = (p.array() * (1.0 - p.array())).matrix();
        info = X.transpose() * w.asDiagonal() * X;
    }

    PropensityFit fit;
    fit.feature_spec = spec;
    fit.iterations = iter;
    fit.coefficients.assign(beta.data(), beta.data() + k);
    const Eigen::MatrixXd cov = info.completeOrthogonalDecomposition().pseudoInverse();
    for (Eigen::Index j = 0; j < k; ++j) fit.std_errors.push_back(std::sqrt(std::max(cov(j, j), 0.0)));
    fit.p.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) fit.p[i] = std::clamp(p[i], kPropensityClip, 1.0 - kPropensityClip);
    return fit;
}

// ---------------------------------------------------------------------------

DipwEstimate dipw_estimate(const SeriesPanel& panel, const PropensityFit& prop, bool stabilized) {
    const std::size_t n = panel.size();
    if (prop.p.size() != n) fail(ErrorKind::LengthMismatch, "propensities are not aligned with panel units");
    for (double p : prop.p)
        require(p > 0.0 && p < 1.0, "positivity violated: propensity outside (0, 1)");

    std::vector<double> w1(n), w0(n);
    double sum_w1 = 0.0, sum_w0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool z = panel.unit(i).treated;
        w1[i] = z ? 1.0 / prop.p[i] : 0.0;
        w0[i] = z ? 0.0 : 1.0 / (1.0 - prop.p[i]);
        sum_w1 += w1[i];
        sum_w0 += w0[i];
    }
    if (stabilized && (sum_w1 <= 0.0 || sum_w0 <= 0.0))
        fail(ErrorKind::DegenerateWeights, "a stabilized denominator is zero (empty arm)");

    const double dn = static_cast<double>(n);
    const double norm1 = stabilized ? sum_w1 : dn;
    const double norm0 = stabilized ? sum_w0 : dn;

    DipwEstimate est;
    est.stabilized = stabilized;
    std::vector<double> terms(n);
    for (int t = panel.t_c(); t <= panel.horizon(); ++t) {
        double s1 = 0.0, s0 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = panel.unit(i).path[t];
            s1 += w1[i] * y;
            s0 += w0[i] * y;
        }
        const double mu1 = s1 / norm1;
        const double mu0 = s0 / norm0;

        // Per-unit contributions whose mean is tau; the stabilized version uses
        // the linearisation of the ratio estimator.
        for (std::size_t i = 0; i < n; ++i) {
            const double y = panel.unit(i).path[t];
            if (stabilized)
                terms[i] = dn * (w1[i] * (y - mu1) / sum_w1 - w0[i] * (y - mu0) / sum_w0);
            else
                terms[i] = w1[i] * y - w0[i] * y;
        }
        const double mean = std::accumulate(terms.begin(), terms.end(), 0.0) / dn;
        double ss = 0.0;
        for (double a : terms) ss += (a - mean) * (a - mean);
        const double var = n > 1 ? ss / (dn - 1.0) : 0.0;

        est.mu1.push_back(mu1);
        est.mu0.push_back(mu0);
        est.tau.push_back(mu1 - mu0);
        est.pointwise_se.push_back(std::sqrt(var / dn));
    }
    return est;
}

DatePath DipwEstimate::to_date_path(double level) const { return gaussian_date_path(tau, pointwise_se, level); }

}  // namespace datekit
