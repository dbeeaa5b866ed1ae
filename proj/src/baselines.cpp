#include "datekit/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace datekit {

std::string to_string(BaselineMethod m) {
    switch (m) {
        case BaselineMethod::LM: return "lm";
        case BaselineMethod::LMAR1: return "lm-ar1";
        case BaselineMethod::ARIMAX: return "arimax";
        case BaselineMethod::ObservedY: return "y";
        case BaselineMethod::SCM: return "scm";
        case BaselineMethod::DiD: return "did";
    }
    return "unknown";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// The unit a single-series model is fitted to: the first treated unit, or the
// first unit when the panel is control-only (its indicators are all zero).
const UnitSeries& model_unit(const SeriesPanel& panel) {
    const auto treated = panel.treated_indices();
    return panel.unit(treated.empty() ? 0 : treated.front());
}

std::array<double, 3> indicators(const InterventionClock& clock, int t) {
    return {clock.spot(t), clock.persistent(t), clock.trend(t)};
}

struct Ols {
    VectorXd beta;        // full length, zero for dropped columns
    MatrixXd cov;         // full size, zero rows/cols for dropped columns
    std::vector<bool> kept;
    double sigma2 = 0.0;
    VectorXd residuals;
};

// OLS with all-zero columns removed. Throws RankDeficient on a collinear design.
Ols ols(const MatrixXd& X, const VectorXd& y) {
    const auto n = X.rows();
    const auto k = X.cols();
    Ols out;
    out.kept.assign(k, false);
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < k; ++j)
        if (X.col(j).cwiseAbs().maxCoeff() > 0.0) {
            out.kept[j] = true;
            cols.push_back(j);
        }
    const auto p = static_cast<Eigen::Index>(cols.size());
    if (n <= p) fail(ErrorKind::RankDeficient, "fewer observations than regressors");
    MatrixXd Xk(n, p);
    for (Eigen::Index j = 0; j < p; ++j) Xk.col(j) = X.col(cols[j]);

    Eigen::ColPivHouseholderQR<MatrixXd> qr(Xk);
    if (qr.rank() < p) fail(ErrorKind::RankDeficient, "design matrix is collinear");
    const VectorXd b = qr.solve(y);
    out.residuals = y - Xk * b;
    out.sigma2 = out.residuals.squaredNorm() / double(n - p);
    const MatrixXd xtx_inv = (Xk.transpose() * Xk).inverse();

    out.beta = VectorXd::Zero(k);
    out.cov = MatrixXd::Zero(k, k);
    for (Eigen::Index a = 0; a < p; ++a) {
        out.beta[cols[a]] = b[a];
        for (Eigen::Index c = 0; c < p; ++c) out.cov(cols[a], cols[c]) = out.sigma2 * xtx_inv(a, c);
    }
    return out;
}

bool collapsed(double sigma2, const VectorXd& y) {
    const double scale = 1.0 + y.cwiseAbs().maxCoeff();
    return sigma2 <= 1e-20 * scale * scale;
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<double> diag_se(const MatrixXd& cov) {
    std::vector<double> se;
    for (Eigen::Index j = 0; j < cov.rows(); ++j) se.push_back(std::sqrt(std::max(cov(j, j), 0.0)));
    return se;
}

}  // namespace

// ---------------------------------------------------------------------------

BaselineFit fit_lm(const SeriesPanel& panel, double level) {
    const int T = panel.horizon();
    if (T < 5) fail(ErrorKind::InvalidArgument, "LM needs at least 5 observations");
    const auto& unit = model_unit(panel);
    const InterventionClock clock{panel.t_c(), unit.treated};

    MatrixXd X(T, 4);
    VectorXd y(T);
    for (int t = 1; t <= T; ++t) {
        const auto x = indicators(clock, t);
        X.row(t - 1) << 1.0, x[0], x[1], x[2];
        y[t - 1] = unit.path[t];
    }
    const Ols fit = ols(X, y);

    BaselineFit out;
    out.method = BaselineMethod::LM;
    out.coefficients = to_std(fit.beta);
    out.std_errors = diag_se(fit.cov);
    out.residual_variance = fit.sigma2;
    out.degenerate_variance = collapsed(fit.sigma2, y);
    for (int t = 0; t <= T; ++t) {
        const auto x = indicators(clock, t);
        out.mean_path.push_back(fit.beta[0] + x[0] * fit.beta[1] + x[1] * fit.beta[2] + x[2] * fit.beta[3]);
    }

    // Treated minus control mean path is x_t' beta on the indicator block. The
    // band is for Y_t(1) - Y_t(0), so each potential outcome adds its own noise.
    std::vector<double> est, se;
    const InterventionClock on{panel.t_c(), true};
    for (int t = panel.t_c(); t <= T; ++t) {
        const auto x = indicators(on, t);
        VectorXd g(4);
        g << 0.0, x[0], x[1], x[2];
        est.push_back(g.dot(fit.beta));
        se.push_back(std::sqrt(std::max(g.dot(fit.cov * g), 0.0) + 2.0 * fit.sigma2));
    }
    out.date = gaussian_date_path(std::move(est), se, level);
    return out;
}

BaselineFit fit_lm_ar1(const SeriesPanel& panel, double level) {
    const int T = panel.horizon();
    if (T < 5) fail(ErrorKind::InvalidArgument, "LM-AR(1) needs at least 5 observations");
    const auto& unit = model_unit(panel);
    const InterventionClock clock{panel.t_c(), unit.treated};

    MatrixXd X(T, 5);
    VectorXd y(T);
    for (int t = 1; t <= T; ++t) {
        const auto x = indicators(clock, t);
        X.row(t - 1) << 1.0, unit.path[t - 1], x[0], x[1], x[2];
        y[t - 1] = unit.path[t];
    }
    const Ols fit = ols(X, y);
    const VectorXd& b = fit.beta;
    const double phi = b[1];

    BaselineFit out;
    out.method = BaselineMethod::LMAR1;
    out.coefficients = to_std(b);
    out.std_errors = diag_se(fit.cov);
    out.residual_variance = fit.sigma2;
    out.degenerate_variance = collapsed(fit.sigma2, y);
    out.mean_path.push_back(unit.path[0]);
    for (int t = 1; t <= T; ++t) {
        const auto x = indicators(clock, t);
        out.mean_path.push_back(b[0] + phi * out.mean_path.back() + x[0] * b[2] + x[1] * b[3] + x[2] * b[4]);
    }

    // Both arms share y_{t_c-1}, so the difference obeys D_h = phi D_{h-1} + x' beta
    // with D_{-1} = 0. The gradient with respect to b follows the same recursion.
    std::vector<double> est, se;
    const InterventionClock on{panel.t_c(), true};
    double D = 0.0;
    VectorXd grad = VectorXd::Zero(5);
    for (int t = panel.t_c(); t <= T; ++t) {
        const auto x = indicators(on, t);
        VectorXd g(5);
        g << 0.0, D, x[0], x[1], x[2];
        g += phi * grad;
        D = phi * D + x[0] * b[2] + x[1] * b[3] + x[2] * b[4];
        grad = g;
        est.push_back(D);
        se.push_back(std::sqrt(std::max(grad.dot(fit.cov * grad), 0.0)));
    }
    out.date = gaussian_date_path(std::move(est), se, level);
    return out;
}

// ---------------------------------------------------------------------------
// ARIMAX(1,1,1) by conditional sum of squares

namespace {

struct CssProblem {
    VectorXd dy;  // differenced outcome, t = 1..T
    MatrixXd dx;  // differenced indicators (kept columns only)

    // Parameters: (u, v, beta) with phi = tanh(u), theta = tanh(v).
    // Returns 0.5 * sum e^2 / m and fills the gradient and d e / d(phi, theta, beta).
    double eval(const VectorXd& par, VectorXd* grad, MatrixXd* jac, VectorXd* resid) const {
        const auto m = dy.size();
        const auto k = dx.cols();
        const double phi = std::tanh(par[0]);
        const double theta = std::tanh(par[1]);
        const VectorXd beta = par.tail(k);
        const VectorXd w = dy - dx * beta;

        const Eigen::Index np = 2 + k;
        VectorXd e = VectorXd::Zero(m);
        MatrixXd de = MatrixXd::Zero(m, np);
        for (Eigen::Index t = 1; t < m; ++t) {
            e[t] = w[t] - phi * w[t - 1] - theta * e[t - 1];
            de(t, 0) = -w[t - 1] - theta * de(t - 1, 0);
            de(t, 1) = -e[t - 1] - theta * de(t - 1, 1);
            for (Eigen::Index j = 0; j < k; ++j)
                de(t, 2 + j) = -dx(t, j) + phi * dx(t - 1, j) - theta * de(t - 1, 2 + j);
        }
        const double nm = double(m - 1);
        const VectorXd ee = e.tail(m - 1);
        const MatrixXd J = de.bottomRows(m - 1);
        if (grad) {
            *grad = J.transpose() * ee / nm;
            (*grad)[0] *= 1.0 - phi * phi;
            (*grad)[1] *= 1.0 - theta * theta;
        }
        if (jac) *jac = J;
        if (resid) *resid = ee;
        return 0.5 * ee.squaredNorm() / nm;
    }
};

}  // namespace

BaselineFit fit_arimax(const SeriesPanel& panel, double level) { return fit_arimax(panel, ArimaxControl{}, level); }

BaselineFit fit_arimax(const SeriesPanel& panel, const ArimaxControl& control, double level) {
    const int T = panel.horizon();
    if (T < 10) fail(ErrorKind::InvalidArgument, "ARIMAX needs T >= 10");
    const auto& unit = model_unit(panel);
    const InterventionClock clock{panel.t_c(), unit.treated};

    MatrixXd dx_full(T, 3);
    VectorXd dy(T);
    for (int t = 1; t <= T; ++t) {
        const auto a = indicators(clock, t);
        const auto b = indicators(clock, t - 1);
        for (int j = 0; j < 3; ++j) dx_full(t - 1, j) = a[j] - b[j];
        dy[t - 1] = unit.path[t] - unit.path[t - 1];
    }
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < 3; ++j)
        if (dx_full.col(j).cwiseAbs().maxCoeff() > 0.0) cols.push_back(j);
    const auto k = static_cast<Eigen::Index>(cols.size());
    CssProblem prob{dy, MatrixXd(T, k)};
    for (Eigen::Index j = 0; j < k; ++j) prob.dx.col(j) = dx_full.col(cols[j]);

    // Start from the white-noise solution: phi = theta = 0, beta by OLS.
    const Eigen::Index np = 2 + k;
    VectorXd par = VectorXd::Zero(np);
    if (k > 0) {
        Eigen::ColPivHouseholderQR<MatrixXd> qr(prob.dx.bottomRows(T - 1));
        if (qr.rank() < k) fail(ErrorKind::RankDeficient, "ARIMAX indicator design is collinear");
        par.tail(k) = qr.solve(VectorXd(dy.tail(T - 1)));
    }

    VectorXd g;
    double f = prob.eval(par, &g, nullptr, nullptr);
    MatrixXd Hinv = MatrixXd::Identity(np, np);
    int iter = 0;
    bool converged = g.lpNorm<Eigen::Infinity>() < control.gradient_tolerance;
    while (!converged) {
        if (iter >= control.max_iterations)
            fail(ErrorKind::NonConvergence, "ARIMAX did not converge in " + std::to_string(iter) + " iterations");
        ++iter;
        VectorXd dir = -Hinv * g;
        if (dir.dot(g) >= 0.0) {
            Hinv.setIdentity();
            dir = -g;
        }
        double step = 1.0;
        VectorXd trial, g_new;
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            trial = par + step * dir;
            f_new = prob.eval(trial, &g_new, nullptr, nullptr);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * g.dot(dir)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No further decrease is representable; accept a numerically stationary point.
            if (g.lpNorm<Eigen::Infinity>() < 1e-6) break;
            fail(ErrorKind::NonConvergence, "ARIMAX line search failed");
        }
        const VectorXd s = trial - par;
        const VectorXd yv = g_new - g;
        par = trial;
        f = f_new;
        g = g_new;
        const double sy = s.dot(yv);
        if (sy > 1e-16 * s.norm() * yv.norm()) {
            const double rho = 1.0 / sy;
            const MatrixXd I = MatrixXd::Identity(np, np);
            Hinv = (I - rho * s * yv.transpose()) * Hinv * (I - rho * yv * s.transpose()) + rho * s * s.transpose();
        }
        converged = g.lpNorm<Eigen::Infinity>() < control.gradient_tolerance;
    }

    MatrixXd J;
    VectorXd e;
    prob.eval(par, nullptr, &J, &e);
    const double dof = double(e.size() - np);
    if (dof <= 0) fail(ErrorKind::RankDeficient, "too few observations for ARIMAX");
    const double sigma2 = e.squaredNorm() / dof;
    const MatrixXd cov = sigma2 * (J.transpose() * J).completeOrthogonalDecomposition().pseudoInverse();

    const double phi = std::tanh(par[0]);
    const double theta = std::tanh(par[1]);
    VectorXd beta = VectorXd::Zero(3);
    MatrixXd beta_cov = MatrixXd::Zero(3, 3);
    for (Eigen::Index a = 0; a < k; ++a) {
        beta[cols[a]] = par[2 + a];
        for (Eigen::Index c = 0; c < k; ++c) beta_cov(cols[a], cols[c]) = cov(2 + a, 2 + c);
    }

    BaselineFit out;
    out.method = BaselineMethod::ARIMAX;
    out.coefficients = {phi, theta, beta[0], beta[1], beta[2]};
    out.std_errors = {std::sqrt(std::max(cov(0, 0), 0.0)), std::sqrt(std::max(cov(1, 1), 0.0))};
    for (double v : beta_cov.diagonal()) out.std_errors.push_back(std::sqrt(std::max(v, 0.0)));
    out.residual_variance = sigma2;
    out.degenerate_variance = collapsed(sigma2, dy);
    for (int t = 0; t <= T; ++t) {
        const auto x = indicators(clock, t);
        out.mean_path.push_back(unit.path[0] + x[0] * beta[0] + x[1] * beta[1] + x[2] * beta[2]);
    }
    std::vector<double> est, se;
    const InterventionClock on{panel.t_c(), true};
    for (int t = panel.t_c(); t <= T; ++t) {
        const auto x = indicators(on, t);
        const VectorXd gx = Eigen::Vector3d(x[0], x[1], x[2]);
        est.push_back(gx.dot(beta));
        se.push_back(std::sqrt(std::max(gx.dot(beta_cov * gx), 0.0)));
    }
    out.date = gaussian_date_path(std::move(est), se, level);
    return out;
}

// ---------------------------------------------------------------------------

BaselineFit observed_y(const SeriesPanel& panel, double level) {
    if (panel.n_treated() != 1) fail(ErrorKind::WrongScenario, "observed-Y needs exactly one treated unit");
    const auto& y1 = panel.unit(panel.treated_indices().front()).path;
    const auto controls = panel.control_indices();
    const int tc = panel.t_c();
    const int T = panel.horizon();

    BaselineFit out;
    out.method = BaselineMethod::ObservedY;
    std::vector<double> est;
    if (controls.empty()) {
        // The LM control path is its intercept; intervals carry the intercept's standard error.
        const InterventionClock clock{tc, true};
        MatrixXd X(T, 4);
        VectorXd y(T);
        for (int t = 1; t <= T; ++t) {
            const auto x = indicators(clock, t);
            X.row(t - 1) << 1.0, x[0], x[1], x[2];
            y[t - 1] = y1[t];
        }
        const Ols fit = ols(X, y);
        const double c = fit.beta[0];
        const std::vector<double> se(T - tc + 1, std::sqrt(std::max(fit.cov(0, 0), 0.0)));
        for (int t = tc; t <= T; ++t) est.push_back(y1[t] - c);
        out.coefficients = {c};
        out.residual_variance = fit.sigma2;
        out.date = gaussian_date_path(std::move(est), se, level);
        return out;
    }
    if (controls.size() == 1) {
        const auto& y0 = panel.unit(controls.front()).path;
        for (int t = tc; t <= T; ++t) est.push_back(y1[t] - y0[t]);
        out.date = DatePath::point(std::move(est));
        return out;
    }
    // Treated against the control mean; the interval reflects only the
    // sampling error of the control mean.
    const double nc = double(controls.size());
    std::vector<double> se;
    for (int t = tc; t <= T; ++t) {
        double s = 0.0, ss = 0.0;
        for (auto j : controls) s += panel.unit(j).path[t];
        const double mean = s / nc;
        for (auto j : controls) ss += std::pow(panel.unit(j).path[t] - mean, 2);
        est.push_back(y1[t] - mean);
        se.push_back(std::sqrt(ss / (nc - 1.0) / nc));
    }
    out.date = gaussian_date_path(std::move(est), se, level);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic control

SimplexFit simplex_least_squares(const MatrixXd& donors, const VectorXd& target) {
    const auto J = donors.cols();
    require(J >= 1, "simplex fit needs at least one donor");
    require(donors.rows() == target.size(), "donor rows must match target length");
    const MatrixXd G = donors.transpose() * donors;
    const VectorXd c = donors.transpose() * target;
    const double scale = std::max({1.0, G.cwiseAbs().maxCoeff(), c.cwiseAbs().maxCoeff()});
    const double tol = 1e-13 * scale;

    // Start at the best single donor.
    Eigen::Index best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < J; ++j) {
        const double err = (target - donors.col(j)).squaredNorm();
        if (err < best_err) {
            best_err = err;
            best = j;
        }
    }
    VectorXd w = VectorXd::Zero(J);
    w[best] = 1.0;
    std::vector<Eigen::Index> active{best};

    // grad/2 = G w - c; on the optimum the active entries share a common value lambda
    // and inactive ones are no smaller.
    auto multiplier = [&](const VectorXd& h) {
        double s = 0.0;
        for (auto j : active) s += h[j] * w[j];
        return s;  // weights sum to 1, so this is a weighted average of active entries
    };

    SimplexFit out;
    const int max_iter = 50 * static_cast<int>(J) + 100;
    for (int it = 0; it < max_iter; ++it) {
        out.iterations = it + 1;
        const VectorXd h = G * w - c;
        const double lambda = multiplier(h);
        Eigen::Index enter = -1;
        double most = -tol;
        std::vector<bool> in(J, false);
        for (auto j : active) in[j] = true;
        for (Eigen::Index j = 0; j < J; ++j)
            if (!in[j] && h[j] - lambda < most) {
                most = h[j] - lambda;
                enter = j;
            }
        if (enter < 0 && it > 0) break;
        if (enter >= 0) active.push_back(enter);

        // Equality-constrained solve on the active set, stepping back as needed.
        for (int inner = 0; inner < static_cast<int>(J) + 5; ++inner) {
            const auto p = static_cast<Eigen::Index>(active.size());
            MatrixXd K = MatrixXd::Zero(p + 1, p + 1);
            VectorXd rhs(p + 1);
            for (Eigen::Index a = 0; a < p; ++a) {
                for (Eigen::Index b = 0; b < p; ++b) K(a, b) = G(active[a], active[b]);
                K(a, p) = K(p, a) = 1.0;
                rhs[a] = c[active[a]];
            }
            rhs[p] = 1.0;
            const VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
            VectorXd z = VectorXd::Zero(J);
            for (Eigen::Index a = 0; a < p; ++a) z[active[a]] = sol[a];

            bool feasible = true;
            double alpha = 1.0;
            for (auto j : active)
                if (z[j] <= 0.0) {
                    feasible = false;
                    const double denom = w[j] - z[j];
                    if (denom > 0.0) alpha = std::min(alpha, w[j] / denom);
                }
            if (feasible) {
                w = z;
                break;
            }
            w += alpha * (z - w);
            std::vector<Eigen::Index> keep;
            for (auto j : active)
                if (w[j] > 1e-15) keep.push_back(j);
                else w[j] = 0.0;
            if (keep.empty()) {
                keep.push_back(active.front());
                w.setZero();
                w[keep.front()] = 1.0;
            }
            active = keep;
        }
    }

    for (Eigen::Index j = 0; j < J; ++j) w[j] = std::max(w[j], 0.0);
    w /= w.sum();
    out.weights = w;
    out.objective = (target - donors * w).squaredNorm();

    const VectorXd h = G * w - c;
    const double lambda = multiplier(h);
    double kkt = 0.0;
    for (Eigen::Index j = 0; j < J; ++j) {
        if (w[j] > 0.0) kkt = std::max(kkt, std::abs(h[j] - lambda));
        else kkt = std::max(kkt, std::max(0.0, lambda - h[j]));
    }
    out.kkt_residual = kkt / scale;
    return out;
}

namespace {

// Post-period gap of `target` against its synthetic control built from `donors`.
std::vector<double> scm_gap(const SeriesPanel& panel, std::size_t target, const std::vector<std::size_t>& donors,
                            VectorXd* weights) {
    const int tc = panel.t_c();
    const int T = panel.horizon();
    MatrixXd D(tc, donors.size());
    VectorXd y(tc);
    for (int t = 0; t < tc; ++t) {
        y[t] = panel.unit(target).path[t];
        for (std::size_t j = 0; j < donors.size(); ++j) D(t, j) = panel.unit(donors[j]).path[t];
    }
    const SimplexFit fit = simplex_least_squares(D, y);
    if (!(fit.kkt_residual < 1e-8))
        fail(ErrorKind::NumericalBreakdown, "synthetic control QP did not reach its KKT tolerance");
    std::vector<double> gap;
    for (int t = tc; t <= T; ++t) {
        double synth = 0.0;
        for (std::size_t j = 0; j < donors.size(); ++j) synth += fit.weights[j] * panel.unit(donors[j]).path[t];
        gap.push_back(panel.unit(target).path[t] - synth);
    }
    if (weights) *weights = fit.weights;
    return gap;
}

// Type-7 quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& v, double q) {
    const double pos = q * double(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

}  // namespace

BaselineFit fit_scm(const SeriesPanel& panel, double level) {
    const auto treated = panel.treated_indices();
    const auto controls = panel.control_indices();
    if (treated.size() != 1) fail(ErrorKind::WrongScenario, "SCM needs exactly one treated unit");
    if (controls.size() < 2) fail(ErrorKind::InfeasibleFit, "SCM needs at least 2 control units");

    BaselineFit out;
    out.method = BaselineMethod::SCM;
    VectorXd w;
    std::vector<double> est = scm_gap(panel, treated.front(), controls, &w);
    out.coefficients = to_std(w);
    {
        double ss = 0.0;
        for (int t = 0; t < panel.t_c(); ++t) {
            double synth = 0.0;
            for (std::size_t j = 0; j < controls.size(); ++j) synth += w[j] * panel.unit(controls[j]).path[t];
            ss += std::pow(panel.unit(treated.front()).path[t] - synth, 2);
        }
        out.residual_variance = ss / panel.t_c();
    }

    // In-space placebos: each control against the remaining controls.
    const std::size_t H = est.size();
    std::vector<std::vector<double>> gaps(H);
    for (std::size_t i = 0; i < controls.size(); ++i) {
        std::vector<std::size_t> donors;
        for (std::size_t j = 0; j < controls.size(); ++j)
            if (j != i) donors.push_back(controls[j]);
        const auto g = scm_gap(panel, controls[i], donors, nullptr);
        for (std::size_t h = 0; h < H; ++h) gaps[h].push_back(g[h]);
    }
    for (auto& g : gaps) std::sort(g.begin(), g.end());

    auto make = [&](double lvl) {
        Band b{lvl, {}, {}};
        for (std::size_t h = 0; h < H; ++h) {
            b.lower.push_back(est[h] - quantile_sorted(gaps[h], 0.5 + 0.5 * lvl));
            b.upper.push_back(est[h] - quantile_sorted(gaps[h], 0.5 - 0.5 * lvl));
        }
        return b;
    };
    out.date = DatePath::point(est);
    Band main = make(level);
    out.date.level = level;
    out.date.lower = std::move(main.lower);
    out.date.upper = std::move(main.upper);
    for (double q : quantile_levels()) out.date.bands.push_back(make(q));
    return out;
}

BaselineFit fit_did(const SeriesPanel& panel) {
    if (panel.n_treated() != 1 || panel.n_control() != 1)
        fail(ErrorKind::WrongScenario, "DiD needs one treated and one control unit");
    const auto& y1 = panel.unit(panel.treated_indices().front()).path;
    const auto& y0 = panel.unit(panel.control_indices().front()).path;
    const int tc = panel.t_c();
    const double pre1 = std::accumulate(y1.begin(), y1.begin() + tc, 0.0) / tc;
    const double pre0 = std::accumulate(y0.begin(), y0.begin() + tc, 0.0) / tc;

    BaselineFit out;
    out.method = BaselineMethod::DiD;
    out.coefficients = {pre1 - pre0};
    std::vector<double> est;
    for (int t = tc; t <= panel.horizon(); ++t) est.push_back((y1[t] - y0[t]) - (pre1 - pre0));
    out.date = DatePath::point(std::move(est));
    return out;
}

}  // namespace datekit
