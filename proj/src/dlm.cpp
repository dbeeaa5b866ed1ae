#include "datekit/dlm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace datekit {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void symmetrize(MatrixXd& M) { M = 0.5 * (M + M.transpose()).eval(); }

/// L with L L' = M for a symmetric positive semi-definite M. Small negative
/// eigenvalues from rounding are clipped; anything larger is a breakdown.
MatrixXd psd_factor(const MatrixXd& M) {
    Eigen::LLT<MatrixXd> llt(M);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M);
    const VectorXd& ev = eig.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    if (ev.minCoeff() < -1e-8 * scale)
        fail(ErrorKind::NumericalBreakdown, "covariance matrix is not positive semi-definite");
    return eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

double student_t_logpdf(double e, double scale2, double dof) {
    return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) - 0.5 * std::log(dof * std::numbers::pi * scale2) -
           0.5 * (dof + 1.0) * std::log1p(e * e / (dof * scale2));
}

double normal_logpdf(double e, double var) { return -0.5 * (std::log(2.0 * std::numbers::pi * var) + e * e / var); }

/// Type-7 empirical quantile of a sorted sample.
double sorted_quantile(const std::vector<double>& sorted, double prob) {
    const double pos = prob * double(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - double(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

// ---------------------------------------------------------------------------

void DlmSpec::validate() const {
    const int p = state_dim();
    require(p >= 1, "DLM state dimension must be positive");
    require(G.rows() == p && G.cols() == p, "G must be square with the state dimension");
    require(C0.rows() == p && C0.cols() == p, "C0 must be square with the state dimension");
    require(delta > 0.0 && delta <= 1.0, "state discount must lie in (0, 1]");
    require(beta_v > 0.0 && beta_v <= 1.0, "volatility discount must lie in (0, 1]");
    require(n0 > 0.0 && s0 > 0.0, "n0 and s0 must be positive");
    Eigen::LLT<MatrixXd> llt(C0);
    require(llt.info() == Eigen::Success, "C0 must be positive definite");
    if (evolution_cov) require(evolution_cov->rows() == p && evolution_cov->cols() == p, "W has wrong shape");
    if (known_variance)
        for (double v : *known_variance) require(v > 0.0 && std::isfinite(v), "known variances must be positive");
}

DlmSpec DlmSpec::standard(ObservationForm form) {
    DlmSpec spec;
    spec.form = form;
    const int p = form == ObservationForm::LagCoefficient ? 4 : 5;
    spec.G = MatrixXd::Identity(p, p);
    spec.m0 = VectorXd::Zero(p);
    // The 0.95 prior mean sits on the lag coefficient; the increment form
    // already carries a unit lag, so its prior is centred at zero.
    if (form == ObservationForm::LagCoefficient) spec.m0[0] = 0.95;
    spec.C0 = MatrixXd::Identity(p, p);
    return spec;
}

DlmData make_dlm_data(std::span<const double> observations, const InterventionDesign& design, ObservationForm form) {
    const int T = design.horizon();
    if (static_cast<int>(observations.size()) != T)
        fail(ErrorKind::LengthMismatch, "observations and design differ in length");
    DlmData data;
    data.y.reserve(T);
    data.F.reserve(T);
    for (int t = 1; t <= T; ++t) {
        const auto x = design.regressors(t);
        if (form == ObservationForm::LagCoefficient) {
            data.y.push_back(observations[t - 1]);
            data.F.emplace_back(VectorXd{{x[0], x[1], x[2], x[3]}});
        } else {
            data.y.push_back(observations[t - 1] - x[0]);
            data.F.emplace_back(VectorXd{{1.0, x[0], x[1], x[2], x[3]}});
        }
    }
    return data;
}

// ---------------------------------------------------------------------------

FilteredMoments forward_filter(const DlmData& data, const DlmSpec& spec) {
    spec.validate();
    const int T = data.length();
    const int p = spec.state_dim();
    require(T >= 1, "no observations to filter");
    require(static_cast<int>(data.F.size()) == T, "regressors are not aligned with observations");
    if (spec.known_variance && static_cast<int>(spec.known_variance->size()) != T)
        fail(ErrorKind::LengthMismatch, "known variance path does not match the series length");

    FilteredMoments out;
    out.spec = spec;
    out.data = data;
    out.m0 = spec.m0;
    out.C0 = spec.C0;
    out.steps.reserve(T);

    const bool learn = spec.learns_variance();
    VectorXd m = spec.m0;
    MatrixXd C = spec.C0;
    double n = spec.n0;
    double s = spec.s0;
    double total = 0.0;

    for (int t = 1; t <= T; ++t) {
        const VectorXd& F = data.F[t - 1];
        require(F.size() == p, "regressor vector has the wrong dimension");
        FilterStep st;
        st.a = spec.G * m;
        MatrixXd P = spec.G * C * spec.G.transpose();
        if (spec.evolution_cov) st.R = P + (learn ? s : 1.0) * (*spec.evolution_cov);
        else st.R = P / spec.delta;
        symmetrize(st.R);

        double obs_var;
        if (learn) {
            st.n_prior = spec.beta_v * n;
            st.s_prior = s;
            obs_var = s;
        } else {
            obs_var = (*spec.known_variance)[t - 1];
            st.n_prior = 0.0;
            st.s_prior = obs_var;
        }
        const VectorXd RF = st.R * F;
        st.f = F.dot(st.a);
        st.q = F.dot(RF) + obs_var;
        if (!(st.q > 0.0) || !std::isfinite(st.q))
            fail(ErrorKind::NumericalBreakdown, "non-positive forecast variance at t=" + std::to_string(t));
        const double e = data.y[t - 1] - st.f;
        const VectorXd A = RF / st.q;
        st.m = st.a + A * e;

        if (learn) {
            st.log_predictive = student_t_logpdf(e, st.q, st.n_prior);
            st.n = st.n_prior + 1.0;
            const double d = st.n_prior * st.s_prior + st.s_prior * e * e / st.q;
            st.s = d / st.n;
            st.C = (st.s / st.s_prior) * (st.R - A * A.transpose() * st.q);
        } else {
            st.log_predictive = normal_logpdf(e, st.q);
            st.n = 0.0;
            st.s = obs_var;
            st.C = st.R - A * A.transpose() * st.q;
        }
        symmetrize(st.C);
        if (!st.C.allFinite() || (st.C.diagonal().array() < 0.0).any() || !(st.s > 0.0))
            fail(ErrorKind::NumericalBreakdown, "posterior covariance lost positivity at t=" + std::to_string(t));

        total += st.log_predictive;
        m = st.m;
        C = st.C;
        n = st.n;
        s = st.s;
        out.steps.push_back(std::move(st));
    }
    out.log_predictive = total;
    return out;
}

FilteredMoments forward_filter(std::span<const double> observations, const InterventionDesign& design,
                               const DlmSpec& spec) {
    return forward_filter(make_dlm_data(observations, design, spec.form), spec);
}

SmoothedMoments smooth(const FilteredMoments& filtered) {
    require(!filtered.spec.learns_variance(), "smoothing moments need a known observation variance");
    const int T = filtered.length();
    const MatrixXd& G = filtered.spec.G;
    SmoothedMoments out;
    out.mean.resize(T);
    out.cov.resize(T);
    out.mean[T - 1] = filtered.at(T).m;
    out.cov[T - 1] = filtered.at(T).C;
    for (int t = T - 1; t >= 1; --t) {
        const auto& cur = filtered.at(t);
        const auto& next = filtered.at(t + 1);
        const MatrixXd B = next.R.ldlt().solve(G * cur.C).transpose();
        out.mean[t - 1] = cur.m + B * (out.mean[t] - next.a);
        MatrixXd S = cur.C + B * (out.cov[t] - next.R) * B.transpose();
        symmetrize(S);
        out.cov[t - 1] = std::move(S);
    }
    return out;
}

// ---------------------------------------------------------------------------

DlmPosterior::DlmPosterior(int draws, int length, int state_dim)
    : draws_(draws), length_(length), dim_(state_dim) {
    require(draws >= 1 && length >= 1 && state_dim >= 1, "posterior dimensions must be positive");
    states_.assign(static_cast<std::size_t>(draws) * length * state_dim, 0.0);
    variances_.assign(static_cast<std::size_t>(draws) * length, 0.0);
}

DlmPosterior backward_sample(const FilteredMoments& filtered, int draws, RandomStream& rng) {
    require(draws >= 1, "need at least one draw");
    const DlmSpec& spec = filtered.spec;
    const int T = filtered.length();
    const int p = spec.state_dim();
    const bool learn = spec.learns_variance();
    const MatrixXd& G = spec.G;

    // Draw-independent pieces: smoothing gains and conditional factors.
    std::vector<MatrixXd> gain(T), factor(T);
    for (int t = 1; t < T; ++t) {
        const auto& cur = filtered.at(t);
        const auto& next = filtered.at(t + 1);
        gain[t - 1] = next.R.ldlt().solve(G * cur.C).transpose();
        MatrixXd H = cur.C - gain[t - 1] * next.R * gain[t - 1].transpose();
        symmetrize(H);
        factor[t - 1] = psd_factor(H);
    }
    factor[T - 1] = psd_factor(filtered.at(T).C);

    DlmPosterior post(draws, T, p);
    post.G = G;
    post.log_predictive = filtered.log_predictive;
    post.chosen_discounts = {spec.delta, spec.beta_v};
    post.evolution_scaled = learn;
    post.evolution_factor.resize(T);
    for (int t = 1; t <= T; ++t) {
        const MatrixXd& Cprev = t == 1 ? filtered.C0 : filtered.at(t - 1).C;
        const double sprev = t == 1 ? spec.s0 : filtered.at(t - 1).s;
        MatrixXd W;
        if (spec.evolution_cov) W = *spec.evolution_cov;
        else W = (1.0 / spec.delta - 1.0) * (G * Cprev * G.transpose()) / (learn ? sprev : 1.0);
        symmetrize(W);
        post.evolution_factor[t - 1] = psd_factor(W);
    }

    VectorXd z(p), theta(p), next(p);
    for (int s = 0; s < draws; ++s) {
        // Observation variances, backwards from T.
        if (learn) {
            const auto& last = filtered.at(T);
            double phi = rng.gamma(0.5 * last.n, 0.5 * last.n * last.s);
            post.variance(s, T) = 1.0 / phi;
            for (int t = T - 1; t >= 1; --t) {
                const auto& st = filtered.at(t);
                const double shape = 0.5 * (1.0 - spec.beta_v) * st.n;
                const double innovation = shape > 0.0 ? rng.gamma(shape, 0.5 * st.n * st.s) : 0.0;
                phi = spec.beta_v * phi + innovation;
                post.variance(s, t) = 1.0 / phi;
            }
        } else {
            for (int t = 1; t <= T; ++t) post.variance(s, t) = (*spec.known_variance)[t - 1];
        }

        // States, backwards from T.
        for (int t = T; t >= 1; --t) {
            const auto& st = filtered.at(t);
            const double scale = learn ? std::sqrt(post.variance(s, t) / st.s) : 1.0;
            for (int j = 0; j < p; ++j) z[j] = rng.normal();
            if (t == T) {
                theta.noalias() = st.m + scale * (factor[t - 1] * z);
            } else {
                next = post.state(s, t + 1);
                theta.noalias() = st.m + gain[t - 1] * (next - filtered.at(t + 1).a);
                theta.noalias() += scale * (factor[t - 1] * z);
            }
            post.state(s, t) = theta;
        }
    }
    return post;
}

// ---------------------------------------------------------------------------

DiscountGrid default_discount_grid() {
    const double values[] = {0.95, 0.99, 0.999};
    DiscountGrid grid;
    for (double d : values)
        for (double b : values) grid.emplace_back(d, b);
    return grid;
}

std::pair<double, double> grid_search_discounts(const DlmData& data, const DlmSpec& spec, const DiscountGrid& grid) {
    require(!grid.empty(), "discount grid is empty");
    DiscountGrid order = grid;
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second > b.second;
    });
    std::pair<double, double> best = order.front();
    double best_lpd = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& [delta, beta] : order) {
        DlmSpec trial = spec;
        trial.delta = delta;
        trial.beta_v = beta;
        double lpd;
        try {
            lpd = forward_filter(data, trial).log_predictive;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NumericalBreakdown) throw;
            continue;
        }
        if (!any || lpd > best_lpd) {
            best_lpd = lpd;
            best = {delta, beta};
            any = true;
        }
    }
    if (!any) fail(ErrorKind::NumericalBreakdown, "every discount pair in the grid broke down");
    return best;
}

std::pair<double, double> grid_search_discounts(std::span<const double> observations,
                                                const InterventionDesign& design, const DlmSpec& spec,
                                                const DiscountGrid& grid) {
    return grid_search_discounts(make_dlm_data(observations, design, spec.form), spec, grid);
}

// ---------------------------------------------------------------------------

BranchDraws branch_draws(const DlmPosterior& post, const SeriesPanel& panel, std::size_t unit, const DlmSpec& spec,
                         const BranchOptions& options) {
    const int T = panel.horizon();
    const int tc = panel.t_c();
    if (post.length() != T) fail(ErrorKind::LengthMismatch, "posterior length differs from the panel horizon");
    const int p = post.state_dim();
    const bool lag_form = spec.form == ObservationForm::LagCoefficient;
    require(p == (lag_form ? 4 : 5), "posterior state dimension does not match the observation form");
    const int lag = lag_form ? 0 : 1;
    const int eff = lag + 1;  // spot, persistent, trend follow the lag coefficient

    // Branching switches the intervention on for the unit regardless of its flag.
    const InterventionClock clock{tc, true};
    const double y_prev = panel.unit(unit).path[tc - 1];
    const int H = T - tc + 1;
    const int S = post.draws();

    BranchDraws out;
    out.draws = S;
    out.horizons = H;
    out.date.resize(S, H);
    out.spot.resize(S, H);
    out.persistent.resize(S, H);
    out.trend.resize(S, H);
    out.treated_path.resize(S, H);
    out.control_path.resize(S, H);

    RandomStream rng(options.seed, 0, unit, StreamRole::Posterior);
    VectorXd theta(p), z(p);
    for (int s = 0; s < S; ++s) {
        double y1 = y_prev, y0 = y_prev;
        double d = 0.0, d_spot = 0.0, d_pers = 0.0, d_trend = 0.0;
        theta = post.state(s, tc);
        for (int h = 0; h < H; ++h) {
            const int t = tc + h;
            if (h > 0) {
                if (options.mode == ContrastMode::SmoothedStates) {
                    theta = post.state(s, t);
                } else {
                    for (int j = 0; j < p; ++j) z[j] = rng.normal();
                    const double scale = post.evolution_scaled ? std::sqrt(post.variance(s, t)) : 1.0;
                    theta = post.G * theta + scale * (post.evolution_factor[t - 1] * z);
                }
            }
            const double a = lag_form ? theta[lag] : 1.0 + theta[lag];
            const double intercept = lag_form ? 0.0 : theta[0];
            const double e_spot = clock.spot(t) * theta[eff];
            const double e_pers = clock.persistent(t) * theta[eff + 1];
            const double e_trend = clock.trend(t) * theta[eff + 2];

            y1 = a * y1 + intercept + e_spot + e_pers + e_trend;
            y0 = a * y0 + intercept;
            d = a * d + (e_spot + e_pers + e_trend);
            d_spot = a * d_spot + e_spot;
            d_pers = a * d_pers + e_pers;
            d_trend = a * d_trend + e_trend;

            out.date(s, h) = d;
            out.spot(s, h) = d_spot;
            out.persistent(s, h) = d_pers;
            out.trend(s, h) = d_trend;
            out.treated_path(s, h) = y1;
            out.control_path(s, h) = y0;
        }
    }
    return out;
}

DatePath summarize_draws(const Eigen::MatrixXd& draws, double level) {
    require(draws.rows() >= 1, "no draws to summarise");
    const auto S = draws.rows();
    const auto H = draws.cols();
    std::vector<double> mean(H);
    DatePath path = DatePath::point(std::vector<double>(H));
    path.level = level;
    const auto levels = quantile_levels();
    path.bands.resize(levels.size());
    for (std::size_t k = 0; k < levels.size(); ++k) {
        path.bands[k].level = levels[k];
        path.bands[k].lower.resize(H);
        path.bands[k].upper.resize(H);
    }
    path.lower.resize(H);
    path.upper.resize(H);

    std::vector<double> col(S);
    for (Eigen::Index h = 0; h < H; ++h) {
        for (Eigen::Index s = 0; s < S; ++s) col[s] = draws(s, h);
        path.estimate[h] = draws.col(h).mean();
        std::sort(col.begin(), col.end());
        path.lower[h] = sorted_quantile(col, 0.5 - 0.5 * level);
        path.upper[h] = sorted_quantile(col, 0.5 + 0.5 * level);
        for (std::size_t k = 0; k < levels.size(); ++k) {
            path.bands[k].lower[h] = sorted_quantile(col, 0.5 - 0.5 * levels[k]);
            path.bands[k].upper[h] = sorted_quantile(col, 0.5 + 0.5 * levels[k]);
        }
    }
    return path;
}

namespace {

DatePath date_with_components(const BranchDraws& b, double level) {
    DatePath date = summarize_draws(b.date, level);
    ComponentPaths c;
    for (int h = 0; h < b.horizons; ++h) {
        c.spot.push_back(b.spot.col(h).mean());
        c.persistent.push_back(b.persistent.col(h).mean());
        c.trend.push_back(b.trend.col(h).mean());
    }
    date.components = std::move(c);
    return date;
}

}  // namespace

DatePath branch_counterfactual(const DlmPosterior& post, const SeriesPanel& panel, std::size_t unit,
                               const DlmSpec& spec, const BranchOptions& options) {
    return date_with_components(branch_draws(post, panel, unit, spec, options), options.level);
}

Decomposition decompose_effects(const DlmPosterior& post, const SeriesPanel& panel, std::size_t unit,
                                const DlmSpec& spec, const BranchOptions& options) {
    const BranchDraws b = branch_draws(post, panel, unit, spec, options);
    return {summarize_draws(b.spot, options.level), summarize_draws(b.persistent, options.level),
            summarize_draws(b.trend, options.level)};
}

// ---------------------------------------------------------------------------

DlmFit fit_dlm(const SeriesPanel& panel, const DlmOptions& options, std::optional<std::size_t> unit) {
    std::size_t idx;
    if (unit) {
        idx = *unit;
        require(idx < panel.size(), "unit index out of range");
    } else {
        const auto treated = panel.treated_indices();
        if (treated.empty()) fail(ErrorKind::WrongScenario, "DLM estimation needs a treated unit");
        idx = treated.front();
    }
    const UnitSeries& series = panel.unit(idx);
    const InterventionDesign design = build_design(panel, series);
    const std::span<const double> obs(series.path.data() + 1, series.path.size() - 1);
    const DlmData data = make_dlm_data(obs, design, options.spec.form);

    DlmSpec spec = options.spec;
    const auto discounts = grid_search_discounts(data, spec, options.grid);
    spec.delta = discounts.first;
    spec.beta_v = discounts.second;

    const FilteredMoments filtered = forward_filter(data, spec);
    RandomStream rng(options.seed, 0, idx, StreamRole::Posterior);
    const DlmPosterior post = backward_sample(filtered, options.draws, rng);

    BranchOptions branch = options.branch;
    branch.seed = stream_key(options.seed, 1, idx, StreamRole::Posterior);
    const BranchDraws draws = branch_draws(post, panel, idx, spec, branch);

    DlmFit fit;
    fit.discounts = discounts;
    fit.log_predictive = filtered.log_predictive;
    fit.date = date_with_components(draws, branch.level);
    fit.decomposition = {summarize_draws(draws.spot, branch.level), summarize_draws(draws.persistent, branch.level),
                         summarize_draws(draws.trend, branch.level)};
    fit.treated_path = summarize_draws(draws.treated_path, branch.level);
    fit.control_path = summarize_draws(draws.control_path, branch.level);
    return fit;
}

}  // namespace datekit
