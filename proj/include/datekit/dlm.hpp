#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "datekit/core.hpp"
#include "datekit/rng.hpp"

namespace datekit {

/// How the intervention design enters the observation equation.
enum class ObservationForm {
    /// y_t = F_t' theta_t + e_t with F_t = (y_{t-1}, spot, persistent, trend):
    /// the autoregression lives in the time-varying lag coefficient.
    LagCoefficient,
    /// y_t - y_{t-1} = F_t' theta_t + e_t with F_t = (1, y_{t-1}, spot, persistent, trend).
    Increment,
};

/// How per-draw treated/control paths are propagated beyond t_c.
enum class ContrastMode {
    /// Evolve the state forward from theta_{t_c} with fresh evolution noise.
    SimulateForward,
    /// Use the sampled smoothed state path theta_{t_c..T}.
    SmoothedStates,
};

struct DlmSpec {
    ObservationForm form = ObservationForm::LagCoefficient;
    Eigen::MatrixXd G;
    Eigen::VectorXd m0;
    /// Prior scale: theta_0 | v ~ N(m0, (v / s0) C0).
    Eigen::MatrixXd C0;
    double n0 = 20.0;
    double s0 = 0.01;
    double delta = 0.99;   // state discount
    double beta_v = 0.99;  // volatility discount
    /// Fixed observation variances for t = 1..T; disables variance learning.
    std::optional<std::vector<double>> known_variance;
    /// Explicit evolution covariance replacing the state discount. Absolute
    /// when the variance is known, otherwise in units of the observation variance.
    std::optional<Eigen::MatrixXd> evolution_cov;

    int state_dim() const noexcept { return static_cast<int>(m0.size()); }
    bool learns_variance() const noexcept { return !known_variance.has_value(); }
    void validate() const;

    /// Priors m0 = (0.95, 0, 0, 0), C0 = I, n0 = 20, s0 = 0.01, G = I.
    static DlmSpec standard(ObservationForm form = ObservationForm::LagCoefficient);
};

/// Observation targets and regression vectors for t = 1..T.
struct DlmData {
    std::vector<double> y;
    std::vector<Eigen::VectorXd> F;

    int length() const noexcept { return static_cast<int>(y.size()); }
};

/// Targets/regressors for a unit under the observation form. `observations`
/// holds y_1..y_T.
DlmData make_dlm_data(std::span<const double> observations, const InterventionDesign& design, ObservationForm form);

struct FilterStep {
    Eigen::VectorXd a;  // prior mean of theta_t
    Eigen::MatrixXd R;  // prior covariance (at scale s_{t-1})
    double f = 0.0;     // one-step forecast mean
    double q = 0.0;     // one-step forecast scale
    Eigen::VectorXd m;  // posterior mean
    Eigen::MatrixXd C;  // posterior covariance (at scale s_t)
    double n = 0.0;     // posterior degrees of freedom
    double s = 0.0;     // posterior variance estimate (known variance: V_t)
    double n_prior = 0.0;
    double s_prior = 0.0;
    double log_predictive = 0.0;
};

struct FilteredMoments {
    DlmSpec spec;
    DlmData data;
    Eigen::VectorXd m0;
    Eigen::MatrixXd C0;
    std::vector<FilterStep> steps;  // steps[t-1] is time t
    double log_predictive = 0.0;

    const FilterStep& at(int t) const { return steps.at(t - 1); }
    int length() const noexcept { return static_cast<int>(steps.size()); }
};

/// Conjugate forward filter with discount state evolution and discount
/// stochastic volatility. Throws NumericalBreakdown.
FilteredMoments forward_filter(const DlmData& data, const DlmSpec& spec);
FilteredMoments forward_filter(std::span<const double> observations, const InterventionDesign& design,
                               const DlmSpec& spec);

struct SmoothedMoments {
    std::vector<Eigen::VectorXd> mean;  // mean[t-1] is time t
    std::vector<Eigen::MatrixXd> cov;
};

/// Fixed-interval smoothing moments; requires a known observation variance.
SmoothedMoments smooth(const FilteredMoments& filtered);

/// Joint posterior draws of theta_{1:T} and sigma^2_{1:T}.
class DlmPosterior {
public:
    DlmPosterior(int draws, int length, int state_dim);

    int draws() const noexcept { return draws_; }
    int length() const noexcept { return length_; }
    int state_dim() const noexcept { return dim_; }

    Eigen::Map<const Eigen::VectorXd> state(int s, int t) const {
        return {states_.data() + index(s, t) * dim_, dim_};
    }
    Eigen::Map<Eigen::VectorXd> state(int s, int t) { return {states_.data() + index(s, t) * dim_, dim_}; }
    double variance(int s, int t) const { return variances_[index(s, t)]; }
    double& variance(int s, int t) { return variances_[index(s, t)]; }

    std::pair<double, double> chosen_discounts{0.0, 0.0};
    double log_predictive = 0.0;
    /// Factors L_t with L_t L_t' the evolution covariance at t (t = 1..T), in
    /// units of the observation variance when `evolution_scaled` is set.
    std::vector<Eigen::MatrixXd> evolution_factor;
    bool evolution_scaled = true;
    Eigen::MatrixXd G;

private:
    std::size_t index(int s, int t) const { return static_cast<std::size_t>(s) * length_ + (t - 1); }

    int draws_;
    int length_;
    int dim_;
    std::vector<double> states_;
    std::vector<double> variances_;
};

/// Forward-filtering backward-sampling: S joint draws from the smoothing distribution.
DlmPosterior backward_sample(const FilteredMoments& filtered, int draws, RandomStream& rng);

using DiscountGrid = std::vector<std::pair<double, double>>;  // (delta, beta_v)

/// 3x3 product of {0.95, 0.99, 0.999}.
DiscountGrid default_discount_grid();

/// Pair maximising the total one-step log predictive density; ties go to the
/// larger delta, then the larger beta_v.
std::pair<double, double> grid_search_discounts(const DlmData& data, const DlmSpec& spec, const DiscountGrid& grid);
std::pair<double, double> grid_search_discounts(std::span<const double> observations,
                                                const InterventionDesign& design, const DlmSpec& spec,
                                                const DiscountGrid& grid);

struct BranchOptions {
    ContrastMode mode = ContrastMode::SmoothedStates;
    double level = 0.95;
    /// Seed for the forward evolution noise in SimulateForward mode.
    std::uint64_t seed = 0;
};

/// Per-draw effect paths: date(s, h) and the three single-indicator contrasts.
struct BranchDraws {
    int draws = 0;
    int horizons = 0;
    Eigen::MatrixXd date;  // draws x horizons
    Eigen::MatrixXd spot;
    Eigen::MatrixXd persistent;
    Eigen::MatrixXd trend;
    Eigen::MatrixXd treated_path;  // Y(1) mean paths
    Eigen::MatrixXd control_path;  // Y(0) mean paths
};

/// Propagates every posterior draw from t_c twice (design on / off).
BranchDraws branch_draws(const DlmPosterior& post, const SeriesPanel& panel, std::size_t unit,
                         const DlmSpec& spec, const BranchOptions& options = {});

/// Posterior-mean DATE with central credible bands across draws; components
/// hold the posterior means of the spot/persistent/trend contrasts.
DatePath summarize_draws(const Eigen::MatrixXd& draws, double level);

DatePath branch_counterfactual(const DlmPosterior& post, const SeriesPanel& panel, std::size_t unit,
                               const DlmSpec& spec, const BranchOptions& options = {});

struct Decomposition {
    DatePath spot;
    DatePath persistent;
    DatePath trend;
};

Decomposition decompose_effects(const DlmPosterior& post, const SeriesPanel& panel, std::size_t unit,
                                const DlmSpec& spec, const BranchOptions& options = {});

// ---------------------------------------------------------------------------

struct DlmOptions {
    DlmSpec spec = DlmSpec::standard();
    DiscountGrid grid = default_discount_grid();
    int draws = 5000;
    BranchOptions branch;
    std::uint64_t seed = 0;
};

struct DlmFit {
    std::pair<double, double> discounts;
    double log_predictive = 0.0;
    DatePath date;  // with components populated
    Decomposition decomposition;
    DatePath treated_path;
    DatePath control_path;
};

/// Grid search, FFBS and branching for one unit of the panel (the first
/// treated unit when `unit` is not given).
DlmFit fit_dlm(const SeriesPanel& panel, const DlmOptions& options, std::optional<std::size_t> unit = std::nullopt);

}  // namespace datekit
