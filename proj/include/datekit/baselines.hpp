#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "datekit/core.hpp"

namespace datekit {

enum class BaselineMethod { LM, LMAR1, ARIMAX, ObservedY, SCM, DiD };

std::string to_string(BaselineMethod m);

struct BaselineFit {
    BaselineMethod method = BaselineMethod::LM;
    /// LM: (intercept, spot, persistent, trend); LM-AR(1): (intercept, lag,
    /// spot, persistent, trend); ARIMAX: (ar, ma, spot, persistent, trend);
    /// SCM: donor weights. Indicator coefficients absent from the data are 0.
    std::vector<double> coefficients;
    /// Aligned with `coefficients` for LM, LM-AR(1) and ARIMAX; empty otherwise.
    std::vector<double> std_errors;
    double residual_variance = 0.0;
    /// Set when the residual variance collapsed (e.g. a noiseless series).
    bool degenerate_variance = false;
    /// Treated-arm mean path regenerated from the coefficients, t = 0..T
    /// (empty for methods that do not model the path).
    std::vector<double> mean_path;
    DatePath date;
};

/// OLS of y_t (t = 1..T) of the first treated unit on intercept + spot +
/// persistent + trend. Bands cover Y_t(1) - Y_t(0): coefficient uncertainty plus
/// one residual variance per potential outcome. Throws RankDeficient.
BaselineFit fit_lm(const SeriesPanel& panel, double level = 0.95);

/// As fit_lm with y_{t-1} as an extra regressor; the mean path iterates the
/// fitted recursion.
BaselineFit fit_lm_ar1(const SeriesPanel& panel, double level = 0.95);

/// Regression with ARIMA(1,1,1) errors on the three indicators, fitted by
/// conditional sum of squares. Throws NonConvergence.
BaselineFit fit_arimax(const SeriesPanel& panel, double level = 0.95);

/// Observed treated series against the control mean (one_many), the control
/// (one_one) or the LM control path (one_none). Throws WrongScenario.
BaselineFit observed_y(const SeriesPanel& panel, double level = 0.95);

/// Synthetic control with in-space placebo intervals. Throws InfeasibleFit.
BaselineFit fit_scm(const SeriesPanel& panel, double level = 0.95);

/// Difference-in-differences for one treated and one control unit.
BaselineFit fit_did(const SeriesPanel& panel);

struct SimplexFit {
    Eigen::VectorXd weights;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
};

/// min ||target - donors * w||^2 subject to w >= 0, sum(w) = 1 (active set).
SimplexFit simplex_least_squares(const Eigen::MatrixXd& donors, const Eigen::VectorXd& target);

struct ArimaxControl {
    int max_iterations = 500;
    double gradient_tolerance = 1e-8;
};

BaselineFit fit_arimax(const SeriesPanel& panel, const ArimaxControl& control, double level = 0.95);

}  // namespace datekit
