#pragma once

#include <string>
#include <vector>

#include "datekit/core.hpp"

namespace datekit {

/// Pre-intervention summaries usable as propensity features.
enum class PropensityFeature {
    Intercept,
    LastOutcome,  // y_{t_c-1}
    PreMean,      // mean(y_0..y_{t_c-1})
    LastChange,   // y_{t_c-1} - y_{t_c-2}
};

using FeatureSpec = std::vector<PropensityFeature>;

FeatureSpec default_feature_spec();
std::string describe(const FeatureSpec& spec);

/// Feature row of one unit; every entry depends on data strictly before t_c.
std::vector<double> propensity_features(const SeriesPanel& panel, const UnitSeries& unit, const FeatureSpec& spec);

struct PropensityFit {
    std::vector<double> p;
    FeatureSpec feature_spec;
    std::vector<double> coefficients;
    std::vector<double> std_errors;
    int iterations = 0;

    /// Propensities supplied by design rather than estimated.
    static PropensityFit known(std::vector<double> p);
    /// p_i = n_treated / n for every unit.
    static PropensityFit design_based(const SeriesPanel& panel);
};

inline constexpr double kPropensityClip = 1e-6;

/// Logistic regression of Z on pre-intervention features by Newton iterations.
/// Throws SingleArm or PerfectSeparation.
PropensityFit fit_propensity(const SeriesPanel& panel, const FeatureSpec& spec = default_feature_spec());

struct DipwEstimate {
    std::vector<double> mu1;
    std::vector<double> mu0;
    std::vector<double> tau;
    std::vector<double> pointwise_se;
    bool stabilized = false;

    /// Normal-approximation intervals (estimate +- z * se) at `level`, plus
    /// the calibration bands.
    DatePath to_date_path(double level = 0.95) const;
};

/// Dynamic IPW means over t = t_c..T. Throws DegenerateWeights if a stabilized
/// denominator vanishes.
DipwEstimate dipw_estimate(const SeriesPanel& panel, const PropensityFit& prop, bool stabilized);

}  // namespace datekit
