#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "datekit/error.hpp"

namespace datekit {

// ---------------------------------------------------------------------------
// Panels

struct UnitSeries {
    std::vector<double> path;  // y_0 .. y_T
    bool treated = false;
};

/// A set of unit trajectories sharing a horizon T and intervention index t_c.
/// Index t_c is the first observation at which treatment applies.
class SeriesPanel {
public:
    SeriesPanel(std::vector<UnitSeries> units, int t_c);

    int horizon() const noexcept { return horizon_; }
    int t_c() const noexcept { return t_c_; }
    std::span<const UnitSeries> units() const noexcept { return units_; }
    const UnitSeries& unit(std::size_t i) const { return units_.at(i); }
    std::size_t size() const noexcept { return units_.size(); }

    int n_treated() const noexcept;
    int n_control() const noexcept { return static_cast<int>(units_.size()) - n_treated(); }
    std::vector<std::size_t> treated_indices() const;
    std::vector<std::size_t> control_indices() const;

    /// Number of post-intervention horizons, T - t_c + 1.
    int n_horizons() const noexcept { return horizon_ - t_c_ + 1; }

private:
    std::vector<UnitSeries> units_;
    int t_c_;
    int horizon_;
};

// ---------------------------------------------------------------------------
// Intervention design

/// Indicator functions of the intervention at time index t.
struct InterventionClock {
    int t_c = 0;
    bool treated = false;

    double spot(int t) const noexcept { return treated && t == t_c ? 1.0 : 0.0; }
    double persistent(int t) const noexcept { return treated && t >= t_c ? 1.0 : 0.0; }
    double trend(int t) const noexcept { return treated && t >= t_c ? double(t - t_c + 1) : 0.0; }
};

/// The four-row intervention design. Each row has T entries; the lagged row
/// holds y_0..y_{T-1} and the indicator rows are evaluated at time 0..T-1.
struct InterventionDesign {
    std::vector<double> lagged_outcome;
    std::vector<double> spot;
    std::vector<double> persistent;
    std::vector<double> trend;
    InterventionClock clock;

    int horizon() const noexcept { return static_cast<int>(lagged_outcome.size()); }

    /// Regressors for observation y_t, t in [1, T]: (y_{t-1}, spot_t, persistent_t, trend_t).
    std::array<double, 4> regressors(int t) const;
};

InterventionDesign build_design(const SeriesPanel& panel, const UnitSeries& unit);

// ---------------------------------------------------------------------------
// Effect paths

struct Band {
    double level = 0.95;
    std::vector<double> lower;
    std::vector<double> upper;
};

struct ComponentPaths {
    std::vector<double> spot;
    std::vector<double> persistent;
    std::vector<double> trend;
};

/// Time-indexed effect estimate for h = 0..T - t_c. Bounds are empty for
/// methods that report no interval.
struct DatePath {
    std::vector<int> horizon_index;
    std::vector<double> estimate;
    std::vector<double> lower;
    std::vector<double> upper;
    double level = 0.95;
    /// Central intervals at additional nominal levels (for calibration curves).
    std::vector<Band> bands;
    std::optional<ComponentPaths> components;

    std::size_t size() const noexcept { return estimate.size(); }
    bool has_bounds() const noexcept { return !lower.empty(); }

    /// Central band at `level`, or nullptr.
    const Band* band(double level) const noexcept;

    static DatePath point(std::vector<double> estimate);
};

/// The nominal levels 0.05, 0.10, ..., 0.95 used by calibration curves.
std::vector<double> quantile_levels();

/// Two-sided standard normal quantile for a central interval at `level`.
double normal_central_z(double level);

/// estimate +- z * se at `level`, plus bands at every calibration level.
DatePath gaussian_date_path(std::vector<double> estimate, const std::vector<double>& se, double level = 0.95);

// ---------------------------------------------------------------------------
// Scenario configuration

enum class ScenarioKind { ManyMany, OneMany, OneOne, OneNone };

std::string to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(const std::string& s);

enum class AssignmentMode { ByConstruction, Confounded };

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::OneNone;
    int horizon = 72;
    int t_c = 37;
    double ar_coef = 0.75;
    double b1 = 0.01;
    double b2 = 0.5;
    double b3 = -0.03;
    double vol_discount = 0.95;
    double sigma2_0 = 0.01;
    /// Initial value; defaults to the stationary mean b1 / (1 - ar_coef).
    std::optional<double> y_0;
    int n_treated = 1;
    int n_control = 0;
    int replications = 1000;
    std::uint64_t seed = 1;
    /// Confounded assignment draws Z ~ Bernoulli(logistic(a + slope * y_{t_c-1})).
    AssignmentMode assignment = AssignmentMode::ByConstruction;
    double propensity_intercept = 0.0;
    double propensity_slope = 2.0;

    double initial_value() const noexcept { return y_0.value_or(b1 / (1.0 - ar_coef)); }
    int n_units() const noexcept { return n_treated + n_control; }
    void validate() const;

    /// Simulation-study defaults for a scenario kind and horizon (72, 120 or 240).
    static ScenarioConfig standard(ScenarioKind kind, int horizon = 72);
};

void to_json(nlohmann::json& j, const ScenarioConfig& cfg);
void from_json(const nlohmann::json& j, ScenarioConfig& cfg);

/// Exact population DATE implied by the configuration's mean recursions.
DatePath true_date_oracle(const ScenarioConfig& cfg);

}  // namespace datekit
