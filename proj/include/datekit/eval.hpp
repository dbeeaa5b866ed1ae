#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "datekit/core.hpp"

namespace datekit {

/// Mean over horizons of (estimate - truth)^2. Throws LengthMismatch.
double mse(const DatePath& estimate, const DatePath& truth);

/// Fraction of horizons with lower <= truth <= upper for the central interval
/// at `level`. Throws MissingBounds when no such interval is reported.
double coverage(const DatePath& estimate, const DatePath& truth, double level = 0.95);

/// Per-horizon coverage indicators (1 covered, 0 not).
std::vector<int> covered_flags(const DatePath& estimate, const DatePath& truth, double level = 0.95);

struct QuantileCoveragePoint {
    double nominal = 0.0;
    double coverage = 0.0;
    /// 95% binomial band for the empirical coverage, with the replication
    /// count as the effective sample size.
    double band_lower = 0.0;
    double band_upper = 0.0;
    long covered = 0;
    long total = 0;
};

/// Empirical coverage of the truth by central intervals at each nominal level,
/// pooled over horizons and replications. Level 0 means the point estimate.
std::vector<QuantileCoveragePoint> quantile_coverage_curve(std::span<const DatePath> replications,
                                                           const DatePath& truth,
                                                           const std::vector<double>& levels = quantile_levels());

/// Wilson score interval for a binomial proportion.
std::pair<double, double> binomial_band(double proportion, double n, double level = 0.95);

// ---------------------------------------------------------------------------
// Monte Carlo summary tables

/// One estimator's output on one replication.
struct ReplicationResult {
    ScenarioKind kind = ScenarioKind::OneNone;
    int horizon = 72;
    std::string method;
    int rep = 0;
    bool failed = false;
    std::string error;
    DatePath estimate;
    DatePath truth;
};

struct MetricCell {
    ScenarioKind kind = ScenarioKind::OneNone;
    int horizon = 72;
    std::string method;
    int n_reps = 0;
    int n_failed = 0;
    double mse_raw = 0.0;
    double mse_standardized = 0.0;
    /// Pooled over horizons and replications; absent for interval-free methods.
    std::optional<double> cp;
    /// Mean of per-replication coverage fractions.
    std::optional<double> cp_rep_mean;
    std::vector<double> cp_per_horizon;
    std::vector<double> mse_per_horizon;
    std::vector<QuantileCoveragePoint> quantile_coverage;

    double failure_rate() const noexcept { return n_reps > 0 ? double(n_failed) / n_reps : 0.0; }
};

struct CellKey {
    ScenarioKind kind = ScenarioKind::ManyMany;
    int horizon = 72;
    std::string method = "mean";

    auto operator<=>(const CellKey&) const = default;
};

struct MetricTable {
    CellKey reference;
    double reference_mse = 0.0;
    std::vector<MetricCell> cells;

    const MetricCell* find(const CellKey& key) const noexcept;

    void write_table_csv(std::ostream& os) const;
    void write_quantile_coverage_csv(std::ostream& os) const;
    void write_per_horizon_csv(std::ostream& os) const;
};

/// Aggregates replication results into cells (failed replications are counted
/// but excluded from metrics) and standardizes MSE by the reference cell.
/// Throws MissingReference when the reference cell has no successful replication.
MetricTable build_table(std::span<const ReplicationResult> results, const CellKey& reference = {});

}  // namespace datekit
