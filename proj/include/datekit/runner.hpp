#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "datekit/baselines.hpp"
#include "datekit/core.hpp"
#include "datekit/dipw.hpp"
#include "datekit/dlm.hpp"
#include "datekit/eval.hpp"

namespace datekit {

/// Estimators reachable from the command line. `Mean` is the stabilized DIPW
/// estimator with design-based propensities (difference of arm means); `DIPW`
/// uses logistic propensities on pre-intervention features.
enum class Method { DIPW, Mean, DLM, LM, LMAR1, ARIMAX, ObservedY, SCM, DiD };

std::string to_string(Method m);
Method parse_method(const std::string& name);

/// Whether a method is defined for a scenario kind.
bool method_compatible(Method m, ScenarioKind kind);

enum class PropensitySource { Logistic, Known };

struct EstimateOptions {
    double level = 0.95;
    DlmOptions dlm;
    FeatureSpec features = default_feature_spec();
    /// DIPW weighting; the panel-mean method is always stabilized.
    bool stabilized = false;
    PropensitySource propensity = PropensitySource::Logistic;
    /// Known propensities; when absent `Known` means n_treated / n.
    std::optional<std::vector<double>> known_propensity;
};

struct MethodOutput {
    DatePath date;
    std::optional<DlmFit> dlm;
    std::optional<BaselineFit> baseline;
    std::optional<DipwEstimate> dipw;
};

MethodOutput estimate(const SeriesPanel& panel, Method method, const EstimateOptions& options = {});

// ---------------------------------------------------------------------------

struct RunOptions {
    std::filesystem::path out_dir;
    std::vector<Method> methods;
    /// Worker count; 0 uses DATEKIT_THREADS or the hardware concurrency.
    int threads = 0;
    EstimateOptions estimate;
    std::string command_line;
};

struct RunSummary {
    int replications = 0;
    int computed = 0;
    int resumed = 0;
    int failed_fits = 0;
    std::filesystem::path results_csv;
    std::filesystem::path manifest;
};

/// Monte Carlo run: simulate, estimate and score every replication. Each
/// replication is written to its own file with a checksum; re-running into the
/// same directory recomputes only missing or corrupt replications. The merged
/// `results.csv` is byte-identical for any worker count.
RunSummary run_scenario(const ScenarioConfig& cfg, const RunOptions& options);

/// Worker cap from DATEKIT_THREADS (if set) bounded by `requested`.
int resolve_threads(int requested);

/// The ReplicationResult rows for one simulated replication (exposed for tests).
std::vector<ReplicationResult> evaluate_replication(const ScenarioConfig& cfg, int rep, const std::vector<Method>& methods,
                                                    const EstimateOptions& options);

nlohmann::json build_manifest(const std::string& command_line, const nlohmann::json& config, std::uint64_t seed,
                              const std::filesystem::path& root, const std::vector<std::filesystem::path>& outputs,
                              const std::string& started);

// ---------------------------------------------------------------------------

struct PlaceboOptions {
    Method method = Method::DLM;
    int runs = 1;
    /// Minimum observations before (and after) a drawn placebo time.
    int margin = 10;
    std::uint64_t seed = 1;
    /// Fixed placebo index instead of a random draw.
    std::optional<int> placebo_tc;
    EstimateOptions estimate;
};

struct PlaceboRun {
    int placebo_tc = 0;
    DatePath date;
    /// Fraction of horizons whose interval contains 0.
    double zero_coverage = 0.0;
    double max_abs_estimate = 0.0;
};

struct PlaceboSummary {
    std::vector<PlaceboRun> runs;
    /// Per placebo horizon, fraction of runs whose interval contains 0 (over
    /// runs long enough to reach that horizon).
    std::vector<double> zero_fraction_per_horizon;
    double max_abs_estimate = 0.0;
    /// Fraction of runs with zero_coverage >= 0.9.
    double runs_passing = 0.0;
};

/// Re-estimates on the pre-intervention segment y_0..y_{t_c-1} with a placebo
/// intervention drawn uniformly from [margin, t_c - margin]. Throws
/// InsufficientPreHistory, InvalidArgument for a placebo at or after t_c, and
/// IncompatibleMethod for interval-free methods.
PlaceboSummary placebo_test(const SeriesPanel& panel, const PlaceboOptions& options);

/// The truncated panel used by one placebo run.
SeriesPanel placebo_panel(const SeriesPanel& panel, int placebo_tc);

}  // namespace datekit
