#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "datekit/core.hpp"
#include "datekit/rng.hpp"

namespace datekit {

/// Observation variances sigma^2_t for t = 1..T (sigma2[0] is sigma^2_1).
struct VolatilityPath {
    std::vector<double> sigma2;
};

struct SimulatedReplication {
    SeriesPanel panel;
    DatePath truth;
    std::uint64_t rep_seed = 0;
    /// Generating propensities; present only under confounded assignment.
    std::optional<std::vector<double>> true_propensity;
};

/// Beta-Gamma discount volatility: sigma^2_t = sigma^2_{t-1} * beta / eta_t with
/// eta_t ~ Beta(beta (t + T/2) / 2, (1 - beta)(t + T/2) / 2).
VolatilityPath simulate_volatility(const ScenarioConfig& cfg, RandomStream& rng);

/// One unit path from the AR(1) data-generating process with the intervention
/// applied at t_c when `treated` is set.
UnitSeries simulate_unit(const ScenarioConfig& cfg, bool treated, const VolatilityPath& vol, RandomStream& rng);

/// Replication `rep_index` of a scenario. Every unit owns volatility and noise
/// streams keyed by (cfg.seed, rep_index, unit index).
SimulatedReplication simulate_scenario(const ScenarioConfig& cfg, int rep_index);

}  // namespace datekit
