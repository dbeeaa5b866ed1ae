#include "datekit/dgp.hpp"

#include <cmath>
#include <limits>

namespace datekit {

VolatilityPath simulate_volatility(const ScenarioConfig& cfg, RandomStream& rng) {
    require(cfg.vol_discount > 0.0 && cfg.vol_discount < 1.0, "vol_discount must lie in (0, 1)");
    require(cfg.sigma2_0 > 0.0, "sigma2_0 must be positive");
    const double beta = cfg.vol_discount;
    const double half_T = 0.5 * cfg.horizon;

    VolatilityPath vol;
    vol.sigma2.reserve(cfg.horizon);
    double s2 = cfg.sigma2_0;
    for (int t = 1; t <= cfg.horizon; ++t) {
        const double a = beta * (t + half_T) / 2.0;
        const double b = (1.0 - beta) * (t + half_T) / 2.0;
        if (!(a > 0.0) || !(b > 0.0)) fail(ErrorKind::InvalidArgument, "non-positive Beta parameter");
        double eta = rng.beta(a, b);
        // Guard against an exact 0 from gamma underflow.
        if (eta <= 0.0) eta = std::numeric_limits<double>::min();
        s2 *= beta / eta;
        vol.sigma2.push_back(s2);
    }
    return vol;
}

namespace {

std::vector<double> draw_innovations(const VolatilityPath& vol, RandomStream& rng) {
    std::vector<double> eps(vol.sigma2.size() + 1, 0.0);
    for (std::size_t t = 1; t < eps.size(); ++t) {
        const double sd = std::sqrt(vol.sigma2[t - 1]);
        eps[t] = sd > 0.0 ? sd * rng.normal() : 0.0;
    }
    return eps;
}

// Runs the AR(1) recursion from `from` onward, overwriting path[from..T].
void run_recursion(const ScenarioConfig& cfg, bool treated, const std::vector<double>& eps, int from,
                   std::vector<double>& path) {
    const double theta = cfg.ar_coef;
    for (int t = from; t <= cfg.horizon; ++t) {
        const double prev = path[t - 1];
        double mean;
        if (t < cfg.t_c || !treated) mean = theta * prev + cfg.b1;
        else if (t == cfg.t_c) mean = prev + cfg.b2 + cfg.b3;
        else mean = theta * prev + cfg.b3;
        path[t] = mean + eps[t];
    }
}

}  // namespace

UnitSeries simulate_unit(const ScenarioConfig& cfg, bool treated, const VolatilityPath& vol, RandomStream& rng) {
    require(static_cast<int>(vol.sigma2.size()) == cfg.horizon, "volatility path does not match horizon");
    const auto eps = draw_innovations(vol, rng);
    UnitSeries u;
    u.treated = treated;
    u.path.resize(cfg.horizon + 1);
    u.path[0] = cfg.initial_value();
    run_recursion(cfg, treated, eps, 1, u.path);
    return u;
}

namespace {

// Pre-intervention stretch first, then Z ~ Bernoulli(logistic(a + slope * y_{t_c-1})),
// then the remainder of the path under the drawn arm with the same innovations.
UnitSeries simulate_confounded_unit(const ScenarioConfig& cfg, const VolatilityPath& vol, RandomStream& noise,
                                    RandomStream& assign, double& propensity) {
    const auto eps = draw_innovations(vol, noise);
    UnitSeries u;
    u.path.resize(cfg.horizon + 1);
    u.path[0] = cfg.initial_value();
    run_recursion(cfg, false, eps, 1, u.path);
    const double x = u.path[cfg.t_c - 1];
    propensity = 1.0 / (1.0 + std::exp(-(cfg.propensity_intercept + cfg.propensity_slope * x)));
    u.treated = assign.bernoulli(propensity);
    if (u.treated) run_recursion(cfg, true, eps, cfg.t_c, u.path);
    return u;
}

}  // namespace

SimulatedReplication simulate_scenario(const ScenarioConfig& cfg, int rep_index) {
    cfg.validate();
    require(rep_index >= 0, "replication index must be non-negative");
    const auto rep = static_cast<std::uint64_t>(rep_index);
    const int n = cfg.n_units();

    std::vector<UnitSeries> units;
    units.reserve(n);
    std::optional<std::vector<double>> propensity;
    if (cfg.assignment == AssignmentMode::Confounded) propensity.emplace(n);

    for (int i = 0; i < n; ++i) {
        const auto key = static_cast<std::uint64_t>(i);
        RandomStream vol_rng(cfg.seed, rep, key, StreamRole::Volatility);
        RandomStream noise_rng(cfg.seed, rep, key, StreamRole::Noise);
        const VolatilityPath vol = simulate_volatility(cfg, vol_rng);
        if (cfg.assignment == AssignmentMode::Confounded) {
            RandomStream assign_rng(cfg.seed, rep, key, StreamRole::Assignment);
            units.push_back(simulate_confounded_unit(cfg, vol, noise_rng, assign_rng, (*propensity)[i]));
        } else {
            units.push_back(simulate_unit(cfg, i < cfg.n_treated, vol, noise_rng));
        }
    }
    return SimulatedReplication{SeriesPanel(std::move(units), cfg.t_c), true_date_oracle(cfg),
                                stream_key(cfg.seed, rep, 0, StreamRole::Noise), std::move(propensity)};
}

}  // namespace datekit
