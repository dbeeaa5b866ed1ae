#include "datekit/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

namespace datekit {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::PerfectSeparation: return "PerfectSeparation";
        case ErrorKind::SingleArm: return "SingleArm";
        case ErrorKind::DegenerateWeights: return "DegenerateWeights";
        case ErrorKind::NumericalBreakdown: return "NumericalBreakdown";
        case ErrorKind::RankDeficient: return "RankDeficient";
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::WrongScenario: return "WrongScenario";
        case ErrorKind::InfeasibleFit: return "InfeasibleFit";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::MissingBounds: return "MissingBounds";
        case ErrorKind::MissingReference: return "MissingReference";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::ValidationError: return "ValidationError";
        case ErrorKind::InsufficientPreHistory: return "InsufficientPreHistory";
        case ErrorKind::IncompatibleMethod: return "IncompatibleMethod";
    }
    return "Unknown";
}

// ---------------------------------------------------------------------------

SeriesPanel::SeriesPanel(std::vector<UnitSeries> units, int t_c) : units_(std::move(units)), t_c_(t_c) {
    if (units_.empty()) fail(ErrorKind::ValidationError, "panel has no units");
    const std::size_t len = units_.front().path.size();
    if (len < 3) fail(ErrorKind::ValidationError, "unit paths need at least 3 observations");
    horizon_ = static_cast<int>(len) - 1;
    if (t_c_ <= 0 || t_c_ > horizon_)
        fail(ErrorKind::ValidationError,
             "intervention index " + std::to_string(t_c_) + " must lie in (0, " + std::to_string(horizon_) + "]");
    for (std::size_t i = 0; i < units_.size(); ++i) {
        const auto& p = units_[i].path;
        if (p.size() != len)
            fail(ErrorKind::ValidationError, "unit " + std::to_string(i) + " has " + std::to_string(p.size()) +
                                                 " values, expected " + std::to_string(len));
        for (std::size_t t = 0; t < p.size(); ++t)
            if (!std::isfinite(p[t]))
                fail(ErrorKind::ValidationError,
                     "unit " + std::to_string(i) + " has a non-finite value at y_" + std::to_string(t));
    }
}

int SeriesPanel::n_treated() const noexcept {
    return static_cast<int>(std::count_if(units_.begin(), units_.end(), [](const UnitSeries& u) { return u.treated; }));
}

std::vector<std::size_t> SeriesPanel::treated_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < units_.size(); ++i)
        if (units_[i].treated) out.push_back(i);
    return out;
}

std::vector<std::size_t> SeriesPanel::control_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < units_.size(); ++i)
        if (!units_[i].treated) out.push_back(i);
    return out;
}

// ---------------------------------------------------------------------------

std::array<double, 4> InterventionDesign::regressors(int t) const {
    require(t >= 1 && t <= horizon(), "regressor index out of range");
    // The indicator rows stop at T-1; the clock continues the ramp to T.
    return {lagged_outcome[t - 1], clock.spot(t), clock.persistent(t), clock.trend(t)};
}

InterventionDesign build_design(const SeriesPanel& panel, const UnitSeries& unit) {
    const int T = panel.horizon();
    require(static_cast<int>(unit.path.size()) == T + 1, "unit path does not match panel horizon");
    InterventionDesign d;
    d.clock = InterventionClock{panel.t_c(), unit.treated};
    d.lagged_outcome.assign(unit.path.begin(), unit.path.end() - 1);
    d.spot.resize(T);
    d.persistent.resize(T);
    d.trend.resize(T);
    for (int t = 0; t < T; ++t) {
        d.spot[t] = d.clock.spot(t);
        d.persistent[t] = d.clock.persistent(t);
        d.trend[t] = d.clock.trend(t);
    }
    return d;
}

// ---------------------------------------------------------------------------

const Band* DatePath::band(double lvl) const noexcept {
    for (const auto& b : bands)
        if (std::abs(b.level - lvl) < 1e-9) return &b;
    return nullptr;
}

DatePath DatePath::point(std::vector<double> estimate) {
    DatePath p;
    p.horizon_index.resize(estimate.size());
    for (std::size_t h = 0; h < estimate.size(); ++h) p.horizon_index[h] = static_cast<int>(h);
    p.estimate = std::move(estimate);
    return p;
}

std::vector<double> quantile_levels() {
    std::vector<double> q;
    for (int k = 1; k <= 19; ++k) q.push_back(0.05 * k);
    return q;
}

double normal_central_z(double level) {
    require(level > 0.0 && level < 1.0, "interval level must lie in (0, 1)");
    static const boost::math::normal_distribution<double> std_normal;
    return boost::math::quantile(std_normal, 0.5 + 0.5 * level);
}

DatePath gaussian_date_path(std::vector<double> estimate, const std::vector<double>& se, double level) {
    if (se.size() != estimate.size()) fail(ErrorKind::LengthMismatch, "standard errors are not aligned");
    auto make = [&](double lvl) {
        const double z = normal_central_z(lvl);
        Band b{lvl, {}, {}};
        for (std::size_t h = 0; h < estimate.size(); ++h) {
            b.lower.push_back(estimate[h] - z * se[h]);
            b.upper.push_back(estimate[h] + z * se[h]);
        }
        return b;
    };
    Band main = make(level);
    std::vector<Band> bands;
    for (double q : quantile_levels()) bands.push_back(make(q));
    DatePath path = DatePath::point(std::move(estimate));
    path.level = level;
    path.lower = std::move(main.lower);
    path.upper = std::move(main.upper);
    path.bands = std::move(bands);
    return path;
}

// ---------------------------------------------------------------------------

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::ManyMany: return "many_many";
        case ScenarioKind::OneMany: return "one_many";
        case ScenarioKind::OneOne: return "one_one";
        case ScenarioKind::OneNone: return "one_none";
    }
    return "unknown";
}

ScenarioKind parse_scenario_kind(const std::string& s) {
    std::string k;
    for (char c : s) {
        if (c == '-') c = '_';
        k.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (k == "many_many" || k == "manymany") return ScenarioKind::ManyMany;
    if (k == "one_many" || k == "onemany") return ScenarioKind::OneMany;
    if (k == "one_one" || k == "oneone") return ScenarioKind::OneOne;
    if (k == "one_none" || k == "onenone") return ScenarioKind::OneNone;
    fail(ErrorKind::InvalidArgument, "unknown scenario kind '" + s + "'");
}

void ScenarioConfig::validate() const {
    require(horizon >= 3, "horizon must be at least 3");
    require(t_c > 0 && t_c < horizon, "t_c must lie in (0, horizon)");
    require(std::abs(ar_coef) < 1.0, "ar_coef must satisfy |theta| < 1");
    require(vol_discount > 0.0 && vol_discount < 1.0, "vol_discount must lie in (0, 1)");
    require(sigma2_0 > 0.0, "sigma2_0 must be positive");
    require(replications >= 1, "replications must be positive");
    require(std::isfinite(b1) && std::isfinite(b2) && std::isfinite(b3), "effects must be finite");
    if (y_0) require(std::isfinite(*y_0), "y_0 must be finite");
    require(n_treated >= 0 && n_control >= 0, "unit counts must be non-negative");
    if (assignment == AssignmentMode::Confounded) {
        require(kind == ScenarioKind::ManyMany, "confounded assignment requires many_many");
        require(n_units() >= 2, "confounded assignment needs at least two units");
        return;
    }
    switch (kind) {
        case ScenarioKind::ManyMany:
            require(n_treated >= 2 && n_control >= 2, "many_many needs at least two units per arm");
            break;
        case ScenarioKind::OneMany:
            require(n_treated == 1 && n_control >= 2, "one_many needs one treated and at least two controls");
            break;
        case ScenarioKind::OneOne:
            require(n_treated == 1 && n_control == 1, "one_one needs one treated and one control");
            break;
        case ScenarioKind::OneNone:
            require(n_treated == 1 && n_control == 0, "one_none needs one treated and no control");
            break;
    }
}

ScenarioConfig ScenarioConfig::standard(ScenarioKind kind, int horizon) {
    ScenarioConfig c;
    c.kind = kind;
    c.horizon = horizon;
    switch (horizon) {
        case 72: c.t_c = 37; c.ar_coef = 0.75; break;
        case 120: c.t_c = 61; c.ar_coef = 0.8; break;
        case 240: c.t_c = 121; c.ar_coef = 0.9; break;
        default: c.t_c = horizon / 2 + 1; c.ar_coef = 0.8; break;
    }
    switch (kind) {
        case ScenarioKind::ManyMany: c.n_treated = 100; c.n_control = 100; break;
        case ScenarioKind::OneMany: c.n_treated = 1; c.n_control = 100; break;
        case ScenarioKind::OneOne: c.n_treated = 1; c.n_control = 1; break;
        case ScenarioKind::OneNone: c.n_treated = 1; c.n_control = 0; break;
    }
    return c;
}

void to_json(nlohmann::json& j, const ScenarioConfig& c) {
    j = nlohmann::json{
        {"kind", to_string(c.kind)},
        {"horizon", c.horizon},
        {"t_c", c.t_c},
        {"ar_coef", c.ar_coef},
        {"b1", c.b1},
        {"b2", c.b2},
        {"b3", c.b3},
        {"vol_discount", c.vol_discount},
        {"sigma2_0", c.sigma2_0},
        {"y_0", c.initial_value()},
        {"n_treated", c.n_treated},
        {"n_control", c.n_control},
        {"replications", c.replications},
        {"seed", c.seed},
        {"assignment", c.assignment == AssignmentMode::Confounded ? "confounded" : "by_construction"},
        {"propensity_intercept", c.propensity_intercept},
        {"propensity_slope", c.propensity_slope},
    };
}

void from_json(const nlohmann::json& j, ScenarioConfig& c) {
    if (!j.is_object()) fail(ErrorKind::ParseError, "scenario config must be a JSON object");
    static const std::set<std::string> known = {
        "kind", "horizon", "t_c", "ar_coef", "b1", "b2", "b3", "vol_discount", "sigma2_0", "y_0",
        "n_treated", "n_control", "replications", "seed", "assignment", "propensity_intercept", "propensity_slope"};
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) fail(ErrorKind::ParseError, "unknown config key '" + key + "'");

    try {
        // A kind (and horizon) first establishes the standard defaults.
        if (j.contains("kind")) {
            const int horizon = j.value("horizon", 72);
            c = ScenarioConfig::standard(parse_scenario_kind(j.at("kind").get<std::string>()), horizon);
        }
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) j.at(key).get_to(field);
        };
        get("horizon", c.horizon);
        get("t_c", c.t_c);
        get("ar_coef", c.ar_coef);
        get("b1", c.b1);
        get("b2", c.b2);
        get("b3", c.b3);
        get("vol_discount", c.vol_discount);
        get("sigma2_0", c.sigma2_0);
        if (j.contains("y_0") && !j.at("y_0").is_null()) c.y_0 = j.at("y_0").get<double>();
        get("n_treated", c.n_treated);
        get("n_control", c.n_control);
        get("replications", c.replications);
        get("seed", c.seed);
        if (j.contains("assignment")) {
            const auto a = j.at("assignment").get<std::string>();
            if (a == "confounded") c.assignment = AssignmentMode::Confounded;
            else if (a == "by_construction") c.assignment = AssignmentMode::ByConstruction;
            else fail(ErrorKind::ParseError, "unknown assignment mode '" + a + "'");
        }
        get("propensity_intercept", c.propensity_intercept);
        get("propensity_slope", c.propensity_slope);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, e.what());
    }
}

// ---------------------------------------------------------------------------

DatePath true_date_oracle(const ScenarioConfig& cfg) {
    require(std::abs(cfg.ar_coef) < 1.0, "oracle requires |theta| < 1");
    require(cfg.t_c > 0 && cfg.t_c < cfg.horizon, "oracle requires 0 < t_c < T");
    const double theta = cfg.ar_coef;

    // Both arms share the pre-intervention mean recursion.
    double pre = cfg.initial_value();
    for (int t = 1; t < cfg.t_c; ++t) pre = theta * pre + cfg.b1;

    double m1 = pre + cfg.b2 + cfg.b3;
    double m0 = theta * pre + cfg.b1;
    std::vector<double> date;
    date.reserve(cfg.horizon - cfg.t_c + 1);
    date.push_back(m1 - m0);
    for (int t = cfg.t_c + 1; t <= cfg.horizon; ++t) {
        m1 = theta * m1 + cfg.b3;
        m0 = theta * m0 + cfg.b1;
        date.push_back(m1 - m0);
    }
    DatePath path = DatePath::point(std::move(date));
    path.lower = path.estimate;
    path.upper = path.estimate;
    return path;
}

}  // namespace datekit
