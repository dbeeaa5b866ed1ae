#include "doctest.h"

#include <nlohmann/json.hpp>

#include "datekit/core.hpp"
#include "support.hpp"

using namespace datekit;

TEST_SUITE("core") {

TEST_CASE("design rows for a treated unit") {
    SeriesPanel panel({{{1, 2, 3, 4, 5}, true}}, 2);
    const auto d = build_design(panel, panel.unit(0));
    CHECK(d.lagged_outcome == std::vector<double>{1, 2, 3, 4});
    CHECK(d.spot == std::vector<double>{0, 0, 1, 0});
    CHECK(d.persistent == std::vector<double>{0, 0, 1, 1});
    CHECK(d.trend == std::vector<double>{0, 0, 1, 2});
}

TEST_CASE("design rows for a control unit are zero") {
    SeriesPanel panel({{{1, 2, 3, 4, 5}, false}}, 2);
    const auto d = build_design(panel, panel.unit(0));
    CHECK(d.lagged_outcome == std::vector<double>{1, 2, 3, 4});
    for (const auto* row : {&d.spot, &d.persistent, &d.trend}) CHECK(*row == std::vector<double>(4, 0.0));
}

TEST_CASE("trend ramp is truncated to the row length") {
    SeriesPanel panel({{{0, 0, 0, 0}, true}}, 1);
    CHECK(build_design(panel, panel.unit(0)).trend == std::vector<double>{0, 1, 2});
}

TEST_CASE("design row invariants and purity") {
    SeriesPanel panel({{std::vector<double>(41, 0.3), true}}, 17);
    const auto a = build_design(panel, panel.unit(0));
    const auto b = build_design(panel, panel.unit(0));
    CHECK(a.lagged_outcome == b.lagged_outcome);
    CHECK(a.trend == b.trend);
    int nonzero = 0;
    for (int t = 0; t < a.horizon(); ++t) {
        nonzero += a.spot[t] != 0.0;
        CHECK(a.persistent[t] == (t >= 17 ? 1.0 : 0.0));
        CHECK(a.trend[t] == (t >= 17 ? double(t - 17 + 1) : 0.0));
    }
    CHECK(nonzero == 1);
    CHECK(a.spot[17] == 1.0);
    const auto r = a.regressors(40);
    CHECK(r[0] == 0.3);
    CHECK(r[3] == 24.0);
}

TEST_CASE("panel validation") {
    CHECK_THROWS_AS(SeriesPanel({}, 1), Error);
    CHECK_THROWS_AS(SeriesPanel({{{1, 2, 3}, true}, {{1, 2}, false}}, 1), Error);
    CHECK_THROWS_AS(SeriesPanel({{{1, 2, 3}, true}}, 0), Error);
    CHECK_THROWS_AS(SeriesPanel({{{1, 2, 3}, true}}, 3), Error);
    CHECK(SeriesPanel({{{1, 2, 3}, true}}, 2).n_horizons() == 1);
    try {
        SeriesPanel({{{1, std::nan(""), 3, 4}, true}}, 1);
        FAIL("expected a validation error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ValidationError);
        CHECK(std::string(e.what()).find("y_1") != std::string::npos);
    }
    SeriesPanel p({{{1, 2, 3, 4}, true}, {{1, 2, 3, 4}, false}, {{0, 0, 0, 0}, false}}, 2);
    CHECK(p.n_treated() == 1);
    CHECK(p.n_control() == 2);
    CHECK(p.n_horizons() == 2);
    CHECK(p.control_indices() == std::vector<std::size_t>{1, 2});
}

TEST_CASE("oracle at the theta = 0.8 parameters") {
    auto cfg = ScenarioConfig::standard(ScenarioKind::OneNone, 240);
    cfg.ar_coef = 0.8;
    const auto truth = true_date_oracle(cfg);
    REQUIRE(truth.size() == 240 - 121 + 1);
    CHECK(truth.estimate[0] == doctest::Approx(0.47).epsilon(1e-12));
    CHECK(truth.estimate.back() == doctest::Approx(-0.20).epsilon(1e-9));
    CHECK(truth.lower == truth.estimate);
    CHECK(truth.upper == truth.estimate);

    // Shape: positive, strictly decreasing, a single zero crossing.
    CHECK(truth.estimate[0] > 0.0);
    int crossings = 0;
    for (std::size_t h = 1; h < truth.size(); ++h) {
        CHECK(truth.estimate[h] < truth.estimate[h - 1]);
        crossings += (truth.estimate[h] < 0.0) != (truth.estimate[h - 1] < 0.0);
    }
    CHECK(crossings == 1);
}

TEST_CASE("oracle with equal drifts decays to zero") {
    auto cfg = ScenarioConfig::standard(ScenarioKind::OneNone, 240);
    cfg.b3 = cfg.b1;
    const auto truth = true_date_oracle(cfg);
    CHECK(truth.estimate[0] == doctest::Approx(cfg.b2 + cfg.b3));
    CHECK(std::abs(truth.estimate.back()) < 1e-5 * truth.estimate[0]);
    for (std::size_t h = 1; h < truth.size(); ++h)
        CHECK(truth.estimate[h] == doctest::Approx(cfg.ar_coef * truth.estimate[h - 1]).epsilon(1e-12));
}

TEST_CASE("oracle rejects a unit root") {
    auto cfg = ScenarioConfig::standard(ScenarioKind::OneNone);
    cfg.ar_coef = 1.0;
    CHECK_THROWS_AS(true_date_oracle(cfg), Error);
}

TEST_CASE("oracle from a non-stationary start") {
    auto cfg = ScenarioConfig::standard(ScenarioKind::OneNone, 72);
    cfg.y_0 = 0.05;
    // Independent recursion over both arms.
    double y1 = 0.05, y0 = 0.05;
    std::vector<double> expect;
    for (int t = 1; t <= cfg.horizon; ++t) {
        y0 = cfg.ar_coef * y0 + cfg.b1;
        if (t < cfg.t_c) y1 = cfg.ar_coef * y1 + cfg.b1;
        else if (t == cfg.t_c) y1 = y1 + cfg.b2 + cfg.b3;
        else y1 = cfg.ar_coef * y1 + cfg.b3;
        if (t >= cfg.t_c) expect.push_back(y1 - y0);
    }
    const auto truth = true_date_oracle(cfg);
    REQUIRE(truth.size() == expect.size());
    for (std::size_t h = 0; h < expect.size(); ++h) CHECK(truth.estimate[h] == doctest::Approx(expect[h]).epsilon(1e-12));
}

TEST_CASE("scenario defaults and validation") {
    auto mm = ScenarioConfig::standard(ScenarioKind::ManyMany);
    CHECK(mm.n_treated == 100);
    CHECK(mm.n_control == 100);
    CHECK(mm.t_c == 37);
    CHECK(ScenarioConfig::standard(ScenarioKind::OneMany).n_control == 100);
    CHECK(ScenarioConfig::standard(ScenarioKind::OneNone, 120).ar_coef == 0.8);
    CHECK(ScenarioConfig::standard(ScenarioKind::OneNone, 240).t_c == 121);
    CHECK_NOTHROW(mm.validate());

    auto bad = ScenarioConfig::standard(ScenarioKind::OneNone);
    bad.n_control = 1;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = ScenarioConfig::standard(ScenarioKind::OneNone);
    bad.vol_discount = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = ScenarioConfig::standard(ScenarioKind::OneNone);
    bad.t_c = bad.horizon;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = ScenarioConfig::standard(ScenarioKind::OneOne);
    bad.assignment = AssignmentMode::Confounded;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("scenario JSON round trip and unknown keys") {
    auto cfg = ScenarioConfig::standard(ScenarioKind::OneMany, 120);
    cfg.seed = 99;
    cfg.b2 = 0.7;
    const nlohmann::json j = cfg;
    const auto back = j.get<ScenarioConfig>();
    CHECK(back.kind == ScenarioKind::OneMany);
    CHECK(back.horizon == 120);
    CHECK(back.t_c == 61);
    CHECK(back.seed == 99);
    CHECK(back.b2 == 0.7);
    CHECK(back.initial_value() == cfg.initial_value());
    CHECK(nlohmann::json(back) == j);

    nlohmann::json extra = j;
    extra["unexpected"] = 1;
    try {
        extra.get<ScenarioConfig>();
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ParseError);
    }
    const auto from_kind = nlohmann::json{{"kind", "many-many"}}.get<ScenarioConfig>();
    CHECK(from_kind.n_treated == 100);
}

TEST_CASE("scenario kind names") {
    CHECK(parse_scenario_kind("One-None") == ScenarioKind::OneNone);
    CHECK(parse_scenario_kind("many_many") == ScenarioKind::ManyMany);
    CHECK(to_string(ScenarioKind::OneOne) == "one_one");
    CHECK_THROWS_AS(parse_scenario_kind("two_two"), Error);
}

TEST_CASE("gaussian date path bands") {
    const auto p = gaussian_date_path({1.0, 2.0}, {0.5, 0.0}, 0.95);
    CHECK(p.has_bounds());
    CHECK(p.lower[0] == doctest::Approx(1.0 - 1.959963984540054 * 0.5));
    CHECK(p.upper[1] == 2.0);
    CHECK(p.bands.size() == quantile_levels().size());
    for (std::size_t k = 1; k < p.bands.size(); ++k) CHECK(p.bands[k].upper[0] > p.bands[k - 1].upper[0]);
    for (std::size_t h = 0; h < p.size(); ++h) CHECK((p.lower[h] <= p.estimate[h] && p.estimate[h] <= p.upper[h]));
    CHECK(p.band(0.5) != nullptr);
    CHECK(p.band(0.51) == nullptr);
    CHECK_THROWS_AS(gaussian_date_path({1.0}, {}, 0.95), Error);
}

}
