#include "doctest.h"

#include <boost/math/distributions/students_t.hpp>

#include "datekit/dgp.hpp"
#include "datekit/dlm.hpp"
#include "dense_gaussian.hpp"
#include "dlm_toy.hpp"
#include "support.hpp"

using namespace datekit;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void check_against_dense(const testing::Toy& toy) {
    const auto& m = toy.model;
    const int T = m.T();
    const auto filtered = forward_filter(toy.data, toy.spec);
    for (int t = 1; t <= T; ++t) {
        const auto prior = testing::state_given(m, T, t, t - 1, toy.y);
        const auto post = testing::state_given(m, T, t, t, toy.y);
        CHECK(testing::rel_err(filtered.at(t).a, prior.mean) < 1e-8);
        CHECK(testing::rel_err(filtered.at(t).R, prior.cov) < 1e-8);
        CHECK(testing::rel_err(filtered.at(t).m, post.mean) < 1e-8);
        CHECK(testing::rel_err(filtered.at(t).C, post.cov) < 1e-8);
    }
    CHECK(filtered.log_predictive == doctest::Approx(testing::log_marginal(m, toy.y)).epsilon(1e-8));

    const auto smoothed = smooth(filtered);
    const auto all = testing::states_given_all(m, toy.y);
    const int p = m.p();
    for (int t = 1; t <= T; ++t) {
        CHECK(testing::rel_err(smoothed.mean[t - 1], all.mean.segment(p * (t - 1), p)) < 1e-8);
        CHECK(testing::rel_err(smoothed.cov[t - 1], all.cov.block(p * (t - 1), p * (t - 1), p, p)) < 1e-8);
    }
}

DlmPosterior point_mass(int S, int T, const VectorXd& theta) {
    DlmPosterior post(S, T, int(theta.size()));
    post.G = MatrixXd::Identity(theta.size(), theta.size());
    post.evolution_factor.assign(T, MatrixXd::Zero(theta.size(), theta.size()));
    for (int s = 0; s < S; ++s)
        for (int t = 1; t <= T; ++t) {
            post.state(s, t) = theta;
            post.variance(s, t) = 1.0;
        }
    return post;
}

SeriesPanel toy_panel(int T, int t_c) {
    std::vector<double> path(T + 1);
    for (int t = 0; t <= T; ++t) path[t] = 0.1 + 0.01 * t;
    return testing::single(path, t_c);
}

DlmOptions quick_options(int draws, std::uint64_t seed) {
    DlmOptions o;
    o.draws = draws;
    o.seed = seed;
    return o;
}

}  // namespace

TEST_SUITE("dlm") {

TEST_CASE("filter and smoother equal the dense Gaussian conditionals") {
    for (int p : {1, 2})
        for (int T : {3, 4, 5}) {
            CAPTURE(p);
            CAPTURE(T);
            check_against_dense(testing::make_toy(T, p, 100 + 10 * p + T));
        }
}

TEST_CASE("discount evolution equals the implied dense model") {
    for (int p : {1, 2}) {
        testing::Toy toy = testing::make_toy(5, p, 7 + p);
        toy.spec.evolution_cov.reset();
        toy.spec.delta = 0.9;
        testing::fill_discount_evolution(toy.model, 0.9, toy.y);
        check_against_dense(toy);
    }
}

TEST_CASE("backward sampling moments match the dense smoother") {
    const testing::Toy toy = testing::make_toy(3, 2, 31);
    const auto filtered = forward_filter(toy.data, toy.spec);
    RandomStream rng(9, 0, 0, StreamRole::Test);
    const int S = 100000;
    const auto post = backward_sample(filtered, S, rng);
    const int n = 2 * 3;
    MatrixXd X(S, n);
    for (int s = 0; s < S; ++s)
        for (int t = 1; t <= 3; ++t) X.block(s, 2 * (t - 1), 1, 2) = post.state(s, t).transpose();
    const VectorXd mean = X.colwise().mean();
    const MatrixXd centered = X.rowwise() - mean.transpose();
    const MatrixXd cov = centered.transpose() * centered / double(S - 1);
    const auto all = testing::states_given_all(toy.model, toy.y);
    CHECK(testing::rel_err(mean, all.mean) < 0.01);
    CHECK(testing::rel_err(cov, all.cov) < 0.01);
}

TEST_CASE("sampling is deterministic under a fixed stream") {
    const testing::Toy toy = testing::make_toy(4, 2, 5);
    const auto filtered = forward_filter(toy.data, toy.spec);
    RandomStream a(3, 0, 0, StreamRole::Test), b(3, 0, 0, StreamRole::Test);
    const auto pa = backward_sample(filtered, 50, a);
    const auto pb = backward_sample(filtered, 50, b);
    for (int s = 0; s < 50; ++s)
        for (int t = 1; t <= 4; ++t) CHECK(pa.state(s, t) == pb.state(s, t));
}

TEST_CASE("static noiseless regression converges to least squares") {
    RandomStream rng(4, 0, 0, StreamRole::Test);
    const VectorXd truth{{0.7, -1.3, 2.0}};
    DlmData data;
    for (int t = 0; t < 30; ++t) {
        VectorXd F{{1.0, rng.normal(), rng.normal()}};
        data.F.push_back(F);
        data.y.push_back(F.dot(truth));
    }
    DlmSpec spec;
    spec.G = MatrixXd::Identity(3, 3);
    spec.m0 = VectorXd::Zero(3);
    spec.C0 = 100.0 * MatrixXd::Identity(3, 3);
    spec.delta = 1.0;
    spec.known_variance = std::vector<double>(30, 1e-12);
    const auto f = forward_filter(data, spec);
    CHECK(testing::rel_err(f.at(30).m, truth) < 1e-6);

    // Vanishing noise: every draw collapses on the filtered terminal mean.
    RandomStream draw_rng(1, 0, 0, StreamRole::Test);
    const auto post = backward_sample(f, 200, draw_rng);
    double worst = 0.0;
    for (int s = 0; s < 200; ++s)
        for (int t = 1; t <= 30; ++t) worst = std::max(worst, (post.state(s, t) - f.at(30).m).norm());
    CHECK(worst < 1e-4);
}

TEST_CASE("constant signal fixed point") {
    DlmData data;
    for (int t = 0; t < 300; ++t) {
        data.F.push_back(VectorXd::Ones(1));
        data.y.push_back(2.5);
    }
    DlmSpec spec;
    spec.G = MatrixXd::Identity(1, 1);
    spec.m0 = VectorXd::Zero(1);
    spec.C0 = MatrixXd::Identity(1, 1);
    spec.delta = 1.0;
    spec.beta_v = 1.0;
    const auto f = forward_filter(data, spec);
    CHECK(f.at(300).m[0] == doctest::Approx(2.5).epsilon(1e-3));
}

TEST_CASE("one-step predictive intervals are calibrated") {
    // Static model with the variance and state drawn from the conjugate prior.
    const double n0 = 20.0, s0 = 0.01;
    int covered = 0, total = 0;
    for (int series = 0; series < 200; ++series) {
        RandomStream rng(77, series, 0, StreamRole::Test);
        const double v = 1.0 / rng.gamma(0.5 * n0, 0.5 * n0 * s0);
        const VectorXd theta{{rng.normal(0.5, std::sqrt(v / s0)), rng.normal(-0.2, std::sqrt(v / s0))}};
        DlmData data;
        for (int t = 0; t < 50; ++t) {
            VectorXd F{{1.0, rng.normal()}};
            data.F.push_back(F);
            data.y.push_back(F.dot(theta) + rng.normal(0.0, std::sqrt(v)));
        }
        DlmSpec spec;
        spec.G = MatrixXd::Identity(2, 2);
        spec.m0 = VectorXd{{0.5, -0.2}};
        spec.C0 = MatrixXd::Identity(2, 2);
        spec.n0 = n0;
        spec.s0 = s0;
        spec.delta = 1.0;
        spec.beta_v = 1.0;
        const auto f = forward_filter(data, spec);
        for (int t = 1; t <= 50; ++t) {
            const auto& st = f.at(t);
            const double q = boost::math::quantile(boost::math::students_t(st.n_prior), 0.975);
            covered += std::abs(data.y[t - 1] - st.f) <= q * std::sqrt(st.q);
            ++total;
        }
    }
    REQUIRE(total == 10000);
    CHECK(std::abs(double(covered) / total - 0.95) <= 0.02);
}

TEST_CASE("non-finite data is a numerical breakdown") {
    DlmData data;
    data.F = {VectorXd::Ones(1), VectorXd::Ones(1)};
    data.y = {1.0, std::nan("")};
    DlmSpec spec;
    spec.G = MatrixXd::Identity(1, 1);
    spec.m0 = VectorXd::Zero(1);
    spec.C0 = MatrixXd::Identity(1, 1);
    try {
        forward_filter(data, spec);
        FAIL("expected NumericalBreakdown");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NumericalBreakdown);
    }
    spec.C0 = -MatrixXd::Identity(1, 1);
    CHECK_THROWS_AS(forward_filter(DlmData{{1.0}, {VectorXd::Ones(1)}}, spec), Error);
}

TEST_CASE("discount grid") {
    const auto grid = default_discount_grid();
    CHECK(grid.size() == 9u);
    for (double d : {0.95, 0.99, 0.999})
        for (double b : {0.95, 0.99, 0.999}) CHECK(std::count(grid.begin(), grid.end(), std::pair{d, b}) == 1);

    const auto rep = simulate_scenario(ScenarioConfig::standard(ScenarioKind::OneNone), 0);
    const auto& u = rep.panel.unit(0);
    const auto design = build_design(rep.panel, u);
    const std::span<const double> obs(u.path.data() + 1, u.path.size() - 1);
    CHECK(grid_search_discounts(obs, design, DlmSpec::standard(), {{0.99, 0.99}}) == std::pair{0.99, 0.99});
    CHECK_THROWS_AS(grid_search_discounts(obs, design, DlmSpec::standard(), {}), Error);
}

TEST_CASE("grid ties go to the larger discounts") {
    // Zero regressors make the forecast independent of the state discount.
    DlmData data;
    for (int t = 0; t < 20; ++t) {
        data.F.push_back(VectorXd::Zero(1));
        data.y.push_back(0.1 * std::sin(double(t)));
    }
    DlmSpec spec;
    spec.G = MatrixXd::Identity(1, 1);
    spec.m0 = VectorXd::Zero(1);
    spec.C0 = MatrixXd::Identity(1, 1);
    spec.known_variance = std::vector<double>(20, 0.5);
    const auto best = grid_search_discounts(data, spec, default_discount_grid());
    CHECK(best == std::pair{0.999, 0.999});
}

TEST_CASE("near-static data selects the largest state discount") {
    int chosen = 0;
    const VectorXd theta{{0.75, 0.5, 0.1, -0.01}};
    for (int r = 0; r < 200; ++r) {
        RandomStream rng(404, r, 0, StreamRole::Test);
        const int T = 72, t_c = 37;
        std::vector<double> path{0.5};
        const InterventionClock clock{t_c, true};
        for (int t = 1; t <= T; ++t) {
            const VectorXd F{{path.back(), clock.spot(t), clock.persistent(t), clock.trend(t)}};
            path.push_back(F.dot(theta) + rng.normal(0.0, 0.1));
        }
        const auto panel = testing::single(path, t_c);
        const auto design = build_design(panel, panel.unit(0));
        const std::span<const double> obs(path.data() + 1, T);
        chosen += grid_search_discounts(obs, design, DlmSpec::standard(), default_discount_grid()).first == 0.999;
    }
    CHECK(chosen >= 160);
}

TEST_CASE("zero intervention coefficients give a zero effect") {
    const auto panel = toy_panel(10, 5);
    const auto post = point_mass(20, 10, VectorXd{{0.9, 0.0, 0.0, 0.0}});
    for (auto mode : {ContrastMode::SmoothedStates, ContrastMode::SimulateForward}) {
        BranchOptions opt;
        opt.mode = mode;
        const auto d = branch_counterfactual(post, panel, 0, DlmSpec::standard(), opt);
        REQUIRE(d.size() == 6u);
        for (std::size_t h = 0; h < d.size(); ++h) {
            CHECK(d.estimate[h] == 0.0);
            CHECK((d.lower[h] <= 0.0 && 0.0 <= d.upper[h]));
        }
    }
}

TEST_CASE("a pure spot coefficient gives a one-period effect") {
    // Generate the series forward from known states, then branch on them.
    const double c = 0.37;
    const VectorXd theta{{0.0, c, 0.0, 0.0}};
    const int T = 12, t_c = 6;
    std::vector<double> path{0.2};
    const InterventionClock clock{t_c, true};
    for (int t = 1; t <= T; ++t)
        path.push_back(VectorXd{{path.back(), clock.spot(t), clock.persistent(t), clock.trend(t)}}.dot(theta));
    const auto panel = testing::single(path, t_c);
    const auto d = branch_counterfactual(point_mass(10, T, theta), panel, 0, DlmSpec::standard());
    CHECK(d.estimate[0] == doctest::Approx(c).epsilon(1e-14));
    for (std::size_t h = 1; h < d.size(); ++h) CHECK(d.estimate[h] == 0.0);
    CHECK(path[t_c] == doctest::Approx(c));
}

TEST_CASE("spot-only truth leaves other components at zero") {
    const auto panel = toy_panel(15, 7);
    const auto post = point_mass(10, 15, VectorXd{{0.8, 0.4, 0.0, 0.0}});
    const auto dec = decompose_effects(post, panel, 0, DlmSpec::standard());
    for (std::size_t h = 0; h < dec.spot.size(); ++h) {
        CHECK(dec.persistent.estimate[h] == 0.0);
        CHECK(dec.trend.estimate[h] == 0.0);
        CHECK(dec.spot.estimate[h] == doctest::Approx(0.4 * std::pow(0.8, double(h))));
    }
}

TEST_CASE("components sum to the total for every draw") {
    auto cfg = ScenarioConfig::standard(ScenarioKind::OneNone);
    const auto rep = simulate_scenario(cfg, 2);
    for (auto form : {ObservationForm::LagCoefficient, ObservationForm::Increment})
        for (auto mode : {ContrastMode::SimulateForward, ContrastMode::SmoothedStates}) {
            const auto spec = DlmSpec::standard(form);
            const auto& u = rep.panel.unit(0);
            const std::span<const double> obs(u.path.data() + 1, u.path.size() - 1);
            const auto filtered = forward_filter(obs, build_design(rep.panel, u), spec);
            RandomStream rng(1, 0, 0, StreamRole::Test);
            const auto post = backward_sample(filtered, 300, rng);
            BranchOptions opt;
            opt.mode = mode;
            opt.seed = 5;
            const auto b = branch_draws(post, rep.panel, 0, spec, opt);
            const double worst = (b.spot + b.persistent + b.trend - b.date).cwiseAbs().maxCoeff();
            CHECK(worst < 1e-8);
            CHECK((b.treated_path - b.control_path - b.date).cwiseAbs().maxCoeff() < 1e-8);
        }
}

TEST_CASE("fit is deterministic and reports components") {
    const auto rep = simulate_scenario(ScenarioConfig::standard(ScenarioKind::OneNone), 1);
    const auto a = fit_dlm(rep.panel, quick_options(500, 3));
    const auto b = fit_dlm(rep.panel, quick_options(500, 3));
    CHECK(a.date.estimate == b.date.estimate);
    CHECK(a.date.lower == b.date.lower);
    CHECK(a.discounts == b.discounts);
    REQUIRE(a.date.components.has_value());
    const auto& c = *a.date.components;
    for (std::size_t h = 0; h < a.date.size(); ++h) {
        CHECK(std::abs(c.spot[h] + c.persistent[h] + c.trend[h] - a.date.estimate[h]) < 1e-8);
        CHECK(a.date.lower[h] <= a.date.upper[h]);
    }
    CHECK(a.date.size() == rep.truth.size());
    const auto other = fit_dlm(rep.panel, quick_options(500, 4));
    CHECK(other.date.estimate != a.date.estimate);
}

TEST_CASE("single post-intervention horizon") {
    const auto rep = simulate_scenario(ScenarioConfig::standard(ScenarioKind::OneNone), 0);
    std::vector<double> path = rep.panel.unit(0).path;
    const auto panel = testing::single(path, rep.panel.horizon());
    const auto fit = fit_dlm(panel, quick_options(200, 1));
    CHECK(fit.date.size() == 1u);
}

TEST_CASE("control-only panels have no unit to branch") {
    const auto panel = testing::single(std::vector<double>(20, 0.1), 10, false);
    try {
        fit_dlm(panel, quick_options(10, 1));
        FAIL("expected WrongScenario");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::WrongScenario);
    }
}

TEST_CASE("posterior mean tracks the arch at theta = 0.8") {
    auto cfg = ScenarioConfig::standard(ScenarioKind::OneNone, 120);
    cfg.ar_coef = 0.8;
    const auto rep = simulate_scenario(cfg, 0);
    const auto fit = fit_dlm(rep.panel, quick_options(2000, 1));
    int inside = 0;
    for (std::size_t h = 0; h < fit.date.size(); ++h)
        inside += fit.date.lower[h] <= rep.truth.estimate[h] && rep.truth.estimate[h] <= fit.date.upper[h];
    CHECK(double(inside) / fit.date.size() >= 0.9);
}

}
