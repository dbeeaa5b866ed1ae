#include "doctest.h"

#include <sstream>

#include "datekit/eval.hpp"
#include "datekit/rng.hpp"
#include "support.hpp"

using namespace datekit;

namespace {

DatePath with_bounds(std::vector<double> est, std::vector<double> lo, std::vector<double> hi) {
    DatePath p = DatePath::point(std::move(est));
    p.lower = std::move(lo);
    p.upper = std::move(hi);
    return p;
}

ReplicationResult result(ScenarioKind kind, int T, std::string method, int rep, std::vector<double> est,
                         std::vector<double> truth) {
    ReplicationResult r;
    r.kind = kind;
    r.horizon = T;
    r.method = std::move(method);
    r.rep = rep;
    r.estimate = DatePath::point(std::move(est));
    r.truth = DatePath::point(std::move(truth));
    return r;
}

// Gaussian toy: estimate ~ N(truth, 1) with central intervals scaled by `width`.
std::vector<DatePath> gaussian_toy(int reps, int H, double width, std::uint64_t seed) {
    std::vector<DatePath> out;
    for (int r = 0; r < reps; ++r) {
        RandomStream rng(seed, r, 0, StreamRole::Test);
        std::vector<double> est(H), se(H, width);
        for (double& e : est) e = rng.normal();
        out.push_back(gaussian_date_path(est, se));
    }
    return out;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("mse examples") {
    const auto truth = DatePath::point({1.0, 2.0});
    CHECK(mse(truth, truth) == 0.0);
    CHECK(mse(DatePath::point({1.5, 2.5}), truth) == doctest::Approx(0.25));
    CHECK(mse(DatePath::point({2.0, 5.0}), truth) == doctest::Approx(5.0));
    CHECK_THROWS_AS(mse(DatePath::point({1.0}), truth), Error);
}

TEST_CASE("mse is non-negative and zero only on equality") {
    RandomStream rng(1, 0, 0, StreamRole::Test);
    for (int k = 0; k < 100; ++k) {
        std::vector<double> a(5), b(5);
        for (int h = 0; h < 5; ++h) {
            a[h] = rng.normal();
            b[h] = k % 2 ? a[h] : rng.normal();
        }
        const double m = mse(DatePath::point(a), DatePath::point(b));
        CHECK(m >= 0.0);
        CHECK((m == 0.0) == (a == b));
    }
}

TEST_CASE("coverage examples") {
    const auto truth = DatePath::point({0.5, 2.0});
    CHECK(coverage(with_bounds({0.5, 0.5}, {0, 0}, {1, 1}), truth) == 0.5);
    CHECK(coverage(with_bounds({0.5, 2.0}, {0.5, 2.0}, {0.5, 2.0}), truth) == 1.0);
    CHECK(coverage(with_bounds({0.5, 2.0}, {0.5, 1.0}, {0.7, 2.0}), truth) == 1.0);
    try {
        coverage(DatePath::point({0.5, 2.0}), truth);
        FAIL("expected MissingBounds");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingBounds);
    }
    CHECK(covered_flags(with_bounds({0.5, 0.5}, {0, 0}, {1, 1}), truth) == std::vector<int>{1, 0});
}

TEST_CASE("coverage is monotone in the nominal level") {
    const auto reps = gaussian_toy(50, 10, 1.0, 4);
    const auto truth = DatePath::point(std::vector<double>(10, 0.0));
    for (const auto& r : reps) {
        double prev = 0.0;
        for (double q : quantile_levels()) {
            const double c = coverage(r, truth, q);
            CHECK(c >= prev);
            CHECK((c >= 0.0 && c <= 1.0));
            prev = c;
        }
    }
}

TEST_CASE("calibrated Gaussian toy lies on the diagonal") {
    const auto reps = gaussian_toy(400, 10, 1.0, 7);
    const auto truth = DatePath::point(std::vector<double>(10, 0.0));
    for (const auto& pt : quantile_coverage_curve(reps, truth)) {
        CHECK(pt.total == 4000);
        CHECK(pt.band_lower <= pt.coverage);
        CHECK(pt.coverage <= pt.band_upper);
        CHECK((pt.band_lower <= pt.nominal && pt.nominal <= pt.band_upper));
    }
}

TEST_CASE("overdispersed intervals sit above the diagonal") {
    const auto reps = gaussian_toy(400, 10, 2.0, 8);
    const auto truth = DatePath::point(std::vector<double>(10, 0.0));
    for (const auto& pt : quantile_coverage_curve(reps, truth)) CHECK(pt.coverage > pt.nominal);
}

TEST_CASE("zero level covers nothing") {
    const auto reps = gaussian_toy(20, 5, 1.0, 9);
    const auto truth = DatePath::point(std::vector<double>(5, 0.0));
    const auto curve = quantile_coverage_curve(reps, truth, {0.0});
    CHECK(curve[0].coverage == 0.0);
}

TEST_CASE("wilson band") {
    const auto [lo, hi] = binomial_band(0.5, 100.0);
    CHECK(lo == doctest::Approx(0.4038).epsilon(1e-3));
    CHECK(hi == doctest::Approx(0.5962).epsilon(1e-3));
    const auto [lo0, hi0] = binomial_band(0.0, 50.0);
    CHECK(lo0 == 0.0);
    CHECK(hi0 > 0.0);
}

TEST_CASE("table standardization") {
    std::vector<ReplicationResult> rows;
    for (int r = 0; r < 3; ++r) {
        rows.push_back(result(ScenarioKind::ManyMany, 72, "mean", r, {1.0 + r, 0.0}, {0.0, 0.0}));
        rows.push_back(result(ScenarioKind::ManyMany, 72, "dipw", r, {1.0 + r, 0.0}, {0.0, 0.0}));
        rows.push_back(result(ScenarioKind::OneNone, 72, "lm", r, {0.0, 0.0}, {0.0, 0.0}));
    }
    auto failed = result(ScenarioKind::OneNone, 72, "arimax", 0, {}, {0.0, 0.0});
    failed.failed = true;
    failed.error = "NonConvergence: test";
    rows.push_back(failed);
    rows.push_back(result(ScenarioKind::OneNone, 72, "arimax", 1, {3.0, 3.0}, {0.0, 0.0}));

    const auto table = build_table(rows);
    CHECK(table.find({ScenarioKind::ManyMany, 72, "mean"})->mse_standardized == doctest::Approx(1.0));
    CHECK(table.find({ScenarioKind::ManyMany, 72, "dipw"})->mse_standardized == doctest::Approx(1.0));
    CHECK(table.find({ScenarioKind::OneNone, 72, "lm"})->mse_standardized == 0.0);
    const auto* ar = table.find({ScenarioKind::OneNone, 72, "arimax"});
    CHECK(ar->n_reps == 2);
    CHECK(ar->n_failed == 1);
    CHECK(ar->failure_rate() == 0.5);
    CHECK(ar->mse_raw == doctest::Approx(9.0));
    CHECK_FALSE(ar->cp.has_value());

    // Scaling every raw error leaves standardized values unchanged.
    auto scaled = rows;
    for (auto& r : scaled)
        for (double& e : r.estimate.estimate) e *= 10.0;
    const auto t2 = build_table(scaled);
    for (const auto& c : table.cells)
        CHECK(t2.find({c.kind, c.horizon, c.method})->mse_standardized == doctest::Approx(c.mse_standardized));

    std::ostringstream os;
    table.write_table_csv(os);
    CHECK(os.str().rfind("scenario,T,method,n_reps,n_failed,failure_rate,mse_raw,mse_standardized,cp_95,cp_95_rep_mean\n", 0) == 0);
}

TEST_CASE("missing reference") {
    std::vector<ReplicationResult> rows{result(ScenarioKind::OneNone, 72, "lm", 0, {0.0}, {0.0})};
    try {
        build_table(rows);
        FAIL("expected MissingReference");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingReference);
    }
    CHECK_NOTHROW(build_table(rows, {ScenarioKind::OneNone, 72, "lm"}));
}

TEST_CASE("pooled and per-replication coverage") {
    std::vector<ReplicationResult> rows;
    auto a = result(ScenarioKind::ManyMany, 72, "mean", 0, {0.0, 0.0}, {0.0, 0.0});
    a.estimate = with_bounds({0.0, 0.0}, {-1, -1}, {1, 1});
    auto b = result(ScenarioKind::ManyMany, 72, "mean", 1, {0.0, 0.0}, {0.0, 5.0});
    b.estimate = with_bounds({0.0, 0.0}, {-1, -1}, {1, 1});
    rows = {a, b};
    const auto table = build_table(rows);
    const auto& cell = *table.find({});
    CHECK(*cell.cp == doctest::Approx(0.75));
    CHECK(*cell.cp_rep_mean == doctest::Approx(0.75));
    CHECK(cell.cp_per_horizon == std::vector<double>{1.0, 0.5});
    CHECK(cell.mse_per_horizon[1] == doctest::Approx(12.5));
}

}
