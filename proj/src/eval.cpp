#include "datekit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace datekit {

namespace {

void check_aligned(const DatePath& estimate, const DatePath& truth) {
    if (estimate.size() != truth.size())
        fail(ErrorKind::LengthMismatch, "estimate has " + std::to_string(estimate.size()) + " horizons, truth has " +
                                            std::to_string(truth.size()));
}

// Lower/upper vectors of the central interval at `level`, or nullopt.
struct Interval {
    const std::vector<double>* lower;
    const std::vector<double>* upper;
};

std::optional<Interval> interval_at(const DatePath& p, double level) {
    if (p.has_bounds() && std::abs(p.level - level) < 1e-9) return Interval{&p.lower, &p.upper};
    if (const Band* b = p.band(level)) return Interval{&b->lower, &b->upper};
    return std::nullopt;
}

Interval require_interval(const DatePath& p, double level) {
    auto iv = interval_at(p, level);
    if (!iv) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.2f", level);
        fail(ErrorKind::MissingBounds, std::string("no interval reported at level ") + buf);
    }
    if (iv->lower->size() != p.size() || iv->upper->size() != p.size())
        fail(ErrorKind::LengthMismatch, "interval is not aligned with the estimate");
    return *iv;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

double mse(const DatePath& estimate, const DatePath& truth) {
    check_aligned(estimate, truth);
    if (estimate.size() == 0) return 0.0;
    double s = 0.0;
    for (std::size_t h = 0; h < estimate.size(); ++h) s += std::pow(estimate.estimate[h] - truth.estimate[h], 2);
    return s / double(estimate.size());
}

std::vector<int> covered_flags(const DatePath& estimate, const DatePath& truth, double level) {
    check_aligned(estimate, truth);
    std::vector<int> out(estimate.size());
    if (level == 0.0) {
        for (std::size_t h = 0; h < estimate.size(); ++h) out[h] = estimate.estimate[h] == truth.estimate[h];
        return out;
    }
    const Interval iv = require_interval(estimate, level);
    for (std::size_t h = 0; h < estimate.size(); ++h) {
        const double y = truth.estimate[h];
        out[h] = (*iv.lower)[h] <= y && y <= (*iv.upper)[h];
    }
    return out;
}

double coverage(const DatePath& estimate, const DatePath& truth, double level) {
    const auto flags = covered_flags(estimate, truth, level);
    if (flags.empty()) return 0.0;
    long c = 0;
    for (int f : flags) c += f;
    return double(c) / double(flags.size());
}

std::pair<double, double> binomial_band(double p, double n, double level) {
    if (n <= 0) return {0.0, 1.0};
    const double z = normal_central_z(level);
    const double z2 = z * z;
    const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
    const double half = z / (1 + z2 / n) * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::vector<QuantileCoveragePoint> quantile_coverage_curve(std::span<const DatePath> replications,
                                                           const DatePath& truth, const std::vector<double>& levels) {
    require(!replications.empty(), "quantile coverage needs at least one replication");
    std::vector<QuantileCoveragePoint> out;
    for (double q : levels) {
        require(q >= 0.0 && q < 1.0, "nominal level must lie in [0, 1)");
        QuantileCoveragePoint pt;
        pt.nominal = q;
        for (const auto& rep : replications) {
            for (int f : covered_flags(rep, truth, q)) pt.covered += f;
            pt.total += static_cast<long>(rep.size());
        }
        pt.coverage = pt.total > 0 ? double(pt.covered) / double(pt.total) : 0.0;
        std::tie(pt.band_lower, pt.band_upper) = binomial_band(pt.coverage, double(replications.size()));
        out.push_back(pt);
    }
    return out;
}

// ---------------------------------------------------------------------------

const MetricCell* MetricTable::find(const CellKey& key) const noexcept {
    for (const auto& c : cells)
        if (c.kind == key.kind && c.horizon == key.horizon && c.method == key.method) return &c;
    return nullptr;
}

MetricTable build_table(std::span<const ReplicationResult> results, const CellKey& reference) {
    std::map<CellKey, std::vector<const ReplicationResult*>> groups;
    for (const auto& r : results) groups[CellKey{r.kind, r.horizon, r.method}].push_back(&r);

    MetricTable table;
    table.reference = reference;
    for (auto& [key, reps] : groups) {
        std::sort(reps.begin(), reps.end(), [](auto* a, auto* b) { return a->rep < b->rep; });
        MetricCell cell;
        cell.kind = key.kind;
        cell.horizon = key.horizon;
        cell.method = key.method;
        cell.n_reps = static_cast<int>(reps.size());

        std::vector<DatePath> ok_paths;
        const DatePath* truth = nullptr;
        double mse_sum = 0.0;
        bool all_bounds = true;
        long covered = 0, total = 0;
        double rep_cp_sum = 0.0;
        std::vector<double> h_cov, h_sq;
        for (const auto* r : reps) {
            if (r->failed) {
                ++cell.n_failed;
                continue;
            }
            check_aligned(r->estimate, r->truth);
            truth = &r->truth;
            mse_sum += mse(r->estimate, r->truth);
            const std::size_t H = r->estimate.size();
            if (h_sq.empty()) {
                h_sq.assign(H, 0.0);
                h_cov.assign(H, 0.0);
            }
            if (h_sq.size() != H) fail(ErrorKind::LengthMismatch, "replications disagree on the horizon count");
            for (std::size_t h = 0; h < H; ++h) h_sq[h] += std::pow(r->estimate.estimate[h] - r->truth.estimate[h], 2);
            if (all_bounds && r->estimate.has_bounds()) {
                const auto flags = covered_flags(r->estimate, r->truth, r->estimate.level);
                long c = 0;
                for (std::size_t h = 0; h < H; ++h) {
                    c += flags[h];
                    h_cov[h] += flags[h];
                }
                covered += c;
                total += static_cast<long>(H);
                rep_cp_sum += H > 0 ? double(c) / double(H) : 0.0;
            } else {
                all_bounds = false;
            }
            ok_paths.push_back(r->estimate);
        }
        const double n_ok = double(ok_paths.size());
        if (n_ok > 0) {
            cell.mse_raw = mse_sum / n_ok;
            for (double& v : h_sq) v /= n_ok;
            cell.mse_per_horizon = h_sq;
            if (all_bounds) {
                cell.cp = total > 0 ? double(covered) / double(total) : 0.0;
                cell.cp_rep_mean = rep_cp_sum / n_ok;
                for (double& v : h_cov) v /= n_ok;
                cell.cp_per_horizon = h_cov;
                const bool has_bands = std::all_of(ok_paths.begin(), ok_paths.end(),
                                                   [](const DatePath& p) { return !p.bands.empty(); });
                // Truth is shared across replications of a cell (population estimand).
                if (has_bands) cell.quantile_coverage = quantile_coverage_curve(ok_paths, *truth);
            }
        }
        table.cells.push_back(std::move(cell));
    }

    const MetricCell* ref = table.find(reference);
    if (!ref || ref->n_reps == ref->n_failed)
        fail(ErrorKind::MissingReference, "reference cell " + to_string(reference.kind) + "/T=" +
                                              std::to_string(reference.horizon) + "/" + reference.method +
                                              " has no successful replication");
    table.reference_mse = ref->mse_raw;
    for (auto& c : table.cells)
        c.mse_standardized = table.reference_mse > 0.0 ? c.mse_raw / table.reference_mse
                                                       : (c.mse_raw == 0.0 ? 1.0 : INFINITY);
    return table;
}

void MetricTable::write_table_csv(std::ostream& os) const {
    os << "scenario,T,method,n_reps,n_failed,failure_rate,mse_raw,mse_standardized,cp_95,cp_95_rep_mean\n";
    for (const auto& c : cells) {
        os << to_string(c.kind) << ',' << c.horizon << ',' << c.method << ',' << c.n_reps << ',' << c.n_failed << ','
           << fmt(c.failure_rate()) << ',' << fmt(c.mse_raw) << ',' << fmt(c.mse_standardized) << ','
           << (c.cp ? fmt(*c.cp) : "") << ',' << (c.cp_rep_mean ? fmt(*c.cp_rep_mean) : "") << '\n';
    }
}

void MetricTable::write_quantile_coverage_csv(std::ostream& os) const {
    os << "scenario,T,method,q,coverage,band_lower,band_upper\n";
    for (const auto& c : cells)
        for (const auto& p : c.quantile_coverage)
            os << to_string(c.kind) << ',' << c.horizon << ',' << c.method << ',' << fmt(p.nominal) << ','
               << fmt(p.coverage) << ',' << fmt(p.band_lower) << ',' << fmt(p.band_upper) << '\n';
}

void MetricTable::write_per_horizon_csv(std::ostream& os) const {
    os << "scenario,T,method,h,mse,cp_95\n";
    for (const auto& c : cells)
        for (std::size_t h = 0; h < c.mse_per_horizon.size(); ++h)
            os << to_string(c.kind) << ',' << c.horizon << ',' << c.method << ',' << h << ','
               << fmt(c.mse_per_horizon[h]) << ',' << (c.cp_per_horizon.empty() ? "" : fmt(c.cp_per_horizon[h]))
               << '\n';
}

}  // namespace datekit
