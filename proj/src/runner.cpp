#include "datekit/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <mutex>
#include <sstream>
#include <thread>

#include "datekit/dgp.hpp"
#include "datekit/io.hpp"

namespace datekit {

namespace fs = std::filesystem;

std::string to_string(Method m) {
    switch (m) {
        case Method::DIPW: return "dipw";
        case Method::Mean: return "mean";
        case Method::DLM: return "dlm";
        case Method::LM: return "lm";
        case Method::LMAR1: return "lm-ar1";
        case Method::ARIMAX: return "arimax";
        case Method::ObservedY: return "y";
        case Method::SCM: return "scm";
        case Method::DiD: return "did";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    std::string k;
    for (char c : name) k.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    std::replace(k.begin(), k.end(), '_', '-');
    if (k == "dipw") return Method::DIPW;
    if (k == "mean" || k == "panel-mean") return Method::Mean;
    if (k == "dlm") return Method::DLM;
    if (k == "lm") return Method::LM;
    if (k == "lm-ar1" || k == "lmar1") return Method::LMAR1;
    if (k == "arimax" || k == "arima") return Method::ARIMAX;
    if (k == "y" || k == "observed-y") return Method::ObservedY;
    if (k == "scm") return Method::SCM;
    if (k == "did") return Method::DiD;
    fail(ErrorKind::InvalidArgument, "unknown method '" + name + "'");
}

bool method_compatible(Method m, ScenarioKind kind) {
    switch (m) {
        case Method::DIPW:
        case Method::Mean: return kind == ScenarioKind::ManyMany;
        case Method::ObservedY: return kind != ScenarioKind::ManyMany;
        case Method::SCM: return kind == ScenarioKind::OneMany;
        case Method::DiD: return kind == ScenarioKind::OneOne;
        default: return true;
    }
}

MethodOutput estimate(const SeriesPanel& panel, Method method, const EstimateOptions& options) {
    MethodOutput out;
    auto from_baseline = [&](BaselineFit fit) {
        out.date = fit.date;
        out.baseline = std::move(fit);
    };
    switch (method) {
        case Method::DIPW:
        case Method::Mean: {
            PropensityFit prop;
            if (method == Method::Mean)
                prop = PropensityFit::design_based(panel);
            else if (options.propensity == PropensitySource::Logistic)
                prop = fit_propensity(panel, options.features);
            else if (options.known_propensity)
                prop = PropensityFit::known(*options.known_propensity);
            else
                prop = PropensityFit::design_based(panel);
            DipwEstimate est = dipw_estimate(panel, prop, method == Method::Mean || options.stabilized);
            out.date = est.to_date_path(options.level);
            out.dipw = std::move(est);
            break;
        }
        case Method::DLM: {
            DlmOptions o = options.dlm;
            o.branch.level = options.level;
            DlmFit fit = fit_dlm(panel, o);
            out.date = fit.date;
            out.dlm = std::move(fit);
            break;
        }
        case Method::LM: from_baseline(fit_lm(panel, options.level)); break;
        case Method::LMAR1: from_baseline(fit_lm_ar1(panel, options.level)); break;
        case Method::ARIMAX: from_baseline(fit_arimax(panel, options.level)); break;
        case Method::ObservedY: from_baseline(observed_y(panel, options.level)); break;
        case Method::SCM: from_baseline(fit_scm(panel, options.level)); break;
        case Method::DiD: from_baseline(fit_did(panel)); break;
    }
    return out;
}

// ---------------------------------------------------------------------------

int resolve_threads(int requested) {
    int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("DATEKIT_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return std::max(1, n);
}

std::vector<ReplicationResult> evaluate_replication(const ScenarioConfig& cfg, int rep, const std::vector<Method>& methods,
                                                    const EstimateOptions& options) {
    const SimulatedReplication sim = simulate_scenario(cfg, rep);
    std::vector<ReplicationResult> out;
    for (Method m : methods) {
        ReplicationResult r;
        r.kind = cfg.kind;
        r.horizon = cfg.horizon;
        r.method = to_string(m);
        r.rep = rep;
        r.truth = sim.truth;
        EstimateOptions o = options;
        o.dlm.seed = stream_key(cfg.seed, static_cast<std::uint64_t>(rep), 0, StreamRole::Posterior);
        if (sim.true_propensity && !o.known_propensity) o.known_propensity = sim.true_propensity;
        try {
            r.estimate = estimate(sim.panel, m, o).date;
        } catch (const Error& e) {
            r.failed = true;
            r.error = e.what();
        }
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string rep_name(int rep) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "rep_%06d", rep);
    return buf;
}

// A replication file is reusable when its checksum sidecar matches its content.
bool rep_complete(const fs::path& csv, const fs::path& sum) {
    std::error_code ec;
    if (!fs::exists(csv, ec) || !fs::exists(sum, ec)) return false;
    try {
        std::string expected = read_file(sum);
        while (!expected.empty() && std::isspace(static_cast<unsigned char>(expected.back()))) expected.pop_back();
        return expected == sha256_hex(read_file(csv));
    } catch (const Error&) {
        return false;
    }
}

}  // namespace

nlohmann::json build_manifest(const std::string& command_line, const nlohmann::json& config, std::uint64_t seed,
                              const fs::path& root, const std::vector<fs::path>& outputs, const std::string& started) {
    nlohmann::json files = nlohmann::json::array();
    std::string all;
    for (const auto& p : outputs) {
        const std::string sum = sha256_hex(read_file(p));
        files.push_back({{"path", fs::relative(p, root).generic_string()}, {"sha256", sum}});
        all += sum;
    }
    return {
        {"tool", "datekit"},
        {"tool_version", "0.1.0"},
        {"command_line", command_line},
        {"config", config},
        {"config_hash", sha256_hex(config.dump())},
        {"seed", seed},
        {"content_version", sha256_hex(all)},
        {"started", started},
        {"finished", timestamp()},
        {"outputs", files},
    };
}

RunSummary run_scenario(const ScenarioConfig& cfg, const RunOptions& options) {
    cfg.validate();
    require(!options.methods.empty(), "no methods requested");
    require(!options.out_dir.empty(), "output directory is required");
    for (Method m : options.methods)
        if (!method_compatible(m, cfg.kind))
            fail(ErrorKind::IncompatibleMethod,
                 "method '" + to_string(m) + "' is not defined for scenario " + to_string(cfg.kind));

    const std::string started = timestamp();
    const fs::path root = options.out_dir;
    const fs::path reps_dir = root / "reps";
    fs::create_directories(reps_dir);

    // The run identity covers everything that influences the per-replication bytes.
    nlohmann::json config = cfg;
    nlohmann::json identity = {{"config", config}, {"methods", nlohmann::json::array()},
                               {"level", options.estimate.level}, {"dlm_draws", options.estimate.dlm.draws},
                               {"dlm_form", options.estimate.dlm.spec.form == ObservationForm::Increment ? "increment" : "lag"},
                               {"contrast", options.estimate.dlm.branch.mode == ContrastMode::SmoothedStates ? "smoothed" : "simulate"},
                               {"stabilized", options.estimate.stabilized},
                               {"propensity", options.estimate.propensity == PropensitySource::Known ? "known" : "logistic"}};
    for (Method m : options.methods) identity["methods"].push_back(to_string(m));
    identity["grid"] = nlohmann::json::array();
    for (const auto& [d, b] : options.estimate.dlm.grid) identity["grid"].push_back({d, b});
    const std::string identity_text = identity.dump(2) + "\n";
    const fs::path run_json = root / "run.json";
    if (fs::exists(run_json)) {
        if (read_file(run_json) != identity_text)
            fail(ErrorKind::InvalidArgument, "output directory " + root.string() + " holds a different run");
    } else {
        write_file_atomic(run_json, identity_text);
    }

    RunSummary summary;
    summary.replications = cfg.replications;
    std::vector<int> pending;
    for (int rep = 1; rep <= cfg.replications; ++rep) {
        const auto base = reps_dir / rep_name(rep);
        if (rep_complete(fs::path(base) += ".csv", fs::path(base) += ".sha256"))
            ++summary.resumed;
        else
            pending.push_back(rep);
    }

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= pending.size()) return;
            const int rep = pending[i];
            try {
                std::ostringstream os;
                write_result_header(os);
                for (const auto& r : evaluate_replication(cfg, rep, options.methods, options.estimate))
                    write_result_rows(os, r);
                const std::string text = os.str();
                const auto base = reps_dir / rep_name(rep);
                write_file_atomic(fs::path(base) += ".csv", text);
                write_file_atomic(fs::path(base) += ".sha256", sha256_hex(text) + "\n");
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(pending.size());
            }
        }
    };
    const int n_threads = std::min<int>(resolve_threads(options.threads), std::max<std::size_t>(1, pending.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < n_threads; ++k) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    summary.computed = static_cast<int>(pending.size());

    // Merge in replication order.
    std::ostringstream merged;
    write_result_header(merged);
    for (int rep = 1; rep <= cfg.replications; ++rep) {
        const std::string text = read_file(reps_dir / (rep_name(rep) + ".csv"));
        const auto nl = text.find('\n');
        merged << text.substr(nl + 1);
        std::istringstream is(text);
        for (const auto& r : read_result_csv(is))
            if (r.failed) ++summary.failed_fits;
    }
    summary.results_csv = root / "results.csv";
    write_file_atomic(summary.results_csv, merged.str());

    std::vector<fs::path> outputs{run_json, summary.results_csv};
    for (int rep = 1; rep <= cfg.replications; ++rep) outputs.push_back(reps_dir / (rep_name(rep) + ".csv"));
    nlohmann::json manifest = build_manifest(options.command_line, identity, cfg.seed, root, outputs, started);
    manifest["replications"] = cfg.replications;
    manifest["failed_fits"] = summary.failed_fits;
    summary.manifest = root / "manifest.json";
    write_file_atomic(summary.manifest, manifest.dump(2) + "\n");
    return summary;
}

// ---------------------------------------------------------------------------

SeriesPanel placebo_panel(const SeriesPanel& panel, int placebo_tc) {
    const int tc = panel.t_c();
    if (placebo_tc >= tc)
        fail(ErrorKind::InvalidArgument, "placebo time " + std::to_string(placebo_tc) +
                                             " must precede the intervention at " + std::to_string(tc));
    if (placebo_tc < 1) fail(ErrorKind::InsufficientPreHistory, "placebo time leaves no pre-history");
    // Keep y_0..y_{t_c-1}; the placebo must leave at least one post observation after it.
    if (placebo_tc >= tc - 1)
        fail(ErrorKind::InsufficientPreHistory, "placebo time leaves no post-placebo window before t_c");
    const bool any_treated = panel.n_treated() > 0;
    std::vector<UnitSeries> units;
    for (std::size_t i = 0; i < panel.size(); ++i) {
        const auto& u = panel.unit(i);
        UnitSeries v;
        v.path.assign(u.path.begin(), u.path.begin() + tc);
        v.treated = any_treated ? u.treated : i == 0;
        units.push_back(std::move(v));
    }
    return SeriesPanel(std::move(units), placebo_tc);
}

PlaceboSummary placebo_test(const SeriesPanel& panel, const PlaceboOptions& options) {
    require(options.runs >= 1, "placebo runs must be positive");
    if (options.method == Method::DiD || options.method == Method::ObservedY)
        fail(ErrorKind::IncompatibleMethod, "placebo test needs an interval-producing method");
    const int tc = panel.t_c();
    if (options.placebo_tc) {
        if (*options.placebo_tc >= tc) placebo_panel(panel, *options.placebo_tc);  // throws
        if (*options.placebo_tc < options.margin)
            fail(ErrorKind::InsufficientPreHistory, "placebo time needs at least " + std::to_string(options.margin) +
                                                        " earlier observations");
    } else if (tc - options.margin < options.margin) {
        fail(ErrorKind::InsufficientPreHistory, "t_c = " + std::to_string(tc) + " leaves no placebo window of margin " +
                                                    std::to_string(options.margin));
    }

    PlaceboSummary summary;
    RandomStream rng(options.seed, 0, 0, StreamRole::Placebo);
    std::vector<long> hits, counts;
    int passing = 0;
    for (int k = 0; k < options.runs; ++k) {
        PlaceboRun run;
        run.placebo_tc = options.placebo_tc ? *options.placebo_tc
                                            : static_cast<int>(rng.uniform_int(options.margin, tc - options.margin));
        const SeriesPanel pp = placebo_panel(panel, run.placebo_tc);
        EstimateOptions eo = options.estimate;
        eo.dlm.seed = stream_key(options.seed, static_cast<std::uint64_t>(k) + 1, 0, StreamRole::Placebo);
        run.date = estimate(pp, options.method, eo).date;
        if (!run.date.has_bounds())
            fail(ErrorKind::IncompatibleMethod, "method '" + to_string(options.method) + "' reports no interval");
        const std::size_t H = run.date.size();
        if (hits.size() < H) {
            hits.resize(H, 0);
            counts.resize(H, 0);
        }
        long c = 0;
        for (std::size_t h = 0; h < H; ++h) {
            const bool in = run.date.lower[h] <= 0.0 && 0.0 <= run.date.upper[h];
            c += in;
            hits[h] += in;
            ++counts[h];
            run.max_abs_estimate = std::max(run.max_abs_estimate, std::abs(run.date.estimate[h]));
        }
        run.zero_coverage = H > 0 ? double(c) / double(H) : 1.0;
        if (run.zero_coverage >= 0.9) ++passing;
        summary.max_abs_estimate = std::max(summary.max_abs_estimate, run.max_abs_estimate);
        summary.runs.push_back(std::move(run));
    }
    for (std::size_t h = 0; h < hits.size(); ++h) summary.zero_fraction_per_horizon.push_back(double(hits[h]) / counts[h]);
    summary.runs_passing = double(passing) / options.runs;
    return summary;
}

}  // namespace datekit
