#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "datekit/dgp.hpp"
#include "datekit/io.hpp"
#include "datekit/runner.hpp"

namespace fs = std::filesystem;
using namespace datekit;

namespace {

struct ConfigFlags {
    std::string config_path;
    std::string kind;
    std::optional<int> horizon, t_c, n_treated, n_control, replications;
    std::optional<double> ar_coef, b1, b2, b3, vol_discount, sigma2_0, y_0;
    std::optional<std::uint64_t> seed;
    std::string assignment;

    void add(CLI::App* app) {
        app->add_option("--config", config_path, "Scenario config JSON");
        app->add_option("--kind", kind, "many_many | one_many | one_one | one_none");
        app->add_option("--horizon,-T", horizon);
        app->add_option("--t-c", t_c);
        app->add_option("--ar-coef", ar_coef);
        app->add_option("--b1", b1);
        app->add_option("--b2", b2);
        app->add_option("--b3", b3);
        app->add_option("--vol-discount", vol_discount);
        app->add_option("--sigma2-0", sigma2_0);
        app->add_option("--y0", y_0);
        app->add_option("--n-treated", n_treated);
        app->add_option("--n-control", n_control);
        app->add_option("--reps", replications);
        app->add_option("--seed", seed);
        app->add_option("--assignment", assignment, "by_construction | confounded");
    }

    // File first, then flags; a kind flag without a file starts from that kind's defaults.
    ScenarioConfig resolve() const {
        nlohmann::json j = nlohmann::json::object();
        if (!config_path.empty()) {
            try {
                j = nlohmann::json::parse(read_file(config_path));
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorKind::ParseError, config_path + ": " + e.what());
            }
        }
        if (!kind.empty()) j["kind"] = to_string(parse_scenario_kind(kind));
        if (horizon) j["horizon"] = *horizon;
        ScenarioConfig cfg = j.get<ScenarioConfig>();
        if (t_c) cfg.t_c = *t_c;
        if (ar_coef) cfg.ar_coef = *ar_coef;
        if (b1) cfg.b1 = *b1;
        if (b2) cfg.b2 = *b2;
        if (b3) cfg.b3 = *b3;
        if (vol_discount) cfg.vol_discount = *vol_discount;
        if (sigma2_0) cfg.sigma2_0 = *sigma2_0;
        if (y_0) cfg.y_0 = *y_0;
        if (n_treated) cfg.n_treated = *n_treated;
        if (n_control) cfg.n_control = *n_control;
        if (replications) cfg.replications = *replications;
        if (seed) cfg.seed = *seed;
        if (!assignment.empty()) {
            nlohmann::json a = cfg;
            a["assignment"] = assignment;
            cfg = a.get<ScenarioConfig>();
        }
        cfg.validate();
        return cfg;
    }
};

struct EstimatorFlags {
    int draws = 5000;
    std::string grid = "default";
    std::string form = "lag";
    std::string contrast = "smoothed";
    double level = 0.95;
    bool stabilized = false;
    std::string propensity = "logistic";

    void add(CLI::App* app) {
        app->add_option("--draws", draws, "Posterior draws for dlm")->check(CLI::PositiveNumber);
        app->add_option("--grid", grid, "'default' or delta:beta pairs, e.g. 0.99:0.99,0.95:0.99");
        app->add_option("--form", form, "dlm observation form: lag | increment");
        app->add_option("--contrast", contrast, "dlm contrast: simulate | smoothed");
        app->add_option("--level", level, "Interval level")->check(CLI::Range(0.01, 0.999));
        app->add_flag("--stabilized", stabilized, "Self-normalized dipw weights");
        app->add_option("--propensity", propensity, "dipw propensities: logistic | known");
    }

    EstimateOptions resolve(std::uint64_t seed) const {
        EstimateOptions o;
        o.level = level;
        o.stabilized = stabilized;
        if (propensity == "logistic") o.propensity = PropensitySource::Logistic;
        else if (propensity == "known") o.propensity = PropensitySource::Known;
        else fail(ErrorKind::InvalidArgument, "unknown propensity source '" + propensity + "'");
        if (form == "lag") o.dlm.spec = DlmSpec::standard(ObservationForm::LagCoefficient);
        else if (form == "increment") o.dlm.spec = DlmSpec::standard(ObservationForm::Increment);
        else fail(ErrorKind::InvalidArgument, "unknown form '" + form + "'");
        if (contrast == "simulate") o.dlm.branch.mode = ContrastMode::SimulateForward;
        else if (contrast == "smoothed") o.dlm.branch.mode = ContrastMode::SmoothedStates;
        else fail(ErrorKind::InvalidArgument, "unknown contrast '" + contrast + "'");
        o.dlm.draws = draws;
        o.dlm.seed = seed;
        if (grid != "default") {
            DiscountGrid g;
            std::stringstream ss(grid);
            std::string item;
            while (std::getline(ss, item, ',')) {
                const auto colon = item.find(':');
                if (colon == std::string::npos) fail(ErrorKind::InvalidArgument, "grid entry '" + item + "' needs delta:beta");
                g.emplace_back(std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
            }
            require(!g.empty(), "grid is empty");
            o.dlm.grid = g;
        }
        return o;
    }
};

std::string joined(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
    return s;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, text);
}

// t_c from the flag, else from a `<panel>.json` sidecar written by `simulate`.
int resolve_tc(const std::optional<int>& flag, const fs::path& input) {
    if (flag) return *flag;
    fs::path side = input;
    side.replace_extension(".json");
    if (fs::exists(side)) {
        const auto j = nlohmann::json::parse(read_file(side));
        if (j.contains("t_c")) return j.at("t_c").get<int>();
    }
    fail(ErrorKind::InvalidArgument, "--t-c is required (no sidecar " + side.string() + ")");
}

// Generating propensities recorded by `simulate` under confounded assignment.
std::optional<std::vector<double>> sidecar_propensity(const fs::path& input, std::size_t n) {
    fs::path side = input;
    side.replace_extension(".json");
    if (!fs::exists(side)) return std::nullopt;
    const auto j = nlohmann::json::parse(read_file(side));
    if (!j.contains("true_propensity")) return std::nullopt;
    auto p = j.at("true_propensity").get<std::vector<double>>();
    if (p.size() != n) fail(ErrorKind::LengthMismatch, "sidecar propensities do not match the panel");
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic average treatment effect estimation"};
    app.require_subcommand(1);
    const std::string cmdline = joined(argc, argv);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate one replication of a scenario");
    ConfigFlags sim_cfg;
    sim_cfg.add(sim);
    int sim_rep = 1;
    std::string sim_out = "panel.csv";
    sim->add_option("--rep", sim_rep, "Replication index");
    sim->add_option("--out,-o", sim_out, "Panel CSV path (a .json sidecar is written next to it)");

    // estimate
    auto* est = app.add_subcommand("estimate", "Estimate the DATE path of a panel");
    std::string est_in, est_out = "date.csv", est_method = "dlm", est_decomp;
    std::optional<int> est_tc;
    std::vector<std::string> est_treated;
    std::uint64_t est_seed = 1;
    EstimatorFlags est_flags;
    est->add_option("--input,-i", est_in, "Panel or column CSV")->required();
    est->add_option("--method,-m", est_method, "dipw | mean | dlm | lm | lm-ar1 | arimax | y | scm | did");
    est->add_option("--t-c", est_tc, "Intervention index");
    est->add_option("--treated", est_treated, "Treated unit ids or column names");
    est->add_option("--seed", est_seed);
    est->add_option("--out,-o", est_out, "DatePath CSV");
    est->add_option("--decomposition", est_decomp, "Decomposition CSV (dlm)");
    est_flags.add(est);

    // run-scenario
    auto* run = app.add_subcommand("run-scenario", "Monte Carlo replications of a scenario");
    ConfigFlags run_cfg;
    run_cfg.add(run);
    std::vector<std::string> run_methods{"dlm"};
    std::string run_out = "run";
    int run_threads = 0;
    EstimatorFlags run_flags;
    run->add_option("--methods", run_methods, "Comma-separated methods")->delimiter(',');
    run->add_option("--out,-o", run_out, "Output directory");
    run->add_option("--threads", run_threads, "Worker count (capped by DATEKIT_THREADS)");
    run_flags.add(run);

    // placebo
    auto* pl = app.add_subcommand("placebo", "Placebo intervention test on pre-intervention data");
    std::string pl_in, pl_out = "placebo.csv", pl_method = "dlm";
    std::optional<int> pl_tc, pl_fixed;
    std::vector<std::string> pl_treated;
    int pl_runs = 1;
    std::uint64_t pl_seed = 1;
    EstimatorFlags pl_flags;
    pl->add_option("--input,-i", pl_in, "Panel or column CSV")->required();
    pl->add_option("--t-c", pl_tc, "True intervention index");
    pl->add_option("--treated", pl_treated, "Treated unit ids or column names");
    pl->add_option("--method,-m", pl_method);
    pl->add_option("--runs", pl_runs)->check(CLI::PositiveNumber);
    pl->add_option("--placebo-tc", pl_fixed, "Fixed placebo index instead of a random draw");
    pl->add_option("--seed", pl_seed);
    pl->add_option("--out,-o", pl_out, "Per-run summary CSV");
    pl_flags.add(pl);

    // report
    auto* rep = app.add_subcommand("report", "Summary tables from run-scenario outputs");
    std::vector<std::string> rep_in;
    std::string rep_out = "report", rep_ref_method = "mean", rep_ref_kind = "many_many";
    int rep_ref_T = 72;
    rep->add_option("--input,-i", rep_in, "Run directories or results.csv files")->required();
    rep->add_option("--out,-o", rep_out, "Output directory");
    rep->add_option("--reference-method", rep_ref_method);
    rep->add_option("--reference-kind", rep_ref_kind);
    rep->add_option("--reference-T", rep_ref_T);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            const ScenarioConfig cfg = sim_cfg.resolve();
            const SimulatedReplication r = simulate_scenario(cfg, sim_rep);
            std::ostringstream os;
            write_panel_csv(os, r.panel);
            write_text(sim_out, os.str());
            nlohmann::json side = {{"config", cfg}, {"rep", sim_rep}, {"t_c", cfg.t_c}, {"true_date", r.truth.estimate}};
            if (r.true_propensity) side["true_propensity"] = *r.true_propensity;
            fs::path side_path = sim_out;
            side_path.replace_extension(".json");
            write_text(side_path, side.dump(2) + "\n");
            std::cout << "wrote " << sim_out << " and " << side_path.string() << "\n";
        } else if (est->parsed()) {
            IngestOptions io;
            io.t_c = resolve_tc(est_tc, est_in);
            io.treated = est_treated;
            const SeriesPanel panel = ingest_csv(fs::path(est_in), io);
            EstimateOptions eo = est_flags.resolve(est_seed);
            if (eo.propensity == PropensitySource::Known) eo.known_propensity = sidecar_propensity(est_in, panel.size());
            const MethodOutput out = estimate(panel, parse_method(est_method), eo);
            std::ostringstream os;
            write_date_csv(os, out.date);
            write_text(est_out, os.str());
            if (!est_decomp.empty()) {
                if (!out.dlm) fail(ErrorKind::IncompatibleMethod, "decomposition is only available for dlm");
                std::ostringstream ds;
                write_decomposition_csv(ds, out.dlm->decomposition);
                write_text(est_decomp, ds.str());
            }
            if (out.dlm)
                std::cout << "discounts delta=" << out.dlm->discounts.first << " beta=" << out.dlm->discounts.second
                          << "\n";
            std::cout << "wrote " << est_out << "\n";
        } else if (run->parsed()) {
            const ScenarioConfig cfg = run_cfg.resolve();
            RunOptions ro;
            ro.out_dir = run_out;
            for (const auto& m : run_methods) ro.methods.push_back(parse_method(m));
            ro.threads = run_threads;
            ro.estimate = run_flags.resolve(cfg.seed);
            ro.command_line = cmdline;
            const RunSummary s = run_scenario(cfg, ro);
            std::cout << "replications=" << s.replications << " computed=" << s.computed << " resumed=" << s.resumed
                      << " failed_fits=" << s.failed_fits << "\nwrote " << s.results_csv.string() << "\n";
        } else if (pl->parsed()) {
            IngestOptions io;
            io.t_c = resolve_tc(pl_tc, pl_in);
            io.treated = pl_treated;
            const SeriesPanel panel = ingest_csv(fs::path(pl_in), io);
            PlaceboOptions po;
            po.method = parse_method(pl_method);
            po.runs = pl_runs;
            po.seed = pl_seed;
            po.placebo_tc = pl_fixed;
            po.estimate = pl_flags.resolve(pl_seed);
            const PlaceboSummary s = placebo_test(panel, po);
            std::ostringstream os;
            os << "run,placebo_tc,zero_coverage,max_abs_estimate\n";
            for (std::size_t k = 0; k < s.runs.size(); ++k)
                os << k + 1 << ',' << s.runs[k].placebo_tc << ',' << format_double(s.runs[k].zero_coverage) << ','
                   << format_double(s.runs[k].max_abs_estimate) << '\n';
            write_text(pl_out, os.str());
            std::cout << "runs_passing=" << s.runs_passing << " max_abs_estimate=" << s.max_abs_estimate << "\nwrote "
                      << pl_out << "\n";
        } else if (rep->parsed()) {
            std::vector<ReplicationResult> all;
            for (const auto& in : rep_in) {
                fs::path p = in;
                if (fs::is_directory(p)) p /= "results.csv";
                std::ifstream is(p);
                if (!is) fail(ErrorKind::ParseError, "cannot open " + p.string());
                auto rows = read_result_csv(is);
                all.insert(all.end(), rows.begin(), rows.end());
            }
            const MetricTable table =
                build_table(all, CellKey{parse_scenario_kind(rep_ref_kind), rep_ref_T, to_string(parse_method(rep_ref_method))});
            const fs::path dir = rep_out;
            fs::create_directories(dir);
            std::ostringstream t1, qc, ph;
            table.write_table_csv(t1);
            table.write_quantile_coverage_csv(qc);
            table.write_per_horizon_csv(ph);
            write_text(dir / "table1.csv", t1.str());
            write_text(dir / "quantile_coverage.csv", qc.str());
            write_text(dir / "per_horizon.csv", ph.str());
            std::cout << t1.str();
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
