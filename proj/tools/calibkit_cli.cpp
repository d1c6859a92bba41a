// calibkit command-line front end. Every subcommand writes its outputs plus a
// JSON run manifest; exit codes follow the error classes in errors.hpp.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "calibkit/analysis.hpp"
#include "calibkit/calibration.hpp"
#include "calibkit/csv.hpp"
#include "calibkit/doe.hpp"
#include "calibkit/errors.hpp"
#include "calibkit/hash.hpp"
#include "calibkit/hydration.hpp"
#include "calibkit/parallel.hpp"
#include "calibkit/pipeline.hpp"
#include "calibkit/strategies.hpp"

namespace fs = std::filesystem;
using namespace calibkit;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Run {
    std::string command;
    std::uint64_t seed = 0;
    std::string seed_source;
    int jobs = 1;
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    json details = json::object();
};

std::string file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "";
    Fnv1a h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

void write_json(const fs::path& path, const json& doc) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump(2) << "\n";
    if (!out) throw DataError("failed writing " + path.string());
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// --- shared option groups -------------------------------------------------------

struct GridOptions {
    double t_first = TimeGrid::kDefaultStart;
    double t_last = TimeGrid::kDefaultEnd;
    int count = TimeGrid::kDefaultCount;
    TimeGrid make() const { return TimeGrid(t_first, t_last, count); }
    void add(CLI::App* app) {
        app->add_option("--t-first", t_first, "First grid time [h]")->capture_default_str();
        app->add_option("--t-last", t_last, "Last grid time [h]")->capture_default_str();
        app->add_option("--count", count, "Number of log-uniform grid points")->capture_default_str();
    }
};

struct ThermalOptions {
    double temperature = 25.0;
    double activation_energy = 0.0;
    ThermalConditions make() const { return {temperature, activation_energy}; }
    void add(CLI::App* app) {
        app->add_option("--temperature", temperature, "Isothermal temperature [C]")->capture_default_str();
        app->add_option("--activation-energy", activation_energy, "Arrhenius activation energy [J/mol]")
            ->capture_default_str();
    }
};

struct TrainOptions {
    TrainConfig c;
    void add(CLI::App* app) {
        app->add_option("--folds", c.v_folds, "Cross-validation folds V")->capture_default_str();
        app->add_option("--ratio-window", c.ratio_window, "Error-ratio window J")->capture_default_str();
        app->add_option("--max-iters", c.max_iters, "CG iteration limit K")->capture_default_str();
        app->add_option("--pe-ratio-max", c.pe_ratio_max, "Stop when the error ratio exceeds this")
            ->capture_default_str();
        app->add_option("--h-min", c.h_min, "Smallest hidden-layer size")->capture_default_str();
        app->add_option("--h-max", c.h_max, "Largest hidden-layer size")->capture_default_str();
        app->add_option("--cve-ratio-max", c.cve_ratio_max, "Cross-validation ratio threshold")
            ->capture_default_str();
        app->add_option("--max-exceed", c.max_exceed, "Threshold exceedances before stopping growth W")
            ->capture_default_str();
    }
};

struct OptimizerOptions {
    OptimizerConfig c = OptimizerConfig::unit_cube(4);
    void add(CLI::App* app) {
        app->add_option("--pool-rate", c.pool_rate, "Population = pool_rate * dimension")->capture_default_str();
        app->add_option("--radioactivity", c.radioactivity, "Mutation probability")->capture_default_str();
        app->add_option("--cross-limit", c.cross_limit, "Crossover step control")->capture_default_str();
        app->add_option("--budget", c.budget, "Objective evaluations")->capture_default_str();
    }
};

struct ObservedOptions {
    std::string path;
    double shift = 0.0;
    std::optional<double> q_pot;
    std::string label;
    void add(CLI::App* app, bool required) {
        auto* o = app->add_option("--observed", path, "Observed curve CSV (time_h,alpha or time_h,heat_J_per_g)");
        if (required) o->required();
        app->add_option("--shift", shift, "Time-shift correction [h] added to observed times")->capture_default_str();
        app->add_option("--qpot", q_pot, "Potential heat [J/g] for heat input");
        app->add_option("--label", label, "Curve label");
    }
    ObservedCurve read(Run& run) const {
        run.inputs.push_back(path);
        return read_observed(path, shift, q_pot, label);
    }
};

json vec4_json(const Vector4& v) { return {v[0], v[1], v[2], v[3]}; }

// --- invariant checks run before reporting success -------------------------------

void check_curve(const Eigen::VectorXd& alpha, const StandardizedParams& p) {
    const double alpha_inf = destandardize(p).alpha_inf;
    for (Eigen::Index i = 0; i < alpha.size(); ++i) {
        if (!(alpha[i] >= -1e-12 && alpha[i] <= alpha_inf + 1e-9))
            throw NumericalError("simulated alpha leaves [0, alpha_inf] at point " + std::to_string(i + 1), alpha[i]);
        if (i > 0 && alpha[i] < alpha[i - 1] - 1e-12)
            throw NumericalError("simulated alpha decreases at point " + std::to_string(i + 1), alpha[i]);
    }
}

void check_lhs(const Eigen::MatrixXd& x) {
    const auto n = x.rows();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        std::vector<int> seen(static_cast<std::size_t>(n), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto s = static_cast<Eigen::Index>(std::floor(x(i, c) * static_cast<double>(n)));
            if (s < 0 || s >= n || seen[static_cast<std::size_t>(s)]++)
                throw Error("LHS stratification violated in column " + std::to_string(c + 1));
        }
    }
}

Eigen::MatrixXd read_bundle_checked(const std::string& path, Run& run, Eigen::VectorXd& times) {
    run.inputs.push_back(path);
    return csv::read_bundle(path, times);
}

Eigen::MatrixXd read_design_checked(const std::string& path, Run& run) {
    run.inputs.push_back(path);
    return csv::read_design(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"calibkit: surrogate-based calibration of a cement hydration model"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "TOML configuration file; command-line flags override it");
    app.require_subcommand(1);
    app.fallthrough();

    std::optional<std::uint64_t> seed_flag;
    int jobs = default_jobs();
    std::string manifest_flag;
    app.add_option("--seed", seed_flag, "Random seed (falls back to CALIBKIT_SEED, then 0)");
    app.add_option("--jobs", jobs, "Parallel width")->capture_default_str();
    app.add_option("--manifest", manifest_flag, "Run manifest path (default: next to the outputs)");

    Run run;
    std::function<void()> action;
    fs::path out;

    // simulate ---------------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "Simulate hydration curves for inline or tabulated parameters");
    std::vector<double> sim_p;
    std::string sim_design;
    GridOptions sim_grid;
    ThermalOptions sim_thermal;
    double sim_tol = 1e-8;
    auto* sim_p_opt = sim->add_option("--p", sim_p, "Four standardized parameters p1 p2 p3 p4")->expected(4);
    sim->add_option("--design", sim_design, "Design CSV (p1..p4) to simulate row by row")->excludes(sim_p_opt);
    sim->add_option("--tolerance", sim_tol, "Integrator tolerance")->capture_default_str();
    sim->add_option("--out", out, "Output CSV")->required();
    sim_grid.add(sim);
    sim_thermal.add(sim);
    sim->callback([&] {
        action = [&] {
            const TimeGrid grid = sim_grid.make();
            IntegratorOptions io;
            io.tolerance = sim_tol;
            ensure_parent(out);
            if (!sim_design.empty()) {
                const Eigen::MatrixXd design = read_design_checked(sim_design, run);
                const Eigen::MatrixXd bundle = simulate_bundle(design, grid, sim_thermal.make(), run.jobs, io);
                for (Eigen::Index i = 0; i < design.rows(); ++i)
                    check_curve(bundle.row(i).transpose(), StandardizedParams(Vector4(design.row(i).transpose())));
                csv::write_bundle(out, grid.times(), bundle);
                run.details["curves"] = design.rows();
            } else {
                if (sim_p.size() != 4) throw ConfigError("simulate needs --p with 4 values or --design");
                const StandardizedParams p(sim_p[0], sim_p[1], sim_p[2], sim_p[3]);
                const HydrationCurve c = simulate(p, grid, sim_thermal.make(), io);
                check_curve(c.alpha, p);
                csv::write_curve(out, grid.times(), c.alpha);
                run.details["p"] = vec4_json(p.p);
            }
            run.outputs.push_back(out);
        };
    });

    // doe ---------------------------------------------------------------------
    auto* doe = app.add_subcommand("doe", "Generate a design of experiments in the unit cube");
    int doe_n = 100, doe_dim = 4, doe_iters = 10000;
    std::string doe_kind = "lhs_optimized";
    doe->add_option("--n", doe_n, "Number of points")->capture_default_str();
    doe->add_option("--dim", doe_dim, "Dimension")->capture_default_str();
    doe->add_option("--kind", doe_kind, "lhs_optimized or uniform_random")->capture_default_str();
    doe->add_option("--iterations", doe_iters, "Swap proposals for LHS optimization")->capture_default_str();
    doe->add_option("--out", out, "Output design CSV")->required();
    doe->callback([&] {
        action = [&] {
            const DesignKind kind = design_kind_from_string(doe_kind);
            const Design d = kind == DesignKind::LhsOptimized ? generate_lhs(doe_n, doe_dim, run.seed, doe_iters)
                                                              : generate_random(doe_n, doe_dim, run.seed);
            if (kind == DesignKind::LhsOptimized) {
                check_lhs(d.points);
                if (d.discrepancy > d.initial_discrepancy + 1e-15)
                    throw Error("optimized discrepancy exceeds the initial one");
            }
            ensure_parent(out);
            if (doe_dim == 4) {
                csv::write_design(out, d.points);
            } else {
                std::vector<std::string> header;
                for (int j = 1; j <= doe_dim; ++j) header.push_back("p" + std::to_string(j));
                csv::write(out, header, d.points);
            }
            run.outputs.push_back(out);
            run.details = {{"kind", to_string(d.kind)},
                           {"discrepancy", d.discrepancy},
                           {"initial_discrepancy", d.initial_discrepancy},
                           {"accepted_swaps", d.accepted_scores.size()}};
        };
    });

    // sense -------------------------------------------------------------------
    auto* sense = app.add_subcommand("sense", "Spearman sensitivity of every response component to each parameter");
    std::string sense_design, sense_bundle;
    sense->add_option("--design", sense_design, "Design CSV")->required();
    sense->add_option("--bundle", sense_bundle, "Bundle CSV")->required();
    sense->add_option("--out", out, "Output CSV (component,time_h,rho_p1..rho_p4)")->required();
    sense->callback([&] {
        action = [&] {
            const Eigen::MatrixXd design = read_design_checked(sense_design, run);
            Eigen::VectorXd times;
            const Eigen::MatrixXd bundle = read_bundle_checked(sense_bundle, run, times);
            const SensitivityMatrix s = sensitivity_table(design, bundle);
            Eigen::MatrixXd table(bundle.cols(), 2 + design.cols());
            std::vector<std::string> header = {"component", "time_h"};
            for (Eigen::Index j = 0; j < design.cols(); ++j) header.push_back("rho_p" + std::to_string(j + 1));
            for (Eigen::Index k = 0; k < bundle.cols(); ++k) {
                table(k, 0) = static_cast<double>(k + 1);
                table(k, 1) = times[k];
                table.row(k).tail(design.cols()) = s.rho.col(k).transpose();
            }
            ensure_parent(out);
            csv::write(out, header, table);
            run.outputs.push_back(out);
            run.details["undefined_entries"] = (s.defined.array() == false).count();
        };
    });

    // pca ---------------------------------------------------------------------
    auto* pca = app.add_subcommand("pca", "Principal component analysis of a simulation bundle");
    std::string pca_bundle;
    pca->add_option("--bundle", pca_bundle, "Bundle CSV")->required();
    pca->add_option("--out", out, "Output directory")->required();
    pca->callback([&] {
        action = [&] {
            Eigen::VectorXd times;
            const Eigen::MatrixXd bundle = read_bundle_checked(pca_bundle, run, times);
            const PcaModel m = pca_fit(bundle);
            fs::create_directories(out);
            std::vector<std::string> header;
            for (int c = 0; c < m.components(); ++c) header.push_back("pc" + std::to_string(c + 1));
            csv::write(out / "pca_basis.csv", header, m.basis);
            const Eigen::VectorXd ratio = m.explained_ratio();
            Eigen::MatrixXd var(m.components(), 3);
            for (int c = 0; c < m.components(); ++c) var.row(c) << c + 1, m.variances[c], ratio[c];
            csv::write(out / "pca_variance.csv", {"component", "variance", "explained_ratio"}, var);
            csv::write_curve(out / "pca_mean.csv", times, m.mean_curve);
            run.outputs = {out / "pca_basis.csv", out / "pca_variance.csv", out / "pca_mean.csv"};
            run.details = {{"components", m.components()}, {"warning", m.warning}};
            if (!m.warning.empty()) std::cerr << "warning: " << m.warning << "\n";
        };
    });

    // train -------------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Train a strategy's surrogate bank");
    std::string tr_strategy, tr_design, tr_bundle, tr_test_design, tr_test_bundle;
    TrainOptions tr_opts;
    ObservedOptions tr_obs;
    train->add_option("--strategy", tr_strategy, "Strategy id (" + valid_strategy_list() + ")")->required();
    train->add_option("--design", tr_design, "Training design CSV")->required();
    train->add_option("--bundle", tr_bundle, "Training bundle CSV")->required();
    train->add_option("--test-design", tr_test_design, "Optional test design CSV for test MRP");
    train->add_option("--test-bundle", tr_test_bundle, "Optional test bundle CSV for test MRP");
    train->add_option("--out", out, "Bank output directory")->required();
    tr_opts.add(train);
    tr_obs.add(train, false);
    train->callback([&] {
        action = [&] {
            const StrategyId id = strategy_from_string(tr_strategy);
            const Eigen::MatrixXd design = read_design_checked(tr_design, run);
            Eigen::VectorXd times;
            const Eigen::MatrixXd bundle = read_bundle_checked(tr_bundle, run, times);
            const TimeGrid grid(times);
            BankTrainOptions opts;
            opts.train = tr_opts.c;
            opts.train.seed = run.seed;
            opts.jobs = run.jobs;
            SurrogateBank bank;
            if (strategy_config(id, grid.size()).family == StrategyFamily::Error) {
                if (tr_obs.path.empty()) throw ConfigError(tr_strategy + " needs --observed");
                bank = train_error_bank(id, tr_obs.read(run), design, bundle, grid, opts);
            } else {
                bank = train_bank(strategy_config(id, grid.size()), design, bundle, grid, opts);
            }
            if (!tr_test_design.empty() != !tr_test_bundle.empty())
                throw ConfigError("--test-design and --test-bundle go together");
            if (!tr_test_design.empty()) {
                Eigen::VectorXd ttimes;
                const Eigen::MatrixXd td = read_design_checked(tr_test_design, run);
                const Eigen::MatrixXd tb = read_bundle_checked(tr_test_bundle, run, ttimes);
                evaluate_bank(bank, td, tb);
            }
            if (static_cast<int>(bank.nets.size()) != bank.strategy.net_count())
                throw Error("bank has the wrong number of nets");
            save_bank(bank, out);
            run.outputs.push_back(out / "bank.json");
            json nets = json::array();
            for (std::size_t i = 0; i < bank.nets.size(); ++i)
                nets.push_back({{"output_id", bank.nets[i].provenance.output_id},
                                {"chosen_h", bank.reports[i].chosen_h},
                                {"train_mrp", bank.reports[i].train_mrp},
                                {"test_mrp", bank.reports[i].test_mrp < 0 ? json(nullptr)
                                                                         : json(bank.reports[i].test_mrp)}});
            run.details = {{"strategy", tr_strategy}, {"nets", nets}};
        };
    });

    // calibrate / identify ---------------------------------------------------------
    struct CalibrateOptions {
        std::string bank, test_design, test_bundle;
        ObservedOptions obs;
        OptimizerOptions opt;
        ThermalOptions thermal;
    };
    CalibrateOptions cal, idn;
    auto add_calibrate = [&](CLI::App* sub, CalibrateOptions& o, bool with_optimizer) {
        sub->add_option("--bank", o.bank, "Bank directory")->required();
        sub->add_option("--test-design", o.test_design, "Verification: test design CSV");
        sub->add_option("--test-bundle", o.test_bundle, "Verification: test bundle CSV");
        sub->add_option("--out", out, "Report JSON")->required();
        o.obs.add(sub, false);
        o.thermal.add(sub);
        if (with_optimizer) o.opt.add(sub);
    };
    auto calibrate_action = [&](CalibrateOptions& o, bool inverse_only) {
        SurrogateBank bank = load_bank(o.bank);
        run.inputs.push_back(fs::path(o.bank) / "bank.json");
        const bool inverse = bank.strategy.family == StrategyFamily::Inverse;
        if (inverse_only && !inverse)
            throw ConfigError("identify needs an inverse-strategy bank; " + to_string(bank.strategy.id) +
                              " is calibrated with 'calibrate'");
        if (!inverse_only && inverse)
            throw ConfigError(to_string(bank.strategy.id) + " is an inverse strategy; use 'identify'");
        CalibrationSettings settings;
        settings.optimizer = o.opt.c;
        settings.optimizer.seed = run.seed;
        settings.thermal = o.thermal.make();
        settings.jobs = run.jobs;
        json report;
        if (!o.test_design.empty() || !o.test_bundle.empty()) {
            if (o.test_design.empty() || o.test_bundle.empty())
                throw ConfigError("--test-design and --test-bundle go together");
            Eigen::VectorXd times;
            const Eigen::MatrixXd td = read_design_checked(o.test_design, run);
            const Eigen::MatrixXd tb = read_bundle_checked(o.test_bundle, run, times);
            const VerificationReport v = verify(bank, td, tb, settings);
            report = to_json(v);
            fs::path samples = out;
            samples.replace_extension(".samples.csv");
            ensure_parent(samples);
            write_samples_csv(samples, v);
            run.outputs.push_back(samples);
        } else {
            if (o.obs.path.empty()) throw ConfigError("give --observed, or --test-design with --test-bundle");
            const ValidationReport v = validate(bank, o.obs.read(run), settings);
            report = to_json(v);
            if (!v.resample_warning.empty()) std::cerr << "warning: " << v.resample_warning << "\n";
            fs::path curve = out;
            curve.replace_extension(".fit.csv");
            ensure_parent(curve);
            csv::write_curve(curve, bank.grid_times, v.fitted_curve);
            run.outputs.push_back(curve);
        }
        write_json(out, report);
        run.outputs.push_back(out);
        run.details = {{"strategy", to_string(bank.strategy.id)}, {"response_error", report["response_error"]}};
    };
    auto* calibrate = app.add_subcommand("calibrate", "Calibrate with a forward or error bank and the optimizer");
    add_calibrate(calibrate, cal, true);
    calibrate->callback([&] { action = [&] { calibrate_action(cal, false); }; });
    auto* identify = app.add_subcommand("identify", "Identify parameters by direct evaluation of an inverse bank");
    add_calibrate(identify, idn, false);
    identify->callback([&] { action = [&] { calibrate_action(idn, true); }; });

    // direct ------------------------------------------------------------------
    auto* direct = app.add_subcommand("direct", "Calibrate with the simulator in the loop (Direct1 / Direct2)");
    ObservedOptions dir_obs;
    OptimizerOptions dir_opt;
    ThermalOptions dir_thermal;
    GridOptions dir_grid;
    int dir_error = 1;
    double dir_spread = 0.0;
    dir_obs.add(direct, true);
    dir_opt.add(direct);
    dir_thermal.add(direct);
    dir_grid.add(direct);
    direct->add_option("--error", dir_error, "Error function: 1 (squares) or 2 (absolute values)")
        ->check(CLI::IsMember({1, 2}))
        ->capture_default_str();
    direct->add_option("--spread", dir_spread, "Response spread for the error normalization (default: observed range)");
    direct->add_option("--out", out, "Report JSON")->required();
    direct->callback([&] {
        action = [&] {
            const ObservedCurve obs = dir_obs.read(run);
            const TimeGrid grid = dir_grid.make();
            CalibrationSettings settings;
            settings.optimizer = dir_opt.c;
            settings.optimizer.seed = run.seed;
            settings.thermal = dir_thermal.make();
            settings.jobs = run.jobs;
            double spread = dir_spread;
            if (!(spread > 0.0)) {
                const Eigen::VectorXd v = resample_to_grid(obs, grid).values;
                spread = v.maxCoeff() - v.minCoeff();
            }
            const ValidationReport v = validate_direct(dir_error, obs, grid, spread, settings);
            if (!v.resample_warning.empty()) std::cerr << "warning: " << v.resample_warning << "\n";
            json report = to_json(v);
            report["response_spread"] = spread;
            write_json(out, report);
            fs::path curve = out;
            curve.replace_extension(".fit.csv");
            csv::write_curve(curve, grid.times(), v.fitted_curve);
            run.outputs = {out, curve};
            run.details = {{"response_error", v.response_error}};
        };
    });

    // report ------------------------------------------------------------------
    auto* report = app.add_subcommand("report", "Merge calibration/pipeline reports into one comparison table");
    std::vector<std::string> rep_inputs;
    report->add_option("--inputs", rep_inputs, "Report JSON files (calibrate, identify, direct or pipeline)")
        ->required()
        ->expected(1, -1);
    report->add_option("--out", out, "Output CSV; a JSON twin is written next to it")->required();
    report->callback([&] {
        action = [&] {
            std::ostringstream csvtext;
            csvtext << "source,strategy,label,kind,v1,v2,v3,v4,response_error\n";
            json rows = json::array();
            for (const auto& path : rep_inputs) {
                run.inputs.push_back(path);
                std::ifstream in(path, std::ios::binary);
                if (!in) throw ParseError("cannot read " + path);
                json doc;
                try {
                    doc = json::parse(in);
                } catch (const json::parse_error& e) {
                    throw ParseError(path + ": malformed JSON: " + e.what());
                }
                auto emit = [&](const json& r, const std::string& kind, const json& v) {
                    json row = {{"source", path},
                                {"strategy", r.value("strategy", "")},
                                {"label", r.value("label", "")},
                                {"kind", kind},
                                {"values", v},
                                {"response_error", r.value("response_error", 0.0)}};
                    rows.push_back(row);
                    csvtext << path << "," << row["strategy"].get<std::string>() << ","
                            << row["label"].get<std::string>() << "," << kind;
                    for (const auto& x : v) csvtext << "," << (x.is_number() ? csv::format_double(x.get<double>()) : "");
                    csvtext << "," << csv::format_double(row["response_error"].get<double>()) << "\n";
                };
                const json& body = doc.contains("verification") ? doc["verification"]
                                   : doc.contains("validation") ? doc["validation"]
                                                                : doc;
                if (body.contains("parameter_error"))
                    emit(body, "parameter_error_percent", body["parameter_error"]);
                else if (body.contains("p_hat"))
                    emit(body, "p_hat", body["p_hat"]);
                else
                    throw ParseError(path + ": not a calibration report");
            }
            ensure_parent(out);
            std::ofstream o(out, std::ios::binary);
            if (!o) throw DataError("cannot write " + out.string());
            o << csvtext.str();
            fs::path js = out;
            js.replace_extension(".json");
            write_json(js, rows);
            run.outputs = {out, js};
            run.details["rows"] = rows.size();
        };
    });

    // pipeline ------------------------------------------------------------------
    auto* pipe = app.add_subcommand("pipeline", "doe -> simulate -> train -> verify for one strategy");
    std::string pipe_strategy;
    PipelineConfig pcfg;
    TrainOptions pipe_train;
    OptimizerOptions pipe_opt;
    ThermalOptions pipe_thermal;
    pipe->add_option("--strategy", pipe_strategy, "Strategy id (" + valid_strategy_list() + ")")->required();
    pipe->add_option("--n-train", pcfg.n_train, "Training simulations")->capture_default_str();
    pipe->add_option("--n-test", pcfg.n_test, "Test simulations")->capture_default_str();
    pipe->add_option("--lhs-iterations", pcfg.lhs_iterations, "LHS swap proposals")->capture_default_str();
    pipe->add_option("--out", out, "Output directory")->required();
    pipe_train.add(pipe);
    pipe_opt.add(pipe);
    pipe_thermal.add(pipe);
    pipe->callback([&] {
        action = [&] {
            pcfg.strategy = strategy_from_string(pipe_strategy);
            pcfg.seed = run.seed;
            pcfg.train = pipe_train.c;
            pcfg.optimizer = pipe_opt.c;
            pcfg.thermal = pipe_thermal.make();
            pcfg.jobs = run.jobs;
            const PipelineResult r = run_pipeline(pcfg);
            write_pipeline_outputs(r, out);
            run.outputs = {out / "report.json", out / "design_train.csv", out / "design_test.csv",
                           out / "bank" / "bank.json"};
            if (r.verification) run.outputs.push_back(out / "samples.csv");
            if (r.observed) run.outputs.push_back(out / "observed.csv");
            run.details = {{"strategy", pipe_strategy}};
            if (r.verification)
                run.details["verification"] = {{"parameter_error", vec4_json(r.verification->parameter_error)},
                                               {"response_error", r.verification->response_error}};
            if (r.validation) run.details["validation"] = {{"response_error", r.validation->response_error}};
        };
    });

    // synth -------------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic pseudo-experimental curve");
    std::vector<double> syn_p;
    SyntheticSpec syn;
    ThermalOptions syn_thermal;
    synth->add_option("--p", syn_p, "Four standardized parameters")->expected(4)->required();
    synth->add_option("--sigma", syn.noise_sigma, "Additive noise standard deviation")->capture_default_str();
    synth->add_option("--shift", syn.time_shift, "Time shift [h] between the experiment clock and model time")
        ->capture_default_str();
    synth->add_option("--points", syn.points, "Number of observations")->capture_default_str();
    synth->add_option("--first", syn.first_time, "First observation time [h]")->capture_default_str();
    synth->add_option("--last", syn.last_time, "Last observation time [h]")->capture_default_str();
    synth->add_option("--label", syn.label, "Curve label");
    synth->add_option("--out", out, "Output CSV (time_h,alpha)")->required();
    syn_thermal.add(synth);
    synth->callback([&] {
        action = [&] {
            syn.p = StandardizedParams(syn_p[0], syn_p[1], syn_p[2], syn_p[3]);
            syn.seed = run.seed;
            const ObservedCurve c = synthetic_observation(syn, syn_thermal.make());
            ensure_parent(out);
            write_observed(out, c);
            run.outputs.push_back(out);
            run.details = {{"p", vec4_json(syn.p.p)},
                           {"sigma", syn.noise_sigma},
                           {"time_shift", syn.time_shift},
                           {"points", syn.points}};
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    run.command = app.get_subcommands().front()->get_name();
    run.jobs = std::max(1, jobs);
    if (seed_flag) {
        run.seed = *seed_flag;
        const bool on_command_line = std::any_of(argv + 1, argv + argc, [](const char* a) {
            return std::string_view(a) == "--seed" || std::string_view(a).starts_with("--seed=");
        });
        run.seed_source = on_command_line ? "flag" : "config";
    } else if (const char* env = std::getenv("CALIBKIT_SEED")) {
        try {
            std::size_t used = 0;
            run.seed = std::stoull(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument(env);
        } catch (const std::exception&) {
            std::cerr << "error: CALIBKIT_SEED must be a non-negative integer\n";
            return 2;
        }
        run.seed_source = "CALIBKIT_SEED";
    } else {
        run.seed_source = "default";
    }

    const auto t0 = std::chrono::steady_clock::now();
    int code = 0;
    std::string message;
    try {
        action();
    } catch (const Error& e) {
        code = e.exit_code();
        message = e.what();
    } catch (const std::exception& e) {
        code = 1;
        message = e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (code != 0) std::cerr << "error: " << message << "\n";

    fs::path manifest = manifest_flag;
    if (manifest.empty()) {
        const bool dir_output = run.command == "pca" || run.command == "train" || run.command == "pipeline";
        manifest = dir_output ? out / "manifest.json" : fs::path(out.string() + ".manifest.json");
    }
    json inputs = json::array(), outputs = json::array();
    for (const auto& p : run.inputs) inputs.push_back({{"path", p.string()}, {"fnv1a", file_hash(p)}});
    for (const auto& p : run.outputs) outputs.push_back({{"path", p.string()}, {"fnv1a", file_hash(p)}});
    std::vector<std::string> args(argv, argv + argc);
    const json doc = {{"tool", "calibkit"},
                      {"version", kVersion},
                      {"command", run.command},
                      {"argv", args},
                      {"config", app.config_to_str(true, false)},
                      {"seed", run.seed},
                      {"seed_source", run.seed_source},
                      {"jobs", run.jobs},
                      {"inputs", inputs},
                      {"outputs", outputs},
                      {"details", run.details},
                      {"exit_code", code},
                      {"error", message},
                      {"wall_seconds", seconds}};
    try {
        write_json(manifest, doc);
    } catch (const std::exception& e) {
        std::cerr << "error: cannot write manifest: " << e.what() << "\n";
        if (code == 0) code = 3;
    }
    return code;
}
