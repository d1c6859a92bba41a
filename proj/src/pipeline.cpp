#include "calibkit/pipeline.hpp"

#include <fstream>

#include "calibkit/csv.hpp"
#include "calibkit/errors.hpp"
#include "calibkit/random.hpp"

namespace calibkit {

namespace {

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const TrainingDivergence& e) {
        throw TrainingDivergence(std::string(name) + ": " + e.what(), e.iteration());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(name) + ": " + e.what(), e.residual());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const ShapeError& e) {
        throw ShapeError(std::string(name) + ": " + e.what());
    } catch (const DomainError& e) {
        throw DomainError(std::string(name) + ": " + e.what());
    }
}

nlohmann::json design_json(const Design& d) {
    return {{"kind", to_string(d.kind)},
            {"seed", d.seed},
            {"rows", d.points.rows()},
            {"discrepancy", d.discrepancy},
            {"initial_discrepancy", d.initial_discrepancy},
            {"hash", matrix_hash(d.points)}};
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config) {
    if (config.n_train < 2 || config.n_test < 1) throw ConfigError("pipeline needs n_train >= 2 and n_test >= 1");
    const StrategyConfig strategy = strategy_config(config.strategy);

    PipelineResult out;
    out.train_design = stage("doe", [&] {
        return generate_lhs(config.n_train, 4, derive_seed(config.seed, 1), config.lhs_iterations);
    });
    out.test_design = stage("doe", [&] {
        return generate_lhs(config.n_test, 4, derive_seed(config.seed, 2), config.lhs_iterations);
    });
    out.bundle_train =
        stage("simulate", [&] { return simulate_bundle(out.train_design.points, out.grid, config.thermal, config.jobs); });
    out.bundle_test =
        stage("simulate", [&] { return simulate_bundle(out.test_design.points, out.grid, config.thermal, config.jobs); });

    BankTrainOptions opts;
    opts.train = config.train;
    opts.train.seed = derive_seed(config.seed, 3);
    opts.jobs = config.jobs;
    opts.doe_seed = out.train_design.seed;

    CalibrationSettings settings;
    settings.optimizer = config.optimizer;
    settings.optimizer.seed = derive_seed(config.seed, 4);
    settings.thermal = config.thermal;
    settings.jobs = config.jobs;

    if (strategy.family == StrategyFamily::Error) {
        ObservedCurve obs;
        obs.times = out.grid.times();
        obs.values = out.bundle_test.row(0).transpose();
        obs.label = "test_point_1";
        out.observed = obs;
        out.bank = stage("train", [&] {
            return train_error_bank(config.strategy, obs, out.train_design.points, out.bundle_train, out.grid, opts);
        });
        stage("evaluate", [&] { return evaluate_bank(out.bank, out.test_design.points, out.bundle_test); });
        out.validation = stage("calibrate", [&] { return validate(out.bank, obs, settings); });
    } else {
        out.bank = stage("train", [&] {
            return train_bank(strategy, out.train_design.points, out.bundle_train, out.grid, opts);
        });
        stage("evaluate", [&] { return evaluate_bank(out.bank, out.test_design.points, out.bundle_test); });
        out.verification =
            stage("verify", [&] { return verify(out.bank, out.test_design.points, out.bundle_test, settings); });
    }

    nlohmann::json nets = nlohmann::json::array();
    const auto ids = strategy.output_ids();
    for (std::size_t i = 0; i < out.bank.nets.size(); ++i) {
        const auto& rep = out.bank.reports[i];
        nets.push_back({{"output_id", ids[i]},
                        {"chosen_h", rep.chosen_h},
                        {"train_mrp", rep.train_mrp},
                        {"test_mrp", rep.test_mrp}});
    }
    auto& r = out.report;
    r["strategy"] = to_string(config.strategy);
    r["seed"] = config.seed;
    r["n_train"] = config.n_train;
    r["n_test"] = config.n_test;
    r["train_config"] = to_json(opts.train);
    r["optimizer"] = {{"pool_rate", settings.optimizer.pool_rate},
                      {"radioactivity", settings.optimizer.radioactivity},
                      {"cross_limit", settings.optimizer.cross_limit},
                      {"budget", settings.optimizer.budget},
                      {"seed", settings.optimizer.seed}};
    r["designs"] = {{"train", design_json(out.train_design)}, {"test", design_json(out.test_design)}};
    r["bundle_hashes"] = {{"train", matrix_hash(out.bundle_train)}, {"test", matrix_hash(out.bundle_test)}};
    r["nets"] = nets;
    if (out.verification) r["verification"] = to_json(*out.verification);
    if (out.validation) {
        r["validation"] = to_json(*out.validation);
        const Vector4 p_true = out.test_design.points.row(0).transpose();
        r["validation"]["p_true"] = {p_true[0], p_true[1], p_true[2], p_true[3]};
    }
    return out;
}

void write_pipeline_outputs(const PipelineResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    csv::write_design(dir / "design_train.csv", result.train_design.points);
    csv::write_design(dir / "design_test.csv", result.test_design.points);
    save_bank(result.bank, dir / "bank");
    if (result.verification) write_samples_csv(dir / "samples.csv", *result.verification);
    if (result.observed) write_observed(dir / "observed.csv", *result.observed);
    std::ofstream out(dir / "report.json", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "report.json").string());
    out << result.report.dump(2) << "\n";
}

}  // namespace calibkit
