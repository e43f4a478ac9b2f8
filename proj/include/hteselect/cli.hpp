#pragma once

#include "hteselect/config.hpp"
#include "hteselect/csv.hpp"
#include "hteselect/harness.hpp"
#include "hteselect/version.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace hteselect {

struct CliOverrides {
    std::optional<int> workers;
    std::optional<std::uint64_t> master_seed;
    std::optional<std::string> output_dir;
};

inline CovariatePool resolve_covariates(const RunConfig& cfg) {
    if (cfg.covariates.csv_path) return load_covariates(*cfg.covariates.csv_path);
    const SyntheticCovariateConfig& synth = *cfg.covariates.synthetic;
    return synth_covariate_pool(synth.pool_size, synth.continuous, synth.binary,
                                Seed(cfg.master_seed).child("covariates"));
}

// ---------------------------------------------------------------------------
// result tables
// ---------------------------------------------------------------------------

inline void write_learners_csv(const std::string& path, const PlanRunResult& run) {
    CsvWriter csv(path);
    csv.row({"setting", "rho", "n", "seed", "strategy", "method", "pehe", "factual_rmse"});
    for (std::size_t i = 0; i < run.keys.size(); ++i) {
        if (!run.cells[i]) continue;
        const CellResult& cell = *run.cells[i];
        for (const CandidateResult& cand : cell.candidates)
            csv.row({std::string(1, cell.key.setting), fmt_real(cell.key.rho),
                     std::to_string(cell.key.size.trainval), std::to_string(cell.key.seed),
                     to_string(cand.id.strategy), to_string(cand.id.method), fmt_opt(cand.pehe),
                     fmt_opt(cand.factual_rmse)});
    }
}

inline void write_selectors_csv(const std::string& path, const ExperimentPlan& plan,
                                const PlanRunResult& run) {
    CsvWriter csv(path);
    csv.row({"setting", "rho", "n", "seed", "criterion", "selected_strategy", "selected_method",
             "selected_pehe", "delta_pehe_fact"});
    const int fact_idx = factual_criterion_index(plan);
    for (std::size_t i = 0; i < run.keys.size(); ++i) {
        if (!run.cells[i]) continue;
        const CellResult& cell = *run.cells[i];
        std::optional<double> fact_pehe;
        if (fact_idx >= 0) {
            int choice = cell.criteria[static_cast<std::size_t>(fact_idx)].table.selected_index;
            fact_pehe = cell.candidates[static_cast<std::size_t>(choice)].pehe;
        }
        for (const CriterionResult& crit : cell.criteria) {
            const CandidateResult& chosen =
                cell.candidates[static_cast<std::size_t>(crit.table.selected_index)];
            std::optional<double> delta;
            if (fact_pehe && chosen.pehe) delta = delta_pehe_fact(*chosen.pehe, *fact_pehe);
            csv.row({std::string(1, cell.key.setting), fmt_real(cell.key.rho),
                     std::to_string(cell.key.size.trainval), std::to_string(cell.key.seed),
                     crit.spec.name(), to_string(chosen.id.strategy), to_string(chosen.id.method),
                     fmt_opt(chosen.pehe), fmt_opt(delta)});
        }
    }
}

inline void write_congeniality_csv(const std::string& path, const ExperimentPlan& plan,
                                   const PlanRunResult& run) {
    CsvWriter csv(path);
    csv.row({"analysis", "pool_method", "criterion", "group", "proportion", "conditioning_cells"});
    auto emit = [&](const std::vector<CongenialityRow>& rows) {
        for (const CongenialityRow& row : rows)
            csv.row({row.analysis, row.filter, row.criterion, row.group, fmt_real(row.proportion),
                     std::to_string(row.conditioning_cells)});
    };
    emit(congeniality_stats(plan, run, GroupBy::Strategy, MlMethod::GB));
    emit(congeniality_stats(plan, run, GroupBy::Strategy, MlMethod::LR));
    emit(congeniality_stats(plan, run, GroupBy::Method));
}

inline void write_aggregates_csv(const std::string& path, const ExperimentPlan& plan,
                                 const PlanRunResult& run) {
    CsvWriter csv(path);
    csv.row({"setting", "rho", "n", "key", "metric", "mean", "se", "count"});
    for (const AggregateRow& row : aggregate(plan, run))
        csv.row({std::string(1, row.setting), fmt_real(row.rho), std::to_string(row.n), row.key,
                 row.metric, fmt_real(row.mean), fmt_opt(row.se), std::to_string(row.count)});
}

// One CSV per split with the simulated data and its ground truth.
inline void dump_datasets(const std::string& dir, const ExperimentPlan& plan, const CovariatePool& pool,
                          std::uint64_t master_seed) {
    std::filesystem::create_directories(dir);
    for (const CellKey& key : plan_cells(plan)) {
        DgpConfig cfg;
        cfg.rho = key.rho;
        cfg.xi = setting_confounded(key.setting) ? plan.xi_confounded : 0.0;
        cfg.input_repr = setting_repr(key.setting);
        cfg.n_trainval = key.size.trainval;
        cfg.n_test = key.size.test;
        cfg.noise_sd = plan.noise_sd;
        cfg.base_coef_prob = plan.base_coef_prob;
        cfg.interaction_coef_prob = plan.interaction_coef_prob;
        cfg.intercept_c = plan.intercept_c;
        cfg.seed =
            Seed(master_seed).child("dgp", key.rho, key.size.trainval, key.size.test, key.seed).value();
        SimulatedDataset sim = generate_dataset(cfg, pool);

        auto write_split = [&](const char* split, const Dataset& ds, const GroundTruth& truth) {
            std::string stem = std::string(1, key.setting) + "_rho" + fmt_real(key.rho) + "_n" +
                               std::to_string(key.size.trainval) + "_seed" + std::to_string(key.seed) +
                               "_" + split + ".csv";
            CsvWriter csv((std::filesystem::path(dir) / stem).string());
            std::vector<std::string> header{"row_id"};
            for (int j = 0; j < ds.d(); ++j) header.push_back("x_" + std::to_string(j));
            for (const char* col : {"a", "y", "tau_true", "mu0_true", "mu1_true", "pi_true"})
                header.emplace_back(col);
            csv.row(header);
            for (int i = 0; i < ds.n(); ++i) {
                std::vector<std::string> row{std::to_string(i)};
                for (int j = 0; j < ds.d(); ++j) row.push_back(fmt_real(ds.X(i, j)));
                row.push_back(fmt_real(ds.A(i)));
                row.push_back(fmt_real(ds.Y(i)));
                row.push_back(fmt_real(truth.tau(i)));
                row.push_back(fmt_real(truth.mu0(i)));
                row.push_back(fmt_real(truth.mu1(i)));
                row.push_back(fmt_real(truth.pi(i)));
                csv.row(row);
            }
        };
        write_split("train", sim.train, sim.truth_train);
        write_split("val", sim.val, sim.truth_val);
        write_split("test", sim.test, sim.truth_test);
    }
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

struct RunArtifacts {
    int exit_code = 0;
    PlanRunResult run;
};

inline RunArtifacts execute_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    auto start = std::chrono::steady_clock::now();
    RunArtifacts artifacts;

    CovariatePool pool = resolve_covariates(cfg);
    artifacts.run = run_plan(cfg.plan, pool, cfg.master_seed, cfg.workers, &err);

    std::filesystem::create_directories(cfg.output_dir);
    auto path = [&](const char* name) { return (std::filesystem::path(cfg.output_dir) / name).string(); };
    write_learners_csv(path("learners.csv"), artifacts.run);
    write_selectors_csv(path("selectors.csv"), cfg.plan, artifacts.run);
    write_congeniality_csv(path("congeniality.csv"), cfg.plan, artifacts.run);
    write_aggregates_csv(path("aggregates.csv"), cfg.plan, artifacts.run);
    if (cfg.dump_datasets)
        dump_datasets((std::filesystem::path(cfg.output_dir) / "datasets").string(), cfg.plan, pool,
                      cfg.master_seed);

    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["master_seed"] = cfg.master_seed;
    manifest["config"] = config_to_json(cfg);
    manifest["wall_time_seconds"] = wall;
    manifest["status"] = artifacts.run.failures.empty() ? "ok" : "partial";
    manifest["cell_failures"] = nlohmann::json::array();
    for (const CellFailure& f : artifacts.run.failures)
        manifest["cell_failures"].push_back(f.key.label() + ": " + f.message);
    manifest["candidate_failures"] = artifacts.run.candidate_failures;
    std::ofstream mf(path("manifest.json"), std::ios::binary);
    mf << manifest.dump(2) << "\n";

    int completed = 0;
    for (const auto& cell : artifacts.run.cells) completed += cell.has_value() ? 1 : 0;
    out << "cells: " << completed << "/" << artifacts.run.keys.size() << " completed, results in "
        << cfg.output_dir << "\n";
    if (!artifacts.run.failures.empty()) {
        err << artifacts.run.failures.size() << " cell(s) failed; partial outputs preserved\n";
        artifacts.exit_code = 2;
    }
    return artifacts;
}

inline std::optional<RunConfig> load_run_config(const std::string& config_path, ConfigReport& report,
                                                const CliOverrides& overrides = {}) {
    std::ifstream in(config_path);
    if (!in) {
        report.errors.push_back("cannot open config file: " + config_path);
        return std::nullopt;
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        report.errors.push_back(std::string("config is not valid JSON: ") + e.what());
        return std::nullopt;
    }
    RunConfig cfg = parse_run_config(j, report);
    if (overrides.workers) cfg.workers = *overrides.workers;
    if (overrides.master_seed) cfg.master_seed = *overrides.master_seed;
    if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;
    if (cfg.workers < 1) report.errors.push_back("workers: must be at least 1");
    if (!report.ok()) return std::nullopt;
    return cfg;
}

inline void print_resolved_plan(const RunConfig& cfg, std::ostream& out) {
    out << "settings:";
    for (char s : cfg.plan.settings) out << " " << s;
    out << "\nrho values:";
    for (double r : cfg.plan.rho_values) out << " " << r;
    out << "\nsample sizes:";
    for (const SampleSize& s : cfg.plan.sizes) out << " " << s.trainval << "+" << s.test;
    out << "\nseeds: " << cfg.plan.seeds;
    out << "\ncandidate pool: "
        << (cfg.plan.pool == CandidatePool::Full ? "full (10)" : "indirect only (6)");
    out << "\ncriteria (" << cfg.plan.criteria.size() << "):";
    for (const CriterionSpec& c : cfg.plan.criteria) out << " " << c.name();
    out << "\ncovariates: ";
    if (cfg.covariates.csv_path)
        out << *cfg.covariates.csv_path;
    else
        out << "synthetic pool " << cfg.covariates.synthetic->pool_size << " ("
            << cfg.covariates.synthetic->continuous << " continuous + "
            << cfg.covariates.synthetic->binary << " binary)";
    out << "\nmaster seed: " << cfg.master_seed;
    out << "\nworkers: " << cfg.workers;
    out << "\noutput: " << cfg.output_dir << "\n";
    out << "cells: "
        << cfg.plan.settings.size() * cfg.plan.rho_values.size() * cfg.plan.sizes.size() *
               static_cast<std::size_t>(cfg.plan.seeds)
        << "\n";
}

inline int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err) {
    ConfigReport report;
    std::optional<RunConfig> cfg = load_run_config(config_path, report);
    for (const std::string& w : report.warnings) out << "warning: " << w << "\n";
    if (!cfg) {
        for (const std::string& e : report.errors) err << "error: " << e << "\n";
        return 1;
    }
    print_resolved_plan(*cfg, out);
    return 0;
}

inline int cmd_run(const std::string& config_path, const CliOverrides& overrides, std::ostream& out,
                   std::ostream& err) {
    ConfigReport report;
    std::optional<RunConfig> cfg = load_run_config(config_path, report, overrides);
    for (const std::string& w : report.warnings) out << "warning: " << w << "\n";
    if (!cfg) {
        for (const std::string& e : report.errors) err << "error: " << e << "\n";
        return 1;
    }
    try {
        return execute_run(*cfg, out, err).exit_code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace hteselect
