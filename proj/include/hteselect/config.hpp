#pragma once

#include "hteselect/criteria.hpp"
#include "hteselect/harness.hpp"

#include <json.hpp>

#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

namespace hteselect {

struct SyntheticCovariateConfig {
    int pool_size = 2000;
    int continuous = 23;
    int binary = 32;
};

struct CovariateConfig {
    std::optional<std::string> csv_path;
    std::optional<SyntheticCovariateConfig> synthetic;
};

struct RunConfig {
    ExperimentPlan plan;
    CovariateConfig covariates;
    std::string output_dir = "results";
    int workers = 1;
    std::uint64_t master_seed = 42;
    bool dump_datasets = false;
};

struct ConfigReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

// Environment fallback for the covariate file.
inline constexpr const char* kCovariateEnvVar = "HTE_SELECT_COVARIATES";

namespace detail {

inline bool expect_type(const nlohmann::json& j, const char* field, ConfigReport& report,
                        bool (nlohmann::json::*pred)() const) {
    if ((j.*pred)()) return true;
    report.errors.push_back(std::string("field '") + field + "' has the wrong type");
    return false;
}

}  // namespace detail

// Parse and semantically validate; all problems are reported with field
// names rather than thrown.
inline RunConfig parse_run_config(const nlohmann::json& j, ConfigReport& report) {
    RunConfig cfg;
    cfg.plan.criteria = all_criteria();

    for (auto it = j.begin(); it != j.end(); ++it) {
        static const std::vector<std::string> known = {
            "settings",      "rho_values", "sample_sizes", "seeds",        "candidate_pool",
            "criteria",      "master_seed", "workers",     "output_dir",   "covariates",
            "dgp",           "dump_datasets"};
        bool recognized = false;
        for (const std::string& k : known) recognized = recognized || k == it.key();
        if (!recognized) report.warnings.push_back("unknown field '" + it.key() + "' ignored");
    }

    if (j.contains("settings")) {
        cfg.plan.settings.clear();
        if (detail::expect_type(j["settings"], "settings", report, &nlohmann::json::is_array)) {
            for (const auto& s : j["settings"]) {
                std::string v = s.is_string() ? s.get<std::string>() : std::string();
                if (v.size() != 1 || v[0] < 'A' || v[0] > 'D')
                    report.errors.push_back("settings: entries must be one of \"A\"..\"D\"");
                else
                    cfg.plan.settings.push_back(v[0]);
            }
        }
        if (cfg.plan.settings.empty()) report.errors.push_back("settings: list must be non-empty");
    }

    if (j.contains("rho_values")) {
        cfg.plan.rho_values.clear();
        if (detail::expect_type(j["rho_values"], "rho_values", report, &nlohmann::json::is_array)) {
            for (const auto& r : j["rho_values"]) {
                double v = r.is_number() ? r.get<double>() : -1.0;
                if (v < 0.0 || v > 1.0)
                    report.errors.push_back("rho_values: rho must lie in [0,1]");
                else
                    cfg.plan.rho_values.push_back(v);
            }
        }
        if (cfg.plan.rho_values.empty()) report.errors.push_back("rho_values: list must be non-empty");
    }

    if (j.contains("sample_sizes")) {
        cfg.plan.sizes.clear();
        if (detail::expect_type(j["sample_sizes"], "sample_sizes", report, &nlohmann::json::is_array)) {
            for (const auto& s : j["sample_sizes"]) {
                if (!s.is_object() || !s.contains("train_val")) {
                    report.errors.push_back("sample_sizes: entries need a 'train_val' field");
                    continue;
                }
                SampleSize size;
                size.trainval = s["train_val"].get<int>();
                size.test = s.contains("test") ? s["test"].get<int>() : size.trainval / 2;
                if (size.trainval < 30 || size.test < 30)
                    report.errors.push_back("sample_sizes: train_val and test must be at least 30");
                else
                    cfg.plan.sizes.push_back(size);
            }
        }
        if (cfg.plan.sizes.empty()) report.errors.push_back("sample_sizes: list must be non-empty");
    }

    if (j.contains("seeds")) {
        int seeds = j["seeds"].is_number_integer() ? j["seeds"].get<int>() : 0;
        if (seeds < 1)
            report.errors.push_back("seeds: must be a positive integer");
        else
            cfg.plan.seeds = seeds;
        if (seeds == 1) report.warnings.push_back("seeds: SE unavailable with a single seed");
    }

    if (j.contains("candidate_pool")) {
        std::string pool = j["candidate_pool"].is_string() ? j["candidate_pool"].get<std::string>() : "";
        if (pool == "full")
            cfg.plan.pool = CandidatePool::Full;
        else if (pool == "indirect_only")
            cfg.plan.pool = CandidatePool::IndirectOnly;
        else
            report.errors.push_back("candidate_pool: must be \"full\" or \"indirect_only\"");
    }

    if (j.contains("criteria") && !(j["criteria"].is_string() && j["criteria"] == "all")) {
        cfg.plan.criteria.clear();
        if (detail::expect_type(j["criteria"], "criteria", report, &nlohmann::json::is_array)) {
            for (const auto& c : j["criteria"]) {
                std::string name = c.is_string() ? c.get<std::string>() : std::string();
                auto spec = CriterionSpec::parse(name);
                if (!spec) {
                    report.errors.push_back("criteria: unknown criterion '" + name + "'");
                    continue;
                }
                for (const CriterionSpec& existing : cfg.plan.criteria)
                    if (existing.name() == spec->name())
                        report.errors.push_back("criteria: duplicate entry '" + name + "'");
                cfg.plan.criteria.push_back(*spec);
            }
        }
        if (cfg.plan.criteria.empty()) report.errors.push_back("criteria: list must be non-empty");
    }

    if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<std::uint64_t>();

    if (j.contains("workers")) {
        int workers = j["workers"].is_number_integer() ? j["workers"].get<int>() : 0;
        if (workers < 1)
            report.errors.push_back("workers: must be at least 1");
        else
            cfg.workers = workers;
    }

    if (j.contains("output_dir")) {
        if (j["output_dir"].is_string() && !j["output_dir"].get<std::string>().empty())
            cfg.output_dir = j["output_dir"].get<std::string>();
        else
            report.errors.push_back("output_dir: must be a non-empty string");
    }

    if (j.contains("dgp")) {
        const auto& d = j["dgp"];
        if (d.contains("noise_sd")) cfg.plan.noise_sd = d["noise_sd"].get<double>();
        if (d.contains("base_coef_prob")) cfg.plan.base_coef_prob = d["base_coef_prob"].get<double>();
        if (d.contains("interaction_coef_prob"))
            cfg.plan.interaction_coef_prob = d["interaction_coef_prob"].get<double>();
        if (d.contains("intercept")) cfg.plan.intercept_c = d["intercept"].get<double>();
        if (d.contains("xi_confounded")) cfg.plan.xi_confounded = d["xi_confounded"].get<double>();
        if (cfg.plan.noise_sd < 0.0) report.errors.push_back("dgp.noise_sd: must be nonnegative");
        if (cfg.plan.base_coef_prob < 0.0 || cfg.plan.base_coef_prob > 1.0)
            report.errors.push_back("dgp.base_coef_prob: must lie in [0,1]");
        if (cfg.plan.interaction_coef_prob < 0.0 || cfg.plan.interaction_coef_prob > 1.0)
            report.errors.push_back("dgp.interaction_coef_prob: must lie in [0,1]");
    }

    if (j.contains("dump_datasets")) cfg.dump_datasets = j["dump_datasets"].get<bool>();

    if (j.contains("covariates")) {
        const auto& c = j["covariates"];
        if (c.contains("csv")) {
            if (c["csv"].is_string())
                cfg.covariates.csv_path = c["csv"].get<std::string>();
            else
                report.errors.push_back("covariates.csv: must be a string path");
        }
        if (c.contains("synthetic")) {
            SyntheticCovariateConfig synth;
            const auto& s = c["synthetic"];
            if (s.contains("pool_size")) synth.pool_size = s["pool_size"].get<int>();
            if (s.contains("continuous")) synth.continuous = s["continuous"].get<int>();
            if (s.contains("binary")) synth.binary = s["binary"].get<int>();
            if (synth.continuous < 4)
                report.errors.push_back("covariates.synthetic.continuous: need at least 4 columns");
            if (synth.binary < 0) report.errors.push_back("covariates.synthetic.binary: must be nonnegative");
            cfg.covariates.synthetic = synth;
        }
    }

    if (!cfg.covariates.csv_path && !cfg.covariates.synthetic) {
        const char* env = std::getenv(kCovariateEnvVar);
        if (env != nullptr && *env != '\0')
            cfg.covariates.csv_path = std::string(env);
        else
            report.errors.push_back(
                "covariates: set covariates.csv, covariates.synthetic, or the HTE_SELECT_COVARIATES "
                "environment variable");
    }

    // pool must cover the largest cell
    if (cfg.covariates.synthetic) {
        int need = 0;
        for (const SampleSize& s : cfg.plan.sizes) need = std::max(need, s.trainval + s.test);
        if (cfg.covariates.synthetic->pool_size < need)
            report.errors.push_back("covariates.synthetic.pool_size: must cover train_val + test = " +
                                    std::to_string(need));
    }

    return cfg;
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    std::vector<std::string> settings;
    for (char s : cfg.plan.settings) settings.emplace_back(1, s);
    j["settings"] = settings;
    j["rho_values"] = cfg.plan.rho_values;
    j["sample_sizes"] = nlohmann::json::array();
    for (const SampleSize& s : cfg.plan.sizes)
        j["sample_sizes"].push_back({{"train_val", s.trainval}, {"test", s.test}});
    j["seeds"] = cfg.plan.seeds;
    j["candidate_pool"] = cfg.plan.pool == CandidatePool::Full ? "full" : "indirect_only";
    std::vector<std::string> criteria;
    for (const CriterionSpec& c : cfg.plan.criteria) criteria.push_back(c.name());
    j["criteria"] = criteria;
    j["master_seed"] = cfg.master_seed;
    j["workers"] = cfg.workers;
    j["output_dir"] = cfg.output_dir;
    j["dump_datasets"] = cfg.dump_datasets;
    j["dgp"] = {{"noise_sd", cfg.plan.noise_sd},
                {"base_coef_prob", cfg.plan.base_coef_prob},
                {"interaction_coef_prob", cfg.plan.interaction_coef_prob},
                {"intercept", cfg.plan.intercept_c},
                {"xi_confounded", cfg.plan.xi_confounded}};
    nlohmann::json cov;
    if (cfg.covariates.csv_path) cov["csv"] = *cfg.covariates.csv_path;
    if (cfg.covariates.synthetic)
        cov["synthetic"] = {{"pool_size", cfg.covariates.synthetic->pool_size},
                            {"continuous", cfg.covariates.synthetic->continuous},
                            {"binary", cfg.covariates.synthetic->binary}};
    j["covariates"] = cov;
    return j;
}

}  // namespace hteselect
