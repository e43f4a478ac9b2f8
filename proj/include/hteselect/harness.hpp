#pragma once

#include "hteselect/criteria.hpp"
#include "hteselect/data.hpp"
#include "hteselect/dgp.hpp"
#include "hteselect/grid.hpp"
#include "hteselect/meta_learners.hpp"
#include "hteselect/rng.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hteselect {

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

enum class CandidatePool { Full, IndirectOnly };

struct SampleSize {
    int trainval = 1000;
    int test = 500;
};

struct CandidateId {
    Strategy strategy;
    MlMethod method;

    std::string name() const { return to_string(strategy) + "_" + to_string(method); }
};

inline std::vector<CandidateId> candidate_pool(CandidatePool pool) {
    std::vector<CandidateId> out;
    for (Strategy s : {Strategy::S, Strategy::ES, Strategy::T, Strategy::DR, Strategy::R}) {
        if (pool == CandidatePool::IndirectOnly && !is_indirect(s)) continue;
        for (MlMethod m : {MlMethod::LR, MlMethod::GB}) out.push_back({s, m});
    }
    return out;
}

struct ExperimentPlan {
    std::vector<char> settings{'A', 'B', 'C', 'D'};
    std::vector<double> rho_values{0.0, 0.1, 0.3};
    std::vector<SampleSize> sizes{{1000, 500}};
    int seeds = 20;
    CandidatePool pool = CandidatePool::Full;
    std::vector<CriterionSpec> criteria = all_criteria();

    // DGP knobs shared by every cell
    double noise_sd = 0.1;
    double base_coef_prob = 0.3;
    double interaction_coef_prob = 0.2;
    double intercept_c = 0.0;
    double xi_confounded = 3.0;
    int nuisance_folds = 5;

    void validate() const {
        require(!settings.empty() && !rho_values.empty() && !sizes.empty() && !criteria.empty(),
                "plan lists must be non-empty");
        for (char s : settings) require(s >= 'A' && s <= 'D', "settings must be within A-D");
        for (double r : rho_values) require(r >= 0.0 && r <= 1.0, "rho must lie in [0,1]");
        require(seeds >= 1, "need at least one seed");
    }
};

inline InputRepr setting_repr(char setting) {
    return (setting == 'B' || setting == 'D') ? InputRepr::Binarized : InputRepr::Raw;
}

inline bool setting_confounded(char setting) { return setting == 'C' || setting == 'D'; }

// ---------------------------------------------------------------------------
// per-cell results
// ---------------------------------------------------------------------------

struct CandidateResult {
    CandidateId id;
    bool ok = false;
    std::string fail_reason;
    std::optional<double> pehe;          // test-set effect RMSE
    std::optional<double> factual_rmse;  // test-set factual RMSE, indirect only
};

struct CriterionResult {
    CriterionSpec spec;
    ScoreTable table;
};

struct CellKey {
    char setting = 'A';
    double rho = 0.0;
    SampleSize size{};
    int seed = 0;

    std::string label() const {
        return std::string(1, setting) + " rho=" + std::to_string(rho) +
               " n=" + std::to_string(size.trainval) + "+" + std::to_string(size.test) +
               " seed=" + std::to_string(seed);
    }
};

struct CellResult {
    CellKey key;
    std::vector<CandidateResult> candidates;
    std::vector<CriterionResult> criteria;
    int oracle_choice = -1;  // argmin test pehe over fitted candidates
};

// ---------------------------------------------------------------------------
// scalar metrics
// ---------------------------------------------------------------------------

inline double pehe(const Vector& tau_hat, const Vector& tau_true) { return rmse(tau_hat, tau_true); }

inline double delta_pehe_fact(double criterion_pehe, double factual_pehe) {
    return criterion_pehe - factual_pehe;
}

// ---------------------------------------------------------------------------
// one experiment cell
// ---------------------------------------------------------------------------

inline CellResult run_cell(const CellKey& key, const ExperimentPlan& plan, const CovariatePool& pool,
                           std::uint64_t master_seed) {
    plan.validate();
    const HyperGrid grid;

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
    // the truth draw is shared across settings: only xi and the input
    // representation differ at a fixed (rho, n, seed)
    cfg.seed = Seed(master_seed).child("dgp", key.rho, key.size.trainval, key.size.test, key.seed).value();

    SimulatedDataset sim = generate_dataset(cfg, pool);

    Seed cell_seed =
        Seed(master_seed).child("cell", std::string(1, key.setting), key.rho, key.size.trainval, key.seed);

    CellResult out;
    out.key = key;

    // fit candidates on the training split
    std::vector<CandidateId> ids = candidate_pool(plan.pool);
    const int n_candidates = static_cast<int>(ids.size());
    std::vector<std::optional<Vector>> tau_val(ids.size()), tau_test(ids.size());
    std::vector<std::optional<std::pair<Vector, Vector>>> po_val(ids.size());

    for (int k = 0; k < n_candidates; ++k) {
        CandidateResult cand;
        cand.id = ids[static_cast<std::size_t>(k)];
        try {
            CateEstimator est = fit_cate_estimator(cand.id.strategy, cand.id.method, sim.train, grid,
                                                   cell_seed.child("fit", k));
            tau_val[static_cast<std::size_t>(k)] = cate_predict(est, sim.val.X);
            tau_test[static_cast<std::size_t>(k)] = cate_predict(est, sim.test.X);
            cand.pehe = pehe(*tau_test[static_cast<std::size_t>(k)], sim.truth_test.tau);
            if (is_indirect(cand.id.strategy)) {
                po_val[static_cast<std::size_t>(k)] = po_predict(est, sim.val.X);
                auto [mu0_test, mu1_test] = po_predict(est, sim.test.X);
                cand.factual_rmse = factual_score(mu0_test, mu1_test, sim.test.A, sim.test.Y);
            }
            cand.ok = true;
        } catch (const std::exception& e) {
            cand.ok = false;
            cand.fail_reason = e.what();
        }
        out.candidates.push_back(std::move(cand));
    }

    out.oracle_choice = -1;
    for (int k = 0; k < n_candidates; ++k) {
        const auto& cand = out.candidates[static_cast<std::size_t>(k)];
        if (!cand.ok) continue;
        if (out.oracle_choice < 0 ||
            *cand.pehe < *out.candidates[static_cast<std::size_t>(out.oracle_choice)].pehe)
            out.oracle_choice = k;
    }
    require(out.oracle_choice >= 0, "no candidate could be fitted in cell " + key.label());

    // validation-side shared artifacts, computed once per cell
    bool need_lr = false, need_gb = false, need_matching = false, need_wfact = false;
    for (const CriterionSpec& spec : plan.criteria) {
        if (spec.kind == CriterionSpec::Kind::Pseudo && spec.pseudo == PseudoKind::Match)
            need_matching = true;
        else if (spec.kind == CriterionSpec::Kind::WeightedFactual)
            need_wfact = true;  // any nuisance set works: pi is method-free
        else if (spec.needs_nuisances())
            (spec.method == MlMethod::LR ? need_lr : need_gb) = true;
    }
    if (need_wfact && !need_lr && !need_gb) need_lr = true;

    Seed nuis_seed = cell_seed.child("valnuis");  // shared across methods: identical folds and pi
    std::optional<NuisanceSet> nuis_lr, nuis_gb;
    if (need_lr) nuis_lr = cross_fit_nuisances(sim.val, MlMethod::LR, grid, plan.nuisance_folds, nuis_seed);
    if (need_gb) nuis_gb = cross_fit_nuisances(sim.val, MlMethod::GB, grid, plan.nuisance_folds, nuis_seed);
    auto nuisances = [&](MlMethod m) -> const NuisanceSet& {
        return m == MlMethod::LR ? *nuis_lr : *nuis_gb;
    };
    auto any_nuisances = [&]() -> const NuisanceSet& { return nuis_lr ? *nuis_lr : *nuis_gb; };

    std::optional<Vector> match_targets;
    if (need_matching) match_targets = matching_targets(sim.val);

    // plug-in estimators are fit on the validation split only
    std::map<std::pair<Strategy, MlMethod>, Vector> plug_predictions;
    for (const CriterionSpec& spec : plan.criteria) {
        if (spec.kind != CriterionSpec::Kind::PlugIn) continue;
        auto key_pm = std::make_pair(spec.plug_strategy, spec.method);
        if (plug_predictions.count(key_pm)) continue;
        CateEstimator plug =
            fit_cate_estimator(spec.plug_strategy, spec.method, sim.val, grid,
                               cell_seed.child("plug", to_string(spec.plug_strategy), to_string(spec.method)));
        plug_predictions[key_pm] = cate_predict(plug, sim.val.X);
    }

    // score every criterion over the candidate pool
    for (const CriterionSpec& spec : plan.criteria) {
        CriterionResult res;
        res.spec = spec;
        std::vector<std::optional<double>> scores(ids.size());

        for (int k = 0; k < n_candidates; ++k) {
            if (!out.candidates[static_cast<std::size_t>(k)].ok) continue;
            const Vector& tv = *tau_val[static_cast<std::size_t>(k)];
            switch (spec.kind) {
                case CriterionSpec::Kind::Oracle:
                    scores[static_cast<std::size_t>(k)] = *out.candidates[static_cast<std::size_t>(k)].pehe;
                    break;
                case CriterionSpec::Kind::Factual:
                case CriterionSpec::Kind::WeightedFactual: {
                    if (!po_val[static_cast<std::size_t>(k)]) break;  // direct: not evaluable
                    const auto& [mu0, mu1] = *po_val[static_cast<std::size_t>(k)];
                    if (spec.kind == CriterionSpec::Kind::Factual) {
                        scores[static_cast<std::size_t>(k)] = factual_score(mu0, mu1, sim.val.A, sim.val.Y);
                    } else {
                        Vector w = inverse_propensity_weights(sim.val.A, any_nuisances().pi);
                        scores[static_cast<std::size_t>(k)] =
                            factual_score(mu0, mu1, sim.val.A, sim.val.Y, &w);
                    }
                    break;
                }
                case CriterionSpec::Kind::PlugIn:
                    scores[static_cast<std::size_t>(k)] =
                        plugin_score(plug_predictions.at({spec.plug_strategy, spec.method}), tv);
                    break;
                case CriterionSpec::Kind::Pseudo: {
                    if (spec.pseudo == PseudoKind::Match) {
                        scores[static_cast<std::size_t>(k)] = pseudo_score(*match_targets, tv);
                        break;
                    }
                    const NuisanceSet& nu = nuisances(spec.method);
                    const int nv = sim.val.n();
                    Vector target(nv);
                    if (spec.pseudo == PseudoKind::R) {
                        Vector weight(nv);
                        for (int i = 0; i < nv; ++i) {
                            auto [t, w] = pseudo_r(sim.val.Y(i), sim.val.A(i), nu.mu(i), nu.pi(i));
                            target(i) = t;
                            weight(i) = w;
                        }
                        scores[static_cast<std::size_t>(k)] = pseudo_score(target, tv, &weight);
                    } else {
                        for (int i = 0; i < nv; ++i) {
                            double y = sim.val.Y(i), a = sim.val.A(i);
                            if (spec.pseudo == PseudoKind::DR)
                                target(i) = pseudo_dr(y, a, nu.mu0(i), nu.mu1(i), nu.pi(i));
                            else if (spec.pseudo == PseudoKind::PW)
                                target(i) = pseudo_pw(y, a, nu.pi(i));
                            else
                                target(i) = pseudo_ra(y, a, nu.mu0(i), nu.mu1(i));
                        }
                        scores[static_cast<std::size_t>(k)] = pseudo_score(target, tv);
                    }
                    break;
                }
                case CriterionSpec::Kind::InfluenceFn: {
                    const NuisanceSet& nu = nuisances(spec.method);
                    Vector tilde = nu.mu1 - nu.mu0;  // cross-fitted T-learner surrogate
                    scores[static_cast<std::size_t>(k)] =
                        influence_score(tv, sim.val.A, sim.val.Y, tilde, nu.pi);
                    break;
                }
            }
        }

        res.table = make_score_table(std::move(scores));
        out.criteria.push_back(std::move(res));
    }

    return out;
}

// ---------------------------------------------------------------------------
// plan execution
// ---------------------------------------------------------------------------

struct CellFailure {
    CellKey key;
    std::string message;
};

struct PlanRunResult {
    std::vector<CellKey> keys;                      // canonical cell order
    std::vector<std::optional<CellResult>> cells;   // aligned with keys
    std::vector<CellFailure> failures;
    std::vector<std::string> candidate_failures;    // per-candidate fit problems, logged
};

inline std::vector<CellKey> plan_cells(const ExperimentPlan& plan) {
    std::vector<CellKey> keys;
    for (char setting : plan.settings)
        for (double rho : plan.rho_values)
            for (const SampleSize& size : plan.sizes)
                for (int seed = 0; seed < plan.seeds; ++seed) keys.push_back({setting, rho, size, seed});
    return keys;
}

// Cells are independent work units; results land in canonical order no
// matter how many workers execute them.
inline PlanRunResult run_plan(const ExperimentPlan& plan, const CovariatePool& pool,
                              std::uint64_t master_seed, int workers = 1,
                              std::ostream* progress = nullptr) {
    plan.validate();
    require(workers >= 1, "workers must be positive");

    PlanRunResult result;
    result.keys = plan_cells(plan);
    result.cells.resize(result.keys.size());

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex mu;

    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= result.keys.size()) return;
            try {
                CellResult cell = run_cell(result.keys[i], plan, pool, master_seed);
                std::lock_guard<std::mutex> lock(mu);
                for (const CandidateResult& cand : cell.candidates)
                    if (!cand.ok)
                        result.candidate_failures.push_back("cell " + cell.key.label() + " candidate " +
                                                            cand.id.name() + ": " + cand.fail_reason);
                result.cells[i] = std::move(cell);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                result.failures.push_back({result.keys[i], e.what()});
            }
            std::size_t finished = done.fetch_add(1) + 1;
            if (progress != nullptr) {
                std::lock_guard<std::mutex> lock(mu);
                (*progress) << "[" << finished << "/" << result.keys.size() << "] "
                            << result.keys[i].label() << "\n";
                progress->flush();
            }
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < workers; ++t) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
    }
    return result;
}

// ---------------------------------------------------------------------------
// aggregation
// ---------------------------------------------------------------------------

struct AggregateRow {
    char setting;
    double rho;
    int n;
    std::string key;     // candidate or criterion name
    std::string metric;  // pehe, factual_rmse, selected_pehe, delta_pehe_fact
    double mean = 0.0;
    std::optional<double> se;
    int count = 0;
};

namespace detail {

inline std::pair<double, std::optional<double>> mean_se(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, std::nullopt};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    return {mean, sd / std::sqrt(static_cast<double>(xs.size()))};
}

}  // namespace detail

// Index of the criterion named "factual" within the plan, or -1.
inline int factual_criterion_index(const ExperimentPlan& plan) {
    for (std::size_t c = 0; c < plan.criteria.size(); ++c)
        if (plan.criteria[c].kind == CriterionSpec::Kind::Factual) return static_cast<int>(c);
    return -1;
}

// Per-(setting, rho, n, key) means and standard errors over seeds, for both
// candidate metrics and criterion selections.
inline std::vector<AggregateRow> aggregate(const ExperimentPlan& plan, const PlanRunResult& run) {
    std::vector<AggregateRow> rows;
    const int fact_idx = factual_criterion_index(plan);
    const std::vector<CandidateId> ids = candidate_pool(plan.pool);

    std::size_t cell_index = 0;
    for (char setting : plan.settings)
        for (double rho : plan.rho_values)
            for (const SampleSize& size : plan.sizes) {
                std::vector<const CellResult*> group;
                for (int seed = 0; seed < plan.seeds; ++seed, ++cell_index)
                    if (run.cells[cell_index].has_value()) group.push_back(&*run.cells[cell_index]);
                if (group.empty()) continue;

                auto emit = [&](const std::string& key, const std::string& metric,
                                const std::vector<double>& xs) {
                    if (xs.empty()) return;
                    auto [mean, se] = detail::mean_se(xs);
                    rows.push_back({setting, rho, size.trainval, key, metric, mean, se,
                                    static_cast<int>(xs.size())});
                };

                for (std::size_t k = 0; k < ids.size(); ++k) {
                    std::vector<double> pehes, facts;
                    for (const CellResult* cell : group) {
                        const CandidateResult& cand = cell->candidates[k];
                        if (cand.pehe) pehes.push_back(*cand.pehe);
                        if (cand.factual_rmse) facts.push_back(*cand.factual_rmse);
                    }
                    emit(ids[k].name(), "pehe", pehes);
                    emit(ids[k].name(), "factual_rmse", facts);
                }

                for (std::size_t c = 0; c < plan.criteria.size(); ++c) {
                    std::vector<double> sel, delta;
                    for (const CellResult* cell : group) {
                        const CriterionResult& crit = cell->criteria[c];
                        int chosen = crit.table.selected_index;
                        double chosen_pehe = *cell->candidates[static_cast<std::size_t>(chosen)].pehe;
                        sel.push_back(chosen_pehe);
                        if (fact_idx >= 0) {
                            int fact_choice =
                                cell->criteria[static_cast<std::size_t>(fact_idx)].table.selected_index;
                            double fact_pehe =
                                *cell->candidates[static_cast<std::size_t>(fact_choice)].pehe;
                            delta.push_back(delta_pehe_fact(chosen_pehe, fact_pehe));
                        }
                    }
                    emit(plan.criteria[c].name(), "selected_pehe", sel);
                    emit(plan.criteria[c].name(), "delta_pehe_fact", delta);
                }
            }
    return rows;
}

// ---------------------------------------------------------------------------
// congeniality
// ---------------------------------------------------------------------------

enum class GroupBy { Strategy, Method };

struct CongenialityRow {
    std::string analysis;   // "strategy" or "method"
    std::string filter;     // restricting method for strategy analysis, or "all"
    std::string criterion;
    std::string group;      // strategy or method name
    double proportion = 0.0;
    int conditioning_cells = 0;
};

// Proportion of cells in which a criterion selects group value g although the
// oracle-best candidate (within the same restricted pool) is not in g. Empty
// conditioning sets yield no row.
inline std::vector<CongenialityRow> congeniality_stats(const ExperimentPlan& plan,
                                                       const PlanRunResult& run, GroupBy group_by,
                                                       std::optional<MlMethod> method_filter = std::nullopt,
                                                       std::optional<double> rho_filter = std::nullopt) {
    require(group_by == GroupBy::Method || method_filter.has_value(),
            "strategy congeniality requires a method restriction");

    const std::vector<CandidateId> ids = candidate_pool(plan.pool);
    std::vector<int> pool_idx;
    for (std::size_t k = 0; k < ids.size(); ++k)
        if (!method_filter || ids[k].method == *method_filter) pool_idx.push_back(static_cast<int>(k));

    auto group_of = [&](int k) {
        return group_by == GroupBy::Strategy ? to_string(ids[static_cast<std::size_t>(k)].strategy)
                                             : to_string(ids[static_cast<std::size_t>(k)].method);
    };

    std::vector<std::string> groups;
    for (int k : pool_idx) {
        std::string g = group_of(k);
        bool seen = false;
        for (const std::string& existing : groups) seen = seen || existing == g;
        if (!seen) groups.push_back(g);
    }

    std::vector<CongenialityRow> rows;
    for (std::size_t c = 0; c < plan.criteria.size(); ++c) {
        const CriterionSpec& spec = plan.criteria[c];
        // method-specific criteria only apply within their own method pool
        if (method_filter && spec.has_method() && spec.method != *method_filter) continue;

        for (const std::string& g : groups) {
            int conditioning = 0, hits = 0;
            for (std::size_t i = 0; i < run.cells.size(); ++i) {
                if (!run.cells[i].has_value()) continue;
                const CellResult& cell = *run.cells[i];
                if (rho_filter && cell.key.rho != *rho_filter) continue;

                // restricted-pool oracle top and criterion choice
                int oracle_top = -1;
                for (int k : pool_idx) {
                    const CandidateResult& cand = cell.candidates[static_cast<std::size_t>(k)];
                    if (!cand.ok) continue;
                    if (oracle_top < 0 ||
                        *cand.pehe < *cell.candidates[static_cast<std::size_t>(oracle_top)].pehe)
                        oracle_top = k;
                }
                if (oracle_top < 0) continue;

                const auto& scores = cell.criteria[c].table.scores;
                int chosen = -1;
                for (int k : pool_idx) {
                    if (!scores[static_cast<std::size_t>(k)].has_value()) continue;
                    if (chosen < 0 ||
                        *scores[static_cast<std::size_t>(k)] < *scores[static_cast<std::size_t>(chosen)])
                        chosen = k;
                }
                if (chosen < 0) continue;

                if (group_of(oracle_top) == g) continue;  // selecting g would not be biased
                ++conditioning;
                if (group_of(chosen) == g) ++hits;
            }
            if (conditioning == 0) continue;  // proportion undefined, emit nothing
            rows.push_back({group_by == GroupBy::Strategy ? "strategy" : "method",
                            method_filter ? to_string(*method_filter) : "all", spec.name(), g,
                            static_cast<double>(hits) / static_cast<double>(conditioning), conditioning});
        }
    }
    return rows;
}

}  // namespace hteselect
