#include "hteselect/harness.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace hteselect;

namespace {

ExperimentPlan tiny_plan() {
    ExperimentPlan plan;
    plan.settings = {'A', 'D'};
    plan.rho_values = {0.1};
    plan.sizes = {{120, 60}};
    plan.seeds = 2;
    // a lean criteria list keeps this suite quick
    plan.criteria.clear();
    for (const char* name : {"oracle", "factual", "factual_weighted", "plugin_t_lr", "pseudo_dr_lr",
                             "pseudo_r_lr", "matching", "influence_lr"})
        plan.criteria.push_back(*CriterionSpec::parse(name));
    return plan;
}

const CovariatePool& shared_pool() {
    static CovariatePool pool = synth_covariate_pool(600, 6, 2, Seed(404));
    return pool;
}

}  // namespace

TEST_CASE("pehe matches hand-computed values") {
    Vector a(2), b(2);
    a << 3, 4;
    b << 0, 0;
    REQUIRE(pehe(a, a) == 0.0);
    REQUIRE_THAT(pehe(a, b), Catch::Matchers::WithinAbs(std::sqrt(12.5), 1e-12));
    Vector c = a.array() + 2.0;
    REQUIRE_THAT(pehe(c, a), Catch::Matchers::WithinAbs(2.0, 1e-12));
}

TEST_CASE("delta against the factual choice") {
    REQUIRE(delta_pehe_fact(1.0, 1.0) == 0.0);
    REQUIRE_THAT(delta_pehe_fact(1.0, 1.5), Catch::Matchers::WithinAbs(-0.5, 1e-12));
}

TEST_CASE("candidate pools") {
    REQUIRE(candidate_pool(CandidatePool::Full).size() == 10);
    std::vector<CandidateId> indirect = candidate_pool(CandidatePool::IndirectOnly);
    REQUIRE(indirect.size() == 6);
    for (const CandidateId& id : indirect) REQUIRE(is_indirect(id.strategy));
}

TEST_CASE("aggregate means and standard errors") {
    auto [m1, s1] = detail::mean_se({1.0, 1.0, 1.0});
    REQUIRE(m1 == 1.0);
    REQUIRE(s1.has_value());
    REQUIRE(*s1 == 0.0);
    auto [m2, s2] = detail::mean_se({0.0, 2.0});
    REQUIRE(m2 == 1.0);
    REQUIRE_THAT(*s2, Catch::Matchers::WithinAbs(1.0, 1e-12));
    auto [m3, s3] = detail::mean_se({5.0});
    REQUIRE(m3 == 5.0);
    REQUIRE(!s3.has_value());
}

TEST_CASE("a full cell satisfies the structural contracts") {
    ExperimentPlan plan = tiny_plan();
    CellKey key{'D', 0.1, {120, 60}, 0};
    CellResult cell = run_cell(key, plan, shared_pool(), 11);

    REQUIRE(cell.candidates.size() == 10);
    REQUIRE(cell.criteria.size() == plan.criteria.size());

    // oracle dominance: asserted, never sampled
    const auto& oracle_cand = cell.candidates[static_cast<std::size_t>(cell.oracle_choice)];
    for (const CriterionResult& crit : cell.criteria) {
        const auto& chosen = cell.candidates[static_cast<std::size_t>(crit.table.selected_index)];
        REQUIRE(*oracle_cand.pehe <= *chosen.pehe);
    }

    // factual scores exist exactly for the indirect candidates
    for (std::size_t c = 0; c < plan.criteria.size(); ++c) {
        if (plan.criteria[c].kind != CriterionSpec::Kind::Factual) continue;
        for (std::size_t k = 0; k < cell.candidates.size(); ++k) {
            bool evaluable = cell.criteria[c].table.scores[k].has_value();
            REQUIRE(evaluable == is_indirect(cell.candidates[k].id.strategy));
        }
    }

    // candidate-level factual rmse mirrors the indirect contract
    for (const CandidateResult& cand : cell.candidates) {
        REQUIRE(cand.ok);
        REQUIRE(cand.factual_rmse.has_value() == is_indirect(cand.id.strategy));
    }
}

TEST_CASE("cells are bit-identical across reruns and worker counts") {
    ExperimentPlan plan = tiny_plan();
    CellKey key{'A', 0.1, {120, 60}, 1};
    CellResult a = run_cell(key, plan, shared_pool(), 11);
    CellResult b = run_cell(key, plan, shared_pool(), 11);
    REQUIRE(a.oracle_choice == b.oracle_choice);
    for (std::size_t c = 0; c < a.criteria.size(); ++c) {
        REQUIRE(a.criteria[c].table.selected_index == b.criteria[c].table.selected_index);
        for (std::size_t k = 0; k < a.criteria[c].table.scores.size(); ++k) {
            REQUIRE(a.criteria[c].table.scores[k].has_value() ==
                    b.criteria[c].table.scores[k].has_value());
            if (a.criteria[c].table.scores[k])
                REQUIRE(*a.criteria[c].table.scores[k] == *b.criteria[c].table.scores[k]);
        }
    }

    PlanRunResult serial = run_plan(plan, shared_pool(), 11, 1);
    PlanRunResult parallel = run_plan(plan, shared_pool(), 11, 2);
    REQUIRE(serial.failures.empty());
    REQUIRE(parallel.failures.empty());
    REQUIRE(serial.cells.size() == parallel.cells.size());
    for (std::size_t i = 0; i < serial.cells.size(); ++i) {
        REQUIRE(serial.cells[i].has_value());
        REQUIRE(parallel.cells[i].has_value());
        for (std::size_t c = 0; c < serial.cells[i]->criteria.size(); ++c)
            REQUIRE(serial.cells[i]->criteria[c].table.selected_index ==
                    parallel.cells[i]->criteria[c].table.selected_index);
    }
}

TEST_CASE("indirect-only pools never select a direct candidate") {
    ExperimentPlan plan = tiny_plan();
    plan.pool = CandidatePool::IndirectOnly;
    plan.settings = {'A'};
    plan.seeds = 1;
    PlanRunResult run = run_plan(plan, shared_pool(), 5);
    REQUIRE(run.failures.empty());
    for (const auto& cell : run.cells) {
        REQUIRE(cell.has_value());
        REQUIRE(cell->candidates.size() == 6);
        for (const CriterionResult& crit : cell->criteria) {
            const CandidateId& chosen =
                cell->candidates[static_cast<std::size_t>(crit.table.selected_index)].id;
            REQUIRE(is_indirect(chosen.strategy));
        }
    }
}

TEST_CASE("aggregation groups by cell keys and respects seed counts") {
    ExperimentPlan plan = tiny_plan();
    PlanRunResult run = run_plan(plan, shared_pool(), 11);
    std::vector<AggregateRow> rows = aggregate(plan, run);
    REQUIRE(!rows.empty());

    int factual_delta_rows = 0;
    for (const AggregateRow& row : rows) {
        REQUIRE(row.count == plan.seeds);
        REQUIRE(row.se.has_value());
        if (row.key == "factual" && row.metric == "delta_pehe_fact") {
            ++factual_delta_rows;
            REQUIRE(row.mean == 0.0);  // the factual criterion against itself
            REQUIRE(*row.se == 0.0);
        }
        if (row.metric == "pehe" || row.metric == "selected_pehe") REQUIRE(row.mean >= 0.0);
    }
    REQUIRE(factual_delta_rows == 2);  // one per (setting, rho, n) group
}

TEST_CASE("congeniality proportions use the documented conditioning") {
    // three synthetic cells: the criterion under study always selects S while
    // the oracle top varies
    ExperimentPlan plan;
    plan.pool = CandidatePool::IndirectOnly;
    plan.criteria = {*CriterionSpec::parse("oracle"), *CriterionSpec::parse("plugin_s_lr")};
    plan.settings = {'A'};
    plan.rho_values = {0.0};
    plan.sizes = {{60, 30}};
    plan.seeds = 3;

    PlanRunResult run;
    run.keys = plan_cells(plan);
    run.cells.resize(3);
    // pool order for IndirectOnly: S_LR, S_GB, ES_LR, ES_GB, T_LR, T_GB
    auto make_cell = [&](int seed, int oracle_top, int criterion_pick) {
        CellResult cell;
        cell.key = run.keys[static_cast<std::size_t>(seed)];
        for (const CandidateId& id : candidate_pool(plan.pool)) {
            CandidateResult cand;
            cand.id = id;
            cand.ok = true;
            cand.pehe = 1.0;
            cell.candidates.push_back(cand);
        }
        cell.candidates[static_cast<std::size_t>(oracle_top)].pehe = 0.1;
        cell.oracle_choice = oracle_top;
        CriterionResult oracle_res;
        oracle_res.spec = plan.criteria[0];
        for (const auto& cand : cell.candidates) oracle_res.table.scores.push_back(*cand.pehe);
        oracle_res.table.selected_index = oracle_top;
        CriterionResult plug_res;
        plug_res.spec = plan.criteria[1];
        for (std::size_t k = 0; k < cell.candidates.size(); ++k)
            plug_res.table.scores.push_back(k == static_cast<std::size_t>(criterion_pick) ? 0.0 : 1.0);
        plug_res.table.selected_index = criterion_pick;
        cell.criteria = {oracle_res, plug_res};
        return cell;
    };
    run.cells[0] = make_cell(0, 4, 0);  // oracle top T_LR, criterion picks S_LR
    run.cells[1] = make_cell(1, 4, 0);
    run.cells[2] = make_cell(2, 0, 0);  // oracle top S_LR

    std::vector<CongenialityRow> rows =
        congeniality_stats(plan, run, GroupBy::Strategy, MlMethod::LR);
    bool found_plug_s = false, found_oracle_s = false;
    for (const CongenialityRow& row : rows) {
        REQUIRE(row.proportion >= 0.0);
        REQUIRE(row.proportion <= 1.0);
        if (row.criterion == "plugin_s_lr" && row.group == "S") {
            found_plug_s = true;
            REQUIRE(row.conditioning_cells == 2);  // cells where the top is not S
            REQUIRE(row.proportion == 1.0);
        }
        if (row.criterion == "oracle" && row.group == "S") {
            found_oracle_s = true;
            REQUIRE(row.proportion == 0.0);  // the oracle never selects a non-top group
        }
    }
    REQUIRE(found_plug_s);
    REQUIRE(found_oracle_s);

    // a group that is always the oracle top has no conditioning cells
    run.cells[0] = make_cell(0, 0, 0);
    run.cells[1] = make_cell(1, 0, 0);
    run.cells[2] = make_cell(2, 0, 0);
    rows = congeniality_stats(plan, run, GroupBy::Strategy, MlMethod::LR);
    for (const CongenialityRow& row : rows) REQUIRE(row.group != "S");
}

TEST_CASE("congeniality proportions from a real run stay within bounds") {
    ExperimentPlan plan = tiny_plan();
    PlanRunResult run = run_plan(plan, shared_pool(), 11);
    for (GroupBy by : {GroupBy::Strategy, GroupBy::Method}) {
        std::optional<MlMethod> filter =
            by == GroupBy::Strategy ? std::optional<MlMethod>(MlMethod::LR) : std::nullopt;
        for (const CongenialityRow& row : congeniality_stats(plan, run, by, filter)) {
            REQUIRE(row.proportion >= 0.0);
            REQUIRE(row.proportion <= 1.0);
            REQUIRE(row.conditioning_cells >= 1);
        }
    }
}
