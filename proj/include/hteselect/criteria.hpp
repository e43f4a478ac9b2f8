#pragma once

#include "hteselect/data.hpp"
#include "hteselect/learners.hpp"
#include "hteselect/meta_learners.hpp"

#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace hteselect {

enum class PseudoKind { DR, R, PW, RA, Match };

inline std::string to_string(PseudoKind k) {
    switch (k) {
        case PseudoKind::DR: return "dr";
        case PseudoKind::R: return "r";
        case PseudoKind::PW: return "pw";
        case PseudoKind::RA: return "ra";
        case PseudoKind::Match: return "match";
    }
    return "?";
}

// A model-selection criterion: the oracle, factual prediction losses,
// plug-in surrogates, pseudo-outcome surrogates, or the influence-function
// criterion. Candidates are ranked by score, lower is better.
struct CriterionSpec {
    enum class Kind { Oracle, Factual, WeightedFactual, PlugIn, Pseudo, InfluenceFn };

    Kind kind = Kind::Oracle;
    Strategy plug_strategy = Strategy::S;  // PlugIn only
    PseudoKind pseudo = PseudoKind::DR;    // Pseudo only
    MlMethod method = MlMethod::LR;        // PlugIn, Pseudo (except Match), InfluenceFn

    std::string name() const {
        auto meth = [this] { return method == MlMethod::LR ? std::string("lr") : std::string("gb"); };
        auto lower = [](std::string s) {
            for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            return s;
        };
        switch (kind) {
            case Kind::Oracle: return "oracle";
            case Kind::Factual: return "factual";
            case Kind::WeightedFactual: return "factual_weighted";
            case Kind::PlugIn: return "plugin_" + lower(to_string(plug_strategy)) + "_" + meth();
            case Kind::Pseudo:
                if (pseudo == PseudoKind::Match) return "matching";
                return "pseudo_" + to_string(pseudo) + "_" + meth();
            case Kind::InfluenceFn: return "influence_" + meth();
        }
        return "?";
    }

    bool needs_nuisances() const {
        return kind == Kind::WeightedFactual || kind == Kind::InfluenceFn ||
               (kind == Kind::Pseudo && pseudo != PseudoKind::Match);
    }

    // whether the method field is meaningful (weighted factual and matching
    // are method-free; the propensity is always a logistic fit)
    bool has_method() const {
        return kind == Kind::PlugIn || kind == Kind::InfluenceFn ||
               (kind == Kind::Pseudo && pseudo != PseudoKind::Match);
    }

    static std::optional<CriterionSpec> parse(const std::string& name);
};

// Every named criterion: the oracle, factual losses, plug-in criteria for
// all strategies and methods, all pseudo-outcome criteria, matching, and the
// influence-function criterion.
inline std::vector<CriterionSpec> all_criteria() {
    std::vector<CriterionSpec> out;
    out.push_back({CriterionSpec::Kind::Oracle, Strategy::S, PseudoKind::DR, MlMethod::LR});
    out.push_back({CriterionSpec::Kind::Factual, Strategy::S, PseudoKind::DR, MlMethod::LR});
    out.push_back({CriterionSpec::Kind::WeightedFactual, Strategy::S, PseudoKind::DR, MlMethod::LR});
    for (Strategy s : {Strategy::S, Strategy::ES, Strategy::T, Strategy::DR, Strategy::R})
        for (MlMethod m : {MlMethod::LR, MlMethod::GB})
            out.push_back({CriterionSpec::Kind::PlugIn, s, PseudoKind::DR, m});
    for (PseudoKind k : {PseudoKind::DR, PseudoKind::R, PseudoKind::PW, PseudoKind::RA})
        for (MlMethod m : {MlMethod::LR, MlMethod::GB})
            out.push_back({CriterionSpec::Kind::Pseudo, Strategy::S, k, m});
    out.push_back({CriterionSpec::Kind::Pseudo, Strategy::S, PseudoKind::Match, MlMethod::LR});
    for (MlMethod m : {MlMethod::LR, MlMethod::GB})
        out.push_back({CriterionSpec::Kind::InfluenceFn, Strategy::S, PseudoKind::DR, m});
    return out;
}

inline std::optional<CriterionSpec> CriterionSpec::parse(const std::string& name) {
    for (const CriterionSpec& spec : all_criteria())
        if (spec.name() == name) return spec;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// scores (all root-mean-square style, lower is better)
// ---------------------------------------------------------------------------

inline double rmse(const Vector& a, const Vector& b) {
    require(a.size() == b.size() && a.size() > 0, "rmse: length mismatch");
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

// Root mean squared effect-estimation error against the true effect.
inline double oracle_score(const Vector& tau_hat, const Vector& tau_true) { return rmse(tau_hat, tau_true); }

// Prediction loss on the observed arm only; optional importance weights.
// Normalization is by n for both variants.
inline double factual_score(const Vector& mu0_hat, const Vector& mu1_hat, const Vector& a, const Vector& y,
                            const Vector* weights = nullptr) {
    require(mu0_hat.size() == y.size() && mu1_hat.size() == y.size() && a.size() == y.size(),
            "factual score: length mismatch");
    require(y.size() > 0, "factual score: empty validation data");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double fitted = a(i) == 1.0 ? mu1_hat(i) : mu0_hat(i);
        double wi = weights != nullptr ? (*weights)(i) : 1.0;
        double r = y(i) - fitted;
        acc += wi * r * r;
    }
    return std::sqrt(acc / static_cast<double>(y.size()));
}

inline Vector inverse_propensity_weights(const Vector& a, const Vector& pi) {
    Vector w(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) w(i) = a(i) == 1.0 ? 1.0 / pi(i) : 1.0 / (1.0 - pi(i));
    return w;
}

inline double plugin_score(const Vector& plug_tau, const Vector& cand_tau) { return rmse(plug_tau, cand_tau); }

// Weighted RMSE against a pseudo-outcome target; weights default to one and
// the normalizer is the weight total.
inline double pseudo_score(const Vector& pseudo, const Vector& cand_tau, const Vector* weights = nullptr) {
    require(pseudo.size() == cand_tau.size() && pseudo.size() > 0, "pseudo score: length mismatch");
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < pseudo.size(); ++i) {
        double wi = weights != nullptr ? (*weights)(i) : 1.0;
        double r = pseudo(i) - cand_tau(i);
        num += wi * r * r;
        den += wi;
    }
    require(den > 0.0, "pseudo score: zero total weight");
    return std::sqrt(num / den);
}

// Matched pseudo-outcomes: each row is paired with its nearest neighbor in
// the opposite treatment group and the target is the signed outcome contrast.
inline Vector matching_targets(const Dataset& val) {
    val.validate();
    std::vector<int> g0 = group_rows(val.A, 0.0), g1 = group_rows(val.A, 1.0);
    require(!g0.empty() && !g1.empty(), "matching: a treatment group is empty");
    Matrix pool0 = take_rows(val.X, g0), pool1 = take_rows(val.X, g1);
    Vector out(val.n());
    for (int i = 0; i < val.n(); ++i) {
        const std::vector<int>& opposite = val.A(i) == 1.0 ? g0 : g1;
        const Matrix& pool = val.A(i) == 1.0 ? pool0 : pool1;
        int nn = nearest_neighbor_index(val.X.row(i).transpose(), pool);
        double matched_y = val.Y(opposite[static_cast<std::size_t>(nn)]);
        out(i) = (2.0 * val.A(i) - 1.0) * (val.Y(i) - matched_y);
    }
    return out;
}

// Influence-function criterion: mean over rows of
//   (1 - B) t~^2 + B Y (t~ - t^) - D (t~ - t^)^2 + t^2
// with D = A - pi~, C = pi~ (1 - pi~), B = 2 A (A - pi~) / C, where t~ is a
// cross-fitted T-learner effect estimate and t^ the candidate's prediction.
inline double influence_score(const Vector& cand_tau, const Vector& a, const Vector& y,
                              const Vector& tilde_tau, const Vector& pi_tilde) {
    require(cand_tau.size() == a.size() && tilde_tau.size() == a.size() && pi_tilde.size() == a.size() &&
                y.size() == a.size(),
            "influence score: length mismatch");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        double d = a(i) - pi_tilde(i);
        double c = pi_tilde(i) * (1.0 - pi_tilde(i));
        double b = 2.0 * a(i) * d / c;
        double diff = tilde_tau(i) - cand_tau(i);
        acc += (1.0 - b) * tilde_tau(i) * tilde_tau(i) + b * y(i) * diff - d * diff * diff +
               cand_tau(i) * cand_tau(i);
    }
    return acc / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// selection
// ---------------------------------------------------------------------------

struct ScoreTable {
    std::vector<std::optional<double>> scores;  // one per candidate; absent = not evaluable
    int selected_index = -1;
};

inline int select_best(const std::vector<std::optional<double>>& scores) {
    int best = -1;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (!scores[k].has_value()) continue;
        if (best < 0 || *scores[k] < *scores[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    }
    require(best >= 0, "select_best: no evaluable candidate");
    return best;
}

inline ScoreTable make_score_table(std::vector<std::optional<double>> scores) {
    ScoreTable table;
    table.scores = std::move(scores);
    table.selected_index = select_best(table.scores);
    return table;
}

}  // namespace hteselect
