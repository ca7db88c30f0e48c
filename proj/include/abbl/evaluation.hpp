#pragma once

#include <string>
#include <vector>

#include "abbl/inference.hpp"

namespace abbl {

struct WorldViewScore {
    double score = 0.0;
    std::vector<ScoreReport> reports;
};

// Mean model score over the scenarios at the worldview's posterior modes.
// The score is stored on the worldview together with the scenario list and
// the rule-set hash it was computed for.
inline WorldViewScore score_worldview(const Ontology& ontology, WorldView& w, const std::vector<Scenario>& scenarios,
                                      const KnowledgeBase& kb, const ScoreOptions& options)
{
    if (scenarios.empty())
        fail(ErrorCode::EmptyInput, "no scenarios to score on");
    const auto params = posterior_modes(w, all_parameters(w));
    WorldViewScore out;
    StoredScore stored;
    double sum = 0.0;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        ScoreOptions per = options;
        per.seed = derive_seed(options.seed, i);
        out.reports.push_back(score_model(ontology, scenarios[i], w, params, kb, per));
        sum += out.reports.back().model_score;
        stored.scenarios.push_back(scenarios[i].id);
    }
    out.score = sum / static_cast<double>(scenarios.size());
    stored.value = out.score;
    stored.rules_hash = content_hash(w);
    w.score = stored;
    return out;
}

struct Improvement {
    double delta = 0.0;
    std::vector<std::string> scenarios;
    std::vector<double> with_rule;
    std::vector<double> without_rule;
    ParameterAssignment fitted; // posterior modes of the candidate's parameters
    std::optional<CombinedFit> fit;
    WorldView candidate_view;
};

/*!
 * Change in mean model score from adding `candidate` to `base`.
 *
 * The candidate's parameters are fitted on all models (other parameters stay
 * at the base worldview's posterior modes), then every model is scored with
 * and without the rule under identical seeds. The delta is the mean of the
 * per-model differences; positive means the rule helps.
 */
inline Improvement rule_improvement(const Ontology& ontology, const WorldView& base, const Rule& candidate,
                                    const std::vector<Scenario>& models, const KnowledgeBase& kb,
                                    const FitOptions& fit, const ScoreOptions& score)
{
    if (models.empty())
        fail(ErrorCode::EmptyInput, "no models to evaluate the rule on");
    const auto base_params = posterior_modes(base, all_parameters(base));

    Improvement out;
    out.candidate_view = base;
    add_rule(out.candidate_view, candidate);
    ParameterAssignment with_params = base_params;
    if (!candidate.parameters.empty()) {
        ParameterGroup group;
        for (const auto& p : candidate.parameters)
            group.names.push_back(p.name);
        out.fit = fit_across_models(ontology, group, models, out.candidate_view, kb, fit);
        for (const auto& post : out.fit->overall) {
            out.fitted[post.parameter.name] = post.mode();
            with_params[post.parameter.name] = post.mode();
            set_posterior(out.candidate_view, post);
        }
    }

    double sum = 0.0;
    for (std::size_t i = 0; i < models.size(); ++i) {
        ScoreOptions per = score;
        per.seed = derive_seed(score.seed, i);
        const double without = score_model(ontology, models[i], base, base_params, kb, per).model_score;
        const double with = score_model(ontology, models[i], out.candidate_view, with_params, kb, per).model_score;
        out.scenarios.push_back(models[i].id);
        out.with_rule.push_back(with);
        out.without_rule.push_back(without);
        sum += with - without;
    }
    out.delta = sum / static_cast<double>(models.size());
    return out;
}

} // namespace abbl
