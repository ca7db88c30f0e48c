#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "abbl/posterior.hpp"
#include "abbl/scoring.hpp"

namespace abbl {

// Parameters learned jointly.
struct ParameterGroup {
    std::vector<std::string> names;
};

struct WeightedSample {
    std::vector<double> values; // in group order
    double weight = 0.0;
};

struct FitOptions {
    std::size_t n_samples = 1000;
    std::size_t n_runs_per_sample = 1;
    double tau = default_tau;
    std::size_t bins = default_bins;
    // weight = score^exponent
    double weight_exponent = 1.0;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    // Latin hypercube draws from the prior instead of independent ones.
    bool stratified = true;
};

struct FitResult {
    std::string scenario;
    std::vector<std::string> parameters;
    std::vector<Posterior> posteriors; // marginals, group order
    std::vector<WeightedSample> cloud;
    bool zero_evidence = false;
    ParameterAssignment fixed; // values of the free parameters outside the group

    const Posterior& posterior(std::string_view name) const
    {
        for (const auto& p : posteriors)
            if (p.parameter.name == name)
                return p;
        fail(ErrorCode::UnknownParameterInGroup, "fit has no parameter '" + std::string(name) + "'");
    }
};

namespace detail {

inline std::vector<std::vector<double>> prior_draws(const std::vector<UnknownParameter>& params,
                                                    std::size_t n, std::uint64_t seed, bool stratified)
{
    std::vector<std::vector<double>> draws(n, std::vector<double>(params.size()));
    RandomStream root = RandomStream(seed).split(0);
    for (std::size_t d = 0; d < params.size(); ++d) {
        RandomStream rng = root.split(d);
        const auto& p = params[d];
        if (stratified) {
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            for (std::size_t i = n; i > 1; --i)
                std::swap(perm[i - 1], perm[rng.below(i)]);
            for (std::size_t i = 0; i < n; ++i)
                draws[i][d] = p.lo + (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n) * p.width();
        } else {
            for (std::size_t i = 0; i < n; ++i)
                draws[i][d] = rng.uniform(p.lo, p.hi);
        }
    }
    return draws;
}

// Modes of every posterior the worldview holds; abc_fit reports the free
// parameters still missing.
inline ParameterAssignment fitted_modes(const WorldView& w)
{
    ParameterAssignment out;
    for (const auto& [name, p] : w.posteriors)
        out[name] = p.mode();
    return out;
}

} // namespace detail

/*!
 * Weighted-rejection ABC for one parameter group on one model.
 *
 * Draws n_samples assignments from the uniform prior over the declared
 * ranges, weights each by the model score (averaged over n_runs_per_sample
 * runs, raised to weight_exponent) and bins the weighted samples into one
 * marginal histogram per parameter. All samples share the same run seeds,
 * so weight differences come from the parameters alone. Parameters outside
 * the group take their values from `fixed`.
 */
inline FitResult abc_fit(const ModelScorer& scorer, const ParameterGroup& group,
                         const ParameterAssignment& fixed, const FitOptions& options)
{
    if (options.n_samples == 0)
        fail(ErrorCode::InvalidParameter, "n_samples must be at least 1");
    if (options.bins == 0)
        fail(ErrorCode::InvalidParameter, "bins must be at least 1");
    const auto& free = scorer.simulation().free_parameters();

    FitResult result;
    result.scenario = scorer.simulation().scenario().id;
    std::vector<UnknownParameter> params;
    for (const auto& name : group.names) {
        auto it = std::find_if(free.begin(), free.end(), [&](const UnknownParameter& p) { return p.name == name; });
        if (it == free.end())
            fail(ErrorCode::UnknownParameterInGroup,
                 "no effective rule in scenario '" + result.scenario + "' uses parameter '" + name + "'");
        if (std::find(result.parameters.begin(), result.parameters.end(), name) != result.parameters.end())
            fail(ErrorCode::UnknownParameterInGroup, "parameter '" + name + "' listed twice");
        params.push_back(*it);
        result.parameters.push_back(name);
    }
    for (const auto& p : free) {
        if (std::find(result.parameters.begin(), result.parameters.end(), p.name) != result.parameters.end())
            continue;
        auto it = fixed.find(p.name);
        if (it == fixed.end())
            fail(ErrorCode::UnfittedParameters, "parameter '" + p.name + "' is neither fitted nor fixed");
        result.fixed[p.name] = it->second;
    }

    const auto draws = detail::prior_draws(params, options.n_samples, options.seed, options.stratified);
    ScoreOptions score;
    score.n_runs = options.n_runs_per_sample;
    score.tau = options.tau;
    score.seed = derive_seed(options.seed, 1);
    score.threads = 1;

    std::vector<double> weights(options.n_samples, 0.0);
    parallel_for(options.n_samples, options.threads, [&](std::size_t i) {
        ParameterAssignment assignment = result.fixed;
        for (std::size_t d = 0; d < params.size(); ++d)
            assignment[params[d].name] = draws[i][d];
        const double s = scorer.score(assignment, score).model_score;
        weights[i] = options.weight_exponent == 1.0 ? s : std::pow(s, options.weight_exponent);
    });

    double total = 0.0;
    for (double w : weights)
        total += w;
    result.zero_evidence = !(total > 0.0);

    for (const auto& p : params) {
        Posterior post = Posterior::uniform(p, options.bins);
        if (!result.zero_evidence) {
            std::fill(post.bins.begin(), post.bins.end(), 0.0);
            const std::size_t d = result.posteriors.size();
            for (std::size_t i = 0; i < options.n_samples; ++i)
                post.bins[post.bin_of(draws[i][d])] += weights[i];
            for (double& m : post.bins)
                m /= total;
            post.normalize();
        }
        result.posteriors.push_back(std::move(post));
    }

    result.cloud.reserve(options.n_samples);
    for (std::size_t i = 0; i < options.n_samples; ++i)
        result.cloud.push_back(WeightedSample{draws[i], weights[i]});
    return result;
}

inline FitResult abc_fit(const Ontology& ontology, const ParameterGroup& group, const Scenario& scenario,
                         const WorldView& worldview, const KnowledgeBase& kb, const FitOptions& options)
{
    const ModelScorer scorer(ontology, scenario, worldview, kb);
    return abc_fit(scorer, group, detail::fitted_modes(worldview), options);
}

inline constexpr double posterior_floor = 1e-12;

/*!
 * Combines per-model posteriors of one parameter:
 *
 *   combined[b] ~ prior[b] * prod_i (posterior_i[b] / prior[b])
 *
 * The evidence terms P(E_i) are constants per model and vanish in the
 * normalization. Masses are floored at 1e-12 first. Inputs identical to the
 * prior contribute a factor of exactly one and are skipped; the remaining
 * per-bin log factors are summed in sorted order, so the result does not
 * depend on input order.
 */
inline Posterior combine_posteriors(std::span<const Posterior> posteriors, const Posterior& prior)
{
    if (posteriors.empty())
        fail(ErrorCode::EmptyInput, "nothing to combine");
    for (double m : prior.bins)
        if (!(m > 0.0) || !std::isfinite(m))
            fail(ErrorCode::InvalidPrior, "prior must be strictly positive on every bin");
    std::vector<const Posterior*> informative;
    for (const auto& p : posteriors) {
        if (!p.same_grid(prior))
            fail(ErrorCode::GridMismatch, "posterior for '" + p.parameter.name + "' [" +
                                              format_number(p.parameter.lo) + ", " + format_number(p.parameter.hi) +
                                              "] x" + std::to_string(p.size()) + " does not match the prior grid");
        if (p.bins != prior.bins)
            informative.push_back(&p);
    }

    Posterior out{prior.parameter, prior.bins};
    if (informative.empty()) {
        out.normalize();
        return out;
    }
    if (informative.size() == 1) {
        out.bins = informative.front()->bins;
        for (double& m : out.bins)
            m = std::max(m, posterior_floor);
        out.normalize();
        return out;
    }

    const double extra = static_cast<double>(informative.size() - 1);
    std::vector<double> logs(informative.size());
    std::vector<double> log_mass(prior.size());
    for (std::size_t b = 0; b < prior.size(); ++b) {
        for (std::size_t i = 0; i < informative.size(); ++i)
            logs[i] = std::log(std::max(informative[i]->bins[b], posterior_floor));
        std::sort(logs.begin(), logs.end());
        double acc = 0.0;
        for (double l : logs)
            acc += l;
        log_mass[b] = acc - extra * std::log(prior.bins[b]);
    }
    const double peak = *std::max_element(log_mass.begin(), log_mass.end());
    for (std::size_t b = 0; b < prior.size(); ++b)
        out.bins[b] = std::exp(log_mass[b] - peak);
    out.normalize();
    return out;
}

struct CombinedFit {
    std::vector<Posterior> overall; // group order
    std::vector<FitResult> per_model;
    std::vector<std::string> skipped;  // scenarios no rule of which uses the group
    std::vector<std::string> warnings;

    const Posterior& posterior(std::string_view name) const
    {
        for (const auto& p : overall)
            if (p.parameter.name == name)
                return p;
        fail(ErrorCode::UnknownParameterInGroup, "fit has no parameter '" + std::string(name) + "'");
    }
};

/*!
 * Fits the group on every applicable scenario with a shared uniform prior
 * and combines the per-model marginals. Joint structure within the group
 * survives only inside each model's sample cloud.
 */
inline CombinedFit fit_across_models(const Ontology& ontology, const ParameterGroup& group,
                                     const std::vector<Scenario>& scenarios, const WorldView& worldview,
                                     const KnowledgeBase& kb, const FitOptions& options)
{
    CombinedFit out;
    std::vector<std::set<std::string>> entity_sets;
    std::vector<std::string> fitted_ids;
    for (std::size_t m = 0; m < scenarios.size(); ++m) {
        const ModelScorer scorer(ontology, scenarios[m], worldview, kb);
        const auto& free = scorer.simulation().free_parameters();
        std::size_t used = 0;
        for (const auto& name : group.names)
            used += std::any_of(free.begin(), free.end(), [&](const UnknownParameter& p) { return p.name == name; });
        if (used == 0) {
            out.skipped.push_back(scenarios[m].id);
            continue;
        }
        FitOptions per = options;
        per.seed = derive_seed(options.seed, m);
        out.per_model.push_back(abc_fit(scorer, group, detail::fitted_modes(worldview), per));

        std::set<std::string> entities;
        for (const auto& c : scorer.candidates())
            entities.insert(c.entities.begin(), c.entities.end());
        for (std::size_t j = 0; j < entity_sets.size(); ++j) {
            std::vector<std::string> shared;
            std::set_intersection(entities.begin(), entities.end(), entity_sets[j].begin(), entity_sets[j].end(),
                                  std::back_inserter(shared));
            if (!shared.empty())
                out.warnings.push_back("scenarios '" + fitted_ids[j] + "' and '" + scenarios[m].id +
                                       "' share entities (first: '" + shared.front() +
                                       "'); their evidence is treated as independent");
        }
        entity_sets.push_back(std::move(entities));
        fitted_ids.push_back(scenarios[m].id);
    }
    if (out.per_model.empty())
        fail(ErrorCode::NoApplicableModel, "no scenario uses the parameters being fitted");

    for (std::size_t d = 0; d < group.names.size(); ++d) {
        std::vector<Posterior> inputs;
        for (const auto& fit : out.per_model)
            inputs.push_back(fit.posteriors[d]);
        const Posterior prior = Posterior::uniform(inputs.front().parameter, options.bins);
        out.overall.push_back(combine_posteriors(inputs, prior));
    }
    return out;
}

} // namespace abbl
