#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "abbl/simulation.hpp"

namespace abbl {

inline constexpr double default_tau = 0.25;

/*!
 * Agreement between a simulated and an observed value, in [0, 1].
 *
 * Continuous attributes use a triangular kernel whose half-width is tau times
 * the attribute's range: max(0, 1 - |sim - obs| / (tau * (hi - lo))). All
 * other kinds score 1 on equality and 0 otherwise.
 */
inline double value_score(const Value& sim, const Value& obs, const AttributeDef& attr, double tau)
{
    if (!(tau > 0.0))
        fail(ErrorCode::InvalidParameter, "tau must be positive");
    auto mismatch = [&] {
        fail(ErrorCode::KindMismatch, "values do not match the kind of attribute '" + attr.name + "'");
    };
    switch (attr.kind) {
    case AttributeKind::continuous: {
        const double* a = std::get_if<double>(&sim);
        const double* b = std::get_if<double>(&obs);
        if (!a || !b)
            mismatch();
        return std::max(0.0, 1.0 - std::abs(*a - *b) / (tau * attr.width()));
    }
    case AttributeKind::boolean:
        if (!std::holds_alternative<bool>(sim) || !std::holds_alternative<bool>(obs))
            mismatch();
        return sim == obs ? 1.0 : 0.0;
    case AttributeKind::categorical:
    case AttributeKind::text:
        if (!std::holds_alternative<std::string>(sim) || !std::holds_alternative<std::string>(obs))
            mismatch();
        return sim == obs ? 1.0 : 0.0;
    }
    return 0.0;
}

// Observed points that fall on a simulated step, precomputed once per entity
// binding.
struct ComparisonPlan {
    struct Point {
        std::size_t slot;
        std::size_t attribute;
        std::size_t step;
        std::size_t key; // index into keys
        Value observed;
    };
    std::vector<Point> points;
    std::vector<std::string> keys; // "slot.attribute"
    std::size_t off_grid = 0;      // between steps
    std::size_t out_of_horizon = 0;
};

// `timelines` is indexed by slot; nullptr for slots without an entity.
inline ComparisonPlan build_plan(const Simulation& sim, const std::vector<const Timeline*>& timelines)
{
    const auto& scenario = sim.scenario();
    ComparisonPlan plan;
    for (const auto& obs : scenario.observed) {
        const std::size_t s = *scenario.slot_index(obs.slot);
        const std::size_t a = sim.attribute_index(s, obs.attribute).value();
        const std::size_t key = plan.keys.size();
        plan.keys.push_back(obs.slot + "." + obs.attribute);
        const Timeline* tl = s < timelines.size() ? timelines[s] : nullptr;
        const auto* series = tl ? tl->find(obs.attribute) : nullptr;
        if (!series)
            continue;
        for (const auto& point : *series) {
            const double k = std::round((point.time - scenario.start_time) / scenario.dt);
            if (k < 0.0 || k > static_cast<double>(scenario.n_steps)) {
                ++plan.out_of_horizon;
                continue;
            }
            const auto step = static_cast<std::size_t>(k);
            if (!same_time(scenario.time_at(step), point.time)) {
                ++plan.off_grid;
                continue;
            }
            plan.points.push_back(ComparisonPlan::Point{s, a, step, key, point.value});
        }
    }
    return plan;
}

struct RunDetail {
    std::vector<double> sum;        // per key
    std::vector<std::size_t> count; // per key
};

// Mean value score over the plan's points; nullopt when nothing is
// comparable.
inline std::optional<double> score_run(const Simulation& sim, const Trajectory& trajectory,
                                       const ComparisonPlan& plan, double tau, RunDetail* detail = nullptr)
{
    if (detail) {
        detail->sum.assign(plan.keys.size(), 0.0);
        detail->count.assign(plan.keys.size(), 0);
    }
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& p : plan.points) {
        if (p.step >= trajectory.size())
            continue;
        const Value* v = sim.value(trajectory[p.step], p.slot, p.attribute);
        if (!v)
            continue;
        const double score = value_score(*v, p.observed, sim.attributes(p.slot)[p.attribute], tau);
        total += score;
        ++n;
        if (detail) {
            detail->sum[p.key] += score;
            detail->count[p.key] += 1;
        }
    }
    if (n == 0)
        return std::nullopt;
    return total / static_cast<double>(n);
}

// Convenience form keyed by slot name.
inline std::optional<double> score_run(const Simulation& sim, const Trajectory& trajectory,
                                       const std::map<std::string, Timeline>& by_slot, double tau)
{
    std::vector<const Timeline*> timelines(sim.slot_count(), nullptr);
    for (std::size_t s = 0; s < sim.slot_count(); ++s)
        if (auto it = by_slot.find(sim.scenario().agents[s].name); it != by_slot.end())
            timelines[s] = &it->second;
    return score_run(sim, trajectory, build_plan(sim, timelines), tau);
}

struct ScoreOptions {
    std::size_t n_runs = 1;
    double tau = default_tau;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct ScoreReport {
    std::string scenario;
    double model_score = 0.0;
    std::map<std::string, double> per_entity;
    std::map<std::string, double> per_attribute;
    std::size_t n_runs = 0;
    std::vector<std::string> undefined_entities;
    std::size_t off_grid = 0;
    std::size_t out_of_horizon = 0;
};

/*!
 * Scores one scenario under one worldview.
 *
 * Slots without an entity are generalized over: every knowledge-base entity
 * of the slot's type (or a subtype) that has the required initial values and
 * passes the slot filter is a candidate, and with several such slots every
 * combination of distinct entities is scored. Candidates are fixed at
 * construction; score() only varies parameters and seeds.
 */
class ModelScorer {
  public:
    struct Candidate {
        std::string key;
        Binding binding;
        SimulationState initial;
        ComparisonPlan plan;
        std::vector<std::string> entities;
    };

    ModelScorer(const Ontology& ontology, const Scenario& scenario, const WorldView& worldview,
                const KnowledgeBase& kb)
        : sim_(ontology, scenario, worldview)
    {
        const auto& sc = sim_.scenario();
        const std::size_t n = sim_.slot_count();
        std::vector<std::optional<Timeline>> fixed(n);
        std::vector<std::size_t> open;
        for (std::size_t s = 0; s < n; ++s) {
            const auto& slot = sc.agents[s];
            if (slot.entity) {
                fixed[s] = kb.timeline(*slot.entity);
                if (!ontology.subtype_of(fixed[s]->agent_type, slot.type))
                    fail(ErrorCode::InvalidScenario, "entity '" + *slot.entity + "' is not a '" + slot.type + "'");
            } else {
                open.push_back(s);
            }
        }

        // Per open slot, the entities that can initialize it.
        std::vector<std::vector<std::pair<std::string, Timeline>>> eligible(open.size());
        for (std::size_t i = 0; i < open.size(); ++i) {
            const std::size_t s = open[i];
            for (const auto& id : kb.entities_of_type(ontology, sc.agents[s].type)) {
                Timeline tl = kb.timeline(id);
                std::vector<std::optional<Value>> values;
                try {
                    values = sim_.initial_values(s, &tl);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::MissingInitialValue)
                        throw;
                    continue;
                }
                if (const auto& f = sim_.filter(s)) {
                    MapContext ctx;
                    for (std::size_t a = 0; a < values.size(); ++a)
                        if (values[a])
                            ctx.attributes.emplace(sim_.attributes(s)[a].name, *values[a]);
                    bool pass = false;
                    try {
                        pass = eval_bool(*f, ctx, {});
                    } catch (const Error& e) {
                        if (e.code() != ErrorCode::UnresolvedPath)
                            throw;
                    }
                    if (!pass)
                        continue;
                }
                eligible[i].emplace_back(id, std::move(tl));
            }
        }

        std::vector<std::size_t> choice(open.size(), 0);
        const bool any_empty = std::any_of(eligible.begin(), eligible.end(), [](const auto& v) { return v.empty(); });
        while (!any_empty) {
            std::vector<const Timeline*> timelines(n, nullptr);
            std::vector<std::string> chosen;
            for (std::size_t s = 0; s < n; ++s)
                if (fixed[s])
                    timelines[s] = &*fixed[s];
            for (std::size_t i = 0; i < open.size(); ++i) {
                const auto& [id, tl] = eligible[i][choice[i]];
                timelines[open[i]] = &tl;
                chosen.push_back(id);
            }
            auto sorted = chosen;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end())
                add_candidate(timelines, open);

            // odometer over the open slots
            std::size_t i = 0;
            for (; i < open.size(); ++i) {
                if (++choice[i] < eligible[i].size())
                    break;
                choice[i] = 0;
            }
            if (i == open.size())
                break;
        }
        if (candidates_.empty())
            fail(ErrorCode::NoEligibleEntity, "scenario '" + sc.id + "' has no eligible entity binding");
    }

    const Simulation& simulation() const noexcept { return sim_; }
    const std::vector<Candidate>& candidates() const noexcept { return candidates_; }

    ScoreReport score(const ParameterAssignment& params, const ScoreOptions& options) const
    {
        if (options.n_runs == 0)
            fail(ErrorCode::InvalidParameter, "n_runs must be at least 1");
        const std::size_t runs = sim_.deterministic() ? 1 : options.n_runs;
        const std::size_t total = candidates_.size() * runs;
        std::vector<std::optional<double>> scores(total);
        std::vector<RunDetail> details(total);
        parallel_for(total, options.threads, [&](std::size_t job) {
            const std::size_t c = job / runs;
            const std::size_t r = job % runs;
            const auto& cand = candidates_[c];
            const auto trajectory = sim_.run(cand.initial, params, derive_seed(derive_seed(options.seed, c), r));
            scores[job] = score_run(sim_, trajectory, cand.plan, options.tau, &details[job]);
        });

        ScoreReport report;
        report.scenario = sim_.scenario().id;
        report.n_runs = options.n_runs;
        std::map<std::string, std::pair<double, std::size_t>> attr_acc;
        double sum = 0.0;
        std::size_t defined = 0;
        for (std::size_t c = 0; c < candidates_.size(); ++c) {
            const auto& cand = candidates_[c];
            report.off_grid += cand.plan.off_grid;
            report.out_of_horizon += cand.plan.out_of_horizon;
            if (!scores[c * runs]) {
                report.undefined_entities.push_back(cand.key);
                continue;
            }
            double entity_sum = 0.0;
            std::vector<double> key_sum(cand.plan.keys.size(), 0.0);
            for (std::size_t r = 0; r < runs; ++r) {
                const std::size_t job = c * runs + r;
                entity_sum += *scores[job];
                for (std::size_t k = 0; k < key_sum.size(); ++k)
                    if (details[job].count[k] > 0)
                        key_sum[k] += details[job].sum[k] / static_cast<double>(details[job].count[k]);
            }
            const double entity_score = entity_sum / static_cast<double>(runs);
            report.per_entity[cand.key] = entity_score;
            sum += entity_score;
            ++defined;
            for (std::size_t k = 0; k < key_sum.size(); ++k)
                if (details[c * runs].count[k] > 0) {
                    auto& acc = attr_acc[cand.plan.keys[k]];
                    acc.first += key_sum[k] / static_cast<double>(runs);
                    acc.second += 1;
                }
        }
        if (defined == 0)
            fail(ErrorCode::NoComparableData,
                 "scenario '" + sim_.scenario().id + "': no observation lines up with a simulated step");
        report.model_score = sum / static_cast<double>(defined);
        for (const auto& [key, acc] : attr_acc)
            report.per_attribute[key] = acc.first / static_cast<double>(acc.second);
        return report;
    }

  private:
    void add_candidate(const std::vector<const Timeline*>& timelines, const std::vector<std::size_t>& open)
    {
        const auto& sc = sim_.scenario();
        Candidate cand;
        cand.initial.values.resize(sim_.slot_count());
        for (std::size_t s = 0; s < sim_.slot_count(); ++s) {
            cand.initial.values[s] = sim_.initial_values(s, timelines[s]);
            if (timelines[s]) {
                cand.binding[sc.agents[s].name] = timelines[s]->entity_id;
                cand.entities.push_back(timelines[s]->entity_id);
            }
        }
        cand.plan = build_plan(sim_, timelines);
        if (open.size() == 1) {
            cand.key = timelines[open[0]]->entity_id;
        } else if (open.empty()) {
            for (const auto& id : cand.entities)
                cand.key += (cand.key.empty() ? "" : ";") + id;
            if (cand.key.empty())
                cand.key = sc.id;
        } else {
            for (std::size_t s : open)
                cand.key += (cand.key.empty() ? "" : ";") + sc.agents[s].name + "=" + timelines[s]->entity_id;
        }
        candidates_.push_back(std::move(cand));
    }

    Simulation sim_;
    std::vector<Candidate> candidates_;
};

inline ScoreReport score_model(const Ontology& ontology, const Scenario& scenario, const WorldView& worldview,
                               const ParameterAssignment& params, const KnowledgeBase& kb,
                               const ScoreOptions& options)
{
    return ModelScorer(ontology, scenario, worldview, kb).score(params, options);
}

} // namespace abbl
