#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "abbl/knowledge.hpp"
#include "abbl/parallel.hpp"
#include "abbl/scenario.hpp"
#include "abbl/worldview.hpp"

namespace abbl {

// slot name -> entity id
using Binding = std::map<std::string, std::string, std::less<>>;

struct SimulationState {
    std::size_t step = 0;
    // [slot][effective attribute index]; empty optionals are attributes with
    // no known value.
    std::vector<std::vector<std::optional<Value>>> values;

    friend bool operator==(const SimulationState&, const SimulationState&) = default;
};

// One state per step, 0..n_steps.
using Trajectory = std::vector<SimulationState>;

// Seed of the index-th child stream; used for per-run and per-entity seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept
{
    return RandomStream(seed).split(index).next();
}

inline bool same_time(double a, double b) noexcept
{
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

/*!
 * A scenario compiled against a worldview.
 *
 * Construction resolves every attribute path of every effective rule to a
 * (slot, attribute) pair, so missing relation links fail up front. The
 * object is immutable afterwards; run() may be called concurrently.
 *
 * Updates are synchronous: every rule reads the start-of-step snapshot, and
 * when several rules of one agent write the same attribute the last one wins.
 */
class Simulation {
  public:
    Simulation(const Ontology& ontology, Scenario scenario, const WorldView& worldview)
        : scenario_(std::move(scenario))
    {
        validate(scenario_, ontology);
        slots_.resize(scenario_.agents.size());
        for (std::size_t s = 0; s < slots_.size(); ++s) {
            const auto& slot = scenario_.agents[s];
            auto& plan = slots_[s];
            plan.attributes = ontology.effective_attributes(slot.type);
            plan.required.assign(plan.attributes.size(), false);
            if (slot.filter)
                plan.filter = parse_filter(ontology, slot.type, *slot.filter);
        }
        for (const auto& link : scenario_.relations)
            slots_[*scenario_.slot_index(link.source)].links.emplace_back(
                link.relation, *scenario_.slot_index(link.target));

        deterministic_ = true;
        for (std::size_t s = 0; s < slots_.size(); ++s) {
            auto& plan = slots_[s];
            std::map<std::size_t, std::vector<std::string>> writers;
            for (auto& rule : effective_rules(ontology, worldview, scenario_.agents[s].type)) {
                deterministic_ &= !rule.probabilistic;
                for (const auto& p : rule.parameters)
                    if (std::none_of(params_.begin(), params_.end(),
                                     [&](const UnknownParameter& q) { return q.name == p.name; }))
                        params_.push_back(p);
                const std::size_t target = attribute_index(s, rule.target.attribute).value();
                CompiledRule compiled{std::move(rule), target};
                const Rule& r = compiled.rule;
                auto add_paths = [&](const Expr& e) {
                    if (e.kind != ExprKind::path)
                        return;
                    auto resolved = resolve_static(s, e.path);
                    if (!resolved)
                        fail(ErrorCode::UnresolvedPath,
                             "slot '" + scenario_.agents[s].name + "' cannot resolve " + to_string(e.path) +
                                 " in rule '" + print(r) + "'");
                    plan.paths.push_back(ResolvedPath{&e.path, resolved->first, resolved->second});
                    slots_[resolved->first].required[resolved->second] = true;
                };
                if (r.condition)
                    for_each_node(*r.condition, add_paths);
                for_each_node(*r.effect, add_paths);
                writers[compiled.target].push_back(r.id.empty() ? print(r) : r.id);
                plan.rules.push_back(std::move(compiled));
            }
            for (const auto& [attr, ids] : writers)
                if (ids.size() > 1) {
                    std::string list;
                    for (const auto& id : ids)
                        list += (list.empty() ? "" : ", ") + id;
                    warnings_.push_back("slot '" + scenario_.agents[s].name + "': rules " + list +
                                        " all write [" + plan.attributes[attr].name +
                                        "]; the last one wins");
                }
        }
        for (const auto& obs : scenario_.observed) {
            const std::size_t s = *scenario_.slot_index(obs.slot);
            slots_[s].required[attribute_index(s, obs.attribute).value()] = true;
        }
    }

    const Scenario& scenario() const noexcept { return scenario_; }
    std::size_t slot_count() const noexcept { return slots_.size(); }
    const std::vector<AttributeDef>& attributes(std::size_t slot) const { return slots_.at(slot).attributes; }

    std::optional<std::size_t> attribute_index(std::size_t slot, std::string_view name) const
    {
        const auto& attrs = slots_.at(slot).attributes;
        for (std::size_t i = 0; i < attrs.size(); ++i)
            if (attrs[i].name == name)
                return i;
        return std::nullopt;
    }

    // Free parameters of all effective rules, in first-use order.
    const std::vector<UnknownParameter>& free_parameters() const noexcept { return params_; }

    // True when no effective rule is probabilistic: runs consume no
    // randomness and every seed yields the same trajectory.
    bool deterministic() const noexcept { return deterministic_; }

    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    bool required(std::size_t slot, std::size_t attribute) const { return slots_.at(slot).required.at(attribute); }

    std::size_t rule_count(std::size_t slot) const { return slots_.at(slot).rules.size(); }

    const ExprPtr& filter(std::size_t slot) const { return slots_.at(slot).filter; }

    // Step-0 values for one slot: the latest observation at or before the
    // start time, then the slot's explicit initial values on top.
    std::vector<std::optional<Value>> initial_values(std::size_t s, const Timeline* timeline) const
    {
        const auto& plan = slots_.at(s);
        const auto& slot = scenario_.agents[s];
        std::vector<std::optional<Value>> values(plan.attributes.size());
        for (std::size_t a = 0; a < plan.attributes.size(); ++a) {
            const auto& name = plan.attributes[a].name;
            if (auto it = slot.initial.find(name); it != slot.initial.end()) {
                values[a] = it->second;
                continue;
            }
            if (!timeline)
                continue;
            const auto* series = timeline->find(name);
            if (!series)
                continue;
            for (const auto& point : *series) {
                if (point.time > scenario_.start_time && !same_time(point.time, scenario_.start_time))
                    break;
                values[a] = point.value;
            }
        }
        for (std::size_t a = 0; a < values.size(); ++a)
            if (plan.required[a] && !values[a])
                fail(ErrorCode::MissingInitialValue,
                     "slot '" + slot.name + "'" + (timeline ? " (entity '" + timeline->entity_id + "')" : "") +
                         " has no value for '" + plan.attributes[a].name + "' at t=" +
                         format_number(scenario_.start_time));
        return values;
    }

    SimulationState initialize(const KnowledgeBase& kb, const Ontology& ontology, const Binding& binding = {}) const
    {
        SimulationState state;
        state.values.resize(slots_.size());
        for (std::size_t s = 0; s < slots_.size(); ++s) {
            const auto& slot = scenario_.agents[s];
            std::optional<std::string> entity = slot.entity;
            if (auto it = binding.find(slot.name); it != binding.end())
                entity = it->second;
            std::optional<Timeline> timeline;
            if (entity) {
                timeline = kb.timeline(*entity);
                if (!ontology.subtype_of(timeline->agent_type, slot.type))
                    fail(ErrorCode::InvalidScenario, "entity '" + *entity + "' is a '" + timeline->agent_type +
                                                         "', slot '" + slot.name + "' needs a '" + slot.type + "'");
            }
            state.values[s] = initial_values(s, timeline ? &*timeline : nullptr);
        }
        return state;
    }

    SimulationState step(const SimulationState& state, const ParameterAssignment& params, RandomStream& rng) const
    {
        check(params);
        return advance(state, params, rng);
    }

    Trajectory run(const SimulationState& initial, const ParameterAssignment& params, std::uint64_t seed) const
    {
        check(params);
        RandomStream rng(seed);
        Trajectory out;
        out.reserve(scenario_.n_steps + 1);
        out.push_back(initial);
        for (std::size_t k = 0; k < scenario_.n_steps; ++k)
            out.push_back(advance(out.back(), params, rng));
        return out;
    }

    // Value of a slot attribute in a state, if set.
    const Value* value(const SimulationState& state, std::size_t slot, std::size_t attribute) const
    {
        const auto& v = state.values.at(slot).at(attribute);
        return v ? &*v : nullptr;
    }

  private:
    struct ResolvedPath {
        const AttrPath* key;
        std::size_t slot;
        std::size_t attribute;
    };
    struct CompiledRule {
        Rule rule;
        std::size_t target;
    };
    struct SlotPlan {
        std::vector<AttributeDef> attributes;
        std::vector<bool> required;
        std::vector<std::pair<std::string, std::size_t>> links;
        std::vector<CompiledRule> rules;
        std::vector<ResolvedPath> paths;
        ExprPtr filter;
    };

    class SlotContext final : public EvalContext {
      public:
        SlotContext(const Simulation& sim, const SimulationState& state, std::size_t slot)
            : sim_(sim), state_(state), slot_(slot)
        {
        }

        const Value* lookup(const AttrPath& path) const override
        {
            for (const auto& rp : sim_.slots_[slot_].paths)
                if (rp.key == &path)
                    return sim_.value(state_, rp.slot, rp.attribute);
            auto resolved = sim_.resolve_static(slot_, path);
            return resolved ? sim_.value(state_, resolved->first, resolved->second) : nullptr;
        }

      private:
        const Simulation& sim_;
        const SimulationState& state_;
        std::size_t slot_;
    };

    std::optional<std::pair<std::size_t, std::size_t>> resolve_static(std::size_t slot, const AttrPath& path) const
    {
        std::size_t cur = slot;
        for (const auto& rel : path.relations) {
            const auto& links = slots_[cur].links;
            auto it = std::find_if(links.begin(), links.end(), [&](const auto& l) { return l.first == rel; });
            if (it == links.end())
                return std::nullopt;
            cur = it->second;
        }
        auto attr = attribute_index(cur, path.attribute);
        if (!attr)
            return std::nullopt;
        return std::pair{cur, *attr};
    }

    void check(const ParameterAssignment& params) const
    {
        for (const auto& plan : slots_)
            for (const auto& r : plan.rules)
                check_parameters(r.rule, params);
    }

    SimulationState advance(const SimulationState& state, const ParameterAssignment& params, RandomStream& rng) const
    {
        SimulationState next = state;
        next.step = state.step + 1;
        for (std::size_t s = 0; s < slots_.size(); ++s) {
            const SlotContext ctx(*this, state, s);
            for (const auto& r : slots_[s].rules)
                if (rule_fires(r.rule, ctx, params, rng))
                    next.values[s][r.target] = effect_value(r.rule, ctx, params);
        }
        return next;
    }

    Scenario scenario_;
    std::vector<SlotPlan> slots_;
    std::vector<UnknownParameter> params_;
    bool deterministic_ = true;
    std::vector<std::string> warnings_;
};

inline Trajectory run(const Ontology& ontology, const Scenario& scenario, const WorldView& worldview,
                      const KnowledgeBase& kb, const ParameterAssignment& params, std::uint64_t seed,
                      const Binding& binding = {})
{
    const Simulation sim(ontology, scenario, worldview);
    return sim.run(sim.initialize(kb, ontology, binding), params, seed);
}

inline constexpr std::array<double, 5> prediction_levels{0.05, 0.25, 0.50, 0.75, 0.95};

// Inverse-CDF quantile of sorted samples: the smallest x with F(x) >= q.
inline double empirical_quantile(const std::vector<double>& sorted, double q)
{
    if (sorted.empty())
        return std::nan("");
    const double pos = std::ceil(q * static_cast<double>(sorted.size()));
    const auto idx = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(sorted.size()))) - 1;
    return sorted[idx];
}

struct OutcomeSummary {
    std::size_t slot = 0;
    std::size_t attribute = 0;
    std::size_t step = 0;
    double time = 0.0;
    std::string slot_name;
    std::string attribute_name;
    AttributeKind kind = AttributeKind::continuous;
    std::vector<double> samples; // continuous, in run order
    std::array<double, 5> quantiles{};
    std::vector<std::size_t> histogram; // continuous, equal bins over the range
    double histogram_lo = 0.0;
    double histogram_hi = 0.0;
    std::map<std::string, std::size_t> counts; // other kinds, by formatted value
    std::size_t missing = 0;

    double band_width() const noexcept { return quantiles[4] - quantiles[0]; }
};

struct Prediction {
    std::size_t n_runs = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> parameters;
    std::vector<std::vector<double>> draws; // [run][parameter]
    std::vector<OutcomeSummary> outcomes;   // slot-major, then attribute, then step

    const OutcomeSummary* find(std::string_view slot, std::string_view attribute, std::size_t step) const
    {
        for (const auto& o : outcomes)
            if (o.slot_name == slot && o.attribute_name == attribute && o.step == step)
                return &o;
        return nullptr;
    }
};

// Stream drawing run i's parameter values; the run itself uses
// derive_seed(seed, i).
inline RandomStream parameter_stream(std::uint64_t seed, std::uint64_t run) noexcept
{
    return RandomStream(seed).split(run).split(1);
}

/*!
 * Monte Carlo prediction. Run i draws one value per free parameter from its
 * posterior (bin centers, so a single-bin posterior is a point mass), then
 * simulates with seed derive_seed(seed, i).
 */
inline Prediction predict(const Simulation& sim, const SimulationState& initial,
                          const std::map<std::string, Posterior>& posteriors, std::size_t n_runs,
                          std::uint64_t seed, unsigned threads = 1, std::size_t histogram_bins = 20)
{
    if (n_runs == 0)
        fail(ErrorCode::InvalidParameter, "predict needs at least one run");
    std::vector<const Posterior*> sources;
    Prediction out;
    out.n_runs = n_runs;
    out.seed = seed;
    for (const auto& p : sim.free_parameters()) {
        auto it = posteriors.find(p.name);
        if (it == posteriors.end())
            fail(ErrorCode::MissingPosterior, "no posterior for parameter '" + p.name + "'");
        sources.push_back(&it->second);
        out.parameters.push_back(p.name);
    }

    const auto& scenario = sim.scenario();
    for (std::size_t s = 0; s < sim.slot_count(); ++s)
        for (std::size_t a = 0; a < sim.attributes(s).size(); ++a)
            for (std::size_t k = 0; k <= scenario.n_steps; ++k) {
                OutcomeSummary o;
                o.slot = s;
                o.attribute = a;
                o.step = k;
                o.time = scenario.time_at(k);
                o.slot_name = scenario.agents[s].name;
                o.attribute_name = sim.attributes(s)[a].name;
                o.kind = sim.attributes(s)[a].kind;
                out.outcomes.push_back(std::move(o));
            }

    out.draws.assign(n_runs, {});
    std::vector<std::vector<std::optional<Value>>> finals(n_runs);
    parallel_for(n_runs, threads, [&](std::size_t i) {
        auto rng = parameter_stream(seed, i);
        ParameterAssignment params;
        auto& draw = out.draws[i];
        for (std::size_t j = 0; j < sources.size(); ++j) {
            draw.push_back(sources[j]->sample_center(rng));
            params[out.parameters[j]] = draw.back();
        }
        const auto trajectory = sim.run(initial, params, derive_seed(seed, i));
        auto& flat = finals[i];
        flat.reserve(out.outcomes.size());
        for (const auto& o : out.outcomes)
            flat.push_back(trajectory[o.step].values[o.slot][o.attribute]);
    });

    for (std::size_t j = 0; j < out.outcomes.size(); ++j) {
        auto& o = out.outcomes[j];
        const auto& def = sim.attributes(o.slot)[o.attribute];
        if (o.kind == AttributeKind::continuous) {
            o.histogram_lo = def.lo;
            o.histogram_hi = def.hi;
            o.histogram.assign(histogram_bins, 0);
        }
        for (std::size_t i = 0; i < n_runs; ++i) {
            const auto& v = finals[i][j];
            if (!v) {
                ++o.missing;
                continue;
            }
            if (o.kind == AttributeKind::continuous) {
                const double x = std::get<double>(*v);
                o.samples.push_back(x);
                const double u = (x - def.lo) / def.width() * static_cast<double>(histogram_bins);
                o.histogram[std::min(histogram_bins - 1, static_cast<std::size_t>(std::max(0.0, u)))] += 1;
            } else {
                o.counts[format_value(*v)] += 1;
            }
        }
        if (o.kind == AttributeKind::continuous) {
            auto sorted = o.samples;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t q = 0; q < prediction_levels.size(); ++q)
                o.quantiles[q] = empirical_quantile(sorted, prediction_levels[q]);
        }
    }
    return out;
}

} // namespace abbl
