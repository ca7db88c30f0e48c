#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "abbl/ontology.hpp"
#include "abbl/rules.hpp"

namespace abbl {

struct AgentSlot {
    std::string name;
    TypeId type;
    std::optional<std::string> entity;
    // Boolean DSL expression over the slot type's own attributes, evaluated
    // on an entity's initial values when the scorer enumerates candidates.
    std::optional<std::string> filter;
    // Initial values that override (or stand in for) knowledge-base values.
    std::map<std::string, Value> initial;
};

struct RelationLink {
    std::string source;
    std::string relation;
    std::string target;
};

struct ObservedAttribute {
    std::string slot;
    std::string attribute;
};

struct Scenario {
    std::string id;
    std::vector<AgentSlot> agents;
    std::vector<RelationLink> relations;
    double dt = 1.0;
    std::size_t n_steps = 1;
    // Scenario time of step 0; step k is at start_time + k * dt.
    double start_time = 0.0;
    std::vector<ObservedAttribute> observed;

    double time_at(std::size_t step) const noexcept
    {
        return start_time + static_cast<double>(step) * dt;
    }

    std::optional<std::size_t> slot_index(std::string_view name) const
    {
        for (std::size_t i = 0; i < agents.size(); ++i)
            if (agents[i].name == name)
                return i;
        return std::nullopt;
    }
};

// Checks structure against the ontology and resolves type references to ids.
inline void validate(Scenario& s, const Ontology& ontology)
{
    auto bad = [&](const std::string& msg) { fail(ErrorCode::InvalidScenario, "scenario '" + s.id + "': " + msg); };
    if (!(s.dt > 0.0) || !std::isfinite(s.dt))
        bad("dt must be positive");
    if (s.n_steps < 1)
        bad("n_steps must be at least 1");
    if (!std::isfinite(s.start_time))
        bad("start_time must be finite");
    if (s.agents.empty())
        bad("no agents");

    std::set<std::string> names;
    for (auto& slot : s.agents) {
        if (slot.name.empty() || !names.insert(slot.name).second)
            bad("slot names must be unique and non-empty ('" + slot.name + "')");
        slot.type = ontology.resolve(slot.type);
        for (const auto& [attr, value] : slot.initial) {
            auto def = ontology.find_attribute(slot.type, attr);
            if (!def)
                bad("slot '" + slot.name + "' has no attribute '" + attr + "'");
            if (!conforms(value, *def))
                bad("initial value for '" + slot.name + "." + attr + "' does not fit its attribute");
        }
        if (slot.filter)
            parse_filter(ontology, slot.type, *slot.filter);
    }

    std::set<std::pair<std::string, std::string>> links;
    for (const auto& link : s.relations) {
        auto src = s.slot_index(link.source);
        auto dst = s.slot_index(link.target);
        if (!src || !dst)
            bad("relation '" + link.relation + "' references an undeclared slot");
        auto def = ontology.find_relation(s.agents[*src].type, link.relation);
        if (!def)
            bad("type '" + s.agents[*src].type + "' has no relation '" + link.relation + "'");
        if (!ontology.subtype_of(s.agents[*dst].type, def->target_type))
            bad("relation '" + link.relation + "' expects a '" + def->target_type + "', slot '" +
                link.target + "' is a '" + s.agents[*dst].type + "'");
        if (!links.emplace(link.source, link.relation).second)
            bad("slot '" + link.source + "' links relation '" + link.relation + "' twice");
    }

    for (const auto& obs : s.observed) {
        auto idx = s.slot_index(obs.slot);
        if (!idx)
            bad("observed attribute on undeclared slot '" + obs.slot + "'");
        if (!ontology.find_attribute(s.agents[*idx].type, obs.attribute))
            bad("slot '" + obs.slot + "' has no attribute '" + obs.attribute + "'");
    }
}

} // namespace abbl
