#pragma once

#include <sstream>
#include <string>

#include "abbl/abbl.hpp"

namespace fixtures {

using namespace abbl;

// Human/Household types used across the suites.
inline Ontology people()
{
    Ontology o;
    o.add_agent_type("Household", std::string(Ontology::root_id), {AttributeDef::boolean("Is in dept")}, {});
    o.add_agent_type("Human", std::string(Ontology::root_id),
                     {AttributeDef::continuous("Hunger", 0, 10), AttributeDef::continuous("Happiness", 0, 10),
                      AttributeDef::continuous("Engagement", 0, 10), AttributeDef::continuous("Height (feet)", 0, 10),
                      AttributeDef::continuous("Height (meters)", 0, 40)},
                     {RelationDef{"lives in household", "household"}});
    return o;
}

inline Ontology countries()
{
    Ontology o;
    o.add_agent_type("Country", std::string(Ontology::root_id),
                     {AttributeDef::continuous("GDP", 0, 200), AttributeDef::continuous("Population", 0, 50),
                      AttributeDef::text("ISO code")},
                     {});
    o.add_agent_type("IslandCountry", "country", {AttributeDef::boolean("Has coral")}, {});
    return o;
}

inline KnowledgeBase kb_from(const std::string& body, const Ontology& o, MergePolicy policy = MergePolicy::error)
{
    KnowledgeBase kb;
    std::istringstream in(std::string(kb_csv_header) + "\n" + body);
    kb.ingest(in, o, policy);
    return kb;
}

inline constexpr double sri_lanka_gdp[8] = {56.7, 65.3, 68.4, 74.3, 79.4, 80.6, 82.4, 88.0};
inline constexpr double sri_lanka_population[8] = {20.2, 20.4, 20.4, 20.6, 20.8, 21.0, 21.2, 21.4};

// Years 2010-2017 as t = 0..7.
inline std::string sri_lanka_csv(const std::string& id = "Sri Lanka", const std::string& iso = "LKA",
                                 double gdp_shift = 0.0)
{
    std::string out;
    for (int t = 0; t < 8; ++t) {
        out += id + ",country,GDP," + std::to_string(t) + "," + format_number(sri_lanka_gdp[t] + gdp_shift) + "\n";
        out += id + ",country,Population," + std::to_string(t) + "," + format_number(sri_lanka_population[t]) + "\n";
        out += id + ",country,ISO code," + std::to_string(t) + "," + iso + "\n";
    }
    return out;
}

inline Scenario single(const std::string& slot, const TypeId& type, std::optional<std::string> entity,
                       std::size_t n_steps, std::vector<std::string> observed)
{
    Scenario s;
    s.id = "s";
    s.agents.push_back(AgentSlot{slot, type, std::move(entity), std::nullopt, {}});
    s.n_steps = n_steps;
    for (auto& a : observed)
        s.observed.push_back({slot, std::move(a)});
    return s;
}

} // namespace fixtures
