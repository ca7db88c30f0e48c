#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "abbl/evaluation.hpp"

namespace abbl::io {

using json = nlohmann::json;

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::IoError, "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::SchemaError, "'" + path + "' is not valid JSON: " + e.what());
    }
}

inline std::string dump(const json& j)
{
    return j.dump(2) + "\n";
}

inline void write_text_file(const std::string& path, const std::string& text)
{
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            fail(ErrorCode::IoError, "cannot write '" + path + "'");
        out << text;
        if (!out)
            fail(ErrorCode::IoError, "cannot write '" + path + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        fail(ErrorCode::IoError, "cannot replace '" + path + "'");
}

inline void write_json_file(const std::string& path, const json& j)
{
    write_text_file(path, dump(j));
}

// Wraps nlohmann errors from field access in SchemaError.
template <class Fn>
auto schema_guard(std::string_view what, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const json::exception& e) {
        fail(ErrorCode::SchemaError, std::string(what) + ": " + e.what());
    }
}

// values -------------------------------------------------------------------

inline json value_to_json(const Value& v)
{
    if (const double* x = std::get_if<double>(&v))
        return *x;
    if (const bool* b = std::get_if<bool>(&v))
        return *b;
    return std::get<std::string>(v);
}

inline Value value_from_json(const json& j)
{
    if (j.is_boolean())
        return j.get<bool>();
    if (j.is_number())
        return j.get<double>();
    if (j.is_string())
        return j.get<std::string>();
    fail(ErrorCode::SchemaError, "value must be a number, boolean or string");
}

// ontology -----------------------------------------------------------------

inline json to_json(const AttributeDef& a)
{
    json j{{"name", a.name}, {"kind", std::string(to_string(a.kind))}};
    if (a.kind == AttributeKind::continuous)
        j["range"] = {a.lo, a.hi};
    if (a.kind == AttributeKind::categorical)
        j["categories"] = a.categories;
    if (a.units)
        j["units"] = *a.units;
    return j;
}

inline AttributeDef attribute_from_json(const json& j)
{
    return schema_guard("attribute", [&] {
        AttributeDef a;
        a.name = j.at("name").get<std::string>();
        a.kind = parse_attribute_kind(j.at("kind").get<std::string>());
        if (a.kind == AttributeKind::continuous) {
            const auto& r = j.at("range");
            a.lo = r.at(0).get<double>();
            a.hi = r.at(1).get<double>();
        }
        if (a.kind == AttributeKind::categorical)
            a.categories = j.at("categories").get<std::vector<std::string>>();
        if (j.contains("units") && !j["units"].is_null())
            a.units = j["units"].get<std::string>();
        return a;
    });
}

inline json to_json(const Ontology& o)
{
    json arr = json::array();
    for (const auto& t : o.types()) {
        json attrs = json::array();
        for (const auto& a : t.own_attributes)
            attrs.push_back(to_json(a));
        json rels = json::array();
        for (const auto& r : t.own_relations)
            rels.push_back({{"name", r.name}, {"target_type", r.target_type}});
        arr.push_back({{"id", t.id},
                       {"name", t.name},
                       {"parent", t.parent ? json(*t.parent) : json(nullptr)},
                       {"attributes", attrs},
                       {"relations", rels}});
    }
    return arr;
}

inline Ontology ontology_from_json(const json& arr)
{
    Ontology o;
    schema_guard("ontology", [&] {
        for (const auto& rec : arr) {
            const auto id = rec.at("id").get<std::string>();
            if (id == Ontology::root_id)
                continue;
            std::vector<AttributeDef> attrs;
            for (const auto& a : rec.at("attributes"))
                attrs.push_back(attribute_from_json(a));
            std::vector<RelationDef> rels;
            for (const auto& r : rec.at("relations"))
                rels.push_back({r.at("name").get<std::string>(), r.at("target_type").get<std::string>()});
            const auto& parent = rec.at("parent");
            o.add_agent_type(rec.at("name").get<std::string>(),
                             parent.is_null() ? TypeId(Ontology::root_id) : parent.get<std::string>(),
                             std::move(attrs), std::move(rels), id);
        }
        return 0;
    });
    return o;
}

// rules --------------------------------------------------------------------

inline json to_json(const RuleSpec& r)
{
    json params = json::array();
    for (const auto& p : r.parameters)
        params.push_back({{"name", p.name}, {"lo", p.lo}, {"hi", p.hi}});
    json j{{"agent_type", r.agent_type}, {"text", r.text}, {"probabilistic", r.probabilistic}, {"parameters", params}};
    if (!r.id.empty())
        j["id"] = r.id;
    if (r.probability_param)
        j["probability_param"] = *r.probability_param;
    return j;
}

inline RuleSpec rule_spec_from_json(const json& j)
{
    return schema_guard("rule", [&] {
        RuleSpec r;
        r.agent_type = j.at("agent_type").get<std::string>();
        r.text = j.at("text").get<std::string>();
        r.probabilistic = j.value("probabilistic", false);
        if (j.contains("id"))
            r.id = j.at("id").get<std::string>();
        if (j.contains("parameters"))
            for (const auto& p : j.at("parameters"))
                r.parameters.push_back({p.at("name").get<std::string>(), p.at("lo").get<double>(), p.at("hi").get<double>()});
        if (j.contains("probability_param") && !j["probability_param"].is_null())
            r.probability_param = j["probability_param"].get<std::string>();
        return r;
    });
}

inline json describe(const Rule& r)
{
    json params = json::array();
    for (const auto& p : r.parameters)
        params.push_back({{"name", p.name}, {"lo", p.lo}, {"hi", p.hi}, {"is_probability", p.is_probability}});
    json reads = json::array();
    for (const auto& p : read_paths(r))
        reads.push_back(to_string(p));
    return {{"agent_type", r.agent_type},
            {"canonical", print(r)},
            {"has_condition", static_cast<bool>(r.condition)},
            {"target", to_string(r.target)},
            {"probabilistic", r.probabilistic},
            {"parameters", params},
            {"reads", reads}};
}

// scenario -----------------------------------------------------------------

inline json to_json(const Scenario& s)
{
    json agents = json::array();
    for (const auto& a : s.agents) {
        json j{{"slot", a.name}, {"type", a.type}};
        if (a.entity)
            j["entity"] = *a.entity;
        if (a.filter)
            j["filter"] = *a.filter;
        if (!a.initial.empty()) {
            json init = json::object();
            for (const auto& [k, v] : a.initial)
                init[k] = value_to_json(v);
            j["initial"] = init;
        }
        agents.push_back(j);
    }
    json rels = json::array();
    for (const auto& r : s.relations)
        rels.push_back({{"source", r.source}, {"relation", r.relation}, {"target", r.target}});
    json observed = json::array();
    for (const auto& o : s.observed)
        observed.push_back({{"slot", o.slot}, {"attribute", o.attribute}});
    return {{"id", s.id},         {"agents", agents},   {"relations", rels},    {"dt", s.dt},
            {"n_steps", s.n_steps}, {"start_time", s.start_time}, {"observed", observed}};
}

inline Scenario scenario_from_json(const json& j)
{
    return schema_guard("scenario", [&] {
        Scenario s;
        s.id = j.value("id", std::string());
        for (const auto& a : j.at("agents")) {
            AgentSlot slot;
            slot.name = a.at("slot").get<std::string>();
            slot.type = a.at("type").get<std::string>();
            if (a.contains("entity") && !a["entity"].is_null())
                slot.entity = a["entity"].get<std::string>();
            if (a.contains("filter") && !a["filter"].is_null())
                slot.filter = a["filter"].get<std::string>();
            if (a.contains("initial"))
                for (const auto& [k, v] : a.at("initial").items())
                    slot.initial[k] = value_from_json(v);
            s.agents.push_back(std::move(slot));
        }
        if (j.contains("relations"))
            for (const auto& r : j.at("relations"))
                s.relations.push_back({r.at("source").get<std::string>(), r.at("relation").get<std::string>(),
                                       r.at("target").get<std::string>()});
        s.dt = j.value("dt", 1.0);
        const auto steps = j.at("n_steps").get<long long>();
        if (steps < 1)
            fail(ErrorCode::InvalidScenario, "n_steps must be at least 1");
        s.n_steps = static_cast<std::size_t>(steps);
        s.start_time = j.value("start_time", 0.0);
        if (j.contains("observed"))
            for (const auto& o : j.at("observed"))
                s.observed.push_back({o.at("slot").get<std::string>(), o.at("attribute").get<std::string>()});
        return s;
    });
}

// posteriors ---------------------------------------------------------------

inline json to_json(const Posterior& p)
{
    json j{{"parameter", p.parameter.name}, {"lo", p.parameter.lo}, {"hi", p.parameter.hi}, {"bins", p.bins}};
    if (p.parameter.is_probability)
        j["is_probability"] = true;
    return j;
}

inline Posterior posterior_from_json(const json& j)
{
    Posterior p = schema_guard("posterior", [&] {
        Posterior p;
        p.parameter.name = j.at("parameter").get<std::string>();
        p.parameter.lo = j.at("lo").get<double>();
        p.parameter.hi = j.at("hi").get<double>();
        p.parameter.is_probability = j.value("is_probability", false);
        p.bins = j.at("bins").get<std::vector<double>>();
        return p;
    });
    if (p.bins.empty() || !(p.parameter.lo < p.parameter.hi))
        fail(ErrorCode::SchemaError, "posterior '" + p.parameter.name + "' needs bins and lo < hi");
    for (double m : p.bins)
        if (!(m >= 0.0) || !std::isfinite(m))
            fail(ErrorCode::SchemaError, "posterior '" + p.parameter.name + "' has a negative or non-finite bin");
    if (std::abs(p.total() - 1.0) > 1e-9)
        fail(ErrorCode::SchemaError, "posterior '" + p.parameter.name + "' does not sum to 1");
    return p;
}

// worldviews ---------------------------------------------------------------

inline std::string hex(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline json to_json(const WorldView& w)
{
    json rules = json::array();
    for (const auto& [type, list] : w.rules)
        for (const auto& r : list)
            rules.push_back(to_json(to_spec(r)));
    json posteriors = json::object();
    for (const auto& [name, p] : w.posteriors)
        posteriors[name] = to_json(p);
    json score = nullptr;
    if (w.score)
        score = {{"value", w.score->value}, {"scenarios", w.score->scenarios}, {"rules_hash", hex(w.score->rules_hash)}};
    return {{"id", w.id},
            {"parent", w.parent ? json(*w.parent) : json(nullptr)},
            {"rules", rules},
            {"posteriors", posteriors},
            {"score", score},
            {"next_rule_number", w.next_rule_number}};
}

inline WorldView worldview_from_json(const json& j, const Ontology& ontology)
{
    return schema_guard("worldview", [&] {
        WorldView w;
        w.id = j.at("id").get<std::string>();
        if (j.contains("parent") && !j["parent"].is_null())
            w.parent = j["parent"].get<std::string>();
        w.next_rule_number = j.value("next_rule_number", std::size_t{1});
        for (const auto& r : j.at("rules")) {
            Rule rule = parse_rule(ontology, rule_spec_from_json(r));
            w.rules[rule.agent_type].push_back(std::move(rule));
        }
        if (j.contains("posteriors"))
            for (const auto& [name, p] : j.at("posteriors").items())
                w.posteriors[name] = posterior_from_json(p);
        if (j.contains("score") && !j["score"].is_null()) {
            const auto& s = j["score"];
            StoredScore stored;
            stored.value = s.at("value").get<double>();
            stored.scenarios = s.at("scenarios").get<std::vector<std::string>>();
            stored.rules_hash = std::stoull(s.at("rules_hash").get<std::string>(), nullptr, 16);
            w.score = stored;
        }
        return w;
    });
}

// knowledge base -----------------------------------------------------------

inline json to_json(const KnowledgeBase& kb)
{
    json entities = json::object();
    for (const auto& [id, e] : kb.entities()) {
        json attrs = json::object();
        for (const auto& [name, series] : e.attributes) {
            json points = json::array();
            for (const auto& [t, p] : series)
                points.push_back({{"t", t}, {"value", value_to_json(p.value)}, {"sum", p.sum}, {"count", p.count}});
            attrs[name] = points;
        }
        entities[id] = {{"agent_type", e.agent_type}, {"attributes", attrs}};
    }
    return {{"entities", entities}};
}

inline KnowledgeBase knowledge_from_json(const json& j)
{
    KnowledgeBase kb;
    schema_guard("knowledge base", [&] {
        for (const auto& [id, e] : j.at("entities").items()) {
            const auto type = e.at("agent_type").get<std::string>();
            for (const auto& [name, points] : e.at("attributes").items())
                for (const auto& p : points)
                    kb.restore(id, type, name, p.at("t").get<double>(),
                               KnowledgeBase::Point{value_from_json(p.at("value")), p.at("sum").get<double>(),
                                                    p.at("count").get<std::size_t>()});
        }
        return 0;
    });
    return kb;
}

inline json to_json(const Timeline& t)
{
    json series = json::object();
    for (const auto& [name, points] : t.series) {
        json arr = json::array();
        for (const auto& p : points)
            arr.push_back({{"t", p.time}, {"value", value_to_json(p.value)}});
        series[name] = arr;
    }
    return {{"entity_id", t.entity_id}, {"agent_type", t.agent_type}, {"series", series}};
}

// results ------------------------------------------------------------------

inline json to_json(const ScoreReport& r)
{
    return {{"kind", "score"},
            {"scenario", r.scenario},
            {"model_score", r.model_score},
            {"per_entity", r.per_entity},
            {"per_attribute", r.per_attribute},
            {"n_runs", r.n_runs},
            {"undefined_entities", r.undefined_entities},
            {"off_grid", r.off_grid},
            {"out_of_horizon", r.out_of_horizon}};
}

inline ScoreReport score_report_from_json(const json& j)
{
    return schema_guard("score report", [&] {
        ScoreReport r;
        r.scenario = j.value("scenario", std::string());
        r.model_score = j.at("model_score").get<double>();
        r.per_entity = j.at("per_entity").get<std::map<std::string, double>>();
        r.per_attribute = j.at("per_attribute").get<std::map<std::string, double>>();
        r.n_runs = j.at("n_runs").get<std::size_t>();
        r.undefined_entities = j.value("undefined_entities", std::vector<std::string>{});
        r.off_grid = j.value("off_grid", std::size_t{0});
        r.out_of_horizon = j.value("out_of_horizon", std::size_t{0});
        return r;
    });
}

inline json to_json(const FitResult& f)
{
    json posts = json::array();
    for (const auto& p : f.posteriors)
        posts.push_back(to_json(p));
    return {{"scenario", f.scenario},
            {"parameters", f.parameters},
            {"posteriors", posts},
            {"zero_evidence", f.zero_evidence},
            {"fixed", f.fixed},
            {"n_samples", f.cloud.size()}};
}

inline json to_json(const Trajectory& t, const Simulation& sim)
{
    json steps = json::array();
    for (const auto& state : t) {
        json slots = json::object();
        for (std::size_t s = 0; s < sim.slot_count(); ++s) {
            json attrs = json::object();
            for (std::size_t a = 0; a < sim.attributes(s).size(); ++a)
                if (const Value* v = sim.value(state, s, a))
                    attrs[sim.attributes(s)[a].name] = value_to_json(*v);
            slots[sim.scenario().agents[s].name] = attrs;
        }
        steps.push_back({{"step", state.step}, {"time", sim.scenario().time_at(state.step)}, {"slots", slots}});
    }
    return steps;
}

inline std::string trajectory_csv(const Trajectory& t, const Simulation& sim)
{
    std::string out = "step,time,slot,attribute,value\n";
    for (const auto& state : t)
        for (std::size_t s = 0; s < sim.slot_count(); ++s)
            for (std::size_t a = 0; a < sim.attributes(s).size(); ++a)
                if (const Value* v = sim.value(state, s, a))
                    out += csv::join({std::to_string(state.step), format_number(sim.scenario().time_at(state.step)),
                                      sim.scenario().agents[s].name, sim.attributes(s)[a].name, format_value(*v)}) +
                           "\n";
    return out;
}

// Quantiles of continuous outcomes, one row per (slot, attribute, step).
inline std::string prediction_csv(const Prediction& p)
{
    std::string out = "slot,attribute,step,time,q05,q25,q50,q75,q95\n";
    for (const auto& o : p.outcomes) {
        if (o.kind != AttributeKind::continuous || o.samples.empty())
            continue;
        std::vector<std::string> row{o.slot_name, o.attribute_name, std::to_string(o.step), format_number(o.time)};
        for (double q : o.quantiles)
            row.push_back(format_number(q));
        out += csv::join(row) + "\n";
    }
    return out;
}

inline json to_json(const Prediction& p)
{
    json outcomes = json::array();
    for (const auto& o : p.outcomes) {
        json j{{"slot", o.slot_name}, {"attribute", o.attribute_name}, {"step", o.step},
               {"time", o.time},      {"missing", o.missing}};
        if (o.kind == AttributeKind::continuous) {
            if (!o.samples.empty())
                j["quantiles"] = {{"q05", o.quantiles[0]}, {"q25", o.quantiles[1]}, {"q50", o.quantiles[2]},
                                  {"q75", o.quantiles[3]}, {"q95", o.quantiles[4]}};
            j["histogram"] = {{"lo", o.histogram_lo}, {"hi", o.histogram_hi}, {"counts", o.histogram}};
        } else {
            j["counts"] = o.counts;
        }
        outcomes.push_back(j);
    }
    return {{"kind", "prediction"}, {"n_runs", p.n_runs}, {"seed", p.seed}, {"parameters", p.parameters},
            {"outcomes", outcomes}};
}

} // namespace abbl::io
