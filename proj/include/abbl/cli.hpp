#pragma once

#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "abbl/report.hpp"
#include "abbl/workspace.hpp"

namespace abbl::cli {

using io::json;

// Bad combination of otherwise well-formed arguments; exits with 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    if (s.empty())
        return out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        std::string item(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        while (!item.empty() && item.front() == ' ')
            item.erase(item.begin());
        while (!item.empty() && item.back() == ' ')
            item.pop_back();
        if (!item.empty())
            out.push_back(std::move(item));
        if (pos == std::string_view::npos)
            return out;
        start = pos + 1;
    }
}

// "name:lo:hi"
inline ParameterRange parse_range(const std::string& text)
{
    const auto colon = text.rfind(':');
    const auto first = colon == std::string::npos ? std::string::npos : text.rfind(':', colon - 1);
    if (first == std::string::npos || first == 0)
        throw UsageError("parameter range '" + text + "' must look like name:lo:hi");
    const auto lo = parse_number(text.substr(first + 1, colon - first - 1));
    const auto hi = parse_number(text.substr(colon + 1));
    if (!lo || !hi)
        throw UsageError("parameter range '" + text + "' has a non-numeric bound");
    return {text.substr(0, first), *lo, *hi};
}

// "name=value"
inline std::pair<std::string, double> parse_assignment(const std::string& text)
{
    const auto eq = text.rfind('=');
    if (eq == std::string::npos || eq == 0)
        throw UsageError("'" + text + "' must look like name=value");
    const auto v = parse_number(text.substr(eq + 1));
    if (!v)
        throw UsageError("'" + text + "' has a non-numeric value");
    return {text.substr(0, eq), *v};
}

// "Name:continuous:lo:hi[:units]", "Name:boolean", "Name:text",
// "Name:categorical:a|b|c"
inline AttributeDef parse_attribute_spec(const std::string& text)
{
    const auto parts = split(text, ':');
    if (parts.size() < 2)
        throw UsageError("attribute '" + text + "' must look like name:kind[:...]");
    AttributeDef a;
    a.name = parts[0];
    a.kind = parse_attribute_kind(parts[1]);
    switch (a.kind) {
    case AttributeKind::continuous: {
        if (parts.size() < 4)
            throw UsageError("continuous attribute '" + text + "' needs name:continuous:lo:hi");
        const auto lo = parse_number(parts[2]);
        const auto hi = parse_number(parts[3]);
        if (!lo || !hi)
            throw UsageError("attribute '" + text + "' has a non-numeric bound");
        a.lo = *lo;
        a.hi = *hi;
        if (parts.size() > 4)
            a.units = parts[4];
        break;
    }
    case AttributeKind::categorical:
        if (parts.size() < 3)
            throw UsageError("categorical attribute '" + text + "' needs name:categorical:a|b|...");
        a.categories = split(parts[2], '|');
        break;
    default:
        break;
    }
    return a;
}

struct Globals {
    std::string workspace = ".";
    std::optional<std::uint64_t> seed;
    bool json = false;
    unsigned threads = 0;

    // The given seed, or a fresh one that the caller records in its output.
    std::uint64_t resolve_seed()
    {
        if (!seed) {
            std::random_device rd;
            seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        }
        return *seed;
    }
};

inline std::vector<RuleSpec> load_rule_specs(const std::string& path)
{
    const auto j = io::read_json_file(path);
    std::vector<RuleSpec> out;
    if (j.is_array())
        for (const auto& r : j)
            out.push_back(io::rule_spec_from_json(r));
    else
        out.push_back(io::rule_spec_from_json(j));
    return out;
}

struct InlineRule {
    std::string text;
    std::string type;
    std::vector<std::string> params;
    bool probabilistic = false;
    std::string probability_param;
    std::string id;

    void attach(CLI::App* cmd)
    {
        cmd->add_option("--text", text, "rule text");
        cmd->add_option("--type", type, "agent type the rule attaches to");
        cmd->add_option("--param", params, "parameter range name:lo:hi (repeatable)");
        cmd->add_flag("--probabilistic", probabilistic, "rule executes with a learned probability");
        cmd->add_option("--probability-param", probability_param, "name of the rule probability parameter");
        cmd->add_option("--id", id, "rule id");
    }

    // Rule specs from files, or the inline rule when no file is given.
    std::vector<RuleSpec> specs(const std::vector<std::string>& files) const
    {
        std::vector<RuleSpec> out;
        for (const auto& f : files)
            for (auto& s : load_rule_specs(f))
                out.push_back(std::move(s));
        if (!text.empty()) {
            if (type.empty())
                throw UsageError("--text needs --type");
            RuleSpec s;
            s.id = id;
            s.agent_type = type;
            s.text = text;
            s.probabilistic = probabilistic;
            for (const auto& p : params)
                s.parameters.push_back(parse_range(p));
            if (!probability_param.empty())
                s.probability_param = probability_param;
            out.push_back(std::move(s));
        }
        if (out.empty())
            throw UsageError("give a rule file or --text and --type");
        return out;
    }
};

inline Binding parse_bindings(const std::vector<std::string>& items)
{
    Binding b;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
            throw UsageError("binding '" + item + "' must look like slot=entity");
        b[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return b;
}

// Posterior modes for every free parameter of `sim`, with explicit values
// taking precedence.
inline ParameterAssignment resolve_parameters(const Simulation& sim, const WorldView& w,
                                              const std::vector<std::string>& overrides)
{
    ParameterAssignment explicit_values;
    for (const auto& o : overrides)
        explicit_values.insert(parse_assignment(o));
    std::vector<UnknownParameter> rest;
    for (const auto& p : sim.free_parameters())
        if (!explicit_values.count(p.name))
            rest.push_back(p);
    ParameterAssignment out = posterior_modes(w, rest);
    for (const auto& p : sim.free_parameters())
        if (auto it = explicit_values.find(p.name); it != explicit_values.end())
            out[p.name] = it->second;
    return out;
}

inline std::string slug(std::string s)
{
    for (char& c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
            c = '_';
    return s;
}

/*!
 * Runs one command line (without the program name). Returns 0 on success,
 * 1 on a domain error and 2 on a usage error.
 */
inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    Globals g;
    CLI::App app{"Agent-based behaviour learning", "abbl"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--workspace,-w", g.workspace, "workspace directory");
    app.add_option("--seed", g.seed, "random seed");
    app.add_flag("--json", g.json, "machine-readable output");
    app.add_option("--threads", g.threads, "worker threads (0 = all cores)");

    std::function<void()> action;
    std::optional<Workspace> ws;
    std::optional<FileLock> lock;
    auto open = [&] {
        ws.emplace(g.workspace);
        ws->require_valid();
        lock.emplace(ws->lock_path());
    };
    auto emit = [&](const json& j, const std::string& text) {
        if (g.json)
            out << j.dump(2) << "\n";
        else
            out << text;
    };

    // init --------------------------------------------------------------
    auto* init = app.add_subcommand("init", "create a workspace");
    init->callback([&] {
        action = [&] {
            ws.emplace(Workspace::init(g.workspace));
            lock.emplace(ws->lock_path());
            emit({{"workspace", g.workspace}}, "initialized workspace '" + g.workspace + "'\n");
        };
    });

    // ontology ----------------------------------------------------------
    auto* ontology = app.add_subcommand("ontology", "agent types");
    ontology->require_subcommand(1);
    struct {
        std::string name, parent = std::string(Ontology::root_id), file, id;
        std::vector<std::string> attributes, relations;
    } oa;
    auto* onto_add = ontology->add_subcommand("add", "add agent types");
    onto_add->add_option("name", oa.name, "type name");
    onto_add->add_option("--parent", oa.parent, "parent type id or name");
    onto_add->add_option("--attribute", oa.attributes, "name:kind[:...] (repeatable)");
    onto_add->add_option("--relation", oa.relations, "name:target-type (repeatable)");
    onto_add->add_option("--id", oa.id, "explicit type id");
    onto_add->add_option("--file", oa.file, "JSON file with one record or an array of records");
    onto_add->callback([&] {
        action = [&] {
            open();
            Ontology o = ws->ontology();
            std::vector<std::string> added;
            auto add_record = [&](const json& rec) {
                io::schema_guard("agent type", [&] {
                    std::vector<AttributeDef> attrs;
                    for (const auto& a : rec.value("attributes", json::array()))
                        attrs.push_back(io::attribute_from_json(a));
                    std::vector<RelationDef> rels;
                    for (const auto& r : rec.value("relations", json::array()))
                        rels.push_back({r.at("name").get<std::string>(), r.at("target_type").get<std::string>()});
                    const auto parent = rec.value("parent", json(nullptr));
                    std::optional<TypeId> id;
                    if (rec.contains("id"))
                        id = rec["id"].get<std::string>();
                    added.push_back(o.add_agent_type(rec.at("name").get<std::string>(),
                                                     parent.is_null() ? TypeId(Ontology::root_id)
                                                                      : o.resolve(parent.get<std::string>()),
                                                     std::move(attrs), std::move(rels), id));
                    return 0;
                });
            };
            if (!oa.file.empty()) {
                const auto j = io::read_json_file(oa.file);
                if (j.is_array())
                    for (const auto& rec : j)
                        add_record(rec);
                else
                    add_record(j);
            } else {
                if (oa.name.empty())
                    throw UsageError("ontology add needs a type name or --file");
                std::vector<AttributeDef> attrs;
                for (const auto& a : oa.attributes)
                    attrs.push_back(parse_attribute_spec(a));
                std::vector<RelationDef> rels;
                for (const auto& r : oa.relations) {
                    const auto colon = r.rfind(':');
                    if (colon == std::string::npos || colon == 0)
                        throw UsageError("relation '" + r + "' must look like name:target-type");
                    rels.push_back({r.substr(0, colon), o.resolve(r.substr(colon + 1))});
                }
                added.push_back(o.add_agent_type(oa.name, o.resolve(oa.parent), std::move(attrs), std::move(rels),
                                                 oa.id.empty() ? std::nullopt : std::optional<TypeId>(oa.id)));
            }
            ws->save(o);
            std::string text;
            for (const auto& id : added)
                text += "added type '" + id + "'\n";
            emit({{"added", added}}, text);
        };
    });
    auto* onto_list = ontology->add_subcommand("list", "list agent types");
    onto_list->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            Table t({"id", "name", "parent"});
            for (const auto& type : o.types())
                t.add({type.id, type.name, type.parent.value_or("-")});
            emit(io::to_json(o), t.str());
        };
    });
    std::string show_type;
    auto* onto_show = ontology->add_subcommand("show", "effective attributes and relations of a type");
    onto_show->add_option("type", show_type, "type id or name")->required();
    onto_show->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            const auto id = o.resolve(show_type);
            json attrs = json::array();
            Table t({"attribute", "kind", "range"});
            for (const auto& a : o.effective_attributes(id)) {
                attrs.push_back(io::to_json(a));
                std::string range;
                if (a.kind == AttributeKind::continuous)
                    range = "[" + format_number(a.lo) + ", " + format_number(a.hi) + "]";
                else if (a.kind == AttributeKind::categorical)
                    for (const auto& c : a.categories)
                        range += (range.empty() ? "" : "|") + c;
                t.add({a.name, std::string(to_string(a.kind)), range});
            }
            json rels = json::array();
            Table r({"relation", "target"});
            for (const auto& rel : o.effective_relations(id)) {
                rels.push_back({{"name", rel.name}, {"target_type", rel.target_type}});
                r.add({rel.name, rel.target_type});
            }
            std::string lineage;
            for (const auto& a : o.ancestry(id))
                lineage += (lineage.empty() ? "" : " > ") + a;
            emit({{"id", id}, {"ancestry", o.ancestry(id)}, {"attributes", attrs}, {"relations", rels}},
                 lineage + "\n" + t.str() + r.str());
        };
    });

    // rule --------------------------------------------------------------
    auto* rule = app.add_subcommand("rule", "behaviour rules");
    rule->require_subcommand(1);
    InlineRule ir;
    std::vector<std::string> rule_files;
    std::string rule_worldview = "default";

    auto* rule_parse = rule->add_subcommand("parse", "parse rules and print their canonical form");
    rule_parse->add_option("files", rule_files, "rule files");
    ir.attach(rule_parse);
    rule_parse->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            json arr = json::array();
            std::string text;
            for (const auto& spec : ir.specs(rule_files)) {
                const Rule r = parse_rule(o, spec);
                arr.push_back(io::describe(r));
                std::string params;
                for (const auto& p : r.parameters)
                    params += (params.empty() ? "" : ", ") + p.name;
                text += print(r) + "\n  type " + r.agent_type + (r.probabilistic ? ", probabilistic" : ", certain") +
                        ", parameters {" + params + "}\n";
            }
            emit(arr, text);
        };
    });

    auto* rule_check = rule->add_subcommand("check", "validate rule files");
    rule_check->add_option("files", rule_files, "rule files");
    ir.attach(rule_check);
    rule_check->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            const auto specs = ir.specs(rule_files);
            for (const auto& spec : specs)
                parse_rule(o, spec);
            emit({{"ok", true}, {"rules", specs.size()}}, std::to_string(specs.size()) + " rule(s) ok\n");
        };
    });

    auto* rule_add = rule->add_subcommand("add", "add rules to a worldview");
    rule_add->add_option("files", rule_files, "rule files");
    rule_add->add_option("--worldview", rule_worldview, "worldview id");
    ir.attach(rule_add);
    rule_add->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            WorldView w = ws->worldview(rule_worldview, o);
            std::vector<std::string> ids;
            for (const auto& spec : ir.specs(rule_files))
                ids.push_back(add_rule(w, parse_rule(o, spec)));
            ws->save(w);
            std::string text;
            for (const auto& id : ids)
                text += "added rule '" + id + "' to worldview '" + w.id + "'\n";
            emit({{"worldview", w.id}, {"added", ids}}, text);
        };
    });

    struct FitArgs {
        std::string scenarios;
        std::size_t samples = 1000;
        std::size_t runs_per_sample = 1;
        std::size_t runs = 1;
        std::size_t bins = default_bins;
        double tau = default_tau;
        double exponent = 1.0;
        bool iid = false;

        void attach(CLI::App* cmd, bool scoring)
        {
            cmd->add_option("--samples", samples, "prior samples per model");
            cmd->add_option("--runs-per-sample", runs_per_sample, "Monte Carlo runs per sample");
            cmd->add_option("--bins", bins, "posterior bins");
            cmd->add_option("--tau", tau, "score kernel width as a fraction of the attribute range");
            cmd->add_option("--exponent", exponent, "sample weight = score^exponent");
            cmd->add_flag("--iid", iid, "independent prior draws instead of a Latin hypercube");
            if (scoring)
                cmd->add_option("--runs", runs, "Monte Carlo runs per model when scoring");
        }

        FitOptions fit(std::uint64_t seed, unsigned threads) const
        {
            FitOptions f;
            f.n_samples = samples;
            f.n_runs_per_sample = runs_per_sample;
            f.bins = bins;
            f.tau = tau;
            f.weight_exponent = exponent;
            f.stratified = !iid;
            f.seed = seed;
            f.threads = threads;
            return f;
        }
    };
    auto load_scenarios = [&](const std::string& list) {
        std::vector<Scenario> out;
        const auto ids = split(list, ',');
        for (const auto& id : ids.empty() ? ws->scenario_ids() : ids)
            out.push_back(ws->scenario(id));
        if (out.empty())
            throw UsageError("no scenarios given and none registered");
        return out;
    };
    auto fit_json = [](const CombinedFit& fit) {
        json overall = json::array();
        for (const auto& p : fit.overall)
            overall.push_back(io::to_json(p));
        json per = json::array();
        for (const auto& m : fit.per_model)
            per.push_back(io::to_json(m));
        return json{{"overall", overall}, {"per_model", per}, {"skipped", fit.skipped}, {"warnings", fit.warnings}};
    };

    FitArgs improve_args;
    auto* rule_improve = rule->add_subcommand("improve", "score change from adding a rule to a worldview");
    rule_improve->add_option("files", rule_files, "rule file");
    rule_improve->add_option("--worldview", rule_worldview, "base worldview id");
    rule_improve->add_option("--scenarios", improve_args.scenarios, "comma-separated scenario ids (default all)");
    improve_args.attach(rule_improve, true);
    ir.attach(rule_improve);
    rule_improve->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            const WorldView base = ws->worldview(rule_worldview, o);
            const auto specs = ir.specs(rule_files);
            if (specs.size() != 1)
                throw UsageError("rule improve takes exactly one rule");
            const Rule candidate = parse_rule(o, specs.front());
            const auto models = load_scenarios(improve_args.scenarios);
            const KnowledgeBase kb = ws->kb();
            const auto seed = g.resolve_seed();
            ScoreOptions so;
            so.n_runs = improve_args.runs;
            so.tau = improve_args.tau;
            so.seed = derive_seed(seed, 1);
            so.threads = std::max(1u, resolve_threads(g.threads));
            const Improvement imp =
                rule_improvement(o, base, candidate, models, kb, improve_args.fit(derive_seed(seed, 0), g.threads), so);
            json models_json = json::array();
            for (std::size_t i = 0; i < imp.scenarios.size(); ++i)
                models_json.push_back(
                    {{"scenario", imp.scenarios[i]}, {"with_rule", imp.with_rule[i]}, {"without_rule", imp.without_rule[i]}});
            json j{{"kind", "improvement"}, {"seed", seed},          {"worldview", base.id}, {"rule", print(candidate)},
                   {"delta", imp.delta},    {"models", models_json}, {"fitted", imp.fitted}};
            if (imp.fit)
                j["fit"] = fit_json(*imp.fit);
            const auto file = "improvement-" + slug(base.id) + ".json";
            ws->write_result(file, io::dump(j));
            emit(j, "delta " + fixed(imp.delta, 6) + " (" + (imp.delta > 0 ? "improves" : "does not improve") +
                        "), written to results/" + file + "\n");
        };
    });

    // kb ----------------------------------------------------------------
    auto* kbcmd = app.add_subcommand("kb", "knowledge base");
    kbcmd->require_subcommand(1);
    std::vector<std::string> csv_files;
    std::string merge = "error";
    auto* kb_ingest = kbcmd->add_subcommand("ingest", "ingest observation CSV files");
    kb_ingest->add_option("files", csv_files, "CSV files")->required();
    kb_ingest->add_option("--merge", merge, "duplicate policy: error or mean");
    kb_ingest->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            KnowledgeBase kb = ws->kb();
            const auto policy = parse_merge_policy(merge);
            std::size_t n = 0;
            for (const auto& f : csv_files)
                n += kb.ingest_file(f, o, policy);
            ws->save(kb);
            emit({{"observations", n}}, "ingested " + std::to_string(n) + " observations\n");
        };
    });
    std::string entity_type;
    auto* kb_entities = kbcmd->add_subcommand("entities", "list entities");
    kb_entities->add_option("--type", entity_type, "only entities of this type or a subtype");
    kb_entities->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            const KnowledgeBase kb = ws->kb();
            std::vector<std::string> ids;
            if (entity_type.empty())
                for (const auto& [id, e] : kb.entities())
                    ids.push_back(id);
            else
                ids = kb.entities_of_type(o, o.resolve(entity_type));
            Table t({"entity", "type"});
            for (const auto& id : ids)
                t.add({id, kb.entities().at(id).agent_type});
            emit(ids, t.str());
        };
    });
    std::string timeline_entity;
    auto* kb_timeline = kbcmd->add_subcommand("timeline", "observations of one entity");
    kb_timeline->add_option("entity", timeline_entity, "entity id")->required();
    kb_timeline->callback([&] {
        action = [&] {
            open();
            const Timeline tl = ws->kb().timeline(timeline_entity);
            Table t({"attribute", "time", "value"});
            for (const auto& [name, points] : tl.series)
                for (const auto& p : points)
                    t.add({name, format_number(p.time), format_value(p.value)});
            emit(io::to_json(tl), t.str());
        };
    });

    // sim ---------------------------------------------------------------
    auto* sim = app.add_subcommand("sim", "simulation");
    sim->require_subcommand(1);
    struct {
        std::string scenario, worldview = "default", out;
        std::vector<std::string> bind, params;
        std::size_t runs = 1000;
        std::size_t histogram_bins = 20;
    } sa;
    auto attach_sim = [&](CLI::App* cmd) {
        cmd->add_option("--scenario", sa.scenario, "scenario id or file")->required();
        cmd->add_option("--worldview", sa.worldview, "worldview id");
        cmd->add_option("--bind", sa.bind, "slot=entity (repeatable)");
        cmd->add_option("--out", sa.out, "output file (default under results/)");
    };
    auto* sim_run = sim->add_subcommand("run", "run one simulation");
    attach_sim(sim_run);
    sim_run->add_option("--param", sa.params, "name=value, overriding the posterior mode (repeatable)");
    sim_run->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            const WorldView w = ws->worldview(sa.worldview, o);
            const Simulation s(o, ws->scenario(sa.scenario), w);
            for (const auto& warning : s.warnings())
                err << "warning: " << warning << "\n";
            const auto initial = s.initialize(ws->kb(), o, parse_bindings(sa.bind));
            const auto params = resolve_parameters(s, w, sa.params);
            const auto seed = g.resolve_seed();
            const auto trajectory = s.run(initial, params, seed);
            const auto body = io::trajectory_csv(trajectory, s);
            const std::string file = sa.out.empty() ? "run-" + slug(s.scenario().id) + "-" + slug(w.id) + ".csv" : "";
            if (file.empty())
                io::write_text_file(sa.out, body);
            else
                ws->write_result(file, body);
            const std::string where = file.empty() ? sa.out : "results/" + file;
            emit({{"seed", seed}, {"parameters", params}, {"file", where}, {"trajectory", io::to_json(trajectory, s)}},
                 "simulated " + std::to_string(s.scenario().n_steps) + " steps (seed " + std::to_string(seed) +
                     "), written to " + where + "\n");
        };
    });
    auto* sim_predict = sim->add_subcommand("predict", "Monte Carlo prediction from the worldview's posteriors");
    attach_sim(sim_predict);
    sim_predict->add_option("--runs", sa.runs, "Monte Carlo runs");
    sim_predict->add_option("--histogram-bins", sa.histogram_bins, "histogram bins per outcome");
    sim_predict->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            const WorldView w = ws->worldview(sa.worldview, o);
            const Simulation s(o, ws->scenario(sa.scenario), w);
            const auto initial = s.initialize(ws->kb(), o, parse_bindings(sa.bind));
            const auto seed = g.resolve_seed();
            const auto pred = predict(s, initial, w.posteriors, sa.runs, seed, g.threads, sa.histogram_bins);
            const auto stem = "predict-" + slug(s.scenario().id) + "-" + slug(w.id);
            const auto csv_body = io::prediction_csv(pred);
            json j = io::to_json(pred);
            j["scenario"] = s.scenario().id;
            j["worldview"] = w.id;
            std::string where;
            if (sa.out.empty()) {
                ws->write_result(stem + ".csv", csv_body);
                ws->write_result(stem + ".json", io::dump(j));
                where = "results/" + stem + ".csv";
            } else {
                io::write_text_file(sa.out, csv_body);
                where = sa.out;
            }
            emit(j, csv_body);
            if (!g.json)
                err << "quantiles written to " << where << "\n";
        };
    });

    // score -------------------------------------------------------------
    struct {
        std::string scenario, worldview = "default";
        std::vector<std::string> params;
        std::size_t runs = 1;
        double tau = default_tau;
    } sc;
    auto* score = app.add_subcommand("score", "score a scenario under a worldview");
    score->add_option("--scenario", sc.scenario, "scenario id or file")->required();
    score->add_option("--worldview", sc.worldview, "worldview id");
    score->add_option("--runs", sc.runs, "Monte Carlo runs per entity binding");
    score->add_option("--tau", sc.tau, "score kernel width as a fraction of the attribute range");
    score->add_option("--param", sc.params, "name=value, overriding the posterior mode (repeatable)");
    score->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            const WorldView w = ws->worldview(sc.worldview, o);
            const KnowledgeBase kb = ws->kb();
            const ModelScorer scorer(o, ws->scenario(sc.scenario), w, kb);
            const auto params = resolve_parameters(scorer.simulation(), w, sc.params);
            ScoreOptions opts;
            opts.n_runs = sc.runs;
            opts.tau = sc.tau;
            opts.seed = g.resolve_seed();
            opts.threads = g.threads;
            const auto report = scorer.score(params, opts);
            json j = io::to_json(report);
            j["seed"] = opts.seed;
            j["worldview"] = w.id;
            j["parameters"] = params;
            const auto file = "score-" + slug(report.scenario) + "-" + slug(w.id) + ".json";
            ws->write_result(file, io::dump(j));
            emit(j, score_tables(report));
        };
    });

    // fit ---------------------------------------------------------------
    FitArgs fa;
    std::string fit_group, fit_worldview = "default";
    auto* fit = app.add_subcommand("fit", "learn parameter posteriors across scenarios");
    fit->add_option("--group", fit_group, "comma-separated parameters learned jointly")->required();
    fit->add_option("--scenarios", fa.scenarios, "comma-separated scenario ids (default all)");
    fit->add_option("--worldview", fit_worldview, "worldview id");
    fa.attach(fit, false);
    fit->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            WorldView w = ws->worldview(fit_worldview, o);
            ParameterGroup group{split(fit_group, ',')};
            if (group.names.empty())
                throw UsageError("--group needs at least one parameter");
            const auto scenarios = load_scenarios(fa.scenarios);
            const auto seed = g.resolve_seed();
            const CombinedFit result = fit_across_models(o, group, scenarios, w, ws->kb(), fa.fit(seed, g.threads));
            for (const auto& warning : result.warnings)
                err << "warning: " << warning << "\n";
            for (const auto& p : result.overall) {
                set_posterior(w, p);
                ws->save(p);
            }
            ws->save(w);
            json j = fit_json(result);
            j["kind"] = "fit";
            j["seed"] = seed;
            j["worldview"] = w.id;
            j["group"] = group.names;
            j["n_samples"] = fa.samples;
            j["n_runs_per_sample"] = fa.runs_per_sample;
            std::string name;
            for (const auto& n : group.names)
                name += (name.empty() ? "" : "_") + n;
            const auto file = "fit-" + slug(name) + ".json";
            ws->write_result(file, io::dump(j));
            emit(j, posterior_table(result.overall) + "written to results/" + file + "\n");
        };
    });

    // combine -----------------------------------------------------------
    std::vector<std::string> combine_files;
    std::string combine_out;
    auto* combine = app.add_subcommand("combine", "combine posterior files on one grid");
    combine->add_option("files", combine_files, "posterior files")->required();
    combine->add_option("--out", combine_out, "output file (default under results/)");
    combine->callback([&] {
        action = [&] {
            open();
            std::vector<Posterior> posts;
            for (const auto& f : combine_files)
                posts.push_back(io::posterior_from_json(io::read_json_file(f)));
            const Posterior prior = Posterior::uniform(posts.front().parameter, posts.front().size());
            const Posterior combined = combine_posteriors(posts, prior);
            const auto j = io::to_json(combined);
            std::string where;
            if (combine_out.empty()) {
                const auto file = "combined-" + slug(combined.parameter.name) + ".json";
                ws->write_result(file, io::dump(j));
                where = "results/" + file;
            } else {
                io::write_json_file(combine_out, j);
                where = combine_out;
            }
            emit(j, posterior_table({combined}) + "written to " + where + "\n");
        };
    });

    // worldview ---------------------------------------------------------
    auto* wv = app.add_subcommand("worldview", "worldviews");
    wv->require_subcommand(1);
    auto* wv_list = wv->add_subcommand("list", "list worldviews");
    wv_list->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            const auto reg = ws->registry(o);
            Table t({"id", "parent", "rules", "score"});
            json arr = json::array();
            for (const auto& id : reg.ids()) {
                const auto& w = reg.get(id);
                std::size_t n = 0;
                for (const auto& [type, list] : w.rules)
                    n += list.size();
                const bool current = w.score && score_is_current(w);
                t.add({id, w.parent.value_or("-"), std::to_string(n), current ? fixed(w.score->value) : "-"});
                arr.push_back({{"id", id},
                               {"parent", w.parent ? json(*w.parent) : json(nullptr)},
                               {"rules", n},
                               {"score", current ? json(w.score->value) : json(nullptr)}});
            }
            emit(arr, t.str());
        };
    });
    std::string fork_base, fork_id;
    auto* wv_fork = wv->add_subcommand("fork", "copy a worldview");
    wv_fork->add_option("base", fork_base, "worldview to copy")->required();
    wv_fork->add_option("--id", fork_id, "id of the copy");
    wv_fork->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            auto reg = ws->registry(o);
            const auto id = reg.fork(fork_base, fork_id);
            ws->save(reg.get(id));
            emit({{"id", id}, {"parent", fork_base}}, "forked '" + fork_base + "' as '" + id + "'\n");
        };
    });
    std::string edit_id, remove_id, replace_id;
    std::vector<std::string> add_files;
    std::string replace_file;
    auto* wv_edit = wv->add_subcommand("edit", "add, replace or remove rules");
    wv_edit->add_option("worldview", edit_id, "worldview id")->required();
    wv_edit->add_option("--add", add_files, "rule file to add (repeatable)");
    wv_edit->add_option("--remove", remove_id, "rule id to remove");
    wv_edit->add_option("--replace", replace_id, "rule id to replace");
    wv_edit->add_option("--with", replace_file, "rule file replacing --replace");
    wv_edit->callback([&] {
        action = [&] {
            open();
            if (add_files.empty() && remove_id.empty() && replace_id.empty())
                throw UsageError("worldview edit needs --add, --remove or --replace");
            if (replace_id.empty() != replace_file.empty())
                throw UsageError("--replace and --with go together");
            const Ontology o = ws->ontology();
            WorldView w = ws->worldview(edit_id, o);
            std::string text;
            if (!remove_id.empty()) {
                remove_rule(w, remove_id);
                text += "removed rule '" + remove_id + "'\n";
            }
            if (!replace_id.empty()) {
                const auto specs = load_rule_specs(replace_file);
                if (specs.size() != 1)
                    throw UsageError("--with takes a file holding one rule");
                replace_rule(w, replace_id, parse_rule(o, specs.front()));
                text += "replaced rule '" + replace_id + "'\n";
            }
            for (const auto& f : add_files)
                for (const auto& spec : load_rule_specs(f))
                    text += "added rule '" + add_rule(w, parse_rule(o, spec)) + "'\n";
            ws->save(w);
            emit(io::to_json(w), text);
        };
    });
    struct {
        std::string id, scenarios;
        std::size_t runs = 1;
        double tau = default_tau;
    } ws_args;
    auto* wv_score = wv->add_subcommand("score", "score a worldview on the registered scenarios");
    wv_score->add_option("worldview", ws_args.id, "worldview id")->required();
    wv_score->add_option("--scenarios", ws_args.scenarios, "comma-separated scenario ids (default all)");
    wv_score->add_option("--runs", ws_args.runs, "Monte Carlo runs per entity binding");
    wv_score->add_option("--tau", ws_args.tau, "score kernel width as a fraction of the attribute range");
    wv_score->callback([&] {
        action = [&] {
            open();
            const Ontology o = ws->ontology();
            WorldView w = ws->worldview(ws_args.id, o);
            const auto scenarios = load_scenarios(ws_args.scenarios);
            ScoreOptions opts;
            opts.n_runs = ws_args.runs;
            opts.tau = ws_args.tau;
            opts.seed = g.resolve_seed();
            opts.threads = g.threads;
            const auto result = score_worldview(o, w, scenarios, ws->kb(), opts);
            ws->save(w);
            json reports = json::array();
            Table t({"scenario", "score"});
            for (const auto& r : result.reports) {
                reports.push_back(io::to_json(r));
                t.add({r.scenario, fixed(r.model_score)});
            }
            json j{{"kind", "worldview_score"}, {"worldview", w.id}, {"seed", opts.seed},
                   {"score", result.score},     {"reports", reports}};
            const auto file = "worldview-score-" + slug(w.id) + ".json";
            ws->write_result(file, io::dump(j));
            emit(j, "worldview '" + w.id + "' scores " + fixed(result.score) + "\n" + t.str());
        };
    });

    // report ------------------------------------------------------------
    std::vector<std::string> report_files;
    std::string plot_dir;
    auto* rep = app.add_subcommand("report", "summarize result files");
    rep->add_option("files", report_files, "result files (default: everything under results/)");
    rep->add_option("--plot-dir", plot_dir, "also write plot-data CSVs here");
    rep->callback([&] {
        action = [&] {
            open();
            std::vector<fs::path> files(report_files.begin(), report_files.end());
            if (files.empty())
                files = ws->result_files();
            const auto r = report(files, !plot_dir.empty());
            if (!plot_dir.empty()) {
                fs::create_directories(plot_dir);
                for (const auto& [name, body] : r.plots)
                    io::write_text_file((fs::path(plot_dir) / name).string(), body);
            }
            json plots = json::array();
            for (const auto& [name, body] : r.plots)
                plots.push_back(name);
            emit({{"text", r.text}, {"plots", plots}}, r.text);
        };
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        err << "abbl: " << e.what() << "\n";
        CLI::App* help_for = &app;
        for (auto* sub = &app; !sub->get_subcommands().empty();) {
            sub = sub->get_subcommands().front();
            help_for = sub;
        }
        err << help_for->help();
        return 2;
    }

    if (!action) {
        err << app.help();
        return 2;
    }
    try {
        action();
        return 0;
    } catch (const UsageError& e) {
        err << "abbl: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        if (g.json)
            err << json{{"error", {{"code", std::string(to_string(e.code()))}, {"message", e.detail()}}}}.dump() << "\n";
        else
            err << "abbl: " << to_string(e.code()) << ": " << e.detail() << "\n";
        return 1;
    } catch (const std::exception& e) {
        if (g.json)
            err << json{{"error", {{"code", "IoError"}, {"message", e.what()}}}}.dump() << "\n";
        else
            err << "abbl: " << e.what() << "\n";
        return 1;
    }
}

inline int run(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args, std::cout, std::cerr);
}

} // namespace abbl::cli
