// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "../fixtures.hpp"

using namespace abbl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string num(double x, int digits = 4)
{
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << x;
    return s.str();
}

std::string sci(double x)
{
    std::ostringstream s;
    s.precision(2);
    s << std::scientific << x;
    return s.str();
}

double kl_from_uniform(const Posterior& p)
{
    const double u = 1.0 / static_cast<double>(p.size());
    double kl = 0;
    for (double m : p.bins)
        if (m > 0)
            kl += m * std::log(m / u);
    return kl;
}

// Human with a wide Happiness range so 20 steps of |X| <= 3 stay unclamped.
Ontology wide_people()
{
    Ontology o;
    o.add_agent_type("Human", std::string(Ontology::root_id),
                     {AttributeDef::continuous("Hunger", 0, 10), AttributeDef::continuous("Happiness", 0, 100),
                      AttributeDef::continuous("Engagement", 0, 100)},
                     {});
    return o;
}

const std::string hunger_text = "IF [Hunger] > 4 THEN [Happiness] = [Happiness] - X";

WorldView hunger_view(const Ontology& o)
{
    WorldView w;
    w.id = "hunger";
    add_rule(w, parse_rule(o, hunger_text, "human", {{"X", -10, 10}}));
    return w;
}

// Runs the scenario under `w` and returns the observed attributes as
// knowledge-base rows for `entity`.
std::string synthesize(const Ontology& o, const Scenario& s, const WorldView& w, const ParameterAssignment& params,
                       const std::string& entity, std::uint64_t seed, const std::vector<std::string>& also_initial = {})
{
    const Simulation sim(o, s, w);
    KnowledgeBase empty;
    const auto traj = sim.run(sim.initialize(empty, o), params, seed);
    std::string rows;
    auto emit = [&](std::size_t k, const std::string& attr) {
        const auto idx = *sim.attribute_index(0, attr);
        const auto* v = sim.value(traj[k], 0, idx);
        rows += entity + "," + s.agents[0].type + "," + attr + "," + format_number(s.time_at(k)) + "," +
                format_value(*v) + "\n";
    };
    for (std::size_t k = 0; k < traj.size(); ++k)
        for (const auto& obs : s.observed)
            emit(k, obs.attribute);
    for (const auto& a : also_initial)
        emit(0, a);
    return rows;
}

// Slot "h" pinned to initial values; used to generate data.
Scenario generator(const std::string& type, std::size_t steps, std::map<std::string, Value> initial,
                   std::vector<std::string> observed)
{
    auto s = fixtures::single("h", type, std::nullopt, steps, std::move(observed));
    s.agents[0].initial = std::move(initial);
    return s;
}

Scenario bound(const std::string& id, const std::string& entity, std::size_t steps, std::vector<std::string> observed)
{
    auto s = fixtures::single("h", "human", entity, steps, std::move(observed));
    s.id = id;
    return s;
}

// ---------------------------------------------------------------------------

Verdict parser_conformance()
{
    const auto o = fixtures::people();
    struct Case {
        std::string text;
        std::vector<ParameterRange> ranges;
        bool probabilistic;
        std::vector<std::string> params;
    };
    const std::vector<Case> cases{
        {hunger_text, {{"X", -10, 10}}, false, {"X"}},
        {"IF [lives in household].[Is in dept] == True THEN [Happiness] = [Happiness] - Y", {{"Y", 0, 5}}, true,
         {"Y", "p_rule"}},
        {"[Height (meters)] = 3.281 * [Height (feet)]", {}, false, {}},
    };
    Verdict v{true, ""};
    for (const auto& c : cases) {
        const Rule r = parse_rule(o, c.text, "human", c.ranges, c.probabilistic);
        const Rule again = parse_rule(o, print(r), "human", c.ranges, c.probabilistic);
        std::vector<std::string> names;
        for (const auto& p : r.parameters)
            names.push_back(p.name);
        const bool ok = print(again) == print(r) && names == c.params;
        v.pass = v.pass && ok;
        v.detail += "{";
        for (std::size_t i = 0; i < names.size(); ++i)
            v.detail += (i ? "," : "") + names[i];
        v.detail += "} ";
    }
    return v;
}

Verdict synthetic_recovery()
{
    const auto o = wide_people();
    const auto w = hunger_view(o);
    const auto kb = fixtures::kb_from(
        synthesize(o, generator("human", 20, {{"Hunger", 6.0}, {"Happiness", 20.0}}, {"Happiness"}), w, {{"X", -3.0}},
                   "p", 1, {"Hunger"}),
        o);
    FitOptions opts;
    opts.n_samples = 10000;
    opts.n_runs_per_sample = 20;
    opts.seed = 2024;
    const auto fit = abc_fit(o, {{"X"}}, bound("one", "p", 20, {"Happiness"}), w, kb, opts);
    const double mode = fit.posterior("X").mode();
    return {std::abs(mode + 3.0) <= 0.5, "mode " + num(mode)};
}

Verdict probability_recovery()
{
    Ontology o;
    o.add_agent_type("Counter", std::string(Ontology::root_id), {AttributeDef::continuous("Count", 0, 20)}, {});
    WorldView w;
    add_rule(w, parse_rule(o, "[Count] = [Count] + 1", "counter", {}, true));
    std::string rows;
    for (int e = 0; e < 10; ++e)
        rows += synthesize(o, generator("counter", 20, {{"Count", 0.0}}, {"Count"}), w, {{"p_rule", 0.7}},
                           "c" + std::to_string(e), derive_seed(77, e));
    const auto kb = fixtures::kb_from(rows, o);
    auto s = fixtures::single("h", "counter", std::nullopt, 20, {"Count"});
    s.id = "counters";
    FitOptions opts;
    opts.n_samples = 10000;
    opts.n_runs_per_sample = 20;
    opts.seed = 31;
    const auto fit = abc_fit(o, {{"p_rule"}}, s, w, kb, opts);
    const double mode = fit.posterior("p_rule").mode();
    return {std::abs(mode - 0.7) <= 0.15, "mode " + num(mode)};
}

Verdict combination()
{
    RandomStream rng(2718);
    double worst = 0;
    bool exact = true;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(99);
        const UnknownParameter x{"X", -1, 1, false};
        Posterior a = Posterior::uniform(x, n), b = Posterior::uniform(x, n);
        for (std::size_t i = 0; i < n; ++i) {
            a.bins[i] = rng.uniform() + 1e-3;
            b.bins[i] = rng.uniform() + 1e-3;
        }
        for (auto* p : {&a, &b}) {
            const double s = p->total();
            for (double& m : p->bins)
                m /= s;
        }
        const auto prior = Posterior::uniform(x, n);
        const auto c = combine_posteriors(std::vector{a, b}, prior);
        double z = 0;
        for (std::size_t i = 0; i < n; ++i)
            z += a.bins[i] * b.bins[i];
        for (std::size_t i = 0; i < n; ++i)
            worst = std::max(worst, std::abs(c.bins[i] - a.bins[i] * b.bins[i] / z));
        exact = exact && combine_posteriors(std::vector{b, a}, prior).bins == c.bins &&
                combine_posteriors(std::vector{a, prior}, prior).bins == a.bins &&
                combine_posteriors(std::vector{a}, prior).bins == a.bins;
    }
    return {worst <= 1e-9 && exact, "max deviation " + sci(worst) + (exact ? ", exact symmetry" : ", asymmetric")};
}

Verdict sharpening()
{
    const auto o = wide_people();
    const auto w = hunger_view(o);
    const double h0[3] = {20, 35, 50};
    const std::size_t steps[3] = {5, 8, 12};
    std::string rows;
    std::vector<Scenario> models;
    for (int m = 0; m < 3; ++m) {
        const std::string id = "m" + std::to_string(m);
        rows += synthesize(o, generator("human", steps[m], {{"Hunger", 5.0 + m}, {"Happiness", h0[m]}}, {"Happiness"}),
                           w, {{"X", -3.0}}, id, 1, {"Hunger"});
        models.push_back(bound(id, id, steps[m], {"Happiness"}));
    }
    const auto kb = fixtures::kb_from(rows, o);
    FitOptions opts;
    opts.n_samples = 10000;
    opts.seed = 5;
    const auto fit = fit_across_models(o, {{"X"}}, models, w, kb, opts);
    double min_var = INFINITY;
    for (const auto& m : fit.per_model)
        min_var = std::min(min_var, m.posteriors[0].variance());
    const auto& overall = fit.posterior("X");
    return {overall.variance() < min_var && std::abs(overall.mode() + 3) <= 0.3,
            "overall var " + num(overall.variance()) + " < " + num(min_var) + ", mode " + num(overall.mode())};
}

Verdict indirect_learning()
{
    const auto o = wide_people();
    WorldView w = hunger_view(o);
    add_rule(w, parse_rule(o, "[Hunger] = [Hunger] + 1", "human"));
    // engagement follows happiness one step behind
    add_rule(w, parse_rule(o, "[Engagement] = [Happiness]", "human"));
    const std::size_t steps = 15;
    const auto gen = generator("human", steps, {{"Hunger", 5.0}, {"Happiness", 50.0}, {"Engagement", 50.0}},
                               {"Engagement"});
    // Happiness is never observed: its start value is part of the scenario.
    const auto kb = fixtures::kb_from(synthesize(o, gen, w, {{"X", -3.0}}, "p", 1, {"Hunger"}), o);
    auto s = bound("indirect", "p", steps, {"Engagement"});
    s.agents[0].initial["Happiness"] = 50.0;

    FitOptions opts;
    opts.n_samples = 10000;
    opts.n_runs_per_sample = 20;
    opts.seed = 8;
    const auto fit = abc_fit(o, {{"X"}}, s, w, kb, opts);

    // grid enumeration over the 100 bin centers
    const ModelScorer scorer(o, s, w, kb);
    Posterior ref = Posterior::uniform(fit.posteriors[0].parameter, 100);
    for (std::size_t b = 0; b < 100; ++b)
        ref.bins[b] = scorer.score({{"X", ref.center(b)}}, ScoreOptions{}).model_score;
    ref.normalize();
    const double kl = kl_from_uniform(fit.posteriors[0]);
    const double kl_ref = kl_from_uniform(ref);
    return {kl > 0.1 && kl_ref > 0.1, "KL " + num(kl) + " (grid reference " + num(kl_ref) + ")"};
}

Verdict scoring_fidelity()
{
    const auto o = fixtures::countries();
    const auto kb = fixtures::kb_from(fixtures::sri_lanka_csv(), o);
    // Lookup-table worldview: each year's GDP maps to the next year's.
    auto table = [&](double shift) {
        WorldView w;
        for (int t = 0; t < 7; ++t) {
            const double now = fixtures::sri_lanka_gdp[t] + shift;
            add_rule(w, parse_rule(o,
                                   "IF [GDP] > " + format_number(now - 0.5) + " AND [GDP] < " + format_number(now + 0.5) +
                                       " THEN [GDP] = " + format_number(fixtures::sri_lanka_gdp[t + 1] + shift),
                                   "country"));
        }
        return w;
    };
    auto s = fixtures::single("c", "country", "Sri Lanka", 7, {"GDP"});
    const double exact = score_model(o, s, table(0), {}, kb, ScoreOptions{}).model_score;

    // simulated GDP 20 above the data at every step (10% of the 0..200 range)
    s.agents[0].initial["GDP"] = fixtures::sri_lanka_gdp[0] + 20;
    const auto shifted = score_model(o, s, table(20), {}, kb, ScoreOptions{});
    const double gdp = shifted.per_attribute.at("c.GDP");

    const auto kb4 = fixtures::kb_from(fixtures::sri_lanka_csv() + fixtures::sri_lanka_csv("Ghana", "GHA", 3) +
                                           fixtures::sri_lanka_csv("Fiji", "FJI", -30) + "Atlantis,country,GDP,0,5\n",
                                       o);
    auto open = fixtures::single("c", "country", std::nullopt, 7, {"GDP", "Population"});
    const auto gen = score_model(o, open, WorldView{}, {}, kb4, ScoreOptions{});
    return {exact == 1.0 && std::abs(gdp - 0.6) <= 1e-9 && gen.per_entity.size() == 3,
            "exact " + num(exact, 6) + ", perturbed GDP " + num(gdp, 12) + ", " + std::to_string(gen.per_entity.size()) +
                " countries scored"};
}

Verdict improvement_sign()
{
    const auto o = wide_people();
    WorldView base;
    base.id = "base";
    add_rule(base, parse_rule(o, "[Hunger] = [Hunger] + 0.5", "human"));
    const Rule candidate = parse_rule(o, hunger_text, "human", {{"X", -10, 10}});
    WorldView truth = base;
    add_rule(truth, candidate);

    std::string detail;
    bool pass = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RandomStream rng(seed);
        const double x = -rng.uniform(2, 4);
        for (bool with : {true, false}) {
            std::string rows;
            std::vector<Scenario> models;
            for (int e = 0; e < 3; ++e) {
                const std::string id = "e" + std::to_string(e);
                const auto gen = generator("human", 8,
                                           {{"Hunger", rng.uniform(2, 7)}, {"Happiness", rng.uniform(30, 60)}},
                                           {"Happiness", "Hunger"});
                rows += synthesize(o, gen, with ? truth : base, {{"X", x}}, id, seed);
                models.push_back(bound(id, id, 8, {"Happiness"}));
            }
            const auto kb = fixtures::kb_from(rows, o);
            FitOptions fit;
            fit.n_samples = 2000;
            fit.seed = seed;
            ScoreOptions score;
            score.seed = seed;
            const double delta = rule_improvement(o, base, candidate, models, kb, fit, score).delta;
            pass = pass && (with ? delta > 0 : delta <= 0);
            detail += num(delta, 3) + (with ? " / " : "; ");
        }
    }
    return {pass, "deltas with/without: " + detail};
}

int shell(const std::string& cmd)
{
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().filename() == ".abbl.lock")
            continue;
        std::ifstream in(e.path(), std::ios::binary);
        out[fs::relative(e.path(), root).string()] = std::string(std::istreambuf_iterator<char>(in), {});
    }
    return out;
}

Verdict cli_determinism()
{
    const fs::path root = fs::temp_directory_path() / "abbl-acceptance-cli";
    const fs::path inputs = fs::temp_directory_path() / "abbl-acceptance-inputs";
    fs::remove_all(inputs);
    fs::create_directories(inputs);
    std::ofstream(inputs / "types.json")
        << R"([{"name": "Human", "attributes": [{"name": "Hunger", "kind": "continuous", "range": [0, 10]},
                {"name": "Happiness", "kind": "continuous", "range": [0, 10]}]}])";
    std::ofstream(inputs / "rules.json") << R"([
        {"agent_type": "human", "text": "IF [Hunger] > 4 THEN [Happiness] = [Happiness] - X",
         "parameters": [{"name": "X", "lo": -10, "hi": 10}]},
        {"agent_type": "human", "text": "[Hunger] = [Hunger] + 1", "probabilistic": true}])";
    std::ofstream(inputs / "calm.json")
        << R"({"agent_type": "human", "text": "IF [Hunger] > 8 THEN [Hunger] = 2"})";
    std::ofstream(inputs / "obs.csv") << "entity_id,agent_type,attribute,time,value\n"
                                         "alice,human,Hunger,0,5\nalice,human,Happiness,0,2\n"
                                         "alice,human,Happiness,1,4\nalice,human,Happiness,2,7\n"
                                         "bob,human,Hunger,0,3\nbob,human,Happiness,0,5\n"
                                         "bob,human,Happiness,1,5\nbob,human,Happiness,2,6\n";
    std::ofstream(inputs / "people.json")
        << R"({"id": "people", "agents": [{"slot": "p", "type": "human"}], "n_steps": 2,
              "observed": [{"slot": "p", "attribute": "Happiness"}]})";

    const std::string bin = ABBL_CLI_PATH;
    auto pipeline = [&](int threads) {
        fs::remove_all(root);
        const std::string g = bin + " --workspace " + root.string() + " --seed 42 --threads " +
                              std::to_string(threads) + " ";
        const std::string in = inputs.string() + "/";
        int bad = 0;
        bad += shell(g + "init > /dev/null") != 0;
        fs::copy_file(inputs / "people.json", root / "scenarios/people.json");
        for (const std::string& cmd :
             {"ontology add --file " + in + "types.json", "rule add " + in + "rules.json", "kb ingest " + in + "obs.csv",
              std::string("fit --group X,p_rule --samples 1000 --runs-per-sample 5"),
              std::string("score --scenario people --runs 50"),
              std::string("sim predict --scenario people --runs 400 --bind p=alice"),
              std::string("worldview score default --runs 20"), "rule improve " + in + "calm.json --samples 300",
              "report --plot-dir " + (root / "plots").string()})
            bad += shell(g + cmd + " > /dev/null 2>&1") != 0;
        return std::make_pair(bad, snapshot(root));
    };
    const auto [bad1, a] = pipeline(1);
    const auto [bad2, b] = pipeline(1);
    const auto [bad3, c] = pipeline(8);
    fs::remove_all(root);
    fs::remove_all(inputs);
    std::size_t results = 0;
    for (const auto& [name, body] : a)
        results += name.rfind("results/", 0) == 0;
    const bool ok = bad1 + bad2 + bad3 == 0 && a == b && a == c && results >= 5;
    return {ok, std::to_string(a.size()) + " files (" + std::to_string(results) + " results), " +
                    std::to_string(bad1 + bad2 + bad3) + " failed commands, " + (a == b ? "repeat identical" : "repeat differs") +
                    ", " + (a == c ? "threads identical" : "threads differ")};
}

Verdict prediction_uncertainty()
{
    const auto o = wide_people();
    const auto w = hunger_view(o);
    const auto kb = fixtures::kb_from("p,human,Hunger,0,6\np,human,Happiness,0,50\np,human,Engagement,0,0\n", o);
    const auto s = bound("predict", "p", 5, {"Happiness"});
    const Simulation sim(o, s, w);
    const auto initial = sim.initialize(kb, o);
    const UnknownParameter x{"X", -10, 10, false};

    Posterior point = Posterior::uniform(x);
    std::fill(point.bins.begin(), point.bins.end(), 0.0);
    point.bins[35] = 1.0;
    const auto pp = predict(sim, initial, {{"X", point}}, 1000, 3);
    const auto direct = sim.run(initial, {{"X", point.center(35)}}, derive_seed(3, 0));
    bool equal = true;
    for (const auto& oc : pp.outcomes)
        for (double v : oc.samples)
            equal = equal && v == std::get<double>(*direct[oc.step].values[oc.slot][oc.attribute]);

    const auto up = predict(sim, initial, {{"X", Posterior::uniform(x)}}, 10000, 4);
    // Discrete uniform over the 100 centers; Happiness at step k is 50 - k*X.
    double worst = 0;
    for (std::size_t k = 1; k <= 5; ++k) {
        std::vector<double> grid;
        for (std::size_t b = 0; b < 100; ++b)
            grid.push_back(std::clamp(50 - static_cast<double>(k) * (-10 + 0.2 * b + 0.1), 0.0, 100.0));
        std::sort(grid.begin(), grid.end());
        const double ref = grid[94] - grid[4];
        const auto* oc = up.find("h", "Happiness", k);
        worst = std::max(worst, std::abs(oc->band_width() - ref) / ref);
    }
    return {equal && worst <= 0.05, std::string(equal ? "point mass equals run" : "point mass differs") +
                                        ", max band error " + num(100 * worst, 2) + "%"};
}

} // namespace

int main()
{
    struct Criterion {
        int id;
        std::string name;
        std::function<Verdict()> check;
        double budget_s;
    };
    const std::vector<Criterion> criteria{
        {1, "parser conformance", parser_conformance, 1},
        {2, "synthetic parameter recovery", synthetic_recovery, 300},
        {3, "rule probability recovery", probability_recovery, 300},
        {4, "posterior combination", combination, 0},
        {5, "multi-model sharpening", sharpening, 0},
        {6, "indirect learning", indirect_learning, 0},
        {7, "scoring fidelity", scoring_fidelity, 0},
        {8, "rule improvement sign", improvement_sign, 0},
        {9, "determinism", cli_determinism, 0},
        {10, "prediction uncertainty", prediction_uncertainty, 0},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = num(secs, 2) + " s";
        if (c.budget_s > 0) {
            timing += " of " + num(c.budget_s, 0) + " s";
            if (secs >= c.budget_s)
                v.pass = false;
        }
        failures += !v.pass;
        std::cout << "criterion " << c.id << " " << (v.pass ? "PASS" : "FAIL") << " " << c.name << " (" << timing
                  << "): " << v.detail << std::endl;
    }
    return failures;
}
