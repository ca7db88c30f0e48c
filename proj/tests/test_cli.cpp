#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "abbl/cli.hpp"
#include "fixtures.hpp"

using namespace abbl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

class Cli : public ::testing::Test {
  protected:
    fs::path root;

    void SetUp() override
    {
        root = fs::temp_directory_path() /
               ("abbl-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root);
        fs::create_directories(root);
    }
    void TearDown() override { fs::remove_all(root); }

    Outcome cli(std::vector<std::string> args) const
    {
        args.insert(args.begin(), {"--workspace", root.string()});
        std::ostringstream out, err;
        const int code = cli::dispatch(args, out, err);
        return {code, out.str(), err.str()};
    }

    void write(const fs::path& rel, const std::string& body) const
    {
        fs::create_directories((root / rel).parent_path());
        std::ofstream(root / rel) << body;
    }

    json read(const fs::path& rel) const { return io::read_json_file(root / rel); }

    // Workspace with the Human type, the hunger rule and two people.
    void populate() const
    {
        ASSERT_EQ(cli({"init"}).code, 0);
        write("in/types.json", R"([{"name": "Human", "attributes": [
            {"name": "Hunger", "kind": "continuous", "range": [0, 10]},
            {"name": "Happiness", "kind": "continuous", "range": [0, 10]}]}])");
        ASSERT_EQ(cli({"ontology", "add", "--file", (root / "in/types.json").string()}).code, 0);
        write("in/rule.json", R"({"agent_type": "human",
            "text": "IF [Hunger] > 4 THEN [Happiness] = [Happiness] - X",
            "parameters": [{"name": "X", "lo": -10, "hi": 10}]})");
        ASSERT_EQ(cli({"rule", "add", (root / "in/rule.json").string()}).code, 0);
        write("in/obs.csv", "entity_id,agent_type,attribute,time,value\n"
                            "alice,human,Hunger,0,6\nalice,human,Happiness,0,2\nalice,human,Happiness,1,5\n"
                            "alice,human,Happiness,2,8\n"
                            "bob,human,Hunger,0,6\nbob,human,Happiness,0,1\nbob,human,Happiness,1,4\n"
                            "bob,human,Happiness,2,7\n");
        ASSERT_EQ(cli({"kb", "ingest", (root / "in/obs.csv").string()}).code, 0);
        for (const std::string who : {"alice", "bob"})
            write("scenarios/" + who + ".json", R"({"id": ")" + who + R"(", "agents": [{"slot": "p", "type": "human",
                "entity": ")" + who + R"("}], "n_steps": 2, "observed": [{"slot": "p", "attribute": "Happiness"}]})");
    }
};

TEST_F(Cli, InitAndIngestReportCounts)
{
    ASSERT_EQ(cli({"init"}).code, 0);
    EXPECT_TRUE(fs::exists(root / "ontology.json"));
    EXPECT_TRUE(fs::exists(root / "worldviews/default.json"));
    EXPECT_EQ(cli({"ontology", "add", "Human", "--attribute", "Hunger:continuous:0:10"}).code, 0);
    write("obs.csv", "entity_id,agent_type,attribute,time,value\na,human,Hunger,0,1\na,human,Hunger,1,2\n");
    const auto r = cli({"--json", "kb", "ingest", (root / "obs.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j.at("observations").get<int>(), 2);
    EXPECT_EQ(read("kb.json").at("entities").size(), 1u);
}

TEST_F(Cli, UsageErrorsExitTwo)
{
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_EQ(cli({}).code, 2);
    EXPECT_EQ(cli({"kb"}).code, 2);
    EXPECT_EQ(cli({"sim", "run"}).code, 2);
    EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(Cli, DomainErrorsExitOneWithJsonBody)
{
    ASSERT_EQ(cli({"init"}).code, 0);
    const auto r = cli({"--json", "kb", "timeline", "ghost"});
    EXPECT_EQ(r.code, 1);
    const auto j = json::parse(r.err);
    EXPECT_EQ(j.at("error").at("code"), "UnknownEntity");
    // not a workspace
    fs::remove(root / "ontology.json");
    EXPECT_EQ(cli({"kb", "entities"}).code, 1);
}

TEST_F(Cli, ReportWithoutResultsIsMissingResult)
{
    ASSERT_EQ(cli({"init"}).code, 0);
    const auto r = cli({"--json", "report"});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(json::parse(r.err).at("error").at("code"), "MissingResult");
    EXPECT_EQ(cli({"report", (root / "results/none.json").string()}).code, 1);
}

TEST_F(Cli, FitStoresPosteriorAndReportMatchesSummary)
{
    populate();
    const auto r = cli({"--seed", "3", "fit", "--group", "X", "--samples", "2000", "--bins", "40"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto fit = read("results/fit-X.json");
    EXPECT_EQ(fit.at("kind"), "fit");
    EXPECT_EQ(fit.at("per_model").size(), 2u);
    EXPECT_EQ(fit.at("seed").get<std::uint64_t>(), 3u);
    const auto posterior = io::posterior_from_json(read("posteriors/X.json"));
    EXPECT_NEAR(posterior.mode(), -3, 0.5);

    const auto w = io::worldview_from_json(read("worldviews/default.json"), io::ontology_from_json(read("ontology.json")));
    EXPECT_EQ(w.posteriors.at("X").bins, posterior.bins);

    const auto rep = cli({"report", (root / "posteriors/X.json").string(), "--plot-dir", (root / "plots").string()});
    ASSERT_EQ(rep.code, 0) << rep.err;
    const auto s = summarize(posterior);
    EXPECT_NE(rep.out.find(fixed(s.mode)), std::string::npos) << rep.out;
    EXPECT_NE(rep.out.find(fixed(s.sd)), std::string::npos);
    EXPECT_NE(rep.out.find(fixed(s.q95)), std::string::npos);
    EXPECT_FALSE(fs::is_empty(root / "plots"));
}

TEST_F(Cli, CombineIsTheNormalizedProduct)
{
    ASSERT_EQ(cli({"init"}).code, 0);
    const UnknownParameter x{"X", 0, 1, false};
    io::write_json_file(root / "a.json", io::to_json(Posterior{x, {0.2, 0.8}}));
    io::write_json_file(root / "b.json", io::to_json(Posterior{x, {0.6, 0.4}}));
    const auto r = cli({"combine", (root / "a.json").string(), (root / "b.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto c = io::posterior_from_json(read("results/combined-X.json"));
    EXPECT_NEAR(c.bins[0], 0.12 / (0.12 + 0.32), 1e-12);
    io::write_json_file(root / "c.json", io::to_json(Posterior{x, {0.2, 0.3, 0.5}}));
    EXPECT_EQ(cli({"combine", (root / "a.json").string(), (root / "c.json").string()}).code, 1);
}

TEST_F(Cli, ScoreSimAndPredictWriteResults)
{
    populate();
    ASSERT_EQ(cli({"fit", "--group", "X", "--samples", "500"}).code, 0);
    auto r = cli({"--json", "score", "--scenario", "alice"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_GT(json::parse(r.out).at("model_score").get<double>(), 0.8);
    EXPECT_TRUE(fs::exists(root / "results/score-alice-default.json"));

    r = cli({"sim", "run", "--scenario", "alice", "--param", "X=-3"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream csv(root / "results/run-alice-default.csv");
    std::string header, line, last;
    std::getline(csv, header);
    EXPECT_EQ(header, "step,time,slot,attribute,value");
    while (std::getline(csv, line))
        if (line.find("Happiness") != std::string::npos)
            last = line;
    EXPECT_EQ(last, "2,2,p,Happiness,8");

    r = cli({"--seed", "1", "sim", "predict", "--scenario", "bob", "--runs", "200"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read("results/predict-bob-default.json").at("kind"), "prediction");
    EXPECT_EQ(cli({"report"}).code, 0);
}

TEST_F(Cli, WorldviewForkEditAndScore)
{
    populate();
    ASSERT_EQ(cli({"fit", "--group", "X", "--samples", "500"}).code, 0);
    ASSERT_EQ(cli({"worldview", "fork", "default", "--id", "alt"}).code, 0);
    write("in/flat.json", R"({"agent_type": "human", "text": "[Happiness] = [Happiness] + 0"})");
    ASSERT_EQ(cli({"worldview", "edit", "alt", "--replace", "r1", "--with", (root / "in/flat.json").string()}).code, 0);
    auto r = cli({"--json", "worldview", "score", "alt"});
    ASSERT_EQ(r.code, 0) << r.err;
    const double alt = json::parse(r.out).at("score").get<double>();
    r = cli({"--json", "worldview", "score", "default"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_GT(json::parse(r.out).at("score").get<double>(), alt);
    r = cli({"--json", "worldview", "list"});
    EXPECT_NE(r.out.find("alt"), std::string::npos);
    EXPECT_EQ(cli({"worldview", "edit", "alt", "--remove", "r7"}).code, 1);
}

TEST_F(Cli, RuleParseAndImprove)
{
    populate();
    auto r = cli({"--json", "rule", "parse", (root / "in/rule.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    write("in/bad.json", R"({"agent_type": "human", "text": "IF [Hunger] > THEN [Happiness] = 1"})");
    r = cli({"--json", "rule", "check", (root / "in/bad.json").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("SyntaxError"), std::string::npos);

    ASSERT_EQ(cli({"worldview", "fork", "default", "--id", "empty"}).code, 0);
    ASSERT_EQ(cli({"worldview", "edit", "empty", "--remove", "r1"}).code, 0);
    r = cli({"--json", "rule", "improve", (root / "in/rule.json").string(), "--worldview", "empty", "--samples", "500"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_GT(read("results/improvement-empty.json").at("delta").get<double>(), 0.0);
}

TEST_F(Cli, SecondProcessIsLockedOut)
{
    ASSERT_EQ(cli({"init"}).code, 0);
    FileLock held(root / ".abbl.lock");
    const auto r = cli({"--json", "kb", "entities"});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(json::parse(r.err).at("error").at("code"), "WorkspaceLocked");
}

TEST_F(Cli, BinaryExitCodes)
{
    const std::string bin = ABBL_CLI_PATH;
    const std::string ws = " --workspace " + root.string();
    EXPECT_EQ(std::system((bin + ws + " init > /dev/null").c_str()), 0);
    EXPECT_EQ(WEXITSTATUS(std::system((bin + ws + " bogus 2> /dev/null").c_str())), 2);
    EXPECT_EQ(WEXITSTATUS(std::system((bin + ws + " kb timeline nobody 2> /dev/null").c_str())), 1);
}

} // namespace
