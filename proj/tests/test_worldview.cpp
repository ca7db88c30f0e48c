#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace abbl;

namespace {

ErrorCode code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::IoError;
}

std::vector<std::string> texts(const WorldView& w)
{
    std::vector<std::string> out;
    for (const auto& [type, list] : w.rules)
        for (const auto& r : list)
            out.push_back(r.id + ":" + print(r));
    return out;
}

class Views : public ::testing::Test {
  protected:
    Ontology o = fixtures::people();
    WorldViewRegistry reg;

    Rule rule(const std::string& text, std::vector<ParameterRange> ranges = {}) const
    {
        return parse_rule(o, text, "human", std::move(ranges));
    }

    void SetUp() override
    {
        auto& base = reg.create("base");
        add_rule(base, rule("IF [Hunger] > 4 THEN [Happiness] = [Happiness] - X", {{"X", -10, 10}}));
        add_rule(base, rule("[Hunger] = [Hunger] + 1"));
        set_posterior(base, Posterior::uniform(UnknownParameter{"X", -10, 10, false}, 20));
    }
};

TEST_F(Views, ForkCopiesAndIsIsolated)
{
    const auto id = reg.fork("base", "child");
    EXPECT_EQ(id, "child");
    const auto& child = reg.get("child");
    EXPECT_EQ(texts(child), texts(reg.get("base")));
    EXPECT_EQ(child.posteriors.at("X").bins, reg.get("base").posteriors.at("X").bins);
    EXPECT_EQ(child.parent, std::optional<std::string>("base"));

    add_rule(reg.get("child"), rule("[Engagement] = [Engagement] + 1"));
    remove_rule(reg.get("child"), "r1");
    EXPECT_EQ(texts(reg.get("base")).size(), 2u);
    EXPECT_TRUE(reg.get("base").posteriors.count("X"));
    EXPECT_FALSE(reg.get("child").posteriors.count("X"));
}

TEST_F(Views, LineageAndGeneratedIds)
{
    const auto a = reg.fork("base");
    const auto b = reg.fork(a);
    const auto c = reg.fork(b, "leaf");
    EXPECT_EQ(a, "base.1");
    EXPECT_EQ(reg.fork("base"), "base.2");
    EXPECT_EQ(reg.lineage(c), (std::vector<std::string>{"leaf", b, a, "base"}));
    EXPECT_EQ(code_of([&] { reg.fork("base", "leaf"); }), ErrorCode::UnknownWorldView);
    EXPECT_EQ(code_of([&] { reg.fork("nope"); }), ErrorCode::UnknownWorldView);
    EXPECT_EQ(code_of([&] { reg.get("nope"); }), ErrorCode::UnknownWorldView);
}

TEST_F(Views, EditsInvalidateOnlyWhatTheyTouch)
{
    auto& w = reg.get("base");
    w.score = StoredScore{0.5, {"s"}, content_hash(w)};
    add_rule(w, rule("[Engagement] = [Engagement] + 1"));
    EXPECT_FALSE(w.score);
    EXPECT_TRUE(w.posteriors.count("X"));

    w.score = StoredScore{0.5, {"s"}, content_hash(w)};
    // identical text still counts as an edit
    replace_rule(w, "r1", rule("IF [Hunger] > 4 THEN [Happiness] = [Happiness] - X", {{"X", -10, 10}}));
    EXPECT_FALSE(w.score);
    EXPECT_FALSE(w.posteriors.count("X"));
    EXPECT_EQ(texts(w).front(), "r1:" + print(rule("IF [Hunger] > 4 THEN [Happiness] = [Happiness] - X",
                                                   {{"X", -10, 10}})));

    remove_rule(w, "r2");
    EXPECT_EQ(texts(w).size(), 2u);
    EXPECT_EQ(code_of([&] { remove_rule(w, "r2"); }), ErrorCode::UnknownRule);
    EXPECT_EQ(code_of([&] { replace_rule(w, "r9", rule("[Hunger] = 1")); }), ErrorCode::UnknownRule);
}

TEST_F(Views, RuleIdsAreUniqueAndNotReused)
{
    auto& w = reg.get("base");
    remove_rule(w, "r2");
    const auto id = add_rule(w, rule("[Engagement] = [Engagement] + 1"));
    EXPECT_EQ(id, "r3");
    Rule named = rule("[Hunger] = 0");
    named.id = "r3";
    EXPECT_EQ(code_of([&] { add_rule(w, named); }), ErrorCode::UnknownRule);
}

TEST_F(Views, ParameterRangesMustAgree)
{
    auto& w = reg.get("base");
    EXPECT_EQ(code_of([&] { add_rule(w, rule("[Engagement] = [Engagement] + X", {{"X", 0, 1}})); }),
              ErrorCode::ParameterRangeConflict);
    // same name, same range: shared parameter
    add_rule(w, rule("[Engagement] = [Engagement] + X", {{"X", -10, 10}}));
    EXPECT_EQ(all_parameters(w).size(), 1u);
    // replacing the only other user may change the range
    remove_rule(w, "r3");
    replace_rule(w, "r1", rule("[Happiness] = X", {{"X", 0, 5}}));
    EXPECT_EQ(all_parameters(w).front().hi, 5);
}

TEST_F(Views, PosteriorsNeedAUsingRule)
{
    auto& w = reg.get("base");
    EXPECT_EQ(code_of([&] { set_posterior(w, Posterior::uniform(UnknownParameter{"Q", 0, 1, false})); }),
              ErrorCode::UnknownParameterInGroup);
    // flat posterior: first bin wins the tie
    EXPECT_EQ(posterior_modes(w, all_parameters(w)).at("X"), -9.5);
    remove_rule(w, "r1");
    EXPECT_TRUE(w.posteriors.empty());
}

TEST_F(Views, EffectiveRulesRunRootFirst)
{
    Ontology o2 = o;
    o2.add_agent_type("Student", "human", {}, {});
    auto& w = reg.get("base");
    add_rule(w, parse_rule(o2, "[Engagement] = 9", "student"));
    const auto rules = effective_rules(o2, w, "student");
    ASSERT_EQ(rules.size(), 3u);
    EXPECT_EQ(rules.back().agent_type, "student");
    EXPECT_EQ(effective_rules(o2, w, "human").size(), 2u);
}

TEST_F(Views, ContentHashTracksRulesAndPosteriors)
{
    auto& w = reg.get("base");
    const auto h = content_hash(w);
    reg.fork("base", "copy");
    EXPECT_EQ(content_hash(reg.get("copy")), h);
    w.score = StoredScore{0.1, {"s"}, h};
    EXPECT_TRUE(score_is_current(w));
    // rule ids and posteriors are not content
    w.posteriors["X"].bins.assign(20, 0.0);
    w.posteriors["X"].bins[3] = 1.0;
    EXPECT_EQ(content_hash(w), h);
    w.rules.begin()->second.front().id = "renamed";
    EXPECT_EQ(content_hash(w), h);
    w.rules.begin()->second.back().source_text += " ";
    EXPECT_NE(content_hash(w), h);
    EXPECT_FALSE(score_is_current(w));
}

class Scored : public ::testing::Test {
  protected:
    Ontology o = fixtures::people();

    // Happiness observed at t=0..2; the rule lowers it by one per step.
    KnowledgeBase kb = fixtures::kb_from("a,human,Hunger,0,6\n"
                                         "a,human,Happiness,0,8\na,human,Happiness,1,7\na,human,Happiness,2,6\n"
                                         "b,human,Hunger,0,6\n"
                                         "b,human,Happiness,0,8\nb,human,Happiness,1,7\nb,human,Happiness,2,3.9\n",
                                         o);

    Scenario model(const std::string& entity) const
    {
        auto s = fixtures::single("h", "human", entity, 2, {"Happiness"});
        s.id = entity;
        return s;
    }
};

TEST_F(Scored, ExactReproductionScoresOne)
{
    WorldView w;
    w.id = "w";
    add_rule(w, parse_rule(o, "[Happiness] = [Happiness] - 1", "human"));
    const auto r = score_worldview(o, w, {model("a")}, kb, ScoreOptions{});
    EXPECT_EQ(r.score, 1.0);
    ASSERT_TRUE(w.score);
    EXPECT_TRUE(score_is_current(w));
    EXPECT_EQ(w.score->scenarios, std::vector<std::string>{"a"});
}

TEST_F(Scored, ScoreIsTheMeanOverModels)
{
    WorldView w;
    add_rule(w, parse_rule(o, "[Happiness] = [Happiness] - 1", "human"));
    const auto r = score_worldview(o, w, {model("a"), model("b")}, kb, ScoreOptions{});
    // b is off by 2.1 at the last point: 1 - 2.1/2.5 = 0.16
    const double b = (1 + 1 + 0.16) / 3;
    EXPECT_NEAR(r.reports[1].model_score, b, 1e-12);
    EXPECT_NEAR(r.score, (1 + b) / 2, 1e-12);
}

TEST_F(Scored, InertRuleLeavesTheScoreUnchanged)
{
    WorldView w;
    add_rule(w, parse_rule(o, "[Happiness] = [Happiness] - 1", "human"));
    const double before = score_worldview(o, w, {model("a"), model("b")}, kb, ScoreOptions{}).score;
    add_rule(w, parse_rule(o, "IF [Hunger] > 11 THEN [Engagement] = 0", "human"));
    const double after = score_worldview(o, w, {model("a"), model("b")}, kb, ScoreOptions{}).score;
    EXPECT_EQ(before, after);
}

TEST_F(Scored, UnfittedParametersAreReported)
{
    WorldView w;
    add_rule(w, parse_rule(o, "[Happiness] = [Happiness] - X", "human", {{"X", 0, 2}}));
    EXPECT_EQ(code_of([&] { score_worldview(o, w, {model("a")}, kb, ScoreOptions{}); }),
              ErrorCode::UnfittedParameters);
    EXPECT_EQ(code_of([&] { score_worldview(o, w, {}, kb, ScoreOptions{}); }), ErrorCode::EmptyInput);
    auto p = Posterior::uniform(UnknownParameter{"X", 0, 2, false}, 2);
    p.bins = {0.0, 1.0};
    set_posterior(w, p);
    // mode is the center of the upper bin, 1.5
    const auto r = score_worldview(o, w, {model("a")}, kb, ScoreOptions{});
    EXPECT_NEAR(r.score, (1 + (1 - 0.5 / 2.5) + (1 - 1.0 / 2.5)) / 3, 1e-12);
}

TEST_F(Views, JsonRoundTrip)
{
    auto& w = reg.get("base");
    w.score = StoredScore{0.25, {"a", "b"}, content_hash(w)};
    const auto back = io::worldview_from_json(io::to_json(w), o);
    EXPECT_EQ(texts(back), texts(w));
    EXPECT_EQ(back.posteriors.at("X").bins, w.posteriors.at("X").bins);
    EXPECT_EQ(back.next_rule_number, w.next_rule_number);
    ASSERT_TRUE(back.score);
    EXPECT_EQ(back.score->rules_hash, w.score->rules_hash);
    EXPECT_TRUE(score_is_current(back));
}

} // namespace
