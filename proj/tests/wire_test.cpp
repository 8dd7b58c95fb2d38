#include <gtest/gtest.h>

#include <sstream>

#include "crowdguard/wire.hpp"
#include "test_support.hpp"

namespace crowdguard {
namespace {

using A = BuilderAction;
using testing::lit;

TEST(ActionJson, RoundTripsEveryKind) {
  const std::vector<A> all = {
      A::choose_root(RootChoice::StateIf),
      A::choose_arg("condition", "wet"),
      A::choose_predicate(lit("road_is", {{"condition", "wet"}}, true)),
      A::choose_logical(LogicOp::Or),
      A::choose_choicebox(ChoiceboxPos::Outer, LogicOp::And),
      A::finish(),
      A::clear(),
      A::edit(2, A::choose_arg("kind", "studded")),
  };
  for (const auto& a : all) EXPECT_EQ(action_from_json(action_to_json(a)), a);
  EXPECT_EQ(actions_from_json(actions_to_json(all)), all);
}

TEST(ActionJson, ExactShapes) {
  EXPECT_EQ(action_to_json(A::choose_root(RootChoice::AllStates)),
            Json::parse(R"({"kind":"choose_root","root":"all"})"));
  EXPECT_EQ(action_to_json(A::choose_choicebox(ChoiceboxPos::Inner, LogicOp::Or)),
            Json::parse(R"({"kind":"choose_choicebox","position":"inner","op":"OR"})"));
  EXPECT_EQ(action_to_json(A::choose_predicate(lit("road_is", {{"condition", "wet"}}))),
            Json::parse(R"({"kind":"choose_predicate","predicate_id":"road_is",
                            "args":[{"slot":"condition","value":"wet"}],"negated":false})"));
}

TEST(ActionJson, RejectsBadInput) {
  for (const char* text : {R"({"kind":"choose_root","root":"some"})", R"({"kind":"jump"})",
                           R"({"root":"all"})", R"([1])",
                           R"({"kind":"choose_logical","op":"XOR"})",
                           R"({"kind":"edit","index":0,"replacement":{"kind":"edit","index":0,"replacement":{"kind":"finish"}}})"}) {
    EXPECT_THROW(action_from_json(Json::parse(text)), Error) << text;
  }
  std::size_t failed = 99;
  EXPECT_THROW(actions_from_json(Json::parse(R"([{"kind":"finish"},{"kind":"nope"}])"), &failed), Error);
  EXPECT_EQ(failed, 1u);
}

TEST(TokensJson, IndexesAndKinds) {
  const auto reg = testing::tires_registry();
  const auto b = replay(dnf_to_actions(testing::tires_dnf(), reg), reg);
  const Json t = tokens_to_json(b, reg);
  ASSERT_TRUE(t.is_array());
  EXPECT_EQ(t.front()["kind"], "root");
  std::string joined;
  for (const auto& tok : t) {
    if (!joined.empty()) joined += " ";
    joined += tok["text"].get<std::string>();
    EXPECT_TRUE(tok["index"].is_null() || tok["index"].is_number_unsigned());
  }
  EXPECT_EQ("The action applies to " + joined, render_tokens(b, reg));
}

ResponseRecord sample_response() {
  ResponseRecord r;
  r.worker_id = "w1";
  r.hit_id = "w1:h1";
  r.question_id = "w1:h1:q4";
  r.condition = ConditionId::FgExplainOneSided;
  r.section = Section::Task;
  r.gold_kind = GoldKind::FakeGold;
  r.state_id = "s001";
  r.action_id = "fake_gold";
  r.answer = Answer::Yes;
  r.explanation = "An explanation with several words in it for the gate.";
  r.timestamp = 42;
  return r;
}

TEST(RecordJson, ResponsesRoundTrip) {
  std::vector<ResponseRecord> rs = {sample_response(), sample_response()};
  rs[1].question_id = "w1:h1:q5";
  rs[1].answer = Answer::SkipReplaced;
  rs[1].explanation.reset();
  std::stringstream io;
  write_responses(io, rs);
  EXPECT_EQ(read_responses(io), rs);
  EXPECT_EQ(response_to_json(rs[1])["answer"], "skip_replaced");
}

TEST(RecordJson, SubmissionsRoundTrip) {
  RuleSubmission s;
  s.worker_id = "w2";
  s.hit_id = "w2:h1";
  s.question_id = "w2:h1:q3";
  s.action_id = "a001";
  s.rule = "( lit:level_is[level=3] )";
  s.included = 90;
  s.timestamp = 7;
  std::stringstream io;
  write_submissions(io, std::vector<RuleSubmission>{s});
  EXPECT_EQ(read_submissions(io), std::vector<RuleSubmission>{s});
}

TEST(RecordJson, BadLineReportsNumber) {
  std::stringstream io;
  io << response_to_json(sample_response()).dump() << "\n\n" << R"({"worker_id":"w1"})" << "\n";
  try {
    read_responses(io);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.line(), std::optional<std::size_t>(3));
  }
}

TEST(RecordJson, QuestionAndHitRoundTrip) {
  Question q;
  q.question_id = "w1:h1:q1";
  q.section = Section::Tutorial;
  q.gold_kind = GoldKind::Tutorial;
  q.state_id = "s1";
  q.action_id = "a1";
  q.action_text = "Check it.";
  q.given_answer = false;
  q.given_explanation = "Because.";
  q.example_rule = "ALL";
  EXPECT_EQ(question_from_json(question_to_json(q)), q);
  Hit h;
  h.hit_id = "w1:h1";
  h.worker_id = "w1";
  h.condition = ConditionId::RuleBased;
  h.questions = {q};
  EXPECT_EQ(hit_from_json(hit_to_json(h)), h);
}

}  // namespace
}  // namespace crowdguard
