#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "crowdguard/demo.hpp"
#include "crowdguard/model.hpp"
#include "test_support.hpp"

namespace crowdguard {
namespace {

namespace fs = std::filesystem;

const fs::path kData = CROWDGUARD_DATA_DIR;

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::config;
}

TEST(LoadStates, EmptyInputGivesEmptySet) {
  std::istringstream in("");
  EXPECT_EQ(parse_states(in).size(), 0u);
}

TEST(LoadStates, DemoFileHas540States) {
  const auto states = load_states(kData / "states.jsonl");
  EXPECT_EQ(states.size(), 540u);
}

TEST(LoadStates, DuplicateIdRejectedWithLine) {
  std::istringstream in(
      R"({"state_id":"s1","level":1,"features":{"x":1},"render":""})"
      "\n"
      R"({"state_id":"s1","level":2,"features":{"x":2},"render":""})"
      "\n");
  try {
    parse_states(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::duplicate_id);
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadStates, MissingFieldAndBadJson) {
  std::istringstream missing(R"({"state_id":"s1","level":1,"render":""})");
  EXPECT_EQ(code_of([&] { parse_states(missing); }), ErrorCode::missing_field);
  std::istringstream broken("{\"state_id\":");
  EXPECT_EQ(code_of([&] { parse_states(broken); }), ErrorCode::parse);
  std::istringstream no_features(R"({"state_id":"s1","level":1,"features":{},"render":""})");
  EXPECT_EQ(code_of([&] { parse_states(no_features); }), ErrorCode::parse);
  std::istringstream bad_level(R"({"state_id":"s1","level":-1,"features":{"x":1},"render":""})");
  EXPECT_EQ(code_of([&] { parse_states(bad_level); }), ErrorCode::parse);
}

TEST(LoadStates, RoundTripIsIdentical) {
  const auto states = load_states(kData / "states.jsonl");
  std::stringstream buf;
  write_states(buf, states);
  const auto again = parse_states(buf);
  EXPECT_EQ(again, states);
  std::stringstream buf2;
  write_states(buf2, again);
  std::ifstream file(kData / "states.jsonl", std::ios::binary);
  std::stringstream original;
  original << file.rdbuf();
  EXPECT_EQ(buf2.str(), original.str());
}

TEST(StateSet, LookupAfterInsert) {
  StateSet set;
  State s;
  s.state_id = "x";
  s.features = {{"f", 1.0}};
  set.insert(s);
  EXPECT_EQ(set.at("x"), s);
  EXPECT_EQ(set.find("y"), nullptr);
  EXPECT_EQ(code_of([&] { set.insert(s); }), ErrorCode::duplicate_id);
  EXPECT_EQ(code_of([&] { (void)set.at("y"); }), ErrorCode::not_found);
}

TEST(LoadActions, DemoFileHas100Actions) {
  const auto states = load_states(kData / "states.jsonl");
  const auto actions = load_actions(kData / "actions.jsonl", states);
  EXPECT_EQ(actions.size(), 100u);
  for (const auto& a : actions) {
    EXPECT_TRUE(states.contains(a.known_valid_state));
    EXPECT_FALSE(a.is_fake_gold);
  }
}

TEST(LoadActions, DanglingReferenceAndEmpty) {
  const auto states = testing::four_states();
  std::istringstream dangling(R"({"action_id":"a1","text":"t","known_valid_state":"zzz"})");
  EXPECT_EQ(code_of([&] { parse_actions(dangling, states); }), ErrorCode::dangling_reference);
  std::istringstream empty("\n\n");
  EXPECT_TRUE(parse_actions(empty, states).empty());
}

TEST(LoadPredicates, DemoRegistryHasEightPredicates) {
  const auto reg = load_predicates(kData / "predicates.jsonl");
  EXPECT_EQ(reg.size(), 8u);
  const Literal bracket{"larger_value_is", {{"object", "bracket"}}, false};
  EXPECT_EQ(reg.display(bracket), "the larger value is a bracket");
  EXPECT_EQ(reg.display(bracket.flipped()), "the larger value is not a bracket");
  EXPECT_EQ(reg.predicates(), demo_registry().predicates());
}

TEST(LoadPredicates, UnknownEvaluatorAndEmptyDomain) {
  std::istringstream unknown(
      R"({"predicate_id":"p","display_template":"p {x}","negated_display":"not p {x}",)"
      R"("arg_slots":[{"name":"x","domain":["1"]}],"evaluator_id":"nonexistent","feature":"f"})");
  EXPECT_EQ(code_of([&] { parse_predicates(unknown); }), ErrorCode::unknown_evaluator);
  std::istringstream empty_domain(
      R"({"predicate_id":"p","display_template":"p {x}","negated_display":"not p {x}",)"
      R"("arg_slots":[{"name":"x","domain":[]}],"evaluator_id":"equals","feature":"f"})");
  EXPECT_EQ(code_of([&] { parse_predicates(empty_domain); }), ErrorCode::empty_domain);
}

TEST(PredicateRegistry, OnePredicateTwoValuesGivesTwoAtoms) {
  PredicateRegistry reg({{"p", "p is {x}", "p is not {x}", {{"x", {"a", "b"}}}, "equals", "f"}});
  const auto atoms = reg.atoms();
  ASSERT_EQ(atoms.size(), 2u);
  // Enumerated by hand: p[x=a], p[x=b]; each also has a negated form.
  EXPECT_EQ(atoms[0], (Literal{"p", {{"x", "a"}}, false}));
  EXPECT_EQ(atoms[1], (Literal{"p", {{"x", "b"}}, false}));
  std::set<Literal> all;
  for (const auto& a : atoms) {
    all.insert(a);
    all.insert(a.flipped());
  }
  EXPECT_EQ(all.size(), 4u);
}

TEST(PredicateRegistry, DemoAtomCountMatchesSlotProduct) {
  const auto reg = demo_registry();
  std::size_t expected = 0;
  for (const auto& p : reg.predicates()) {
    std::size_t product = 1;
    for (const auto& s : p.arg_slots) product *= s.domain.size();
    expected += product;
  }
  // 3 + 1 + 6 + 6 + 6 + 7 + 5 + 36
  EXPECT_EQ(expected, 70u);
  EXPECT_EQ(reg.atoms().size(), expected);
}

TEST(PredicateRegistry, CheckRejectsBadLiterals) {
  const auto reg = demo_registry();
  EXPECT_FALSE(reg.check(Literal{"level_is", {{"level", "3"}}, false}).has_value());
  EXPECT_EQ(reg.check(Literal{"nope", {}, false})->code(), ErrorCode::unknown_predicate);
  EXPECT_EQ(reg.check(Literal{"level_is", {{"level", "9"}}, false})->code(),
            ErrorCode::domain_violation);
  EXPECT_TRUE(reg.check(Literal{"level_between", {{"upper", "3"}, {"level", "1"}}, false})
                  .has_value());
}

TEST(PredicateRegistry, KernelsOnFixture) {
  const auto reg = demo_registry();
  const auto states = testing::four_states();
  const State& f1 = states.at("f1");
  const State& f3 = states.at("f3");
  EXPECT_TRUE(reg.evaluate({"larger_value_is", {{"object", "bracket"}}, false}, f1));
  EXPECT_FALSE(reg.evaluate({"larger_value_is", {{"object", "bracket"}}, false}, f3));
  EXPECT_TRUE(reg.evaluate({"has_bracket", {{"object", "bracket"}}, false}, f1));
  EXPECT_FALSE(reg.evaluate({"has_bracket", {{"object", "bracket"}}, false}, f3));
  EXPECT_TRUE(reg.evaluate({"level_at_least", {{"level", "4"}}, false}, f3));
  EXPECT_FALSE(reg.evaluate({"level_at_least", {{"level", "5"}}, false}, f3));
  EXPECT_TRUE(reg.evaluate({"blocks_exactly", {{"count", "0"}}, false}, f3));
  EXPECT_TRUE(reg.evaluate({"has_label", {{"label", "dogs"}}, false}, f1));
  EXPECT_FALSE(reg.evaluate({"has_label", {{"label", "do"}}, false}, f1));
  EXPECT_FALSE(reg.evaluate({"has_label", {{"label", "cats"}}, false}, f3));
  EXPECT_TRUE(reg.evaluate({"level_between", {{"level", "3"}, {"upper", "4"}}, false}, f3));
  EXPECT_FALSE(reg.evaluate({"level_between", {{"level", "5"}, {"upper", "6"}}, false}, f3));
}

TEST(PredicateRegistry, NegationIsComplementOnEveryDemoState) {
  const auto data = generate_demo();
  for (const auto& s : data.states) {
    for (const auto& a : data.predicates.atoms()) {
      ASSERT_NE(data.predicates.evaluate(a, s), data.predicates.evaluate(a.flipped(), s))
          << a.atom_key() << " on " << s.state_id;
    }
  }
  EXPECT_NO_THROW(validate_dataset(data.states, data.predicates));
}

TEST(PredicateRegistry, MissingFeatureIsReported) {
  PredicateRegistry reg({{"p", "p {x}", "not p {x}", {{"x", {"1"}}}, "equals", "absent"}});
  const auto states = testing::four_states();
  EXPECT_EQ(code_of([&] { validate_dataset(states, reg); }), ErrorCode::missing_feature);
}

TEST(ExemplarState, SortedCursorSelection) {
  StateSet states;
  for (const char* id : {"s1", "s2"}) {
    State s;
    s.state_id = id;
    s.features = {{"f", 1.0}};
    states.insert(s);
  }
  EXPECT_EQ(exemplar_state({"s2", "s1"}, 0, states).state_id, "s1");
  // 3 mod 2 = 1 -> second of the sorted list.
  EXPECT_EQ(exemplar_state({"s2", "s1"}, 3, states).state_id, "s2");
  EXPECT_EQ(code_of([&] { (void)exemplar_state({}, 0, states); }), ErrorCode::empty_candidates);
}

TEST(Demo, GenerationIsDeterministicAndMatchesShippedData) {
  const auto a = generate_demo();
  const auto b = generate_demo();
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.states, load_states(kData / "states.jsonl"));
  EXPECT_EQ(a.actions, load_actions(kData / "actions.jsonl", a.states));
  EXPECT_EQ(a.states.size(), kDemoStates);
  EXPECT_EQ(a.actions.size(), kDemoActions);
}

TEST(Demo, GroundTruthIncludesKnownValidState) {
  const auto d = generate_demo();
  ASSERT_EQ(d.ground_truth.size(), d.actions.size());
  for (std::size_t i = 0; i < d.actions.size(); ++i) {
    EXPECT_EQ(d.ground_truth[i].first, d.actions[i].action_id);
    EXPECT_TRUE(eval_rule(d.ground_truth[i].second, d.states.at(d.actions[i].known_valid_state),
                          d.predicates));
  }
}

TEST(Demo, FixturesAgreeWithGroundTruth) {
  const auto d = generate_demo();
  auto truth = [&](const std::string& state, const std::string& action) {
    for (const auto& [id, rule] : d.ground_truth) {
      if (id == action) return eval_rule(rule, d.states.at(state), d.predicates);
    }
    ADD_FAILURE() << "no truth for " << action;
    return false;
  };
  std::size_t yes = 0;
  for (const auto& t : d.tutorial) {
    EXPECT_EQ(t.answer, truth(t.state_id, t.action_id));
    yes += t.answer;
  }
  EXPECT_EQ(d.tutorial.size(), 12u);
  EXPECT_EQ(yes, 6u);
  EXPECT_EQ(d.negative_gold.size(), 10u);
  for (const auto& p : d.negative_gold) EXPECT_FALSE(truth(p.state_id, p.action_id));
}

}  // namespace
}  // namespace crowdguard
