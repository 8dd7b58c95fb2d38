#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "crowdguard/demo.hpp"
#include "crowdguard/random.hpp"
#include "crowdguard/rule.hpp"
#include "test_support.hpp"

namespace crowdguard {
namespace {

using testing::lit;

const Literal kBracket = lit("has_bracket", {{"object", "bracket"}});
const Literal kLevel3 = lit("level_at_least", {{"level", "3"}});

TEST(EvalRule, Constants) {
  const auto reg = demo_registry();
  for (const auto& s : testing::four_states()) {
    EXPECT_TRUE(eval_rule(RuleExpr::all_states(), s, reg));
    EXPECT_FALSE(eval_rule(RuleExpr::no_states(), s, reg));
  }
}

TEST(EvalRule, NegatedLiteralWherePredicateHolds) {
  const auto reg = demo_registry();
  const StateSet states = testing::four_states();
  const State& f1 = states.at("f1");
  EXPECT_TRUE(eval_rule(RuleExpr::expr(make_literal(kBracket)), f1, reg));
  EXPECT_FALSE(eval_rule(RuleExpr::expr(make_literal(kBracket.flipped())), f1, reg));
}

TEST(EvalRule, ConjunctionTruthVectorOnFixture) {
  const auto reg = demo_registry();
  const auto rule = RuleExpr::expr(make_and(make_literal(kBracket), make_literal(kLevel3)));
  // f1: bracket, level 1; f2: bracket, level 3; f3: no bracket; f4: bracket, level 6.
  const std::vector<bool> expected = {false, true, false, true};
  std::vector<bool> got;
  for (const auto& s : testing::four_states()) got.push_back(eval_rule(rule, s, reg));
  EXPECT_EQ(got, expected);
}

TEST(EvalRule, UnknownPredicateThrows) {
  const auto reg = demo_registry();
  const StateSet states = testing::four_states();
  const State& f1 = states.at("f1");
  EXPECT_THROW(eval_rule(RuleExpr::expr(make_literal(lit("ghost", {}))), f1, reg), Error);
}

TEST(Partition, ConstantsOverDemoStates) {
  const auto d = generate_demo();
  const auto all = partition(RuleExpr::all_states(), d.states, d.predicates);
  EXPECT_EQ(all.included.size(), 540u);
  EXPECT_TRUE(all.excluded.empty());
  const auto none = partition(RuleExpr::no_states(), d.states, d.predicates);
  EXPECT_TRUE(none.included.empty());
  EXPECT_EQ(none.excluded.size(), 540u);
}

TEST(Partition, SingleLiteralMatchesBruteForce) {
  const auto reg = demo_registry();
  const auto states = testing::four_states();
  const Literal larger = lit("larger_value_is", {{"object", "bracket"}});
  const auto p = partition(RuleExpr::expr(make_literal(larger)), states, reg);
  EXPECT_EQ(p.included, (std::vector<std::string>{"f1", "f4"}));
  EXPECT_EQ(p.excluded, (std::vector<std::string>{"f2", "f3"}));
}

TEST(Partition, TotalDisjointSortedForRandomRules) {
  const auto d = generate_demo();
  const auto atoms = d.predicates.atoms();
  Rng rng(11);
  std::vector<std::string> ids;
  for (const auto& s : d.states) ids.push_back(s.state_id);
  std::sort(ids.begin(), ids.end());
  for (int i = 0; i < 25; ++i) {
    const auto rule = testing::random_rule(rng, atoms, 6, 6);
    const auto p = partition(rule, d.states, d.predicates);
    EXPECT_TRUE(std::is_sorted(p.included.begin(), p.included.end()));
    EXPECT_TRUE(std::is_sorted(p.excluded.begin(), p.excluded.end()));
    std::vector<std::string> merged;
    std::merge(p.included.begin(), p.included.end(), p.excluded.begin(), p.excluded.end(),
               std::back_inserter(merged));
    EXPECT_EQ(merged, ids);
  }
}

TEST(ToDnf, SingleLiteral) {
  const auto dnf = to_dnf(RuleExpr::expr(make_literal(kBracket)));
  EXPECT_EQ(dnf, (DnfExpr{{{kBracket}}}));
}

TEST(ToDnf, OneDistributionStep) {
  const Literal a = lit("level_is", {{"level", "1"}});
  const Literal b = lit("level_is", {{"level", "2"}});
  const Literal c = kBracket;
  const auto rule =
      RuleExpr::expr(make_and(make_or(make_literal(a), make_literal(b)), make_literal(c)));
  EXPECT_EQ(to_dnf(rule), (DnfExpr{{{a, c}, {b, c}}}));
}

TEST(ToDnf, TiresRuleIsAlreadyDnf) {
  const auto dnf = testing::tires_dnf();
  EXPECT_EQ(to_dnf(dnf.to_rule()), dnf);
  EXPECT_EQ(dnf.clauses.size(), 2u);
}

TEST(ToDnf, ConstantsSignalSpecialCase) {
  try {
    to_dnf(RuleExpr::all_states());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::special_rule);
  }
}

TEST(ToDnf, PreservesSemanticsOnRandomRules) {
  const auto atoms = demo_registry().atoms();
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto rule = testing::random_rule(rng, atoms, 8, 8);
    EXPECT_TRUE(equivalent(rule, to_dnf(rule).to_rule())) << to_text(rule);
  }
}

TEST(Equivalent, BasicLaws) {
  const Literal a = lit("level_is", {{"level", "1"}});
  const Literal b = lit("level_is", {{"level", "2"}});
  const Literal c = lit("level_is", {{"level", "3"}});
  auto L = [](const Literal& l) { return make_literal(l); };
  EXPECT_TRUE(equivalent(RuleExpr::expr(L(a)), RuleExpr::expr(L(a))));
  EXPECT_TRUE(equivalent(RuleExpr::expr(make_and(L(a), L(b))), RuleExpr::expr(make_and(L(b), L(a)))));
  EXPECT_TRUE(equivalent(RuleExpr::expr(make_or(L(a), make_and(L(b), L(c)))),
                         RuleExpr::expr(make_and(make_or(L(a), L(b)), make_or(L(a), L(c))))));
  EXPECT_FALSE(equivalent(RuleExpr::expr(L(a)), RuleExpr::expr(L(a.flipped()))));
  EXPECT_FALSE(equivalent(RuleExpr::expr(make_and(L(a), L(b))), RuleExpr::expr(make_or(L(a), L(b)))));
  // Atoms are free booleans: a OR NOT a is a tautology.
  EXPECT_TRUE(equivalent(RuleExpr::expr(make_or(L(a), L(a.flipped()))), RuleExpr::all_states()));
  EXPECT_TRUE(equivalent(RuleExpr::expr(make_and(L(a), L(a.flipped()))), RuleExpr::no_states()));
}

TEST(Equivalent, TooManyAtoms) {
  NodePtr n = make_literal(lit("x0", {}));
  for (int i = 1; i < 17; ++i) n = make_or(n, make_literal(lit("x" + std::to_string(i), {})));
  try {
    equivalent(RuleExpr::expr(n), RuleExpr::expr(n));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::too_many_literals);
  }
}

TEST(Equivalent, AgreesWithStateEvaluationWhenDistinct) {
  // Sanity link between the free-boolean view and real states: equivalent
  // rules must partition the demo set identically.
  const auto d = generate_demo();
  const auto atoms = d.predicates.atoms();
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto rule = testing::random_rule(rng, atoms, 6, 5);
    const auto dnf_rule = to_dnf(rule).to_rule();
    const auto p1 = partition(rule, d.states, d.predicates);
    const auto p2 = partition(dnf_rule, d.states, d.predicates);
    EXPECT_EQ(p1.included, p2.included);
  }
}

TEST(ValidateRule, Cases) {
  const auto reg = demo_registry();
  EXPECT_TRUE(validate_rule(RuleExpr::all_states(), reg).empty());
  const auto bad = RuleExpr::expr(make_literal(lit("level_is", {{"level", "7"}})));
  const auto v = validate_rule(bad, reg);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].code, ErrorCode::domain_violation);

  NodePtr n = make_literal(kBracket);
  for (int i = 1; i < 17; ++i) n = make_and(n, make_literal(kLevel3));
  const auto long_rule = RuleExpr::expr(n);
  EXPECT_EQ(long_rule.literals().size(), 17u);
  const auto lv = validate_rule(long_rule, reg);
  ASSERT_FALSE(lv.empty());
  EXPECT_EQ(lv.back().code, ErrorCode::length_limit);
  EXPECT_TRUE(validate_rule(long_rule, reg, 17).empty());
}

TEST(RuleText, CanonicalForms) {
  EXPECT_EQ(to_text(RuleExpr::all_states()), "ALL");
  EXPECT_EQ(to_text(RuleExpr::no_states()), "NONE");
  EXPECT_EQ(to_text(kBracket.flipped()), "!lit:has_bracket[object=bracket]");
  const auto rule = RuleExpr::expr(make_or(make_literal(kBracket), make_and(make_literal(kLevel3),
      make_literal(lit("level_between", {{"level", "1"}, {"upper", "4"}})))));
  EXPECT_EQ(to_text(rule),
            "( lit:has_bracket[object=bracket] OR ( lit:level_at_least[level=3] AND "
            "lit:level_between[level=1,upper=4] ) )");
  EXPECT_EQ(parse_rule(to_text(rule)), rule);
  EXPECT_EQ(parse_rule("ALL"), RuleExpr::all_states());
}

TEST(RuleText, ParseErrors) {
  for (const char* bad : {"", "(", "( lit:a[x=1] AND )", "lit:a[x=1] AND lit:b[y=2]",
                          "( lit:a[x=1] XOR lit:b[y=2] )", "lit:a[x=]", "lit:[x=1]",
                          "( lit:a[x=1] AND lit:b[y=2] ) extra"}) {
    EXPECT_THROW(parse_rule(bad), Error) << bad;
  }
}

TEST(RuleText, RoundTripRandomRules) {
  const auto atoms = demo_registry().atoms();
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const auto rule = testing::random_rule(rng, atoms, 10, 10);
    EXPECT_EQ(parse_rule(to_text(rule)), rule);
  }
}

TEST(Monotonicity, OrNeverShrinksAndNeverGrows) {
  const auto d = generate_demo();
  const auto atoms = d.predicates.atoms();
  Rng rng(21);
  for (int i = 0; i < 30; ++i) {
    const auto base = testing::random_rule(rng, atoms, 4, 6);
    const auto extra = make_literal(rng.pick(atoms));
    const auto inc = partition(base, d.states, d.predicates).included;
    const auto wider =
        partition(RuleExpr::expr(make_or(base.root(), extra)), d.states, d.predicates).included;
    const auto narrower =
        partition(RuleExpr::expr(make_and(base.root(), extra)), d.states, d.predicates).included;
    EXPECT_TRUE(std::includes(wider.begin(), wider.end(), inc.begin(), inc.end()));
    EXPECT_TRUE(std::includes(inc.begin(), inc.end(), narrower.begin(), narrower.end()));
  }
}

}  // namespace
}  // namespace crowdguard
