#include <gtest/gtest.h>

#include <algorithm>

#include "crowdguard/builder.hpp"
#include "crowdguard/demo.hpp"
#include "crowdguard/random.hpp"
#include "test_support.hpp"

namespace crowdguard {
namespace {

using A = BuilderAction;
using testing::lit;

const Literal kWet = lit("road_is", {{"condition", "wet"}});
const Literal kSnowy = lit("road_is", {{"condition", "snowy"}});
const Literal kHydro = lit("car_has_tires", {{"kind", "hydroplaning-resistant"}});
const Literal kStudded = lit("car_has_tires", {{"kind", "studded"}});

BuilderState run(const PredicateRegistry& reg, std::vector<A> actions) {
  return replay(actions, reg);
}

std::string render(const PredicateRegistry& reg, std::vector<A> actions) {
  return render_tokens(run(reg, std::move(actions)), reg);
}

bool has(const std::vector<A>& opts, const A& a) {
  return std::find(opts.begin(), opts.end(), a) != opts.end();
}

TEST(NewBuilder, OffersTheThreeRoots) {
  const auto reg = testing::tires_registry();
  const auto b = new_builder();
  EXPECT_EQ(b.phase(), Phase::Start);
  EXPECT_EQ(options(b, reg), (std::vector<A>{A::choose_root(RootChoice::AllStates),
                                             A::choose_root(RootChoice::NoStates),
                                             A::choose_root(RootChoice::StateIf)}));
  EXPECT_EQ(render_tokens(b, reg), "The action applies to ▾");
}

TEST(NewBuilder, TerminatingRoots) {
  const auto reg = testing::tires_registry();
  const auto all = run(reg, {A::choose_root(RootChoice::AllStates)});
  EXPECT_EQ(all.phase(), Phase::Terminal);
  EXPECT_EQ(finalize(all), RuleExpr::all_states());
  EXPECT_EQ(render_tokens(all, reg), "The action applies to all states");
  const auto none = run(reg, {A::choose_root(RootChoice::NoStates)});
  EXPECT_EQ(finalize(none), RuleExpr::no_states());
  try {
    options(all, reg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::terminal_state);
  }
}

TEST(Options, ArgumentsFirstWithCondensing) {
  const auto reg = demo_registry();
  const auto b = run(reg, {A::choose_root(RootChoice::StateIf)});
  EXPECT_EQ(b.phase(), Phase::ArgSelect);
  const auto opts = options(b, reg);
  // "number" and "block" only appear in larger_value_is: condensed.
  EXPECT_TRUE(has(opts, A::choose_predicate(lit("larger_value_is", {{"object", "number"}}))));
  EXPECT_TRUE(has(opts, A::choose_predicate(lit("larger_value_is", {{"object", "number"}}, true))));
  EXPECT_FALSE(has(opts, A::choose_arg("object", "number")));
  // "bracket" is shared by two predicates: offered as an argument.
  EXPECT_TRUE(has(opts, A::choose_arg("object", "bracket")));
  // Levels feed several predicates.
  EXPECT_TRUE(has(opts, A::choose_arg("level", "3")));
  // Labels only feed has_label.
  EXPECT_TRUE(has(opts, A::choose_predicate(lit("has_label", {{"label", "cats"}}))));
  for (const auto& o : opts) {
    EXPECT_TRUE(o.kind == A::Kind::ChooseArg || o.kind == A::Kind::ChoosePredicate);
  }
}

TEST(Options, PredicatesConsistentWithChosenArgument) {
  const auto reg = demo_registry();
  const auto b = run(reg, {A::choose_root(RootChoice::StateIf), A::choose_arg("level", "3")});
  EXPECT_EQ(b.phase(), Phase::PredSelect);
  const auto opts = options(b, reg);
  EXPECT_TRUE(has(opts, A::choose_predicate(lit("level_is", {{"level", "3"}}))));
  EXPECT_TRUE(has(opts, A::choose_predicate(lit("level_is", {{"level", "3"}}, true))));
  EXPECT_TRUE(has(opts, A::choose_predicate(lit("level_at_least", {{"level", "3"}}, true))));
  EXPECT_FALSE(has(opts, A::choose_predicate(lit("blocks_exactly", {{"count", "3"}}))));
  // level_between still needs its upper bound.
  EXPECT_TRUE(has(opts, A::choose_arg("upper", "5")));
  const auto two = apply(b, A::choose_arg("upper", "5"), reg);
  EXPECT_EQ(options(two, reg),
            (std::vector<A>{
                A::choose_predicate(lit("level_between", {{"level", "3"}, {"upper", "5"}})),
                A::choose_predicate(lit("level_between", {{"level", "3"}, {"upper", "5"}}, true)),
            }));
  EXPECT_EQ(render_tokens(two, reg), "The action applies to a state if 3 5 _");
}

TEST(Options, ChoiceboxesAfterFirstParenthesizedStatement) {
  const auto reg = testing::tires_registry();
  const auto b = run(reg, {A::choose_root(RootChoice::StateIf), A::choose_predicate(kWet),
                           A::choose_logical(LogicOp::Or), A::choose_predicate(kSnowy)});
  EXPECT_EQ(b.phase(), Phase::ChoiceboxPending);
  EXPECT_EQ(options(b, reg),
            (std::vector<A>{A::choose_choicebox(ChoiceboxPos::Inner, LogicOp::And),
                            A::choose_choicebox(ChoiceboxPos::Inner, LogicOp::Or),
                            A::choose_choicebox(ChoiceboxPos::Outer, LogicOp::And),
                            A::choose_choicebox(ChoiceboxPos::Outer, LogicOp::Or), A::finish()}));
}

TEST(Apply, LoneLiteralThenDirectLogical) {
  const auto reg = testing::tires_registry();
  const auto one = run(reg, {A::choose_root(RootChoice::StateIf), A::choose_predicate(kWet)});
  EXPECT_EQ(one.phase(), Phase::LogicalPending);
  EXPECT_EQ(render_tokens(one, reg), "The action applies to a state if the road is wet ▾");
  EXPECT_EQ(render(reg, {A::choose_root(RootChoice::StateIf), A::choose_predicate(kWet),
                         A::choose_logical(LogicOp::Or)}),
            "The action applies to a state if ( the road is wet OR _ )");
  // Choiceboxes are not offered for a lone literal.
  EXPECT_THROW(apply(one, A::choose_choicebox(ChoiceboxPos::Inner, LogicOp::And), reg), Error);
}

TEST(Apply, ChoiceboxPendingRender) {
  const auto reg = testing::tires_registry();
  EXPECT_EQ(render(reg, {A::choose_root(RootChoice::StateIf), A::choose_predicate(kWet),
                         A::choose_logical(LogicOp::Or), A::choose_predicate(kSnowy)}),
            "The action applies to a state if ( the road is wet OR the road is snowy -- ) --");
}

TEST(Apply, InnerChoiceboxWrapsLastLiteral) {
  const auto reg = testing::tires_registry();
  const auto b = run(reg, {A::choose_root(RootChoice::StateIf), A::choose_predicate(kWet),
                           A::choose_logical(LogicOp::Or), A::choose_predicate(kSnowy),
                           A::choose_choicebox(ChoiceboxPos::Inner, LogicOp::And),
                           A::choose_predicate(kStudded)});
  EXPECT_EQ(render_tokens(b, reg),
            "The action applies to a state if ( the road is wet OR ( the road is snowy AND the "
            "car has studded tires -- ) -- )");
  const auto done = apply(b, A::finish(), reg);
  EXPECT_EQ(to_text(finalize(done)),
            "( lit:road_is[condition=wet] OR ( lit:road_is[condition=snowy] AND "
            "lit:car_has_tires[kind=studded] ) )");
}

TEST(Apply, OuterChoiceboxWrapsParenthesizedExpression) {
  const auto reg = testing::tires_registry();
  const auto b = run(reg, {A::choose_root(RootChoice::StateIf), A::choose_predicate(kWet),
                           A::choose_logical(LogicOp::And), A::choose_predicate(kHydro),
                           A::choose_choicebox(ChoiceboxPos::Outer, LogicOp::Or)});
  EXPECT_EQ(render_tokens(b, reg),
            "The action applies to a state if ( ( the road is wet AND the car has "
            "hydroplaning-resistant tires ) OR _ )");
  const auto f = apply(b, A::choose_predicate(kSnowy), reg);
  EXPECT_EQ(to_text(finalize(apply(f, A::finish(), reg))),
            "( ( lit:road_is[condition=wet] AND lit:car_has_tires[kind=hydroplaning-resistant] ) "
            "OR lit:road_is[condition=snowy] )");
}

TEST(Apply, UnofferedActionsRejected) {
  const auto reg = testing::tires_registry();
  const auto start = new_builder();
  EXPECT_THROW(apply(start, A::finish(), reg), Error);
  EXPECT_THROW(apply(start, A::choose_predicate(kWet), reg), Error);
  const auto slot = apply(start, A::choose_root(RootChoice::StateIf), reg);
  // Finish needs every slot filled.
  EXPECT_THROW(apply(slot, A::finish(), reg), Error);
  // Out-of-domain literal.
  EXPECT_THROW(apply(slot, A::choose_predicate(lit("road_is", {{"condition", "icy"}})), reg),
               Error);
  EXPECT_THROW(finalize(slot), Error);
  try {
    finalize(slot);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::incomplete_rule);
  }
}

TEST(Edit, TruncatesEverythingAfterIndex) {
  const auto reg = testing::tires_registry();
  const auto b = run(reg, {A::choose_root(RootChoice::StateIf), A::choose_predicate(kWet),
                           A::choose_logical(LogicOp::And), A::choose_predicate(kHydro),
                           A::choose_choicebox(ChoiceboxPos::Inner, LogicOp::And)});
  ASSERT_EQ(b.placed().size(), 7u);
  ASSERT_EQ(b.placed()[2].kind, Token::Kind::Literal);
  const auto e = apply(b, A::edit(2, A::choose_predicate(kSnowy)), reg);
  ASSERT_EQ(e.placed().size(), 3u);
  EXPECT_EQ(e.placed()[2].literal, kSnowy);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(e.placed()[i], b.placed()[i]);
}

TEST(Edit, LogicalAndRootReplacement) {
  const auto reg = testing::tires_registry();
  const auto b = run(reg, {A::choose_root(RootChoice::StateIf), A::choose_predicate(kWet),
                           A::choose_logical(LogicOp::And), A::choose_predicate(kHydro)});
  const auto e = apply(b, A::edit(3, A::choose_logical(LogicOp::Or)), reg);
  EXPECT_EQ(render_tokens(e, reg), "The action applies to a state if ( the road is wet OR _ )");
  const auto r = apply(b, A::edit(0, A::choose_root(RootChoice::AllStates)), reg);
  EXPECT_EQ(finalize(r), RuleExpr::all_states());
  // Parentheses are not editable; kind mismatches are rejected.
  EXPECT_THROW(apply(b, A::edit(1, A::choose_logical(LogicOp::Or)), reg), Error);
  EXPECT_THROW(apply(b, A::edit(2, A::choose_logical(LogicOp::Or)), reg), Error);
  EXPECT_THROW(apply(b, A::edit(9, A::choose_predicate(kWet)), reg), Error);
}

TEST(Edit, ArgumentReplacementMustBeOffered) {
  const auto reg = demo_registry();
  const auto b = run(reg, {A::choose_root(RootChoice::StateIf), A::choose_arg("level", "3"),
                           A::choose_arg("upper", "5")});
  const auto e = apply(b, A::edit(1, A::choose_arg("level", "2")), reg);
  EXPECT_EQ(e.placed().size(), 2u);
  EXPECT_EQ(e.phase(), Phase::PredSelect);
  EXPECT_THROW(apply(b, A::edit(1, A::choose_arg("level", "99")), reg), Error);
}

TEST(Clear, ReturnsNewBuilder) {
  const auto reg = testing::tires_registry();
  const auto b = run(reg, {A::choose_root(RootChoice::StateIf), A::choose_predicate(kWet)});
  EXPECT_EQ(apply(b, A::clear(), reg), new_builder());
}

TEST(Replay, ReportsFailingIndex) {
  const auto reg = testing::tires_registry();
  const std::vector<A> actions = {A::choose_root(RootChoice::StateIf), A::choose_predicate(kWet),
                                  A::finish(), A::choose_predicate(kSnowy)};
  std::size_t failed = 0;
  EXPECT_THROW(replay(actions, reg, &failed), Error);
  EXPECT_EQ(failed, 3u);
}

TEST(DnfToActions, SingleLiteral) {
  const auto reg = testing::tires_registry();
  const auto actions = dnf_to_actions(DnfExpr{{{kWet}}}, reg);
  EXPECT_EQ(actions, (std::vector<A>{A::choose_root(RootChoice::StateIf),
                                     A::choose_predicate(kWet), A::finish()}));
}

TEST(DnfToActions, OneClauseTwoLiteralsUsesDirectAnd) {
  const auto reg = testing::tires_registry();
  const auto actions = dnf_to_actions(DnfExpr{{{kWet, kHydro}}}, reg);
  EXPECT_EQ(actions, (std::vector<A>{A::choose_root(RootChoice::StateIf),
                                     A::choose_predicate(kWet), A::choose_logical(LogicOp::And),
                                     A::choose_predicate(kHydro), A::finish()}));
  EXPECT_EQ(render_tokens(replay(actions, reg), reg),
            "The action applies to a state if ( the road is wet AND the car has "
            "hydroplaning-resistant tires )");
}

TEST(DnfToActions, TiresGolden) {
  const auto reg = testing::tires_registry();
  const auto actions = dnf_to_actions(testing::tires_dnf(), reg);
  EXPECT_EQ(actions,
            (std::vector<A>{A::choose_root(RootChoice::StateIf), A::choose_predicate(kWet),
                            A::choose_logical(LogicOp::And), A::choose_predicate(kHydro),
                            A::choose_choicebox(ChoiceboxPos::Outer, LogicOp::Or),
                            A::choose_predicate(kSnowy),
                            A::choose_choicebox(ChoiceboxPos::Inner, LogicOp::And),
                            A::choose_predicate(kStudded), A::finish()}));
  const auto b = replay(actions, reg);
  EXPECT_EQ(render_tokens(b, reg),
            "The action applies to a state if ( ( the road is wet AND the car has "
            "hydroplaning-resistant tires ) OR ( the road is snowy AND the car has studded "
            "tires ) )");
  EXPECT_EQ(finalize(b), testing::tires_dnf().to_rule());
}

TEST(DnfToActions, UsesArgumentsWhenNotCondensed) {
  const auto reg = demo_registry();
  const Literal between = lit("level_between", {{"level", "2"}, {"upper", "4"}});
  const auto actions = dnf_to_actions(DnfExpr{{{between}}}, reg);
  EXPECT_EQ(actions, (std::vector<A>{A::choose_root(RootChoice::StateIf),
                                     A::choose_arg("level", "2"), A::choose_arg("upper", "4"),
                                     A::choose_predicate(between), A::finish()}));
}

TEST(DnfToActions, LengthLimit) {
  const auto reg = testing::tires_registry();
  DnfExpr d;
  d.clauses.push_back(std::vector<Literal>(17, kWet));
  try {
    dnf_to_actions(d, reg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::length_limit);
  }
}

TEST(DnfToActions, RandomDnfsReplayLegallyAndKeepInvariant) {
  const auto reg = demo_registry();
  const auto atoms = reg.atoms();
  Rng rng(17);
  for (int i = 0; i < 100; ++i) {
    const DnfExpr dnf = testing::random_dnf(rng, atoms, 4, 3, 8);
    std::vector<std::size_t> clause_of;
    for (std::size_t c = 0; c < dnf.clauses.size(); ++c) {
      for (std::size_t k = 0; k < dnf.clauses[c].size(); ++k) clause_of.push_back(c);
    }
    const auto actions = dnf_to_actions(dnf, reg);
    BuilderState b = new_builder();
    for (const auto& a : actions) {
      ASSERT_TRUE(has(options(b, reg), a)) << describe(a);
      b = apply(b, a, reg);
      if (!b.placed().empty() && b.placed().back().kind == Token::Kind::Literal) {
        ASSERT_EQ(testing::clause_invariant_violation(b, clause_of), "") << to_text(dnf);
      }
    }
    const RuleExpr rule = finalize(b);
    EXPECT_TRUE(equivalent(rule, dnf.to_rule())) << to_text(dnf);
    EXPECT_TRUE(validate_rule(rule, reg).empty());
  }
}

TEST(DnfToActions, InvariantCheckerFlagsWrongChoicebox) {
  // (wet AND hydro) OR (snowy AND studded), but the last AND goes to the
  // outer choicebox, which swallows the first clause.
  const auto reg = testing::tires_registry();
  const std::vector<std::size_t> clause_of = {0, 0, 1, 1};
  const std::vector<A> actions = {
      A::choose_root(RootChoice::StateIf), A::choose_predicate(kWet), A::choose_logical(LogicOp::And),
      A::choose_predicate(kHydro),         A::choose_choicebox(ChoiceboxPos::Outer, LogicOp::Or),
      A::choose_predicate(kSnowy),         A::choose_choicebox(ChoiceboxPos::Outer, LogicOp::And),
      A::choose_predicate(kStudded)};
  BuilderState b = new_builder();
  std::string violation;
  for (const auto& a : actions) {
    b = apply(b, a, reg);
    const std::string v = testing::clause_invariant_violation(b, clause_of);
    if (!v.empty() && violation.empty()) violation = v;
  }
  EXPECT_EQ(violation, "no parenthesis belongs to a multi-literal clause");
  EXPECT_FALSE(equivalent(finalize(apply(b, A::finish(), reg)), testing::tires_dnf().to_rule()));
}

TEST(Legality, EveryOfferedActionApplies) {
  const auto reg = demo_registry();
  Rng rng(23);
  for (int walk = 0; walk < 30; ++walk) {
    BuilderState b = new_builder();
    for (int step = 0; step < 40 && b.phase() != Phase::Terminal; ++step) {
      const auto opts = options(b, reg);
      ASSERT_FALSE(opts.empty());
      for (const auto& o : opts) ASSERT_NO_THROW(apply(b, o, reg)) << describe(o);
      // Prefer continuing over finishing so walks get long.
      A next = rng.pick(opts);
      if (next.kind == A::Kind::Finish && opts.size() > 1 && rng.bernoulli(0.8)) {
        next = opts[rng.index(opts.size() - 1)];
      }
      b = apply(b, next, reg);
    }
    if (b.phase() != Phase::Terminal && b.phase() != Phase::ArgSelect &&
        b.phase() != Phase::PredSelect) {
      b = apply(b, A::finish(), reg);
    }
    if (b.phase() == Phase::Terminal) {
      EXPECT_TRUE(validate_rule(finalize(b), reg).empty());
    }
  }
}

TEST(Legality, UnofferedActionsRejected) {
  const auto reg = demo_registry();
  const std::vector<A> probes = {
      A::choose_root(RootChoice::StateIf),
      A::choose_arg("level", "3"),
      A::choose_arg("object", "bracket"),
      A::choose_predicate(lit("level_is", {{"level", "3"}})),
      A::choose_predicate(lit("has_label", {{"label", "cats"}})),
      A::choose_logical(LogicOp::And),
      A::choose_choicebox(ChoiceboxPos::Outer, LogicOp::Or),
      A::finish(),
  };
  Rng rng(29);
  for (int walk = 0; walk < 20; ++walk) {
    BuilderState b = new_builder();
    for (int step = 0; step < 12 && b.phase() != Phase::Terminal; ++step) {
      const auto opts = options(b, reg);
      for (const auto& p : probes) {
        if (!has(opts, p)) EXPECT_THROW(apply(b, p, reg), Error) << describe(p);
      }
      A next = rng.pick(opts);
      if (next.kind == A::Kind::Finish) break;
      b = apply(b, next, reg);
    }
  }
}

TEST(LiteralLimit, LogicalsStopAtSixteen) {
  const auto reg = testing::tires_registry();
  DnfExpr d;
  d.clauses.push_back(std::vector<Literal>(16, kWet));
  const auto actions = dnf_to_actions(d, reg);
  BuilderState b = replay(std::span<const A>(actions.data(), actions.size() - 1), reg);
  EXPECT_EQ(b.literal_count(), 16u);
  EXPECT_EQ(options(b, reg), (std::vector<A>{A::finish()}));
}

}  // namespace
}  // namespace crowdguard
