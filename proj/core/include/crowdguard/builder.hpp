#pragma once

// Guided rule construction.
//
// A rule is built one dropdown at a time: first the root choice ("all
// states", "no states", "a state if"), then literals picked argument-first,
// joined by logicals. The first logical after a lone literal wraps the
// expression in parentheses directly. Every later logical is chosen through
// one of two choiceboxes placed around the innermost right parenthesis that
// follows the last literal:
//
//   ... OR D -- ) --
//
// The inner box opens a parenthesis just before D; the outer box opens one
// just before the parenthesized expression that `)` closes. Either way the
// new logical is followed by an empty slot and its own `)`.
//
// BuilderState is a value; apply() returns a new state.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "crowdguard/model.hpp"
#include "crowdguard/rule.hpp"

namespace crowdguard {

enum class RootChoice { AllStates, NoStates, StateIf };
enum class ChoiceboxPos { Inner, Outer };

enum class Phase {
  Start,             // root dropdown open
  ArgSelect,         // empty literal slot: pick an argument (or a condensed literal)
  PredSelect,        // arguments picked: pick a predicate or another argument
  LogicalPending,    // lone literal: AND / OR added directly, or Finish
  ChoiceboxPending,  // inner/outer choiceboxes shown, or Finish
  Terminal,
};

std::string_view to_string(RootChoice c);
std::string_view to_string(ChoiceboxPos p);
std::string_view to_string(Phase p);

struct Token {
  enum class Kind { Root, LParen, RParen, Arg, Literal, Logical, Choicebox, Slot };
  // What an open slot expects.
  enum class Expect { Root, Literal, Logical };

  Kind kind = Kind::Slot;
  RootChoice root = RootChoice::StateIf;
  LogicOp op = LogicOp::And;
  ChoiceboxPos position = ChoiceboxPos::Inner;
  Expect expect = Expect::Literal;
  std::string slot;
  std::string value;
  crowdguard::Literal literal;

  static Token make_root(RootChoice c);
  static Token lparen();
  static Token rparen();
  static Token arg(std::string slot, std::string value);
  static Token make_literal(crowdguard::Literal lit);
  static Token logical(LogicOp op);
  static Token choicebox(ChoiceboxPos pos);
  static Token open_slot(Expect expect);

  friend bool operator==(const Token&, const Token&) = default;
};

struct BuilderAction {
  enum class Kind {
    ChooseRoot,
    ChooseArg,
    ChoosePredicate,  // carries the complete literal, arguments included
    ChooseLogical,    // only for the lone-literal case
    ChooseChoicebox,
    Finish,
    Clear,
    Edit,
  };

  Kind kind = Kind::Finish;
  RootChoice root = RootChoice::StateIf;
  std::string slot;
  std::string value;
  Literal literal;
  LogicOp op = LogicOp::And;
  ChoiceboxPos position = ChoiceboxPos::Inner;
  std::size_t index = 0;
  std::shared_ptr<const BuilderAction> replacement;

  static BuilderAction choose_root(RootChoice c);
  static BuilderAction choose_arg(std::string slot, std::string value);
  static BuilderAction choose_predicate(Literal lit);
  static BuilderAction choose_logical(LogicOp op);
  static BuilderAction choose_choicebox(ChoiceboxPos pos, LogicOp op);
  static BuilderAction finish();
  static BuilderAction clear();
  static BuilderAction edit(std::size_t index, BuilderAction replacement);

  friend bool operator==(const BuilderAction& a, const BuilderAction& b);
};

std::string describe(const BuilderAction& a);

class BuilderState {
 public:
  BuilderState() = default;

  Phase phase() const;
  // Tokens chosen so far. Indices here are what Edit refers to.
  const std::vector<Token>& placed() const { return placed_; }
  // Display sequence: placed tokens followed by the open slot or
  // choiceboxes and the pending right parentheses.
  std::vector<Token> tokens() const;

  // Left parentheses whose right parenthesis has not been placed yet.
  std::size_t open_parens() const;
  std::size_t literal_count() const;
  bool finished() const { return finished_; }

  friend bool operator==(const BuilderState&, const BuilderState&) = default;

 private:
  friend BuilderState apply(const BuilderState&, const BuilderAction&, const PredicateRegistry&);

  std::vector<Token> placed_;
  bool finished_ = false;
};

BuilderState new_builder();

// Forward actions legal in `b`. Clear and Edit are always available and are
// not listed. Throws Error(terminal_state) on a finished builder.
std::vector<BuilderAction> options(const BuilderState& b, const PredicateRegistry& registry);

// Throws Error(illegal_action) for anything options() does not offer, and
// for Edit of a non-editable token.
BuilderState apply(const BuilderState& b, const BuilderAction& a,
                   const PredicateRegistry& registry);

// Applies the actions in order from new_builder(). On failure the thrown
// Error message names the offending index, also written to `failed_index`.
BuilderState replay(std::span<const BuilderAction> actions, const PredicateRegistry& registry,
                    std::size_t* failed_index = nullptr);

// Throws Error(incomplete_rule) unless the builder is Terminal.
RuleExpr finalize(const BuilderState& b);

// Action sequence that builds `dnf`: the first literal directly, the first
// logical directly, then the inner box with AND for the second literal of a
// clause, the outer box with AND for later literals of that clause and the
// outer box with OR to start a new clause. Ends with Finish.
std::vector<BuilderAction> dnf_to_actions(const DnfExpr& dnf, const PredicateRegistry& registry);

// One line of display text: `--` for choiceboxes, `_` for an empty literal
// slot, `▾` for the root or logical dropdowns.
std::string render_tokens(const BuilderState& b, const PredicateRegistry& registry);
// Display text of a single token.
std::string token_text(const Token& t, const PredicateRegistry& registry);

}  // namespace crowdguard
