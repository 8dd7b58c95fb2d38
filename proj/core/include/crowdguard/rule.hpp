#pragma once

// Boolean constraint rules over registry literals.
//
// A rule is either one of the two constants (all states / no states) or a
// binary AND/OR tree whose leaves are literals. Negation only exists on
// literals.

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "crowdguard/error.hpp"
#include "crowdguard/model.hpp"

namespace crowdguard {

// Maximum number of literal occurrences in a rule.
inline constexpr std::size_t kMaxRuleLiterals = 16;
// Maximum number of distinct atoms `equivalent` will enumerate.
inline constexpr std::size_t kMaxEquivalenceAtoms = 16;

enum class LogicOp { And, Or };
std::string_view to_string(LogicOp op);

struct RuleNode;
using NodePtr = std::shared_ptr<const RuleNode>;

struct RuleNode {
  enum class Kind { Literal, And, Or };
  Kind kind = Kind::Literal;
  Literal literal;
  NodePtr left;
  NodePtr right;
};

NodePtr make_literal(Literal lit);
NodePtr make_and(NodePtr left, NodePtr right);
NodePtr make_or(NodePtr left, NodePtr right);

class RuleExpr {
 public:
  enum class Kind { AllStates, NoStates, Expr };

  static RuleExpr all_states() { return RuleExpr(Kind::AllStates, nullptr); }
  static RuleExpr no_states() { return RuleExpr(Kind::NoStates, nullptr); }
  static RuleExpr expr(NodePtr root);

  Kind kind() const { return kind_; }
  bool is_expr() const { return kind_ == Kind::Expr; }
  // Null unless kind() == Expr.
  const NodePtr& root() const { return root_; }

  // Literal occurrences, left to right.
  std::vector<Literal> literals() const;
  std::size_t depth() const;

 private:
  RuleExpr(Kind kind, NodePtr root) : kind_(kind), root_(std::move(root)) {}

  Kind kind_;
  NodePtr root_;
};

// Structural equality.
bool operator==(const RuleExpr& a, const RuleExpr& b);

// Disjunction of conjunctions. Both levels are non-empty.
struct DnfExpr {
  std::vector<std::vector<Literal>> clauses;

  std::size_t literal_count() const;
  // OR of clauses, each clause a left-nested AND chain; both levels left-nested.
  RuleExpr to_rule() const;
  friend bool operator==(const DnfExpr&, const DnfExpr&) = default;
};

struct Partition {
  std::vector<std::string> included;
  std::vector<std::string> excluded;
};

bool eval_rule(const RuleExpr& rule, const State& state, const PredicateRegistry& registry);

// included/excluded both sorted by state_id.
Partition partition(const RuleExpr& rule, const StateSet& states,
                    const PredicateRegistry& registry);

// Distributes AND over OR. Throws Error(special_rule) for the two constants.
DnfExpr to_dnf(const RuleExpr& rule);

// Truth-table comparison treating each distinct atom as a free boolean.
// Throws Error(too_many_literals) past kMaxEquivalenceAtoms atoms.
bool equivalent(const RuleExpr& a, const RuleExpr& b);

struct RuleViolation {
  ErrorCode code;
  std::string message;
};

// Empty when the rule is valid against the registry.
std::vector<RuleViolation> validate_rule(const RuleExpr& rule, const PredicateRegistry& registry,
                                         std::size_t max_literals = kMaxRuleLiterals);

// Canonical text form; see docs/formats.md.
std::string to_text(const Literal& lit);
std::string to_text(const RuleExpr& rule);
std::string to_text(const DnfExpr& dnf);
Literal parse_literal(std::string_view text);
RuleExpr parse_rule(std::string_view text);
// Accepts any rule text and converts it with to_dnf.
DnfExpr parse_dnf(std::string_view text);

}  // namespace crowdguard
