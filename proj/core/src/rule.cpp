#include "crowdguard/rule.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <map>

namespace crowdguard {

std::string_view to_string(LogicOp op) { return op == LogicOp::And ? "AND" : "OR"; }

NodePtr make_literal(Literal lit) {
  auto n = std::make_shared<RuleNode>();
  n->kind = RuleNode::Kind::Literal;
  n->literal = std::move(lit);
  return n;
}

namespace {

NodePtr make_binary(RuleNode::Kind kind, NodePtr left, NodePtr right) {
  if (!left || !right) throw Error(ErrorCode::parse, "binary node needs two operands");
  auto n = std::make_shared<RuleNode>();
  n->kind = kind;
  n->left = std::move(left);
  n->right = std::move(right);
  return n;
}

void collect_literals(const RuleNode& n, std::vector<Literal>& out) {
  if (n.kind == RuleNode::Kind::Literal) {
    out.push_back(n.literal);
    return;
  }
  collect_literals(*n.left, out);
  collect_literals(*n.right, out);
}

std::size_t node_depth(const RuleNode& n) {
  if (n.kind == RuleNode::Kind::Literal) return 1;
  return 1 + std::max(node_depth(*n.left), node_depth(*n.right));
}

bool nodes_equal(const RuleNode& a, const RuleNode& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == RuleNode::Kind::Literal) return a.literal == b.literal;
  return nodes_equal(*a.left, *b.left) && nodes_equal(*a.right, *b.right);
}

bool eval_node(const RuleNode& n, const State& s, const PredicateRegistry& registry) {
  switch (n.kind) {
    case RuleNode::Kind::Literal:
      return registry.evaluate(n.literal, s);
    case RuleNode::Kind::And:
      return eval_node(*n.left, s, registry) && eval_node(*n.right, s, registry);
    case RuleNode::Kind::Or:
      return eval_node(*n.left, s, registry) || eval_node(*n.right, s, registry);
  }
  return false;
}

using Clauses = std::vector<std::vector<Literal>>;

Clauses dnf_of(const RuleNode& n) {
  switch (n.kind) {
    case RuleNode::Kind::Literal:
      return {{n.literal}};
    case RuleNode::Kind::Or: {
      Clauses out = dnf_of(*n.left);
      Clauses right = dnf_of(*n.right);
      out.insert(out.end(), std::make_move_iterator(right.begin()),
                 std::make_move_iterator(right.end()));
      return out;
    }
    case RuleNode::Kind::And: {
      const Clauses left = dnf_of(*n.left);
      const Clauses right = dnf_of(*n.right);
      Clauses out;
      out.reserve(left.size() * right.size());
      for (const auto& l : left) {
        for (const auto& r : right) {
          auto clause = l;
          clause.insert(clause.end(), r.begin(), r.end());
          out.push_back(std::move(clause));
        }
      }
      return out;
    }
  }
  return {};
}

// Evaluates with atom truth values taken from `assignment` bit positions.
bool eval_assignment(const RuleNode& n, const std::map<std::string, std::size_t>& atom_index,
                     std::uint32_t assignment) {
  switch (n.kind) {
    case RuleNode::Kind::Literal: {
      const bool v = (assignment >> atom_index.at(n.literal.atom_key())) & 1U;
      return v != n.literal.negated;
    }
    case RuleNode::Kind::And:
      return eval_assignment(*n.left, atom_index, assignment) &&
             eval_assignment(*n.right, atom_index, assignment);
    case RuleNode::Kind::Or:
      return eval_assignment(*n.left, atom_index, assignment) ||
             eval_assignment(*n.right, atom_index, assignment);
  }
  return false;
}

}  // namespace

NodePtr make_and(NodePtr left, NodePtr right) {
  return make_binary(RuleNode::Kind::And, std::move(left), std::move(right));
}

NodePtr make_or(NodePtr left, NodePtr right) {
  return make_binary(RuleNode::Kind::Or, std::move(left), std::move(right));
}

RuleExpr RuleExpr::expr(NodePtr root) {
  if (!root) throw Error(ErrorCode::parse, "expression rule needs a root node");
  return RuleExpr(Kind::Expr, std::move(root));
}

std::vector<Literal> RuleExpr::literals() const {
  std::vector<Literal> out;
  if (root_) collect_literals(*root_, out);
  return out;
}

std::size_t RuleExpr::depth() const { return root_ ? node_depth(*root_) : 0; }

bool operator==(const RuleExpr& a, const RuleExpr& b) {
  if (a.kind() != b.kind()) return false;
  if (!a.is_expr()) return true;
  return nodes_equal(*a.root(), *b.root());
}

std::size_t DnfExpr::literal_count() const {
  std::size_t n = 0;
  for (const auto& c : clauses) n += c.size();
  return n;
}

RuleExpr DnfExpr::to_rule() const {
  if (clauses.empty()) throw Error(ErrorCode::parse, "DNF has no clauses");
  NodePtr acc;
  for (const auto& clause : clauses) {
    if (clause.empty()) throw Error(ErrorCode::parse, "DNF clause is empty");
    NodePtr c = make_literal(clause.front());
    for (std::size_t i = 1; i < clause.size(); ++i) c = make_and(c, make_literal(clause[i]));
    acc = acc ? make_or(acc, c) : c;
  }
  return RuleExpr::expr(acc);
}

bool eval_rule(const RuleExpr& rule, const State& state, const PredicateRegistry& registry) {
  switch (rule.kind()) {
    case RuleExpr::Kind::AllStates: return true;
    case RuleExpr::Kind::NoStates: return false;
    case RuleExpr::Kind::Expr: return eval_node(*rule.root(), state, registry);
  }
  return false;
}

Partition partition(const RuleExpr& rule, const StateSet& states,
                    const PredicateRegistry& registry) {
  Partition p;
  for (const auto& s : states) {
    (eval_rule(rule, s, registry) ? p.included : p.excluded).push_back(s.state_id);
  }
  std::sort(p.included.begin(), p.included.end());
  std::sort(p.excluded.begin(), p.excluded.end());
  return p;
}

DnfExpr to_dnf(const RuleExpr& rule) {
  if (!rule.is_expr()) {
    throw Error(ErrorCode::special_rule,
                rule.kind() == RuleExpr::Kind::AllStates ? "ALL has no literal DNF"
                                                         : "NONE has no literal DNF");
  }
  return DnfExpr{dnf_of(*rule.root())};
}

bool equivalent(const RuleExpr& a, const RuleExpr& b) {
  std::map<std::string, std::size_t> atom_index;
  for (const auto* r : {&a, &b}) {
    for (const auto& lit : r->literals()) {
      atom_index.try_emplace(lit.atom_key(), atom_index.size());
    }
  }
  if (atom_index.size() > kMaxEquivalenceAtoms) {
    throw Error(ErrorCode::too_many_literals,
                std::to_string(atom_index.size()) + " distinct atoms exceed the limit of " +
                    std::to_string(kMaxEquivalenceAtoms));
  }
  auto value = [&](const RuleExpr& r, std::uint32_t assignment) {
    switch (r.kind()) {
      case RuleExpr::Kind::AllStates: return true;
      case RuleExpr::Kind::NoStates: return false;
      case RuleExpr::Kind::Expr: return eval_assignment(*r.root(), atom_index, assignment);
    }
    return false;
  };
  const std::uint32_t rows = 1U << atom_index.size();
  for (std::uint32_t assignment = 0; assignment < rows; ++assignment) {
    if (value(a, assignment) != value(b, assignment)) return false;
  }
  return true;
}

std::vector<RuleViolation> validate_rule(const RuleExpr& rule, const PredicateRegistry& registry,
                                         std::size_t max_literals) {
  std::vector<RuleViolation> out;
  if (!rule.is_expr()) return out;
  const auto lits = rule.literals();
  for (const auto& lit : lits) {
    if (auto err = registry.check(lit)) out.push_back({err->code(), err->what()});
  }
  if (lits.size() > max_literals) {
    out.push_back({ErrorCode::length_limit, "rule has " + std::to_string(lits.size()) +
                                                " literals; the limit is " +
                                                std::to_string(max_literals)});
  }
  return out;
}

// --- text form --------------------------------------------------------------

std::string to_text(const Literal& lit) {
  return std::string(lit.negated ? "!" : "") + "lit:" + lit.atom_key();
}

namespace {

void node_text(const RuleNode& n, std::string& out) {
  if (n.kind == RuleNode::Kind::Literal) {
    out += to_text(n.literal);
    return;
  }
  out += "( ";
  node_text(*n.left, out);
  out += n.kind == RuleNode::Kind::And ? " AND " : " OR ";
  node_text(*n.right, out);
  out += " )";
}

bool is_value_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

class RuleParser {
 public:
  explicit RuleParser(std::string_view text) : text_(text) {}

  RuleExpr parse_rule() {
    skip_ws();
    RuleExpr out = RuleExpr::no_states();
    if (consume_word("ALL")) {
      out = RuleExpr::all_states();
    } else if (consume_word("NONE")) {
      out = RuleExpr::no_states();
    } else {
      out = RuleExpr::expr(parse_node());
    }
    skip_ws();
    if (pos_ != text_.size()) fail("trailing input");
    return out;
  }

  Literal parse_literal_only() {
    skip_ws();
    Literal lit = parse_literal();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing input");
    return lit;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::parse, what + " at offset " + std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume_word(std::string_view word) {
    if (text_.substr(pos_, word.size()) != word) return false;
    const std::size_t end = pos_ + word.size();
    if (end < text_.size() && !std::isspace(static_cast<unsigned char>(text_[end])) &&
        text_[end] != ')' && text_[end] != '(') {
      return false;
    }
    pos_ = end;
    return true;
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  NodePtr parse_node() {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      ++pos_;
      NodePtr left = parse_node();
      skip_ws();
      bool is_and = false;
      if (consume_word("AND")) {
        is_and = true;
      } else if (!consume_word("OR")) {
        fail("expected AND or OR");
      }
      NodePtr right = parse_node();
      expect(')');
      return is_and ? make_and(left, right) : make_or(left, right);
    }
    return make_literal(parse_literal());
  }

  std::string parse_ident() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_value_char(text_[pos_])) ++pos_;
    if (pos_ == start) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  Literal parse_literal() {
    Literal lit;
    if (pos_ < text_.size() && text_[pos_] == '!') {
      lit.negated = true;
      ++pos_;
    }
    if (text_.substr(pos_, 4) != "lit:") fail("expected literal");
    pos_ += 4;
    lit.predicate_id = parse_ident();
    if (pos_ >= text_.size() || text_[pos_] != '[') fail("expected '['");
    ++pos_;
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return lit;
    }
    while (true) {
      std::string name = parse_ident();
      if (pos_ >= text_.size() || text_[pos_] != '=') fail("expected '='");
      ++pos_;
      std::string value = parse_ident();
      lit.args.emplace_back(std::move(name), std::move(value));
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (pos_ < text_.size() && text_[pos_] == ']') {
        ++pos_;
        return lit;
      }
      fail("expected ',' or ']'");
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_text(const RuleExpr& rule) {
  switch (rule.kind()) {
    case RuleExpr::Kind::AllStates: return "ALL";
    case RuleExpr::Kind::NoStates: return "NONE";
    case RuleExpr::Kind::Expr: break;
  }
  std::string out;
  node_text(*rule.root(), out);
  return out;
}

std::string to_text(const DnfExpr& dnf) { return to_text(dnf.to_rule()); }

Literal parse_literal(std::string_view text) { return RuleParser(text).parse_literal_only(); }

RuleExpr parse_rule(std::string_view text) { return RuleParser(text).parse_rule(); }

DnfExpr parse_dnf(std::string_view text) { return to_dnf(parse_rule(text)); }

}  // namespace crowdguard
