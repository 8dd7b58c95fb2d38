#include "crowdguard/builder.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace crowdguard {

std::string_view to_string(RootChoice c) {
  switch (c) {
    case RootChoice::AllStates: return "all";
    case RootChoice::NoStates: return "none";
    case RootChoice::StateIf: return "state_if";
  }
  return "?";
}

std::string_view to_string(ChoiceboxPos p) { return p == ChoiceboxPos::Inner ? "inner" : "outer"; }

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Start: return "start";
    case Phase::ArgSelect: return "arg_select";
    case Phase::PredSelect: return "pred_select";
    case Phase::LogicalPending: return "logical_pending";
    case Phase::ChoiceboxPending: return "choicebox_pending";
    case Phase::Terminal: return "terminal";
  }
  return "?";
}

// --- tokens and actions -----------------------------------------------------

Token Token::make_root(RootChoice c) {
  Token t;
  t.kind = Kind::Root;
  t.root = c;
  return t;
}

Token Token::lparen() {
  Token t;
  t.kind = Kind::LParen;
  return t;
}

Token Token::rparen() {
  Token t;
  t.kind = Kind::RParen;
  return t;
}

Token Token::arg(std::string slot, std::string value) {
  Token t;
  t.kind = Kind::Arg;
  t.slot = std::move(slot);
  t.value = std::move(value);
  return t;
}

Token Token::make_literal(crowdguard::Literal lit) {
  Token t;
  t.kind = Kind::Literal;
  t.literal = std::move(lit);
  return t;
}

Token Token::logical(LogicOp op) {
  Token t;
  t.kind = Kind::Logical;
  t.op = op;
  return t;
}

Token Token::choicebox(ChoiceboxPos pos) {
  Token t;
  t.kind = Kind::Choicebox;
  t.position = pos;
  return t;
}

Token Token::open_slot(Expect expect) {
  Token t;
  t.kind = Kind::Slot;
  t.expect = expect;
  return t;
}

BuilderAction BuilderAction::choose_root(RootChoice c) {
  BuilderAction a;
  a.kind = Kind::ChooseRoot;
  a.root = c;
  return a;
}

BuilderAction BuilderAction::choose_arg(std::string slot, std::string value) {
  BuilderAction a;
  a.kind = Kind::ChooseArg;
  a.slot = std::move(slot);
  a.value = std::move(value);
  return a;
}

BuilderAction BuilderAction::choose_predicate(Literal lit) {
  BuilderAction a;
  a.kind = Kind::ChoosePredicate;
  a.literal = std::move(lit);
  return a;
}

BuilderAction BuilderAction::choose_logical(LogicOp op) {
  BuilderAction a;
  a.kind = Kind::ChooseLogical;
  a.op = op;
  return a;
}

BuilderAction BuilderAction::choose_choicebox(ChoiceboxPos pos, LogicOp op) {
  BuilderAction a;
  a.kind = Kind::ChooseChoicebox;
  a.position = pos;
  a.op = op;
  return a;
}

BuilderAction BuilderAction::finish() {
  BuilderAction a;
  a.kind = Kind::Finish;
  return a;
}

BuilderAction BuilderAction::clear() {
  BuilderAction a;
  a.kind = Kind::Clear;
  return a;
}

BuilderAction BuilderAction::edit(std::size_t index, BuilderAction replacement) {
  BuilderAction a;
  a.kind = Kind::Edit;
  a.index = index;
  a.replacement = std::make_shared<const BuilderAction>(std::move(replacement));
  return a;
}

bool operator==(const BuilderAction& a, const BuilderAction& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case BuilderAction::Kind::ChooseRoot: return a.root == b.root;
    case BuilderAction::Kind::ChooseArg: return a.slot == b.slot && a.value == b.value;
    case BuilderAction::Kind::ChoosePredicate: return a.literal == b.literal;
    case BuilderAction::Kind::ChooseLogical: return a.op == b.op;
    case BuilderAction::Kind::ChooseChoicebox: return a.position == b.position && a.op == b.op;
    case BuilderAction::Kind::Finish:
    case BuilderAction::Kind::Clear: return true;
    case BuilderAction::Kind::Edit:
      if (a.index != b.index) return false;
      if (!a.replacement || !b.replacement) return a.replacement == b.replacement;
      return *a.replacement == *b.replacement;
  }
  return false;
}

std::string describe(const BuilderAction& a) {
  switch (a.kind) {
    case BuilderAction::Kind::ChooseRoot: return "choose_root(" + std::string(to_string(a.root)) + ")";
    case BuilderAction::Kind::ChooseArg: return "choose_arg(" + a.slot + "=" + a.value + ")";
    case BuilderAction::Kind::ChoosePredicate: return "choose_predicate(" + to_text(a.literal) + ")";
    case BuilderAction::Kind::ChooseLogical: return "choose_logical(" + std::string(to_string(a.op)) + ")";
    case BuilderAction::Kind::ChooseChoicebox:
      return "choose_choicebox(" + std::string(to_string(a.position)) + "," +
             std::string(to_string(a.op)) + ")";
    case BuilderAction::Kind::Finish: return "finish";
    case BuilderAction::Kind::Clear: return "clear";
    case BuilderAction::Kind::Edit:
      return "edit(" + std::to_string(a.index) + "," +
             (a.replacement ? describe(*a.replacement) : std::string("?")) + ")";
  }
  return "?";
}

// --- state ------------------------------------------------------------------

Phase BuilderState::phase() const {
  if (placed_.empty()) return Phase::Start;
  if (placed_.front().root != RootChoice::StateIf || finished_) return Phase::Terminal;
  switch (placed_.back().kind) {
    case Token::Kind::Root:
    case Token::Kind::LParen:
    case Token::Kind::Logical:
      return Phase::ArgSelect;
    case Token::Kind::Arg:
      return Phase::PredSelect;
    case Token::Kind::Literal:
      return open_parens() == 0 ? Phase::LogicalPending : Phase::ChoiceboxPending;
    default:
      break;
  }
  throw std::logic_error("builder state ends in an unexpected token");
}

std::size_t BuilderState::open_parens() const {
  std::size_t open = 0;
  for (const auto& t : placed_) {
    if (t.kind == Token::Kind::LParen) ++open;
    if (t.kind == Token::Kind::RParen) --open;
  }
  return open;
}

std::size_t BuilderState::literal_count() const {
  return static_cast<std::size_t>(std::count_if(
      placed_.begin(), placed_.end(), [](const Token& t) { return t.kind == Token::Kind::Literal; }));
}

std::vector<Token> BuilderState::tokens() const {
  std::vector<Token> out = placed_;
  const Phase ph = phase();
  std::size_t closers = open_parens();
  switch (ph) {
    case Phase::Start:
      out.push_back(Token::open_slot(Token::Expect::Root));
      break;
    case Phase::ArgSelect:
    case Phase::PredSelect:
      out.push_back(Token::open_slot(Token::Expect::Literal));
      break;
    case Phase::LogicalPending:
      out.push_back(Token::open_slot(Token::Expect::Logical));
      break;
    case Phase::ChoiceboxPending:
      out.push_back(Token::choicebox(ChoiceboxPos::Inner));
      out.push_back(Token::rparen());
      out.push_back(Token::choicebox(ChoiceboxPos::Outer));
      --closers;
      break;
    case Phase::Terminal:
      break;
  }
  for (std::size_t i = 0; i < closers; ++i) out.push_back(Token::rparen());
  return out;
}

BuilderState new_builder() { return BuilderState{}; }

// --- options ----------------------------------------------------------------

namespace {

// Trailing argument tokens of the slot being filled.
std::vector<std::pair<std::string, std::string>> pending_args(const std::vector<Token>& placed) {
  std::vector<std::pair<std::string, std::string>> out;
  auto it = placed.rbegin();
  while (it != placed.rend() && it->kind == Token::Kind::Arg) ++it;
  for (auto fwd = it.base(); fwd != placed.end(); ++fwd) out.emplace_back(fwd->slot, fwd->value);
  return out;
}

bool in_domain(const ArgSlot& slot, const std::string& value) {
  return std::find(slot.domain.begin(), slot.domain.end(), value) != slot.domain.end();
}

bool consistent(const PredicateSpec& p,
                const std::vector<std::pair<std::string, std::string>>& bound) {
  for (const auto& [name, value] : bound) {
    const ArgSlot* s = p.slot(name);
    if (s == nullptr || !in_domain(*s, value)) return false;
  }
  return true;
}

Literal literal_from(const PredicateSpec& p,
                     const std::vector<std::pair<std::string, std::string>>& bound, bool negated) {
  Literal lit{p.predicate_id, {}, negated};
  for (const auto& slot : p.arg_slots) {
    for (const auto& [name, value] : bound) {
      if (name == slot.name) lit.args.emplace_back(name, value);
    }
  }
  return lit;
}

void arg_select_options(const PredicateRegistry& registry, std::vector<BuilderAction>& out) {
  // (slot, value) -> predicates accepting it, in first-seen order.
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::vector<const PredicateSpec*>> users;
  for (const auto& p : registry.predicates()) {
    for (const auto& slot : p.arg_slots) {
      for (const auto& v : slot.domain) {
        auto key = std::make_pair(slot.name, v);
        auto& list = users[key];
        if (list.empty()) keys.push_back(key);
        if (list.empty() || list.back() != &p) list.push_back(&p);
      }
    }
  }
  for (const auto& key : keys) {
    const auto& list = users[key];
    if (list.size() == 1 && list.front()->arg_slots.size() == 1) {
      // Only one predicate takes this argument: offer the literal itself.
      const std::vector<std::pair<std::string, std::string>> bound{key};
      out.push_back(BuilderAction::choose_predicate(literal_from(*list.front(), bound, false)));
      out.push_back(BuilderAction::choose_predicate(literal_from(*list.front(), bound, true)));
    } else {
      out.push_back(BuilderAction::choose_arg(key.first, key.second));
    }
  }
}

void pred_select_options(const PredicateRegistry& registry,
                         const std::vector<std::pair<std::string, std::string>>& bound,
                         std::vector<BuilderAction>& out) {
  std::set<std::pair<std::string, std::string>> offered_args;
  std::vector<BuilderAction> more_args;
  for (const auto& p : registry.predicates()) {
    if (!consistent(p, bound)) continue;
    if (p.arg_slots.size() == bound.size()) {
      out.push_back(BuilderAction::choose_predicate(literal_from(p, bound, false)));
      out.push_back(BuilderAction::choose_predicate(literal_from(p, bound, true)));
      continue;
    }
    for (const auto& slot : p.arg_slots) {
      const bool already = std::any_of(bound.begin(), bound.end(),
                                       [&](const auto& b) { return b.first == slot.name; });
      if (already) continue;
      for (const auto& v : slot.domain) {
        if (offered_args.emplace(slot.name, v).second) {
          more_args.push_back(BuilderAction::choose_arg(slot.name, v));
        }
      }
    }
  }
  out.insert(out.end(), more_args.begin(), more_args.end());
}

bool offered(const std::vector<BuilderAction>& opts, const BuilderAction& a) {
  return std::find(opts.begin(), opts.end(), a) != opts.end();
}

[[noreturn]] void illegal(const BuilderAction& a, const std::string& why) {
  throw Error(ErrorCode::illegal_action, describe(a) + ": " + why);
}

// Index of the left parenthesis matching the first pending right parenthesis.
std::size_t innermost_open(const std::vector<Token>& placed) {
  std::size_t depth = 0;
  for (std::size_t i = placed.size(); i-- > 0;) {
    if (placed[i].kind == Token::Kind::RParen) ++depth;
    if (placed[i].kind == Token::Kind::LParen) {
      if (depth == 0) return i;
      --depth;
    }
  }
  throw std::logic_error("no open parenthesis");
}

}  // namespace

std::vector<BuilderAction> options(const BuilderState& b, const PredicateRegistry& registry) {
  std::vector<BuilderAction> out;
  const bool room = b.literal_count() < kMaxRuleLiterals;
  switch (b.phase()) {
    case Phase::Start:
      out.push_back(BuilderAction::choose_root(RootChoice::AllStates));
      out.push_back(BuilderAction::choose_root(RootChoice::NoStates));
      out.push_back(BuilderAction::choose_root(RootChoice::StateIf));
      break;
    case Phase::ArgSelect:
      arg_select_options(registry, out);
      break;
    case Phase::PredSelect:
      pred_select_options(registry, pending_args(b.placed()), out);
      break;
    case Phase::LogicalPending:
      if (room) {
        out.push_back(BuilderAction::choose_logical(LogicOp::And));
        out.push_back(BuilderAction::choose_logical(LogicOp::Or));
      }
      out.push_back(BuilderAction::finish());
      break;
    case Phase::ChoiceboxPending:
      if (room) {
        for (auto pos : {ChoiceboxPos::Inner, ChoiceboxPos::Outer}) {
          for (auto op : {LogicOp::And, LogicOp::Or}) {
            out.push_back(BuilderAction::choose_choicebox(pos, op));
          }
        }
      }
      out.push_back(BuilderAction::finish());
      break;
    case Phase::Terminal:
      throw Error(ErrorCode::terminal_state, "builder is finished");
  }
  return out;
}

// --- apply ------------------------------------------------------------------

BuilderState apply(const BuilderState& b, const BuilderAction& a,
                   const PredicateRegistry& registry) {
  using Kind = BuilderAction::Kind;

  if (a.kind == Kind::Clear) return new_builder();

  if (a.kind == Kind::Edit) {
    if (!a.replacement) illegal(a, "edit without a replacement");
    if (a.index >= b.placed_.size()) illegal(a, "no such token");
    const BuilderAction& r = *a.replacement;
    const Token& target = b.placed_[a.index];
    BuilderState out;
    out.placed_.assign(b.placed_.begin(), b.placed_.begin() + static_cast<std::ptrdiff_t>(a.index));
    switch (target.kind) {
      case Token::Kind::Root:
        if (r.kind != Kind::ChooseRoot) illegal(a, "root can only be replaced by a root choice");
        out.placed_.push_back(Token::make_root(r.root));
        return out;
      case Token::Kind::Logical:
        if (r.kind != Kind::ChooseLogical && r.kind != Kind::ChooseChoicebox) {
          illegal(a, "a logical can only be replaced by a logical");
        }
        out.placed_.push_back(Token::logical(r.op));
        return out;
      case Token::Kind::Arg:
        if (r.kind != Kind::ChooseArg || !offered(options(out, registry), r)) {
          illegal(a, "argument not offered at this position");
        }
        out.placed_.push_back(Token::arg(r.slot, r.value));
        return out;
      case Token::Kind::Literal:
        if (r.kind != Kind::ChoosePredicate) illegal(a, "a literal can only be replaced by a literal");
        if (auto err = registry.check(r.literal)) illegal(a, err->what());
        out.placed_.push_back(Token::make_literal(r.literal));
        return out;
      default:
        illegal(a, "token is not editable");
    }
  }

  const auto opts = options(b, registry);
  if (!offered(opts, a)) illegal(a, "not offered in phase " + std::string(to_string(b.phase())));

  BuilderState out = b;
  auto& placed = out.placed_;
  switch (a.kind) {
    case Kind::ChooseRoot:
      placed.push_back(Token::make_root(a.root));
      break;
    case Kind::ChooseArg:
      placed.push_back(Token::arg(a.slot, a.value));
      break;
    case Kind::ChoosePredicate:
      while (!placed.empty() && placed.back().kind == Token::Kind::Arg) placed.pop_back();
      placed.push_back(Token::make_literal(a.literal));
      break;
    case Kind::ChooseLogical:
      // Lone literal: wrap it directly.
      placed.insert(placed.end() - 1, Token::lparen());
      placed.push_back(Token::logical(a.op));
      break;
    case Kind::ChooseChoicebox:
      if (a.position == ChoiceboxPos::Inner) {
        placed.insert(placed.end() - 1, Token::lparen());
      } else {
        const std::size_t open = innermost_open(placed);
        placed.insert(placed.begin() + static_cast<std::ptrdiff_t>(open), Token::lparen());
        placed.push_back(Token::rparen());
      }
      placed.push_back(Token::logical(a.op));
      break;
    case Kind::Finish:
      out.finished_ = true;
      break;
    default:
      illegal(a, "unexpected action");
  }
  return out;
}

BuilderState replay(std::span<const BuilderAction> actions, const PredicateRegistry& registry,
                    std::size_t* failed_index) {
  BuilderState b = new_builder();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    try {
      b = apply(b, actions[i], registry);
    } catch (const Error& e) {
      if (failed_index != nullptr) *failed_index = i;
      throw Error(e.code(), "action " + std::to_string(i) + ": " + e.what());
    }
  }
  return b;
}

// --- finalize ---------------------------------------------------------------

namespace {

class TokenParser {
 public:
  explicit TokenParser(const std::vector<Token>& tokens) : tokens_(tokens) {}

  NodePtr parse_all() {
    NodePtr n = parse_seq();
    if (pos_ != tokens_.size()) fail();
    return n;
  }

 private:
  [[noreturn]] void fail() const {
    throw Error(ErrorCode::incomplete_rule, "malformed token sequence at " + std::to_string(pos_));
  }

  NodePtr parse_item() {
    if (pos_ >= tokens_.size()) fail();
    const Token& t = tokens_[pos_];
    if (t.kind == Token::Kind::Literal) {
      ++pos_;
      return make_literal(t.literal);
    }
    if (t.kind == Token::Kind::LParen) {
      ++pos_;
      NodePtr inner = parse_seq();
      if (pos_ >= tokens_.size() || tokens_[pos_].kind != Token::Kind::RParen) fail();
      ++pos_;
      return inner;
    }
    fail();
  }

  NodePtr parse_seq() {
    NodePtr acc = parse_item();
    while (pos_ < tokens_.size() && tokens_[pos_].kind == Token::Kind::Logical) {
      const LogicOp op = tokens_[pos_].op;
      ++pos_;
      NodePtr rhs = parse_item();
      acc = op == LogicOp::And ? make_and(acc, rhs) : make_or(acc, rhs);
    }
    return acc;
  }

  const std::vector<Token>& tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

RuleExpr finalize(const BuilderState& b) {
  if (b.phase() != Phase::Terminal) {
    throw Error(ErrorCode::incomplete_rule,
                "rule is incomplete (phase " + std::string(to_string(b.phase())) + ")");
  }
  const Token& root = b.placed().front();
  if (root.root == RootChoice::AllStates) return RuleExpr::all_states();
  if (root.root == RootChoice::NoStates) return RuleExpr::no_states();
  std::vector<Token> body(b.placed().begin() + 1, b.placed().end());
  for (std::size_t i = 0, n = b.open_parens(); i < n; ++i) body.push_back(Token::rparen());
  return RuleExpr::expr(TokenParser(body).parse_all());
}

// --- DNF compiler -----------------------------------------------------------

std::vector<BuilderAction> dnf_to_actions(const DnfExpr& dnf, const PredicateRegistry& registry) {
  if (dnf.clauses.empty()) throw Error(ErrorCode::parse, "DNF has no clauses");
  for (const auto& c : dnf.clauses) {
    if (c.empty()) throw Error(ErrorCode::parse, "DNF clause is empty");
  }
  if (dnf.literal_count() > kMaxRuleLiterals) {
    throw Error(ErrorCode::length_limit, "DNF has " + std::to_string(dnf.literal_count()) +
                                             " literals; the limit is " +
                                             std::to_string(kMaxRuleLiterals));
  }

  std::vector<BuilderAction> out;
  BuilderState b = new_builder();
  auto push = [&](BuilderAction a) {
    b = apply(b, a, registry);
    out.push_back(std::move(a));
  };

  // Argument-first entry of one literal; uses the condensed dropdown when the
  // builder offers one.
  auto emit_literal = [&](const Literal& lit) {
    if (auto err = registry.check(lit)) throw *err;
    const auto pick = BuilderAction::choose_predicate(lit);
    if (offered(options(b, registry), pick)) {
      push(pick);
      return;
    }
    for (const auto& [slot, value] : lit.args) push(BuilderAction::choose_arg(slot, value));
    push(pick);
  };

  push(BuilderAction::choose_root(RootChoice::StateIf));
  std::size_t placed = 0;
  for (const auto& clause : dnf.clauses) {
    for (std::size_t j = 0; j < clause.size(); ++j) {
      if (placed == 1) {
        push(BuilderAction::choose_logical(j == 0 ? LogicOp::Or : LogicOp::And));
      } else if (placed > 1) {
        if (j == 0) {
          push(BuilderAction::choose_choicebox(ChoiceboxPos::Outer, LogicOp::Or));
        } else if (j == 1) {
          push(BuilderAction::choose_choicebox(ChoiceboxPos::Inner, LogicOp::And));
        } else {
          push(BuilderAction::choose_choicebox(ChoiceboxPos::Outer, LogicOp::And));
        }
      }
      emit_literal(clause[j]);
      ++placed;
    }
  }
  push(BuilderAction::finish());
  return out;
}

// --- rendering --------------------------------------------------------------

std::string token_text(const Token& t, const PredicateRegistry& registry) {
  switch (t.kind) {
    case Token::Kind::Root:
      return t.root == RootChoice::AllStates  ? "all states"
             : t.root == RootChoice::NoStates ? "no states"
                                              : "a state if";
    case Token::Kind::LParen: return "(";
    case Token::Kind::RParen: return ")";
    case Token::Kind::Arg: return t.value;
    case Token::Kind::Literal: return registry.display(t.literal);
    case Token::Kind::Logical: return std::string(to_string(t.op));
    case Token::Kind::Choicebox: return "--";
    case Token::Kind::Slot: return t.expect == Token::Expect::Literal ? "_" : "▾";
  }
  return "";
}

std::string render_tokens(const BuilderState& b, const PredicateRegistry& registry) {
  std::string out = "The action applies to";
  for (const Token& t : b.tokens()) {
    out += ' ';
    out += token_text(t, registry);
  }
  return out;
}

}  // namespace crowdguard
