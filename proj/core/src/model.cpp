#include "crowdguard/model.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "crowdguard/error.hpp"
#include "jsonl.hpp"

namespace crowdguard {

using nlohmann::json;
using jsonl::field;
using jsonl::for_each_record;
using jsonl::open_input;
using jsonl::string_field;

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::duplicate_id: return "duplicate_id";
    case ErrorCode::missing_field: return "missing_field";
    case ErrorCode::dangling_reference: return "dangling_reference";
    case ErrorCode::unknown_evaluator: return "unknown_evaluator";
    case ErrorCode::empty_domain: return "empty_domain";
    case ErrorCode::missing_feature: return "missing_feature";
    case ErrorCode::type_mismatch: return "type_mismatch";
    case ErrorCode::empty_candidates: return "empty_candidates";
    case ErrorCode::unknown_predicate: return "unknown_predicate";
    case ErrorCode::domain_violation: return "domain_violation";
    case ErrorCode::length_limit: return "length_limit";
    case ErrorCode::too_many_literals: return "too_many_literals";
    case ErrorCode::special_rule: return "special_rule";
    case ErrorCode::illegal_action: return "illegal_action";
    case ErrorCode::terminal_state: return "terminal_state";
    case ErrorCode::incomplete_rule: return "incomplete_rule";
    case ErrorCode::limit_exceeded: return "limit_exceeded";
    case ErrorCode::exhausted_pool: return "exhausted_pool";
    case ErrorCode::condition_mismatch: return "condition_mismatch";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> line)
    : std::runtime_error(line ? message + " (line " + std::to_string(*line) + ")"
                              : message),
      code_(code),
      line_(line) {}

std::string feature_to_string(const FeatureValue& v) {
  if (const auto* d = std::get_if<double>(&v)) {
    if (std::floor(*d) == *d && std::fabs(*d) < 1e15) {
      return std::to_string(static_cast<long long>(*d));
    }
    std::ostringstream os;
    os << *d;
    return os.str();
  }
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return std::get<std::string>(v);
}

// --- StateSet ---------------------------------------------------------------

StateSet::StateSet(std::vector<State> states) {
  states_.reserve(states.size());
  for (auto& s : states) insert(std::move(s));
}

void StateSet::insert(State s) {
  if (index_.contains(s.state_id)) {
    throw Error(ErrorCode::duplicate_id, "duplicate state_id '" + s.state_id + "'");
  }
  index_.emplace(s.state_id, states_.size());
  states_.push_back(std::move(s));
}

const State* StateSet::find(std::string_view state_id) const {
  auto it = index_.find(std::string(state_id));
  return it == index_.end() ? nullptr : &states_[it->second];
}

const State& StateSet::at(std::string_view state_id) const {
  const State* s = find(state_id);
  if (s == nullptr) {
    throw Error(ErrorCode::not_found, "unknown state '" + std::string(state_id) + "'");
  }
  return *s;
}

// --- literals and predicates -----------------------------------------------

std::string Literal::atom_key() const {
  std::string key = predicate_id + "[";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i > 0) key += ',';
    key += args[i].first + "=" + args[i].second;
  }
  key += ']';
  return key;
}

Literal Literal::positive() const {
  Literal l = *this;
  l.negated = false;
  return l;
}

Literal Literal::flipped() const {
  Literal l = *this;
  l.negated = !negated;
  return l;
}

const ArgSlot* PredicateSpec::slot(std::string_view name) const {
  for (const auto& s : arg_slots) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

namespace {

constexpr std::array<std::string_view, 6> kEvaluators = {
    "equals", "at_least", "at_most", "between", "contains", "is_true"};

std::size_t kernel_arity(std::string_view id) {
  if (id == "between") return 2;
  return 1;
}

double numeric_feature(const FeatureValue& v, const std::string& feature) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw Error(ErrorCode::type_mismatch, "feature '" + feature + "' is not numeric");
}

double numeric_arg(const std::string& text) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::type_mismatch, "argument '" + text + "' is not numeric");
  }
  return out;
}

bool equals_kernel(const FeatureValue& v, const std::string& arg) {
  if (std::holds_alternative<double>(v)) return std::get<double>(v) == numeric_arg(arg);
  if (std::holds_alternative<bool>(v)) return std::get<bool>(v) == (arg == "true");
  return std::get<std::string>(v) == arg;
}

bool contains_kernel(const FeatureValue& v, const std::string& feature,
                     const std::string& arg) {
  const auto* s = std::get_if<std::string>(&v);
  if (s == nullptr) {
    throw Error(ErrorCode::type_mismatch, "feature '" + feature + "' is not a label set");
  }
  std::string_view rest = *s;
  while (!rest.empty()) {
    auto bar = rest.find('|');
    if (rest.substr(0, bar) == arg) return true;
    if (bar == std::string_view::npos) break;
    rest.remove_prefix(bar + 1);
  }
  return false;
}

std::string fill_template(std::string text, const Literal& lit) {
  for (const auto& [slot, value] : lit.args) {
    const std::string placeholder = "{" + slot + "}";
    for (auto pos = text.find(placeholder); pos != std::string::npos;
         pos = text.find(placeholder, pos + value.size())) {
      text.replace(pos, placeholder.size(), value);
    }
  }
  return text;
}

}  // namespace

std::span<const std::string_view> evaluator_ids() { return kEvaluators; }

bool is_known_evaluator(std::string_view id) {
  return std::find(kEvaluators.begin(), kEvaluators.end(), id) != kEvaluators.end();
}

PredicateRegistry::PredicateRegistry(std::vector<PredicateSpec> predicates)
    : predicates_(std::move(predicates)) {
  for (std::size_t i = 0; i < predicates_.size(); ++i) {
    const auto& p = predicates_[i];
    if (!is_known_evaluator(p.evaluator_id)) {
      throw Error(ErrorCode::unknown_evaluator,
                  "predicate '" + p.predicate_id + "' uses unknown evaluator '" +
                      p.evaluator_id + "'");
    }
    if (p.arg_slots.empty()) {
      throw Error(ErrorCode::empty_domain,
                  "predicate '" + p.predicate_id + "' has no argument slots");
    }
    for (const auto& slot : p.arg_slots) {
      if (slot.domain.empty()) {
        throw Error(ErrorCode::empty_domain, "predicate '" + p.predicate_id +
                                                 "' slot '" + slot.name +
                                                 "' has an empty domain");
      }
    }
    if (p.evaluator_id != "is_true" && p.arg_slots.size() < kernel_arity(p.evaluator_id)) {
      throw Error(ErrorCode::config, "predicate '" + p.predicate_id +
                                         "' has too few slots for evaluator '" +
                                         p.evaluator_id + "'");
    }
    if (!index_.emplace(p.predicate_id, i).second) {
      throw Error(ErrorCode::duplicate_id, "duplicate predicate_id '" + p.predicate_id + "'");
    }
  }
}

const PredicateSpec* PredicateRegistry::find(std::string_view predicate_id) const {
  auto it = index_.find(std::string(predicate_id));
  return it == index_.end() ? nullptr : &predicates_[it->second];
}

std::vector<Literal> PredicateRegistry::atoms() const {
  std::vector<Literal> out;
  for (const auto& p : predicates_) {
    std::vector<std::size_t> cursor(p.arg_slots.size(), 0);
    bool done = false;
    while (!done) {
      Literal lit{p.predicate_id, {}, false};
      for (std::size_t i = 0; i < cursor.size(); ++i) {
        lit.args.emplace_back(p.arg_slots[i].name, p.arg_slots[i].domain[cursor[i]]);
      }
      out.push_back(std::move(lit));
      // Odometer increment, last slot fastest.
      std::size_t k = cursor.size();
      while (true) {
        if (k == 0) {
          done = true;
          break;
        }
        --k;
        if (++cursor[k] < p.arg_slots[k].domain.size()) break;
        cursor[k] = 0;
      }
    }
  }
  return out;
}

std::string PredicateRegistry::display(const Literal& lit) const {
  const PredicateSpec* p = find(lit.predicate_id);
  if (p == nullptr) return lit.atom_key();
  return fill_template(lit.negated ? p->negated_display : p->display_template, lit);
}

std::optional<Error> PredicateRegistry::check(const Literal& lit) const {
  const PredicateSpec* p = find(lit.predicate_id);
  if (p == nullptr) {
    return Error(ErrorCode::unknown_predicate, "unknown predicate '" + lit.predicate_id + "'");
  }
  if (lit.args.size() != p->arg_slots.size()) {
    return Error(ErrorCode::domain_violation,
                 "literal '" + lit.atom_key() + "' binds " + std::to_string(lit.args.size()) +
                     " of " + std::to_string(p->arg_slots.size()) + " slots");
  }
  for (std::size_t i = 0; i < lit.args.size(); ++i) {
    const auto& slot = p->arg_slots[i];
    const auto& [name, value] = lit.args[i];
    if (name != slot.name) {
      return Error(ErrorCode::domain_violation, "literal '" + lit.atom_key() +
                                                    "' binds slot '" + name +
                                                    "' where '" + slot.name + "' is expected");
    }
    if (std::find(slot.domain.begin(), slot.domain.end(), value) == slot.domain.end()) {
      return Error(ErrorCode::domain_violation, "value '" + value + "' is outside the domain of " +
                                                    lit.predicate_id + "." + name);
    }
  }
  return std::nullopt;
}

bool PredicateRegistry::evaluate(const Literal& lit, const State& state) const {
  const PredicateSpec* p = find(lit.predicate_id);
  if (p == nullptr) {
    throw Error(ErrorCode::unknown_predicate, "unknown predicate '" + lit.predicate_id + "'");
  }
  auto it = state.features.find(p->feature);
  if (it == state.features.end()) {
    throw Error(ErrorCode::missing_feature,
                "state '" + state.state_id + "' lacks feature '" + p->feature + "'");
  }
  const FeatureValue& v = it->second;
  auto arg = [&](std::size_t i) -> const std::string& {
    if (i >= lit.args.size()) {
      throw Error(ErrorCode::domain_violation, "literal '" + lit.atom_key() + "' is missing arguments");
    }
    return lit.args[i].second;
  };

  bool result = false;
  const std::string& kernel = p->evaluator_id;
  if (kernel == "equals") {
    result = equals_kernel(v, arg(0));
  } else if (kernel == "at_least") {
    result = numeric_feature(v, p->feature) >= numeric_arg(arg(0));
  } else if (kernel == "at_most") {
    result = numeric_feature(v, p->feature) <= numeric_arg(arg(0));
  } else if (kernel == "between") {
    const double x = numeric_feature(v, p->feature);
    result = numeric_arg(arg(0)) <= x && x <= numeric_arg(arg(1));
  } else if (kernel == "contains") {
    result = contains_kernel(v, p->feature, arg(0));
  } else if (kernel == "is_true") {
    const auto* b = std::get_if<bool>(&v);
    if (b == nullptr) {
      throw Error(ErrorCode::type_mismatch, "feature '" + p->feature + "' is not boolean");
    }
    result = *b;
  } else {
    throw Error(ErrorCode::unknown_evaluator, "unknown evaluator '" + kernel + "'");
  }
  return result != lit.negated;
}

// --- loaders ----------------------------------------------------------------

namespace {

FeatureValue to_feature(const json& v, std::size_t line_no) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return v.get<std::string>();
  throw Error(ErrorCode::parse, "feature values must be number, string or boolean", line_no);
}

json from_feature(const FeatureValue& v) {
  if (const auto* d = std::get_if<double>(&v)) {
    if (std::floor(*d) == *d && std::fabs(*d) < 1e15) return static_cast<long long>(*d);
    return *d;
  }
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  return std::get<std::string>(v);
}

std::string domain_value(const json& v, std::size_t line_no) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  throw Error(ErrorCode::parse, "domain values must be strings or integers", line_no);
}

}  // namespace

StateSet parse_states(std::istream& in) {
  StateSet out;
  for_each_record(in, [&](const json& r, std::size_t line_no) {
    State s;
    s.state_id = string_field(r, "state_id", line_no);
    const json& level = field(r, "level", line_no);
    if (!level.is_number_unsigned() && !(level.is_number_integer() && level.get<long long>() >= 0)) {
      throw Error(ErrorCode::parse, "level must be a non-negative integer", line_no);
    }
    s.level = level.get<std::uint32_t>();
    const json& features = field(r, "features", line_no);
    if (!features.is_object() || features.empty()) {
      throw Error(ErrorCode::parse, "features must be a non-empty object", line_no);
    }
    for (const auto& [name, value] : features.items()) {
      s.features.emplace(name, to_feature(value, line_no));
    }
    s.render = string_field(r, "render", line_no);
    try {
      out.insert(std::move(s));
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), line_no);
    }
  });
  return out;
}

StateSet load_states(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_states(in);
}

void write_states(std::ostream& out, const StateSet& states) {
  for (const auto& s : states) {
    json features = json::object();
    for (const auto& [name, v] : s.features) features[name] = from_feature(v);
    json r = {{"state_id", s.state_id},
              {"level", s.level},
              {"features", std::move(features)},
              {"render", s.render}};
    out << r.dump() << '\n';
  }
}

std::vector<ActionSpec> parse_actions(std::istream& in, const StateSet& states) {
  std::vector<ActionSpec> out;
  std::unordered_map<std::string, bool> seen;
  for_each_record(in, [&](const json& r, std::size_t line_no) {
    ActionSpec a;
    a.action_id = string_field(r, "action_id", line_no);
    a.text = string_field(r, "text", line_no);
    a.known_valid_state = string_field(r, "known_valid_state", line_no);
    if (!seen.emplace(a.action_id, true).second) {
      throw Error(ErrorCode::duplicate_id, "duplicate action_id '" + a.action_id + "'", line_no);
    }
    if (!states.contains(a.known_valid_state)) {
      throw Error(ErrorCode::dangling_reference,
                  "action '" + a.action_id + "' references missing state '" +
                      a.known_valid_state + "'",
                  line_no);
    }
    out.push_back(std::move(a));
  });
  return out;
}

std::vector<ActionSpec> load_actions(const std::filesystem::path& path, const StateSet& states) {
  auto in = open_input(path);
  return parse_actions(in, states);
}

void write_actions(std::ostream& out, std::span<const ActionSpec> actions) {
  for (const auto& a : actions) {
    json r = {{"action_id", a.action_id},
              {"text", a.text},
              {"known_valid_state", a.known_valid_state}};
    out << r.dump() << '\n';
  }
}

PredicateRegistry parse_predicates(std::istream& in) {
  std::vector<PredicateSpec> specs;
  for_each_record(in, [&](const json& r, std::size_t line_no) {
    PredicateSpec p;
    p.predicate_id = string_field(r, "predicate_id", line_no);
    p.display_template = string_field(r, "display_template", line_no);
    p.negated_display = string_field(r, "negated_display", line_no);
    p.evaluator_id = string_field(r, "evaluator_id", line_no);
    p.feature = string_field(r, "feature", line_no);
    const json& slots = field(r, "arg_slots", line_no);
    if (!slots.is_array()) throw Error(ErrorCode::parse, "arg_slots must be an array", line_no);
    for (const auto& slot : slots) {
      ArgSlot s;
      s.name = string_field(slot, "name", line_no);
      const json& domain = field(slot, "domain", line_no);
      if (!domain.is_array()) throw Error(ErrorCode::parse, "domain must be an array", line_no);
      for (const auto& v : domain) s.domain.push_back(domain_value(v, line_no));
      p.arg_slots.push_back(std::move(s));
    }
    // Registry-level checks are repeated below, but reporting them here keeps
    // the line number.
    if (!is_known_evaluator(p.evaluator_id)) {
      throw Error(ErrorCode::unknown_evaluator,
                  "unknown evaluator '" + p.evaluator_id + "'", line_no);
    }
    for (const auto& s : p.arg_slots) {
      if (s.domain.empty()) {
        throw Error(ErrorCode::empty_domain, "slot '" + s.name + "' has an empty domain", line_no);
      }
    }
    if (p.arg_slots.empty()) {
      throw Error(ErrorCode::empty_domain, "predicate has no argument slots", line_no);
    }
    specs.push_back(std::move(p));
  });
  return PredicateRegistry(std::move(specs));
}

PredicateRegistry load_predicates(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_predicates(in);
}

void write_predicates(std::ostream& out, const PredicateRegistry& registry) {
  for (const auto& p : registry.predicates()) {
    json slots = json::array();
    for (const auto& s : p.arg_slots) slots.push_back({{"name", s.name}, {"domain", s.domain}});
    json r = {{"predicate_id", p.predicate_id},
              {"display_template", p.display_template},
              {"negated_display", p.negated_display},
              {"arg_slots", std::move(slots)},
              {"evaluator_id", p.evaluator_id},
              {"feature", p.feature}};
    out << r.dump() << '\n';
  }
}

void validate_dataset(const StateSet& states, const PredicateRegistry& registry) {
  const auto atoms = registry.atoms();
  for (const auto& s : states) {
    for (const auto& lit : atoms) {
      const bool pos = registry.evaluate(lit, s);
      const bool neg = registry.evaluate(lit.flipped(), s);
      if (pos == neg) {
        throw Error(ErrorCode::type_mismatch, "literal '" + lit.atom_key() +
                                                  "' is not two-valued on '" + s.state_id + "'");
      }
    }
  }
}

const State& exemplar_state(std::vector<std::string> candidates, std::uint64_t cursor,
                            const StateSet& states) {
  if (candidates.empty()) throw Error(ErrorCode::empty_candidates, "no candidate states");
  std::sort(candidates.begin(), candidates.end());
  return states.at(candidates[cursor % candidates.size()]);
}

}  // namespace crowdguard
