#pragma once

// Domain types for states, actions and predicates, plus the line-delimited
// loaders for each. Everything here is immutable once loaded.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "crowdguard/error.hpp"

namespace crowdguard {

using FeatureValue = std::variant<double, std::string, bool>;

std::string feature_to_string(const FeatureValue& v);

struct State {
  std::string state_id;
  std::uint32_t level = 0;
  std::map<std::string, FeatureValue> features;
  // Opaque display payload; forwarded to clients verbatim.
  std::string render;

  friend bool operator==(const State&, const State&) = default;
};

class StateSet {
 public:
  StateSet() = default;
  explicit StateSet(std::vector<State> states);

  // Throws Error(duplicate_id) if the id is already present.
  void insert(State s);

  const State* find(std::string_view state_id) const;
  const State& at(std::string_view state_id) const;
  bool contains(std::string_view state_id) const { return find(state_id) != nullptr; }

  std::size_t size() const { return states_.size(); }
  bool empty() const { return states_.empty(); }
  // Insertion order.
  const std::vector<State>& states() const { return states_; }
  auto begin() const { return states_.begin(); }
  auto end() const { return states_.end(); }

  friend bool operator==(const StateSet& a, const StateSet& b) {
    return a.states_ == b.states_;
  }

 private:
  std::vector<State> states_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct ActionSpec {
  std::string action_id;
  std::string text;
  // Empty for fake-gold actions.
  std::string known_valid_state;
  bool is_fake_gold = false;

  friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

struct ArgSlot {
  std::string name;
  std::vector<std::string> domain;

  friend bool operator==(const ArgSlot&, const ArgSlot&) = default;
};

struct PredicateSpec {
  std::string predicate_id;
  std::string display_template;
  std::string negated_display;
  std::vector<ArgSlot> arg_slots;
  std::string evaluator_id;
  // Feature the evaluator kernel reads.
  std::string feature;

  const ArgSlot* slot(std::string_view name) const;

  friend bool operator==(const PredicateSpec&, const PredicateSpec&) = default;
};

// A predicate applied to concrete argument values, optionally negated.
// `args` follows the predicate's slot order.
struct Literal {
  std::string predicate_id;
  std::vector<std::pair<std::string, std::string>> args;
  bool negated = false;

  // Polarity-free identity, e.g. "larger_value_is[object=bracket]".
  std::string atom_key() const;
  Literal positive() const;
  Literal flipped() const;

  friend bool operator==(const Literal&, const Literal&) = default;
  friend auto operator<=>(const Literal&, const Literal&) = default;
};

class PredicateRegistry {
 public:
  PredicateRegistry() = default;
  // Validates evaluator ids and slot domains.
  explicit PredicateRegistry(std::vector<PredicateSpec> predicates);

  const PredicateSpec* find(std::string_view predicate_id) const;
  const std::vector<PredicateSpec>& predicates() const { return predicates_; }
  std::size_t size() const { return predicates_.size(); }

  // Every positive literal formable from the slot-domain products, in
  // registry order. Negations are the `flipped()` of each.
  std::vector<Literal> atoms() const;

  // Human-readable phrase, e.g. "the larger value is a bracket".
  std::string display(const Literal& lit) const;

  // nullopt when the literal names a registered predicate, binds every slot
  // exactly once in slot order, and uses in-domain values.
  std::optional<Error> check(const Literal& lit) const;

  // Evaluates the kernel and applies polarity. Throws on unknown predicate,
  // missing feature or type mismatch.
  bool evaluate(const Literal& lit, const State& state) const;

 private:
  std::vector<PredicateSpec> predicates_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Names of the built-in evaluator kernels.
std::span<const std::string_view> evaluator_ids();
bool is_known_evaluator(std::string_view id);

// --- line-delimited loaders -------------------------------------------------

StateSet load_states(const std::filesystem::path& path);
StateSet parse_states(std::istream& in);
void write_states(std::ostream& out, const StateSet& states);

std::vector<ActionSpec> load_actions(const std::filesystem::path& path,
                                     const StateSet& states);
std::vector<ActionSpec> parse_actions(std::istream& in, const StateSet& states);
void write_actions(std::ostream& out, std::span<const ActionSpec> actions);

PredicateRegistry load_predicates(const std::filesystem::path& path);
PredicateRegistry parse_predicates(std::istream& in);
void write_predicates(std::ostream& out, const PredicateRegistry& registry);

// Checks that every literal formable from the registry evaluates on every
// state. Throws the first evaluation error.
void validate_dataset(const StateSet& states, const PredicateRegistry& registry);

// Deterministic exemplar pick: candidates sorted by id, element at
// cursor mod size.
const State& exemplar_state(std::vector<std::string> candidates,
                            std::uint64_t cursor, const StateSet& states);

}  // namespace crowdguard
