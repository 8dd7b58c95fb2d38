#include "crowdguard/demo.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>

#include "crowdguard/random.hpp"

namespace crowdguard {

namespace {

std::vector<std::string> range_strings(int lo, int hi) {
  std::vector<std::string> out;
  for (int i = lo; i <= hi; ++i) out.push_back(std::to_string(i));
  return out;
}

constexpr std::array<std::string_view, 5> kLabels = {"cats", "dogs", "birds", "total",
                                                     "difference"};
constexpr std::array<std::string_view, 3> kLargerKinds = {"bracket", "block", "number"};

std::string join_labels(const std::vector<std::string>& labels, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) out += sep;
    out += labels[i];
  }
  return out;
}

StateSet make_states(Rng& rng) {
  StateSet states;
  std::set<std::string> signatures;
  std::size_t n = 0;
  while (states.size() < kDemoStates) {
    const std::uint32_t level = static_cast<std::uint32_t>(states.size() / (kDemoStates / 6)) + 1;
    const std::string larger(kLargerKinds[rng.index(kLargerKinds.size())]);
    const bool has_bracket = larger == "bracket" || rng.bernoulli(0.35);
    const auto blocks = static_cast<double>(rng.index(7));
    std::vector<std::string> labels;
    for (auto l : kLabels) {
      if (rng.bernoulli(0.4)) labels.emplace_back(l);
    }
    const std::string label_set = join_labels(labels, "|");
    // Small alterations collapse into one state, so identical feature
    // vectors are skipped.
    const std::string signature = std::to_string(level) + "/" + larger + "/" +
                                  (has_bracket ? "b" : "-") + "/" +
                                  std::to_string(static_cast<int>(blocks)) + "/" + label_set;
    if (!signatures.insert(signature).second) continue;
    ++n;
    char id[8];
    std::snprintf(id, sizeof id, "s%03zu", n);
    State s;
    s.state_id = id;
    s.level = level;
    s.features = {{"level", static_cast<double>(level)},
                  {"larger_value_kind", larger},
                  {"has_bracket", has_bracket},
                  {"block_count", blocks},
                  {"label_set", label_set}};
    s.render = "level " + std::to_string(level) + " | blocks: " +
               std::to_string(static_cast<int>(blocks)) + " | larger value: " + larger +
               " | bracket: " + (has_bracket ? "yes" : "no") +
               " | labels: " + (labels.empty() ? std::string("none") : join_labels(labels, ", "));
    states.insert(std::move(s));
  }
  return states;
}

constexpr std::array<std::string_view, 10> kHintOpenings = {
    "Check",
    "Look again at",
    "Think about",
    "Compare the story with",
    "Before moving on, check",
    "It may help to look at",
    "Start by looking at",
    "Go back to",
    "Ask yourself about",
    "Take another look at",
};

constexpr std::array<std::string_view, 10> kHintBodies = {
    "the bracket over the blocks.",
    "the size of the larger value.",
    "the number of blocks in your diagram.",
    "the label on the difference.",
    "the biggest quantity in the story.",
    "the labels on each block.",
    "the cats and dogs blocks.",
    "the bracket that shows the total.",
    "any block the story does not mention.",
    "the numbers written inside the blocks.",
};

std::vector<ActionSpec> make_actions() {
  std::vector<ActionSpec> out;
  for (std::size_t i = 0; i < kDemoActions; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "a%03zu", i + 1);
    ActionSpec a;
    a.action_id = id;
    a.text = std::string(kHintOpenings[i / kHintBodies.size()]) + " " +
             std::string(kHintBodies[i % kHintBodies.size()]);
    out.push_back(std::move(a));
  }
  return out;
}

RuleExpr random_truth_rule(Rng& rng, const std::vector<Literal>& atoms, const StateSet& states,
                           const PredicateRegistry& registry) {
  while (true) {
    DnfExpr dnf;
    const std::size_t clauses = 1 + rng.index(2);
    for (std::size_t c = 0; c < clauses; ++c) {
      std::vector<Literal> clause;
      const std::size_t width = 1 + rng.index(2);
      std::set<std::string> features;
      for (std::size_t k = 0; k < width; ++k) {
        Literal lit = rng.pick(atoms);
        // One literal per feature keeps clauses free of contradictions.
        if (!features.insert(registry.find(lit.predicate_id)->feature).second) continue;
        lit.negated = rng.bernoulli(0.3);
        clause.push_back(std::move(lit));
      }
      dnf.clauses.push_back(std::move(clause));
    }
    RuleExpr rule = dnf.to_rule();
    const auto p = partition(rule, states, registry);
    const double coverage = static_cast<double>(p.included.size()) / static_cast<double>(states.size());
    if (coverage >= 0.08 && coverage <= 0.40) return rule;
  }
}

std::string sentence_for(const RuleExpr& rule, const PredicateRegistry& registry) {
  const DnfExpr dnf = to_dnf(rule);
  std::string out;
  for (std::size_t c = 0; c < dnf.clauses.size(); ++c) {
    if (c > 0) out += ", or when ";
    for (std::size_t k = 0; k < dnf.clauses[c].size(); ++k) {
      if (k > 0) out += " and ";
      out += registry.display(dnf.clauses[c][k]);
    }
  }
  return out;
}

}  // namespace

PredicateRegistry demo_registry() {
  std::vector<PredicateSpec> p;
  p.push_back({"larger_value_is", "the larger value is a {object}",
               "the larger value is not a {object}",
               {{"object", {"bracket", "block", "number"}}}, "equals", "larger_value_kind"});
  p.push_back({"has_bracket", "the diagram has a {object}", "the diagram has no {object}",
               {{"object", {"bracket"}}}, "is_true", "has_bracket"});
  p.push_back({"level_at_least", "the level is at least {level}", "the level is below {level}",
               {{"level", range_strings(1, 6)}}, "at_least", "level"});
  p.push_back({"level_is", "the level is {level}", "the level is not {level}",
               {{"level", range_strings(1, 6)}}, "equals", "level"});
  p.push_back({"blocks_at_least", "the diagram has at least {count} blocks",
               "the diagram has fewer than {count} blocks",
               {{"count", range_strings(1, 6)}}, "at_least", "block_count"});
  p.push_back({"blocks_exactly", "the diagram has exactly {count} blocks",
               "the diagram does not have exactly {count} blocks",
               {{"count", range_strings(0, 6)}}, "equals", "block_count"});
  p.push_back({"has_label", "the diagram has a {label} label", "the diagram has no {label} label",
               {{"label", std::vector<std::string>(kLabels.begin(), kLabels.end())}}, "contains",
               "label_set"});
  p.push_back({"level_between", "the level is between {level} and {upper}",
               "the level is not between {level} and {upper}",
               {{"level", range_strings(1, 6)}, {"upper", range_strings(1, 6)}}, "between",
               "level"});
  return PredicateRegistry(std::move(p));
}

DemoData generate_demo(std::uint64_t seed) {
  Rng rng(seed);
  DemoData d;
  d.predicates = demo_registry();
  d.states = make_states(rng);
  auto actions = make_actions();

  std::vector<Literal> atoms;
  for (auto& a : d.predicates.atoms()) {
    if (a.predicate_id == "level_between" && std::stoi(a.args[0].second) >= std::stoi(a.args[1].second)) {
      continue;
    }
    atoms.push_back(std::move(a));
  }

  for (auto& a : actions) {
    RuleExpr truth = random_truth_rule(rng, atoms, d.states, d.predicates);
    const auto p = partition(truth, d.states, d.predicates);
    a.known_valid_state = rng.pick(p.included);
    d.ground_truth.emplace_back(a.action_id, std::move(truth));
  }
  d.actions = std::move(actions);

  // Tutorial and negative gold: expert-labelled pairs drawn from the truth.
  auto truth_of = [&](std::size_t action_idx, const std::string& state_id) {
    return eval_rule(d.ground_truth[action_idx].second, d.states.at(state_id), d.predicates);
  };
  std::set<std::pair<std::string, std::string>> used;
  std::size_t yes = 0;
  std::size_t no = 0;
  while (yes < 6 || no < 6) {
    const std::size_t ai = rng.index(d.actions.size());
    const State& s = d.states.states()[rng.index(d.states.size())];
    const bool answer = truth_of(ai, s.state_id);
    if (s.state_id == d.actions[ai].known_valid_state) continue;
    if ((answer && yes >= 6) || (!answer && no >= 6)) continue;
    if (!used.emplace(s.state_id, d.actions[ai].action_id).second) continue;
    TutorialItem t;
    t.state_id = s.state_id;
    t.action_id = d.actions[ai].action_id;
    t.answer = answer;
    t.explanation = answer ? "Yes: the hint applies here because " +
                                 sentence_for(d.ground_truth[ai].second, d.predicates) + "."
                           : "No: this hint would confuse the student, because it only applies when " +
                                 sentence_for(d.ground_truth[ai].second, d.predicates) + ".";
    d.tutorial.push_back(std::move(t));
    (answer ? yes : no) += 1;
  }
  while (d.negative_gold.size() < 10) {
    const std::size_t ai = rng.index(d.actions.size());
    const State& s = d.states.states()[rng.index(d.states.size())];
    if (truth_of(ai, s.state_id)) continue;
    if (!used.emplace(s.state_id, d.actions[ai].action_id).second) continue;
    d.negative_gold.push_back({s.state_id, d.actions[ai].action_id});
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& [action_id, rule] = d.ground_truth[i];
    d.rule_examples.push_back({action_id, to_text(rule),
                               "This hint applies when " + sentence_for(rule, d.predicates) + "."});
  }
  return d;
}

void write_demo(const DemoData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write '" + (dir / name).string() + "'");
    return out;
  };
  {
    auto out = open("states.jsonl");
    write_states(out, data.states);
  }
  {
    auto out = open("actions.jsonl");
    write_actions(out, data.actions);
  }
  {
    auto out = open("predicates.jsonl");
    write_predicates(out, data.predicates);
  }
  {
    auto out = open("ground_truth.jsonl");
    write_ground_truth(out, data.ground_truth);
  }
  {
    auto out = open("tutorial.jsonl");
    write_tutorial(out, data.tutorial);
  }
  {
    auto out = open("negative_gold.jsonl");
    write_negative_gold(out, data.negative_gold);
  }
  {
    auto out = open("rule_examples.jsonl");
    write_rule_examples(out, data.rule_examples);
  }
}

}  // namespace crowdguard
