#pragma once

// Synthetic diagram domain: word-problem diagrams made of blocks, brackets
// and labels, at six difficulty levels. Stands in for real game telemetry
// at the same scale (540 states, 100 hints, 8 predicates).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crowdguard/fixtures.hpp"
#include "crowdguard/model.hpp"
#include "crowdguard/rule.hpp"

namespace crowdguard {

struct DemoData {
  StateSet states;
  std::vector<ActionSpec> actions;
  PredicateRegistry predicates;
  // Hidden per-action rule defining which states each hint truly applies to.
  GroundTruth ground_truth;
  std::vector<TutorialItem> tutorial;
  std::vector<LabeledPair> negative_gold;
  std::vector<RuleExample> rule_examples;
};

inline constexpr std::size_t kDemoStates = 540;
inline constexpr std::size_t kDemoActions = 100;

PredicateRegistry demo_registry();
DemoData generate_demo(std::uint64_t seed = 20190127);

// Writes states.jsonl, actions.jsonl, predicates.jsonl, ground_truth.jsonl,
// tutorial.jsonl, negative_gold.jsonl and rule_examples.jsonl into `dir`.
void write_demo(const DemoData& data, const std::filesystem::path& dir);

}  // namespace crowdguard
