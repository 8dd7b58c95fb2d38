#pragma once

// Expert-authored fixture files that sit next to the dataset: tutorial
// questions, the fixed negative-gold set, example rules shown by Get Help,
// and (simulation only) hidden ground-truth rules per action.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "crowdguard/model.hpp"
#include "crowdguard/rule.hpp"

namespace crowdguard {

struct TutorialItem {
  std::string state_id;
  std::string action_id;
  bool answer = false;
  std::string explanation;
};

struct LabeledPair {
  std::string state_id;
  std::string action_id;
};

struct RuleExample {
  std::string action_id;
  std::string rule;  // canonical text
  std::string explanation;
};

using GroundTruth = std::vector<std::pair<std::string, RuleExpr>>;

std::vector<TutorialItem> load_tutorial(const std::filesystem::path& path);
std::vector<LabeledPair> load_negative_gold(const std::filesystem::path& path);
std::vector<RuleExample> load_rule_examples(const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);

void write_tutorial(std::ostream& out, const std::vector<TutorialItem>& items);
void write_negative_gold(std::ostream& out, const std::vector<LabeledPair>& items);
void write_rule_examples(std::ostream& out, const std::vector<RuleExample>& items);
void write_ground_truth(std::ostream& out, const GroundTruth& truth);

}  // namespace crowdguard
