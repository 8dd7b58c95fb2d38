#pragma once

// Experimental conditions, HIT composition, gold injection, skip handling,
// explanation gating, worker filtering and rule-writing help.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdguard/builder.hpp"
#include "crowdguard/fixtures.hpp"
#include "crowdguard/model.hpp"
#include "crowdguard/random.hpp"
#include "crowdguard/rule.hpp"

namespace crowdguard {

struct DemoData;

enum class ConditionId {
  Baseline,
  TutorialOverload,
  GoldOverload,
  FakeGold,
  FgContinuity,
  FgSkip,
  FgExplainOneSided,
  FgExplainTwoSided,
  RuleBased,
};

std::string_view to_string(ConditionId c);
std::optional<ConditionId> parse_condition(std::string_view text);
std::span<const ConditionId> all_conditions();

enum class GoldKind { None, PositiveGold, NegativeGold, FakeGold, Tutorial };
enum class Section { Tutorial, Task };
enum class ExplanationPolicy { None, OneSided, TwoSided };
enum class TaskKind { CaseByCase, RuleBased };

std::string_view to_string(GoldKind g);
std::string_view to_string(Section s);
std::string_view to_string(ExplanationPolicy p);
std::string_view to_string(TaskKind k);
std::optional<GoldKind> parse_gold_kind(std::string_view text);
std::optional<Section> parse_section(std::string_view text);
std::optional<ExplanationPolicy> parse_explanation_policy(std::string_view text);
std::optional<TaskKind> parse_task_kind(std::string_view text);

// Question counts for one HIT. `tutorial` is the tutorial section; the rest
// make up the task section.
struct Composition {
  std::size_t tutorial = 0;
  std::size_t positive_gold = 0;
  std::size_t negative_gold = 0;
  std::size_t fake_gold = 0;
  // Tutorial-style task questions shown with their expert answer.
  std::size_t given_yes = 0;
  std::size_t given_no = 0;
  std::size_t unknown = 0;

  std::size_t task_size() const {
    return positive_gold + negative_gold + fake_gold + given_yes + given_no + unknown;
  }
  std::size_t total() const { return tutorial + task_size(); }

  friend bool operator==(const Composition&, const Composition&) = default;
};

struct ConditionSpec {
  ConditionId id = ConditionId::Baseline;
  TaskKind kind = TaskKind::CaseByCase;
  std::size_t hit_limit = 5;
  Composition first_hit;
  Composition later_hits;
  bool skip_allowed = false;
  ExplanationPolicy explanation = ExplanationPolicy::None;
  // Same state for every task-section question of a HIT.
  bool continuity = false;
  // Advisory only.
  int time_limit_minutes = 20;

  const Composition& composition(std::size_t hit_index) const {
    return hit_index <= 1 ? first_hit : later_hits;
  }

  friend bool operator==(const ConditionSpec&, const ConditionSpec&) = default;
};

class ConditionTable {
 public:
  ConditionTable() = default;
  explicit ConditionTable(std::vector<ConditionSpec> specs);

  // The composition table used for the experiments (see data/conditions.json).
  static ConditionTable standard();

  const ConditionSpec& at(ConditionId id) const;
  const std::map<ConditionId, ConditionSpec>& specs() const { return specs_; }

  friend bool operator==(const ConditionTable&, const ConditionTable&) = default;

 private:
  std::map<ConditionId, ConditionSpec> specs_;
};

ConditionTable load_condition_table(const std::filesystem::path& path);
ConditionTable parse_condition_table(std::string_view json_text);
std::string condition_table_json(const ConditionTable& table);

// Everything the orchestrator draws questions from.
struct Dataset {
  StateSet states;
  std::vector<ActionSpec> actions;
  PredicateRegistry registry;
  std::vector<TutorialItem> tutorial;
  std::vector<LabeledPair> negative_gold;
  std::vector<RuleExample> rule_examples;

  const ActionSpec* find_action(std::string_view action_id) const;
};

// Reads states, actions, predicates, tutorial, negative_gold and
// rule_examples from `dir` and cross-checks their references.
Dataset load_dataset(const std::filesystem::path& dir);
Dataset dataset_from_demo(const DemoData& demo);

struct Question {
  std::string question_id;
  Section section = Section::Task;
  GoldKind gold_kind = GoldKind::None;
  std::string state_id;
  std::string action_id;
  std::string action_text;
  // Tutorial-style questions only.
  std::optional<bool> given_answer;
  std::string given_explanation;
  // Rule-based tutorial questions: canonical text of the expert rule.
  std::string example_rule;

  // Gold answer, if the question has one the worker is graded on.
  std::optional<bool> gold_answer() const;

  friend bool operator==(const Question&, const Question&) = default;
};

struct Hit {
  std::string hit_id;
  std::string worker_id;
  ConditionId condition = ConditionId::Baseline;
  std::size_t hit_index = 1;
  std::vector<Question> questions;

  const Question* find(std::string_view question_id) const;

  friend bool operator==(const Hit&, const Hit&) = default;
};

struct WorkerProfile {
  std::string worker_id;
  ConditionId condition = ConditionId::Baseline;
  std::size_t hits_issued = 0;
  std::size_t hits_completed = 0;
  bool filtered = false;
  std::string filter_reason;

  friend bool operator==(const WorkerProfile&, const WorkerProfile&) = default;
};

enum class Answer { Yes, No, SkipReplaced };
std::string_view to_string(Answer a);
std::optional<Answer> parse_answer(std::string_view text);

struct ResponseRecord {
  std::string worker_id;
  std::string hit_id;
  std::string question_id;
  ConditionId condition = ConditionId::Baseline;
  Section section = Section::Task;
  GoldKind gold_kind = GoldKind::None;
  std::string state_id;
  std::string action_id;
  Answer answer = Answer::No;
  std::optional<std::string> explanation;
  std::int64_t timestamp = 0;

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

struct RuleSubmission {
  std::string worker_id;
  std::string hit_id;
  std::string question_id;
  std::string action_id;
  ConditionId condition = ConditionId::RuleBased;
  std::string rule;  // canonical text
  std::size_t included = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const RuleSubmission&, const RuleSubmission&) = default;
};

// --- operations ---------------------------------------------------------------

// Uniform over `active` from a seed derived from (seed, worker_id). Callers
// keep assignments sticky by storing the first result.
ConditionId assign_condition(std::string_view worker_id, std::span<const ConditionId> active,
                             std::uint64_t seed);

// HIT number `worker.hits_issued + 1`. Throws Error(limit_exceeded) past the
// condition's limit and Error(exhausted_pool) when the pools cannot supply
// distinct questions.
Hit build_hit(const WorkerProfile& worker, const ConditionTable& table, const Dataset& data,
              Rng& rng);

inline constexpr std::string_view kFakeGoldActionId = "fake_gold";

// Self-referential action that applies to no state.
ActionSpec fake_gold_action(std::size_t remaining);

// Replacement of the same gold kind for a skipped task question. Throws
// Error(condition_mismatch) unless the condition allows skipping and the
// question is in the task section of `hit`.
Question handle_skip(const ConditionSpec& spec, const Hit& hit, const Question& q,
                     const Dataset& data, Rng& rng, std::string replacement_id);

struct GateResult {
  bool accepted = true;
  // "missing_explanation", "too_short" or "below_grade_level" on rejection.
  std::string reason;
  // Whether the explanation is kept with the response.
  bool keep = false;
};

bool explanation_required(ExplanationPolicy policy, bool answer_yes);
// The text check alone: at least 8 words and grade >= 5.0.
GateResult check_explanation(std::string_view text);
GateResult gate_explanation(std::string_view text, ExplanationPolicy policy, bool answer_yes);

struct FilterOptions {
  bool filter_fake_gold = true;
};

struct WorkerFilter {
  std::string worker_id;
  std::string reason;
  std::string question_id;
};

struct FilterResult {
  std::vector<ResponseRecord> responses;
  std::vector<RuleSubmission> submissions;
  std::vector<WorkerFilter> filtered_workers;
  std::vector<WorkerFilter> rejected_submissions;
};

// Case-by-case: a worker failing any graded gold loses every response.
// Rule-based: a submission whose rule excludes the action's known-valid
// state is dropped.
FilterResult filter_workers(std::span<const ResponseRecord> responses,
                            std::span<const RuleSubmission> submissions, const Dataset& data,
                            FilterOptions options = {});

struct HelpFeedback {
  int stage = 1;
  // "prompt", "warning" or "example".
  std::string kind;
  std::string message;
  std::optional<std::size_t> included;
  std::optional<std::size_t> excluded;
  std::string example_action_id;
  std::string example_action_text;
  std::string example_rule;
  std::string example_explanation;
  // Display string the worker should reproduce with the builder.
  std::string reconstruct_target;
};

inline constexpr double kHelpBroadFraction = 0.9;

HelpFeedback get_help(const BuilderState& b, const ActionSpec& action, const Dataset& data);

}  // namespace crowdguard
