#pragma once

// Precision and positive rates, the blinded judging round trip, Fisher's
// exact test and the per-experiment report.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdguard/orchestration.hpp"
#include "crowdguard/wire.hpp"

namespace crowdguard {

// --- Fisher's exact test -------------------------------------------------------

// Greater: the first row has the larger share in the first column.
enum class Tail { Two, Greater, Less };
std::string_view to_string(Tail t);
// Also accepts "one" as Greater.
std::optional<Tail> parse_tail(std::string_view text);

// [[a, b], [c, d]]; rows are groups, columns outcomes.
struct ContingencyTable {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  std::uint64_t c = 0;
  std::uint64_t d = 0;

  std::uint64_t total() const { return a + b + c + d; }
  friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;
};

struct FisherResult {
  double p = 1.0;
  // Exact value as a reduced fraction, e.g. "1/2".
  std::string exact = "1";
};

// Hypergeometric enumeration in exact rationals. Tables with a zero margin
// return exactly 1. Two-tailed sums every table no more likely than the
// observed one.
FisherResult fisher_exact(const ContingencyTable& t, Tail tail = Tail::Two);

// --- ratios ----------------------------------------------------------------------

struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string text() const { return std::to_string(num) + "/" + std::to_string(den); }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

// A (state, action) pair some worker approved: a "yes" on an unknown
// question, or a state included by an accepted rule.
struct Positive {
  // question_id for answers, question_id#state_id for rules.
  std::string ref;
  std::string worker_id;
  ConditionId condition = ConditionId::Baseline;
  std::string state_id;
  std::string action_id;
};

struct JudgmentRecord {
  std::string ref;
  bool correct = false;
  std::string judge_id;
};

// Throws Error(empty_input).
Ratio precision(std::span<const JudgmentRecord> judgments);
// Yes answers over all answers; skips are ignored. Throws Error(empty_input).
Ratio positive_rate(std::span<const ResponseRecord> responses);

// Retained positives from a filter pass. The known-valid state is not a
// positive of a rule since its answer is given.
std::vector<Positive> collect_positives(const FilterResult& retained, const Dataset& data);

// Stand-in judge for simulations: the hidden rule of each action decides.
std::vector<JudgmentRecord> judge_with_oracle(std::span<const Positive> positives,
                                              const GroundTruth& truth, const Dataset& data,
                                              const std::string& judge_id = "oracle");

// --- blinded judging ------------------------------------------------------------

struct BlindedItem {
  std::string blinded_id;
  std::string state_render;
  std::string action_text;
};

struct BlindedKeyEntry {
  std::string blinded_id;
  Positive positive;
};

struct BlindedExport {
  std::vector<BlindedItem> items;
  std::vector<BlindedKeyEntry> key;
  // True when fewer positives existed than were asked for.
  bool clamped = false;
};

// Uniform sample without replacement, ids j0001... in sample order.
BlindedExport export_blinded(std::span<const Positive> positives, const Dataset& data,
                             std::size_t sample_size, std::uint64_t seed);

void write_blinded_items(std::ostream& out, std::span<const BlindedItem> items);
void write_blinded_key(std::ostream& out, std::span<const BlindedKeyEntry> key);
std::vector<BlindedKeyEntry> read_blinded_key(std::istream& in);
// Verdict lines {blinded_id, verdict: correct|incorrect, judge_id?} mapped
// through the key. Throws Error(duplicate_id) for a second verdict by the
// same judge and Error(not_found) for ids missing from the key.
std::vector<JudgmentRecord> read_judgments(std::istream& in,
                                           std::span<const BlindedKeyEntry> key);
void write_judgments(std::ostream& out, std::span<const JudgmentRecord> judgments,
                     std::span<const BlindedKeyEntry> key);

// --- report ----------------------------------------------------------------------

struct ConditionRow {
  ConditionId condition = ConditionId::Baseline;
  std::size_t workers = 0;
  std::size_t workers_filtered = 0;
  std::size_t answers_retained = 0;
  std::size_t positives = 0;
  std::size_t judged = 0;
  std::size_t correct = 0;
  std::optional<Ratio> precision;
  std::optional<Ratio> positive_rate;
};

struct PairwiseTest {
  ConditionId first = ConditionId::Baseline;
  ConditionId second = ConditionId::Baseline;
  ContingencyTable table;
  FisherResult result;
};

struct Report {
  Tail tail = Tail::Two;
  std::vector<ConditionRow> rows;
  std::vector<PairwiseTest> tests;
  std::vector<std::string> warnings;
};

struct ReportInput {
  std::span<const ResponseRecord> responses;
  std::span<const RuleSubmission> submissions;
  const Dataset* data = nullptr;
  std::span<const JudgmentRecord> judgments;
  FilterOptions filter;
  Tail tail = Tail::Two;
};

// Rows for every condition seen in the input, in table order; one Fisher
// test per pair of rows on correct/incorrect counts.
Report build_report(const ReportInput& in);
Json report_to_json(const Report& r);
// Bar chart of per-condition precision.
std::string report_svg(const Report& r);

}  // namespace crowdguard
