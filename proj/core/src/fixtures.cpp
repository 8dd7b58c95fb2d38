#include "crowdguard/fixtures.hpp"

#include <ostream>
#include <set>

#include "jsonl.hpp"

namespace crowdguard {

using jsonl::json;

namespace {

void check_answer(const json& record, std::size_t line_no, bool* out) {
  const json& v = jsonl::field(record, "answer", line_no);
  if (v.is_boolean()) {
    *out = v.get<bool>();
  } else if (v == "yes" || v == "no") {
    *out = v == "yes";
  } else {
    throw Error(ErrorCode::parse, "answer must be \"yes\" or \"no\"", line_no);
  }
}

}  // namespace

std::vector<TutorialItem> load_tutorial(const std::filesystem::path& path) {
  auto in = jsonl::open_input(path);
  std::vector<TutorialItem> out;
  jsonl::for_each_record(in, [&](const json& r, std::size_t line_no) {
    TutorialItem t;
    t.state_id = jsonl::string_field(r, "state_id", line_no);
    t.action_id = jsonl::string_field(r, "action_id", line_no);
    check_answer(r, line_no, &t.answer);
    t.explanation = jsonl::string_field(r, "explanation", line_no);
    out.push_back(std::move(t));
  });
  return out;
}

std::vector<LabeledPair> load_negative_gold(const std::filesystem::path& path) {
  auto in = jsonl::open_input(path);
  std::vector<LabeledPair> out;
  std::set<std::pair<std::string, std::string>> seen;
  jsonl::for_each_record(in, [&](const json& r, std::size_t line_no) {
    LabeledPair p{jsonl::string_field(r, "state_id", line_no),
                  jsonl::string_field(r, "action_id", line_no)};
    if (!seen.emplace(p.state_id, p.action_id).second) {
      throw Error(ErrorCode::duplicate_id, "duplicate pair " + p.state_id + "/" + p.action_id,
                  line_no);
    }
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<RuleExample> load_rule_examples(const std::filesystem::path& path) {
  auto in = jsonl::open_input(path);
  std::vector<RuleExample> out;
  jsonl::for_each_record(in, [&](const json& r, std::size_t line_no) {
    RuleExample e;
    e.action_id = jsonl::string_field(r, "action_id", line_no);
    e.rule = jsonl::string_field(r, "rule", line_no);
    e.explanation = jsonl::string_field(r, "explanation", line_no);
    try {
      (void)parse_rule(e.rule);
    } catch (const Error& err) {
      throw Error(ErrorCode::parse, err.what(), line_no);
    }
    out.push_back(std::move(e));
  });
  return out;
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  auto in = jsonl::open_input(path);
  GroundTruth out;
  jsonl::for_each_record(in, [&](const json& r, std::size_t line_no) {
    std::string action_id = jsonl::string_field(r, "action_id", line_no);
    const std::string text = jsonl::string_field(r, "rule", line_no);
    try {
      out.emplace_back(std::move(action_id), parse_rule(text));
    } catch (const Error& err) {
      throw Error(ErrorCode::parse, err.what(), line_no);
    }
  });
  return out;
}

void write_tutorial(std::ostream& out, const std::vector<TutorialItem>& items) {
  for (const auto& t : items) {
    json j = {{"state_id", t.state_id},
              {"action_id", t.action_id},
              {"answer", t.answer ? "yes" : "no"},
              {"explanation", t.explanation}};
    out << j.dump() << '\n';
  }
}

void write_negative_gold(std::ostream& out, const std::vector<LabeledPair>& items) {
  for (const auto& p : items) {
    out << json{{"state_id", p.state_id}, {"action_id", p.action_id}}.dump() << '\n';
  }
}

void write_rule_examples(std::ostream& out, const std::vector<RuleExample>& items) {
  for (const auto& e : items) {
    json j = {{"action_id", e.action_id}, {"rule", e.rule}, {"explanation", e.explanation}};
    out << j.dump() << '\n';
  }
}

void write_ground_truth(std::ostream& out, const GroundTruth& truth) {
  for (const auto& [id, rule] : truth) {
    out << json{{"action_id", id}, {"rule", to_text(rule)}}.dump() << '\n';
  }
}

}  // namespace crowdguard
