#include "crowdguard/wire.hpp"

#include <istream>
#include <ostream>
#include <string>

#include "jsonl.hpp"

namespace crowdguard {

namespace {

[[noreturn]] void bad(const std::string& why) { throw Error(ErrorCode::parse, why); }

const Json& member(const Json& j, const char* name) {
  if (!j.is_object()) bad("expected an object");
  auto it = j.find(name);
  if (it == j.end()) bad(std::string("missing field '") + name + "'");
  return *it;
}

std::string str(const Json& j, const char* name) {
  const Json& v = member(j, name);
  if (!v.is_string()) bad(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

bool boolean(const Json& j, const char* name) {
  const Json& v = member(j, name);
  if (!v.is_boolean()) bad(std::string("field '") + name + "' must be a boolean");
  return v.get<bool>();
}

std::uint64_t count(const Json& j, const char* name) {
  const Json& v = member(j, name);
  if (!v.is_number_unsigned()) bad(std::string("field '") + name + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::int64_t integer(const Json& j, const char* name) {
  const Json& v = member(j, name);
  if (!v.is_number_integer()) bad(std::string("field '") + name + "' must be an integer");
  return v.get<std::int64_t>();
}

RootChoice root_from(const std::string& s) {
  if (s == "all") return RootChoice::AllStates;
  if (s == "none") return RootChoice::NoStates;
  if (s == "state_if") return RootChoice::StateIf;
  bad("unknown root '" + s + "'");
}

LogicOp op_from(const std::string& s) {
  if (s == "AND") return LogicOp::And;
  if (s == "OR") return LogicOp::Or;
  bad("unknown logical '" + s + "'");
}

ChoiceboxPos pos_from(const std::string& s) {
  if (s == "inner") return ChoiceboxPos::Inner;
  if (s == "outer") return ChoiceboxPos::Outer;
  bad("unknown choicebox position '" + s + "'");
}

template <typename T>
T parsed(std::optional<T> v, const std::string& what, const std::string& text) {
  if (!v) bad("unknown " + what + " '" + text + "'");
  return *v;
}

}  // namespace

Json literal_to_json(const Literal& lit) {
  Json args = Json::array();
  for (const auto& [slot, value] : lit.args) args.push_back({{"slot", slot}, {"value", value}});
  return {{"predicate_id", lit.predicate_id}, {"args", std::move(args)}, {"negated", lit.negated}};
}

Literal literal_from_json(const Json& j) {
  Literal lit;
  lit.predicate_id = str(j, "predicate_id");
  lit.negated = j.contains("negated") ? boolean(j, "negated") : false;
  const Json& args = member(j, "args");
  if (!args.is_array()) bad("'args' must be an array");
  for (const auto& a : args) lit.args.emplace_back(str(a, "slot"), str(a, "value"));
  return lit;
}

Json action_to_json(const BuilderAction& a) {
  using K = BuilderAction::Kind;
  switch (a.kind) {
    case K::ChooseRoot: return {{"kind", "choose_root"}, {"root", to_string(a.root)}};
    case K::ChooseArg: return {{"kind", "choose_arg"}, {"slot", a.slot}, {"value", a.value}};
    case K::ChoosePredicate: {
      Json j = literal_to_json(a.literal);
      j["kind"] = "choose_predicate";
      return j;
    }
    case K::ChooseLogical: return {{"kind", "choose_logical"}, {"op", to_string(a.op)}};
    case K::ChooseChoicebox:
      return {{"kind", "choose_choicebox"}, {"position", to_string(a.position)}, {"op", to_string(a.op)}};
    case K::Finish: return {{"kind", "finish"}};
    case K::Clear: return {{"kind", "clear"}};
    case K::Edit:
      return {{"kind", "edit"},
              {"index", a.index},
              {"replacement", a.replacement ? action_to_json(*a.replacement) : Json()}};
  }
  return {};
}

BuilderAction action_from_json(const Json& j) {
  const std::string kind = str(j, "kind");
  if (kind == "choose_root") return BuilderAction::choose_root(root_from(str(j, "root")));
  if (kind == "choose_arg") return BuilderAction::choose_arg(str(j, "slot"), str(j, "value"));
  if (kind == "choose_predicate") return BuilderAction::choose_predicate(literal_from_json(j));
  if (kind == "choose_logical") return BuilderAction::choose_logical(op_from(str(j, "op")));
  if (kind == "choose_choicebox") {
    return BuilderAction::choose_choicebox(pos_from(str(j, "position")), op_from(str(j, "op")));
  }
  if (kind == "finish") return BuilderAction::finish();
  if (kind == "clear") return BuilderAction::clear();
  if (kind == "edit") {
    const Json& r = member(j, "replacement");
    if (r.is_object() && r.value("kind", "") == "edit") bad("edit cannot replace with an edit");
    return BuilderAction::edit(static_cast<std::size_t>(count(j, "index")), action_from_json(r));
  }
  bad("unknown action kind '" + kind + "'");
}

Json actions_to_json(std::span<const BuilderAction> actions) {
  Json out = Json::array();
  for (const auto& a : actions) out.push_back(action_to_json(a));
  return out;
}

std::vector<BuilderAction> actions_from_json(const Json& j, std::size_t* failed_index) {
  if (!j.is_array()) {
    if (failed_index != nullptr) *failed_index = 0;
    bad("actions must be an array");
  }
  std::vector<BuilderAction> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      out.push_back(action_from_json(j[i]));
    } catch (const Error& e) {
      if (failed_index != nullptr) *failed_index = i;
      throw Error(e.code(), "action " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

Json tokens_to_json(const BuilderState& b, const PredicateRegistry& registry) {
  static constexpr const char* kKinds[] = {"root",    "lparen",  "rparen",    "arg",
                                           "literal", "logical", "choicebox", "slot"};
  Json out = Json::array();
  const auto tokens = b.tokens();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    Json j = {{"kind", kKinds[static_cast<int>(t.kind)]}, {"text", token_text(t, registry)}};
    j["index"] = i < b.placed().size() ? Json(i) : Json();
    if (t.kind == Token::Kind::Choicebox) j["position"] = to_string(t.position);
    out.push_back(std::move(j));
  }
  return out;
}

Json question_to_json(const Question& q) {
  Json j = {{"question_id", q.question_id},
            {"section", to_string(q.section)},
            {"gold_kind", to_string(q.gold_kind)},
            {"state_id", q.state_id},
            {"action_id", q.action_id},
            {"action_text", q.action_text}};
  if (q.given_answer) j["given_answer"] = *q.given_answer ? "yes" : "no";
  if (!q.given_explanation.empty()) j["given_explanation"] = q.given_explanation;
  if (!q.example_rule.empty()) j["example_rule"] = q.example_rule;
  return j;
}

Question question_from_json(const Json& j) {
  Question q;
  q.question_id = str(j, "question_id");
  q.section = parsed(parse_section(str(j, "section")), "section", str(j, "section"));
  q.gold_kind = parsed(parse_gold_kind(str(j, "gold_kind")), "gold kind", str(j, "gold_kind"));
  q.state_id = str(j, "state_id");
  q.action_id = str(j, "action_id");
  q.action_text = str(j, "action_text");
  if (j.contains("given_answer")) q.given_answer = str(j, "given_answer") == "yes";
  if (j.contains("given_explanation")) q.given_explanation = str(j, "given_explanation");
  if (j.contains("example_rule")) q.example_rule = str(j, "example_rule");
  return q;
}

Json hit_to_json(const Hit& h) {
  Json qs = Json::array();
  for (const auto& q : h.questions) qs.push_back(question_to_json(q));
  return {{"hit_id", h.hit_id},
          {"worker_id", h.worker_id},
          {"condition", to_string(h.condition)},
          {"hit_index", h.hit_index},
          {"questions", std::move(qs)}};
}

Hit hit_from_json(const Json& j) {
  Hit h;
  h.hit_id = str(j, "hit_id");
  h.worker_id = str(j, "worker_id");
  h.condition = parsed(parse_condition(str(j, "condition")), "condition", str(j, "condition"));
  h.hit_index = static_cast<std::size_t>(count(j, "hit_index"));
  const Json& qs = member(j, "questions");
  if (!qs.is_array()) bad("'questions' must be an array");
  for (const auto& q : qs) h.questions.push_back(question_from_json(q));
  return h;
}

Json response_to_json(const ResponseRecord& r) {
  Json j = {{"worker_id", r.worker_id},
            {"hit_id", r.hit_id},
            {"question_id", r.question_id},
            {"condition", to_string(r.condition)},
            {"section", to_string(r.section)},
            {"gold_kind", to_string(r.gold_kind)},
            {"state_id", r.state_id},
            {"action_id", r.action_id},
            {"answer", to_string(r.answer)},
            {"timestamp", r.timestamp}};
  if (r.explanation) j["explanation"] = *r.explanation;
  return j;
}

ResponseRecord response_from_json(const Json& j) {
  ResponseRecord r;
  r.worker_id = str(j, "worker_id");
  r.hit_id = str(j, "hit_id");
  r.question_id = str(j, "question_id");
  r.condition = parsed(parse_condition(str(j, "condition")), "condition", str(j, "condition"));
  r.section = parsed(parse_section(str(j, "section")), "section", str(j, "section"));
  r.gold_kind = parsed(parse_gold_kind(str(j, "gold_kind")), "gold kind", str(j, "gold_kind"));
  r.state_id = str(j, "state_id");
  r.action_id = str(j, "action_id");
  r.answer = parsed(parse_answer(str(j, "answer")), "answer", str(j, "answer"));
  r.timestamp = integer(j, "timestamp");
  if (j.contains("explanation")) r.explanation = str(j, "explanation");
  return r;
}

Json submission_to_json(const RuleSubmission& s) {
  return {{"worker_id", s.worker_id},       {"hit_id", s.hit_id},
          {"question_id", s.question_id},   {"action_id", s.action_id},
          {"condition", to_string(s.condition)}, {"rule", s.rule},
          {"included", s.included},         {"timestamp", s.timestamp}};
}

RuleSubmission submission_from_json(const Json& j) {
  RuleSubmission s;
  s.worker_id = str(j, "worker_id");
  s.hit_id = str(j, "hit_id");
  s.question_id = str(j, "question_id");
  s.action_id = str(j, "action_id");
  s.condition = parsed(parse_condition(str(j, "condition")), "condition", str(j, "condition"));
  s.rule = str(j, "rule");
  s.included = static_cast<std::size_t>(count(j, "included"));
  s.timestamp = integer(j, "timestamp");
  return s;
}

Json profile_to_json(const WorkerProfile& w) {
  Json j = {{"worker_id", w.worker_id},
            {"condition", to_string(w.condition)},
            {"hits_issued", w.hits_issued},
            {"hits_completed", w.hits_completed}};
  if (w.filtered) {
    j["filtered"] = true;
    j["filter_reason"] = w.filter_reason;
  }
  return j;
}

Json help_to_json(const HelpFeedback& h) {
  Json j = {{"stage", h.stage}, {"kind", h.kind}, {"message", h.message}};
  if (h.included) j["included_count"] = *h.included;
  if (h.excluded) j["excluded_count"] = *h.excluded;
  if (h.stage == 3 && !h.example_rule.empty()) {
    j["example"] = {{"action_id", h.example_action_id},
                    {"action_text", h.example_action_text},
                    {"rule", h.example_rule},
                    {"explanation", h.example_explanation},
                    {"reconstruct_target", h.reconstruct_target}};
  }
  return j;
}

void write_responses(std::ostream& out, std::span<const ResponseRecord> rs) {
  for (const auto& r : rs) out << response_to_json(r).dump() << '\n';
}

std::vector<ResponseRecord> read_responses(std::istream& in) {
  std::vector<ResponseRecord> out;
  jsonl::for_each_record(in, [&](const Json& j, std::size_t line) {
    try {
      out.push_back(response_from_json(j));
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), line);
    }
  });
  return out;
}

void write_submissions(std::ostream& out, std::span<const RuleSubmission> ss) {
  for (const auto& s : ss) out << submission_to_json(s).dump() << '\n';
}

std::vector<RuleSubmission> read_submissions(std::istream& in) {
  std::vector<RuleSubmission> out;
  jsonl::for_each_record(in, [&](const Json& j, std::size_t line) {
    try {
      out.push_back(submission_from_json(j));
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), line);
    }
  });
  return out;
}

}  // namespace crowdguard
