#include "crowdguard/orchestration.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "crowdguard/demo.hpp"
#include "crowdguard/readability.hpp"
#include "jsonl.hpp"

namespace crowdguard {

using nlohmann::json;

// --- enums --------------------------------------------------------------------

namespace {

constexpr std::array<std::pair<ConditionId, std::string_view>, 9> kConditionNames = {{
    {ConditionId::Baseline, "baseline"},
    {ConditionId::TutorialOverload, "tutorial_overload"},
    {ConditionId::GoldOverload, "gold_overload"},
    {ConditionId::FakeGold, "fake_gold"},
    {ConditionId::FgContinuity, "fg_continuity"},
    {ConditionId::FgSkip, "fg_skip"},
    {ConditionId::FgExplainOneSided, "fg_explain_one_sided"},
    {ConditionId::FgExplainTwoSided, "fg_explain_two_sided"},
    {ConditionId::RuleBased, "rule_based"},
}};

constexpr std::array<ConditionId, 9> kAllConditions = {
    ConditionId::Baseline,          ConditionId::TutorialOverload, ConditionId::GoldOverload,
    ConditionId::FakeGold,          ConditionId::FgContinuity,     ConditionId::FgSkip,
    ConditionId::FgExplainOneSided, ConditionId::FgExplainTwoSided, ConditionId::RuleBased,
};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<E, std::string_view>, N>& table,
                        std::string_view text) {
  for (const auto& [e, name] : table) {
    if (name == text) return e;
  }
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E e) {
  for (const auto& [k, name] : table) {
    if (k == e) return name;
  }
  return "?";
}

constexpr std::array<std::pair<GoldKind, std::string_view>, 5> kGoldNames = {{
    {GoldKind::None, "none"},
    {GoldKind::PositiveGold, "positive_gold"},
    {GoldKind::NegativeGold, "negative_gold"},
    {GoldKind::FakeGold, "fake_gold"},
    {GoldKind::Tutorial, "tutorial"},
}};

constexpr std::array<std::pair<Section, std::string_view>, 2> kSectionNames = {{
    {Section::Tutorial, "tutorial"},
    {Section::Task, "task"},
}};

constexpr std::array<std::pair<ExplanationPolicy, std::string_view>, 3> kPolicyNames = {{
    {ExplanationPolicy::None, "none"},
    {ExplanationPolicy::OneSided, "one_sided"},
    {ExplanationPolicy::TwoSided, "two_sided"},
}};

constexpr std::array<std::pair<TaskKind, std::string_view>, 2> kTaskKindNames = {{
    {TaskKind::CaseByCase, "case_by_case"},
    {TaskKind::RuleBased, "rule_based"},
}};

constexpr std::array<std::pair<Answer, std::string_view>, 3> kAnswerNames = {{
    {Answer::Yes, "yes"},
    {Answer::No, "no"},
    {Answer::SkipReplaced, "skip_replaced"},
}};

}  // namespace

std::string_view to_string(ConditionId c) { return name_of(kConditionNames, c); }
std::optional<ConditionId> parse_condition(std::string_view t) { return lookup(kConditionNames, t); }
std::span<const ConditionId> all_conditions() { return kAllConditions; }
std::string_view to_string(GoldKind g) { return name_of(kGoldNames, g); }
std::string_view to_string(Section s) { return name_of(kSectionNames, s); }
std::string_view to_string(ExplanationPolicy p) { return name_of(kPolicyNames, p); }
std::string_view to_string(TaskKind k) { return name_of(kTaskKindNames, k); }
std::string_view to_string(Answer a) { return name_of(kAnswerNames, a); }
std::optional<GoldKind> parse_gold_kind(std::string_view t) { return lookup(kGoldNames, t); }
std::optional<Section> parse_section(std::string_view t) { return lookup(kSectionNames, t); }
std::optional<ExplanationPolicy> parse_explanation_policy(std::string_view t) {
  return lookup(kPolicyNames, t);
}
std::optional<TaskKind> parse_task_kind(std::string_view t) { return lookup(kTaskKindNames, t); }
std::optional<Answer> parse_answer(std::string_view t) { return lookup(kAnswerNames, t); }

// --- condition table ----------------------------------------------------------

ConditionTable::ConditionTable(std::vector<ConditionSpec> specs) {
  for (auto& s : specs) {
    const ConditionId id = s.id;
    if (!specs_.emplace(id, std::move(s)).second) {
      throw Error(ErrorCode::duplicate_id,
                  "condition '" + std::string(to_string(id)) + "' listed twice");
    }
  }
}

const ConditionSpec& ConditionTable::at(ConditionId id) const {
  auto it = specs_.find(id);
  if (it == specs_.end()) {
    throw Error(ErrorCode::config, "condition '" + std::string(to_string(id)) + "' not configured");
  }
  return it->second;
}

ConditionTable ConditionTable::standard() {
  std::vector<ConditionSpec> out;
  auto case_by_case = [](ConditionId id) {
    ConditionSpec s;
    s.id = id;
    s.kind = TaskKind::CaseByCase;
    s.hit_limit = 5;
    s.time_limit_minutes = 20;
    s.first_hit = {.tutorial = 3, .positive_gold = 1, .unknown = 5};
    s.later_hits = {.positive_gold = 1, .unknown = 6};
    return s;
  };

  out.push_back(case_by_case(ConditionId::Baseline));

  // All but one task question of the first HIT is tutorial-style.
  auto tutorial = case_by_case(ConditionId::TutorialOverload);
  tutorial.first_hit = {.tutorial = 3, .given_yes = 3, .given_no = 2, .unknown = 1};
  out.push_back(tutorial);

  // All but one task question of the first HIT is gold.
  auto gold = case_by_case(ConditionId::GoldOverload);
  gold.first_hit = {.tutorial = 3, .positive_gold = 3, .negative_gold = 2, .unknown = 1};
  out.push_back(gold);

  for (auto id : {ConditionId::FakeGold, ConditionId::FgContinuity, ConditionId::FgSkip,
                  ConditionId::FgExplainOneSided, ConditionId::FgExplainTwoSided}) {
    auto s = case_by_case(id);
    s.first_hit = {.tutorial = 3, .positive_gold = 1, .fake_gold = 1, .unknown = 4};
    s.later_hits = {.positive_gold = 1, .fake_gold = 1, .unknown = 5};
    s.continuity = id == ConditionId::FgContinuity;
    s.skip_allowed = id == ConditionId::FgSkip;
    if (id == ConditionId::FgExplainOneSided) s.explanation = ExplanationPolicy::OneSided;
    if (id == ConditionId::FgExplainTwoSided) s.explanation = ExplanationPolicy::TwoSided;
    out.push_back(s);
  }

  ConditionSpec rules;
  rules.id = ConditionId::RuleBased;
  rules.kind = TaskKind::RuleBased;
  rules.hit_limit = 3;
  rules.time_limit_minutes = 45;
  rules.first_hit = {.tutorial = 2, .unknown = 3};
  rules.later_hits = {.unknown = 4};
  out.push_back(rules);
  return ConditionTable(std::move(out));
}

namespace {

json composition_json(const Composition& c) {
  return {{"tutorial", c.tutorial},       {"positive_gold", c.positive_gold},
          {"negative_gold", c.negative_gold}, {"fake_gold", c.fake_gold},
          {"given_yes", c.given_yes},     {"given_no", c.given_no},
          {"unknown", c.unknown}};
}

std::size_t count_field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) return 0;
  if (!it->is_number_unsigned()) {
    throw Error(ErrorCode::config, std::string("'") + name + "' must be a non-negative integer");
  }
  return it->get<std::size_t>();
}

Composition composition_from(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::config, "composition must be an object");
  for (const auto& [key, _] : j.items()) {
    static const std::set<std::string> known = {"tutorial", "positive_gold", "negative_gold",
                                                "fake_gold", "given_yes", "given_no", "unknown"};
    if (!known.count(key)) throw Error(ErrorCode::config, "unknown composition field '" + key + "'");
  }
  Composition c;
  c.tutorial = count_field(j, "tutorial");
  c.positive_gold = count_field(j, "positive_gold");
  c.negative_gold = count_field(j, "negative_gold");
  c.fake_gold = count_field(j, "fake_gold");
  c.given_yes = count_field(j, "given_yes");
  c.given_no = count_field(j, "given_no");
  c.unknown = count_field(j, "unknown");
  return c;
}

}  // namespace

std::string condition_table_json(const ConditionTable& table) {
  json list = json::array();
  for (const auto& [id, s] : table.specs()) {
    list.push_back({{"id", to_string(id)},
                    {"kind", to_string(s.kind)},
                    {"hit_limit", s.hit_limit},
                    {"first_hit", composition_json(s.first_hit)},
                    {"later_hits", composition_json(s.later_hits)},
                    {"skip_allowed", s.skip_allowed},
                    {"explanation", to_string(s.explanation)},
                    {"continuity", s.continuity},
                    {"time_limit_minutes", s.time_limit_minutes}});
  }
  return json{{"conditions", std::move(list)}}.dump(2) + "\n";
}

ConditionTable parse_condition_table(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::config, std::string("condition table: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("conditions") || !doc["conditions"].is_array()) {
    throw Error(ErrorCode::config, "condition table needs a 'conditions' array");
  }
  std::vector<ConditionSpec> specs;
  for (const auto& c : doc["conditions"]) {
    try {
      ConditionSpec s;
      auto id = parse_condition(c.at("id").get<std::string>());
      if (!id) throw Error(ErrorCode::config, "unknown condition '" + c.at("id").dump() + "'");
      s.id = *id;
      auto kind = parse_task_kind(c.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::config, "unknown task kind " + c.at("kind").dump());
      s.kind = *kind;
      s.hit_limit = c.at("hit_limit").get<std::size_t>();
      s.first_hit = composition_from(c.at("first_hit"));
      s.later_hits = composition_from(c.at("later_hits"));
      s.skip_allowed = c.value("skip_allowed", false);
      auto policy = parse_explanation_policy(c.value("explanation", std::string("none")));
      if (!policy) throw Error(ErrorCode::config, "unknown explanation policy");
      s.explanation = *policy;
      s.continuity = c.value("continuity", false);
      s.time_limit_minutes = c.value("time_limit_minutes", 20);
      if (s.kind == TaskKind::RuleBased &&
          (s.first_hit.task_size() != s.first_hit.unknown ||
           s.later_hits.task_size() != s.later_hits.unknown)) {
        throw Error(ErrorCode::config, "rule-based HITs only hold unknown task questions");
      }
      specs.push_back(s);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::config, std::string("condition table: ") + e.what());
    }
  }
  return ConditionTable(std::move(specs));
}

ConditionTable load_condition_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_condition_table(buf.str());
}

// --- dataset ------------------------------------------------------------------

const ActionSpec* Dataset::find_action(std::string_view action_id) const {
  for (const auto& a : actions) {
    if (a.action_id == action_id) return &a;
  }
  return nullptr;
}

namespace {

void check_references(const Dataset& d) {
  auto check_pair = [&](const std::string& state, const std::string& action, const char* what) {
    if (!d.states.contains(state)) {
      throw Error(ErrorCode::dangling_reference,
                  std::string(what) + " references missing state '" + state + "'");
    }
    if (d.find_action(action) == nullptr) {
      throw Error(ErrorCode::dangling_reference,
                  std::string(what) + " references missing action '" + action + "'");
    }
  };
  for (const auto& t : d.tutorial) check_pair(t.state_id, t.action_id, "tutorial");
  for (const auto& p : d.negative_gold) check_pair(p.state_id, p.action_id, "negative gold");
  for (const auto& e : d.rule_examples) {
    const ActionSpec* a = d.find_action(e.action_id);
    if (a == nullptr) {
      throw Error(ErrorCode::dangling_reference,
                  "rule example references missing action '" + e.action_id + "'");
    }
    const auto violations = validate_rule(parse_rule(e.rule), d.registry);
    if (!violations.empty()) {
      throw Error(violations.front().code, "rule example for '" + e.action_id +
                                               "': " + violations.front().message);
    }
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.states = load_states(dir / "states.jsonl");
  d.actions = load_actions(dir / "actions.jsonl", d.states);
  d.registry = load_predicates(dir / "predicates.jsonl");
  validate_dataset(d.states, d.registry);
  d.tutorial = load_tutorial(dir / "tutorial.jsonl");
  d.negative_gold = load_negative_gold(dir / "negative_gold.jsonl");
  d.rule_examples = load_rule_examples(dir / "rule_examples.jsonl");
  check_references(d);
  return d;
}

Dataset dataset_from_demo(const DemoData& demo) {
  Dataset d;
  d.states = demo.states;
  d.actions = demo.actions;
  d.registry = demo.predicates;
  d.tutorial = demo.tutorial;
  d.negative_gold = demo.negative_gold;
  d.rule_examples = demo.rule_examples;
  check_references(d);
  return d;
}

// --- questions and HITs -------------------------------------------------------

std::optional<bool> Question::gold_answer() const {
  switch (gold_kind) {
    case GoldKind::PositiveGold: return true;
    case GoldKind::NegativeGold:
    case GoldKind::FakeGold: return false;
    default: return std::nullopt;
  }
}

const Question* Hit::find(std::string_view question_id) const {
  for (const auto& q : questions) {
    if (q.question_id == question_id) return &q;
  }
  return nullptr;
}

ConditionId assign_condition(std::string_view worker_id, std::span<const ConditionId> active,
                             std::uint64_t seed) {
  if (active.empty()) throw Error(ErrorCode::config, "no active conditions");
  Rng rng(derive_seed(seed, {"assign", worker_id}));
  return active[static_cast<std::size_t>(rng.index(active.size()))];
}

ActionSpec fake_gold_action(std::size_t remaining) {
  ActionSpec a;
  a.action_id = std::string(kFakeGoldActionId);
  a.text = "Keep up the good work! You only have " + std::to_string(remaining) +
           " questions left before you complete this HIT!";
  a.is_fake_gold = true;
  return a;
}

namespace {

constexpr int kMaxDraws = 10000;

[[noreturn]] void exhausted(const std::string& what) {
  throw Error(ErrorCode::exhausted_pool, "cannot draw " + what);
}

using PairSet = std::set<std::pair<std::string, std::string>>;

PairSet pairs_of(const Hit& hit) {
  PairSet out;
  for (const auto& q : hit.questions) {
    if (q.gold_kind != GoldKind::FakeGold) out.emplace(q.state_id, q.action_id);
  }
  return out;
}

PairSet negative_pairs(const Dataset& d) {
  PairSet out;
  for (const auto& p : d.negative_gold) out.emplace(p.state_id, p.action_id);
  return out;
}

const State& random_state(const Dataset& d, Rng& rng) {
  return d.states.states()[static_cast<std::size_t>(rng.index(d.states.size()))];
}

Question positive_gold(const Dataset& d, Rng& rng, const PairSet& used,
                       const std::string* state = nullptr) {
  std::vector<const ActionSpec*> candidates;
  for (const auto& a : d.actions) {
    if (state != nullptr && a.known_valid_state != *state) continue;
    if (used.count({a.known_valid_state, a.action_id})) continue;
    candidates.push_back(&a);
  }
  if (candidates.empty()) exhausted("a positive gold question");
  const ActionSpec& a = *candidates[static_cast<std::size_t>(rng.index(candidates.size()))];
  Question q;
  q.gold_kind = GoldKind::PositiveGold;
  q.state_id = a.known_valid_state;
  q.action_id = a.action_id;
  q.action_text = a.text;
  return q;
}

// An unlabelled pair: never a known-valid pair, never an expert-labelled one.
Question unknown_pair(const Dataset& d, Rng& rng, const PairSet& used, const PairSet& negatives,
                      const std::string* state = nullptr) {
  for (int i = 0; i < kMaxDraws; ++i) {
    const ActionSpec& a = rng.pick(d.actions);
    const std::string& s = state != nullptr ? *state : random_state(d, rng).state_id;
    if (s == a.known_valid_state || used.count({s, a.action_id}) || negatives.count({s, a.action_id})) {
      continue;
    }
    Question q;
    q.gold_kind = GoldKind::None;
    q.state_id = s;
    q.action_id = a.action_id;
    q.action_text = a.text;
    return q;
  }
  exhausted("an unknown question");
}

Question fake_gold(const Dataset& d, Rng& rng, const std::string* state = nullptr) {
  Question q;
  q.gold_kind = GoldKind::FakeGold;
  q.state_id = state != nullptr ? *state : random_state(d, rng).state_id;
  q.action_id = std::string(kFakeGoldActionId);
  return q;
}

Question tutorial_question(const Dataset& d, const TutorialItem& t, Section section) {
  Question q;
  q.section = section;
  q.gold_kind = GoldKind::Tutorial;
  q.state_id = t.state_id;
  q.action_id = t.action_id;
  q.action_text = d.find_action(t.action_id)->text;
  q.given_answer = t.answer;
  q.given_explanation = t.explanation;
  return q;
}

// Draws `n` distinct indices from `pool` not in `taken`, marking them taken.
std::vector<std::size_t> draw_indices(std::size_t pool, std::size_t n, std::set<std::size_t>& taken,
                                      Rng& rng, const std::function<bool(std::size_t)>& ok,
                                      const char* what) {
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < pool; ++i) {
    if (!taken.count(i) && ok(i)) free.push_back(i);
  }
  if (free.size() < n) exhausted(std::to_string(n) + " " + what);
  rng.shuffle(free);
  free.resize(n);
  std::sort(free.begin(), free.end());
  for (auto i : free) taken.insert(i);
  return free;
}

void number_questions(Hit& hit) {
  for (std::size_t i = 0; i < hit.questions.size(); ++i) {
    hit.questions[i].question_id = hit.hit_id + ":q" + std::to_string(i + 1);
  }
}

// Fake-gold text counts the questions after it in the HIT.
void fill_fake_gold_text(Hit& hit) {
  for (std::size_t i = 0; i < hit.questions.size(); ++i) {
    if (hit.questions[i].gold_kind == GoldKind::FakeGold) {
      hit.questions[i].action_text = fake_gold_action(hit.questions.size() - i - 1).text;
    }
  }
}

Hit build_rule_hit(const ConditionSpec& spec, Hit hit, const Dataset& d, Rng& rng) {
  const Composition& c = spec.composition(hit.hit_index);
  std::set<std::size_t> taken;
  const auto examples = draw_indices(d.rule_examples.size(), c.tutorial, taken, rng,
                                     [](std::size_t) { return true; }, "rule examples");
  std::set<std::string> example_actions;
  for (auto i : examples) {
    const RuleExample& e = d.rule_examples[i];
    const ActionSpec* a = d.find_action(e.action_id);
    Question q;
    q.section = Section::Tutorial;
    q.gold_kind = GoldKind::Tutorial;
    q.state_id = a->known_valid_state;
    q.action_id = a->action_id;
    q.action_text = a->text;
    q.example_rule = e.rule;
    q.given_explanation = e.explanation;
    hit.questions.push_back(std::move(q));
    example_actions.insert(a->action_id);
  }
  std::set<std::size_t> used_actions;
  const auto picks = draw_indices(
      d.actions.size(), c.unknown, used_actions, rng,
      [&](std::size_t i) { return !example_actions.count(d.actions[i].action_id); }, "actions");
  std::vector<Question> task;
  for (auto i : picks) {
    Question q;
    q.gold_kind = GoldKind::None;
    q.state_id = d.actions[i].known_valid_state;
    q.action_id = d.actions[i].action_id;
    q.action_text = d.actions[i].text;
    task.push_back(std::move(q));
  }
  rng.shuffle(task);
  for (auto& q : task) hit.questions.push_back(std::move(q));
  number_questions(hit);
  return hit;
}

}  // namespace

Hit build_hit(const WorkerProfile& worker, const ConditionTable& table, const Dataset& d,
              Rng& rng) {
  const ConditionSpec& spec = table.at(worker.condition);
  Hit hit;
  hit.worker_id = worker.worker_id;
  hit.condition = worker.condition;
  hit.hit_index = worker.hits_issued + 1;
  hit.hit_id = worker.worker_id + ":h" + std::to_string(hit.hit_index);
  if (hit.hit_index > spec.hit_limit) {
    throw Error(ErrorCode::limit_exceeded, "worker '" + worker.worker_id + "' has reached the " +
                                               std::to_string(spec.hit_limit) + "-HIT limit");
  }
  if (d.actions.empty() || d.states.empty()) exhausted("questions from an empty dataset");
  if (spec.kind == TaskKind::RuleBased) return build_rule_hit(spec, std::move(hit), d, rng);

  const Composition& c = spec.composition(hit.hit_index);
  const PairSet negatives = negative_pairs(d);

  // Tutorial section, then given-answer questions, from the same fixture.
  std::set<std::size_t> tutorial_taken;
  for (auto i : draw_indices(d.tutorial.size(), c.tutorial, tutorial_taken, rng,
                             [](std::size_t) { return true; }, "tutorial items")) {
    hit.questions.push_back(tutorial_question(d, d.tutorial[i], Section::Tutorial));
  }
  std::vector<Question> task;
  for (bool answer : {true, false}) {
    const std::size_t n = answer ? c.given_yes : c.given_no;
    for (auto i : draw_indices(d.tutorial.size(), n, tutorial_taken, rng,
                               [&](std::size_t k) { return d.tutorial[k].answer == answer; },
                               "given-answer items")) {
      task.push_back(tutorial_question(d, d.tutorial[i], Section::Task));
    }
  }
  std::set<std::size_t> negative_taken;
  for (auto i : draw_indices(d.negative_gold.size(), c.negative_gold, negative_taken, rng,
                             [](std::size_t) { return true; }, "negative gold pairs")) {
    Question q;
    q.gold_kind = GoldKind::NegativeGold;
    q.state_id = d.negative_gold[i].state_id;
    q.action_id = d.negative_gold[i].action_id;
    q.action_text = d.find_action(q.action_id)->text;
    task.push_back(std::move(q));
  }

  PairSet used = pairs_of(hit);
  for (const auto& q : task) used.emplace(q.state_id, q.action_id);

  std::optional<std::string> anchor;
  for (std::size_t i = 0; i < c.positive_gold; ++i) {
    Question q = positive_gold(d, rng, used, anchor ? &*anchor : nullptr);
    if (spec.continuity && !anchor) anchor = q.state_id;
    used.emplace(q.state_id, q.action_id);
    task.push_back(std::move(q));
  }
  if (spec.continuity && !anchor) anchor = random_state(d, rng).state_id;
  const std::string* state = anchor ? &*anchor : nullptr;
  for (std::size_t i = 0; i < c.fake_gold; ++i) task.push_back(fake_gold(d, rng, state));
  for (std::size_t i = 0; i < c.unknown; ++i) {
    Question q = unknown_pair(d, rng, used, negatives, state);
    used.emplace(q.state_id, q.action_id);
    task.push_back(std::move(q));
  }

  rng.shuffle(task);
  for (auto& q : task) hit.questions.push_back(std::move(q));
  number_questions(hit);
  fill_fake_gold_text(hit);
  return hit;
}

Question handle_skip(const ConditionSpec& spec, const Hit& hit, const Question& q,
                     const Dataset& d, Rng& rng, std::string replacement_id) {
  if (!spec.skip_allowed) {
    throw Error(ErrorCode::condition_mismatch,
                "skipping is not part of condition '" + std::string(to_string(spec.id)) + "'");
  }
  std::size_t position = hit.questions.size();
  for (std::size_t i = 0; i < hit.questions.size(); ++i) {
    if (hit.questions[i].question_id == q.question_id) position = i;
  }
  if (position == hit.questions.size()) {
    throw Error(ErrorCode::not_found, "question '" + q.question_id + "' is not in " + hit.hit_id);
  }
  if (q.section != Section::Task || q.gold_kind == GoldKind::Tutorial) {
    throw Error(ErrorCode::condition_mismatch, "tutorial questions cannot be skipped");
  }

  PairSet used = pairs_of(hit);
  const std::string* state = spec.continuity ? &q.state_id : nullptr;
  Question r;
  switch (q.gold_kind) {
    case GoldKind::PositiveGold:
      r = positive_gold(d, rng, used, state);
      break;
    case GoldKind::FakeGold:
      // A fresh state; the text depends only on the position, which is kept.
      for (int i = 0; i < kMaxDraws; ++i) {
        r = fake_gold(d, rng, state);
        if (r.state_id != q.state_id || d.states.size() == 1 || state != nullptr) break;
      }
      r.action_text = fake_gold_action(hit.questions.size() - position - 1).text;
      break;
    case GoldKind::NegativeGold: {
      std::vector<const LabeledPair*> free;
      for (const auto& p : d.negative_gold) {
        if (!used.count({p.state_id, p.action_id})) free.push_back(&p);
      }
      if (free.empty()) exhausted("a replacement negative gold pair");
      const LabeledPair& p = *free[static_cast<std::size_t>(rng.index(free.size()))];
      r.gold_kind = GoldKind::NegativeGold;
      r.state_id = p.state_id;
      r.action_id = p.action_id;
      r.action_text = d.find_action(p.action_id)->text;
      break;
    }
    default:
      r = unknown_pair(d, rng, used, negative_pairs(d), state);
      break;
  }
  r.section = Section::Task;
  r.question_id = std::move(replacement_id);
  return r;
}

// --- explanation gate ---------------------------------------------------------

bool explanation_required(ExplanationPolicy policy, bool answer_yes) {
  return policy == ExplanationPolicy::TwoSided ||
         (policy == ExplanationPolicy::OneSided && answer_yes);
}

GateResult check_explanation(std::string_view text) {
  const TextStats s = text_stats(text);
  if (s.words == 0) return {false, "missing_explanation", false};
  if (s.words < kMinExplanationWords) return {false, "too_short", false};
  if (s.grade() < kMinExplanationGrade) return {false, "below_grade_level", false};
  return {true, "", true};
}

GateResult gate_explanation(std::string_view text, ExplanationPolicy policy, bool answer_yes) {
  if (!explanation_required(policy, answer_yes)) return {true, "", false};
  return check_explanation(text);
}

// --- filtering ----------------------------------------------------------------

FilterResult filter_workers(std::span<const ResponseRecord> responses,
                            std::span<const RuleSubmission> submissions, const Dataset& d,
                            FilterOptions options) {
  FilterResult out;
  std::map<std::string, WorkerFilter> failed;
  for (const auto& r : responses) {
    if (failed.count(r.worker_id) || r.answer == Answer::SkipReplaced) continue;
    const bool yes = r.answer == Answer::Yes;
    std::string reason;
    if (r.gold_kind == GoldKind::PositiveGold && !yes) reason = "answered no to positive gold";
    if (r.gold_kind == GoldKind::NegativeGold && yes) reason = "answered yes to negative gold";
    if (r.gold_kind == GoldKind::FakeGold && yes && options.filter_fake_gold) {
      reason = "answered yes to fake gold";
    }
    if (!reason.empty()) failed.emplace(r.worker_id, WorkerFilter{r.worker_id, reason, r.question_id});
  }
  for (const auto& r : responses) {
    if (!failed.count(r.worker_id)) out.responses.push_back(r);
  }
  for (const auto& [_, f] : failed) out.filtered_workers.push_back(f);

  for (const auto& s : submissions) {
    std::string reason;
    const ActionSpec* a = d.find_action(s.action_id);
    if (a == nullptr) {
      reason = "unknown action";
    } else {
      try {
        const RuleExpr rule = parse_rule(s.rule);
        if (!validate_rule(rule, d.registry).empty()) {
          reason = "invalid rule";
        } else if (!eval_rule(rule, d.states.at(a->known_valid_state), d.registry)) {
          reason = "rule excludes the known-valid state";
        }
      } catch (const Error& e) {
        reason = std::string("unreadable rule: ") + e.what();
      }
    }
    if (reason.empty()) {
      out.submissions.push_back(s);
    } else {
      out.rejected_submissions.push_back({s.worker_id, reason, s.question_id});
    }
  }
  return out;
}

// --- help ---------------------------------------------------------------------

HelpFeedback get_help(const BuilderState& b, const ActionSpec& action, const Dataset& d) {
  HelpFeedback h;
  if (b.phase() != Phase::Terminal) {
    h.stage = 1;
    h.kind = "prompt";
    switch (b.phase()) {
      case Phase::Start:
        h.message = "Start by choosing from the first dropdown: \"all states\", \"no states\" or "
                    "\"a state if\" to describe where the action applies.";
        break;
      case Phase::ArgSelect:
      case Phase::PredSelect:
        h.message = "Fill in the empty dropdown. Pick a value first and the matching conditions "
                    "will appear.";
        break;
      default:
        h.message = "Your rule can be finished now, or extended with AND / OR.";
        break;
    }
    return h;
  }

  const RuleExpr rule = finalize(b);
  const Partition p = partition(rule, d.states, d.registry);
  h.included = p.included.size();
  h.excluded = p.excluded.size();
  const bool keeps_known =
      std::binary_search(p.included.begin(), p.included.end(), action.known_valid_state);
  const double fraction = d.states.empty() ? 0.0
                                           : static_cast<double>(p.included.size()) /
                                                 static_cast<double>(d.states.size());
  h.stage = 2;
  h.kind = "warning";
  if (p.included.empty()) {
    h.message = "Your rule includes no states. It must at least include the state where the "
                "action is known to work.";
    return h;
  }
  if (!keeps_known) {
    h.message = "Your rule excludes the state where the action is known to work. Change it so "
                "that state is included.";
    return h;
  }
  if (fraction > kHelpBroadFraction) {
    h.message = "Your rule includes almost every state. Check whether the action really applies "
                "that broadly.";
    return h;
  }

  h.stage = 3;
  h.kind = "example";
  h.message = "Your rule passes the basic checks. Here is an expert rule for another action; try "
              "to rebuild it with the dropdowns to see how it is put together.";
  if (d.rule_examples.empty()) return h;
  std::size_t pick = static_cast<std::size_t>(derive_seed(0, {action.action_id}) %
                                              d.rule_examples.size());
  if (d.rule_examples[pick].action_id == action.action_id) {
    pick = (pick + 1) % d.rule_examples.size();
  }
  const RuleExample& e = d.rule_examples[pick];
  h.example_action_id = e.action_id;
  if (const ActionSpec* a = d.find_action(e.action_id)) h.example_action_text = a->text;
  h.example_rule = e.rule;
  h.example_explanation = e.explanation;
  const RuleExpr example = parse_rule(e.rule);
  if (example.is_expr()) {
    h.reconstruct_target = render_tokens(replay(dnf_to_actions(to_dnf(example), d.registry),
                                                d.registry),
                                         d.registry);
  } else {
    h.reconstruct_target = render_tokens(
        replay(std::vector<BuilderAction>{BuilderAction::choose_root(
                   example.kind() == RuleExpr::Kind::AllStates ? RootChoice::AllStates
                                                               : RootChoice::NoStates)},
               d.registry),
        d.registry);
  }
  return h;
}

}  // namespace crowdguard
