#include "crowdguard/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

namespace crowdguard {

namespace {

Response reply(int status, Json body) { return Response{status, std::move(body)}; }

Response fail(int status, std::string_view error, const std::string& message = {}) {
  Json j = {{"error", error}};
  if (!message.empty()) j["message"] = message;
  return reply(status, std::move(j));
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse:
    case ErrorCode::missing_field:
    case ErrorCode::type_mismatch: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::condition_mismatch: return 409;
    case ErrorCode::limit_exceeded: return 410;
    case ErrorCode::illegal_action:
    case ErrorCode::terminal_state:
    case ErrorCode::unknown_predicate:
    case ErrorCode::domain_violation: return 422;
    case ErrorCode::exhausted_pool: return 503;
    default: return 500;
  }
}

std::optional<std::string> string_field(const Json& body, const char* name) {
  auto it = body.find(name);
  if (it == body.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

Json state_ref(const State& s) { return {{"state_id", s.state_id}, {"render", s.render}}; }

struct Built {
  std::optional<BuilderState> state;
  std::optional<Response> error;
};

// Shared by preview, submit and help: 422 names the first bad action.
Built build_from(const Json& body, const PredicateRegistry& registry) {
  Built out;
  auto it = body.find("actions");
  if (it == body.end()) {
    out.error = fail(400, "missing_field", "'actions' is required");
    return out;
  }
  std::size_t index = 0;
  try {
    const auto actions = actions_from_json(*it, &index);
    out.state = replay(actions, registry, &index);
  } catch (const Error& e) {
    out.error = reply(422, {{"error", to_string(e.code())}, {"index", index}, {"message", e.what()}});
  }
  return out;
}

const std::vector<std::pair<std::string, std::string>>& glossary_terms() {
  static const std::vector<std::pair<std::string, std::string>> terms = {
      {"state", "A situation the agent sees, shown as a picture of the student's diagram."},
      {"action", "A hint or intervention the agent may give in a state."},
      {"rule", "A description of every state where an action is fine to take."},
      {"literal", "One condition about a state, such as \"the level is at least 3\"."},
      {"AND", "Both conditions must hold."},
      {"OR", "At least one of the conditions must hold."},
      {"inner / outer",
       "Where a new AND or OR attaches: inside the innermost parentheses or around them."},
      {"known valid state", "A state where the action is known to be fine. Your rule must include it."},
      {"included states", "States your rule says the action applies to."},
      {"excluded states", "States your rule says the action does not apply to."},
  };
  return terms;
}

}  // namespace

Clock system_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

// --- config -------------------------------------------------------------------

ServiceConfig parse_service_config(const Json& j, const std::filesystem::path& base_dir) {
  auto bad = [](const std::string& key, const std::string& why) -> Error {
    return Error(ErrorCode::config, "config '" + key + "': " + why);
  };
  if (!j.is_object()) throw Error(ErrorCode::config, "config must be a JSON object");
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  ServiceConfig c;
  bool have_data = false;
  for (const auto& [key, v] : j.items()) {
    if (key == "host") {
      if (!v.is_string()) throw bad(key, "expected a string");
      c.host = v.get<std::string>();
    } else if (key == "port") {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || v.get<std::int64_t>() > 65535) {
        throw bad(key, "expected an integer in 0..65535");
      }
      c.port = v.get<int>();
    } else if (key == "data_dir") {
      if (!v.is_string()) throw bad(key, "expected a path");
      c.data_dir = resolve(v.get<std::string>());
      have_data = true;
    } else if (key == "conditions") {
      if (!v.is_string()) throw bad(key, "expected a path");
      c.conditions = resolve(v.get<std::string>());
    } else if (key == "event_log") {
      if (!v.is_string()) throw bad(key, "expected a path");
      c.event_log = resolve(v.get<std::string>());
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) throw bad(key, "expected a non-negative integer");
      c.seed = v.get<std::uint64_t>();
    } else if (key == "active_conditions") {
      if (!v.is_array()) throw bad(key, "expected a list of condition names");
      for (const auto& name : v) {
        const auto id = name.is_string() ? parse_condition(name.get<std::string>()) : std::nullopt;
        if (!id) throw bad(key, "unknown condition " + name.dump());
        c.active_conditions.push_back(*id);
      }
    } else if (key == "filter_fake_gold") {
      if (!v.is_boolean()) throw bad(key, "expected true or false");
      c.filter_fake_gold = v.get<bool>();
    } else {
      throw bad(key, "unknown key");
    }
  }
  if (!have_data) throw bad("data_dir", "required");
  return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::config, "cannot read config '" + path.string() + "'");
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::config, "config '" + path.string() + "' is not valid JSON");
  return parse_service_config(j, path.parent_path());
}

// --- service ------------------------------------------------------------------

Service::Service(Dataset data, ConditionTable table, ServiceOptions options)
    : data_(std::move(data)), table_(std::move(table)), options_(std::move(options)),
      state_(table_) {
  if (!options_.clock) options_.clock = system_clock();
  if (options_.active_conditions.empty()) {
    for (const auto& [id, spec] : table_.specs()) options_.active_conditions.push_back(id);
  }
  for (ConditionId id : options_.active_conditions) table_.at(id);
  if (!options_.event_log.empty()) {
    const auto events = EventLog::read(options_.event_log);
    state_ = replay_events(events, table_);
    std::uint64_t next = 1;
    if (!events.empty() && events.back().contains("seq")) {
      next = events.back()["seq"].get<std::uint64_t>() + 1;
    }
    log_ = std::make_unique<EventLog>(options_.event_log, next);
  }
}

ExperimentState Service::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

Json Service::snapshot() const {
  std::lock_guard lock(mu_);
  return state_.snapshot();
}

void Service::record(Json event) {
  if (log_) event = log_->append(std::move(event));
  state_.apply(event);
}

std::string Service::make_token(const std::string& worker_id) const {
  char buf[24];
  std::snprintf(buf, sizeof buf, "t-%016llx",
                static_cast<unsigned long long>(derive_seed(options_.seed, {"token", worker_id})));
  return buf;
}

Response Service::handle(const Request& req) {
  const std::string prefix(kApiPrefix);
  if (req.path.rfind(prefix + "/", 0) != 0) return fail(404, "not_found", "no route " + req.path);
  const std::string route = req.path.substr(prefix.size());

  static const std::map<std::string, std::string> kMethods = {
      {"/session", "POST"},      {"/task/next", "GET"},   {"/response", "POST"},
      {"/rule/preview", "POST"}, {"/rule/submit", "POST"}, {"/help", "POST"},
      {"/glossary", "GET"},      {"/health", "GET"}};
  auto m = kMethods.find(route);
  if (m == kMethods.end()) return fail(404, "not_found", "no route " + req.path);
  if (m->second != req.method) return fail(405, "method_not_allowed", "use " + m->second);

  try {
    if (req.method == "GET") {
      if (route == "/glossary") return glossary();
      if (route == "/health") return reply(200, {{"status", "ok"}});
      return next_task(req);
    }
    Json body = Json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      return fail(400, "malformed_body", "request body must be a JSON object");
    }
    if (route == "/rule/preview") return preview(body);
    if (route == "/help") return help(body);
    if (route == "/session") return session(body);
    if (route == "/response") return respond(body);
    return submit(body);
  } catch (const Error& e) {
    return fail(status_for(e.code()), to_string(e.code()), e.what());
  } catch (const Json::exception& e) {
    return fail(400, "malformed_body", e.what());
  } catch (const std::exception& e) {
    return fail(500, "internal", e.what());
  }
}

const std::string* Service::worker_of(const Json& body) const {
  const auto token = string_field(body, "token");
  return token ? state_.worker_for_token(*token) : nullptr;
}

Response Service::session(const Json& body) {
  const auto worker_id = string_field(body, "worker_id");
  if (!worker_id || worker_id->empty()) {
    return fail(400, "malformed_body", "'worker_id' must be a non-empty string");
  }
  std::lock_guard lock(mu_);
  const WorkerProfile* w = state_.worker(*worker_id);
  const bool created = w == nullptr;
  if (created) {
    // Sticky: the first stored assignment wins, whatever the active set is later.
    const ConditionId c = assign_condition(*worker_id, options_.active_conditions, options_.seed);
    record(events::worker_assigned(*worker_id, c, make_token(*worker_id), options_.clock()));
    w = state_.worker(*worker_id);
  }
  const ConditionSpec& spec = table_.at(w->condition);
  const IssuedHit* open = state_.open_hit(w->worker_id);
  return reply(200, {{"token", state_.token_for(w->worker_id)},
                     {"worker_id", w->worker_id},
                     {"condition", to_string(w->condition)},
                     {"task_kind", to_string(spec.kind)},
                     {"hit_index", open ? open->hit.hit_index : w->hits_issued + 1},
                     {"hit_limit", spec.hit_limit},
                     {"hits_completed", w->hits_completed},
                     {"time_limit_minutes", spec.time_limit_minutes},
                     {"created", created}});
}

Json Service::question_payload(const Question& q, const ConditionSpec& spec) const {
  Json j = {{"question_id", q.question_id},
            {"section", to_string(q.section)},
            {"state", state_ref(data_.states.at(q.state_id))},
            {"action", {{"action_id", q.action_id}, {"text", q.action_text}}}};
  if (q.given_answer) {
    j["given_answer"] = *q.given_answer ? "yes" : "no";
    j["given_explanation"] = q.given_explanation;
  }
  if (!q.example_rule.empty()) j["example_rule"] = q.example_rule;
  if (spec.kind == TaskKind::RuleBased) {
    j["known_valid_state"] = state_ref(data_.states.at(q.state_id));
    j["submitted"] = state_.submission(q.question_id) != nullptr;
  } else {
    const ResponseRecord* r = state_.response(q.question_id);
    j["answered"] = r != nullptr;
  }
  return j;
}

Json Service::task_payload(const IssuedHit& h, const ConditionSpec& spec) const {
  Json qs = Json::array();
  for (const auto& q : h.hit.questions) qs.push_back(question_payload(q, spec));
  return {{"hit_id", h.hit.hit_id},
          {"hit_index", h.hit.hit_index},
          {"hit_limit", spec.hit_limit},
          {"condition", to_string(h.hit.condition)},
          {"task_kind", to_string(spec.kind)},
          {"skip_allowed", spec.skip_allowed},
          {"explanation_policy", to_string(spec.explanation)},
          {"continuity", spec.continuity},
          {"time_limit_minutes", spec.time_limit_minutes},
          {"issued_at", h.issued_at},
          {"expires_at", h.issued_at + std::int64_t{spec.time_limit_minutes} * 60000},
          {"questions", std::move(qs)}};
}

Response Service::next_task(const Request& req) {
  auto t = req.query.find("token");
  std::lock_guard lock(mu_);
  const std::string* worker_id = t == req.query.end() ? nullptr : state_.worker_for_token(t->second);
  if (worker_id == nullptr) return fail(401, "unknown_token");
  const WorkerProfile& w = *state_.worker(*worker_id);
  const ConditionSpec& spec = table_.at(w.condition);
  if (const IssuedHit* open = state_.open_hit(w.worker_id)) return reply(200, task_payload(*open, spec));
  if (w.hits_issued >= spec.hit_limit) {
    return fail(410, "limit_exceeded",
                "the limit of " + std::to_string(spec.hit_limit) + " HITs has been reached");
  }
  Rng rng(derive_seed(options_.seed, {"hit", w.worker_id, std::to_string(w.hits_issued + 1)}));
  Hit hit = build_hit(w, table_, data_, rng);
  const std::string hit_id = hit.hit_id;
  record(events::hit_issued(hit, options_.clock()));
  return reply(200, task_payload(*state_.hit(hit_id), spec));
}

Response Service::respond(const Json& body) {
  const auto question_id = string_field(body, "question_id");
  const auto answer = string_field(body, "answer");
  std::lock_guard lock(mu_);
  const std::string* worker_id = worker_of(body);
  if (worker_id == nullptr) return fail(401, "unknown_token");
  if (!question_id || !answer || (*answer != "yes" && *answer != "no" && *answer != "skip")) {
    return fail(400, "malformed_body", "need 'question_id' and 'answer' (yes, no or skip)");
  }
  if (body.contains("explanation") && !body["explanation"].is_string() && !body["explanation"].is_null()) {
    return fail(400, "malformed_body", "'explanation' must be a string");
  }
  const IssuedHit* h = state_.hit_of_question(*question_id);
  if (h == nullptr || h->hit.worker_id != *worker_id) return fail(404, "not_found", "unknown question");
  const WorkerProfile& w = *state_.worker(*worker_id);
  const ConditionSpec& spec = table_.at(w.condition);
  if (spec.kind == TaskKind::RuleBased) {
    return fail(409, "condition_mismatch", "rule-based HITs take rules, not answers");
  }
  if (const Question* rep = state_.replacement_for(*question_id)) {
    return reply(200, {{"status", "replaced"}, {"duplicate", true},
                       {"replacement", question_payload(*rep, spec)}});
  }
  if (const ResponseRecord* prior = state_.response(*question_id)) {
    return reply(200, {{"status", "accepted"}, {"duplicate", true},
                       {"answer", to_string(prior->answer)}});
  }
  const Question& q = *h->hit.find(*question_id);

  ResponseRecord r;
  r.worker_id = w.worker_id;
  r.hit_id = h->hit.hit_id;
  r.question_id = q.question_id;
  r.condition = w.condition;
  r.section = q.section;
  r.gold_kind = q.gold_kind;
  r.state_id = q.state_id;
  r.action_id = q.action_id;
  r.timestamp = options_.clock();

  if (*answer == "skip") {
    const std::string hit_id = h->hit.hit_id;
    const std::string replacement_id =
        hit_id + ":q" + std::to_string(h->hit.questions.size() + h->replaced.size() + 1);
    Rng rng(derive_seed(options_.seed, {"skip", q.question_id}));
    Question rep = handle_skip(spec, h->hit, q, data_, rng, replacement_id);
    r.answer = Answer::SkipReplaced;
    record(events::question_replaced(hit_id, r.question_id, rep, r));
    return reply(200, {{"status", "replaced"}, {"replacement", question_payload(rep, spec)}});
  }

  const bool yes = *answer == "yes";
  r.answer = yes ? Answer::Yes : Answer::No;
  const std::string text = body.value("explanation", Json()).is_string()
                               ? body["explanation"].get<std::string>()
                               : std::string();
  // Tutorial questions come with the expert answer, so they are not gated.
  if (q.section == Section::Task) {
    const GateResult gate = gate_explanation(text, spec.explanation, yes);
    if (!gate.accepted) {
      return reply(200, {{"status", "gate_rejected"}, {"reason", gate.reason}});
    }
    if (gate.keep) r.explanation = text;
  }
  const std::string hit_id = r.hit_id;
  record(events::response_recorded(r));
  return reply(200, {{"status", "accepted"},
                     {"hit_complete", state_.hit_complete(hit_id)},
                     {"hits_completed", state_.worker(w.worker_id)->hits_completed}});
}

Response Service::preview(const Json& body) const {
  Built built = build_from(body, data_.registry);
  if (built.error) return *built.error;
  const BuilderState& b = *built.state;
  std::uint64_t cursor = 0;
  if (body.contains("cursor")) {
    if (!body["cursor"].is_number_unsigned()) return fail(400, "malformed_body", "'cursor' must be >= 0");
    cursor = body["cursor"].get<std::uint64_t>();
  }
  const bool complete = b.phase() == Phase::Terminal;
  Json j = {{"phase", to_string(b.phase())},
            {"render", render_tokens(b, data_.registry)},
            {"tokens", tokens_to_json(b, data_.registry)},
            {"options", complete ? Json::array() : actions_to_json(options(b, data_.registry))},
            {"complete", complete},
            {"cursor", cursor},
            {"included_count", nullptr},
            {"excluded_count", nullptr},
            {"exemplars", {{"included", nullptr}, {"excluded", nullptr}}}};
  if (!complete) return reply(200, std::move(j));
  const RuleExpr rule = finalize(b);
  const Partition p = partition(rule, data_.states, data_.registry);
  j["rule"] = to_text(rule);
  j["included_count"] = p.included.size();
  j["excluded_count"] = p.excluded.size();
  if (!p.included.empty()) {
    j["exemplars"]["included"] = state_ref(exemplar_state(p.included, cursor, data_.states));
  }
  if (!p.excluded.empty()) {
    j["exemplars"]["excluded"] = state_ref(exemplar_state(p.excluded, cursor, data_.states));
  }
  if (const auto action_id = string_field(body, "action_id")) {
    if (const ActionSpec* a = data_.find_action(*action_id)) {
      j["includes_known_valid_state"] =
          std::binary_search(p.included.begin(), p.included.end(), a->known_valid_state);
    }
  }
  return reply(200, std::move(j));
}

Response Service::submit(const Json& body) {
  const auto question_id = string_field(body, "question_id");
  std::lock_guard lock(mu_);
  const std::string* worker_id = worker_of(body);
  if (worker_id == nullptr) return fail(401, "unknown_token");
  if (!question_id) return fail(400, "malformed_body", "'question_id' is required");
  const IssuedHit* h = state_.hit_of_question(*question_id);
  if (h == nullptr || h->hit.worker_id != *worker_id) return fail(404, "not_found", "unknown question");
  const WorkerProfile& w = *state_.worker(*worker_id);
  const Question& q = *h->hit.find(*question_id);
  if (table_.at(w.condition).kind != TaskKind::RuleBased || q.section != Section::Task) {
    return fail(409, "condition_mismatch", "this question does not take a rule");
  }
  if (const RuleSubmission* prior = state_.submission(*question_id)) {
    return reply(200, {{"status", "accepted"}, {"duplicate", true}, {"rule", prior->rule},
                       {"included_count", prior->included}});
  }
  Built built = build_from(body, data_.registry);
  if (built.error) return *built.error;
  const BuilderState& b = *built.state;
  if (b.phase() != Phase::Terminal) {
    return reply(200, {{"status", "rejected"}, {"reason", "incomplete"}});
  }
  const RuleExpr rule = finalize(b);
  const auto violations = validate_rule(rule, data_.registry);
  if (!violations.empty()) {
    Json msgs = Json::array();
    for (const auto& v : violations) msgs.push_back(v.message);
    return reply(200, {{"status", "rejected"}, {"reason", "invalid"}, {"violations", msgs}});
  }
  const ActionSpec* action = data_.find_action(q.action_id);
  if (action == nullptr) return fail(404, "not_found", "unknown action " + q.action_id);
  const Partition p = partition(rule, data_.states, data_.registry);
  if (!std::binary_search(p.included.begin(), p.included.end(), action->known_valid_state)) {
    return reply(200, {{"status", "rejected"},
                       {"reason", "excludes_known_valid_state"},
                       {"known_valid_state", action->known_valid_state}});
  }
  RuleSubmission s;
  s.worker_id = w.worker_id;
  s.hit_id = h->hit.hit_id;
  s.question_id = q.question_id;
  s.action_id = q.action_id;
  s.condition = w.condition;
  s.rule = to_text(rule);
  s.included = p.included.size();
  s.timestamp = options_.clock();
  const std::string hit_id = s.hit_id;
  record(events::rule_submitted(s));
  return reply(200, {{"status", "accepted"},
                     {"rule", s.rule},
                     {"included_count", s.included},
                     {"hit_complete", state_.hit_complete(hit_id)},
                     {"hits_completed", state_.worker(w.worker_id)->hits_completed}});
}

Response Service::help(const Json& body) const {
  const auto action_id = string_field(body, "action_id");
  if (!action_id) return fail(400, "malformed_body", "'action_id' is required");
  const ActionSpec* action = data_.find_action(*action_id);
  if (action == nullptr) return fail(404, "not_found", "unknown action " + *action_id);
  Built built = build_from(body, data_.registry);
  if (built.error) return *built.error;
  return reply(200, help_to_json(get_help(*built.state, *action, data_)));
}

Response Service::glossary() const {
  Json terms = Json::array();
  for (const auto& [term, def] : glossary_terms()) {
    terms.push_back({{"term", term}, {"definition", def}});
  }
  Json preds = Json::array();
  for (const auto& p : data_.registry.predicates()) {
    Json slots = Json::array();
    for (const auto& s : p.arg_slots) slots.push_back({{"name", s.name}, {"domain", s.domain}});
    preds.push_back({{"predicate_id", p.predicate_id},
                     {"display", p.display_template},
                     {"negated_display", p.negated_display},
                     {"slots", std::move(slots)}});
  }
  return reply(200, {{"terms", std::move(terms)}, {"predicates", std::move(preds)}});
}

std::unique_ptr<Service> make_service(const ServiceConfig& config, Clock clock) {
  Dataset data = load_dataset(config.data_dir);
  ConditionTable table =
      config.conditions.empty() ? ConditionTable::standard() : load_condition_table(config.conditions);
  ServiceOptions options;
  options.seed = config.seed;
  options.active_conditions = config.active_conditions;
  options.event_log = config.event_log;
  options.clock = std::move(clock);
  return std::make_unique<Service>(std::move(data), std::move(table), std::move(options));
}

}  // namespace crowdguard
