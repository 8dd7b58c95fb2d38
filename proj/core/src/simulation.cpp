#include "crowdguard/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "crowdguard/service.hpp"

namespace crowdguard {

std::string_view to_string(PersonaKind k) {
  switch (k) {
    case PersonaKind::Diligent: return "diligent";
    case PersonaKind::LazyYes: return "lazy_yes";
    case PersonaKind::LazyNo: return "lazy_no";
    case PersonaKind::Random: return "random";
    case PersonaKind::RuleWriter: return "rule_writer";
  }
  return "diligent";
}

std::optional<PersonaKind> parse_persona_kind(std::string_view text) {
  for (PersonaKind k : {PersonaKind::Diligent, PersonaKind::LazyYes, PersonaKind::LazyNo,
                        PersonaKind::Random, PersonaKind::RuleWriter}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

Population parse_population(const Json& j) {
  auto bad = [](const std::string& why) { return Error(ErrorCode::config, "population: " + why); };
  if (!j.is_object() || !j.contains("personas") || !j["personas"].is_array()) {
    throw bad("expected {\"personas\": [...]}");
  }
  Population pop;
  for (const auto& p : j["personas"]) {
    if (!p.is_object()) throw bad("persona must be an object");
    PersonaSpec s;
    const auto kind = p.value("kind", Json()).is_string()
                          ? parse_persona_kind(p["kind"].get<std::string>())
                          : std::nullopt;
    if (!kind) throw bad("unknown persona kind " + p.value("kind", Json()).dump());
    s.kind = *kind;
    if (!p.contains("count") || !p["count"].is_number_unsigned()) throw bad("count must be >= 0");
    s.count = p["count"].get<std::size_t>();
    auto prob = [&](const char* name, double& out) {
      if (!p.contains(name)) return;
      if (!p[name].is_number()) throw bad(std::string(name) + " must be a number");
      out = p[name].get<double>();
      if (!(out >= 0.0 && out <= 1.0)) throw bad(std::string(name) + " must be in [0, 1]");
    };
    prob("accuracy", s.accuracy);
    prob("yes_prob", s.yes_prob);
    prob("skip_prob", s.skip_prob);
    prob("noise", s.noise);
    pop.personas.push_back(s);
  }
  if (j.contains("conditions")) {
    if (!j["conditions"].is_array()) throw bad("conditions must be a list");
    for (const auto& c : j["conditions"]) {
      const auto id = c.is_string() ? parse_condition(c.get<std::string>()) : std::nullopt;
      if (!id) throw bad("unknown condition " + c.dump());
      pop.conditions.push_back(*id);
    }
  }
  return pop;
}

Population load_population(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::config, "cannot read population '" + path.string() + "'");
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::config, "population '" + path.string() + "' is not JSON");
  return parse_population(j);
}

const std::vector<std::string>& explanation_templates() {
  static const std::vector<std::string> bank = [] {
    std::vector<std::string> t = {
        "The suggestion matches the diagram, because the student already organized the "
        "quantities correctly.",
        "Considering the current diagram, this particular hint would probably help the student "
        "continue.",
        "The student would understand this recommendation immediately, since it describes the "
        "visible information.",
        "Nothing in the diagram contradicts the instruction, so following it seems completely "
        "reasonable.",
        "Following this instruction would probably confuse the student, because the diagram "
        "already differs.",
        "The recommendation describes quantities that are absent, which makes the instruction "
        "misleading here.",
    };
    for (const auto& s : t) {
      if (!check_explanation(s).accepted) {
        throw std::logic_error("explanation template fails the gate: " + s);
      }
    }
    return t;
  }();
  return bank;
}

DnfExpr perturb_dnf(const DnfExpr& dnf, double noise, const PredicateRegistry& registry, Rng& rng) {
  if (noise <= 0.0) return dnf;
  const std::vector<Literal> atoms = registry.atoms();
  DnfExpr out = dnf;
  for (auto& clause : out.clauses) {
    for (auto& lit : clause) {
      if (!rng.bernoulli(noise)) continue;
      Literal swap = rng.pick(atoms);
      swap.negated = rng.bernoulli(0.5);
      lit = std::move(swap);
    }
  }
  return out;
}

namespace {

struct Oracle {
  std::map<std::string, const RuleExpr*> rules;
  const Dataset* data = nullptr;

  bool truth(const Json& q) const {
    if (q.contains("given_answer")) return q["given_answer"] == "yes";
    const std::string action_id = q["action"]["action_id"].get<std::string>();
    if (action_id == kFakeGoldActionId) return false;
    auto it = rules.find(action_id);
    if (it == rules.end()) throw Error(ErrorCode::not_found, "no hidden rule for " + action_id);
    const std::string state_id = q["state"]["state_id"].get<std::string>();
    return eval_rule(*it->second, data->states.at(state_id), data->registry);
  }
};

class Driver {
 public:
  Driver(Service& service, const Oracle& oracle, std::uint64_t seed, std::atomic<std::size_t>& requests)
      : service_(service), oracle_(oracle), seed_(seed), requests_(requests) {}

  SimulatedWorker run(const std::string& worker_id, const PersonaSpec& persona) {
    Rng rng(derive_seed(seed_, {"persona", worker_id}));
    SimulatedWorker out;
    out.worker_id = worker_id;
    out.persona = persona.kind;
    const Json session = expect(call("POST", "/v1/session", {{"worker_id", worker_id}}), 200);
    out.condition = *parse_condition(session["condition"].get<std::string>());
    const std::string token = session["token"].get<std::string>();
    while (true) {
      Request req{"GET", "/v1/task/next", {{"token", token}}, ""};
      const Response r = send(req);
      if (r.status == 410 || r.status == 503) break;
      const Json hit = expect(r, 200);
      out.hits += 1;
      if (hit["task_kind"] == "rule_based") {
        write_rules(token, hit, persona, rng);
      } else {
        answer_all(token, hit, persona, rng);
      }
    }
    return out;
  }

 private:
  Response send(const Request& req) {
    requests_.fetch_add(1);
    return service_.handle(req);
  }

  Response call(const std::string& method, const std::string& path, const Json& body) {
    return send(Request{method, path, {}, body.dump()});
  }

  static Json expect(const Response& r, int status) {
    if (r.status != status) {
      throw Error(ErrorCode::config, "simulation: unexpected status " + std::to_string(r.status) +
                                         ": " + r.body.dump());
    }
    return r.body;
  }

  bool decide(const PersonaSpec& p, bool truth, Rng& rng) {
    switch (p.kind) {
      case PersonaKind::Diligent: return rng.bernoulli(p.accuracy) ? truth : !truth;
      case PersonaKind::RuleWriter: return rng.bernoulli(1.0 - p.noise) ? truth : !truth;
      case PersonaKind::LazyYes: return true;
      case PersonaKind::LazyNo: return false;
      case PersonaKind::Random: return rng.bernoulli(p.yes_prob);
    }
    return truth;
  }

  void answer_all(const std::string& token, const Json& hit, const PersonaSpec& p, Rng& rng) {
    const auto policy = *parse_explanation_policy(hit["explanation_policy"].get<std::string>());
    const bool skip_allowed = hit["skip_allowed"].get<bool>();
    for (const auto& first : hit["questions"]) {
      if (first["answered"].get<bool>()) continue;
      Json q = first;
      // A replacement can be skipped again; the cap keeps a skip-happy
      // persona from looping.
      for (int skips = 0;; ++skips) {
        const bool task = q["section"] == "task";
        if (task && skip_allowed && skips < 3 && rng.bernoulli(p.skip_prob)) {
          const Json r = expect(call("POST", "/v1/response",
                                     {{"token", token},
                                      {"question_id", q["question_id"]},
                                      {"answer", "skip"}}),
                                200);
          q = r["replacement"];
          continue;
        }
        const bool yes = decide(p, oracle_.truth(q), rng);
        Json body = {{"token", token}, {"question_id", q["question_id"]}, {"answer", yes ? "yes" : "no"}};
        if (task && explanation_required(policy, yes)) {
          body["explanation"] = rng.pick(explanation_templates());
        }
        const Json r = expect(call("POST", "/v1/response", body), 200);
        if (r["status"] != "accepted") {
          throw Error(ErrorCode::config, "simulation: answer not accepted: " + r.dump());
        }
        break;
      }
    }
  }

  void write_rules(const std::string& token, const Json& hit, const PersonaSpec& p, Rng& rng) {
    const Dataset& data = *oracle_.data;
    for (const auto& q : hit["questions"]) {
      if (q["section"] != "task" || q["submitted"].get<bool>()) continue;
      std::vector<BuilderAction> actions;
      const std::string action_id = q["action"]["action_id"].get<std::string>();
      if (p.kind == PersonaKind::RuleWriter || p.kind == PersonaKind::Diligent) {
        const double noise = p.kind == PersonaKind::RuleWriter ? p.noise : 1.0 - p.accuracy;
        const DnfExpr target = perturb_dnf(to_dnf(*oracle_.rules.at(action_id)), noise, data.registry, rng);
        actions = dnf_to_actions(target, data.registry);
      } else if (p.kind == PersonaKind::LazyNo) {
        actions = {BuilderAction::choose_root(RootChoice::NoStates)};
      } else {
        actions = {BuilderAction::choose_root(RootChoice::AllStates)};
      }
      Json body = {{"token", token}, {"question_id", q["question_id"]},
                   {"actions", actions_to_json(actions)}};
      Json r = expect(call("POST", "/v1/rule/submit", body), 200);
      if (r["status"] == "accepted") continue;
      // Rejected: give up on precision and include everything.
      const BuilderAction all = BuilderAction::choose_root(RootChoice::AllStates);
      body["actions"] = actions_to_json(std::span<const BuilderAction>(&all, 1));
      r = expect(call("POST", "/v1/rule/submit", body), 200);
      if (r["status"] != "accepted") {
        throw Error(ErrorCode::config, "simulation: fallback rule rejected: " + r.dump());
      }
    }
  }

  Service& service_;
  const Oracle& oracle_;
  std::uint64_t seed_;
  std::atomic<std::size_t>& requests_;
};

}  // namespace

SimulationResult simulate(const Population& population, const Dataset& data,
                          const GroundTruth& truth, const ConditionTable& table,
                          const SimulationOptions& options) {
  explanation_templates();
  Oracle oracle;
  oracle.data = &data;
  for (const auto& [action_id, rule] : truth) oracle.rules.emplace(action_id, &rule);

  auto tick = std::make_shared<std::atomic<std::int64_t>>(0);
  ServiceOptions so;
  so.seed = options.seed;
  so.active_conditions = population.conditions;
  so.event_log = options.event_log;
  // Logical time keeps logs byte-identical across runs.
  so.clock = [tick] { return tick->fetch_add(1) + 1; };
  Service service(data, table, so);

  std::vector<std::pair<std::string, const PersonaSpec*>> roster;
  for (const auto& p : population.personas) {
    for (std::size_t i = 0; i < p.count; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "w%03zu", roster.size() + 1);
      roster.emplace_back(id, &p);
    }
  }

  std::atomic<std::size_t> requests{0};
  SimulationResult result;
  result.workers.resize(roster.size());
  if (options.threads == 0) {
    Driver driver(service, oracle, options.seed, requests);
    for (std::size_t i = 0; i < roster.size(); ++i) {
      result.workers[i] = driver.run(roster[i].first, *roster[i].second);
    }
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(options.threads);
    for (std::size_t t = 0; t < options.threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          Driver driver(service, oracle, options.seed, requests);
          for (std::size_t i = t; i < roster.size(); i += options.threads) {
            result.workers[i] = driver.run(roster[i].first, *roster[i].second);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  const ExperimentState state = service.state();
  result.responses = state.responses();
  result.submissions = state.submissions();
  result.snapshot = state.snapshot();
  result.requests = requests.load();
  return result;
}

SimulationReport simulation_report(const SimulationResult& result, const Dataset& data,
                                   const GroundTruth& truth, FilterOptions filter) {
  SimulationReport rep;
  FilterResult everything;
  everything.responses = result.responses;
  everything.submissions = result.submissions;
  const FilterResult kept = filter_workers(result.responses, result.submissions, data, filter);

  std::set<std::string> filtered;
  for (const auto& f : kept.filtered_workers) filtered.insert(f.worker_id);

  std::map<ConditionId, SimConditionStats> rows;
  std::map<std::string, ConditionId> condition_of;
  for (const auto& w : result.workers) {
    auto& row = rows[w.condition];
    row.condition = w.condition;
    row.workers += 1;
    auto& persona = row.personas[std::string(to_string(w.persona))];
    persona.first += 1;
    if (filtered.count(w.worker_id)) {
      row.workers_filtered += 1;
      persona.second += 1;
    }
    condition_of.emplace(w.worker_id, w.condition);
  }

  auto tally = [&](const FilterResult& fr, bool after_filter) {
    const auto positives = collect_positives(fr, data);
    const auto verdicts = judge_with_oracle(positives, truth, data);
    std::optional<Ratio> pooled;
    for (std::size_t i = 0; i < positives.size(); ++i) {
      auto& row = rows[positives[i].condition];
      row.condition = positives[i].condition;
      (after_filter ? row.positives_filtered : row.positives_unfiltered) += 1;
      if (verdicts[i].correct) (after_filter ? row.correct_filtered : row.correct_unfiltered) += 1;
    }
    if (!verdicts.empty()) pooled = precision(verdicts);
    return pooled;
  };
  rep.precision_unfiltered = tally(everything, false);
  rep.precision_filtered = tally(kept, true);
  for (auto& [c, row] : rows) rep.conditions.push_back(std::move(row));
  return rep;
}

Json simulation_report_json(const SimulationReport& r) {
  auto ratio = [](std::size_t num, std::size_t den) -> Json {
    if (den == 0) return nullptr;
    return {{"num", num}, {"den", den}, {"value", static_cast<double>(num) / static_cast<double>(den)}};
  };
  Json rows = Json::array();
  for (const auto& c : r.conditions) {
    Json personas = Json::object();
    for (const auto& [name, counts] : c.personas) {
      personas[name] = {{"workers", counts.first}, {"filtered", counts.second}};
    }
    rows.push_back({{"condition", to_string(c.condition)},
                    {"workers", c.workers},
                    {"workers_filtered", c.workers_filtered},
                    {"personas", std::move(personas)},
                    {"precision_unfiltered", ratio(c.correct_unfiltered, c.positives_unfiltered)},
                    {"precision_filtered", ratio(c.correct_filtered, c.positives_filtered)}});
  }
  auto pooled = [&](const std::optional<Ratio>& x) -> Json {
    return x ? ratio(x->num, x->den) : Json();
  };
  return {{"conditions", std::move(rows)},
          {"pooled",
           {{"precision_unfiltered", pooled(r.precision_unfiltered)},
            {"precision_filtered", pooled(r.precision_filtered)}}}};
}

}  // namespace crowdguard
