#pragma once

// Seeded worker populations that drive the service through its /v1 handler.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdguard/analytics.hpp"
#include "crowdguard/orchestration.hpp"
#include "crowdguard/wire.hpp"

namespace crowdguard {

enum class PersonaKind { Diligent, LazyYes, LazyNo, Random, RuleWriter };
std::string_view to_string(PersonaKind k);
std::optional<PersonaKind> parse_persona_kind(std::string_view text);

struct PersonaSpec {
  PersonaKind kind = PersonaKind::Diligent;
  std::size_t count = 0;
  // diligent: chance of answering with the truth.
  double accuracy = 1.0;
  // random: chance of "yes".
  double yes_prob = 0.5;
  // Chance of pressing skip where skipping is allowed.
  double skip_prob = 0.0;
  // rule_writer: per-literal chance of a perturbed literal.
  double noise = 0.0;
};

struct Population {
  std::vector<PersonaSpec> personas;
  // Active conditions; empty means every condition in the table.
  std::vector<ConditionId> conditions;
};

// {"personas":[{"kind":"diligent","count":20,"accuracy":0.9}, ...],
//  "conditions":["fake_gold"]}. Throws Error(config).
Population parse_population(const Json& j);
Population load_population(const std::filesystem::path& path);

// Explanations written by simulated workers; each passes the gate.
const std::vector<std::string>& explanation_templates();

struct SimulationOptions {
  std::uint64_t seed = 7;
  // When set the service persists to this log.
  std::filesystem::path event_log;
  // Stress mode: workers run on this many threads against one service.
  std::size_t threads = 0;
};

struct SimulatedWorker {
  std::string worker_id;
  PersonaKind persona = PersonaKind::Diligent;
  ConditionId condition = ConditionId::Baseline;
  std::size_t hits = 0;
};

struct SimConditionStats {
  ConditionId condition = ConditionId::Baseline;
  std::size_t workers = 0;
  std::size_t workers_filtered = 0;
  // persona name -> [workers, filtered]
  std::map<std::string, std::pair<std::size_t, std::size_t>> personas;
  std::size_t positives_unfiltered = 0;
  std::size_t correct_unfiltered = 0;
  std::size_t positives_filtered = 0;
  std::size_t correct_filtered = 0;
};

struct SimulationReport {
  std::vector<SimConditionStats> conditions;
  std::optional<Ratio> precision_unfiltered;
  std::optional<Ratio> precision_filtered;
};

struct SimulationResult {
  std::vector<SimulatedWorker> workers;
  std::vector<ResponseRecord> responses;
  std::vector<RuleSubmission> submissions;
  std::size_t requests = 0;
  // Materialized service state at the end of the run.
  Json snapshot;
};

// Deterministic for a fixed (population, dataset, table, seed) unless
// running threaded.
SimulationResult simulate(const Population& population, const Dataset& data,
                          const GroundTruth& truth, const ConditionTable& table,
                          const SimulationOptions& options);

// Oracle-judged precision with and without worker filtering.
SimulationReport simulation_report(const SimulationResult& result, const Dataset& data,
                                   const GroundTruth& truth, FilterOptions filter = {});
Json simulation_report_json(const SimulationReport& r);

// Literal-level perturbation of a rule used by noisy rule writers.
DnfExpr perturb_dnf(const DnfExpr& dnf, double noise, const PredicateRegistry& registry, Rng& rng);

}  // namespace crowdguard
