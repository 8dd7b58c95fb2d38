#include <benchmark/benchmark.h>

#include "crowdguard/analytics.hpp"
#include "crowdguard/builder.hpp"
#include "crowdguard/fixtures.hpp"
#include "crowdguard/readability.hpp"
#include "crowdguard/service.hpp"
#include "crowdguard/simulation.hpp"

namespace cg = crowdguard;

namespace {

const cg::Dataset& data() {
  static const cg::Dataset d = cg::load_dataset(CROWDGUARD_DATA_DIR);
  return d;
}

const cg::GroundTruth& truth() {
  static const cg::GroundTruth t =
      cg::load_ground_truth(std::string(CROWDGUARD_DATA_DIR) + "/ground_truth.jsonl");
  return t;
}

// A three-clause rule over the demo predicates.
cg::DnfExpr sample_dnf() {
  const auto atoms = data().registry.atoms();
  cg::DnfExpr d;
  d.clauses = {{atoms[0], atoms[5]}, {atoms[9]}, {atoms[13], atoms[20], atoms[2]}};
  return d;
}

void BM_Partition540(benchmark::State& state) {
  const cg::RuleExpr r = sample_dnf().to_rule();
  for (auto _ : state) benchmark::DoNotOptimize(cg::partition(r, data().states, data().registry));
}
BENCHMARK(BM_Partition540);

void BM_DnfToActionsReplay(benchmark::State& state) {
  const cg::DnfExpr d = sample_dnf();
  for (auto _ : state) {
    const auto actions = cg::dnf_to_actions(d, data().registry);
    benchmark::DoNotOptimize(cg::replay(actions, data().registry));
  }
}
BENCHMARK(BM_DnfToActionsReplay);

void BM_Equivalent(benchmark::State& state) {
  const cg::RuleExpr r = sample_dnf().to_rule();
  const cg::RuleExpr d = cg::to_dnf(r).to_rule();
  for (auto _ : state) benchmark::DoNotOptimize(cg::equivalent(r, d));
}
BENCHMARK(BM_Equivalent);

void BM_FisherExact(benchmark::State& state) {
  const auto n = static_cast<std::uint64_t>(state.range(0));
  const cg::ContingencyTable t{n / 3, n / 6, n / 4, n - n / 3 - n / 6 - n / 4};
  for (auto _ : state) benchmark::DoNotOptimize(cg::fisher_exact(t));
}
BENCHMARK(BM_FisherExact)->Arg(40)->Arg(200)->Arg(1000);

void BM_ExplanationGate(benchmark::State& state) {
  const std::string text = "The action tells the student to add a six block that already exists in the diagram.";
  for (auto _ : state) benchmark::DoNotOptimize(cg::check_explanation(text));
}
BENCHMARK(BM_ExplanationGate);

void BM_PreviewRequest(benchmark::State& state) {
  cg::Service s(data(), cg::ConditionTable::standard(), {});
  const cg::Json body = {{"actions", cg::actions_to_json(cg::dnf_to_actions(sample_dnf(), data().registry))}};
  const cg::Request req{"POST", "/v1/rule/preview", {}, body.dump()};
  for (auto _ : state) benchmark::DoNotOptimize(s.handle(req));
}
BENCHMARK(BM_PreviewRequest);

void BM_Simulate40Workers(benchmark::State& state) {
  const cg::Population p{{{cg::PersonaKind::LazyYes, 20}, {cg::PersonaKind::Diligent, 20, 0.9}},
                         {cg::ConditionId::FakeGold}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(cg::simulate(p, data(), truth(), cg::ConditionTable::standard(), {}));
  }
}
BENCHMARK(BM_Simulate40Workers)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
