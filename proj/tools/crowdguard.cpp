// crowdguard: serve the /v1 API, run simulated populations, export blinded
// judging files, build reports, compile DNF rules into builder actions and
// regenerate the demo dataset.

#include <csignal>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "crowdguard/analytics.hpp"
#include "crowdguard/builder.hpp"
#include "crowdguard/demo.hpp"
#include "crowdguard/fixtures.hpp"
#include "crowdguard/service.hpp"
#include "crowdguard/simulation.hpp"
#include "crowdguard/wire.hpp"

namespace fs = std::filesystem;
using namespace crowdguard;

namespace {

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

std::ofstream create(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read '" + path.string() + "'");
  return in;
}

ConditionTable table_from(const std::string& path) {
  return path.empty() ? ConditionTable::standard() : load_condition_table(path);
}

std::vector<ResponseRecord> responses_from(const std::string& path) {
  if (path.empty()) return {};
  auto in = open(path);
  return read_responses(in);
}

std::vector<RuleSubmission> submissions_from(const std::string& path) {
  if (path.empty()) return {};
  auto in = open(path);
  return read_submissions(in);
}

int serve(const std::string& config_path, int port_override) {
  ServiceConfig config = load_service_config(config_path);
  if (port_override >= 0) config.port = port_override;
  auto service = make_service(config);
  HttpServer server(*service);
  const int port = server.bind(config.host, config.port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on http://" << config.host << ":" << port << "/v1" << std::endl;
  server.listen();
  g_server = nullptr;
  return 0;
}

struct SimulateArgs {
  std::string population;
  std::string data = "data";
  std::string conditions;
  std::string out = "sim-out";
  std::uint64_t seed = 7;
  std::size_t threads = 0;
  bool keep_fake_gold = false;
};

int simulate_cmd(const SimulateArgs& a) {
  const Population pop = load_population(a.population);
  const Dataset data = load_dataset(a.data);
  const GroundTruth truth = load_ground_truth(fs::path(a.data) / "ground_truth.jsonl");
  const fs::path out(a.out);
  fs::create_directories(out);
  fs::remove(out / "events.jsonl");
  SimulationOptions options;
  options.seed = a.seed;
  options.threads = a.threads;
  options.event_log = out / "events.jsonl";
  const SimulationResult result = simulate(pop, data, truth, table_from(a.conditions), options);
  {
    auto f = create(out / "responses.jsonl");
    write_responses(f, result.responses);
  }
  {
    auto f = create(out / "rules.jsonl");
    write_submissions(f, result.submissions);
  }
  FilterOptions filter;
  filter.filter_fake_gold = !a.keep_fake_gold;
  const Json report = simulation_report_json(simulation_report(result, data, truth, filter));
  {
    auto f = create(out / "simulation_report.json");
    f << report.dump(2) << '\n';
  }
  std::cout << result.workers.size() << " workers, " << result.responses.size() << " responses, "
            << result.submissions.size() << " rules, " << result.requests << " requests\n"
            << "pooled precision (unfiltered -> filtered): "
            << report["pooled"]["precision_unfiltered"].value("value", 0.0) << " -> "
            << report["pooled"]["precision_filtered"].value("value", 0.0) << "\n"
            << "wrote " << out.string() << "/{events,responses,rules}.jsonl and simulation_report.json\n";
  return 0;
}

struct ExportArgs {
  std::string responses;
  std::string rules;
  std::string data = "data";
  std::size_t sample = 100;
  std::uint64_t seed = 1;
  std::string out = "judging.jsonl";
  std::string key = "judging_key.jsonl";
  std::string oracle_judgments;
  bool keep_fake_gold = false;
};

int judge_export(const ExportArgs& a) {
  const Dataset data = load_dataset(a.data);
  const auto responses = responses_from(a.responses);
  const auto submissions = submissions_from(a.rules);
  FilterOptions filter;
  filter.filter_fake_gold = !a.keep_fake_gold;
  const FilterResult kept = filter_workers(responses, submissions, data, filter);
  const auto positives = collect_positives(kept, data);
  const BlindedExport ex = export_blinded(positives, data, a.sample, a.seed);
  {
    auto f = create(a.out);
    write_blinded_items(f, ex.items);
  }
  {
    auto f = create(a.key);
    write_blinded_key(f, ex.key);
  }
  std::cout << "exported " << ex.items.size() << " of " << positives.size() << " positives to "
            << a.out << " (key: " << a.key << ")\n";
  if (ex.clamped) std::cout << "note: sample larger than the population; exported all\n";
  if (!a.oracle_judgments.empty()) {
    const GroundTruth truth = load_ground_truth(fs::path(a.data) / "ground_truth.jsonl");
    std::vector<Positive> sampled;
    for (const auto& k : ex.key) sampled.push_back(k.positive);
    const auto verdicts = judge_with_oracle(sampled, truth, data);
    auto f = create(a.oracle_judgments);
    write_judgments(f, verdicts, ex.key);
    std::cout << "oracle verdicts written to " << a.oracle_judgments << "\n";
  }
  return 0;
}

struct AnalyzeArgs {
  std::string responses;
  std::string rules;
  std::string judgments;
  std::string key = "judging_key.jsonl";
  std::string data = "data";
  std::string tail = "two";
  std::string out = "report.json";
  std::string svg;
  bool keep_fake_gold = false;
};

int analyze(const AnalyzeArgs& a) {
  const auto tail = parse_tail(a.tail);
  if (!tail) throw Error(ErrorCode::config, "--tail must be two, one, greater or less");
  const Dataset data = load_dataset(a.data);
  const auto responses = responses_from(a.responses);
  const auto submissions = submissions_from(a.rules);
  std::vector<JudgmentRecord> judgments;
  if (!a.judgments.empty()) {
    auto kin = open(a.key);
    const auto key = read_blinded_key(kin);
    auto jin = open(a.judgments);
    judgments = read_judgments(jin, key);
  }
  ReportInput in;
  in.responses = responses;
  in.submissions = submissions;
  in.data = &data;
  in.judgments = judgments;
  in.filter.filter_fake_gold = !a.keep_fake_gold;
  in.tail = *tail;
  const Report report = build_report(in);
  {
    auto f = create(a.out);
    f << report_to_json(report).dump(2) << '\n';
  }
  if (!a.svg.empty()) {
    auto f = create(a.svg);
    f << report_svg(report);
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& row : report.rows) {
    std::cout << to_string(row.condition) << ": workers " << row.workers << " (filtered "
              << row.workers_filtered << "), positives " << row.positives << ", precision "
              << (row.precision ? row.precision->text() : std::string("n/a")) << "\n";
  }
  for (const auto& t : report.tests) {
    std::cout << to_string(t.first) << " vs " << to_string(t.second) << ": p = " << t.result.p
              << "\n";
  }
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

int compile_dnf(const std::string& expr, const std::string& predicates, bool as_json) {
  const PredicateRegistry registry = load_predicates(predicates);
  const DnfExpr dnf = parse_dnf(expr);
  const auto actions = dnf_to_actions(dnf, registry);
  const BuilderState b = replay(actions, registry);
  const std::string render = render_tokens(b, registry);
  if (as_json) {
    std::cout << Json{{"actions", actions_to_json(actions)}, {"render", render}}.dump(2) << "\n";
    return 0;
  }
  for (std::size_t i = 0; i < actions.size(); ++i) {
    std::cout << i + 1 << ". " << describe(actions[i]) << "  " << action_to_json(actions[i]).dump()
              << "\n";
  }
  std::cout << render << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crowdguard: constraint elicitation experiments"};
  app.require_subcommand(1);

  std::string config;
  int port = -1;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd->add_option("--config", config, "Service config file")->required();
  serve_cmd->add_option("--port", port, "Override the configured port");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a simulated worker population");
  sim_cmd->add_option("--population", sim.population, "Population file")->required();
  sim_cmd->add_option("--seed", sim.seed, "Seed");
  sim_cmd->add_option("--data", sim.data, "Dataset directory (with ground_truth.jsonl)");
  sim_cmd->add_option("--conditions", sim.conditions, "Condition table (default: built in)");
  sim_cmd->add_option("--out", sim.out, "Output directory");
  sim_cmd->add_option("--threads", sim.threads, "Stress mode: concurrent worker threads");
  sim_cmd->add_flag("--keep-fake-gold-failures", sim.keep_fake_gold,
                    "Do not filter workers on fake gold");

  ExportArgs ex;
  auto* ex_cmd = app.add_subcommand("judge-export", "Sample retained positives for blinded judging");
  ex_cmd->add_option("--responses", ex.responses, "responses.jsonl");
  ex_cmd->add_option("--rules", ex.rules, "rules.jsonl");
  ex_cmd->add_option("--data", ex.data, "Dataset directory");
  ex_cmd->add_option("--sample", ex.sample, "Sample size");
  ex_cmd->add_option("--seed", ex.seed, "Seed");
  ex_cmd->add_option("--out", ex.out, "Judging file to write");
  ex_cmd->add_option("--key", ex.key, "Key file to write (keep away from judges)");
  ex_cmd->add_option("--oracle-judgments", ex.oracle_judgments,
                     "Also write verdicts from the hidden rules (simulations only)");
  ex_cmd->add_flag("--keep-fake-gold-failures", ex.keep_fake_gold,
                   "Do not filter workers on fake gold");

  AnalyzeArgs an;
  auto* an_cmd = app.add_subcommand("analyze", "Precision report with pairwise Fisher tests");
  an_cmd->add_option("--responses", an.responses, "responses.jsonl");
  an_cmd->add_option("--rules", an.rules, "rules.jsonl");
  an_cmd->add_option("--judgments", an.judgments, "Verdict file");
  an_cmd->add_option("--key", an.key, "Key written by judge-export");
  an_cmd->add_option("--data", an.data, "Dataset directory");
  an_cmd->add_option("--tail", an.tail, "two, one (= greater), greater or less");
  an_cmd->add_option("--out", an.out, "Report file");
  an_cmd->add_option("--svg", an.svg, "Precision chart");
  an_cmd->add_flag("--keep-fake-gold-failures", an.keep_fake_gold,
                   "Do not filter workers on fake gold");

  std::string expr;
  std::string predicates;
  bool as_json = false;
  auto* dnf_cmd = app.add_subcommand("compile-dnf", "Builder actions that produce a rule");
  dnf_cmd->add_option("--expr", expr, "Rule text")->required();
  dnf_cmd->add_option("--predicates", predicates, "predicates.jsonl")->required();
  dnf_cmd->add_flag("--json", as_json, "Print JSON");

  std::string demo_out = "data";
  std::uint64_t demo_seed = 20190127;
  auto* demo_cmd = app.add_subcommand("demo-data", "Regenerate the synthetic dataset");
  demo_cmd->add_option("--out", demo_out, "Output directory");
  demo_cmd->add_option("--seed", demo_seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(config, port);
    if (*sim_cmd) return simulate_cmd(sim);
    if (*ex_cmd) return judge_export(ex);
    if (*an_cmd) return analyze(an);
    if (*dnf_cmd) return compile_dnf(expr, predicates, as_json);
    if (*demo_cmd) {
      write_demo(generate_demo(demo_seed), demo_out);
      std::cout << "wrote demo dataset to " << demo_out << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what();
    if (e.line()) std::cerr << " at line " << *e.line();
    std::cerr << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
