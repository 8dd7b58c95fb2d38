#include "crowdguard/analytics.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "jsonl.hpp"

namespace crowdguard {

namespace mp = boost::multiprecision;

std::string_view to_string(Tail t) {
  switch (t) {
    case Tail::Two: return "two";
    case Tail::Greater: return "greater";
    case Tail::Less: return "less";
  }
  return "two";
}

std::optional<Tail> parse_tail(std::string_view text) {
  if (text == "two") return Tail::Two;
  if (text == "greater" || text == "one") return Tail::Greater;
  if (text == "less") return Tail::Less;
  return std::nullopt;
}

namespace {

mp::cpp_int choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  mp::cpp_int r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

}  // namespace

FisherResult fisher_exact(const ContingencyTable& t, Tail tail) {
  const std::uint64_t r1 = t.a + t.b;
  const std::uint64_t r2 = t.c + t.d;
  const std::uint64_t c1 = t.a + t.c;
  const std::uint64_t n = r1 + r2;
  if (r1 == 0 || r2 == 0 || c1 == 0 || c1 == n) return {};

  // P(X = x) is C(r1, x) C(r2, c1 - x) / C(n, c1); only numerators differ.
  const std::uint64_t lo = c1 > r2 ? c1 - r2 : 0;
  const std::uint64_t hi = std::min(r1, c1);
  auto weight = [&](std::uint64_t x) { return choose(r1, x) * choose(r2, c1 - x); };
  const mp::cpp_int observed = weight(t.a);
  mp::cpp_int sum = 0;
  for (std::uint64_t x = lo; x <= hi; ++x) {
    switch (tail) {
      case Tail::Two: {
        mp::cpp_int w = weight(x);
        if (w <= observed) sum += w;
        break;
      }
      case Tail::Greater:
        if (x >= t.a) sum += weight(x);
        break;
      case Tail::Less:
        if (x <= t.a) sum += weight(x);
        break;
    }
  }
  const mp::cpp_rational p(sum, choose(n, c1));
  FisherResult r;
  r.p = std::min(1.0, p.convert_to<double>());
  r.exact = p.str();
  return r;
}

Ratio precision(std::span<const JudgmentRecord> judgments) {
  if (judgments.empty()) throw Error(ErrorCode::empty_input, "precision of no judgments");
  Ratio r{0, judgments.size()};
  for (const auto& j : judgments) r.num += j.correct ? 1 : 0;
  return r;
}

Ratio positive_rate(std::span<const ResponseRecord> responses) {
  Ratio r{0, 0};
  for (const auto& x : responses) {
    if (x.answer == Answer::SkipReplaced) continue;
    r.den += 1;
    r.num += x.answer == Answer::Yes ? 1 : 0;
  }
  if (r.den == 0) throw Error(ErrorCode::empty_input, "positive rate of no answers");
  return r;
}

std::vector<Positive> collect_positives(const FilterResult& retained, const Dataset& data) {
  std::vector<Positive> out;
  for (const auto& r : retained.responses) {
    if (r.section != Section::Task || r.gold_kind != GoldKind::None || r.answer != Answer::Yes) continue;
    out.push_back({r.question_id, r.worker_id, r.condition, r.state_id, r.action_id});
  }
  for (const auto& s : retained.submissions) {
    const ActionSpec* action = data.find_action(s.action_id);
    const Partition p = partition(parse_rule(s.rule), data.states, data.registry);
    for (const auto& state_id : p.included) {
      if (action != nullptr && state_id == action->known_valid_state) continue;
      out.push_back({s.question_id + "#" + state_id, s.worker_id, s.condition, state_id, s.action_id});
    }
  }
  return out;
}

std::vector<JudgmentRecord> judge_with_oracle(std::span<const Positive> positives,
                                              const GroundTruth& truth, const Dataset& data,
                                              const std::string& judge_id) {
  std::map<std::string, const RuleExpr*> rules;
  for (const auto& [action_id, rule] : truth) rules.emplace(action_id, &rule);
  std::vector<JudgmentRecord> out;
  out.reserve(positives.size());
  for (const auto& p : positives) {
    auto it = rules.find(p.action_id);
    if (it == rules.end()) throw Error(ErrorCode::not_found, "no hidden rule for " + p.action_id);
    out.push_back({p.ref, eval_rule(*it->second, data.states.at(p.state_id), data.registry), judge_id});
  }
  return out;
}

// --- blinded judging ----------------------------------------------------------

BlindedExport export_blinded(std::span<const Positive> positives, const Dataset& data,
                             std::size_t sample_size, std::uint64_t seed) {
  std::vector<std::size_t> order(positives.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  BlindedExport out;
  out.clamped = sample_size > positives.size();
  const std::size_t n = std::min(sample_size, positives.size());
  for (std::size_t k = 0; k < n; ++k) {
    const Positive& p = positives[order[k]];
    char id[32];
    std::snprintf(id, sizeof id, "j%04zu", k + 1);
    const ActionSpec* action = data.find_action(p.action_id);
    out.items.push_back({id, data.states.at(p.state_id).render, action ? action->text : p.action_id});
    out.key.push_back({id, p});
  }
  return out;
}

void write_blinded_items(std::ostream& out, std::span<const BlindedItem> items) {
  for (const auto& i : items) {
    out << Json{{"blinded_id", i.blinded_id}, {"state_render", i.state_render},
                {"action_text", i.action_text}}
               .dump()
        << '\n';
  }
}

void write_blinded_key(std::ostream& out, std::span<const BlindedKeyEntry> key) {
  for (const auto& k : key) {
    out << Json{{"blinded_id", k.blinded_id},
                {"ref", k.positive.ref},
                {"worker_id", k.positive.worker_id},
                {"condition", to_string(k.positive.condition)},
                {"state_id", k.positive.state_id},
                {"action_id", k.positive.action_id}}
               .dump()
        << '\n';
  }
}

std::vector<BlindedKeyEntry> read_blinded_key(std::istream& in) {
  std::vector<BlindedKeyEntry> out;
  jsonl::for_each_record(in, [&](const Json& j, std::size_t line) {
    BlindedKeyEntry e;
    e.blinded_id = jsonl::string_field(j, "blinded_id", line);
    e.positive.ref = jsonl::string_field(j, "ref", line);
    e.positive.worker_id = jsonl::string_field(j, "worker_id", line);
    const auto c = parse_condition(jsonl::string_field(j, "condition", line));
    if (!c) throw Error(ErrorCode::parse, "unknown condition", line);
    e.positive.condition = *c;
    e.positive.state_id = jsonl::string_field(j, "state_id", line);
    e.positive.action_id = jsonl::string_field(j, "action_id", line);
    out.push_back(std::move(e));
  });
  return out;
}

std::vector<JudgmentRecord> read_judgments(std::istream& in, std::span<const BlindedKeyEntry> key) {
  std::map<std::string, const Positive*> by_id;
  for (const auto& k : key) by_id.emplace(k.blinded_id, &k.positive);
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<JudgmentRecord> out;
  jsonl::for_each_record(in, [&](const Json& j, std::size_t line) {
    const std::string id = jsonl::string_field(j, "blinded_id", line);
    const std::string verdict = jsonl::string_field(j, "verdict", line);
    if (verdict != "correct" && verdict != "incorrect") {
      throw Error(ErrorCode::parse, "verdict must be correct or incorrect", line);
    }
    const std::string judge =
        j.contains("judge_id") ? jsonl::string_field(j, "judge_id", line) : std::string("judge");
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::not_found, "blinded id '" + id + "' not in key", line);
    if (!seen.emplace(id, judge).second) {
      throw Error(ErrorCode::duplicate_id, "second verdict for '" + id + "' by " + judge, line);
    }
    out.push_back({it->second->ref, verdict == "correct", judge});
  });
  return out;
}

void write_judgments(std::ostream& out, std::span<const JudgmentRecord> judgments,
                     std::span<const BlindedKeyEntry> key) {
  std::map<std::string, std::string> id_of;
  for (const auto& k : key) id_of.emplace(k.positive.ref, k.blinded_id);
  for (const auto& j : judgments) {
    auto it = id_of.find(j.ref);
    if (it == id_of.end()) continue;
    out << Json{{"blinded_id", it->second},
                {"verdict", j.correct ? "correct" : "incorrect"},
                {"judge_id", j.judge_id}}
               .dump()
        << '\n';
  }
}

// --- report -------------------------------------------------------------------

Report build_report(const ReportInput& in) {
  if (in.data == nullptr) throw Error(ErrorCode::config, "report needs the dataset");
  Report rep;
  rep.tail = in.tail;
  const FilterResult kept = filter_workers(in.responses, in.submissions, *in.data, in.filter);
  const std::vector<Positive> positives = collect_positives(kept, *in.data);

  std::map<ConditionId, ConditionRow> rows;
  std::map<ConditionId, std::set<std::string>> workers;
  std::map<std::string, ConditionId> condition_of;
  for (const auto& r : in.responses) {
    workers[r.condition].insert(r.worker_id);
    condition_of.emplace(r.worker_id, r.condition);
  }
  for (const auto& s : in.submissions) {
    workers[s.condition].insert(s.worker_id);
    condition_of.emplace(s.worker_id, s.condition);
  }
  for (const auto& [c, ws] : workers) {
    rows[c].condition = c;
    rows[c].workers = ws.size();
  }
  for (const auto& f : kept.filtered_workers) {
    if (auto it = condition_of.find(f.worker_id); it != condition_of.end()) {
      rows[it->second].workers_filtered += 1;
    }
  }
  std::map<ConditionId, std::vector<ResponseRecord>> answers;
  for (const auto& r : kept.responses) {
    if (r.section != Section::Task || r.gold_kind != GoldKind::None) continue;
    if (r.answer == Answer::SkipReplaced) continue;
    answers[r.condition].push_back(r);
  }
  for (const auto& s : kept.submissions) rows[s.condition].answers_retained += 1;
  for (auto& [c, list] : answers) {
    rows[c].answers_retained += list.size();
    rows[c].positive_rate = positive_rate(list);
  }

  std::map<std::string, const Positive*> by_ref;
  for (const auto& p : positives) {
    by_ref.emplace(p.ref, &p);
    rows[p.condition].positives += 1;
  }
  std::map<ConditionId, std::vector<JudgmentRecord>> judged;
  std::size_t stray = 0;
  for (const auto& j : in.judgments) {
    auto it = by_ref.find(j.ref);
    if (it == by_ref.end()) {
      ++stray;
      continue;
    }
    judged[it->second->condition].push_back(j);
  }
  for (auto& [c, row] : rows) {
    auto it = judged.find(c);
    if (it == judged.end() || it->second.empty()) continue;
    row.precision = precision(it->second);
    row.judged = row.precision->den;
    row.correct = row.precision->num;
  }

  if (in.judgments.empty()) {
    rep.warnings.push_back("no judgments imported; precision is n/a for every condition");
  }
  std::size_t unjudged = 0;
  for (const auto& [c, row] : rows) unjudged += row.positives - std::min(row.positives, row.judged);
  if (!in.judgments.empty() && unjudged > 0) {
    rep.warnings.push_back(std::to_string(unjudged) + " positives have no judgment");
  }
  if (stray > 0) {
    rep.warnings.push_back(std::to_string(stray) + " judgments refer to filtered or unknown positives");
  }

  for (auto& [c, row] : rows) rep.rows.push_back(row);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    for (std::size_t k = i + 1; k < rep.rows.size(); ++k) {
      const ConditionRow& x = rep.rows[i];
      const ConditionRow& y = rep.rows[k];
      PairwiseTest t;
      t.first = x.condition;
      t.second = y.condition;
      t.table = {x.correct, x.judged - x.correct, y.correct, y.judged - y.correct};
      t.result = fisher_exact(t.table, in.tail);
      rep.tests.push_back(std::move(t));
    }
  }
  return rep;
}

namespace {

Json ratio_json(const std::optional<Ratio>& r) {
  if (!r) return nullptr;
  return {{"num", r->num}, {"den", r->den}, {"value", r->value()}, {"text", r->text()}};
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

Json report_to_json(const Report& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"condition", to_string(row.condition)},
                    {"workers", row.workers},
                    {"workers_filtered", row.workers_filtered},
                    {"answers_retained", row.answers_retained},
                    {"positives", row.positives},
                    {"judged", row.judged},
                    {"correct", row.correct},
                    {"precision", ratio_json(row.precision)},
                    {"positive_rate", ratio_json(row.positive_rate)}});
  }
  Json tests = Json::array();
  for (const auto& t : r.tests) {
    tests.push_back({{"first", to_string(t.first)},
                     {"second", to_string(t.second)},
                     {"table", {{t.table.a, t.table.b}, {t.table.c, t.table.d}}},
                     {"p", t.result.p},
                     {"p_exact", t.result.exact}});
  }
  return {{"tail", to_string(r.tail)},
          {"conditions", std::move(rows)},
          {"pairwise", std::move(tests)},
          {"warnings", r.warnings}};
}

std::string report_svg(const Report& r) {
  const int bar = 48;
  const int gap = 24;
  const int height = 240;
  const int top = 20;
  const int width = std::max<int>(200, static_cast<int>(r.rows.size()) * (bar + gap) + gap);
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
    << height + 80 << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<text x=\"" << gap << "\" y=\"14\">precision of retained positives</text>\n";
  s << "<line x1=\"0\" y1=\"" << top + height << "\" x2=\"" << width << "\" y2=\"" << top + height
    << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    const int x = gap + static_cast<int>(i) * (bar + gap);
    const std::string name = xml_escape(to_string(row.condition));
    if (row.precision) {
      const int h = static_cast<int>(row.precision->value() * height + 0.5);
      s << "<rect x=\"" << x << "\" y=\"" << top + height - h << "\" width=\"" << bar
        << "\" height=\"" << h << "\" fill=\"#4a7ab5\"><title>" << name << " "
        << row.precision->text() << "</title></rect>\n";
      char label[16];
      std::snprintf(label, sizeof label, "%.2f", row.precision->value());
      s << "<text x=\"" << x << "\" y=\"" << top + height - h - 4 << "\">" << label << "</text>\n";
    } else {
      s << "<text x=\"" << x << "\" y=\"" << top + height - 4 << "\">n/a</text>\n";
    }
    s << "<text x=\"" << x << "\" y=\"" << top + height + 14 << "\" transform=\"rotate(30 " << x
      << " " << top + height + 14 << ")\">" << name << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace crowdguard
