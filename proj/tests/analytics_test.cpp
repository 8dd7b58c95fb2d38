#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "crowdguard/analytics.hpp"
#include "crowdguard/fixtures.hpp"

namespace crowdguard {
namespace {

// Independent reference: log-gamma hypergeometric probabilities summed over
// every table with the same margins.
long double log_choose(long double n, long double k) {
  return std::lgammal(n + 1) - std::lgammal(k + 1) - std::lgammal(n - k + 1);
}

double brute_fisher(const ContingencyTable& t, Tail tail) {
  const long double r1 = t.a + t.b;
  const long double r2 = t.c + t.d;
  const long double c1 = t.a + t.c;
  const long double n = r1 + r2;
  if (r1 == 0 || r2 == 0 || c1 == 0 || c1 == n) return 1.0;
  const long double denom = log_choose(n, c1);
  auto prob = [&](long double x) {
    return std::exp(log_choose(r1, x) + log_choose(r2, c1 - x) - denom);
  };
  const long double lo = std::max<long double>(0, c1 - r2);
  const long double hi = std::min(r1, c1);
  const long double observed = prob(t.a);
  long double sum = 0;
  for (long double x = lo; x <= hi; x += 1) {
    const long double p = prob(x);
    switch (tail) {
      case Tail::Two:
        if (p <= observed * (1 + 1e-9L)) sum += p;
        break;
      case Tail::Greater:
        if (x >= t.a) sum += p;
        break;
      case Tail::Less:
        if (x <= t.a) sum += p;
        break;
    }
  }
  return static_cast<double>(std::min<long double>(sum, 1));
}

TEST(Fisher, TeaTastingKnownValues) {
  const ContingencyTable t{3, 1, 1, 3};
  const FisherResult g = fisher_exact(t, Tail::Greater);
  EXPECT_EQ(g.exact, "17/70");
  EXPECT_NEAR(g.p, 17.0 / 70.0, 1e-15);
  const FisherResult two = fisher_exact(t, Tail::Two);
  EXPECT_EQ(two.exact, "17/35");
}

TEST(Fisher, MatchesBruteForceOracle) {
  // Every table up to N = 12, plus a sweep of larger ones up to 40.
  std::size_t checked = 0;
  for (std::uint64_t a = 0; a <= 4; ++a)
    for (std::uint64_t b = 0; b <= 4; ++b)
      for (std::uint64_t c = 0; c <= 4; ++c)
        for (std::uint64_t d = 0; d <= 4; ++d) {
          const ContingencyTable t{a, b, c, d};
          for (Tail tail : {Tail::Two, Tail::Greater, Tail::Less}) {
            EXPECT_NEAR(fisher_exact(t, tail).p, brute_fisher(t, tail), 1e-9)
                << a << " " << b << " " << c << " " << d << " " << to_string(tail);
            ++checked;
          }
        }
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const ContingencyTable t{rng.index(11), rng.index(11), rng.index(11), rng.index(11)};
    ASSERT_LE(t.total(), 40u);
    for (Tail tail : {Tail::Two, Tail::Greater, Tail::Less}) {
      EXPECT_NEAR(fisher_exact(t, tail).p, brute_fisher(t, tail), 1e-9);
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000u);
}

TEST(Fisher, DegenerateTablesAreExactlyOne) {
  for (const ContingencyTable& t : {ContingencyTable{0, 0, 0, 0}, ContingencyTable{5, 0, 3, 0},
                                    ContingencyTable{0, 4, 0, 7}, ContingencyTable{3, 4, 0, 0},
                                    ContingencyTable{0, 0, 2, 2}}) {
    for (Tail tail : {Tail::Two, Tail::Greater, Tail::Less}) {
      const FisherResult r = fisher_exact(t, tail);
      EXPECT_EQ(r.p, 1.0);
      EXPECT_EQ(r.exact, "1");
    }
  }
}

TEST(Fisher, EqualProportionsTwoTailedIsOne) {
  EXPECT_EQ(fisher_exact({2, 2, 2, 2}).p, 1.0);
  EXPECT_EQ(fisher_exact({3, 6, 3, 6}).p, 1.0);
  EXPECT_EQ(fisher_exact({5, 5, 10, 10}).exact, "1");
}

TEST(Fisher, Symmetry) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const ContingencyTable t{rng.index(9), rng.index(9), rng.index(9), rng.index(9)};
    const ContingencyTable swapped_rows{t.c, t.d, t.a, t.b};
    const ContingencyTable transposed{t.a, t.c, t.b, t.d};
    EXPECT_EQ(fisher_exact(t).exact, fisher_exact(swapped_rows).exact);
    EXPECT_EQ(fisher_exact(t).exact, fisher_exact(transposed).exact);
    EXPECT_EQ(fisher_exact(t, Tail::Greater).exact, fisher_exact(swapped_rows, Tail::Less).exact);
  }
}

TEST(Fisher, TailNames) {
  EXPECT_EQ(parse_tail("two"), Tail::Two);
  EXPECT_EQ(parse_tail("one"), Tail::Greater);
  EXPECT_EQ(parse_tail("greater"), Tail::Greater);
  EXPECT_EQ(parse_tail("less"), Tail::Less);
  EXPECT_FALSE(parse_tail("both"));
}

TEST(Ratios, PrecisionAndPositiveRate) {
  const std::vector<JudgmentRecord> j = {{"a", true, "x"}, {"b", false, "x"}, {"c", true, "x"}};
  EXPECT_EQ(precision(j), (Ratio{2, 3}));
  EXPECT_EQ(precision(j).text(), "2/3");
  EXPECT_THROW(precision(std::vector<JudgmentRecord>{}), Error);

  std::vector<ResponseRecord> rs(4);
  rs[0].answer = Answer::Yes;
  rs[1].answer = Answer::No;
  rs[2].answer = Answer::SkipReplaced;
  rs[3].answer = Answer::Yes;
  EXPECT_EQ(positive_rate(rs), (Ratio{2, 3}));
  try {
    positive_rate(std::span<const ResponseRecord>(rs.data() + 2, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_input);
  }
}

const Dataset& data() {
  static const Dataset d = load_dataset(CROWDGUARD_DATA_DIR);
  return d;
}

std::vector<Positive> some_positives(std::size_t n) {
  const std::vector<ConditionId> conds = {ConditionId::Baseline, ConditionId::FakeGold,
                                          ConditionId::FgSkip, ConditionId::RuleBased};
  std::vector<Positive> out;
  for (std::size_t i = 0; i < n; ++i) {
    Positive p;
    p.ref = "w" + std::to_string(i) + ":h1:q4";
    p.worker_id = "w" + std::to_string(i);
    p.condition = conds[i % conds.size()];
    p.state_id = data().states.states()[i % data().states.size()].state_id;
    p.action_id = data().actions[i % data().actions.size()].action_id;
    out.push_back(p);
  }
  return out;
}

TEST(Blinded, ItemsCarryNoConditionOrWorker) {
  const auto positives = some_positives(40);
  const BlindedExport e = export_blinded(positives, data(), 25, 5);
  ASSERT_EQ(e.items.size(), 25u);
  EXPECT_FALSE(e.clamped);
  std::ostringstream out;
  write_blinded_items(out, e.items);
  const std::string bytes = out.str();
  for (ConditionId c : all_conditions()) {
    EXPECT_EQ(bytes.find(std::string(to_string(c))), std::string::npos) << to_string(c);
  }
  EXPECT_EQ(bytes.find(":h1:"), std::string::npos);
  EXPECT_EQ(bytes.find("\"w1"), std::string::npos);
  EXPECT_EQ(e.items.front().blinded_id, "j0001");
  std::set<std::string> refs;
  for (const auto& k : e.key) refs.insert(k.positive.ref);
  EXPECT_EQ(refs.size(), 25u);
}

TEST(Blinded, ClampAndEmptySample) {
  const auto positives = some_positives(10);
  const BlindedExport all = export_blinded(positives, data(), 100, 1);
  EXPECT_EQ(all.items.size(), 10u);
  EXPECT_TRUE(all.clamped);
  const BlindedExport none = export_blinded(positives, data(), 0, 1);
  EXPECT_TRUE(none.items.empty());
  EXPECT_FALSE(none.clamped);
}

TEST(Blinded, DeterministicBySeed) {
  const auto positives = some_positives(30);
  const auto a = export_blinded(positives, data(), 10, 9);
  const auto b = export_blinded(positives, data(), 10, 9);
  const auto c = export_blinded(positives, data(), 10, 10);
  auto refs = [](const BlindedExport& e) {
    std::vector<std::string> r;
    for (const auto& k : e.key) r.push_back(k.positive.ref);
    return r;
  };
  EXPECT_EQ(refs(a), refs(b));
  EXPECT_NE(refs(a), refs(c));
}

TEST(Blinded, KeyAndJudgmentsRoundTrip) {
  const auto e = export_blinded(some_positives(6), data(), 6, 2);
  std::stringstream key;
  write_blinded_key(key, e.key);
  const auto back = read_blinded_key(key);
  ASSERT_EQ(back.size(), e.key.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].blinded_id, e.key[i].blinded_id);
    EXPECT_EQ(back[i].positive.ref, e.key[i].positive.ref);
    EXPECT_EQ(back[i].positive.condition, e.key[i].positive.condition);
  }
  std::stringstream verdicts;
  verdicts << R"({"blinded_id":"j0001","verdict":"correct","judge_id":"r1"})" << "\n"
           << R"({"blinded_id":"j0002","verdict":"incorrect"})" << "\n";
  const auto js = read_judgments(verdicts, back);
  ASSERT_EQ(js.size(), 2u);
  EXPECT_EQ(js[0].ref, e.key[0].positive.ref);
  EXPECT_TRUE(js[0].correct);
  EXPECT_EQ(js[1].judge_id, "judge");
  EXPECT_FALSE(js[1].correct);

  std::stringstream out;
  write_judgments(out, js, back);
  EXPECT_EQ(read_judgments(out, back).size(), 2u);
}

TEST(Blinded, JudgmentErrors) {
  const auto e = export_blinded(some_positives(3), data(), 3, 2);
  std::stringstream dup;
  dup << R"({"blinded_id":"j0001","verdict":"correct"})" << "\n"
      << R"({"blinded_id":"j0001","verdict":"incorrect"})" << "\n";
  try {
    read_judgments(dup, e.key);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::duplicate_id);
  }
  std::stringstream missing;
  missing << R"({"blinded_id":"j0099","verdict":"correct"})" << "\n";
  try {
    read_judgments(missing, e.key);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::not_found);
  }
  std::stringstream bad;
  bad << R"({"blinded_id":"j0001","verdict":"maybe"})" << "\n";
  EXPECT_THROW(read_judgments(bad, e.key), Error);
}

ResponseRecord yes_answer(std::string worker, ConditionId c, std::size_t i) {
  ResponseRecord r;
  r.worker_id = std::move(worker);
  r.hit_id = r.worker_id + ":h1";
  r.question_id = r.hit_id + ":q" + std::to_string(i);
  r.condition = c;
  r.section = Section::Task;
  r.gold_kind = GoldKind::None;
  r.state_id = data().states.states()[i].state_id;
  r.action_id = data().actions[i].action_id;
  r.answer = Answer::Yes;
  return r;
}

TEST(Report, FourConditionsGiveSixTests) {
  std::vector<ResponseRecord> rs;
  std::vector<JudgmentRecord> js;
  const std::vector<ConditionId> conds = {ConditionId::Baseline, ConditionId::FakeGold,
                                          ConditionId::FgSkip, ConditionId::GoldOverload};
  for (std::size_t ci = 0; ci < conds.size(); ++ci) {
    for (std::size_t i = 0; i < 5; ++i) {
      auto r = yes_answer("w" + std::to_string(ci), conds[ci], i);
      js.push_back({r.question_id, i < ci + 1, "x"});
      rs.push_back(std::move(r));
    }
  }
  ReportInput in;
  in.responses = rs;
  in.data = &data();
  in.judgments = js;
  const Report rep = build_report(in);
  ASSERT_EQ(rep.rows.size(), 4u);
  EXPECT_EQ(rep.tests.size(), 6u);
  for (const auto& row : rep.rows) {
    EXPECT_EQ(row.positives, 5u);
    EXPECT_EQ(row.judged, 5u);
    ASSERT_TRUE(row.precision);
  }
  for (const auto& t : rep.tests) {
    EXPECT_NEAR(t.result.p, brute_fisher(t.table, Tail::Two), 1e-9);
    EXPECT_EQ(t.table.a + t.table.b, 5u);
  }
  EXPECT_TRUE(rep.warnings.empty());
  const Json j = report_to_json(rep);
  EXPECT_EQ(j["pairwise"].size(), 6u);
  EXPECT_EQ(j["tail"], "two");
  EXPECT_NE(report_svg(rep).find("<svg"), std::string::npos);
}

TEST(Report, WarnsWithoutJudgments) {
  std::vector<ResponseRecord> rs = {yes_answer("w1", ConditionId::Baseline, 1)};
  ReportInput in;
  in.responses = rs;
  in.data = &data();
  const Report rep = build_report(in);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_FALSE(rep.rows[0].precision);
  EXPECT_FALSE(rep.warnings.empty());
  EXPECT_NE(report_svg(rep).find("n/a"), std::string::npos);
}

TEST(Positives, RulesExpandToIncludedStatesMinusKnownValid) {
  const ActionSpec& a = data().actions.front();
  RuleSubmission s;
  s.worker_id = "w1";
  s.hit_id = "w1:h1";
  s.question_id = "w1:h1:q3";
  s.action_id = a.action_id;
  s.rule = "ALL";
  FilterResult f;
  f.submissions.push_back(s);
  const auto ps = collect_positives(f, data());
  EXPECT_EQ(ps.size(), data().states.size() - 1);
  for (const auto& p : ps) {
    EXPECT_NE(p.state_id, a.known_valid_state);
    EXPECT_EQ(p.ref, s.question_id + "#" + p.state_id);
  }
}

TEST(Positives, OracleAgreesWithGroundTruth) {
  const GroundTruth truth = load_ground_truth(std::string(CROWDGUARD_DATA_DIR) + "/ground_truth.jsonl");
  const auto ps = some_positives(20);
  const auto js = judge_with_oracle(ps, truth, data());
  ASSERT_EQ(js.size(), ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto it = std::find_if(truth.begin(), truth.end(),
                                 [&](const auto& e) { return e.first == ps[i].action_id; });
    ASSERT_NE(it, truth.end());
    EXPECT_EQ(js[i].correct, eval_rule(it->second, data().states.at(ps[i].state_id), data().registry));
    EXPECT_EQ(js[i].judge_id, "oracle");
  }
}

}  // namespace
}  // namespace crowdguard
