#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "coprompt/error.hpp"
#include "coprompt/metrics.hpp"
#include "metric_cases.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace coprompt;

using namespace metric_cases;

TEST(AccAtK, HandCases) {
  EXPECT_EQ(acc_at_k(make_run({{"q1", {"d1"}}}), make_qrels({{"q1", "d1", 1}}), 1), 1.0);
  auto run = make_run({{"q1", {"a", "b", "gold"}}});
  auto qrels = make_qrels({{"q1", "gold", 1}});
  EXPECT_EQ(acc_at_k(run, qrels, 2), 0.0);
  EXPECT_EQ(acc_at_k(run, qrels, 3), 1.0);

  auto four = make_run({{"q1", {"g1"}}, {"q2", {"x", "g2"}}, {"q3", {"g3"}}, {"q4", {"x", "y"}}});
  auto four_qrels = make_qrels({{"q1", "g1", 1}, {"q2", "g2", 1}, {"q3", "g3", 2}, {"q4", "g4", 1}});
  EXPECT_DOUBLE_EQ(acc_at_k(four, four_qrels, 2), 0.75);
}

TEST(NdcgAtK, HandCases) {
  auto qrels = make_qrels({{"q1", "d1", 2}, {"q1", "d2", 1}});
  EXPECT_DOUBLE_EQ(ndcg_at_k(make_run({{"q1", {"d1", "d2"}}}), qrels, 5), 1.0);
  EXPECT_NEAR(ndcg_at_k(make_run({{"q1", {"x", "gold"}}}), make_qrels({{"q1", "gold", 1}}), 2), 0.6309, 1e-4);
  EXPECT_EQ(ndcg_at_k(make_run({{"q1", {"x", "gold"}}}), make_qrels({{"q1", "gold", 1}}), 1), 0.0);
}

TEST(MapAtK, HandCases) {
  EXPECT_EQ(map_at_k(make_run({{"q1", {"d1", "d2"}}}), make_qrels({{"q1", "d1", 1}}), 1), 1.0);
  auto qrels = make_qrels({{"q1", "d1", 1}, {"q1", "d3", 1}});
  EXPECT_NEAR(map_at_k(make_run({{"q1", {"d1", "d2", "d3"}}}), qrels, 3), 0.8333, 1e-4);
  EXPECT_EQ(map_at_k(make_run({{"q1", {"x", "y", "d1"}}}), qrels, 2), 0.0);
}

TEST(Metrics, ExcludesQueriesWithoutRelevantJudgments) {
  auto run = make_run({{"q1", {"d1"}}, {"q2", {"d1"}}, {"q3", {"d1"}}});
  auto qrels = make_qrels({{"q1", "d1", 1}, {"q2", "d1", 0}});
  EXPECT_EQ(acc_at_k(run, qrels, 1), 1.0);
  EXPECT_EQ(evaluate(run, qrels, std::vector<std::size_t>{1}).n_queries, 1u);
  EXPECT_ERRC(acc_at_k(run, make_qrels({{"q2", "d1", 0}}), 1), Errc::no_evaluable_queries);
  EXPECT_ERRC(ndcg_at_k(run, qrels, 0), Errc::invalid_argument);
}

TEST(Metrics, MatchNaiveOracles) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    RandomCase c = random_case(rng);
    std::size_t k = 1 + rng() % 12;
    double acc = 0, ndcg = 0, ap = 0;
    std::size_t n = 0;
    for (const auto& [qid, ranking] : c.rankings) {
      if (!oracle::evaluable(c.judged[qid])) continue;
      acc += oracle::acc(ranking, c.judged[qid], k);
      ndcg += oracle::ndcg(ranking, c.judged[qid], k);
      ap += oracle::ap(ranking, c.judged[qid], k);
      ++n;
    }
    ASSERT_GT(n, 0u);
    EXPECT_NEAR(acc_at_k(c.run, c.qrels, k), acc / n, 1e-9);
    EXPECT_NEAR(ndcg_at_k(c.run, c.qrels, k), ndcg / n, 1e-9);
    EXPECT_NEAR(map_at_k(c.run, c.qrels, k), ap / n, 1e-9);
  }
}

TEST(Metrics, TruncationAndMonotonicity) {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    RandomCase c = random_case(rng);
    std::size_t k = 1 + rng() % 6;
    auto padded = c.rankings;
    for (auto& [qid, r] : padded) {
      r.resize(std::min(r.size(), k));
      for (std::size_t i = r.size(); i < k; ++i) r.push_back("pad" + std::to_string(i));
      r.push_back("junk-a");
      if (std::find(r.begin(), r.end(), "d1") == r.end()) r.push_back("d1");
    }
    RunList base;
    {
      auto cut = padded;
      for (auto& [qid, r] : cut) r.resize(k);
      base = make_run(cut);
    }
    RunList junk = make_run(padded);
    EXPECT_DOUBLE_EQ(acc_at_k(junk, c.qrels, k), acc_at_k(base, c.qrels, k));
    EXPECT_DOUBLE_EQ(ndcg_at_k(junk, c.qrels, k), ndcg_at_k(base, c.qrels, k));
    EXPECT_DOUBLE_EQ(map_at_k(junk, c.qrels, k), map_at_k(base, c.qrels, k));
    EXPECT_DOUBLE_EQ(map_at_k(base, c.qrels, k), map_at_k(c.run, c.qrels, k));

    EXPECT_LE(acc_at_k(c.run, c.qrels, k), acc_at_k(c.run, c.qrels, k + 1));
    double nd = ndcg_at_k(c.run, c.qrels, k);
    EXPECT_GE(nd, 0.0);
    EXPECT_LE(nd, 1.0 + 1e-12);
  }
}

TEST(Metrics, SwappingRelevantUpwardNeverHurts) {
  std::mt19937 rng(29);
  for (int trial = 0; trial < 300; ++trial) {
    RandomCase c = random_case(rng);
    auto& r = c.rankings["q0"];
    if (r.size() < 2) continue;
    std::size_t i = rng() % (r.size() - 1);
    std::size_t j = i + 1 + rng() % (r.size() - i - 1);
    auto& judged = c.judged["q0"];
    if (oracle::grade(judged, r[j]) < oracle::grade(judged, r[i])) continue;
    auto swapped = c.rankings;
    std::swap(swapped["q0"][i], swapped["q0"][j]);
    RunList after = make_run(swapped);
    for (std::size_t k : {1u, 3u, 10u}) {
      EXPECT_GE(acc_at_k(after, c.qrels, k), acc_at_k(c.run, c.qrels, k));
      EXPECT_GE(ndcg_at_k(after, c.qrels, k) + 1e-12, ndcg_at_k(c.run, c.qrels, k));
      if (oracle::grade(judged, swapped["q0"][i]) > 0 || oracle::grade(judged, r[i]) == 0)
        EXPECT_GE(map_at_k(after, c.qrels, k) + 1e-12, map_at_k(c.run, c.qrels, k));
    }
  }
}

TEST(Evaluate, ReportShapeAndFormatting) {
  auto run = make_run({{"q1", {"d1", "d2"}}});
  auto qrels = make_qrels({{"q1", "d1", 1}, {"q1", "d2", 1}});
  std::vector<std::size_t> cutoffs{20, 100};
  EvalReport r = evaluate(run, qrels, cutoffs);
  EXPECT_EQ(r.metrics.size(), 6u);
  EXPECT_EQ(r.metrics.at("ndcg@20"), 1.0);
  EXPECT_EQ(r, evaluate(run, qrels, cutoffs));
  EXPECT_EQ(metric_names(cutoffs),
            (std::vector<std::string>{"acc@20", "acc@100", "ndcg@20", "ndcg@100", "map@20", "map@100"}));
  auto j = report_json(r);
  EXPECT_NE(j.find("\"ndcg@20\": 1.0"), std::string::npos);
  EXPECT_NE(report_table(r, r).find("delta"), std::string::npos);
}
