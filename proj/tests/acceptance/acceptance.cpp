// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coprompt/bm25.hpp"
#include "coprompt/coprompt.hpp"
#include "coprompt/corpus.hpp"
#include "coprompt/metrics.hpp"
#include "coprompt/run.hpp"
#include "coprompt/scorer.hpp"
#include "metric_cases.hpp"
#include "oracles.hpp"
#include "search_cases.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace coprompt;
using Clock = std::chrono::steady_clock;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
  void expect(bool cond, const std::string& why) {
    if (!cond) fail(why);
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
      std::ostringstream s;
      s.precision(17);
      s << what << ": got " << got << ", want " << want << " (tol " << tol << ")";
      fail(s.str());
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(const std::string& name, const std::function<Check()>& body) {
  Check c;
  const auto start = Clock::now();
  try {
    c = body();
  } catch (const std::exception& e) {
    c.fail(std::string("exception: ") + e.what());
  }
  std::ostringstream time;
  time.precision(2);
  time << std::fixed << seconds_since(start) << "s";
  if (!c.ok) ++failures;
  std::cout << (c.ok ? "PASS " : "FAIL ") << name << " [" << time.str() << "]";
  if (!c.detail.empty()) std::cout << ": " << c.detail;
  std::cout << std::endl;
}

// --- beam search versus exhaustive enumeration ------------------------------

struct BeamComparison {
  bool identical = true;
  std::string first_difference;
};

BeamComparison compare_with_brute_force(const cases::SearchCase& c, const BeamConfig& cfg) {
  auto lm = c.model();
  auto ref = c.reference();
  SearchResult r = co_prompt_search(*lm, *lm, c.pair_set(), cfg);
  auto brute = oracle::brute_force_prompts(cfg.start_token, c.vocab, cfg.max_length, cfg.num_results,
                                           [&](const std::string& p) {
                                             return cfg.metric == Metric::base ? oracle::base_metric(ref, c.pairs, p)
                                                                               : oracle::contrastive_metric(ref, c.pairs, p);
                                           });
  BeamComparison out;
  if (r.results.size() != brute.size()) {
    out.identical = false;
    out.first_difference = "result count " + std::to_string(r.results.size()) + " vs " + std::to_string(brute.size());
    return out;
  }
  for (std::size_t i = 0; i < brute.size(); ++i)
    if (r.results[i].prompt != brute[i].first || std::abs(r.results[i].metric - brute[i].second) > 1e-9) {
      out.identical = false;
      out.first_difference = "rank " + std::to_string(i + 1) + ": \"" + r.results[i].prompt + "\" vs \"" +
                             brute[i].first + "\"";
      return out;
    }
  return out;
}

Check beam_vs_exhaustive() {
  Check c;
  std::mt19937_64 rng(20240601);
  std::size_t configs = 0, per_metric[2] = {0, 0};
  const auto start = Clock::now();
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t v = 2 + rng() % 5;    // |V| in [2, 6]
    const std::size_t len = 1 + rng() % 3;  // L in [1, 3]
    const std::size_t pairs = 3 + rng() % 8;
    auto sc = cases::random_case(rng, v, pairs);
    BeamConfig cfg;
    cfg.max_length = len;
    // Exhaustive regime: no level is ever pruned.
    cfg.beam_width = std::max<std::size_t>(v, static_cast<std::size_t>(std::pow(v, len)));
    cfg.num_results = 1 + rng() % 10;
    cfg.metric = trial % 2 ? Metric::contrastive : Metric::base;
    auto cmp = compare_with_brute_force(sc, cfg);
    ++configs;
    ++per_metric[trial % 2];
    c.expect(cmp.identical, "config " + std::to_string(trial) + " (|V|=" + std::to_string(v) +
                                ", L=" + std::to_string(len) + "): " + cmp.first_difference);
  }
  const double secs = seconds_since(start);
  c.expect(secs < 60.0, "took " + std::to_string(secs) + "s");
  if (c.ok)
    c.detail = std::to_string(configs) + " configs (" + std::to_string(per_metric[0]) + " base, " +
               std::to_string(per_metric[1]) + " contrastive), B >= |V|^L, top-N identical to 1e-9";
  return c;
}

// Not a gate: with B >= |V| but B < |V|^L a level can be pruned, so the
// beam may legitimately miss the exhaustive optimum.
void pruned_regime_note() {
  std::mt19937_64 rng(77);
  std::size_t differ = 0, total = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t v = 2 + rng() % 3;
    auto sc = cases::random_case(rng, v, 3 + rng() % 4);
    BeamConfig cfg;
    cfg.beam_width = v;
    cfg.max_length = 2 + rng() % 2;
    cfg.num_results = 1 + rng() % 3;
    cfg.metric = trial % 2 ? Metric::contrastive : Metric::base;
    differ += !compare_with_brute_force(sc, cfg).identical;
    ++total;
  }
  std::cout << "INFO beam-vs-exhaustive with |V| <= B < |V|^L: " << differ << "/" << total
            << " configs differ from exhaustive top-N (pruning is expected to lose prompts)" << std::endl;
}

Check best_result_dominance() {
  Check c;
  std::mt19937_64 rng(31337);
  std::size_t pruned = 0;
  const std::size_t configs = 240;
  for (std::size_t trial = 0; trial < configs; ++trial) {
    const std::size_t v = 2 + rng() % 5;
    auto sc = cases::random_case(rng, v, 2 + rng() % 8);
    BeamConfig cfg;
    cfg.beam_width = 1 + rng() % 7;
    cfg.max_length = rng() % 4;
    cfg.num_results = 1 + rng() % 10;
    cfg.metric = trial % 2 ? Metric::contrastive : Metric::base;
    pruned += cfg.beam_width < v;
    auto lm = sc.model();
    PairSet pairs = sc.pair_set();
    SearchResult r = co_prompt_search(*lm, *lm, pairs, cfg);
    const double start = prompt_metric(cfg.metric, *lm, pairs, cfg.start_token, cfg.tmpl);
    c.expect(!r.results.empty() && r.results.front().metric >= start,
             "config " + std::to_string(trial) + ": top metric below start-token metric");
  }
  c.expect(pruned > 0, "no pruned (B < |V|) configuration was generated");
  if (c.ok) c.detail = std::to_string(configs) + " configs, " + std::to_string(pruned) + " with B < |V|";
  return c;
}

// --- metrics -----------------------------------------------------------------

Check metric_hand_cases_and_oracle() {
  using namespace metric_cases;
  Check c;
  c.near(ndcg_at_k(make_run({{"q1", {"x", "gold"}}}), make_qrels({{"q1", "gold", 1}}), 2), 0.6309, 1e-4, "nDCG@2");
  c.near(map_at_k(make_run({{"q1", {"d1", "d2", "d3"}}}), make_qrels({{"q1", "d1", 1}, {"q1", "d3", 1}}), 3), 0.8333,
         1e-4, "MAP@3");
  c.near(acc_at_k(make_run({{"q1", {"d1"}}}), make_qrels({{"q1", "d1", 1}}), 1), 1.0, 0, "ACC@1 gold at rank 1");
  auto third = make_run({{"q1", {"a", "b", "gold"}}});
  auto third_qrels = make_qrels({{"q1", "gold", 1}});
  c.near(acc_at_k(third, third_qrels, 2), 0.0, 0, "ACC@2 gold at rank 3");
  c.near(acc_at_k(third, third_qrels, 3), 1.0, 0, "ACC@3 gold at rank 3");
  c.near(acc_at_k(make_run({{"q1", {"g1"}}, {"q2", {"g2"}}, {"q3", {"g3"}}, {"q4", {"x"}}}),
                  make_qrels({{"q1", "g1", 1}, {"q2", "g2", 1}, {"q3", "g3", 1}, {"q4", "g4", 1}}), 1),
         0.75, 0, "ACC 3 of 4");

  std::mt19937 rng(4242);
  const int runs = 1000;
  for (int trial = 0; trial < runs && c.ok; ++trial) {
    RandomCase rc = random_case(rng);
    const std::size_t k = 1 + rng() % 12;
    double acc = 0, ndcg = 0, ap = 0;
    std::size_t n = 0;
    for (const auto& [qid, ranking] : rc.rankings) {
      if (!oracle::evaluable(rc.judged[qid])) continue;
      acc += oracle::acc(ranking, rc.judged[qid], k);
      ndcg += oracle::ndcg(ranking, rc.judged[qid], k);
      ap += oracle::ap(ranking, rc.judged[qid], k);
      ++n;
    }
    const std::string at = " (run " + std::to_string(trial) + ")";
    c.near(acc_at_k(rc.run, rc.qrels, k), acc / n, 1e-9, "ACC" + at);
    c.near(ndcg_at_k(rc.run, rc.qrels, k), ndcg / n, 1e-9, "nDCG" + at);
    c.near(map_at_k(rc.run, rc.qrels, k), ap / n, 1e-9, "MAP" + at);
  }
  if (c.ok) c.detail = "hand cases plus " + std::to_string(runs) + " randomized runs match naive oracles to 1e-9";
  return c;
}

// --- BM25 --------------------------------------------------------------------

Check bm25_oracle() {
  Check c;
  std::mt19937 rng(555);
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f", "g", "h"};
  auto text = [&](std::size_t len) {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s += vocab[rng() % vocab.size()] + (rng() % 4 ? " " : ", ");
    return s;
  };
  const int corpora = 120;
  std::size_t scored = 0;
  for (int trial = 0; trial < corpora && c.ok; ++trial) {
    std::vector<std::pair<std::string, std::string>> docs;
    for (std::size_t i = 0, n = 1 + rng() % 10; i < n; ++i) docs.emplace_back("d" + std::to_string(i), text(1 + rng() % 10));
    auto idx = Bm25Index::build(testutil::corpus(docs));
    for (int q = 0; q < 3; ++q) {
      std::string query = text(1 + rng() % 4);
      for (const auto& [id, body] : docs) {
        c.near(idx.score(query, id), oracle::bm25(docs, query, id), 1e-9, "corpus " + std::to_string(trial) + " " + id);
        ++scored;
      }
      auto full = idx.retrieve(query, docs.size() + 1);
      for (std::size_t k = 1; k <= docs.size(); ++k) {
        auto prefix = idx.retrieve(query, k);
        c.expect(prefix.size() <= k && std::equal(prefix.begin(), prefix.end(), full.begin()),
                 "retrieve(" + std::to_string(k) + ") is not a prefix in corpus " + std::to_string(trial));
      }
    }
  }
  if (c.ok)
    c.detail = std::to_string(corpora) + " corpora, " + std::to_string(scored) +
               " scores match raw-text formula to 1e-9; retrieve(k) prefix property holds";
  return c;
}

// --- forced metric values --------------------------------------------------------

Check forced_values() {
  Check c;
  std::mt19937_64 rng(99);
  int checks = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t v = 2 + rng() % 6;
    std::string seed;
    for (std::size_t i = 0; i < v; ++i) seed += "w" + std::to_string(i) + " ";
    auto uniform = toy_fit(seed, 1, 0.5 + static_cast<double>(rng() % 5));
    // Query words must come from the model's vocabulary for the uniform value to be forced.
    std::vector<std::string> in_vocab;
    for (std::size_t i = 0; i < v; ++i) in_vocab.push_back("w" + std::to_string(i));
    auto sc = cases::random_case(rng, 3, 1 + rng() % 6);
    for (auto& p : sc.pairs) p.query = cases::phrase(rng, in_vocab, 1 + rng() % 4);
    PairSet pairs = sc.pair_set();
    for (const std::string& prompt : {std::string(), std::string("Please"), cases::phrase(rng, {"w0", "w1", "x"}, 3)}) {
      c.near(base_likelihood(*uniform, pairs, prompt, {}), 1.0 / static_cast<double>(v), 1e-9, "uniform base");
      c.near(contrastive_likelihood(*uniform, pairs, prompt, {}), 0.5, 1e-9, "uniform contrastive");
      checks += 2;
    }
    // Negatives identical to positives under a non-uniform model.
    auto lm = sc.model();
    PairSet mirrored = pairs;
    for (auto& p : mirrored.pairs) p.negatives = {p.positive};
    c.near(contrastive_likelihood(*lm, mirrored, "Please", {}), 0.5, 1e-9, "mirrored contrastive");
    ++checks;
  }
  if (c.ok) c.detail = std::to_string(checks) + " checks: base = 1/|V| and contrastive = 0.5 to 1e-9";
  return c;
}

// --- CLI-driven checks --------------------------------------------------------------

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) out += ch == '\'' ? std::string("'\\''") : std::string(1, ch);
  return out + "'";
}

int cli(const std::filesystem::path& cwd, const std::string& args) {
  std::string cmd = "cd " + quote(cwd.string()) + " && " + quote(COPROMPT_CLI_PATH) + " " + args +
                    " >>stdout.txt 2>>stderr.txt";
  int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Check end_to_end() {
  Check c;
  const auto start = Clock::now();
  testutil::TempDir dir;
  synthetic::Options o;  // ~200 documents
  auto collection = synthetic::make(o);
  auto files = synthetic::write(collection, dir.path());
  nlohmann::json config{{"corpus", files.corpus.string()},
                        {"queries", files.queries.string()},
                        {"qrels", files.qrels.string()},
                        {"scorer", "toy"},
                        {"toy", {{"seed_text", files.seed.string()}, {"order", 2}, {"context_weight", 0.5}}},
                        {"beam", {{"width", 5}, {"max_length", 3}}},
                        {"pairs", {{"n", 50}}},
                        {"cutoffs", {10}}};
  testutil::write(dir.file("config.json"), config.dump(2));
  const std::string cfg = " -c config.json";

  auto step = [&](const std::string& args) {
    if (!c.ok) return;
    int status = cli(dir.path(), args + cfg);
    c.expect(status == 0, "`" + args + "` exited " + std::to_string(status) + ": " + testutil::read(dir.file("stderr.txt")));
  };
  step("retrieve -s output=bm25.run");
  step("optimize -s prompts_out=prompts.json -s pairs_out=pairs.jsonl");
  step("rerank -s run=bm25.run -s prompt_file=prompts.json -s output=optimized.run");
  step("rerank -s run=bm25.run -s prompt= -s output=null.run");
  if (!c.ok) return c;

  auto qrels = load_qrels(files.qrels);
  const double optimized = ndcg_at_k(load_run(dir.file("optimized.run")), qrels, 10);
  const double null_prompt = ndcg_at_k(load_run(dir.file("null.run")), qrels, 10);
  const std::string prompt =
      nlohmann::json::parse(testutil::read(dir.file("prompts.json")))["prompts"][0]["prompt"].get<std::string>();

  // Training pairs as written by optimize, scored with the same model.
  Corpus corpus = load_corpus(files.corpus, DataFormat::jsonl);
  QuerySet queries = load_queries(files.queries, DataFormat::jsonl);
  PairSet pairs;
  std::istringstream lines(testutil::read(dir.file("pairs.jsonl")));
  for (std::string line; std::getline(lines, line);) {
    auto j = nlohmann::json::parse(line);
    pairs.pairs.push_back(Pair{queries.at(j["query_id"]), corpus.at(j["positive_id"]), {}});
  }
  auto lm = toy_fit(testutil::read(files.seed), 2, 1.0, 0.5);
  const double base_opt = base_likelihood(*lm, pairs, prompt, {});
  const double base_null = base_likelihood(*lm, pairs, "", {});

  const double secs = seconds_since(start);
  std::ostringstream d;
  d.precision(4);
  d << std::fixed << corpus.size() << " docs, prompt \"" << prompt << "\": nDCG@10 " << optimized << " vs null "
    << null_prompt << "; base likelihood " << base_opt << " vs null " << base_null;
  c.expect(pairs.pairs.size() == 50, "expected 50 training pairs");
  c.expect(optimized > null_prompt, "nDCG@10 not above null prompt: " + d.str());
  c.expect(base_opt > base_null, "base likelihood not above null prompt: " + d.str());
  c.expect(secs < 120.0, "took " + std::to_string(secs) + "s");
  if (c.ok) c.detail = d.str();
  return c;
}

Check cli_determinism() {
  Check c;
  testutil::TempDir dir;
  synthetic::Options o;
  o.docs = 80;
  o.queries = 40;
  o.topics = 6;  // broad overlap, so every query has mined negatives
  auto files = synthetic::write(synthetic::make(o), dir.path());
  nlohmann::json config{{"corpus", files.corpus.string()},
                        {"queries", files.queries.string()},
                        {"qrels", files.qrels.string()},
                        {"scorer", "toy"},
                        {"toy", {{"seed_text", files.seed.string()}, {"context_weight", 0.5}}},
                        {"beam", {{"width", 3}, {"max_length", 2}, {"metric", "contrastive"}}},
                        {"pairs", {{"n", 20}, {"negatives", 2}}},
                        {"cutoffs", {10, 20}},
                        {"seed", 3}};
  testutil::write(dir.file("config.json"), config.dump());
  const std::vector<std::string> commands{
      "index",
      "retrieve -s output=bm25.run",
      "optimize -s prompts_out=prompts.json -s trace=trace.jsonl -s pairs_out=pairs.jsonl",
      "rerank -s run=bm25.run -s prompt_file=prompts.json -s output=reranked.run -s report=rerank.json",
      "eval -s run=bm25.run -s compare_run=reranked.run -s report=eval.json",
      "score-dist -s pairs_file=pairs.jsonl -s prompt_file=prompts.json -s report=dist.json"};
  const std::vector<std::string> outputs{"stdout.txt", "bm25.run",     "prompts.json", "trace.jsonl", "pairs.jsonl",
                                         "reranked.run", "rerank.json", "eval.json",    "dist.json"};
  std::map<std::string, std::string> first;
  for (int round = 0; round < 2 && c.ok; ++round) {
    auto cwd = dir.file("round" + std::to_string(round));
    std::filesystem::create_directories(cwd);
    for (const auto& cmd : commands) {
      int status = cli(cwd, cmd + " -c " + quote(dir.file("config.json").string()) + " -s workers=" + (round ? "4" : "1"));
      c.expect(status == 0, "`" + cmd + "` exited " + std::to_string(status));
    }
    for (const auto& name : outputs) {
      std::string bytes = testutil::read(cwd / name);
      c.expect(!bytes.empty(), name + " is empty");
      if (round == 0) first[name] = bytes;
      else c.expect(bytes == first[name], name + " differs between runs");
    }
  }
  if (c.ok)
    c.detail = std::to_string(commands.size()) + " commands, " + std::to_string(outputs.size()) +
               " outputs byte-identical across reruns (1 and 4 workers)";
  return c;
}

}  // namespace

int main() {
  report("beam-vs-exhaustive oracle", beam_vs_exhaustive);
  pruned_regime_note();
  report("best-result dominance", best_result_dominance);
  report("metric hand cases and naive oracles", metric_hand_cases_and_oracle);
  report("BM25 oracle and prefix property", bm25_oracle);
  report("forced base/contrastive values", forced_values);
  report("end-to-end optimize then rerank", end_to_end);
  report("CLI determinism", cli_determinism);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
