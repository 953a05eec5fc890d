#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coprompt/corpus.hpp"
#include "coprompt/run.hpp"

namespace coprompt {

// Metrics follow trec_eval conventions: only queries present in the run are
// evaluated, and a query without any grade >= 1 judgment is left out of the
// mean instead of counting as 0. All three throw NoEvaluableQueries when no
// query is left.

/// Fraction of queries with at least one relevant document in the top k.
double acc_at_k(const RunList& run, const Qrels& qrels, std::size_t k);

/// Linear-gain nDCG: sum grade / log2(rank + 1), normalized by the ideal
/// ordering of all judged documents cut at k.
double ndcg_at_k(const RunList& run, const Qrels& qrels, std::size_t k);

/// AP@k = (sum of precision@i over relevant ranks i <= k) / min(R, k).
double map_at_k(const RunList& run, const Qrels& qrels, std::size_t k);

struct EvalReport {
  std::string tag;
  std::size_t n_queries = 0;
  std::map<std::string, double> metrics;  // "acc@20", "ndcg@20", "map@20", ...

  bool operator==(const EvalReport&) const = default;
};

/// All three metrics at every cutoff.
EvalReport evaluate(const RunList& run, const Qrels& qrels, std::span<const std::size_t> cutoffs);

/// Metric names in display order: acc, ndcg, map, each by ascending cutoff.
std::vector<std::string> metric_names(std::span<const std::size_t> cutoffs);

std::string report_json(const EvalReport& report);

/// Aligned plain-text table. With two reports, prints them side by side with
/// a delta column (second minus first).
std::string report_table(const EvalReport& report);
std::string report_table(const EvalReport& before, const EvalReport& after);

}  // namespace coprompt
