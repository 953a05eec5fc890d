#include "coprompt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include <json.hpp>

#include "coprompt/error.hpp"

namespace coprompt {

namespace {

std::size_t relevant_count(const std::map<std::string, int>& judged) {
  return static_cast<std::size_t>(
      std::count_if(judged.begin(), judged.end(), [](const auto& kv) { return kv.second >= 1; }));
}

// Mean of per_query over evaluable queries (those with >= 1 relevant judgment).
double mean_over_queries(
    const RunList& run, const Qrels& qrels, std::size_t k, const char* name,
    const std::function<double(const std::vector<RunEntry>&, const std::map<std::string, int>&)>&
        per_query) {
  if (k == 0) throw Error(Errc::invalid_argument, std::string(name) + " needs k >= 1");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [qid, entries] : run.rankings) {
    const auto* judged = qrels.judgments(qid);
    if (!judged || relevant_count(*judged) == 0) continue;
    sum += per_query(entries, *judged);
    ++n;
  }
  if (n == 0) throw Error(Errc::no_evaluable_queries, std::string(name) + ": no evaluable queries");
  return sum / static_cast<double>(n);
}

int grade_of(const std::map<std::string, int>& judged, const std::string& doc) {
  auto it = judged.find(doc);
  return it == judged.end() ? 0 : it->second;
}

}  // namespace

double acc_at_k(const RunList& run, const Qrels& qrels, std::size_t k) {
  return mean_over_queries(run, qrels, k, "acc", [k](const auto& entries, const auto& judged) {
    const std::size_t depth = std::min(k, entries.size());
    for (std::size_t i = 0; i < depth; ++i)
      if (grade_of(judged, entries[i].doc_id) >= 1) return 1.0;
    return 0.0;
  });
}

double ndcg_at_k(const RunList& run, const Qrels& qrels, std::size_t k) {
  return mean_over_queries(run, qrels, k, "ndcg", [k](const auto& entries, const auto& judged) {
    double dcg = 0.0;
    const std::size_t depth = std::min(k, entries.size());
    for (std::size_t i = 0; i < depth; ++i)
      dcg += grade_of(judged, entries[i].doc_id) / std::log2(static_cast<double>(i) + 2.0);

    std::vector<int> ideal;
    for (const auto& [doc, grade] : judged) ideal.push_back(grade);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i)
      idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
    return dcg / idcg;
  });
}

double map_at_k(const RunList& run, const Qrels& qrels, std::size_t k) {
  return mean_over_queries(run, qrels, k, "map", [k](const auto& entries, const auto& judged) {
    const std::size_t total_relevant = relevant_count(judged);
    double precision_sum = 0.0;
    std::size_t hits = 0;
    const std::size_t depth = std::min(k, entries.size());
    for (std::size_t i = 0; i < depth; ++i) {
      if (grade_of(judged, entries[i].doc_id) < 1) continue;
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    return precision_sum / static_cast<double>(std::min(total_relevant, k));
  });
}

std::vector<std::string> metric_names(std::span<const std::size_t> cutoffs) {
  std::vector<std::size_t> ks(cutoffs.begin(), cutoffs.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::vector<std::string> names;
  for (const char* family : {"acc", "ndcg", "map"})
    for (std::size_t k : ks) names.push_back(std::string(family) + "@" + std::to_string(k));
  return names;
}

EvalReport evaluate(const RunList& run, const Qrels& qrels, std::span<const std::size_t> cutoffs) {
  if (cutoffs.empty()) throw Error(Errc::invalid_argument, "evaluate needs at least one cutoff");
  EvalReport report;
  report.tag = run.tag;
  for (const auto& [qid, entries] : run.rankings)
    if (const auto* judged = qrels.judgments(qid); judged && relevant_count(*judged) > 0)
      ++report.n_queries;
  for (std::size_t k : cutoffs) {
    report.metrics["acc@" + std::to_string(k)] = acc_at_k(run, qrels, k);
    report.metrics["ndcg@" + std::to_string(k)] = ndcg_at_k(run, qrels, k);
    report.metrics["map@" + std::to_string(k)] = map_at_k(run, qrels, k);
  }
  return report;
}

namespace {

// Display order: metric family, then numeric cutoff.
std::vector<std::string> ordered_keys(const EvalReport& report) {
  std::vector<std::string> keys;
  for (const auto& [name, value] : report.metrics) keys.push_back(name);
  auto rank = [](const std::string& key) {
    auto at = key.find('@');
    std::string family = key.substr(0, at);
    int f = family == "acc" ? 0 : family == "ndcg" ? 1 : family == "map" ? 2 : 3;
    unsigned long k = at == std::string::npos ? 0 : std::stoul(key.substr(at + 1));
    return std::pair{f, k};
  };
  std::sort(keys.begin(), keys.end(),
            [&](const std::string& a, const std::string& b) { return rank(a) < rank(b); });
  return keys;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

// Left-aligned metric-name column.
std::string label(std::string s) {
  s.resize(std::max<std::size_t>(s.size() + 1, 12), ' ');
  return s;
}

}  // namespace

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["tag"] = report.tag;
  j["n_queries"] = report.n_queries;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& key : ordered_keys(report)) metrics[key] = report.metrics.at(key);
  j["metrics"] = std::move(metrics);
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& report) {
  const std::size_t w = std::max<std::size_t>(12, report.tag.size() + 2);
  std::string out = label("metric") + pad(report.tag, w) + "\n";
  for (const auto& key : ordered_keys(report)) out += label(key) + pad(fixed(report.metrics.at(key)), w) + "\n";
  out += label("queries") + pad(std::to_string(report.n_queries), w) + "\n";
  return out;
}

std::string report_table(const EvalReport& before, const EvalReport& after) {
  const std::size_t w = std::max<std::size_t>({12, before.tag.size() + 2, after.tag.size() + 2});
  std::string out = label("metric") + pad(before.tag, w) + pad(after.tag, w) + pad("delta", w) + "\n";
  for (const auto& key : ordered_keys(after)) {
    auto b = before.metrics.find(key);
    if (b == before.metrics.end()) continue;
    double a = after.metrics.at(key);
    std::string delta = fixed(a - b->second);
    if (a - b->second >= 0.0) delta.insert(0, "+");
    out += label(key) + pad(fixed(b->second), w) + pad(fixed(a), w) + pad(delta, w) + "\n";
  }
  out += label("queries") + pad(std::to_string(before.n_queries), w) + pad(std::to_string(after.n_queries), w) + "\n";
  return out;
}

}  // namespace coprompt
