#include "coprompt/coprompt.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "coprompt/parallel.hpp"

namespace coprompt {

std::string_view to_string(Metric metric) {
  return metric == Metric::base ? "base" : "contrastive";
}

Metric parse_metric(std::string_view name) {
  if (name == "base") return Metric::base;
  if (name == "contrastive") return Metric::contrastive;
  throw Error(Errc::invalid_argument, "unknown metric \"" + std::string(name) + "\"");
}

void BeamConfig::validate() const {
  if (beam_width < 1) throw Error(Errc::invalid_argument, "beam width must be >= 1");
  if (num_results < 1) throw Error(Errc::invalid_argument, "number of results must be >= 1");
}

bool ranks_before(double metric_a, std::string_view prompt_a, double metric_b,
                  std::string_view prompt_b) {
  if (metric_a != metric_b) return metric_a > metric_b;
  return prompt_a < prompt_b;
}

namespace {

void require_pairs(const PairSet& pairs) {
  if (pairs.pairs.empty()) throw Error(Errc::empty_pair_set, "pair set is empty");
}

void require_negatives(const PairSet& pairs) {
  for (const Pair& p : pairs.pairs)
    if (p.negatives.empty())
      throw Error(Errc::missing_negatives, "MissingNegatives(" + p.query.id + ")");
}

std::size_t negative_count(const PairSet& pairs) {
  std::size_t n = 0;
  for (const Pair& p : pairs.pairs) n += p.negatives.size();
  return n;
}

// Positive pairs first (pair order), then every (query, negative) pair.
std::vector<double> pair_scores(const Scorer& scorer, const PairSet& pairs, std::string_view prompt,
                                const Template& tmpl, bool with_negatives) {
  std::vector<ScoreRequest> batch;
  batch.reserve(pairs.pairs.size() + (with_negatives ? negative_count(pairs) : 0));
  for (const Pair& p : pairs.pairs) batch.push_back(ScoreRequest{&p.positive, prompt, &p.query});
  if (with_negatives)
    for (const Pair& p : pairs.pairs)
      for (const Document& d : p.negatives) batch.push_back(ScoreRequest{&d, prompt, &p.query});
  std::vector<double> out;
  out.reserve(batch.size());
  for (const PairScore& s : score_batch(scorer, tmpl, batch)) out.push_back(s.value);
  return out;
}

double mean_exp(std::span<const double> log_scores) {
  double sum = 0.0;
  for (double s : log_scores) sum += std::exp(s);
  return sum / static_cast<double>(log_scores.size());
}

// log(mean(exp(x))) without underflow.
double log_mean_exp(std::span<const double> xs) {
  const double top = *std::max_element(xs.begin(), xs.end());
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - top);
  return top + std::log(sum / static_cast<double>(xs.size()));
}

double metric_from_scores(Metric metric, std::span<const double> scores, std::size_t positives) {
  if (metric == Metric::base) return mean_exp(scores.first(positives));
  const double log_pos = log_mean_exp(scores.first(positives));
  const double log_neg = log_mean_exp(scores.subspan(positives));
  return 1.0 / (1.0 + std::exp(log_neg - log_pos));
}

}  // namespace

double base_likelihood(const Scorer& scorer, const PairSet& pairs, std::string_view prompt,
                       const Template& tmpl) {
  require_pairs(pairs);
  return metric_from_scores(Metric::base, pair_scores(scorer, pairs, prompt, tmpl, false),
                            pairs.pairs.size());
}

double contrastive_likelihood(const Scorer& scorer, const PairSet& pairs, std::string_view prompt,
                              const Template& tmpl) {
  require_pairs(pairs);
  require_negatives(pairs);
  return metric_from_scores(Metric::contrastive, pair_scores(scorer, pairs, prompt, tmpl, true),
                            pairs.pairs.size());
}

double prompt_metric(Metric metric, const Scorer& scorer, const PairSet& pairs,
                     std::string_view prompt, const Template& tmpl) {
  return metric == Metric::base ? base_likelihood(scorer, pairs, prompt, tmpl)
                                : contrastive_likelihood(scorer, pairs, prompt, tmpl);
}

std::vector<double> evaluate_prompts(Metric metric, const Scorer& scorer, const PairSet& pairs,
                                     std::span<const std::string> prompts, const Template& tmpl,
                                     std::size_t workers) {
  require_pairs(pairs);
  const bool contrastive = metric == Metric::contrastive;
  if (contrastive) require_negatives(pairs);
  std::vector<double> out(prompts.size());
  if (prompts.empty()) return out;

  if (workers > 1) {
    parallel_for(prompts.size(), workers, [&](std::size_t i) {
      out[i] = metric_from_scores(metric, pair_scores(scorer, pairs, prompts[i], tmpl, contrastive),
                                  pairs.pairs.size());
    });
    return out;
  }

  // One scorer batch for the whole level keeps remote round-trips low.
  const std::size_t per_prompt = pairs.pairs.size() + (contrastive ? negative_count(pairs) : 0);
  std::vector<ScoreRequest> batch;
  batch.reserve(per_prompt * prompts.size());
  for (const std::string& prompt : prompts) {
    for (const Pair& p : pairs.pairs) batch.push_back(ScoreRequest{&p.positive, prompt, &p.query});
    if (contrastive)
      for (const Pair& p : pairs.pairs)
        for (const Document& d : p.negatives) batch.push_back(ScoreRequest{&d, prompt, &p.query});
  }
  std::vector<double> scores;
  scores.reserve(batch.size());
  for (const PairScore& s : score_batch(scorer, tmpl, batch)) scores.push_back(s.value);
  for (std::size_t i = 0; i < prompts.size(); ++i)
    out[i] = metric_from_scores(metric, std::span<const double>(scores).subspan(i * per_prompt, per_prompt),
                                pairs.pairs.size());
  return out;
}

std::vector<std::string> expand(const Generator& generator, std::string_view candidate,
                                std::size_t beam_width) {
  if (beam_width < 1) throw Error(Errc::invalid_argument, "beam width must be >= 1");
  std::vector<std::string> out;
  for (const TokenLogProb& t : generator.next_tokens(candidate, beam_width))
    out.push_back(generator.join(candidate, t.text));
  return out;
}

namespace {

std::vector<PromptResult> top_results(const std::vector<BeamLevel>& history, std::size_t n) {
  std::vector<PromptResult> pool;
  std::unordered_set<std::string_view> seen;
  for (const BeamLevel& level : history)
    for (const Candidate& c : level.kept)
      if (seen.insert(c.prompt).second) pool.push_back(PromptResult{c.prompt, c.metric, level.level});
  std::sort(pool.begin(), pool.end(), [](const PromptResult& a, const PromptResult& b) {
    return ranks_before(a.metric, a.prompt, b.metric, b.prompt);
  });
  if (pool.size() > n) pool.resize(n);
  return pool;
}

}  // namespace

SearchResult co_prompt_search(const Generator& generator, const Scorer& scorer,
                              const PairSet& pairs, const BeamConfig& config,
                              const SearchOptions& options) {
  config.validate();
  require_pairs(pairs);
  if (config.metric == Metric::contrastive) require_negatives(pairs);

  SearchResult result;
  std::unordered_map<std::string, double> cache;

  // Scores the prompts not yet seen; returns each prompt's metric.
  auto score_level = [&](const std::vector<std::string>& prompts) {
    std::vector<std::string> fresh;
    for (const auto& p : prompts)
      if (!cache.contains(p)) fresh.push_back(p);
    auto values = evaluate_prompts(config.metric, scorer, pairs, fresh, config.tmpl, options.workers);
    for (std::size_t i = 0; i < fresh.size(); ++i) cache.emplace(fresh[i], values[i]);
    result.evaluations += fresh.size();
    std::vector<Candidate> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(Candidate{p, cache.at(p)});
    return out;
  };

  auto settle = [&](BeamLevel level) {
    result.history.push_back(std::move(level));
    if (options.on_level) options.on_level(result.history.back());
  };

  settle(BeamLevel{1, score_level({config.start_token})});

  for (std::size_t t = 1; t <= config.max_length; ++t) {
    if (options.cancel && options.cancel->load()) {
      result.results = top_results(result.history, config.num_results);
      throw InterruptedSearch(std::move(result));
    }

    std::vector<std::string> pool;
    std::unordered_set<std::string> seen;
    for (const Candidate& member : result.history.back().kept)
      for (auto& extended : expand(generator, member.prompt, config.beam_width))
        if (seen.insert(extended).second) pool.push_back(std::move(extended));
    if (pool.empty()) break;

    auto scored = score_level(pool);
    std::sort(scored.begin(), scored.end(), [](const Candidate& a, const Candidate& b) {
      return ranks_before(a.metric, a.prompt, b.metric, b.prompt);
    });
    if (scored.size() > config.beam_width) scored.resize(config.beam_width);
    settle(BeamLevel{t + 1, std::move(scored)});
  }

  result.results = top_results(result.history, config.num_results);
  return result;
}

std::string trace_record(const BeamLevel& level) {
  nlohmann::ordered_json j;
  j["level"] = level.level;
  nlohmann::ordered_json kept = nlohmann::ordered_json::array();
  for (const Candidate& c : level.kept) kept.push_back({{"prompt", c.prompt}, {"metric", c.metric}});
  j["kept"] = std::move(kept);
  return j.dump();
}

ScoreStats summarize(std::span<const double> values) {
  ScoreStats s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(s.n));
  return s;
}

ScoreDistribution score_distribution(const Scorer& scorer, const PairSet& pairs,
                                     std::string_view prompt, const Template& tmpl) {
  require_pairs(pairs);
  if (negative_count(pairs) == 0)
    throw Error(Errc::missing_negatives, "score distribution needs at least one negative pair");
  const auto scores = pair_scores(scorer, pairs, prompt, tmpl, true);
  const std::span<const double> all(scores);
  return ScoreDistribution{summarize(all.first(pairs.pairs.size())),
                           summarize(all.subspan(pairs.pairs.size()))};
}

}  // namespace coprompt
