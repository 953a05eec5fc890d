#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coprompt/corpus.hpp"
#include "coprompt/error.hpp"
#include "coprompt/scorer.hpp"

namespace coprompt {

/// How a candidate prompt is judged by the discriminator.
///  - base: mean over pairs of P(q | d, prompt), with P realized as
///    exp(mean token log-likelihood).
///  - contrastive: base(positives) / (base(positives) + base(negatives)).
enum class Metric { base, contrastive };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view name);

struct BeamConfig {
  std::string start_token = "Please";
  std::size_t beam_width = 10;   // B
  std::size_t max_length = 10;   // L, extension steps after the start token
  std::size_t num_results = 10;  // N
  Metric metric = Metric::base;
  Template tmpl;

  /// Throws InvalidArgument unless B >= 1 and N >= 1.
  void validate() const;
};

struct Candidate {
  std::string prompt;
  double metric = 0.0;

  bool operator==(const Candidate&) const = default;
};

/// Candidates kept at one level. Level 1 holds the start token alone.
struct BeamLevel {
  std::size_t level = 0;
  std::vector<Candidate> kept;
};

struct PromptResult {
  std::string prompt;
  double metric = 0.0;
  std::size_t level = 0;

  bool operator==(const PromptResult&) const = default;
};

struct SearchResult {
  std::vector<PromptResult> results;  // top-N, best first
  std::vector<BeamLevel> history;     // every constructed level
  std::size_t evaluations = 0;        // distinct prompts scored
};

/// Search order: higher metric first, then ascending prompt text.
bool ranks_before(double metric_a, std::string_view prompt_a, double metric_b,
                  std::string_view prompt_b);

/// Thrown when a search is cancelled between levels; carries the best
/// results over everything evaluated so far.
class InterruptedSearch : public Error {
 public:
  InterruptedSearch(SearchResult partial)
      : Error(Errc::interrupted_search, "prompt search interrupted"), partial_(std::move(partial)) {}

  const SearchResult& partial() const noexcept { return partial_; }

 private:
  SearchResult partial_;
};

struct SearchOptions {
  /// Called after each level is settled, in level order.
  std::function<void(const BeamLevel&)> on_level;
  /// Checked before each extension step.
  const std::atomic<bool>* cancel = nullptr;
  /// Prompts of one level evaluated concurrently.
  std::size_t workers = 1;
};

double base_likelihood(const Scorer& scorer, const PairSet& pairs, std::string_view prompt,
                       const Template& tmpl);

double contrastive_likelihood(const Scorer& scorer, const PairSet& pairs, std::string_view prompt,
                              const Template& tmpl);

double prompt_metric(Metric metric, const Scorer& scorer, const PairSet& pairs,
                     std::string_view prompt, const Template& tmpl);

/// Metric values for many prompts; element i belongs to prompts[i].
std::vector<double> evaluate_prompts(Metric metric, const Scorer& scorer, const PairSet& pairs,
                                     std::span<const std::string> prompts, const Template& tmpl,
                                     std::size_t workers = 1);

/// The candidate extended by each of the generator's top-B next tokens, in
/// the generator's order.
std::vector<std::string> expand(const Generator& generator, std::string_view candidate,
                                std::size_t beam_width);

/// Discriminator-guided beam search over prompt continuations.
///
/// Starting from the start token, every kept prompt is extended by its
/// top-B generator tokens; the pooled extensions (deduplicated) are scored
/// with the chosen metric and the best B survive to the next level. After
/// L steps the union of all levels is ranked and the best N returned.
/// A prompt's metric is computed once, so the discriminator runs at most
/// 1 + L * B * B times.
SearchResult co_prompt_search(const Generator& generator, const Scorer& scorer,
                              const PairSet& pairs, const BeamConfig& config,
                              const SearchOptions& options = {});

/// One JSONL trace record: {"level": t, "kept": [{"prompt": .., "metric": ..}]}.
std::string trace_record(const BeamLevel& level);

struct ScoreStats {
  double mean = 0.0;
  double stddev = 0.0;  // population form; 0 for a single value
  std::size_t n = 0;

  bool operator==(const ScoreStats&) const = default;
};

struct ScoreDistribution {
  ScoreStats positive;
  ScoreStats negative;
};

ScoreStats summarize(std::span<const double> values);

/// Statistics of pair scores for positive and negative pairs separately.
ScoreDistribution score_distribution(const Scorer& scorer, const PairSet& pairs,
                                     std::string_view prompt, const Template& tmpl);

}  // namespace coprompt
