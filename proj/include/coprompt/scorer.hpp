#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coprompt/corpus.hpp"

namespace coprompt {

/// Scoring template `{passage_label} {document}{delimiter}{prompt}{delimiter}{query}`.
struct Template {
  std::string delimiter = "\n";
  std::string passage_label = "Passage:";
};

struct Rendered {
  std::string text;
  std::size_t query_offset = 0;
  std::size_t query_length = 0;

  std::string_view query() const { return std::string_view(text).substr(query_offset, query_length); }
  std::string_view context() const { return std::string_view(text).substr(0, query_offset); }
};

Rendered render(const Template& tmpl, std::string_view document, std::string_view prompt,
                std::string_view query);

struct ScoreItem {
  std::string_view document;
  std::string_view prompt;
  std::string_view query;
};

/// Conditional scorer: for each item, the mean natural-log probability of the
/// query tokens given the rendered passage and prompt. Values are finite and
/// <= 0. Implementations are immutable and safe to call concurrently.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::string name() const = 0;
  virtual bool deterministic() const = 0;
  virtual std::vector<double> score_batch(const Template& tmpl,
                                          std::span<const ScoreItem> items) const = 0;
};

struct TokenLogProb {
  std::string text;
  double logprob = 0.0;

  bool operator==(const TokenLogProb&) const = default;
};

/// Next-token prior over prompt continuations.
class Generator {
 public:
  virtual ~Generator() = default;

  /// 0 when the vocabulary is not known to the client.
  virtual std::size_t vocabulary_size() const = 0;

  /// Top-k tokens by descending log-prob, ties by ascending token text.
  virtual std::vector<TokenLogProb> next_tokens(std::string_view prefix, std::size_t k) const = 0;

  /// How a proposed token is appended to a prompt. Word-level generators
  /// join with one space.
  virtual std::string join(std::string_view prefix, std::string_view token) const;
};

struct PairScore {
  std::string query_id;
  std::string doc_id;
  std::string prompt;
  double value = 0.0;  // mean token log-likelihood, nats

  bool operator==(const PairScore&) const = default;
};

PairScore score_pair(const Scorer& scorer, const Template& tmpl, const Document& document,
                     std::string_view prompt, const Query& query);

struct ScoreRequest {
  const Document* document = nullptr;
  std::string_view prompt;
  const Query* query = nullptr;
};

/// Element-wise identical to score_pair, order preserved. Failures are
/// rethrown as BatchItemError naming the offending index.
std::vector<PairScore> score_batch(const Scorer& scorer, const Template& tmpl,
                                   std::span<const ScoreRequest> items);

/// Validates raw scorer output against the score invariants.
void check_scores(std::span<const double> scores, std::size_t expected, std::string_view source);

// ---------------------------------------------------------------------------
// Toy n-gram language model

struct NgramOptions {
  int order = 2;        // 1 or 2
  double alpha = 1.0;   // additive smoothing, > 0
  /// Weight of a context cache (unigram distribution of the rendered
  /// passage + prompt tokens) mixed into query-token probabilities when
  /// scoring. 0 gives the plain n-gram model. Generation never uses it.
  double context_weight = 0.0;
};

/// Additive-smoothing unigram/bigram model fit on a seed text. Serves as a
/// deterministic scorer and generator for desk-scale runs.
///
/// P(w | h) = (count(h, w) + alpha) / (count(h) + alpha * V) where count(h)
/// is the number of bigrams starting with h. A history never seen as a
/// bigram start falls back to the unigram estimate
/// (count(w) + alpha) / (N + alpha * V). Words outside the vocabulary get
/// the smoothed-unseen mass instead of an error.
class NgramModel final : public Scorer, public Generator {
 public:
  NgramModel(std::string_view seed_text, NgramOptions options);

  std::string name() const override;
  bool deterministic() const override { return true; }
  std::vector<double> score_batch(const Template& tmpl,
                                  std::span<const ScoreItem> items) const override;

  std::size_t vocabulary_size() const override { return vocab_.size(); }
  std::vector<TokenLogProb> next_tokens(std::string_view prefix, std::size_t k) const override;

  /// P(word | history); `history` empty means no preceding token.
  double probability(std::string_view word, std::string_view history) const;

  /// Per-token log-probabilities of the query tokens under the item's context.
  std::vector<double> query_token_logprobs(const Template& tmpl, const ScoreItem& item) const;

  const std::vector<std::string>& vocabulary() const { return vocab_; }
  const NgramOptions& options() const { return options_; }

 private:
  double unigram(std::string_view word) const;
  std::size_t word_id(std::string_view word) const;  // npos when unknown

  NgramOptions options_;
  std::vector<std::string> vocab_;  // sorted
  std::vector<double> unigram_counts_;
  double total_tokens_ = 0.0;
  // bigram_[h] holds (w, count) sorted by w; history_totals_[h] = sum of counts.
  std::vector<std::vector<std::pair<std::size_t, double>>> bigram_;
  std::vector<double> history_totals_;
};

std::shared_ptr<NgramModel> toy_fit(std::string_view seed_text, int order, double alpha,
                                    double context_weight = 0.0);

}  // namespace coprompt
