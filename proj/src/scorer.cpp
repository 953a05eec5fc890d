#include "coprompt/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "coprompt/error.hpp"
#include "coprompt/text.hpp"

namespace coprompt {

Rendered render(const Template& tmpl, std::string_view document, std::string_view prompt,
                std::string_view query) {
  Rendered r;
  r.text.reserve(tmpl.passage_label.size() + document.size() + prompt.size() + query.size() +
                 2 * tmpl.delimiter.size() + 1);
  r.text += tmpl.passage_label;
  r.text += ' ';
  r.text += document;
  r.text += tmpl.delimiter;
  r.text += prompt;
  r.text += tmpl.delimiter;
  r.query_offset = r.text.size();
  r.query_length = query.size();
  r.text += query;
  return r;
}

std::string Generator::join(std::string_view prefix, std::string_view token) const {
  if (prefix.empty()) return std::string(token);
  std::string out(prefix);
  out += ' ';
  out += token;
  return out;
}

void check_scores(std::span<const double> scores, std::size_t expected, std::string_view source) {
  if (scores.size() != expected)
    throw Error(Errc::protocol_violation, std::string(source) + ": expected " +
                                              std::to_string(expected) + " scores, got " +
                                              std::to_string(scores.size()));
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (!std::isfinite(scores[i]) || scores[i] > 0.0)
      throw Error(Errc::protocol_violation, std::string(source) + ": score " + std::to_string(i) +
                                                " is not a finite value <= 0");
}

PairScore score_pair(const Scorer& scorer, const Template& tmpl, const Document& document,
                     std::string_view prompt, const Query& query) {
  ScoreRequest req{&document, prompt, &query};
  try {
    return score_batch(scorer, tmpl, std::span<const ScoreRequest>(&req, 1)).front();
  } catch (const BatchItemError& e) {
    throw Error(e.code(), e.what());
  }
}

std::vector<PairScore> score_batch(const Scorer& scorer, const Template& tmpl,
                                   std::span<const ScoreRequest> items) {
  std::vector<ScoreItem> raw;
  raw.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const ScoreRequest& r = items[i];
    if (trim(r.query->text).empty())
      throw BatchItemError(i, Error(Errc::empty_query, "query " + r.query->id + " is empty"));
    raw.push_back(ScoreItem{r.document->text, r.prompt, r.query->text});
  }
  std::vector<double> values = scorer.score_batch(tmpl, raw);
  check_scores(values, items.size(), scorer.name());

  std::vector<PairScore> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i)
    out.push_back(PairScore{items[i].query->id, items[i].document->id, std::string(items[i].prompt),
                            values[i]});
  return out;
}

// ---------------------------------------------------------------------------

NgramModel::NgramModel(std::string_view seed_text, NgramOptions options) : options_(options) {
  if (options_.order != 1 && options_.order != 2)
    throw Error(Errc::invalid_argument, "n-gram order must be 1 or 2");
  if (!(options_.alpha > 0.0) || !std::isfinite(options_.alpha))
    throw Error(Errc::invalid_argument, "smoothing alpha must be > 0");
  if (!(options_.context_weight >= 0.0 && options_.context_weight < 1.0))
    throw Error(Errc::invalid_argument, "context weight must be in [0, 1)");

  const auto tokens = tokenize(seed_text);
  if (tokens.empty()) throw Error(Errc::empty_seed_text, "seed text contains no tokens");

  vocab_ = tokens;
  std::sort(vocab_.begin(), vocab_.end());
  vocab_.erase(std::unique(vocab_.begin(), vocab_.end()), vocab_.end());

  unigram_counts_.assign(vocab_.size(), 0.0);
  bigram_.resize(vocab_.size());
  history_totals_.assign(vocab_.size(), 0.0);
  total_tokens_ = static_cast<double>(tokens.size());

  std::vector<std::map<std::size_t, double>> pairs(vocab_.size());
  std::size_t prev = std::string::npos;
  for (const auto& t : tokens) {
    std::size_t id = word_id(t);
    unigram_counts_[id] += 1.0;
    if (prev != std::string::npos) {
      pairs[prev][id] += 1.0;
      history_totals_[prev] += 1.0;
    }
    prev = id;
  }
  for (std::size_t h = 0; h < pairs.size(); ++h)
    bigram_[h].assign(pairs[h].begin(), pairs[h].end());
}

std::string NgramModel::name() const {
  return "ngram(order=" + std::to_string(options_.order) + ",alpha=" + format_double(options_.alpha) +
         ",context=" + format_double(options_.context_weight) + ")";
}

std::size_t NgramModel::word_id(std::string_view word) const {
  auto it = std::lower_bound(vocab_.begin(), vocab_.end(), word);
  return (it != vocab_.end() && *it == word) ? static_cast<std::size_t>(it - vocab_.begin())
                                             : std::string::npos;
}

double NgramModel::unigram(std::string_view word) const {
  const double v = static_cast<double>(vocab_.size());
  std::size_t id = word_id(word);
  double count = id == std::string::npos ? 0.0 : unigram_counts_[id];
  return (count + options_.alpha) / (total_tokens_ + options_.alpha * v);
}

double NgramModel::probability(std::string_view word, std::string_view history) const {
  if (options_.order == 1 || history.empty()) return unigram(word);
  std::size_t h = word_id(history);
  if (h == std::string::npos || history_totals_[h] == 0.0) return unigram(word);

  const double v = static_cast<double>(vocab_.size());
  double count = 0.0;
  if (std::size_t w = word_id(word); w != std::string::npos) {
    const auto& row = bigram_[h];
    auto it = std::lower_bound(row.begin(), row.end(), w,
                               [](const auto& entry, std::size_t id) { return entry.first < id; });
    if (it != row.end() && it->first == w) count = it->second;
  }
  return (count + options_.alpha) / (history_totals_[h] + options_.alpha * v);
}

std::vector<double> NgramModel::query_token_logprobs(const Template& tmpl,
                                                     const ScoreItem& item) const {
  const Rendered rendered = render(tmpl, item.document, item.prompt, item.query);
  const auto context = tokenize(rendered.context());
  const auto query = tokenize(rendered.query());
  if (query.empty()) throw Error(Errc::empty_query, "query has no tokens");

  const double lambda = context.empty() ? 0.0 : options_.context_weight;
  std::map<std::string_view, double> cache;
  if (lambda > 0.0)
    for (const auto& t : context) cache[t] += 1.0;
  const double context_size = static_cast<double>(context.size());

  std::vector<double> out;
  out.reserve(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    std::string_view history;
    if (i > 0) {
      history = query[i - 1];
    } else if (!context.empty()) {
      history = context.back();
    }
    double p = probability(query[i], history);
    if (lambda > 0.0) {
      auto it = cache.find(query[i]);
      double cached = it == cache.end() ? 0.0 : it->second / context_size;
      p = lambda * cached + (1.0 - lambda) * p;
    }
    out.push_back(std::log(p));
  }
  return out;
}

std::vector<double> NgramModel::score_batch(const Template& tmpl,
                                            std::span<const ScoreItem> items) const {
  std::vector<double> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::vector<double> lp;
    try {
      lp = query_token_logprobs(tmpl, items[i]);
    } catch (const Error& e) {
      throw BatchItemError(i, e);
    }
    double sum = 0.0;
    for (double x : lp) sum += x;
    out.push_back(sum / static_cast<double>(lp.size()));
  }
  return out;
}

std::vector<TokenLogProb> NgramModel::next_tokens(std::string_view prefix, std::size_t k) const {
  if (k == 0) throw Error(Errc::invalid_argument, "next_tokens needs k >= 1");
  std::string history;
  if (options_.order == 2) {
    auto prefix_tokens = tokenize(prefix);
    if (!prefix_tokens.empty()) history = std::move(prefix_tokens.back());
  }
  std::vector<TokenLogProb> all;
  all.reserve(vocab_.size());
  for (const auto& w : vocab_) all.push_back(TokenLogProb{w, std::log(probability(w, history))});
  // vocab_ is already sorted, so a stable sort on log-prob keeps text order among ties.
  std::stable_sort(all.begin(), all.end(),
                   [](const TokenLogProb& a, const TokenLogProb& b) { return a.logprob > b.logprob; });
  if (all.size() > k) all.resize(k);
  return all;
}

std::shared_ptr<NgramModel> toy_fit(std::string_view seed_text, int order, double alpha,
                                    double context_weight) {
  return std::make_shared<NgramModel>(seed_text, NgramOptions{order, alpha, context_weight});
}

}  // namespace coprompt
