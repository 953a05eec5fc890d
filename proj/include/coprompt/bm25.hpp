#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coprompt/corpus.hpp"
#include "coprompt/run.hpp"

namespace coprompt {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;

  bool operator==(const Bm25Params&) const = default;
};

/// In-memory Okapi BM25 index with the non-negative idf
/// ln(1 + (N - df + 0.5) / (df + 0.5)). Immutable once built.
class Bm25Index {
 public:
  struct Posting {
    std::size_t doc;  // ordinal; ordinals follow ascending doc-id
    std::size_t tf;

    bool operator==(const Posting&) const = default;
  };

  /// Throws EmptyCorpus.
  static Bm25Index build(const Corpus& corpus, Bm25Params params = {});

  /// Sum over query terms (with multiplicity) of idf * saturated tf.
  double score(std::string_view query, const std::string& doc_id) const;

  /// Top-k documents with a positive score; ties by ascending doc-id.
  std::vector<RunEntry> retrieve(std::string_view query, std::size_t k) const;

  double idf(const std::string& term) const;

  std::size_t num_docs() const noexcept { return doc_ids_.size(); }
  std::size_t num_terms() const noexcept { return postings_.size(); }
  double avg_doc_length() const noexcept { return avg_doc_length_; }
  const Bm25Params& params() const noexcept { return params_; }
  const std::vector<Posting>* postings(const std::string& term) const;
  std::size_t doc_length(const std::string& doc_id) const;
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }

  bool operator==(const Bm25Index&) const = default;

 private:
  double term_weight(double idf, std::size_t tf, std::size_t doc) const;
  std::size_t ordinal(const std::string& doc_id) const;

  Bm25Params params_;
  std::vector<std::string> doc_ids_;  // sorted
  std::vector<std::size_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

/// Runs every query through the index at depth k.
RunList retrieve_all(const Bm25Index& index, const QuerySet& queries, std::size_t k,
                     std::string tag = "bm25");

}  // namespace coprompt
