#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "coprompt/run.hpp"

namespace coprompt {

struct Document {
  std::string id;
  std::optional<std::string> title;
  std::string text;

  bool operator==(const Document&) const = default;
};

struct Query {
  std::string id;
  std::string text;

  bool operator==(const Query&) const = default;
};

/// Ordered collection with unique ids. Used for both documents and queries.
template <typename Record>
class Collection {
 public:
  /// Throws DuplicateId when the id is already present.
  void add(Record record);

  const Record* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
  }
  const Record& at(const std::string& id) const;

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const Record& operator[](std::size_t i) const { return records_[i]; }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

 private:
  std::vector<Record> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

using Corpus = Collection<Document>;
using QuerySet = Collection<Query>;

extern template class Collection<Document>;
extern template class Collection<Query>;

/// Graded judgments keyed by query then document.
class Qrels {
 public:
  /// Throws DuplicateJudgment for a repeated key, MalformedRecord for grade < 0.
  void add(const std::string& query_id, const std::string& doc_id, int grade);

  /// Grade of the pair; unjudged pairs read as 0.
  int grade(const std::string& query_id, const std::string& doc_id) const;
  const std::map<std::string, int>* judgments(const std::string& query_id) const;

  std::size_t size() const noexcept { return size_; }
  const std::map<std::string, std::map<std::string, int>>& by_query() const { return by_query_; }

  bool operator==(const Qrels&) const = default;

 private:
  std::map<std::string, std::map<std::string, int>> by_query_;
  std::size_t size_ = 0;
};

struct Pair {
  Query query;
  Document positive;
  std::vector<Document> negatives;
};

struct PairSet {
  std::vector<Pair> pairs;
  std::uint64_t seed = 0;
};

enum class DataFormat { jsonl, tsv };

/// `.tsv` selects TSV; anything else is read as JSONL.
DataFormat format_for(const std::filesystem::path& path);

Corpus load_corpus(const std::filesystem::path& path, DataFormat format);
QuerySet load_queries(const std::filesystem::path& path, DataFormat format);
Qrels load_qrels(const std::filesystem::path& path);
void write_qrels(const Qrels& qrels, const std::filesystem::path& path);

/// Draws `n` distinct eligible queries uniformly without replacement and
/// pairs each with its highest-grade judged document (ties by doc-id).
PairSet sample_pairs(const QuerySet& queries, const Corpus& corpus, const Qrels& qrels,
                     std::size_t n, std::uint64_t seed);

/// Appends up to `m` negatives per pair: the best-ranked run documents
/// that are unjudged or judged 0, in rank order.
PairSet mine_negatives(const PairSet& pairs, const RunList& run, const Corpus& corpus,
                       const Qrels& qrels, std::size_t m);

/// Throws MalformedRecord when a positive is not relevant or a negative is.
void validate(const PairSet& pairs, const Qrels& qrels);

}  // namespace coprompt
