#include "coprompt/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "coprompt/error.hpp"
#include "coprompt/text.hpp"

namespace coprompt {

Bm25Index Bm25Index::build(const Corpus& corpus, Bm25Params params) {
  if (corpus.empty()) throw Error(Errc::empty_corpus, "cannot index an empty corpus");
  if (params.k1 < 0.0 || params.b < 0.0 || params.b > 1.0)
    throw Error(Errc::invalid_argument, "BM25 needs k1 >= 0 and b in [0, 1]");

  Bm25Index index;
  index.params_ = params;

  std::vector<const Document*> docs;
  docs.reserve(corpus.size());
  for (const Document& d : corpus) docs.push_back(&d);
  std::sort(docs.begin(), docs.end(), [](const Document* a, const Document* b) { return a->id < b->id; });

  index.doc_ids_.reserve(docs.size());
  index.doc_lengths_.reserve(docs.size());
  double total = 0.0;
  for (std::size_t ord = 0; ord < docs.size(); ++ord) {
    const auto tokens = tokenize(docs[ord]->text);
    std::map<std::string_view, std::size_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [term, count] : tf) index.postings_[std::string(term)].push_back({ord, count});
    index.doc_ids_.push_back(docs[ord]->id);
    index.doc_lengths_.push_back(tokens.size());
    total += static_cast<double>(tokens.size());
  }
  index.avg_doc_length_ = total / static_cast<double>(docs.size());
  return index;
}

double Bm25Index::idf(const std::string& term) const {
  auto it = postings_.find(term);
  const double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
  const double n = static_cast<double>(doc_ids_.size());
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double Bm25Index::term_weight(double idf, std::size_t tf, std::size_t doc) const {
  const double f = static_cast<double>(tf);
  // A corpus of empty documents has avg length 0; every tf is then 0 too.
  const double norm = avg_doc_length_ > 0.0
                          ? static_cast<double>(doc_lengths_[doc]) / avg_doc_length_
                          : 1.0;
  return idf * f * (params_.k1 + 1.0) / (f + params_.k1 * (1.0 - params_.b + params_.b * norm));
}

std::size_t Bm25Index::ordinal(const std::string& doc_id) const {
  auto it = std::lower_bound(doc_ids_.begin(), doc_ids_.end(), doc_id);
  if (it == doc_ids_.end() || *it != doc_id)
    throw Error(Errc::unknown_document, "UnknownDocument(" + doc_id + ")");
  return static_cast<std::size_t>(it - doc_ids_.begin());
}

const std::vector<Bm25Index::Posting>* Bm25Index::postings(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

std::size_t Bm25Index::doc_length(const std::string& doc_id) const {
  return doc_lengths_[ordinal(doc_id)];
}

double Bm25Index::score(std::string_view query, const std::string& doc_id) const {
  const std::size_t doc = ordinal(doc_id);
  double total = 0.0;
  for (const auto& term : tokenize(query)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const auto& list = it->second;
    auto p = std::lower_bound(list.begin(), list.end(), doc,
                              [](const Posting& x, std::size_t d) { return x.doc < d; });
    if (p == list.end() || p->doc != doc) continue;
    total += term_weight(idf(term), p->tf, doc);
  }
  return total;
}

std::vector<RunEntry> Bm25Index::retrieve(std::string_view query, std::size_t k) const {
  if (k == 0) throw Error(Errc::invalid_argument, "retrieve needs k >= 1");
  // Term-at-a-time accumulation in query-term order, matching score().
  std::vector<double> acc(doc_ids_.size(), 0.0);
  for (const auto& term : tokenize(query)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = idf(term);
    for (const Posting& p : it->second) acc[p.doc] += term_weight(w, p.tf, p.doc);
  }

  std::vector<std::size_t> hits;
  for (std::size_t d = 0; d < acc.size(); ++d)
    if (acc[d] > 0.0) hits.push_back(d);
  auto better = [&](std::size_t a, std::size_t b) {
    if (acc[a] != acc[b]) return acc[a] > acc[b];
    return a < b;
  };
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), better);
  hits.resize(keep);

  std::vector<RunEntry> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(RunEntry{doc_ids_[hits[i]], acc[hits[i]], i + 1});
  return out;
}

RunList retrieve_all(const Bm25Index& index, const QuerySet& queries, std::size_t k, std::string tag) {
  RunList run;
  run.tag = std::move(tag);
  for (const Query& q : queries) run.rankings[q.id] = index.retrieve(q.text, k);
  return run;
}

}  // namespace coprompt
