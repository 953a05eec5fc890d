#include "coprompt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "coprompt/error.hpp"
#include "coprompt/text.hpp"

namespace coprompt {

template <typename Record>
void Collection<Record>::add(Record record) {
  auto [it, inserted] = index_.emplace(record.id, records_.size());
  if (!inserted) throw Error(Errc::duplicate_id, "duplicate id \"" + record.id + "\"");
  records_.push_back(std::move(record));
}

template <typename Record>
const Record& Collection<Record>::at(const std::string& id) const {
  if (const Record* r = find(id)) return *r;
  throw Error(Errc::unknown_document, "unknown id \"" + id + "\"");
}

template class Collection<Document>;
template class Collection<Query>;

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  return in;
}

Error malformed(const std::filesystem::path& path, std::size_t line_no, const std::string& why) {
  return Error(Errc::malformed_record,
               path.string() + ":" + std::to_string(line_no) + ": " + why);
}

struct RawRecord {
  std::string id;
  std::optional<std::string> title;
  std::string text;
};

// Reads id/title/text records, skipping blank lines.
template <typename Sink>
void read_records(const std::filesystem::path& path, DataFormat format, Sink&& sink) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;

    RawRecord rec;
    if (format == DataFormat::jsonl) {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) throw malformed(path, line_no, "not a JSON object");
      auto id = j.find("_id");
      auto text = j.find("text");
      if (id == j.end() || !id->is_string()) throw malformed(path, line_no, "missing string _id");
      if (text == j.end() || !text->is_string()) throw malformed(path, line_no, "missing string text");
      rec.id = id->get<std::string>();
      rec.text = text->get<std::string>();
      if (auto title = j.find("title"); title != j.end() && title->is_string())
        rec.title = title->get<std::string>();
    } else {
      auto tab = line.find('\t');
      if (tab == std::string::npos) throw malformed(path, line_no, "expected id<TAB>text");
      rec.id = line.substr(0, tab);
      rec.text = line.substr(tab + 1);
    }
    rec.id = std::string(trim(rec.id));
    rec.text = std::string(trim(rec.text));
    if (rec.id.empty()) throw malformed(path, line_no, "empty id");
    if (rec.text.empty()) throw malformed(path, line_no, "empty text");
    try {
      sink(std::move(rec));
    } catch (const Error& e) {
      if (e.code() != Errc::duplicate_id) throw;
      throw Error(Errc::duplicate_id,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

// Uniform integer in [0, bound) from a 64-bit engine, rejection-sampled so
// the result does not depend on the standard library's distributions.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

DataFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".tsv" ? DataFormat::tsv : DataFormat::jsonl;
}

Corpus load_corpus(const std::filesystem::path& path, DataFormat format) {
  Corpus corpus;
  read_records(path, format, [&](RawRecord rec) {
    corpus.add(Document{std::move(rec.id), std::move(rec.title), std::move(rec.text)});
  });
  return corpus;
}

QuerySet load_queries(const std::filesystem::path& path, DataFormat format) {
  QuerySet queries;
  read_records(path, format, [&](RawRecord rec) {
    queries.add(Query{std::move(rec.id), std::move(rec.text)});
  });
  return queries;
}

void Qrels::add(const std::string& query_id, const std::string& doc_id, int grade) {
  if (grade < 0) throw Error(Errc::malformed_record, "negative grade for " + query_id + "/" + doc_id);
  auto [it, inserted] = by_query_[query_id].emplace(doc_id, grade);
  if (!inserted)
    throw Error(Errc::duplicate_judgment, "repeated judgment for " + query_id + "/" + doc_id);
  ++size_;
}

int Qrels::grade(const std::string& query_id, const std::string& doc_id) const {
  auto q = by_query_.find(query_id);
  if (q == by_query_.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

const std::map<std::string, int>* Qrels::judgments(const std::string& query_id) const {
  auto q = by_query_.find(query_id);
  return q == by_query_.end() ? nullptr : &q->second;
}

Qrels load_qrels(const std::filesystem::path& path) {
  auto in = open_input(path);
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string qid, iter, docid, grade_text, extra;
    if (!(fields >> qid >> iter >> docid >> grade_text) || (fields >> extra))
      throw malformed(path, line_no, "expected `qid 0 docid grade`");
    int grade = 0;
    std::size_t used = 0;
    try {
      grade = std::stoi(grade_text, &used);
    } catch (const std::exception&) {
      throw malformed(path, line_no, "grade is not an integer");
    }
    if (used != grade_text.size()) throw malformed(path, line_no, "grade is not an integer");
    if (grade < 0) throw malformed(path, line_no, "grade < 0");
    try {
      qrels.add(qid, docid, grade);
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return qrels;
}

void write_qrels(const Qrels& qrels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  for (const auto& [qid, docs] : qrels.by_query())
    for (const auto& [docid, grade] : docs) out << qid << " 0 " << docid << ' ' << grade << '\n';
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

PairSet sample_pairs(const QuerySet& queries, const Corpus& corpus, const Qrels& qrels,
                     std::size_t n, std::uint64_t seed) {
  // Eligible queries in file order, each with its best judged document.
  std::vector<Pair> eligible;
  for (const Query& q : queries) {
    const auto* judged = qrels.judgments(q.id);
    if (!judged) continue;
    const Document* best = nullptr;
    int best_grade = 0;
    for (const auto& [docid, grade] : *judged) {  // ascending doc-id
      if (grade < 1 || grade <= best_grade) continue;
      if (const Document* d = corpus.find(docid)) {
        best = d;
        best_grade = grade;
      }
    }
    if (best) eligible.push_back(Pair{q, *best, {}});
  }
  if (eligible.size() < n)
    throw Error(Errc::insufficient_pairs, "InsufficientPairs(" + std::to_string(eligible.size()) +
                                              ", " + std::to_string(n) + ")");

  // Partial Fisher-Yates: the first n slots become the sample.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    auto j = i + bounded(rng, eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(n);
  return PairSet{std::move(eligible), seed};
}

PairSet mine_negatives(const PairSet& pairs, const RunList& run, const Corpus& corpus,
                       const Qrels& qrels, std::size_t m) {
  PairSet out = pairs;
  for (Pair& pair : out.pairs) {
    const auto* ranking = run.find(pair.query.id);
    if (!ranking) throw Error(Errc::missing_ranking, "MissingRanking(" + pair.query.id + ")");
    std::size_t added = 0;
    for (const RunEntry& e : *ranking) {
      if (added >= m) break;
      if (e.doc_id == pair.positive.id || qrels.grade(pair.query.id, e.doc_id) >= 1) continue;
      bool seen = std::any_of(pair.negatives.begin(), pair.negatives.end(),
                              [&](const Document& d) { return d.id == e.doc_id; });
      if (seen) continue;
      const Document* doc = corpus.find(e.doc_id);
      if (!doc)
        throw Error(Errc::unresolvable_document, "run document \"" + e.doc_id + "\" not in corpus");
      pair.negatives.push_back(*doc);
      ++added;
    }
  }
  return out;
}

void validate(const PairSet& pairs, const Qrels& qrels) {
  for (const Pair& p : pairs.pairs) {
    if (qrels.grade(p.query.id, p.positive.id) < 1)
      throw Error(Errc::malformed_record, "positive " + p.positive.id + " is not relevant to " + p.query.id);
    for (const Document& d : p.negatives)
      if (qrels.grade(p.query.id, d.id) >= 1)
        throw Error(Errc::malformed_record, "negative " + d.id + " is relevant to " + p.query.id);
  }
}

}  // namespace coprompt
