#include "coprompt/run.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "coprompt/error.hpp"
#include "coprompt/text.hpp"

namespace coprompt {

const std::vector<RunEntry>* RunList::find(const std::string& query_id) const {
  auto it = rankings.find(query_id);
  return it == rankings.end() ? nullptr : &it->second;
}

void normalize_ranking(std::vector<RunEntry>& entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const RunEntry& a, const RunEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].rank = i + 1;
}

void validate(const RunList& run) {
  for (const auto& [qid, entries] : run.rankings) {
    std::set<std::string_view> seen;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const RunEntry& e = entries[i];
      if (e.rank != i + 1)
        throw Error(Errc::malformed_record, "query " + qid + ": ranks are not contiguous from 1");
      if (!std::isfinite(e.score))
        throw Error(Errc::malformed_record, "query " + qid + ": non-finite score");
      if (i > 0 && e.score > entries[i - 1].score)
        throw Error(Errc::malformed_record, "query " + qid + ": scores increase with rank");
      if (!seen.insert(e.doc_id).second)
        throw Error(Errc::malformed_record, "query " + qid + ": duplicate doc " + e.doc_id);
    }
  }
}

RunList load_run(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());

  auto malformed = [&](std::size_t line_no, const std::string& why) {
    return Error(Errc::malformed_record, path.string() + ":" + std::to_string(line_no) + ": " + why);
  };

  RunList run;
  bool have_tag = false;
  std::map<std::string, std::set<std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string qid, q0, docid, rank_text, score_text, tag, extra;
    if (!(fields >> qid >> q0 >> docid >> rank_text >> score_text >> tag) || (fields >> extra))
      throw malformed(line_no, "expected `qid Q0 docid rank score tag`");

    long long rank = 0;
    auto [rp, rec] = std::from_chars(rank_text.data(), rank_text.data() + rank_text.size(), rank);
    if (rec != std::errc{} || rp != rank_text.data() + rank_text.size() || rank < 1)
      throw malformed(line_no, "rank must be an integer >= 1");
    double score = 0.0;
    auto [sp, sec] = std::from_chars(score_text.data(), score_text.data() + score_text.size(), score);
    if (sec != std::errc{} || sp != score_text.data() + score_text.size() || !std::isfinite(score))
      throw malformed(line_no, "score must be a finite number");
    if (!seen[qid].insert(docid).second) throw malformed(line_no, "duplicate doc " + docid);

    if (!have_tag) {
      run.tag = tag;
      have_tag = true;
    }
    run.rankings[qid].push_back(RunEntry{docid, score, static_cast<std::size_t>(rank)});
  }

  for (auto& [qid, entries] : run.rankings) {
    // File order is trusted only through the declared ranks.
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RunEntry& a, const RunEntry& b) { return a.rank < b.rank; });
    bool monotone = true;
    for (std::size_t i = 1; i < entries.size(); ++i)
      if (entries[i].score > entries[i - 1].score) monotone = false;
    if (!monotone && warnings)
      warnings->push_back("NonMonotoneScores: query " + qid + " re-sorted by score");
    if (monotone) {
      for (std::size_t i = 0; i < entries.size(); ++i) entries[i].rank = i + 1;
    } else {
      normalize_ranking(entries);
    }
  }
  return run;
}

std::string format_run(const RunList& run) {
  std::string out;
  const std::string tag = run.tag.empty() ? std::string("run") : run.tag;
  for (const auto& [qid, entries] : run.rankings) {
    for (const RunEntry& e : entries) {
      out += qid;
      out += " Q0 ";
      out += e.doc_id;
      out += ' ';
      out += std::to_string(e.rank);
      out += ' ';
      out += format_double(e.score);
      out += ' ';
      out += tag;
      out += '\n';
    }
  }
  return out;
}

void write_run(const RunList& run, const std::filesystem::path& path) {
  validate(run);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << format_run(run);
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

}  // namespace coprompt
