#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace coprompt {

struct RunEntry {
  std::string doc_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  bool operator==(const RunEntry&) const = default;
};

/// Per-query ranked lists. Ranks are contiguous from 1, scores are
/// non-increasing with rank and a doc-id appears at most once per query.
/// Queries iterate in ascending id order, which fixes the on-disk layout.
struct RunList {
  std::string tag = "run";
  std::map<std::string, std::vector<RunEntry>> rankings;

  const std::vector<RunEntry>* find(const std::string& query_id) const;

  bool operator==(const RunList&) const = default;
};

/// Sorts by (score desc, doc-id asc) and renumbers ranks from 1.
void normalize_ranking(std::vector<RunEntry>& entries);

/// Throws MalformedRecord when a ranking breaks the RunList invariants.
void validate(const RunList& run);

/// TREC run format, `qid Q0 docid rank score tag`. Lines whose scores are
/// out of order are re-sorted; a warning per affected query is appended to
/// `warnings` when given.
RunList load_run(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

void write_run(const RunList& run, const std::filesystem::path& path);
std::string format_run(const RunList& run);

}  // namespace coprompt
