#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "coprompt/corpus.hpp"
#include "coprompt/run.hpp"
#include "coprompt/scorer.hpp"

namespace coprompt {

struct RerankConfig {
  std::string prompt;
  Template tmpl;
  std::size_t depth = 100;
  std::size_t workers = 1;  // queries scored concurrently
};

/// Run tag for a re-ranked list: "coprompt-" followed by the prompt's FNV-1a hash.
std::string prompt_tag(std::string_view prompt);

/// Re-scores each query's top `depth` candidates with the query-likelihood
/// scorer and sorts them by descending score (ties by ascending doc-id).
/// Candidates below `depth` are dropped. Stored scores are the raw mean
/// log-likelihoods.
RunList rerank(const RunList& run, const Corpus& corpus, const QuerySet& queries,
               const Scorer& scorer, const RerankConfig& config);

}  // namespace coprompt
