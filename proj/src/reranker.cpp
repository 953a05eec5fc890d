#include "coprompt/reranker.hpp"

#include <algorithm>
#include <vector>

#include "coprompt/error.hpp"
#include "coprompt/parallel.hpp"
#include "coprompt/text.hpp"

namespace coprompt {

std::string prompt_tag(std::string_view prompt) { return "coprompt-" + hex64(fnv1a64(prompt)); }

RunList rerank(const RunList& run, const Corpus& corpus, const QuerySet& queries,
               const Scorer& scorer, const RerankConfig& config) {
  if (config.depth == 0) throw Error(Errc::invalid_argument, "rerank depth must be >= 1");

  struct Job {
    const std::string* qid;
    const std::vector<RunEntry>* entries;
    std::vector<RunEntry> out;
  };
  std::vector<Job> jobs;
  jobs.reserve(run.rankings.size());
  for (const auto& [qid, entries] : run.rankings) {
    if (!queries.find(qid))
      throw Error(Errc::unresolvable_query, "query \"" + qid + "\" has no text");
    const std::size_t depth = std::min(config.depth, entries.size());
    for (std::size_t i = 0; i < depth; ++i)
      if (!corpus.find(entries[i].doc_id))
        throw Error(Errc::unresolvable_document, "UnresolvableDocument(" + entries[i].doc_id + ")");
    jobs.push_back(Job{&qid, &entries, {}});
  }

  parallel_for(jobs.size(), config.workers, [&](std::size_t j) {
    Job& job = jobs[j];
    const Query& query = *queries.find(*job.qid);
    const std::size_t depth = std::min(config.depth, job.entries->size());
    std::vector<ScoreRequest> batch;
    batch.reserve(depth);
    for (std::size_t i = 0; i < depth; ++i)
      batch.push_back(ScoreRequest{corpus.find((*job.entries)[i].doc_id), config.prompt, &query});
    auto scores = score_batch(scorer, config.tmpl, batch);
    job.out.reserve(depth);
    for (const PairScore& s : scores) job.out.push_back(RunEntry{s.doc_id, s.value, 0});
    normalize_ranking(job.out);
  });

  RunList out;
  out.tag = prompt_tag(config.prompt);
  for (Job& job : jobs) out.rankings.emplace(*job.qid, std::move(job.out));
  return out;
}

}  // namespace coprompt
