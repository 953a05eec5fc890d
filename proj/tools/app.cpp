#include "app.hpp"

#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "coprompt/bm25.hpp"
#include "coprompt/coprompt.hpp"
#include "coprompt/corpus.hpp"
#include "coprompt/error.hpp"
#include "coprompt/metrics.hpp"
#include "coprompt/parallel.hpp"
#include "coprompt/remote.hpp"
#include "coprompt/reranker.hpp"
#include "coprompt/scorer.hpp"
#include "coprompt/text.hpp"

namespace coprompt::app {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Error config_error(const std::string& what) { return Error(Errc::invalid_argument, what); }

void flatten(const std::string& prefix, const json& node, std::map<std::string, json>& out) {
  if (node.is_object() && !node.empty()) {
    for (const auto& [k, v] : node.items()) flatten(prefix.empty() ? k : prefix + "." + k, v, out);
    return;
  }
  out[prefix] = node;
}

}  // namespace

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open config " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw config_error("config " + path.string() + " is not a JSON object");
  std::map<std::string, json> flat;
  flatten("", j, flat);
  for (auto& [k, v] : flat) values_[k] = std::move(v);
}

void Config::set(const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw config_error("--set expects key=value, got \"" + assignment + "\"");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  values_[key] = value.is_discarded() ? json(raw) : std::move(value);
}

std::string Config::str(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.is_null()) return fallback;
  return it->second.is_string() ? it->second.get<std::string>() : it->second.dump();
}

std::string Config::str(const std::string& key) const {
  if (!has(key)) throw config_error("missing setting \"" + key + "\"");
  return str(key, "");
}

double Config::num(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (!it->second.is_number()) throw config_error("setting \"" + key + "\" must be a number");
  return it->second.get<double>();
}

std::size_t Config::count(const std::string& key, std::size_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (!it->second.is_number_integer() || it->second.get<long long>() < 0)
    throw config_error("setting \"" + key + "\" must be a non-negative integer");
  return it->second.get<std::size_t>();
}

std::vector<std::size_t> Config::counts(const std::string& key, std::vector<std::size_t> fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::size_t> out;
  const json& v = it->second;
  if (v.is_number_integer() && v.get<long long>() > 0) return {v.get<std::size_t>()};
  if (!v.is_array()) throw config_error("setting \"" + key + "\" must be a list of integers");
  for (const json& e : v) {
    if (!e.is_number_integer() || e.get<long long>() < 1)
      throw config_error("setting \"" + key + "\" must hold integers >= 1");
    out.push_back(e.get<std::size_t>());
  }
  if (out.empty()) throw config_error("setting \"" + key + "\" must not be empty");
  return out;
}

std::filesystem::path Config::existing_path(const std::string& key) const {
  std::filesystem::path p = str(key);
  if (!std::filesystem::exists(p))
    throw config_error("setting \"" + key + "\": " + p.string() + " does not exist");
  return p;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"index", "retrieve", "rerank", "optimize", "eval", "score-dist"};
  return names;
}

namespace {

/// An Error annotated with the pipeline stage it came from.
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const Error& cause)
      : std::runtime_error(stage + ": " + std::string(to_string(cause.code())) + ": " + cause.what()) {}
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const InterruptedSearch&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Template template_of(const Config& c) {
  Template t;
  t.delimiter = c.str("template.delimiter", "\n");
  t.passage_label = c.str("template.passage_label", "Passage:");
  return t;
}

Bm25Params bm25_of(const Config& c) { return Bm25Params{c.num("bm25.k1", 1.2), c.num("bm25.b", 0.75)}; }

std::size_t workers_of(const Config& c) { return std::max<std::size_t>(1, c.count("workers", default_workers())); }

struct Models {
  std::shared_ptr<Scorer> scorer;
  std::shared_ptr<Generator> generator;
};

Models models_of(const Config& c) {
  const std::string kind = c.str("scorer");
  if (kind == "toy") {
    if (c.has("remote.url")) throw config_error("scorer is \"toy\" but remote.url is also set");
    auto text = read_text(c.existing_path("toy.seed_text"));
    auto model = std::make_shared<NgramModel>(
        text, NgramOptions{static_cast<int>(c.count("toy.order", 2)), c.num("toy.alpha", 1.0),
                           c.num("toy.context_weight", 0.0)});
    return {model, model};
  }
  if (kind == "remote") {
    if (c.has("toy.seed_text")) throw config_error("scorer is \"remote\" but toy.seed_text is also set");
    RemoteOptions o;
    o.url = c.str("remote.url");
    o.timeout = std::chrono::milliseconds(c.count("remote.timeout_ms", 30000));
    o.max_in_flight = c.count("remote.max_in_flight", 4);
    o.retries = c.count("remote.retries", 2);
    o.batch_size = c.count("remote.batch_size", 64);
    o.deterministic = c.str("remote.deterministic", "false") == "true";
    auto model = std::make_shared<RemoteModel>(o);
    return {model, model};
  }
  throw config_error("setting \"scorer\" must be \"toy\" or \"remote\"");
}

Corpus corpus_of(const Config& c) {
  auto p = c.existing_path("corpus");
  return load_corpus(p, format_for(p));
}

QuerySet queries_of(const Config& c) {
  auto p = c.existing_path("queries");
  return load_queries(p, format_for(p));
}

std::string prompt_of(const Config& c) {
  if (c.has("prompt") && c.has("prompt_file")) throw config_error("set either prompt or prompt_file, not both");
  if (c.has("prompt")) return c.str("prompt", "");
  if (!c.has("prompt_file")) throw config_error("missing setting \"prompt\" or \"prompt_file\"");
  json j = json::parse(read_text(c.existing_path("prompt_file")), nullptr, false);
  if (j.is_discarded() || !j.contains("prompts") || !j["prompts"].is_array())
    throw Error(Errc::malformed_record, "prompt file has no prompts array");
  const std::size_t rank = c.count("prompt_rank", 1);
  if (rank < 1 || rank > j["prompts"].size())
    throw config_error("prompt_rank " + std::to_string(rank) + " out of range");
  const json& entry = j["prompts"][rank - 1];
  if (!entry.contains("prompt") || !entry["prompt"].is_string())
    throw Error(Errc::malformed_record, "prompt file entry lacks a prompt string");
  return entry["prompt"].get<std::string>();
}

// Pair file: JSONL {"query_id": .., "positive_id": .., "negative_ids": [..]}.
PairSet read_pairs(const std::filesystem::path& path, const Corpus& corpus, const QuerySet& queries) {
  std::istringstream in(read_text(path));
  PairSet set;
  std::string line;
  std::size_t line_no = 0;
  auto bad = [&](const std::string& why) {
    return Error(Errc::malformed_record, path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("query_id") || !j.contains("positive_id"))
      throw bad("expected query_id and positive_id");
    const Query* q = queries.find(j["query_id"].get<std::string>());
    const Document* d = corpus.find(j["positive_id"].get<std::string>());
    if (!q) throw bad("unknown query");
    if (!d) throw bad("unknown document");
    Pair pair{*q, *d, {}};
    for (const json& n : j.value("negative_ids", json::array())) {
      const Document* neg = corpus.find(n.get<std::string>());
      if (!neg) throw bad("unknown negative document");
      pair.negatives.push_back(*neg);
    }
    set.pairs.push_back(std::move(pair));
  }
  return set;
}

std::string format_pairs(const PairSet& pairs) {
  std::string out;
  for (const Pair& p : pairs.pairs) {
    ordered_json j;
    j["query_id"] = p.query.id;
    j["positive_id"] = p.positive.id;
    j["negative_ids"] = json::array();
    for (const Document& d : p.negatives) j["negative_ids"].push_back(d.id);
    out += j.dump() + "\n";
  }
  return out;
}

// Pairs from a pair file, or sampled from qrels, with negatives mined when needed.
PairSet pairs_of(const Config& c, const Corpus& corpus, const QuerySet& queries, bool need_negatives,
                 std::ostream& out) {
  if (c.has("pairs_file"))
    return stage("load pairs", [&] { return read_pairs(c.existing_path("pairs_file"), corpus, queries); });

  auto qrels = stage("load qrels", [&] { return load_qrels(c.existing_path("qrels")); });
  const auto seed = static_cast<std::uint64_t>(c.count("seed", 0));
  PairSet pairs = stage("sample pairs", [&] {
    return sample_pairs(queries, corpus, qrels, c.count("pairs.n", 1500), seed);
  });
  if (!need_negatives) return pairs;

  RunList run = stage("negative run", [&] {
    if (c.has("run")) return load_run(c.existing_path("run"));
    auto index = Bm25Index::build(corpus, bm25_of(c));
    RunList r;
    r.tag = "bm25";
    for (const Pair& p : pairs.pairs)
      r.rankings[p.query.id] = index.retrieve(p.query.text, c.count("negatives.depth", 100));
    return r;
  });
  pairs = stage("mine negatives", [&] {
    return mine_negatives(pairs, run, corpus, qrels, c.count("pairs.negatives", 1));
  });
  out << "mined negatives for " << pairs.pairs.size() << " pairs\n";
  return pairs;
}

ordered_json report_to_json(const EvalReport& r) { return ordered_json::parse(report_json(r)); }

// ---------------------------------------------------------------------------

int cmd_index(const Config& c, std::ostream& out) {
  auto corpus = stage("load corpus", [&] { return corpus_of(c); });
  auto index = stage("build index", [&] { return Bm25Index::build(corpus, bm25_of(c)); });
  out << "indexed " << index.num_docs() << " documents, " << index.num_terms()
      << " terms, avg length " << format_double(index.avg_doc_length()) << "\n";
  return 0;
}

int cmd_retrieve(const Config& c, std::ostream& out) {
  auto output = c.str("output");
  auto corpus = stage("load corpus", [&] { return corpus_of(c); });
  auto queries = stage("load queries", [&] { return queries_of(c); });
  auto index = stage("build index", [&] { return Bm25Index::build(corpus, bm25_of(c)); });
  const std::size_t k = c.count("retrieve.k", 100);
  auto run = stage("retrieve", [&] { return retrieve_all(index, queries, k, c.str("tag", "bm25")); });
  stage("write run", [&] { write_run(run, output); });
  std::size_t lines = 0;
  for (const auto& [qid, entries] : run.rankings) lines += entries.size();
  out << "retrieved " << run.rankings.size() << " queries, " << lines << " lines (k=" << k << ") -> "
      << output << "\n";
  return 0;
}

int cmd_rerank(const Config& c, std::ostream& out, std::ostream& err) {
  auto output = c.str("output");
  auto corpus = stage("load corpus", [&] { return corpus_of(c); });
  auto queries = stage("load queries", [&] { return queries_of(c); });
  std::vector<std::string> warnings;
  auto run = stage("load run", [&] { return load_run(c.existing_path("run"), &warnings); });
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  auto prompt = stage("resolve prompt", [&] { return prompt_of(c); });
  auto models = stage("scorer", [&] { return models_of(c); });

  RerankConfig rc;
  rc.prompt = prompt;
  rc.tmpl = template_of(c);
  rc.depth = c.count("rerank.depth", 100);
  rc.workers = workers_of(c);
  auto reranked = stage("rerank", [&] { return rerank(run, corpus, queries, *models.scorer, rc); });
  stage("write run", [&] { write_run(reranked, output); });
  out << "reranked " << reranked.rankings.size() << " queries with prompt \"" << prompt << "\" -> "
      << output << "\n";

  if (c.has("qrels")) {
    auto qrels = stage("load qrels", [&] { return load_qrels(c.existing_path("qrels")); });
    auto cutoffs = c.counts("cutoffs", {20, 100});
    auto before = stage("evaluate input", [&] { return evaluate(run, qrels, cutoffs); });
    auto after = stage("evaluate reranked", [&] { return evaluate(reranked, qrels, cutoffs); });
    out << report_table(before, after);
    if (c.has("report")) {
      ordered_json j;
      j["prompt"] = prompt;
      j["input"] = report_to_json(before);
      j["reranked"] = report_to_json(after);
      ordered_json delta = ordered_json::object();
      for (const auto& name : metric_names(cutoffs)) delta[name] = after.metrics.at(name) - before.metrics.at(name);
      j["delta"] = std::move(delta);
      stage("write report", [&] { write_text(c.str("report"), j.dump(2) + "\n"); });
    }
  }
  return 0;
}

int cmd_optimize(const Config& c, std::ostream& out, const std::atomic<bool>* cancel) {
  const auto prompts_out = c.str("prompts_out", "prompts.json");
  const auto trace_out =
      c.str("trace", std::filesystem::path(prompts_out).replace_extension(".trace.jsonl").string());
  BeamConfig bc;
  bc.start_token = c.str("beam.start_token", "Please");
  bc.beam_width = c.count("beam.width", 10);
  bc.max_length = c.count("beam.max_length", 10);
  bc.num_results = c.count("beam.num_results", 10);
  bc.metric = stage("config", [&] { return parse_metric(c.str("beam.metric", "base")); });
  bc.tmpl = template_of(c);
  stage("config", [&] { bc.validate(); });

  auto corpus = stage("load corpus", [&] { return corpus_of(c); });
  auto queries = stage("load queries", [&] { return queries_of(c); });
  auto pairs = pairs_of(c, corpus, queries, bc.metric == Metric::contrastive, out);
  if (c.has("pairs_out")) stage("write pairs", [&] { write_text(c.str("pairs_out"), format_pairs(pairs)); });
  auto models = stage("scorer", [&] { return models_of(c); });

  std::string trace;
  SearchOptions so;
  so.cancel = cancel;
  so.workers = workers_of(c);
  so.on_level = [&](const BeamLevel& level) {
    trace += trace_record(level) + "\n";
    out << "level " << level.level << ": " << level.kept.size() << " kept, best \""
        << (level.kept.empty() ? std::string() : level.kept.front().prompt) << "\"\n";
  };

  auto write_outputs = [&](const SearchResult& r, bool interrupted) {
    ordered_json j;
    j["metric"] = to_string(bc.metric);
    j["start_token"] = bc.start_token;
    j["beam_width"] = bc.beam_width;
    j["max_length"] = bc.max_length;
    j["pairs"] = pairs.pairs.size();
    j["seed"] = c.count("seed", 0);
    j["evaluations"] = r.evaluations;
    if (interrupted) j["interrupted"] = true;
    j["prompts"] = ordered_json::array();
    for (const PromptResult& p : r.results)
      j["prompts"].push_back({{"prompt", p.prompt}, {"metric", p.metric}, {"level", p.level}});
    stage("write prompts", [&] { write_text(prompts_out, j.dump(2) + "\n"); });
    stage("write trace", [&] { write_text(trace_out, trace); });
  };

  try {
    auto result = stage("search", [&] { return co_prompt_search(*models.generator, *models.scorer, pairs, bc, so); });
    write_outputs(result, false);
    out << "best prompt \"" << result.results.front().prompt << "\" metric "
        << format_double(result.results.front().metric) << " (" << result.evaluations
        << " evaluations) -> " << prompts_out << "\n";
  } catch (const InterruptedSearch& e) {
    write_outputs(e.partial(), true);
    out << "interrupted; best-so-far prompts -> " << prompts_out << "\n";
    return 130;
  }
  return 0;
}

int cmd_eval(const Config& c, std::ostream& out, std::ostream& err) {
  std::vector<std::string> warnings;
  auto run = stage("load run", [&] { return load_run(c.existing_path("run"), &warnings); });
  auto qrels = stage("load qrels", [&] { return load_qrels(c.existing_path("qrels")); });
  auto cutoffs = c.counts("cutoffs", {20, 100});
  auto report = stage("evaluate", [&] { return evaluate(run, qrels, cutoffs); });

  ordered_json j;
  if (c.has("compare_run")) {
    auto other = stage("load compare run", [&] { return load_run(c.existing_path("compare_run"), &warnings); });
    auto after = stage("evaluate compare run", [&] { return evaluate(other, qrels, cutoffs); });
    out << report_table(report, after);
    j["before"] = report_to_json(report);
    j["after"] = report_to_json(after);
    ordered_json delta = ordered_json::object();
    for (const auto& name : metric_names(cutoffs)) delta[name] = after.metrics.at(name) - report.metrics.at(name);
    j["delta"] = std::move(delta);
  } else {
    out << report_table(report);
    j = report_to_json(report);
  }
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  if (c.has("report")) stage("write report", [&] { write_text(c.str("report"), j.dump(2) + "\n"); });
  return 0;
}

int cmd_score_dist(const Config& c, std::ostream& out) {
  auto corpus = stage("load corpus", [&] { return corpus_of(c); });
  auto queries = stage("load queries", [&] { return queries_of(c); });
  auto prompt = stage("resolve prompt", [&] { return prompt_of(c); });
  auto pairs = pairs_of(c, corpus, queries, true, out);
  auto models = stage("scorer", [&] { return models_of(c); });
  auto dist = stage("score", [&] { return score_distribution(*models.scorer, pairs, prompt, template_of(c)); });

  auto stats = [](const ScoreStats& s) {
    ordered_json j;
    j["mean"] = s.mean;
    j["std"] = s.stddev;
    j["n"] = s.n;
    return j;
  };
  ordered_json j;
  j["prompt"] = prompt;
  j["pos"] = stats(dist.positive);
  j["neg"] = stats(dist.negative);
  const std::string text = j.dump(2) + "\n";
  out << text;
  if (c.has("report")) stage("write report", [&] { write_text(c.str("report"), text); });
  return 0;
}

}  // namespace

int run_command(const std::string& command, const Config& config, std::ostream& out, std::ostream& err,
                const std::atomic<bool>* cancel) {
  try {
    if (command == "index") return cmd_index(config, out);
    if (command == "retrieve") return cmd_retrieve(config, out);
    if (command == "rerank") return cmd_rerank(config, out, err);
    if (command == "optimize") return cmd_optimize(config, out, cancel);
    if (command == "eval") return cmd_eval(config, out, err);
    if (command == "score-dist") return cmd_score_dist(config, out);
    err << "error: unknown command \"" << command << "\"\n";
    return 2;
  } catch (const StageError& e) {
    err << "error [" << command << "] " << e.what() << "\n";
  } catch (const Error& e) {
    err << "error [" << command << "] config: " << to_string(e.code()) << ": " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error [" << command << "] " << e.what() << "\n";
  }
  return 1;
}

}  // namespace coprompt::app
