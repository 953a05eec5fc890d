#include "coprompt/remote.hpp"

#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "coprompt/error.hpp"
#include "coprompt/parallel.hpp"

namespace coprompt {

using nlohmann::json;

namespace {

httplib::Client make_client(const std::string& host, std::chrono::milliseconds timeout) {
  httplib::Client client(host);
  const auto secs = static_cast<time_t>(timeout.count() / 1000);
  const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  return client;
}

Error protocol(const std::string& detail) {
  return Error(Errc::protocol_violation, "ProtocolViolation(" + detail + ")");
}

void check_status(const httplib::Result& res, const std::string& path) {
  if (res->status == 200) return;
  std::string detail = path + ": HTTP " + std::to_string(res->status);
  if (!res->body.empty()) detail += " " + res->body.substr(0, 200);
  if (res->status == 503) throw Error(Errc::scorer_unavailable, detail);
  if (res->status == 422) throw Error(Errc::empty_query, detail);
  throw protocol(detail);
}

json parse_body(const std::string& body, const std::string& path) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw protocol(path + ": body is not a JSON object");
  return j;
}

}  // namespace

RemoteModel::RemoteModel(RemoteOptions options) : options_(std::move(options)) {
  if (options_.max_in_flight == 0 || options_.batch_size == 0)
    throw Error(Errc::invalid_argument, "max_in_flight and batch_size must be >= 1");

  const std::string& url = options_.url;
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(Errc::invalid_argument, "endpoint must be http://host:port");
  auto slash = url.find('/', scheme + 3);
  host_ = url.substr(0, slash);
  if (slash != std::string::npos) {
    base_path_ = url.substr(slash);
    while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  }

  auto client = make_client(host_, options_.timeout);
  auto res = client.Get(base_path_ + "/v1/info");
  if (!res)
    throw Error(Errc::connection_failed,
                "ConnectionFailed(" + url + ": " + httplib::to_string(res.error()) + ")");
  check_status(res, "/v1/info");
  json info = parse_body(res->body, "/v1/info");
  if (!info.contains("name") || !info["name"].is_string())
    throw protocol("/v1/info: missing string name");
  if (!info.contains("max_context") || !info["max_context"].is_number_integer() ||
      info["max_context"].get<long long>() < 0)
    throw protocol("/v1/info: missing integer max_context");
  name_ = info["name"].get<std::string>();
  max_context_ = info["max_context"].get<std::size_t>();
}

std::string RemoteModel::post(const std::string& path, const std::string& body) const {
  auto client = make_client(host_, options_.timeout);
  httplib::Error last = httplib::Error::Unknown;
  for (std::size_t attempt = 0; attempt <= options_.retries; ++attempt) {
    auto res = client.Post(base_path_ + path, body, "application/json");
    if (res) {
      check_status(res, path);
      return res->body;
    }
    last = res.error();
  }
  throw Error(Errc::timeout, "Timeout(" + path + " after " + std::to_string(options_.retries + 1) +
                                 " attempts: " + httplib::to_string(last) + ")");
}

std::vector<double> RemoteModel::score_batch(const Template& tmpl,
                                             std::span<const ScoreItem> items) const {
  std::vector<double> out(items.size());
  const std::size_t chunk = options_.batch_size;
  const std::size_t chunks = (items.size() + chunk - 1) / chunk;

  parallel_for(chunks, options_.max_in_flight, [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    const std::size_t end = std::min(items.size(), begin + chunk);
    json body;
    body["delimiter"] = tmpl.delimiter;
    body["passage_label"] = tmpl.passage_label;
    json list = json::array();
    for (std::size_t i = begin; i < end; ++i)
      list.push_back({{"document", items[i].document}, {"prompt", items[i].prompt}, {"query", items[i].query}});
    body["items"] = std::move(list);

    json reply = parse_body(post("/v1/score", body.dump()), "/v1/score");
    auto scores = reply.find("scores");
    if (scores == reply.end() || !scores->is_array()) throw protocol("/v1/score: missing scores array");
    if (scores->size() != end - begin)
      throw protocol("/v1/score: " + std::to_string(scores->size()) + " scores for " +
                     std::to_string(end - begin) + " items");
    for (std::size_t i = begin; i < end; ++i) {
      const json& v = (*scores)[i - begin];
      if (!v.is_number()) throw protocol("/v1/score: non-numeric score");
      double s = v.get<double>();
      if (!std::isfinite(s) || s > 0.0) throw protocol("/v1/score: score " + v.dump() + " is not <= 0");
      out[i] = s;
    }
  });
  return out;
}

std::vector<TokenLogProb> RemoteModel::next_tokens(std::string_view prefix, std::size_t k) const {
  if (k == 0) throw Error(Errc::invalid_argument, "next_tokens needs k >= 1");
  json body{{"prefix", prefix}, {"top_k", k}};
  json reply = parse_body(post("/v1/next_tokens", body.dump()), "/v1/next_tokens");
  auto tokens = reply.find("tokens");
  if (tokens == reply.end() || !tokens->is_array()) throw protocol("/v1/next_tokens: missing tokens array");
  if (tokens->size() > k) throw protocol("/v1/next_tokens: more than top_k tokens");

  std::vector<TokenLogProb> out;
  for (const json& t : *tokens) {
    if (!t.is_object() || !t.contains("text") || !t["text"].is_string() || !t.contains("logprob") ||
        !t["logprob"].is_number())
      throw protocol("/v1/next_tokens: malformed token entry");
    TokenLogProb tok{t["text"].get<std::string>(), t["logprob"].get<double>()};
    if (tok.text.empty()) throw protocol("/v1/next_tokens: empty token text");
    if (!std::isfinite(tok.logprob) || tok.logprob > 0.0)
      throw protocol("/v1/next_tokens: logprob is not <= 0");
    if (!out.empty() && tok.logprob > out.back().logprob)
      throw protocol("/v1/next_tokens: tokens not in descending logprob order");
    out.push_back(std::move(tok));
  }
  return out;
}

std::string RemoteModel::join(std::string_view prefix, std::string_view token) const {
  std::string out(prefix);
  out += token;
  return out;
}

std::shared_ptr<RemoteModel> remote_scorer(const std::string& url, std::chrono::milliseconds timeout,
                                           std::size_t max_in_flight) {
  RemoteOptions options;
  options.url = url;
  options.timeout = timeout;
  options.max_in_flight = max_in_flight;
  return std::make_shared<RemoteModel>(std::move(options));
}

}  // namespace coprompt
