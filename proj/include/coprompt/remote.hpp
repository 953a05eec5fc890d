#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>

#include "coprompt/scorer.hpp"

namespace coprompt {

struct RemoteOptions {
  std::string url;  // e.g. http://127.0.0.1:8000
  std::chrono::milliseconds timeout{30000};
  std::size_t max_in_flight = 4;
  std::size_t retries = 2;        // extra attempts per request after a transport failure
  std::size_t batch_size = 64;    // items per /v1/score request
  bool deterministic = false;     // whether the served model scores reproducibly
};

/// Client for the JSON-over-HTTP scoring protocol:
///   GET  /v1/info         -> {"name": str, "max_context": int}
///   POST /v1/score        -> {"scores": [float]}
///   POST /v1/next_tokens  -> {"tokens": [{"text": str, "logprob": float}]}
/// Large batches are split into requests of `batch_size` items, at most
/// `max_in_flight` outstanding at once; results are reassembled by index.
/// Every response is checked against the protocol invariants and rejected
/// with ProtocolViolation otherwise.
class RemoteModel final : public Scorer, public Generator {
 public:
  /// Performs the health check; throws ConnectionFailed when it fails.
  explicit RemoteModel(RemoteOptions options);

  std::string name() const override { return name_; }
  bool deterministic() const override { return options_.deterministic; }
  std::vector<double> score_batch(const Template& tmpl,
                                  std::span<const ScoreItem> items) const override;

  std::size_t vocabulary_size() const override { return 0; }
  std::vector<TokenLogProb> next_tokens(std::string_view prefix, std::size_t k) const override;

  /// Served tokens carry their own leading whitespace.
  std::string join(std::string_view prefix, std::string_view token) const override;

  std::size_t max_context() const noexcept { return max_context_; }

 private:
  std::string post(const std::string& path, const std::string& body) const;

  RemoteOptions options_;
  std::string host_;       // scheme://host:port
  std::string base_path_;  // prefix for request paths, no trailing slash
  std::string name_;
  std::size_t max_context_ = 0;
};

std::shared_ptr<RemoteModel> remote_scorer(const std::string& url, std::chrono::milliseconds timeout,
                                           std::size_t max_in_flight);

}  // namespace coprompt
