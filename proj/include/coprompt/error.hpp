#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace coprompt {

enum class Errc {
  io,
  malformed_record,
  duplicate_id,
  duplicate_judgment,
  insufficient_pairs,
  missing_ranking,
  empty_query,
  empty_seed_text,
  scorer_unavailable,
  connection_failed,
  protocol_violation,
  timeout,
  empty_corpus,
  unknown_document,
  unresolvable_document,
  unresolvable_query,
  empty_pair_set,
  missing_negatives,
  interrupted_search,
  no_evaluable_queries,
  invalid_argument,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can dispatch on the kind rather than the message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// A failure of one element inside a batched call. Keeps the original code.
class BatchItemError : public Error {
 public:
  BatchItemError(std::size_t index, const Error& cause)
      : Error(cause.code(), "item " + std::to_string(index) + ": " + cause.what()),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace coprompt
