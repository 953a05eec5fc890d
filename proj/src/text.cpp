#include "coprompt/text.hpp"

#include <array>
#include <charconv>
#include <system_error>

#include "coprompt/error.hpp"

namespace coprompt {

namespace {
bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         c >= 0x80;
}

char ascii_lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}
}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      current.push_back(ascii_lower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string_view trim(std::string_view text) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  auto first = text.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  auto last = text.find_last_not_of(ws);
  return text.substr(first, last - first + 1);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw Error(Errc::invalid_argument, "cannot format number");
  return std::string(buf.data(), ptr);
}

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::io: return "Io";
    case Errc::malformed_record: return "MalformedRecord";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::duplicate_judgment: return "DuplicateJudgment";
    case Errc::insufficient_pairs: return "InsufficientPairs";
    case Errc::missing_ranking: return "MissingRanking";
    case Errc::empty_query: return "EmptyQuery";
    case Errc::empty_seed_text: return "EmptySeedText";
    case Errc::scorer_unavailable: return "ScorerUnavailable";
    case Errc::connection_failed: return "ConnectionFailed";
    case Errc::protocol_violation: return "ProtocolViolation";
    case Errc::timeout: return "Timeout";
    case Errc::empty_corpus: return "EmptyCorpus";
    case Errc::unknown_document: return "UnknownDocument";
    case Errc::unresolvable_document: return "UnresolvableDocument";
    case Errc::unresolvable_query: return "UnresolvableQuery";
    case Errc::empty_pair_set: return "EmptyPairSet";
    case Errc::missing_negatives: return "MissingNegatives";
    case Errc::interrupted_search: return "InterruptedSearch";
    case Errc::no_evaluable_queries: return "NoEvaluableQueries";
    case Errc::invalid_argument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace coprompt
