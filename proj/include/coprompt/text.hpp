#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace coprompt {

/// Lowercased maximal runs of letters and digits. Bytes >= 0x80 count as
/// word characters so multi-byte UTF-8 words stay whole; only ASCII is
/// case-folded. Shared by the BM25 index and the n-gram toy models.
std::vector<std::string> tokenize(std::string_view text);

std::string_view trim(std::string_view text);

/// 64-bit FNV-1a, used for stable run tags.
std::uint64_t fnv1a64(std::string_view text);

std::string hex64(std::uint64_t value);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

}  // namespace coprompt
