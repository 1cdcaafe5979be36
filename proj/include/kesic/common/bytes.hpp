#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kesic/common/result.hpp"

namespace kesic {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline Bytes to_bytes(std::string_view s) {
  auto v = as_bytes(s);
  return {v.begin(), v.end()};
}

inline std::string to_string(ByteView b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

std::string to_hex(ByteView bytes);
Result<Bytes> from_hex(std::string_view hex);

std::string base64_encode(ByteView bytes);
Result<Bytes> base64_decode(std::string_view text);

// Naive substring search over raw bytes.
bool contains(ByteView haystack, ByteView needle);

}  // namespace kesic
