#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fairdr {

/// 64-bit FNV-1a; stable across platforms and runs, unlike std::hash.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// 16 lowercase hex digits of fnv1a64(canonical).
std::string fingerprint(std::string_view canonical);

}  // namespace fairdr
