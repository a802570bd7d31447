#include "fairdr/fingerprint.hpp"

#include <fmt/format.h>

namespace fairdr {

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string fingerprint(std::string_view canonical) {
  return fmt::format("{:016x}", fnv1a64(canonical));
}

}  // namespace fairdr
