#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace changeqa {

/// Incremental SHA-256 over byte chunks; hex digest is the content key used
/// by the embedding cache, mock backends and the judge fixture table.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::span<const std::uint8_t> bytes);
  Sha256& update(std::string_view text);
  std::vector<std::uint8_t> digest();
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// splitmix64 step; used to derive independent seeds from (seed, key) pairs.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view key);

/// Top 53 bits of a 64-bit word mapped to [0, 1). Portable across standard
/// libraries, unlike std::uniform_real_distribution.
inline double unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Unbiased index in [0, n) from a 64-bit generator (Lemire rejection).
template <typename Rng>
std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = -n % n;
  for (;;) {
    const std::uint64_t x = rng();
    const unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    if (static_cast<std::uint64_t>(m) >= limit) return static_cast<std::uint64_t>(m >> 64);
  }
}

}  // namespace changeqa
