#pragma once

#include <cstdint>

namespace adepos {

// splitmix64 step; the usual constants.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic expansion of one master seed into independent streams so a
// single config value reproduces every ensemble, synthetic trace, and
// replica.
enum class SeedStream : std::uint64_t {
  ensemble = 1,
  synth = 2,
  replica = 3,
  sweep = 4,
};

inline std::uint64_t derive_seed(std::uint64_t master, SeedStream stream, std::uint64_t index = 0,
                                 std::uint64_t sub = 0) {
  std::uint64_t x = splitmix64(master ^ (static_cast<std::uint64_t>(stream) << 56));
  x = splitmix64(x ^ index);
  return splitmix64(x ^ sub);
}

// Nonzero 16-bit LFSR base seed for the ensemble of one (master, replica)
// run. The random projection is a fixed property of the detector design —
// every bearing in a fleet is monitored by the same hardware — so the seed
// deliberately does not depend on which bearing is being trained; only the
// output weights differ per bearing.
inline std::uint16_t derive_base_seed(std::uint64_t master, std::uint64_t replica = 0) {
  const std::uint64_t x = derive_seed(master, SeedStream::ensemble, replica);
  const auto s = static_cast<std::uint16_t>(x & 0xFFFF);
  return s == 0 ? static_cast<std::uint16_t>(1) : s;
}

}  // namespace adepos
