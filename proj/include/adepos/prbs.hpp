#pragma once

#include <cstdint>
#include <stdexcept>

namespace adepos {

// 16-bit maximal-length Fibonacci LFSR, taps at stages {16, 15, 13, 4},
// XOR feedback. The all-zero state is the lockup state, so a nonzero seed
// cycles through all 2^16 - 1 states before repeating.
class Prbs16 {
 public:
  explicit Prbs16(std::uint16_t seed) : state_(seed) {
    if (seed == 0) throw std::invalid_argument("Prbs16: seed must be nonzero");
  }

  // Emits the current register state as one 16-bit word, then shifts the
  // register through a full word period so consecutive words share no bits.
  std::uint16_t next_word() {
    const std::uint16_t word = state_;
    for (int i = 0; i < 16; ++i) step();
    ++words_emitted_;
    return word;
  }

  // Maps a word to [-1, 1) by reading it as a two's-complement fraction.
  static double word_to_weight(std::uint16_t word) {
    return static_cast<double>(static_cast<std::int16_t>(word)) / 32768.0;
  }

  double next_weight() { return word_to_weight(next_word()); }

  std::uint16_t state() const { return state_; }
  std::uint64_t words_emitted() const { return words_emitted_; }

 private:
  void step() {
    // stages 16,15,13,4 correspond to bits 15,14,12,3
    const std::uint16_t fb =
        ((state_ >> 15) ^ (state_ >> 14) ^ (state_ >> 12) ^ (state_ >> 3)) & 1u;
    state_ = static_cast<std::uint16_t>((state_ << 1) | fb);
  }

  std::uint16_t state_;
  std::uint64_t words_emitted_ = 0;
};

}  // namespace adepos
