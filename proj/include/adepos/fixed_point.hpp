#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace adepos {

// Two's-complement fixed-point format: total_bits wide with frac_bits of
// fraction. Overflow saturates, rounding is to nearest with ties away from
// zero. Word widths follow the configurable 8..16 bit datapath.
struct FixedFormat {
  int total_bits = 16;
  int frac_bits = 12;

  std::int32_t max_raw() const { return (std::int32_t{1} << (total_bits - 1)) - 1; }
  std::int32_t min_raw() const { return -(std::int32_t{1} << (total_bits - 1)); }
  double resolution() const { return std::ldexp(1.0, -frac_bits); }
  double max_value() const { return std::ldexp(static_cast<double>(max_raw()), -frac_bits); }
  double min_value() const { return std::ldexp(static_cast<double>(min_raw()), -frac_bits); }

  bool operator==(const FixedFormat&) const = default;
};

inline void validate(const FixedFormat& fmt) {
  if (fmt.total_bits < 8 || fmt.total_bits > 16)
    throw std::invalid_argument("FixedFormat: total_bits must be in [8,16]");
  if (fmt.frac_bits < 0 || fmt.frac_bits >= fmt.total_bits)
    throw std::invalid_argument("FixedFormat: frac_bits must be in [0,total_bits-1]");
}

// Default integer/fraction split: sign + 3 integer bits, rest fraction.
inline FixedFormat default_format(int total_bits) {
  FixedFormat fmt{total_bits, total_bits - 4};
  validate(fmt);
  return fmt;
}

struct FixedValue {
  std::int32_t raw = 0;
  FixedFormat fmt{};

  double value() const { return std::ldexp(static_cast<double>(raw), -fmt.frac_bits); }
};

inline std::int32_t saturate_raw(std::int64_t raw, const FixedFormat& fmt) {
  const std::int64_t lo = fmt.min_raw();
  const std::int64_t hi = fmt.max_raw();
  if (raw < lo) return static_cast<std::int32_t>(lo);
  if (raw > hi) return static_cast<std::int32_t>(hi);
  return static_cast<std::int32_t>(raw);
}

// Round-to-nearest (ties away from zero) right shift.
inline std::int64_t round_shift(std::int64_t v, int shift) {
  if (shift == 0) return v;
  const std::int64_t half = std::int64_t{1} << (shift - 1);
  return v >= 0 ? (v + half) >> shift : -((-v + half) >> shift);
}

inline FixedValue quantize(double x, const FixedFormat& fmt) {
  validate(fmt);
  if (std::isnan(x)) throw std::invalid_argument("quantize: NaN input");
  const double scaled = std::ldexp(x, fmt.frac_bits);
  std::int64_t raw;
  if (scaled >= static_cast<double>(std::numeric_limits<std::int64_t>::max())) {
    raw = std::numeric_limits<std::int64_t>::max();
  } else if (scaled <= static_cast<double>(std::numeric_limits<std::int64_t>::min())) {
    raw = std::numeric_limits<std::int64_t>::min();
  } else {
    raw = std::llround(scaled);  // nearest, ties away from zero
  }
  return FixedValue{saturate_raw(raw, fmt), fmt};
}

inline double dequantize(const FixedValue& v) { return v.value(); }

// acc + a*b with the product taken at double width, rounded back to the
// operand fraction, and the accumulate saturated. All operands must share
// one format.
inline FixedValue mac(const FixedValue& acc, const FixedValue& a, const FixedValue& b) {
  if (!(acc.fmt == a.fmt) || !(a.fmt == b.fmt))
    throw std::invalid_argument("mac: operand formats differ");
  const std::int64_t wide = static_cast<std::int64_t>(a.raw) * static_cast<std::int64_t>(b.raw);
  const std::int64_t product = round_shift(wide, a.fmt.frac_bits);
  return FixedValue{saturate_raw(static_cast<std::int64_t>(acc.raw) + product, acc.fmt), acc.fmt};
}

inline FixedValue relu_fixed(const FixedValue& x) {
  return FixedValue{x.raw < 0 ? 0 : x.raw, x.fmt};
}

}  // namespace adepos
