// Two's-complement fixed-point arithmetic with explicit integer/fraction
// widths. Raw values are held in a signed 128-bit integer; intermediate
// products and aligned sums use a 256-bit helper so that no operation
// loses bits before the final rounding/overflow step.
#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace afesim::fx {

using i128 = __int128;
using u128 = unsigned __int128;

enum class Rounding { NearestEven, Truncate };
enum class Overflow { Saturate, Wrap };

/// Width descriptor. `integer_bits` includes the sign bit, so {11, 0}
/// spans [-1024, 1023].
struct Format {
  int integer_bits = 1;
  int fraction_bits = 0;

  constexpr int total_bits() const { return integer_bits + fraction_bits; }

  /// Throws std::invalid_argument when the widths are out of range.
  void validate() const;

  i128 raw_min() const;
  i128 raw_max() const;
  double lsb() const;
  double min_value() const;
  double max_value() const;

  friend bool operator==(const Format&, const Format&) = default;
};

std::string to_string(const Format& f);

struct Value {
  i128 raw = 0;
  Format format{};
  bool saturated = false;
  bool wrapped = false;

  double to_double() const;
  long double to_long_double() const;

  /// Equality on the represented number only (raw and format), not flags.
  bool same_as(const Value& other) const { return raw == other.raw && format == other.format; }
};

/// Builds a value from a raw integer, throwing if it does not fit the format.
Value from_raw(i128 raw, const Format& fmt);

Value quantize(double x, const Format& fmt, Rounding rounding = Rounding::NearestEven);

Value convert(const Value& v, const Format& out, Rounding rounding = Rounding::NearestEven,
              Overflow overflow = Overflow::Saturate);

Value add(const Value& a, const Value& b, const Format& out, Overflow overflow = Overflow::Saturate);

Value mul(const Value& a, const Value& b, const Format& out, Rounding rounding = Rounding::NearestEven,
          Overflow overflow = Overflow::Saturate);

/// Signed right shift of `v` by `k` bits with the requested rounding.
/// Truncate is floor (arithmetic shift), matching plain hardware truncation.
i128 round_shift_right(i128 v, int k, Rounding rounding);

std::string to_string(i128 v);
i128 parse_i128(const std::string& s);

namespace detail {

/// Minimal signed 256-bit integer used for exact intermediates.
class Int256 {
 public:
  Int256() = default;
  explicit Int256(i128 v);

  static Int256 product(i128 a, i128 b);

  Int256 operator+(const Int256& o) const;
  Int256 operator-() const;
  Int256 shl(int k) const;
  /// Arithmetic shift right with rounding; k in [0, 255].
  Int256 round_shift_right(int k, Rounding rounding) const;

  bool negative() const { return (limb_[3] >> 63) != 0; }
  bool fits_signed_bits(int bits) const;
  /// Low `bits` bits, sign-extended (two's-complement wrap).
  i128 wrap_to_bits(int bits) const;
  i128 to_i128() const;  // precondition: fits_signed_bits(128)

  std::strong_ordering operator<=>(const Int256& o) const;
  bool operator==(const Int256& o) const = default;

 private:
  uint64_t limb_[4] = {0, 0, 0, 0};
  bool bit(int i) const { return (limb_[i / 64] >> (i % 64)) & 1u; }
  bool any_below(int i) const;  // any bit set in positions [0, i)
};

}  // namespace detail

}  // namespace afesim::fx
