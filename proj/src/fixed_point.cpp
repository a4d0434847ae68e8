#include "afesim/fixed_point.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace afesim::fx {

namespace detail {

Int256::Int256(i128 v) {
  const u128 u = static_cast<u128>(v);
  limb_[0] = static_cast<uint64_t>(u);
  limb_[1] = static_cast<uint64_t>(u >> 64);
  const uint64_t ext = v < 0 ? ~uint64_t{0} : 0;
  limb_[2] = ext;
  limb_[3] = ext;
}

Int256 Int256::product(i128 a, i128 b) {
  const bool neg = (a < 0) != (b < 0);
  const u128 ma = a < 0 ? u128(0) - static_cast<u128>(a) : static_cast<u128>(a);
  const u128 mb = b < 0 ? u128(0) - static_cast<u128>(b) : static_cast<u128>(b);
  const uint64_t x[2] = {static_cast<uint64_t>(ma), static_cast<uint64_t>(ma >> 64)};
  const uint64_t y[2] = {static_cast<uint64_t>(mb), static_cast<uint64_t>(mb >> 64)};

  Int256 r;
  for (int i = 0; i < 2; ++i) {
    u128 carry = 0;
    for (int j = 0; j < 2; ++j) {
      const u128 t = static_cast<u128>(x[i]) * y[j] + r.limb_[i + j] + carry;
      r.limb_[i + j] = static_cast<uint64_t>(t);
      carry = t >> 64;
    }
    int k = i + 2;
    while (carry != 0 && k < 4) {
      const u128 t = static_cast<u128>(r.limb_[k]) + carry;
      r.limb_[k] = static_cast<uint64_t>(t);
      carry = t >> 64;
      ++k;
    }
  }
  return neg ? -r : r;
}

Int256 Int256::operator+(const Int256& o) const {
  Int256 r;
  u128 carry = 0;
  for (int i = 0; i < 4; ++i) {
    const u128 t = static_cast<u128>(limb_[i]) + o.limb_[i] + carry;
    r.limb_[i] = static_cast<uint64_t>(t);
    carry = t >> 64;
  }
  return r;
}

Int256 Int256::operator-() const {
  Int256 r;
  u128 carry = 1;
  for (int i = 0; i < 4; ++i) {
    const u128 t = static_cast<u128>(~limb_[i]) + carry;
    r.limb_[i] = static_cast<uint64_t>(t);
    carry = t >> 64;
  }
  return r;
}

Int256 Int256::shl(int k) const {
  if (k <= 0) return *this;
  Int256 r;
  if (k >= 256) return r;
  const int words = k / 64;
  const int bits = k % 64;
  for (int i = 3; i >= 0; --i) {
    const int src = i - words;
    if (src < 0) continue;
    uint64_t v = limb_[src] << bits;
    if (bits != 0 && src > 0) v |= limb_[src - 1] >> (64 - bits);
    r.limb_[i] = v;
  }
  return r;
}

bool Int256::any_below(int i) const {
  for (int b = 0; b < i; ++b) {
    if (b % 64 == 0 && i - b >= 64) {
      if (limb_[b / 64] != 0) return true;
      b += 63;
      continue;
    }
    if (bit(b)) return true;
  }
  return false;
}

Int256 Int256::round_shift_right(int k, Rounding rounding) const {
  if (k <= 0) return *this;
  if (k > 255) k = 255;
  const uint64_t ext = negative() ? ~uint64_t{0} : 0;
  Int256 q;
  const int words = k / 64;
  const int bits = k % 64;
  for (int i = 0; i < 4; ++i) {
    const int src = i + words;
    const uint64_t lo = src < 4 ? limb_[src] : ext;
    const uint64_t hi = src + 1 < 4 ? limb_[src + 1] : ext;
    q.limb_[i] = bits == 0 ? lo : (lo >> bits) | (hi << (64 - bits));
  }
  if (rounding == Rounding::Truncate) return q;

  const bool half_bit = bit(k - 1);
  if (!half_bit) return q;
  const bool above_half = any_below(k - 1);
  const bool q_odd = (q.limb_[0] & 1u) != 0;
  if (above_half || q_odd) q = q + Int256(1);
  return q;
}

bool Int256::fits_signed_bits(int bits) const {
  if (bits >= 256) return true;
  const bool s = bit(bits - 1);
  for (int i = bits; i < 256; ++i) {
    if (bit(i) != s) return false;
  }
  return true;
}

i128 Int256::wrap_to_bits(int bits) const {
  u128 low = (static_cast<u128>(limb_[1]) << 64) | limb_[0];
  if (bits < 128) {
    const u128 mask = (u128(1) << bits) - 1;
    low &= mask;
    if ((low >> (bits - 1)) & 1u) low |= ~mask;
  }
  return static_cast<i128>(low);
}

i128 Int256::to_i128() const { return wrap_to_bits(128); }

std::strong_ordering Int256::operator<=>(const Int256& o) const {
  if (negative() != o.negative()) {
    return negative() ? std::strong_ordering::less : std::strong_ordering::greater;
  }
  for (int i = 3; i >= 0; --i) {
    if (limb_[i] != o.limb_[i]) {
      return limb_[i] < o.limb_[i] ? std::strong_ordering::less : std::strong_ordering::greater;
    }
  }
  return std::strong_ordering::equal;
}

}  // namespace detail

using detail::Int256;

void Format::validate() const {
  if (integer_bits < 1) throw std::invalid_argument("fixed-point format needs integer_bits >= 1");
  if (fraction_bits < 0) throw std::invalid_argument("fixed-point format needs fraction_bits >= 0");
  if (total_bits() > 128) throw std::invalid_argument("fixed-point format wider than 128 bits");
}

i128 Format::raw_max() const {
  const int n = total_bits();
  if (n == 128) return static_cast<i128>((~u128(0)) >> 1);
  return (i128(1) << (n - 1)) - 1;
}

i128 Format::raw_min() const { return -raw_max() - 1; }

double Format::lsb() const { return std::ldexp(1.0, -fraction_bits); }
double Format::min_value() const { return -std::ldexp(1.0, integer_bits - 1); }
double Format::max_value() const {
  return std::ldexp(1.0, integer_bits - 1) - std::ldexp(1.0, -fraction_bits);
}

std::string to_string(const Format& f) {
  return "Q" + std::to_string(f.integer_bits) + "." + std::to_string(f.fraction_bits);
}

double Value::to_double() const { return std::ldexp(static_cast<double>(raw), -format.fraction_bits); }

long double Value::to_long_double() const {
  return std::ldexp(static_cast<long double>(raw), -format.fraction_bits);
}

Value from_raw(i128 raw, const Format& fmt) {
  fmt.validate();
  if (raw < fmt.raw_min() || raw > fmt.raw_max()) {
    throw std::out_of_range("raw value " + to_string(raw) + " does not fit " + to_string(fmt));
  }
  return Value{raw, fmt, false, false};
}

namespace {

// Rescales an exact value carrying `from_frac` fraction bits into `out`.
Value finalize(const Int256& exact, int from_frac, const Format& out, Rounding rounding,
               Overflow overflow) {
  out.validate();
  Int256 scaled = from_frac >= out.fraction_bits
                      ? exact.round_shift_right(from_frac - out.fraction_bits, rounding)
                      : exact.shl(out.fraction_bits - from_frac);
  Value v;
  v.format = out;
  const int bits = out.total_bits();
  if (scaled.fits_signed_bits(bits)) {
    v.raw = scaled.to_i128();
    return v;
  }
  if (overflow == Overflow::Wrap) {
    v.raw = scaled.wrap_to_bits(bits);
    v.wrapped = true;
  } else {
    v.raw = scaled.negative() ? out.raw_min() : out.raw_max();
    v.saturated = true;
  }
  return v;
}

}  // namespace

Value quantize(double x, const Format& fmt, Rounding rounding) {
  if (!std::isfinite(x)) throw std::invalid_argument("quantize: non-finite input");
  fmt.validate();
  if (x == 0.0) return Value{0, fmt, false, false};

  int exp = 0;
  const double m = std::frexp(x, &exp);
  const auto mant = static_cast<int64_t>(std::ldexp(m, 53));
  // x == mant * 2^(exp - 53); carry exactly (53 - exp) fraction bits.
  const int from_frac = 53 - exp;
  if (from_frac < -150) {
    Value v{x < 0 ? fmt.raw_min() : fmt.raw_max(), fmt, true, false};
    return v;
  }
  if (from_frac - fmt.fraction_bits > 250) {
    // Far below one LSB.
    const i128 raw = (rounding == Rounding::Truncate && x < 0) ? -1 : 0;
    return Value{raw, fmt, false, false};
  }
  Int256 exact(static_cast<i128>(mant));
  int frac = from_frac;
  if (frac < 0) {
    exact = exact.shl(-frac);
    frac = 0;
  }
  return finalize(exact, frac, fmt, rounding, Overflow::Saturate);
}

Value convert(const Value& v, const Format& out, Rounding rounding, Overflow overflow) {
  return finalize(Int256(v.raw), v.format.fraction_bits, out, rounding, overflow);
}

Value add(const Value& a, const Value& b, const Format& out, Overflow overflow) {
  const int frac = std::max(a.format.fraction_bits, b.format.fraction_bits);
  const Int256 sa = Int256(a.raw).shl(frac - a.format.fraction_bits);
  const Int256 sb = Int256(b.raw).shl(frac - b.format.fraction_bits);
  return finalize(sa + sb, frac, out, Rounding::NearestEven, overflow);
}

Value mul(const Value& a, const Value& b, const Format& out, Rounding rounding, Overflow overflow) {
  const Int256 p = Int256::product(a.raw, b.raw);
  return finalize(p, a.format.fraction_bits + b.format.fraction_bits, out, rounding, overflow);
}

i128 round_shift_right(i128 v, int k, Rounding rounding) {
  if (k <= 0) return v;
  if (k >= 127) return Int256(v).round_shift_right(k, rounding).to_i128();
  const i128 q = v >> k;
  if (rounding == Rounding::Truncate) return q;
  const i128 mask = (i128(1) << k) - 1;
  const i128 r = v & mask;
  const i128 half = i128(1) << (k - 1);
  if (r > half || (r == half && (q & 1) != 0)) return q + 1;
  return q;
}

std::string to_string(i128 v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  u128 u = neg ? u128(0) - static_cast<u128>(v) : static_cast<u128>(v);
  std::string s;
  while (u != 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  if (neg) s.push_back('-');
  return {s.rbegin(), s.rend()};
}

i128 parse_i128(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty integer literal");
  std::size_t i = 0;
  bool neg = false;
  if (s[0] == '-' || s[0] == '+') {
    neg = s[0] == '-';
    i = 1;
  }
  if (i == s.size()) throw std::invalid_argument("bad integer literal: " + s);
  u128 u = 0;
  const u128 limit = u128(1) << 127;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') throw std::invalid_argument("bad integer literal: " + s);
    u = u * 10 + static_cast<u128>(s[i] - '0');
    if (u > limit) throw std::out_of_range("integer literal exceeds 128 bits: " + s);
  }
  if (!neg && u == limit) throw std::out_of_range("integer literal exceeds 128 bits: " + s);
  return neg ? static_cast<i128>(u128(0) - u) : static_cast<i128>(u);
}

}  // namespace afesim::fx
