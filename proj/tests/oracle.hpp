// Big-integer reference arithmetic for the tests. Deliberately written
// against boost::multiprecision rather than the library's own Int256.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <random>

#include "afesim/fixed_point.hpp"

namespace oracle {

using boost::multiprecision::cpp_int;
using afesim::fx::i128;

inline cpp_int big(i128 v) {
  const bool neg = v < 0;
  unsigned __int128 u = neg ? (unsigned __int128)0 - (unsigned __int128)v : (unsigned __int128)v;
  cpp_int r = static_cast<uint64_t>(u >> 64);
  r <<= 64;
  r += static_cast<uint64_t>(u);
  return neg ? cpp_int(-r) : r;
}

inline i128 small(const cpp_int& v) {
  const bool neg = v < 0;
  cpp_int m = neg ? cpp_int(-v) : v;
  const auto lo = static_cast<uint64_t>(m & cpp_int(UINT64_MAX));
  const auto hi = static_cast<uint64_t>(m >> 64);
  unsigned __int128 u = ((unsigned __int128)hi << 64) | lo;
  return neg ? (i128)((unsigned __int128)0 - u) : (i128)u;
}

inline cpp_int pow2(int k) { return cpp_int(1) << k; }

// floor(v / 2^k), then optional round-half-even on the remainder.
inline cpp_int shift_round(const cpp_int& v, int k, bool nearest_even) {
  if (k <= 0) return v << (-k);
  const cpp_int d = pow2(k);
  cpp_int q = v / d;
  cpp_int r = v - q * d;
  if (r < 0) {
    q -= 1;
    r += d;
  }
  if (!nearest_even) return q;
  const cpp_int twice = 2 * r;
  if (twice > d || (twice == d && (q & 1) != 0)) q += 1;
  return q;
}

struct Result {
  cpp_int raw;
  bool saturated = false;
  bool wrapped = false;
};

// Rescale an exact value carrying `from_frac` fraction bits into `out`.
inline Result finalize(const cpp_int& exact, int from_frac, const afesim::fx::Format& out, bool nearest_even,
                       bool wrap) {
  cpp_int v = shift_round(exact, from_frac - out.fraction_bits, nearest_even);
  const int n = out.total_bits();
  const cpp_int lo = -pow2(n - 1), hi = pow2(n - 1) - 1;
  Result r;
  if (v >= lo && v <= hi) {
    r.raw = v;
  } else if (wrap) {
    cpp_int m = v % pow2(n);
    if (m < 0) m += pow2(n);
    if (m > hi) m -= pow2(n);
    r.raw = m;
    r.wrapped = true;
  } else {
    r.raw = v < 0 ? lo : hi;
    r.saturated = true;
  }
  return r;
}

// Uniform raw value representable in `f`.
inline i128 random_raw(std::mt19937_64& rng, const afesim::fx::Format& f) {
  const int n = f.total_bits();
  unsigned __int128 u = ((unsigned __int128)rng() << 64) | rng();
  if (n < 128) u &= ((unsigned __int128)1 << n) - 1;
  cpp_int v = big((i128)u);
  if (n < 128) {
    if (v < 0) v += pow2(128);
    if (v >= pow2(n - 1)) v -= pow2(n);
  }
  return small(v);
}

}  // namespace oracle
