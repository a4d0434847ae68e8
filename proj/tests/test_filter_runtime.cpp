#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "afesim/filter_design.hpp"
#include "afesim/filter_runtime.hpp"
#include "oracle.hpp"

using namespace afesim;
using oracle::big;
using oracle::cpp_int;

namespace {

// Direct Form I straight from the difference equation, in exact integers:
//   y = b.x * 2^-(w+fin) - a.y * 2^-(w+fint), rounded to fint bits.
struct RecurrenceOracle {
  const QuantizedBiquad& f;
  cpp_int x1 = 0, x2 = 0, y1 = 0, y2 = 0;

  std::pair<cpp_int, cpp_int> step(const cpp_int& x) {
    const int w = f.coeff_format.fraction_bits;
    const int fin = f.input_format.fraction_bits;
    const int fint = f.internal_format.fraction_bits;
    const int fout = f.output_format.fraction_bits;
    const auto c = [&](int i) { return big(f.raw[i]); };
    const cpp_int num = ((c(0) * x + c(1) * x1 + c(2) * x2) << fint) - ((c(3) * y1 + c(4) * y2) << fin);
    cpp_int y = oracle::shift_round(num, w + fin, true);
    y = clamp(y, f.internal_format);
    cpp_int out = clamp(oracle::shift_round(y, fint - fout, true), f.output_format);
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return {y, out};
  }

  static cpp_int clamp(const cpp_int& v, const fx::Format& fmt) {
    const cpp_int lo = big(fmt.raw_min()), hi = big(fmt.raw_max());
    return v < lo ? lo : (v > hi ? hi : v);
  }
};

FilterSpec mild_spec() {
  FilterSpec s;
  s.fs = 1000;
  s.passband_edge = 10;
  s.stopband_edge = 20;
  s.passband_ripple_db = 6;
  s.stopband_atten_db = 20;
  return s;
}

struct Case {
  const char* name;
  FilterSpec spec;
  int coeff_bits;
  DatapathFormats dp;
};

std::vector<Case> cases() {
  DatapathFormats wide;
  wide.internal_fraction_bits = 44;
  DatapathFormats frac_io;
  frac_io.input = {2, 14};
  frac_io.internal_integer_bits = 6;
  frac_io.internal_fraction_bits = 30;
  frac_io.output = {4, 12};
  DatapathFormats tight;
  tight.internal_integer_bits = 8;  // saturates on full-scale inputs
  tight.internal_fraction_bits = 16;
  return {{"default", FilterSpec{}, 40, {}},
          {"wide", FilterSpec{}, 44, wide},
          {"fractional_io", mild_spec(), 24, frac_io},
          {"tight", mild_spec(), 16, tight}};
}

}  // namespace

TEST(BiquadKernel, BitExactAgainstRecurrenceOracle) {
  for (const auto& tc : cases()) {
    const QuantizedBiquad q = quantize_coeffs(design_cheby2(tc.spec), tc.coeff_bits, tc.dp);
    const BiquadKernel k(q);
    BiquadState s;
    RecurrenceOracle ref{q};
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int64_t> in(static_cast<int64_t>(q.input_format.raw_min()),
                                               static_cast<int64_t>(q.input_format.raw_max()));
    std::bernoulli_distribution hold(0.9);
    int64_t x = 0;
    for (int n = 0; n < 100000; ++n) {
      // Mix long constant stretches with jumps so that both the slow
      // and the fast parts of the response are exercised.
      if (!hold(rng)) x = in(rng);
      fx::i128 out = 0;
      const fx::i128 y = k.step_raw(s, x, out);
      const auto [ry, rout] = ref.step(cpp_int(x));
      ASSERT_EQ(big(y), ry) << tc.name << " n=" << n;
      ASSERT_EQ(big(out), rout) << tc.name << " n=" << n;
    }
    if (std::string(tc.name) == "tight") EXPECT_GT(s.saturation_count, 0u);
    else EXPECT_EQ(s.saturation_count, 0u) << tc.name;
  }
}

TEST(BiquadKernel, ValueStepMatchesRaw) {
  const QuantizedBiquad q = quantize_coeffs(design_cheby2(FilterSpec{}), 40);
  BiquadState a, b;
  const BiquadKernel k(q);
  for (int n = 0; n < 1000; ++n) {
    const int x = (n * 37) % 1024 - 512;
    fx::i128 out = 0;
    const fx::i128 y = k.step_raw(a, x, out);
    const BiquadOutput o = step(b, fx::from_raw(x, q.input_format), q);
    ASSERT_EQ(o.internal.raw, y);
    ASSERT_EQ(o.out.raw, out);
  }
  EXPECT_THROW(k.step(a, fx::Value{600, q.input_format}), std::out_of_range);
}

TEST(BiquadKernel, RejectsAccumulatorOverflow) {
  QuantizedBiquad q = quantize_coeffs(design_cheby2(FilterSpec{}), 40);
  q.internal_format = {20, 80};
  EXPECT_THROW(BiquadKernel{q}, DesignError);
}

// The rounding deadband bounds how close the fixed-point loop gets to the
// closed-form DC value: |y - y*| <= 2^w / (2 * sum_a) internal LSB, where
// sum_a is the raw sum of the denominator coefficients.
TEST(BiquadKernel, DcStaysInsideRoundingDeadband) {
  for (const auto& tc : cases()) {
    if (std::string(tc.name) == "tight") continue;
    const QuantizedBiquad q = quantize_coeffs(design_cheby2(tc.spec), tc.coeff_bits, tc.dp);
    const BiquadKernel k(q);
    const long double sum_a = std::ldexp(1.0L, q.coeff_format.fraction_bits) + static_cast<long double>(q.raw[3]) +
                              static_cast<long double>(q.raw[4]);
    const long double sum_b =
        static_cast<long double>(q.raw[0]) + static_cast<long double>(q.raw[1]) + static_cast<long double>(q.raw[2]);
    const int64_t K = static_cast<int64_t>(q.input_format.raw_max() / 2);
    const int shift = q.internal_format.fraction_bits - q.input_format.fraction_bits;
    const long double ystar = K * sum_b / sum_a * std::ldexp(1.0L, shift);
    const long double bound = std::ldexp(1.0L, q.coeff_format.fraction_bits) / (2 * sum_a) + 1;

    // Start at the closed form; the loop may drift but never leaves the deadband.
    BiquadState s;
    s.x1 = s.x2 = K;
    s.y1 = s.y2 = static_cast<fx::i128>(std::llroundl(ystar));
    fx::i128 out = 0, y = 0;
    for (int n = 0; n < 200000; ++n) {
      y = k.step_raw(s, K, out);
      ASSERT_LE(std::fabs(static_cast<long double>(y) - ystar), bound) << tc.name << " n=" << n;
    }
  }
}

// With a well-damped denominator the deadband is below one LSB, so the
// closed form is met to rounding.
TEST(BiquadKernel, DampedFilterDcGainWithinTwoLsb) {
  FilterSpec spec = mild_spec();
  spec.passband_edge = 100;
  spec.stopband_edge = 250;
  spec.passband_ripple_db = 3;
  const QuantizedBiquad q = quantize_coeffs(design_cheby2(spec), 24, [] {
    DatapathFormats d;
    d.internal_fraction_bits = 24;
    return d;
  }());
  ASSERT_GT(static_cast<double>(1 + q.as_real().a1 + q.as_real().a2), 0.25);
  const BiquadKernel k(q);
  BiquadState s;
  fx::i128 out = 0, y = 0;
  const int K = 300;
  for (int n = 0; n < 20000; ++n) y = k.step_raw(s, K, out);
  const long double ystar = K * q.dc_gain() * std::ldexp(1.0L, 24);
  EXPECT_LE(std::fabs(static_cast<long double>(y) - ystar), 2.0L);
}

TEST(ImpulseResponse, ApproachesIdealForMildFilter) {
  const BiquadCoeffs c = design_cheby2(mild_spec());
  DatapathFormats d;
  d.internal_fraction_bits = 40;
  const QuantizedBiquad q = quantize_coeffs(c, 40, d);
  const auto h = impulse_response(q, 4096);
  const auto ideal = ideal_impulse_response(c, 4096);
  for (std::size_t i = 0; i < h.size(); ++i) ASSERT_NEAR(h[i], ideal[i], 1e-9) << i;
  EXPECT_LT(impulse_error_l1(c, q, 4096), 1e-7);
}

TEST(Settling, MatchesExtendedPrecisionStepResponse) {
  const FilterSpec spec{};
  const QuantizedBiquad q = quantize_coeffs(design_cheby2(spec), 40);
  const double t = settling_time(q, fx::from_raw(511, q.input_format), spec.fs);

  // Same definition on an extended-precision DF-I run of the quantized
  // coefficients. (Quantization moves the sum of the denominator by a few
  // percent, which shifts the settling time by seconds, so the unquantized
  // design is not the right reference.)
  const BiquadCoeffs qc = q.as_real();
  const double band = 0.01, fs = spec.fs;
  const long double final_value = q.dc_gain();
  long double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  std::size_t run_start = 0;
  bool in_run = false;
  double want = -1;
  const std::size_t hold = static_cast<std::size_t>(10 * fs);
  for (std::size_t n = 0; n < static_cast<std::size_t>(300 * fs); ++n) {
    const long double y = qc.b0 + qc.b1 * x1 + qc.b2 * x2 - qc.a1 * y1 - qc.a2 * y2;
    x2 = x1;
    x1 = 1.0;
    y2 = y1;
    y1 = y;
    if (std::fabs(y - final_value) <= band * final_value) {
      if (!in_run) {
        in_run = true;
        run_start = n;
      }
      if (n + 1 - run_start >= hold) {
        want = run_start / fs;
        break;
      }
    } else {
      in_run = false;
    }
  }
  ASSERT_GT(want, 0);
  EXPECT_NEAR(t, want, 0.5);
}

TEST(Settling, ThrowsWhenHorizonTooShort) {
  const QuantizedBiquad q = quantize_coeffs(design_cheby2(FilterSpec{}), 40);
  SettlingOptions o;
  o.horizon_seconds = 5;
  EXPECT_THROW(settling_time(q, fx::from_raw(100, q.input_format), 16000, o), SettlingError);
}

TEST(Trace, CsvShape) {
  const QuantizedBiquad q = quantize_coeffs(design_cheby2(FilterSpec{}), 40);
  std::ostringstream os;
  write_trace_csv(os, q, {511, 0, 0});
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "n,x_raw,y_internal_raw,y_out_raw");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
}
