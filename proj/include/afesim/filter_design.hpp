// Chebyshev Type II low-pass biquad design, coefficient quantization and
// the fixed-point word-length search driven by the L1 impulse-response error.
#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "afesim/fixed_point.hpp"

namespace afesim {

class DesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FilterSpec {
  double fs = 16000.0;
  double passband_edge = 1e-3;
  double stopband_edge = 0.1;
  double passband_ripple_db = 0.01;
  double stopband_atten_db = 50.0;

  /// Throws DesignError on a malformed specification.
  void validate() const;
};

struct BiquadCoeffs {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  bool stable() const;
  /// DC gain from the exact sums of the stored coefficients.
  long double dc_gain() const;
};

/// |H(e^{j 2 pi f / fs})|. Evaluated in a cancellation-free form so that
/// sub-millihertz frequencies keep full relative accuracy.
double magnitude(const BiquadCoeffs& c, double f, double fs);
double magnitude_db(const BiquadCoeffs& c, double f, double fs);

struct QuantizedBiquad {
  // b0, b1, b2, a1, a2 in coeff_format.
  std::array<fx::i128, 5> raw{};
  fx::Format coeff_format{2, 40};
  fx::Format input_format{10, 0};
  fx::Format internal_format{14, 38};
  fx::Format output_format{11, 0};

  fx::Value coeff(std::size_t i) const { return fx::Value{raw.at(i), coeff_format}; }
  /// Real-valued coefficients, exact.
  BiquadCoeffs as_real() const;
  /// (b0+b1+b2)/(1+a1+a2) from the integer coefficients.
  long double dc_gain() const;
};

int min_order(const FilterSpec& spec);

/// Bilinear transform of the analog Chebyshev II prototype, prewarped at the
/// stopband edge so the transmission zero lands exactly there.
BiquadCoeffs design_cheby2(const FilterSpec& spec);

struct DatapathFormats {
  fx::Format input{10, 0};
  int internal_integer_bits = 14;
  int internal_fraction_bits = 38;
  fx::Format output{11, 0};
};

/// Rounds each coefficient to `fraction_bits` (nearest-even). The integer
/// width is the smallest one holding all five coefficients. Throws
/// DesignError naming the offending coefficient if the result is unstable.
QuantizedBiquad quantize_coeffs(const BiquadCoeffs& c, int fraction_bits,
                                const DatapathFormats& datapath = {});

/// Impulse response of the ideal filter in double precision.
std::vector<double> ideal_impulse_response(const BiquadCoeffs& c, std::size_t n);

/// sum_k |h_ideal[k] - h_fixed[k]| over n samples, with h_fixed read from the
/// bit-exact runtime at internal precision.
double impulse_error_l1(const BiquadCoeffs& ideal, const QuantizedBiquad& fixed,
                        std::size_t n = std::size_t{1} << 21);

/// L1 distance between the double-precision and extended-precision ideal
/// impulse responses: the roundoff floor of the reference itself.
double self_roundoff_floor(const BiquadCoeffs& ideal, std::size_t n = std::size_t{1} << 21);

struct SweepPoint {
  int fraction_bits = 0;
  double l1_error = 0.0;  // +inf when quantization destabilizes the filter
  std::string note;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::optional<int> knee;
  double asymptotic_min = 0.0;
  double floor = 0.0;
};

struct SweepOptions {
  std::size_t samples = std::size_t{1} << 21;
  DatapathFormats datapath{};
  /// When set, the internal fraction width follows the coefficient width
  /// with this offset instead of staying fixed.
  std::optional<int> internal_tracks_offset;
  unsigned threads = 0;  // 0: AFESIM_THREADS or hardware concurrency
};

SweepResult wordlength_sweep(const BiquadCoeffs& ideal, int first_bits, int last_bits,
                             const SweepOptions& opts = {});
SweepResult wordlength_sweep(const FilterSpec& spec, int first_bits, int last_bits,
                             const SweepOptions& opts = {});

/// First width whose error is below 10x the minimum error of the sweep.
std::optional<int> find_knee(const std::vector<SweepPoint>& points);

unsigned worker_threads(unsigned requested = 0);

}  // namespace afesim
