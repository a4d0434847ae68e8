// Bit-exact Direct Form I execution of a QuantizedBiquad.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "afesim/filter_design.hpp"
#include "afesim/fixed_point.hpp"

namespace afesim {

struct BiquadState {
  fx::i128 x1 = 0, x2 = 0;  // input history, input format
  fx::i128 y1 = 0, y2 = 0;  // output history, internal format
  uint64_t saturation_count = 0;
};

struct BiquadOutput {
  fx::Value internal;  // internal format
  fx::Value out;       // output format
};

/// Precomputed shift plan for one QuantizedBiquad. Construction checks that
/// the 128-bit accumulator can never wrap for in-range inputs.
class BiquadKernel {
 public:
  explicit BiquadKernel(const QuantizedBiquad& filt);

  const QuantizedBiquad& filter() const { return filt_; }
  int accumulator_fraction_bits() const { return acc_frac_; }
  int accumulator_width_bound() const { return acc_bits_; }

  /// Raw-integer step. `x` must already be in the input format.
  /// Returns the internal-format raw output; `out_raw` receives the output code.
  fx::i128 step_raw(BiquadState& s, fx::i128 x, fx::i128& out_raw) const;

  BiquadOutput step(BiquadState& s, const fx::Value& x) const;

 private:
  QuantizedBiquad filt_;
  int acc_frac_ = 0;
  int x_shift_ = 0;
  int y_shift_ = 0;
  int to_internal_ = 0;
  int to_output_ = 0;
  int acc_bits_ = 0;
};

BiquadOutput step(BiquadState& state, const fx::Value& x, const QuantizedBiquad& filt);

/// Drives the filter with the largest exactly representable input as a unit
/// impulse and returns internal-precision outputs normalized by that input.
std::vector<double> impulse_response(const QuantizedBiquad& filt, std::size_t n);

class SettlingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SettlingOptions {
  double band = 0.01;
  double hold_seconds = 10.0;
  double horizon_seconds = 300.0;
};

/// Time (s) after which the step response stays within +/-band of its
/// closed-form final value for at least `hold_seconds`. Measured at internal
/// precision. Throws SettlingError when it does not settle within the horizon.
double settling_time(const QuantizedBiquad& filt, const fx::Value& step_amplitude, double fs,
                     const SettlingOptions& opts = {});

/// Writes `n,x_raw,y_internal_raw,y_out_raw` rows for the given input codes.
void write_trace_csv(std::ostream& os, const QuantizedBiquad& filt,
                     const std::vector<int64_t>& input_raw);

}  // namespace afesim
