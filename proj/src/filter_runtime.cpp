#include "afesim/filter_runtime.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace afesim {

namespace {

int bits_of(const fx::Format& f) { return f.total_bits(); }

fx::i128 saturate(fx::i128 v, const fx::Format& f, uint64_t& count) {
  if (v > f.raw_max()) {
    ++count;
    return f.raw_max();
  }
  if (v < f.raw_min()) {
    ++count;
    return f.raw_min();
  }
  return v;
}

}  // namespace

BiquadKernel::BiquadKernel(const QuantizedBiquad& filt) : filt_(filt) {
  filt_.coeff_format.validate();
  filt_.input_format.validate();
  filt_.internal_format.validate();
  filt_.output_format.validate();

  const int w = filt_.coeff_format.fraction_bits;
  const int fin = filt_.input_format.fraction_bits;
  const int fint = filt_.internal_format.fraction_bits;
  const int fout = filt_.output_format.fraction_bits;
  if (fout > fint) throw DesignError("output format cannot carry more fraction bits than the internal format");

  acc_frac_ = w + std::max(fin, fint);
  x_shift_ = acc_frac_ - (w + fin);
  y_shift_ = acc_frac_ - (w + fint);
  to_internal_ = acc_frac_ - fint;
  to_output_ = fint - fout;

  // Five products, each bounded by the product of the operand ranges.
  const int cb = bits_of(filt_.coeff_format);
  const int term = std::max(cb + bits_of(filt_.input_format) + x_shift_, cb + bits_of(filt_.internal_format) + y_shift_);
  acc_bits_ = term + 3;
  if (acc_bits_ > 127) {
    throw DesignError("accumulator would need " + std::to_string(acc_bits_) + " bits; limit is 127");
  }
}

fx::i128 BiquadKernel::step_raw(BiquadState& s, fx::i128 x, fx::i128& out_raw) const {
  const auto& c = filt_.raw;
  const fx::i128 feed = (c[0] * x + c[1] * s.x1 + c[2] * s.x2) << x_shift_;
  const fx::i128 back = (c[3] * s.y1 + c[4] * s.y2) << y_shift_;
  const fx::i128 acc = feed - back;

  fx::i128 y = fx::round_shift_right(acc, to_internal_, fx::Rounding::NearestEven);
  y = saturate(y, filt_.internal_format, s.saturation_count);
  out_raw = saturate(fx::round_shift_right(y, to_output_, fx::Rounding::NearestEven), filt_.output_format,
                     s.saturation_count);

  s.x2 = s.x1;
  s.x1 = x;
  s.y2 = s.y1;
  s.y1 = y;
  return y;
}

BiquadOutput BiquadKernel::step(BiquadState& s, const fx::Value& x) const {
  fx::i128 raw = x.raw;
  if (!(x.format == filt_.input_format)) {
    const fx::Value cx = fx::convert(x, filt_.input_format);
    if (cx.saturated) throw std::out_of_range("filter input not representable in " + fx::to_string(filt_.input_format));
    raw = cx.raw;
  } else if (raw < filt_.input_format.raw_min() || raw > filt_.input_format.raw_max()) {
    throw std::out_of_range("filter input outside its format");
  }
  fx::i128 out = 0;
  const fx::i128 y = step_raw(s, raw, out);
  return {fx::Value{y, filt_.internal_format}, fx::Value{out, filt_.output_format}};
}

BiquadOutput step(BiquadState& state, const fx::Value& x, const QuantizedBiquad& filt) {
  return BiquadKernel(filt).step(state, x);
}

std::vector<double> impulse_response(const QuantizedBiquad& filt, std::size_t n) {
  const BiquadKernel k(filt);
  const fx::i128 amp = filt.input_format.raw_max();
  // internal_real / input_real = y_raw * 2^-fint / (amp * 2^-fin)
  const double scale =
      std::ldexp(1.0, filt.input_format.fraction_bits - filt.internal_format.fraction_bits) / static_cast<double>(amp);
  std::vector<double> h(n);
  BiquadState s;
  fx::i128 out = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const fx::i128 y = k.step_raw(s, i == 0 ? amp : 0, out);
    h[i] = static_cast<double>(y) * scale;
  }
  return h;
}

double settling_time(const QuantizedBiquad& filt, const fx::Value& step_amplitude, double fs,
                     const SettlingOptions& opts) {
  if (!(fs > 0)) throw std::invalid_argument("settling_time: fs must be positive");
  const BiquadKernel k(filt);
  const fx::Value x = fx::convert(step_amplitude, filt.input_format);
  if (x.saturated) throw std::out_of_range("step amplitude not representable in the filter input format");

  const long double final_value = x.to_long_double() * filt.dc_gain();
  const long double tol = opts.band * std::fabs(final_value);
  const auto hold = static_cast<std::size_t>(std::llround(opts.hold_seconds * fs));
  const auto horizon = static_cast<std::size_t>(std::llround(opts.horizon_seconds * fs));
  const int fint = filt.internal_format.fraction_bits;

  BiquadState s;
  fx::i128 out = 0;
  std::size_t run_start = 0;
  bool in_run = false;
  for (std::size_t n = 0; n < horizon; ++n) {
    const fx::i128 y = k.step_raw(s, x.raw, out);
    const long double v = std::ldexp(static_cast<long double>(y), -fint);
    if (std::fabs(v - final_value) <= tol) {
      if (!in_run) {
        in_run = true;
        run_start = n;
      }
      if (n + 1 - run_start >= hold) return static_cast<double>(run_start) / fs;
    } else {
      in_run = false;
    }
  }
  throw SettlingError("step response did not settle within " + std::to_string(opts.horizon_seconds) + " s");
}

void write_trace_csv(std::ostream& os, const QuantizedBiquad& filt, const std::vector<int64_t>& input_raw) {
  const BiquadKernel k(filt);
  BiquadState s;
  os << "n,x_raw,y_internal_raw,y_out_raw\n";
  for (std::size_t n = 0; n < input_raw.size(); ++n) {
    fx::i128 out = 0;
    const fx::i128 y = k.step_raw(s, input_raw[n], out);
    os << n << ',' << input_raw[n] << ',' << fx::to_string(y) << ',' << fx::to_string(out) << '\n';
  }
}

}  // namespace afesim
