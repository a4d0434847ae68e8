#include "afesim/filter_design.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <thread>

#include "afesim/filter_runtime.hpp"

namespace afesim {

namespace {

using ld = long double;
constexpr ld kPi = std::numbers::pi_v<long double>;

// 10^(db/10) - 1 without cancellation for tiny ripple values.
ld db_to_eps2(double db) { return std::expm1(static_cast<ld>(db) * std::log(10.0L) / 10.0L); }

// Real and imaginary parts of e^{jw} P(e^{jw}) for P = c0 + c1 z^-1 + c2 z^-2,
// arranged so that the near-cancelling sum c0 + c1 + c2 is taken exactly.
std::complex<ld> poly_response(ld c0, ld c1, ld c2, ld w) {
  const ld s = std::sin(w / 2);
  const ld re = (c0 + c1 + c2) - (c0 + c2) * 2 * s * s;
  const ld im = (c0 - c2) * std::sin(w);
  return {re, im};
}

int required_signed_bits(fx::i128 r) {
  int n = 1;
  while (n < 128) {
    const fx::i128 hi = (fx::i128(1) << (n - 1)) - 1;
    const fx::i128 lo = -hi - 1;
    if (r >= lo && r <= hi) return n;
    ++n;
  }
  return 128;
}

}  // namespace

void FilterSpec::validate() const {
  if (!(fs > 0)) throw DesignError("sampling frequency must be positive");
  if (!(passband_edge > 0)) throw DesignError("passband edge must be positive");
  if (!(stopband_edge > passband_edge)) throw DesignError("stopband edge must exceed passband edge");
  if (!(stopband_edge < fs / 2)) throw DesignError("stopband edge must be below Nyquist");
  if (!(passband_ripple_db > 0)) throw DesignError("passband ripple must be positive");
  if (!(stopband_atten_db > 0)) throw DesignError("stopband attenuation must be positive");
}

bool BiquadCoeffs::stable() const { return std::fabs(a2) < 1.0 && std::fabs(a1) < 1.0 + a2; }

long double BiquadCoeffs::dc_gain() const {
  const ld num = (static_cast<ld>(b0) + b2) + b1;
  const ld den = (1.0L + a1) + a2;
  return num / den;
}

double magnitude(const BiquadCoeffs& c, double f, double fs) {
  const ld w = 2 * kPi * static_cast<ld>(f) / fs;
  const auto num = poly_response(c.b0, c.b1, c.b2, w);
  const auto den = poly_response(1.0L, c.a1, c.a2, w);
  return static_cast<double>(std::abs(num) / std::abs(den));
}

double magnitude_db(const BiquadCoeffs& c, double f, double fs) {
  return 20.0 * std::log10(magnitude(c, f, fs));
}

BiquadCoeffs QuantizedBiquad::as_real() const {
  auto v = [&](std::size_t i) { return coeff(i).to_double(); };
  return {v(0), v(1), v(2), v(3), v(4)};
}

long double QuantizedBiquad::dc_gain() const {
  const fx::i128 one = fx::i128(1) << coeff_format.fraction_bits;
  const fx::i128 num = raw[0] + raw[1] + raw[2];
  const fx::i128 den = one + raw[3] + raw[4];
  return static_cast<ld>(num) / static_cast<ld>(den);
}

int min_order(const FilterSpec& spec) {
  spec.validate();
  if (spec.stopband_atten_db <= spec.passband_ripple_db) {
    throw DesignError("stopband attenuation must exceed passband ripple");
  }
  const ld eps_p2 = db_to_eps2(spec.passband_ripple_db);
  const ld eps_s2 = db_to_eps2(spec.stopband_atten_db);
  const ld wp = std::tan(kPi * spec.passband_edge / spec.fs);
  const ld ws = std::tan(kPi * spec.stopband_edge / spec.fs);
  const ld n = std::acosh(std::sqrt(eps_s2 / eps_p2)) / std::acosh(ws / wp);
  const int order = std::max(1, static_cast<int>(std::ceil(n - 1e-12L)));
  if (order > 32) throw DesignError("specification needs order " + std::to_string(order) + " (> 32)");
  return order;
}

BiquadCoeffs design_cheby2(const FilterSpec& spec) {
  const int order = min_order(spec);
  if (order > 2) {
    throw DesignError("specification needs order " + std::to_string(order) +
                      "; a single biquad supports at most 2");
  }

  // Analog prototype with bilinear constant 1: s = (1 - z^-1) / (1 + z^-1).
  const ld ws = std::tan(kPi * spec.stopband_edge / spec.fs);
  const ld eps_s2 = db_to_eps2(spec.stopband_atten_db);
  const ld mu = std::asinh(std::sqrt(eps_s2)) / 2;
  const ld theta = kPi / 4;
  const std::complex<ld> cheb1_pole(-std::sinh(mu) * std::sin(theta), std::cosh(mu) * std::cos(theta));
  const std::complex<ld> pole = ws / cheb1_pole;
  const ld wz = ws / std::cos(theta);

  const std::complex<ld> one(1, 0);
  const std::complex<ld> zp = (one + pole) / (one - pole);

  BiquadCoeffs c;
  c.a1 = static_cast<double>(-2 * zp.real());
  c.a2 = static_cast<double>(std::norm(zp));

  // Unit-circle zero pair: numerator k * (1 - 2 cos(phi) z^-1 + z^-2).
  const ld cos_phi = (1 - wz * wz) / (1 + wz * wz);
  const ld num_sum = 4 * wz * wz / (1 + wz * wz);  // 2 - 2 cos(phi)
  const ld den_sum = (1.0L + c.a1) + c.a2;         // exact for the stored a1, a2
  const ld k = den_sum / num_sum;
  c.b0 = static_cast<double>(k);
  c.b2 = c.b0;
  c.b1 = static_cast<double>(-2 * cos_phi * k);

  // Rounding to double may leave the DC gain a hair under unity; nudge b1
  // until the stored coefficients give a DC gain of at least 1.
  for (int i = 0; i < 64 && c.dc_gain() < 1.0L; ++i) {
    c.b1 = std::nextafter(c.b1, std::numeric_limits<double>::infinity());
  }
  if (!c.stable()) throw DesignError("designed filter is not stable");
  return c;
}

QuantizedBiquad quantize_coeffs(const BiquadCoeffs& c, int fraction_bits, const DatapathFormats& datapath) {
  if (fraction_bits < 0 || fraction_bits > 120) {
    throw DesignError("coefficient fraction bits must be in [0, 120]");
  }
  if (!c.stable()) throw DesignError("ideal filter is not stable");

  const fx::Format wide{8, fraction_bits};
  const std::array<double, 5> vals{c.b0, c.b1, c.b2, c.a1, c.a2};
  QuantizedBiquad q;
  int bits = 1;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    q.raw[i] = fx::quantize(vals[i], wide).raw;
    bits = std::max(bits, required_signed_bits(q.raw[i]));
  }
  q.coeff_format = fx::Format{std::max(1, bits - fraction_bits), fraction_bits};
  q.input_format = datapath.input;
  q.internal_format = fx::Format{datapath.internal_integer_bits, datapath.internal_fraction_bits};
  q.output_format = datapath.output;
  q.input_format.validate();
  q.internal_format.validate();
  q.output_format.validate();

  const fx::i128 one = fx::i128(1) << fraction_bits;
  const fx::i128 a1 = q.raw[3];
  const fx::i128 a2 = q.raw[4];
  auto abs128 = [](fx::i128 v) { return v < 0 ? -v : v; };
  if (abs128(a2) >= one) {
    throw DesignError("quantization at " + std::to_string(fraction_bits) +
                      " fraction bits destabilizes the filter: |a2| = " + std::to_string(q.coeff(4).to_double()) +
                      " >= 1");
  }
  if (abs128(a1) >= one + a2) {
    throw DesignError("quantization at " + std::to_string(fraction_bits) +
                      " fraction bits destabilizes the filter: |a1| >= 1 + a2 (a1 = " +
                      std::to_string(q.coeff(3).to_double()) + ")");
  }
  return q;
}

std::vector<double> ideal_impulse_response(const BiquadCoeffs& c, std::size_t n) {
  std::vector<double> h(n);
  double y1 = 0.0, y2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double x = 0.0;
    if (k == 0) x = c.b0;
    else if (k == 1) x = c.b1;
    else if (k == 2) x = c.b2;
    const double y = x - c.a1 * y1 - c.a2 * y2;
    h[k] = y;
    y2 = y1;
    y1 = y;
  }
  return h;
}

namespace {

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
  ld acc = 0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t k = 0; k < n; ++k) acc += std::fabs(static_cast<ld>(a[k]) - b[k]);
  return static_cast<double>(acc);
}

}  // namespace

double impulse_error_l1(const BiquadCoeffs& ideal, const QuantizedBiquad& fixed, std::size_t n) {
  return l1_distance(ideal_impulse_response(ideal, n), impulse_response(fixed, n));
}

double self_roundoff_floor(const BiquadCoeffs& ideal, std::size_t n) {
  const auto hd = ideal_impulse_response(ideal, n);
  ld y1 = 0, y2 = 0, acc = 0;
  for (std::size_t k = 0; k < n; ++k) {
    ld x = 0;
    if (k == 0) x = ideal.b0;
    else if (k == 1) x = ideal.b1;
    else if (k == 2) x = ideal.b2;
    const ld y = x - static_cast<ld>(ideal.a1) * y1 - static_cast<ld>(ideal.a2) * y2;
    acc += std::fabs(y - hd[k]);
    y2 = y1;
    y1 = y;
  }
  return static_cast<double>(acc);
}

unsigned worker_threads(unsigned requested) {
  if (requested > 0) return requested;
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("AFESIM_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

std::optional<int> find_knee(const std::vector<SweepPoint>& points) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : points) best = std::min(best, p.l1_error);
  if (!std::isfinite(best)) return std::nullopt;
  for (const auto& p : points) {
    if (p.l1_error == best || p.l1_error < 10.0 * best) return p.fraction_bits;
  }
  return std::nullopt;
}

SweepResult wordlength_sweep(const BiquadCoeffs& ideal, int first_bits, int last_bits, const SweepOptions& opts) {
  if (first_bits > last_bits) throw DesignError("empty word-length range");
  const auto h_ideal = ideal_impulse_response(ideal, opts.samples);

  SweepResult result;
  for (int w = first_bits; w <= last_bits; ++w) result.points.push_back({w, 0.0, {}});

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < result.points.size(); i = next++) {
      SweepPoint& p = result.points[i];
      DatapathFormats dp = opts.datapath;
      if (opts.internal_tracks_offset) dp.internal_fraction_bits = p.fraction_bits + *opts.internal_tracks_offset;
      try {
        const auto q = quantize_coeffs(ideal, p.fraction_bits, dp);
        p.l1_error = l1_distance(h_ideal, impulse_response(q, opts.samples));
      } catch (const std::exception& e) {
        p.l1_error = std::numeric_limits<double>::infinity();
        p.note = e.what();
      }
    }
  };
  const unsigned n_threads = std::min<unsigned>(worker_threads(opts.threads),
                                                static_cast<unsigned>(result.points.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  result.floor = self_roundoff_floor(ideal, opts.samples);
  result.knee = find_knee(result.points);
  result.asymptotic_min = std::numeric_limits<double>::infinity();
  for (const auto& p : result.points) result.asymptotic_min = std::min(result.asymptotic_min, p.l1_error);
  return result;
}

SweepResult wordlength_sweep(const FilterSpec& spec, int first_bits, int last_bits, const SweepOptions& opts) {
  return wordlength_sweep(design_cheby2(spec), first_bits, last_bits, opts);
}

}  // namespace afesim
