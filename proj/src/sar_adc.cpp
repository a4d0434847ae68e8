#include "afesim/sar_adc.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace afesim {

void AdcConfig::validate() const {
  if (bits < 2 || bits > 24) throw std::invalid_argument("ADC bits must be in [2, 24]");
  if (!(vref_fullscale > 0)) throw std::invalid_argument("ADC reference must be positive");
  if (std::fabs(vcm - vref_fullscale / 2) > 1e-12) {
    throw std::invalid_argument("ADC vcm must equal half the full-scale reference");
  }
  if (!(clock_period > 0)) throw std::invalid_argument("ADC clock period must be positive");
  if (sampling_cycles < 0 || cycles_per_bit < 0 || overhead_cycles < 0) {
    throw std::invalid_argument("ADC cycle counts must be non-negative");
  }
  if (comparator_noise_rms < 0) throw std::invalid_argument("comparator noise must be non-negative");
}

double AdcConfig::lsb() const { return 2.0 * vref_fullscale / std::ldexp(1.0, bits); }

namespace {

double level_volts(PlateLevel l, const AdcConfig& cfg) {
  switch (l) {
    case PlateLevel::Gnd: return 0.0;
    case PlateLevel::Vcm: return cfg.vcm;
    case PlateLevel::Vdd: return cfg.vref_fullscale;
  }
  return 0.0;
}

// Each CDAC holds bits-2 binary branches (1/2 ... 1/2^(bits-2) of the array)
// plus a dummy unit equal to the smallest branch; the array totals one.
int sar_core(double vp, double vn, const AdcConfig& cfg, std::mt19937_64* rng, std::vector<BitDecision>* trace) {
  if (!(vp >= 0.0 && vp <= cfg.vref_fullscale) || !(vn >= 0.0 && vn <= cfg.vref_fullscale)) {
    throw AdcRangeError("ADC input outside [0, " + std::to_string(cfg.vref_fullscale) + "] V");
  }
  std::normal_distribution<double> noise(0.0, cfg.comparator_noise_rms);
  const bool noisy = cfg.comparator_noise_rms > 0.0 && rng != nullptr;
  const double vd = vp - vn;
  double shift_p = 0.0;  // top-plate displacement from bottom-plate switching
  double shift_n = 0.0;
  auto compare = [&] {
    double d = vd + (shift_p - shift_n);
    if (noisy) d += noise(*rng);
    return d >= 0.0;  // ties resolve to "P higher"
  };

  // Sampling with bottom plates at ground, then the MSB decision.
  const bool p_high = compare();
  const CdacSide low_side = p_high ? CdacSide::N : CdacSide::P;
  double& low_shift = p_high ? shift_n : shift_p;
  low_shift += cfg.vcm;  // whole low-side array: gnd -> vcm
  if (trace) trace->push_back({cfg.bits - 1, p_high ? 1 : -1, low_side, PlateLevel::Vcm});

  int magnitude = 0;
  for (int i = 1; i < cfg.bits; ++i) {
    const bool p_higher = compare();
    const bool high_remains = p_high ? p_higher : !p_higher;
    magnitude = (magnitude << 1) | (high_remains ? 1 : 0);

    PlateLevel level = PlateLevel::Vcm;
    if (i < cfg.bits - 1) {
      // Branch i (weight 2^-i) leaves vcm for vdd or gnd.
      level = high_remains ? PlateLevel::Vdd : PlateLevel::Gnd;
      const double delta = (level_volts(level, cfg) - cfg.vcm) * std::ldexp(1.0, -i);
      low_shift += delta;
    }
    if (trace) trace->push_back({cfg.bits - 1 - i, p_higher ? 1 : -1, low_side, level});
  }
  return p_high ? cfg.mid_code() + magnitude : cfg.mid_code() - 1 - magnitude;
}

}  // namespace

SarConversion convert(double vp, double vn, const AdcConfig& cfg, std::mt19937_64* rng) {
  SarConversion c;
  c.input_vp = vp;
  c.input_vn = vn;
  c.bit_trace.reserve(static_cast<std::size_t>(cfg.bits));
  c.code = sar_core(vp, vn, cfg, rng, &c.bit_trace);
  c.cycles_used = conversion_timing(cfg).cycles;
  return c;
}

int convert_code(double vp, double vn, const AdcConfig& cfg, std::mt19937_64* rng) {
  return sar_core(vp, vn, cfg, rng, nullptr);
}

int ideal_quantize(double vd, const AdcConfig& cfg) {
  const double q = std::floor(vd / cfg.lsb()) + cfg.mid_code();
  return static_cast<int>(std::clamp(q, 0.0, static_cast<double>(cfg.max_code())));
}

int ConversionTiming::channels_at(double rate_hz) const {
  if (!(rate_hz > 0) || rate_hz > max_rate) return 0;
  return static_cast<int>(std::floor(max_rate / rate_hz));
}

ConversionTiming conversion_timing(const AdcConfig& cfg) {
  ConversionTiming t;
  t.cycles = cfg.sampling_cycles + cfg.bits * cfg.cycles_per_bit + cfg.overhead_cycles;
  t.duration = t.cycles * cfg.clock_period;
  t.max_rate = t.duration > 0 ? 1.0 / t.duration : 0.0;
  return t;
}

const char* to_string(CdacSide s) { return s == CdacSide::P ? "P" : "N"; }

const char* to_string(PlateLevel l) {
  switch (l) {
    case PlateLevel::Gnd: return "gnd";
    case PlateLevel::Vcm: return "vcm";
    case PlateLevel::Vdd: return "vdd";
  }
  return "?";
}

void write_bit_trace_csv(std::ostream& os, const SarConversion& conv) {
  os << "bit,sign,side,level\n";
  for (const auto& b : conv.bit_trace) {
    os << b.bit_index << ',' << (b.comparator_sign > 0 ? "+" : "-") << ',' << to_string(b.side_switched) << ','
       << to_string(b.level) << '\n';
  }
}

}  // namespace afesim
