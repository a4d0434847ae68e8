#include "afesim/afe_analog.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace afesim {

const char* to_string(LnaMode m) { return m == LnaMode::LP ? "LP" : "HP"; }

void AnalogConfig::validate() const {
  if (!(vdd > 0)) throw std::invalid_argument("vdd must be positive");
  if (std::fabs(bp - vdd / 2) > 1e-12) throw std::invalid_argument("bp must equal vdd/2");
  if (!(gain_db.lp > 0) || !(gain_db.hp > 0)) throw std::invalid_argument("LNA gain must be positive (dB)");
  if (noise_rms_in.lp < 0 || noise_rms_in.hp < 0) throw std::invalid_argument("noise rms must be non-negative");
  if (!(bulk_to_input_ratio > 0)) throw std::invalid_argument("bulk_to_input_ratio must be positive");
  if (!(bulk_min < bulk_max)) throw std::invalid_argument("bulk window is empty");
}

double AnalogConfig::gain(LnaMode m) const { return std::pow(10.0, gain_db.at(m) / 20.0); }

double bulk_correction(double bulk_p, double bulk_n, const AnalogConfig& cfg) {
  const double r = cfg.bulk_to_input_ratio;
  return (cfg.bulk_ref - bulk_p) / r - (cfg.bulk_ref - bulk_n) / r;
}

LnaOutput lna_transfer(const ElectrodeSignal& sig, double bulk_p, double bulk_n, LnaMode mode,
                       const AnalogConfig& cfg, double noise_sample) {
  // A small tolerance absorbs table round-off at the window edges.
  constexpr double kTol = 1e-9;
  for (double b : {bulk_p, bulk_n}) {
    if (!(b >= cfg.bulk_min - kTol && b <= cfg.bulk_max + kTol)) {
      throw BulkRangeError("bulk voltage " + std::to_string(b) + " V outside the RDAC output range");
    }
  }
  LnaOutput out;
  out.effective_input = (sig.vin_p - sig.vin_n + sig.dc_offset) - bulk_correction(bulk_p, bulk_n, cfg) + noise_sample;
  const double half = cfg.gain(mode) * out.effective_input / 2.0;
  const double p = cfg.bp + half;
  const double n = cfg.bp - half;
  out.vout_p = std::clamp(p, 0.0, cfg.vdd);
  out.vout_n = std::clamp(n, 0.0, cfg.vdd);
  out.clipped = out.vout_p != p || out.vout_n != n;
  return out;
}

double dfvf_buffer(double v, const AnalogConfig& cfg) { return std::clamp(v + cfg.dfvf_offset, 0.0, cfg.vdd); }

NoiseSource::NoiseSource(double rms, uint64_t seed) : rms_(rms), rng_(seed), dist_(0.0, 1.0) {
  if (!(rms >= 0)) throw std::invalid_argument("noise rms must be non-negative");
}

double NoiseSource::next() {
  if (rms_ == 0.0) return 0.0;
  return rms_ * dist_(rng_);
}

}  // namespace afesim
