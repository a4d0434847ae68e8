// Behavioral LNA and DFVF buffer models around the body-potential reference.
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

namespace afesim {

enum class LnaMode { LP, HP };

const char* to_string(LnaMode m);

struct PerMode {
  double lp = 0.0;
  double hp = 0.0;
  double at(LnaMode m) const { return m == LnaMode::LP ? lp : hp; }
};

struct AnalogConfig {
  double vdd = 1.2;
  double bp = 0.6;
  PerMode gain_db{41.42, 41.42};
  PerMode noise_rms_in{3.59e-6, 3.59e-6};
  double bulk_to_input_ratio = 2.56;
  double dfvf_offset = 1e-3;
  /// Bulk voltage producing zero correction (RDAC max-code output).
  double bulk_ref = 0.899;
  /// Allowed bulk window, the RDAC output range.
  double bulk_min = 0.750;
  double bulk_max = 0.899;

  void validate() const;
  double gain(LnaMode m) const;  // linear
};

struct ElectrodeSignal {
  double vin_p = 0.6;
  double vin_n = 0.6;
  double dc_offset = 0.0;  // added to vin_p - vin_n

  static constexpr double kMaxOffset = 0.2;
};

struct LnaOutput {
  double vout_p = 0.0;
  double vout_n = 0.0;
  double effective_input = 0.0;
  bool clipped = false;
};

class BulkRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Input-referred correction (V) from the two bulk voltages:
/// (bulk_ref - bulk_p)/r - (bulk_ref - bulk_n)/r.
double bulk_correction(double bulk_p, double bulk_n, const AnalogConfig& cfg);

LnaOutput lna_transfer(const ElectrodeSignal& sig, double bulk_p, double bulk_n, LnaMode mode,
                       const AnalogConfig& cfg, double noise_sample = 0.0);

/// Unity buffer with a small positive offset, clipped to the rails.
double dfvf_buffer(double v, const AnalogConfig& cfg);

/// Zero-mean white Gaussian samples, deterministic per seed.
class NoiseSource {
 public:
  NoiseSource(double rms, uint64_t seed);

  double next();
  double rms() const { return rms_; }

 private:
  double rms_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> dist_;
};

}  // namespace afesim
