// 10-bit differential SAR ADC with top-plate sampling and a tri-level
// (gnd / vcm / vdd) capacitive DAC.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <vector>

namespace afesim {

struct AdcConfig {
  int bits = 10;
  double vref_fullscale = 1.2;
  double vcm = 0.6;
  double clock_period = 125e-9;
  int sampling_cycles = 32;
  int cycles_per_bit = 4;
  int overhead_cycles = 2;
  double comparator_noise_rms = 0.0;

  void validate() const;
  double lsb() const;  // 2 * vref / 2^bits
  int mid_code() const { return 1 << (bits - 1); }
  int max_code() const { return (1 << bits) - 1; }
};

enum class CdacSide { P, N };
enum class PlateLevel { Gnd, Vcm, Vdd };

struct BitDecision {
  int bit_index = 0;
  int comparator_sign = 0;  // +1: P top plate >= N top plate
  CdacSide side_switched = CdacSide::N;
  PlateLevel level = PlateLevel::Vcm;
};

struct SarConversion {
  double input_vp = 0.0;
  double input_vn = 0.0;
  int code = 0;  // offset binary
  std::vector<BitDecision> bit_trace;
  int cycles_used = 0;
};

class AdcRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Full conversion with the per-bit switching trace. `rng` is consulted only
/// when comparator noise is configured.
SarConversion convert(double vp, double vn, const AdcConfig& cfg, std::mt19937_64* rng = nullptr);

/// Same decision sequence as convert() without building the trace.
int convert_code(double vp, double vn, const AdcConfig& cfg, std::mt19937_64* rng = nullptr);

/// Reference quantizer: clamp(floor(vd / LSB) + 2^(bits-1), 0, 2^bits - 1).
int ideal_quantize(double vd, const AdcConfig& cfg);

struct ConversionTiming {
  double duration = 0.0;
  double max_rate = 0.0;
  int cycles = 0;
  int channels_at(double rate_hz) const;
};

ConversionTiming conversion_timing(const AdcConfig& cfg);

/// `bit,sign,side,level` rows.
void write_bit_trace_csv(std::ostream& os, const SarConversion& conv);

const char* to_string(CdacSide s);
const char* to_string(PlateLevel l);

}  // namespace afesim
