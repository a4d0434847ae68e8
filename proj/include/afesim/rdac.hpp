// 8-bit R-2R pseudo-resistor DAC driving an LNA bulk terminal.
//
// The transfer is monotone and deliberately nonuniform: the top codes, where
// the offset loop operates for small offsets, have fine ~266 uV steps; the
// remaining codes fill the 750..899 mV span with coarser steps.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace afesim {

enum class CornerName { Typical, Fast, Slow };

const char* to_string(CornerName c);
CornerName parse_corner(const std::string& s);

struct RdacCorner {
  CornerName name = CornerName::Typical;
  double unit_resistance = 60e12;  // ohms, per R unit (four pseudo-resistors)
  uint64_t seed = 1;

  static constexpr double kMinUnitResistance = 27.82e12;
  static constexpr double kMaxUnitResistance = 136e12;

  static RdacCorner preset(CornerName name, uint64_t seed);
  void validate() const;
};

struct RdacTransfer {
  static constexpr int kCodes = 256;
  static constexpr double kVMin = 0.750;
  static constexpr double kVMax = 0.899;
  static constexpr double kMinStep = 170e-6;
  static constexpr double kMaxStep = 2.96e-3;
  static constexpr double kMinCurrent = 1e-9;
  static constexpr double kMaxCurrent = 150e-9;

  std::array<double, kCodes> v{};
  std::array<double, kCodes> i{};

  /// Empty string when every published bound holds; otherwise a description
  /// of the first violation.
  std::string check_invariants() const;
  bool strictly_increasing() const;
};

class RdacError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic per (corner, seed). Throws RdacError if no valid table is
/// found within 100 attempts.
RdacTransfer build_transfer(const RdacCorner& corner);

struct StepStats {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  int count = 0;
};

/// Statistics of v[k+1] - v[k] for k in [first_step, last_step].
StepStats step_stats(const RdacTransfer& t, int first_step = 0, int last_step = RdacTransfer::kCodes - 2);

struct RdacOutput {
  double volts = 0.0;
  double amps = 0.0;
};

RdacOutput output(const RdacTransfer& t, int code);

/// `code,volts,amps` with a header row.
void write_transfer_csv(std::ostream& os, const RdacTransfer& t);
RdacTransfer read_transfer_csv(std::istream& is);
RdacTransfer load_transfer_csv(const std::string& path);
void save_transfer_csv(const std::string& path, const RdacTransfer& t);

}  // namespace afesim
