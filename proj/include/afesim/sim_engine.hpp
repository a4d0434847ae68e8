// Discrete-time scenario runner: electrode sources -> LNA -> DFVF -> shared
// SAR ADC -> fixed-point low-pass -> offset controller -> RDACs -> LNA bulk.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "afesim/afe_analog.hpp"
#include "afesim/filter_design.hpp"
#include "afesim/offset_controller.hpp"
#include "afesim/rdac.hpp"
#include "afesim/sar_adc.hpp"

namespace afesim {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SourceComponent {
  enum class Kind { Sine, Dc };
  Kind kind = Kind::Dc;
  double freq_hz = 0.0;
  double amplitude_pp = 0.0;  // differential, volts peak-to-peak
  double phase_rad = 0.0;
  double offset = 0.0;  // electrode DC offset, volts (Dc only)

  static SourceComponent sine(double freq_hz, double amplitude_pp, double phase_rad = 0.0) {
    return {Kind::Sine, freq_hz, amplitude_pp, phase_rad, 0.0};
  }
  static SourceComponent dc(double offset) { return {Kind::Dc, 0.0, 0.0, 0.0, offset}; }
};

struct ChannelSpec {
  std::vector<SourceComponent> sources;
  std::optional<uint64_t> noise_seed;  // default: scenario seed + channel index

  double dc_offset() const;
  double ac_value(double t) const;
};

struct FilterSetup {
  /// A pinned quantized filter (from an artifact). When empty the filter is
  /// designed at the scenario rate from `spec` and quantized.
  std::optional<QuantizedBiquad> pinned;
  std::string pinned_source;
  FilterSpec spec{};  // fs is replaced by the scenario rate
  int coeff_fraction_bits = 40;
  DatapathFormats datapath{};
};

struct RdacSetup {
  RdacCorner corner_p = RdacCorner::preset(CornerName::Typical, 1);
  RdacCorner corner_n = RdacCorner::preset(CornerName::Typical, 2);
  std::optional<RdacTransfer> transfer_p;
  std::optional<RdacTransfer> transfer_n;
};

struct RecordSetup {
  bool waveform = false;
  uint64_t decimate = 1;
  bool events = true;
};

/// Per-block supply currents (amps). Missing entries make the budget fail.
struct BudgetConfig {
  std::optional<double> lna_normal;
  std::optional<double> lna_cancelling;
  std::optional<double> dfvf_signal;  // each; two per channel
  std::optional<double> dfvf_dac;     // each; two per channel
  std::optional<double> rdac;         // each; two per channel
  std::optional<double> adc_shared;   // one ADC shared by all channels
  std::string label;
};

enum class BudgetMode { Normal, Cancelling };

class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-channel supply current: sum of the channel's blocks plus its share of
/// the ADC.
double current_budget(BudgetMode mode, int n_channels, const BudgetConfig& cfg);

struct Scenario {
  std::string name = "scenario";
  double duration_s = 1.0;
  double rate_hz = 20e3;
  std::vector<ChannelSpec> channels{ChannelSpec{}};
  uint64_t noise_seed = 1;
  AnalogConfig analog{};
  AdcConfig adc{};
  LoopConfig loop{};
  RdacSetup rdac{};
  FilterSetup filter{};
  RecordSetup record{};
  double residual_window_s = 10.0;
  std::optional<uint64_t> max_clip_samples;
  std::optional<BudgetConfig> budget;
  /// Replaces the controller dwell (seconds); the report is stamped accelerated.
  std::optional<double> dwell_override_s;

  void validate() const;
};

struct SineFit {
  double freq_hz = 0.0;
  double amplitude_codes = 0.0;
  double amplitude_volts_in = 0.0;  // input-referred
  double mean_codes = 0.0;
};

struct ChannelReport {
  int final_code_p = 255;
  int final_code_n = 255;
  LoopPhase final_phase = LoopPhase::Idle;
  bool triggered = false;
  bool reached_hold = false;
  std::optional<double> settle_time_s;  // last entry into Hold
  std::optional<double> saturated_at_s;
  int steps = 0;
  int lpf_final = 0;
  double true_dc_offset = 0.0;
  double residual_offset = 0.0;       // from the recorded ADC codes
  double residual_diagnostic = 0.0;   // true offset minus applied correction
  double lna_rms_input_referred = 0.0;
  uint64_t samples = 0;
  uint64_t adc_clip_samples = 0;
  uint64_t lna_clip_samples = 0;
  uint64_t filter_saturations = 0;
  uint64_t cancelling_samples = 0;
  std::optional<SineFit> sine_fit;
  std::string events_path;
};

struct SimReport {
  std::string scenario;
  double duration_s = 0.0;
  double rate_hz = 0.0;
  bool accelerated = false;
  bool terminated_early = false;
  std::string termination_reason;
  double filter_dc_gain = 0.0;
  std::string filter_source;
  std::vector<ChannelReport> channels;
  std::string waveform_path;
  std::optional<double> budget_normal;
  std::optional<double> budget_cancelling;
  std::string budget_label;
};

/// Runs the scenario. When `out_dir` is non-empty, waveforms and event logs
/// are streamed there (the directory must exist).
SimReport run(const Scenario& sc, const std::string& out_dir = {});

/// Mean of `samples - ac_known` over the final `window_samples` entries.
double measure_residual(const std::vector<double>& samples, const std::vector<double>& ac_known,
                        std::size_t window_samples);

}  // namespace afesim
