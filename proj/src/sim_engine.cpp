#include "afesim/sim_engine.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <random>

#include "afesim/filter_runtime.hpp"

namespace afesim {

double ChannelSpec::dc_offset() const {
  double d = 0.0;
  for (const auto& s : sources) {
    if (s.kind == SourceComponent::Kind::Dc) d += s.offset;
  }
  return d;
}

double ChannelSpec::ac_value(double t) const {
  double v = 0.0;
  for (const auto& s : sources) {
    if (s.kind == SourceComponent::Kind::Sine) {
      v += 0.5 * s.amplitude_pp * std::sin(2.0 * std::numbers::pi * s.freq_hz * t + s.phase_rad);
    }
  }
  return v;
}

double current_budget(BudgetMode mode, int n_channels, const BudgetConfig& cfg) {
  if (n_channels < 1) throw BudgetError("budget needs at least one channel");
  auto need = [](const std::optional<double>& v, const char* name) {
    if (!v) throw BudgetError(std::string("budget is missing block current '") + name + "'");
    if (*v < 0) throw BudgetError(std::string("negative block current '") + name + "'");
    return *v;
  };
  const double lna = mode == BudgetMode::Normal ? need(cfg.lna_normal, "lna_normal")
                                                : need(cfg.lna_cancelling, "lna_cancelling");
  const double per_channel =
      lna + 2.0 * need(cfg.dfvf_signal, "dfvf_signal") + 2.0 * need(cfg.dfvf_dac, "dfvf_dac") + 2.0 * need(cfg.rdac, "rdac");
  return per_channel + need(cfg.adc_shared, "adc_shared") / n_channels;
}

void Scenario::validate() const {
  if (!(duration_s >= 0)) throw ScenarioError("duration must be non-negative");
  if (!(rate_hz > 0)) throw ScenarioError("per-channel rate must be positive");
  if (channels.empty() || channels.size() > 5) throw ScenarioError("channels must be between 1 and 5");
  analog.validate();
  adc.validate();
  loop.validate();
  const auto timing = conversion_timing(adc);
  if (static_cast<double>(channels.size()) * rate_hz > timing.max_rate) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%zu channels at %.1f Hz exceed the ADC maximum rate of %.1f Hz", channels.size(),
                  rate_hz, timing.max_rate);
    throw ScenarioError(buf);
  }
  for (const auto& ch : channels) {
    if (std::fabs(ch.dc_offset()) > ElectrodeSignal::kMaxOffset) {
      throw ScenarioError("electrode DC offset beyond the 200 mV model bound");
    }
    for (const auto& s : ch.sources) {
      if (s.kind == SourceComponent::Kind::Sine && (!(s.freq_hz >= 0) || !(s.amplitude_pp >= 0))) {
        throw ScenarioError("sine source needs non-negative frequency and amplitude");
      }
    }
  }
  if (record.decimate < 1) throw ScenarioError("record.decimate must be >= 1");
  if (!(residual_window_s >= 0)) throw ScenarioError("residual window must be non-negative");
  if (dwell_override_s && !(*dwell_override_s > 0)) throw ScenarioError("dwell override must be positive");
}

double measure_residual(const std::vector<double>& samples, const std::vector<double>& ac_known,
                        std::size_t window_samples) {
  if (window_samples == 0 || window_samples > samples.size()) {
    throw ScenarioError("residual window exceeds the recording");
  }
  if (!ac_known.empty() && ac_known.size() != samples.size()) {
    throw ScenarioError("known AC content must match the recording length");
  }
  long double acc = 0;
  for (std::size_t k = samples.size() - window_samples; k < samples.size(); ++k) {
    acc += samples[k] - (ac_known.empty() ? 0.0 : ac_known[k]);
  }
  return static_cast<double>(acc / window_samples);
}

namespace {

// Least-squares fit of x ~ a cos(wt) + b sin(wt) + c, accumulated online.
class SineFitter {
 public:
  explicit SineFitter(double freq_hz) : w_(2.0 * std::numbers::pi * freq_hz) {}

  void add(double t, double x) {
    const double basis[3] = {std::cos(w_ * t), std::sin(w_ * t), 1.0};
    for (int i = 0; i < 3; ++i) {
      rhs_[i] += basis[i] * x;
      for (int j = 0; j < 3; ++j) m_[i][j] += basis[i] * basis[j];
    }
  }

  // Solves the 3x3 normal equations by Cramer's rule.
  std::array<double, 3> solve() const {
    auto det3 = [](const long double a[3][3]) {
      return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
             a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    };
    const long double d = det3(m_);
    std::array<double, 3> out{0, 0, 0};
    if (d == 0) return out;
    for (int k = 0; k < 3; ++k) {
      long double t[3][3];
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) t[i][j] = j == k ? rhs_[i] : m_[i][j];
      }
      out[k] = static_cast<double>(det3(t) / d);
    }
    return out;
  }

 private:
  double w_;
  long double m_[3][3] = {};
  long double rhs_[3] = {};
};

struct ChannelRuntime {
  const ChannelSpec* spec = nullptr;
  std::unique_ptr<BiquadKernel> kernel;
  BiquadState filter_state;
  std::unique_ptr<OffsetController> controller;
  NoiseSource noise{1.0, 0};
  std::mt19937_64 comparator_rng;
  double dc_offset = 0.0;
  std::optional<SineFitter> fitter;
  std::optional<double> fit_freq;
  // Welford accumulators for the input-referred LNA output.
  long double lna_mean = 0, lna_m2 = 0;
  uint64_t lna_n = 0;
  long double resid_sum = 0;
  uint64_t resid_n = 0;
  std::ofstream events;
  ChannelReport report;
};

QuantizedBiquad make_filter(const Scenario& sc) {
  if (sc.filter.pinned) return *sc.filter.pinned;
  FilterSpec spec = sc.filter.spec;
  spec.fs = sc.rate_hz;
  return quantize_coeffs(design_cheby2(spec), sc.filter.coeff_fraction_bits, sc.filter.datapath);
}

RdacTransfer make_transfer(const std::optional<RdacTransfer>& fixed, const RdacCorner& corner) {
  return fixed ? *fixed : build_transfer(corner);
}

}  // namespace

SimReport run(const Scenario& sc, const std::string& out_dir) {
  sc.validate();

  SimReport rep;
  rep.scenario = sc.name;
  rep.duration_s = sc.duration_s;
  rep.rate_hz = sc.rate_hz;
  rep.accelerated = sc.dwell_override_s.has_value();

  const QuantizedBiquad filt = make_filter(sc);
  rep.filter_dc_gain = static_cast<double>(filt.dc_gain());
  rep.filter_source = sc.filter.pinned ? sc.filter.pinned_source : "designed at scenario rate";
  const RdacTransfer tp = make_transfer(sc.rdac.transfer_p, sc.rdac.corner_p);
  const RdacTransfer tn = make_transfer(sc.rdac.transfer_n, sc.rdac.corner_n);

  LoopConfig loop = sc.loop;
  if (sc.dwell_override_s) {
    loop.dwell.fixed_seconds = *sc.dwell_override_s;
    loop.dwell.window_seconds = *sc.dwell_override_s;
  }

  if (sc.budget) {
    const int n = static_cast<int>(sc.channels.size());
    rep.budget_normal = current_budget(BudgetMode::Normal, n, *sc.budget);
    rep.budget_cancelling = current_budget(BudgetMode::Cancelling, n, *sc.budget);
    rep.budget_label = sc.budget->label;
  }

  const bool write_files = !out_dir.empty();
  std::ofstream wave;
  if (write_files && sc.record.waveform) {
    rep.waveform_path = out_dir + "/waveform.csv";
    wave.open(rep.waveform_path);
    if (!wave) throw ScenarioError("cannot write " + rep.waveform_path);
    wave << "t_s,ch,vin_diff,lna_out_diff,adc_code,lpf_out,code_p,code_n,mode\n";
  }

  const int mid = sc.adc.mid_code();
  const double lsb = sc.adc.lsb();
  const auto n_samples = static_cast<uint64_t>(std::llround(sc.duration_s * sc.rate_hz));
  const auto window_samples = static_cast<uint64_t>(std::llround(sc.residual_window_s * sc.rate_hz));
  const uint64_t window_start = n_samples > window_samples ? n_samples - window_samples : 0;

  std::vector<ChannelRuntime> rt(sc.channels.size());
  for (std::size_t c = 0; c < rt.size(); ++c) {
    auto& ch = rt[c];
    ch.spec = &sc.channels[c];
    ch.kernel = std::make_unique<BiquadKernel>(filt);
    ch.controller = std::make_unique<OffsetController>(loop, sc.rate_hz);
    const uint64_t seed = ch.spec->noise_seed.value_or(sc.noise_seed + c);
    ch.noise = NoiseSource(1.0, seed);
    ch.comparator_rng.seed(seed ^ 0xc2b2ae3d27d4eb4fULL);
    ch.dc_offset = ch.spec->dc_offset();
    for (const auto& s : ch.spec->sources) {
      if (s.kind == SourceComponent::Kind::Sine) {
        ch.fit_freq = s.freq_hz;
        ch.fitter.emplace(s.freq_hz);
        break;
      }
    }
    if (write_files && sc.record.events) {
      ch.report.events_path = out_dir + "/events_ch" + std::to_string(c) + ".csv";
      ch.events.open(ch.report.events_path);
      if (!ch.events) throw ScenarioError("cannot write " + ch.report.events_path);
      write_event_header(ch.events);
    }
  }

  char row[256];
  for (uint64_t n = 0; n < n_samples; ++n) {
    const double t = static_cast<double>(n) / sc.rate_hz;
    for (std::size_t c = 0; c < rt.size(); ++c) {
      auto& ch = rt[c];
      auto& r = ch.report;
      const LoopState before = ch.controller->state();
      const LnaMode mode = before.mode_request;

      const double ac = ch.spec->ac_value(t);
      const ElectrodeSignal sig{sc.analog.bp + ac / 2, sc.analog.bp - ac / 2, ch.dc_offset};
      const double noise = ch.noise.next() * sc.analog.noise_rms_in.at(mode);
      const LnaOutput lna =
          lna_transfer(sig, tp.v[before.code_p], tn.v[before.code_n], mode, sc.analog, noise);
      const double vp = dfvf_buffer(lna.vout_p, sc.analog);
      const double vn = dfvf_buffer(lna.vout_n, sc.analog);
      const int code = convert_code(vp, vn, sc.adc, &ch.comparator_rng);

      fx::i128 lpf_raw = 0;
      ch.kernel->step_raw(ch.filter_state, code - mid, lpf_raw);
      const int lpf = static_cast<int>(lpf_raw);
      const LoopAction action = ch.controller->update(lpf);
      const LoopState& after = ch.controller->state();

      const double gain = sc.analog.gain(mode);
      const double lna_diff = lna.vout_p - lna.vout_n;
      const long double x_in = lna_diff / gain;
      ++ch.lna_n;
      const long double delta = x_in - ch.lna_mean;
      ch.lna_mean += delta / ch.lna_n;
      ch.lna_m2 += delta * (x_in - ch.lna_mean);

      // Mid-point reconstruction of the floor quantizer, input-referred.
      const double recon = (code - mid + 0.5) * lsb / gain;
      if (n >= window_start) {
        ch.resid_sum += recon - ac;
        ++ch.resid_n;
      }
      if (ch.fitter) ch.fitter->add(t, code - mid + 0.5);

      ++r.samples;
      if (code == 0 || code == sc.adc.max_code()) ++r.adc_clip_samples;
      if (lna.clipped) ++r.lna_clip_samples;
      if (mode == LnaMode::HP) ++r.cancelling_samples;
      if (after.phase == LoopPhase::Cancelling && before.phase != LoopPhase::Cancelling) r.triggered = true;
      if (action == LoopAction::EnterHold) {
        r.reached_hold = true;
        r.settle_time_s = t;
      }
      if (action == LoopAction::FlagSaturated && !r.saturated_at_s) r.saturated_at_s = t;

      if (ch.events.is_open() && (action != LoopAction::None || after.phase != before.phase)) {
        write_event(ch.events, t, after, lpf, action);
      }
      if (wave.is_open() && n % sc.record.decimate == 0) {
        std::snprintf(row, sizeof row, "%.9g,%zu,%.9g,%.9g,%d,%d,%d,%d,%s\n", t, c, ac + ch.dc_offset, lna_diff, code,
                      lpf, after.code_p, after.code_n, to_string(after.mode_request));
        wave << row;
      }
      r.lpf_final = lpf;
    }

    if (sc.max_clip_samples) {
      for (const auto& ch : rt) {
        if (ch.report.adc_clip_samples > *sc.max_clip_samples) {
          rep.terminated_early = true;
          rep.termination_reason = "ADC clipping exceeded max_clip_samples";
        }
      }
      if (rep.terminated_early) break;
    }
  }

  for (auto& ch : rt) {
    auto& r = ch.report;
    const LoopState& s = ch.controller->state();
    r.final_code_p = s.code_p;
    r.final_code_n = s.code_n;
    r.final_phase = s.phase;
    r.steps = s.steps_taken;
    r.filter_saturations = ch.filter_state.saturation_count;
    r.true_dc_offset = ch.dc_offset;
    r.residual_diagnostic = input_referred_residual(s, tp, tn, ch.dc_offset, sc.analog);
    r.residual_offset = ch.resid_n ? static_cast<double>(ch.resid_sum / ch.resid_n) : 0.0;
    r.lna_rms_input_referred = ch.lna_n > 1 ? static_cast<double>(std::sqrt(ch.lna_m2 / ch.lna_n)) : 0.0;
    if (ch.fitter && r.samples >= 3) {
      const auto abc = ch.fitter->solve();
      SineFit f;
      f.freq_hz = *ch.fit_freq;
      f.amplitude_codes = std::hypot(abc[0], abc[1]);
      f.amplitude_volts_in = f.amplitude_codes * lsb / sc.analog.gain(LnaMode::LP);
      f.mean_codes = abc[2];
      r.sine_fit = f;
    }
    rep.channels.push_back(r);
  }
  return rep;
}

}  // namespace afesim
