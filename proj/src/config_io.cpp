#include "afesim/config_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace afesim {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// Strict view of one JSON object: every key must be consumed before done().
class Obj {
 public:
  Obj(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const std::string& k) const { return j_.contains(k); }

  const json& raw(const std::string& k) {
    if (!j_.contains(k)) throw ConfigError(where_ + ": missing key '" + k + "'");
    seen_.insert(k);
    return j_.at(k);
  }

  template <class T>
  T req(const std::string& k) {
    const json& v = raw(k);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + k + ": wrong type");
    }
  }

  template <class T>
  void opt(const std::string& k, T& out) {
    if (has(k)) out = req<T>(k);
  }

  template <class T>
  void opt(const std::string& k, std::optional<T>& out) {
    if (has(k) && !j_.at(k).is_null()) out = req<T>(k);
    else if (has(k)) seen_.insert(k);
  }

  Obj sub(const std::string& k) { return Obj(raw(k), where_ + "." + k); }
  const std::string& where() const { return where_; }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

ordered_json format_json(const fx::Format& f) {
  return ordered_json{{"integer_bits", f.integer_bits}, {"fraction_bits", f.fraction_bits}};
}

fx::Format format_from(Obj o) {
  fx::Format f{o.req<int>("integer_bits"), o.req<int>("fraction_bits")};
  o.done();
  try {
    f.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(o.where() + ": " + e.what());
  }
  return f;
}

ordered_json spec_json(const FilterSpec& s) {
  return ordered_json{{"fs", s.fs},
                      {"passband_edge_hz", s.passband_edge},
                      {"stopband_edge_hz", s.stopband_edge},
                      {"passband_ripple_db", s.passband_ripple_db},
                      {"stopband_atten_db", s.stopband_atten_db}};
}

FilterSpec spec_from(Obj o, bool fs_optional) {
  FilterSpec s;
  if (fs_optional) o.opt("fs", s.fs);
  else s.fs = o.req<double>("fs");
  o.opt("passband_edge_hz", s.passband_edge);
  o.opt("stopband_edge_hz", s.stopband_edge);
  o.opt("passband_ripple_db", s.passband_ripple_db);
  o.opt("stopband_atten_db", s.stopband_atten_db);
  o.done();
  return s;
}

DatapathFormats datapath_from(Obj o) {
  DatapathFormats d;
  if (o.has("input")) d.input = format_from(o.sub("input"));
  o.opt("internal_integer_bits", d.internal_integer_bits);
  o.opt("internal_fraction_bits", d.internal_fraction_bits);
  if (o.has("output")) d.output = format_from(o.sub("output"));
  o.done();
  return d;
}

const char* const kCoeffNames[5] = {"b0", "b1", "b2", "a1", "a2"};

std::string resolve(const std::string& base_dir, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path.string();
  return (fs::path(base_dir) / path).lexically_normal().string();
}

RdacCorner corner_from(Obj o, uint64_t default_seed) {
  CornerName name = CornerName::Typical;
  if (o.has("name")) {
    try {
      name = parse_corner(o.req<std::string>("name"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(o.where() + ": " + e.what());
    }
  }
  RdacCorner c = RdacCorner::preset(name, default_seed);
  o.opt("unit_resistance", c.unit_resistance);
  o.opt("seed", c.seed);
  o.done();
  return c;
}

PerMode per_mode_from(Obj o) {
  PerMode m;
  m.lp = o.req<double>("lp");
  m.hp = o.req<double>("hp");
  o.done();
  return m;
}

SourceComponent source_from(Obj o) {
  const auto type = o.req<std::string>("type");
  SourceComponent s;
  if (type == "sine") {
    s = SourceComponent::sine(o.req<double>("freq_hz"), o.req<double>("amplitude_pp"));
    o.opt("phase_rad", s.phase_rad);
  } else if (type == "dc") {
    s = SourceComponent::dc(o.req<double>("offset"));
  } else {
    throw ConfigError(o.where() + ": source type must be 'sine' or 'dc'");
  }
  o.done();
  return s;
}

template <class T>
ordered_json opt_json(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const ordered_json& j) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f << j.dump(2) << '\n';
  if (!f) throw ConfigError("write failed for " + path);
}

FilterArtifact make_filter_artifact(const FilterSpec& spec, int coeff_fraction_bits, const DatapathFormats& datapath) {
  FilterArtifact a;
  a.spec = spec;
  a.order = min_order(spec);
  a.coeffs = design_cheby2(spec);
  a.quantized = quantize_coeffs(a.coeffs, coeff_fraction_bits, datapath);
  return a;
}

ordered_json to_json(const FilterArtifact& a) {
  const auto& q = a.quantized;
  ordered_json coeffs, raw;
  const double c[5] = {a.coeffs.b0, a.coeffs.b1, a.coeffs.b2, a.coeffs.a1, a.coeffs.a2};
  for (int i = 0; i < 5; ++i) {
    coeffs[kCoeffNames[i]] = c[i];
    raw[kCoeffNames[i]] = fx::to_string(q.raw[i]);
  }
  const double pass_db = magnitude_db(a.coeffs, a.spec.passband_edge, a.spec.fs);
  const double stop_db = magnitude_db(a.coeffs, a.spec.stopband_edge, a.spec.fs);
  ordered_json j;
  j["kind"] = "afesim.biquad";
  j["version"] = 1;
  j["spec"] = spec_json(a.spec);
  j["design"] = ordered_json{{"family", "chebyshev2"},
                             {"transform", "bilinear, prewarped at the stopband edge"},
                             {"order", a.order},
                             {"sections", 1},
                             {"passband_gain_db", pass_db},
                             {"stopband_gain_db", stop_db}};
  j["coefficients"] = coeffs;
  j["quantized"] = ordered_json{{"coeff_format", format_json(q.coeff_format)},
                                {"input_format", format_json(q.input_format)},
                                {"internal_format", format_json(q.internal_format)},
                                {"output_format", format_json(q.output_format)},
                                {"raw", raw},
                                {"dc_gain", static_cast<double>(q.dc_gain())}};
  return j;
}

FilterArtifact filter_artifact_from_json(const json& j) {
  Obj o(j, "artifact");
  if (o.req<std::string>("kind") != "afesim.biquad") throw ConfigError("artifact: kind must be 'afesim.biquad'");
  if (o.req<int>("version") != 1) throw ConfigError("artifact: unsupported version");
  FilterArtifact a;
  a.spec = spec_from(o.sub("spec"), false);

  Obj d = o.sub("design");
  a.order = d.req<int>("order");
  for (const char* k : {"family", "transform", "sections", "passband_gain_db", "stopband_gain_db"}) {
    if (d.has(k)) d.raw(k);
  }
  d.done();

  Obj c = o.sub("coefficients");
  double v[5];
  for (int i = 0; i < 5; ++i) v[i] = c.req<double>(kCoeffNames[i]);
  c.done();
  a.coeffs = {v[0], v[1], v[2], v[3], v[4]};

  Obj q = o.sub("quantized");
  a.quantized.coeff_format = format_from(q.sub("coeff_format"));
  a.quantized.input_format = format_from(q.sub("input_format"));
  a.quantized.internal_format = format_from(q.sub("internal_format"));
  a.quantized.output_format = format_from(q.sub("output_format"));
  Obj r = q.sub("raw");
  for (int i = 0; i < 5; ++i) {
    try {
      a.quantized.raw[i] = fx::parse_i128(r.req<std::string>(kCoeffNames[i]));
    } catch (const std::logic_error& e) {
      throw ConfigError(std::string("artifact.quantized.raw.") + kCoeffNames[i] + ": " + e.what());
    }
    if (a.quantized.raw[i] < a.quantized.coeff_format.raw_min() ||
        a.quantized.raw[i] > a.quantized.coeff_format.raw_max()) {
      throw ConfigError(std::string("artifact.quantized.raw.") + kCoeffNames[i] + ": outside the coefficient format");
    }
  }
  r.done();
  if (q.has("dc_gain")) q.raw("dc_gain");
  q.done();
  o.done();
  return a;
}

void save_filter_artifact(const std::string& path, const FilterArtifact& a) { write_json_file(path, to_json(a)); }

FilterArtifact load_filter_artifact(const std::string& path) { return filter_artifact_from_json(read_json_file(path)); }

BudgetConfig budget_from_json(const json& j) {
  Obj o(j, "budget");
  BudgetConfig b;
  o.opt("label", b.label);
  o.opt("lna_normal", b.lna_normal);
  o.opt("lna_cancelling", b.lna_cancelling);
  o.opt("dfvf_signal", b.dfvf_signal);
  o.opt("dfvf_dac", b.dfvf_dac);
  o.opt("rdac", b.rdac);
  o.opt("adc_shared", b.adc_shared);
  o.done();
  return b;
}

BudgetConfig load_budget(const std::string& path) { return budget_from_json(read_json_file(path)); }

Scenario scenario_from_json(const json& j, const std::string& base_dir) {
  Obj o(j, "scenario");
  Scenario sc;
  o.opt("name", sc.name);
  o.opt("duration_s", sc.duration_s);
  o.opt("rate_hz", sc.rate_hz);
  o.opt("noise_seed", sc.noise_seed);
  o.opt("residual_window_s", sc.residual_window_s);
  o.opt("max_clip_samples", sc.max_clip_samples);
  o.opt("dwell_override_s", sc.dwell_override_s);

  if (o.has("channels")) {
    const json& arr = o.raw("channels");
    if (!arr.is_array()) throw ConfigError("scenario.channels: expected an array");
    sc.channels.clear();
    for (std::size_t c = 0; c < arr.size(); ++c) {
      Obj co(arr[c], "scenario.channels[" + std::to_string(c) + "]");
      ChannelSpec ch;
      co.opt("noise_seed", ch.noise_seed);
      if (co.has("sources")) {
        const json& src = co.raw("sources");
        if (!src.is_array()) throw ConfigError(co.where() + ".sources: expected an array");
        for (std::size_t k = 0; k < src.size(); ++k) {
          ch.sources.push_back(source_from(Obj(src[k], co.where() + ".sources[" + std::to_string(k) + "]")));
        }
      }
      co.done();
      sc.channels.push_back(std::move(ch));
    }
  }

  if (o.has("analog")) {
    Obj a = o.sub("analog");
    auto& cfg = sc.analog;
    a.opt("vdd", cfg.vdd);
    a.opt("bp", cfg.bp);
    if (a.has("gain_db")) cfg.gain_db = per_mode_from(a.sub("gain_db"));
    if (a.has("noise_rms_in")) cfg.noise_rms_in = per_mode_from(a.sub("noise_rms_in"));
    a.opt("bulk_to_input_ratio", cfg.bulk_to_input_ratio);
    a.opt("dfvf_offset", cfg.dfvf_offset);
    a.opt("bulk_ref", cfg.bulk_ref);
    a.opt("bulk_min", cfg.bulk_min);
    a.opt("bulk_max", cfg.bulk_max);
    a.done();
  }

  if (o.has("adc")) {
    Obj a = o.sub("adc");
    auto& cfg = sc.adc;
    a.opt("bits", cfg.bits);
    a.opt("vref_fullscale", cfg.vref_fullscale);
    a.opt("vcm", cfg.vcm);
    a.opt("clock_period", cfg.clock_period);
    a.opt("sampling_cycles", cfg.sampling_cycles);
    a.opt("cycles_per_bit", cfg.cycles_per_bit);
    a.opt("overhead_cycles", cfg.overhead_cycles);
    a.opt("comparator_noise_rms", cfg.comparator_noise_rms);
    a.done();
  }

  if (o.has("loop")) {
    Obj l = o.sub("loop");
    auto& cfg = sc.loop;
    l.opt("trigger_threshold", cfg.trigger_threshold);
    l.opt("target_band", cfg.target_band);
    l.opt("max_steps", cfg.max_steps);
    if (l.has("dwell")) {
      Obj d = l.sub("dwell");
      if (d.has("kind")) {
        const auto kind = d.req<std::string>("kind");
        if (kind == "adaptive") cfg.dwell.kind = DwellPolicy::Kind::Adaptive;
        else if (kind == "fixed") cfg.dwell.kind = DwellPolicy::Kind::Fixed;
        else throw ConfigError(d.where() + ".kind: expected 'adaptive' or 'fixed'");
      }
      d.opt("fixed_seconds", cfg.dwell.fixed_seconds);
      d.opt("max_delta_codes", cfg.dwell.max_delta_codes);
      d.opt("window_seconds", cfg.dwell.window_seconds);
      d.done();
    }
    l.done();
  }

  if (o.has("rdac")) {
    Obj r = o.sub("rdac");
    if (r.has("corner_p")) sc.rdac.corner_p = corner_from(r.sub("corner_p"), sc.rdac.corner_p.seed);
    if (r.has("corner_n")) sc.rdac.corner_n = corner_from(r.sub("corner_n"), sc.rdac.corner_n.seed);
    try {
      if (r.has("transfer_p")) sc.rdac.transfer_p = load_transfer_csv(resolve(base_dir, r.req<std::string>("transfer_p")));
      if (r.has("transfer_n")) sc.rdac.transfer_n = load_transfer_csv(resolve(base_dir, r.req<std::string>("transfer_n")));
    } catch (const RdacError& e) {
      throw ConfigError(std::string("scenario.rdac: ") + e.what());
    }
    r.done();
  }

  if (o.has("filter")) {
    Obj f = o.sub("filter");
    if (f.has("artifact")) {
      const auto path = resolve(base_dir, f.req<std::string>("artifact"));
      sc.filter.pinned = load_filter_artifact(path).quantized;
      sc.filter.pinned_source = path;
    }
    if (f.has("spec")) sc.filter.spec = spec_from(f.sub("spec"), true);
    f.opt("coeff_fraction_bits", sc.filter.coeff_fraction_bits);
    if (f.has("datapath")) sc.filter.datapath = datapath_from(f.sub("datapath"));
    f.done();
  }

  if (o.has("record")) {
    Obj r = o.sub("record");
    r.opt("waveform", sc.record.waveform);
    r.opt("decimate", sc.record.decimate);
    r.opt("events", sc.record.events);
    r.done();
  }

  if (o.has("budget")) {
    const json& b = o.raw("budget");
    if (b.is_string()) sc.budget = load_budget(resolve(base_dir, b.get<std::string>()));
    else sc.budget = budget_from_json(b);
  }

  o.done();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  return scenario_from_json(read_json_file(path), fs::path(path).parent_path().string());
}

ordered_json to_json(const SimReport& r) {
  ordered_json j;
  j["scenario"] = r.scenario;
  j["duration_s"] = r.duration_s;
  j["rate_hz"] = r.rate_hz;
  j["accelerated"] = r.accelerated;
  j["terminated_early"] = r.terminated_early;
  j["termination_reason"] = r.termination_reason;
  j["filter"] = ordered_json{{"source", r.filter_source}, {"dc_gain", r.filter_dc_gain}};
  j["waveform_path"] = r.waveform_path;
  ordered_json budget;
  budget["label"] = r.budget_label;
  budget["note"] = "config-consistency check: block currents are configuration inputs";
  budget["normal_a_per_channel"] = opt_json(r.budget_normal);
  budget["cancelling_a_per_channel"] = opt_json(r.budget_cancelling);
  j["current_budget"] = budget;
  ordered_json chans = ordered_json::array();
  for (const auto& c : r.channels) {
    ordered_json cj;
    cj["final_code_p"] = c.final_code_p;
    cj["final_code_n"] = c.final_code_n;
    cj["final_phase"] = to_string(c.final_phase);
    cj["triggered"] = c.triggered;
    cj["reached_hold"] = c.reached_hold;
    cj["settle_time_s"] = opt_json(c.settle_time_s);
    cj["saturated_at_s"] = opt_json(c.saturated_at_s);
    cj["steps"] = c.steps;
    cj["lpf_final"] = c.lpf_final;
    cj["true_dc_offset_v"] = c.true_dc_offset;
    cj["residual_offset_v"] = c.residual_offset;
    cj["residual_diagnostic_v"] = c.residual_diagnostic;
    cj["lna_rms_input_referred_v"] = c.lna_rms_input_referred;
    cj["samples"] = c.samples;
    cj["adc_clip_samples"] = c.adc_clip_samples;
    cj["lna_clip_samples"] = c.lna_clip_samples;
    cj["filter_saturations"] = c.filter_saturations;
    cj["cancelling_samples"] = c.cancelling_samples;
    if (c.sine_fit) {
      cj["sine_fit"] = ordered_json{{"freq_hz", c.sine_fit->freq_hz},
                                    {"amplitude_codes", c.sine_fit->amplitude_codes},
                                    {"amplitude_v_input_referred", c.sine_fit->amplitude_volts_in},
                                    {"mean_codes", c.sine_fit->mean_codes}};
    } else {
      cj["sine_fit"] = nullptr;
    }
    cj["events_path"] = c.events_path;
    chans.push_back(cj);
  }
  j["channels"] = chans;
  return j;
}

}  // namespace afesim
