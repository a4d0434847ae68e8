// afesim command-line driver. Exit codes: 0 ok, 1 verification failed,
// 2 usage or configuration error, 3 runtime limit hit.
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "afesim/config_io.hpp"
#include "afesim/filter_design.hpp"
#include "afesim/filter_runtime.hpp"
#include "afesim/sim_engine.hpp"
#include "afesim/verify.hpp"

namespace fs = std::filesystem;
using namespace afesim;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory " + dir + ": " + ec.message());
}

std::pair<int, int> parse_bits(const std::string& s) {
  int lo = 0, hi = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d..%d%c", &lo, &hi, &tail) == 2) return {lo, hi};
  if (std::sscanf(s.c_str(), "%d%c", &lo, &tail) == 1) return {lo, lo};
  throw UsageError("--bits expects N or A..B, got '" + s + "'");
}

// ---- design-filter ----

struct DesignArgs {
  FilterSpec spec;
  int coeff_bits = 40;
  std::string out_dir = ".";
  std::string artifact = "filter.json";
  std::string response = "filter_response.csv";
  int points = 1024;
};

int cmd_design_filter(const DesignArgs& a) {
  FilterArtifact art;
  try {
    art = make_filter_artifact(a.spec, a.coeff_bits);
  } catch (const DesignError& e) {
    std::cerr << "design-filter: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "design-filter: " << e.what() << '\n';
    return kExitConfig;
  }
  ensure_dir(a.out_dir);
  const std::string art_path = (fs::path(a.out_dir) / a.artifact).string();
  const std::string csv_path = (fs::path(a.out_dir) / a.response).string();
  save_filter_artifact(art_path, art);

  std::ofstream csv(csv_path);
  if (!csv) throw UsageError("cannot write " + csv_path);
  csv << "freq_hz,mag_db\n";
  const double f_lo = std::min(1e-4, a.spec.passband_edge / 10), f_hi = a.spec.fs / 2;
  char buf[64];
  for (int i = 0; i < a.points; ++i) {
    const double f = f_lo * std::pow(f_hi / f_lo, static_cast<double>(i) / (a.points - 1));
    std::snprintf(buf, sizeof buf, "%.10g,%.10g\n", f, magnitude_db(art.coeffs, f, a.spec.fs));
    csv << buf;
  }

  std::printf("order %d, passband gain %.5f dB at %g Hz, stopband gain %.3f dB at %g Hz\n", art.order,
              magnitude_db(art.coeffs, a.spec.passband_edge, a.spec.fs), a.spec.passband_edge,
              magnitude_db(art.coeffs, a.spec.stopband_edge, a.spec.fs), a.spec.stopband_edge);
  std::printf("quantized DC gain %.6Lf (%d fraction bits)\n", art.quantized.dc_gain(), a.coeff_bits);
  std::printf("wrote %s\nwrote %s\n", art_path.c_str(), csv_path.c_str());
  return 0;
}

// ---- sweep-wordlength ----

struct SweepArgs {
  std::string artifact;
  std::string bits = "16..48";
  std::size_t samples = std::size_t{1} << 21;
  std::string out = "wordlength_sweep.csv";
  unsigned threads = 0;
};

int cmd_sweep(const SweepArgs& a) {
  FilterArtifact art;
  try {
    art = load_filter_artifact(a.artifact);
  } catch (const ConfigError& e) {
    std::cerr << "sweep-wordlength: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto [lo, hi] = parse_bits(a.bits);
  if (lo < 1 || hi > 60 || lo > hi) throw UsageError("--bits range must lie within 1..60 and be ascending");
  SweepOptions opts;
  opts.samples = a.samples;
  opts.threads = a.threads;
  opts.datapath.input = art.quantized.input_format;
  opts.datapath.output = art.quantized.output_format;
  opts.datapath.internal_integer_bits = art.quantized.internal_format.integer_bits;
  opts.datapath.internal_fraction_bits = art.quantized.internal_format.fraction_bits;
  const SweepResult res = wordlength_sweep(art.coeffs, lo, hi, opts);

  std::ofstream csv(a.out);
  if (!csv) throw UsageError("cannot write " + a.out);
  csv << "fraction_bits,l1_error\n";
  char buf[64];
  for (const auto& p : res.points) {
    std::snprintf(buf, sizeof buf, "%d,%.10g\n", p.fraction_bits, p.l1_error);
    csv << buf;
    if (!p.note.empty()) std::printf("  %d bits: %s\n", p.fraction_bits, p.note.c_str());
  }
  std::printf("extended-precision floor: %.4g\n", res.floor);
  std::printf("asymptotic minimum: %.4g\n", res.asymptotic_min);
  if (res.knee) std::printf("knee: %d fraction bits\n", *res.knee);
  else std::printf("knee: none\n");
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

// ---- verify-adc ----

struct AdcArgs {
  int grid = 4096;
  int random = 100000;
  double trace_vd = std::nan("");
  std::string trace_out;
};

int cmd_verify_adc(const AdcArgs& a, uint64_t seed) {
  AdcConfig cfg;
  const AdcVerifyReport r = verify_adc(cfg, a.grid, a.random, seed);
  const ConversionTiming t = conversion_timing(cfg);
  std::printf("grid: %d points, %d mismatches\n", r.grid_points, r.grid_mismatches);
  std::printf("random: %d cases, %d mismatches\n", r.random_cases, r.random_mismatches);
  std::printf("monotone: %d points, %d violations\n", r.monotone_points, r.monotone_violations);
  std::printf("common-mode +/-0.1 V: %d cases, %d code changes\n", r.cm_cases, r.cm_changes);
  std::printf("timing: %d cycles, %.3f us per conversion, max %.1f kHz, %d channels at 20 kHz\n", t.cycles,
              t.duration * 1e6, t.max_rate / 1e3, t.channels_at(20e3));
  if (!r.first_failure.empty()) std::printf("first failure: %s\n", r.first_failure.c_str());
  if (!a.trace_out.empty()) {
    const double vd = std::isnan(a.trace_vd) ? 0.0 : a.trace_vd;
    const SarConversion c = convert(cfg.vcm + vd / 2, cfg.vcm - vd / 2, cfg);
    std::ofstream f(a.trace_out);
    if (!f) throw UsageError("cannot write " + a.trace_out);
    write_bit_trace_csv(f, c);
    std::printf("trace for vd = %g V (code %d) written to %s\n", vd, c.code, a.trace_out.c_str());
  }
  std::printf("%s\n", r.ok() ? "ADC verification passed" : "ADC verification FAILED");
  return r.ok() ? 0 : kExitFail;
}

// ---- verify-rdac ----

struct RdacArgs {
  std::string corner = "all";
  int seeds = 100;
  std::string export_path;
};

int cmd_verify_rdac(const RdacArgs& a, uint64_t seed) {
  std::vector<CornerName> corners;
  if (a.corner == "all") corners = {CornerName::Typical, CornerName::Fast, CornerName::Slow};
  else corners = {parse_corner(a.corner)};
  if (a.seeds < 1) throw UsageError("--seeds must be positive");

  const RdacVerifyReport r = verify_rdac(corners, a.seeds, seed);
  for (const auto& c : r.corners) {
    std::printf("%-7s seeds %d failures %d  step [%.1f uV, %.3f mV]  span [%.3f, %.3f] mV  fine mean %.1f uV\n",
                to_string(c.corner), c.seeds, c.failures, c.min_step * 1e6, c.max_step * 1e3, c.min_span * 1e3,
                c.max_span * 1e3, c.fine_mean_step * 1e6);
    if (!c.first_failure.empty()) std::printf("  first failure: %s\n", c.first_failure.c_str());
  }
  if (!a.export_path.empty()) {
    const RdacTransfer t = build_transfer(RdacCorner::preset(corners.front(), seed));
    save_transfer_csv(a.export_path, t);
    std::printf("exported %s seed %llu to %s\n", to_string(corners.front()), static_cast<unsigned long long>(seed),
                a.export_path.c_str());
  }
  std::printf("%s\n", r.ok() ? "RDAC verification passed" : "RDAC verification FAILED");
  return r.ok() ? 0 : kExitFail;
}

// ---- run ----

struct RunArgs {
  std::vector<std::string> scenarios;
  std::string out_dir = "out";
  double accelerate = 0.0;
  unsigned threads = 0;
};

void print_summary(const SimReport& r) {
  std::printf("[%s] %.1f s at %.1f Hz%s%s\n", r.scenario.c_str(), r.duration_s, r.rate_hz,
              r.accelerated ? " (accelerated loop)" : "", r.terminated_early ? " (terminated early)" : "");
  for (std::size_t c = 0; c < r.channels.size(); ++c) {
    const auto& ch = r.channels[c];
    std::printf("  ch%zu: %s code_p %d code_n %d steps %d residual %.1f uV", c, to_string(ch.final_phase),
                ch.final_code_p, ch.final_code_n, ch.steps, ch.residual_offset * 1e6);
    if (ch.settle_time_s) std::printf(" hold at %.1f s", *ch.settle_time_s);
    if (ch.sine_fit) std::printf(" sine %.2f codes", ch.sine_fit->amplitude_codes);
    std::printf("\n");
  }
  if (r.budget_normal) {
    std::printf("  budget (%s, config-consistency): %.2f uA normal, %.2f uA cancelling per channel\n",
                r.budget_label.c_str(), *r.budget_normal * 1e6, *r.budget_cancelling * 1e6);
  }
  if (r.terminated_early) std::printf("  stopped: %s\n", r.termination_reason.c_str());
}

int cmd_run(const RunArgs& a, std::optional<uint64_t> seed) {
  std::vector<Scenario> scenarios;
  for (const auto& path : a.scenarios) {
    try {
      Scenario sc = load_scenario(path);
      if (seed) sc.noise_seed = *seed;
      if (a.accelerate > 0) sc.dwell_override_s = a.accelerate;
      sc.validate();
      scenarios.push_back(std::move(sc));
    } catch (const std::exception& e) {
      std::cerr << "run: " << path << ": " << e.what() << '\n';
      return kExitConfig;
    }
  }

  // One directory per scenario when a batch is given.
  std::vector<std::string> dirs;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const std::string d = scenarios.size() == 1 ? a.out_dir
                                                : (fs::path(a.out_dir) / fs::path(a.scenarios[i]).stem()).string();
    ensure_dir(d);
    dirs.push_back(d);
  }

  std::vector<std::optional<SimReport>> reports(scenarios.size());
  std::vector<std::string> errors(scenarios.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < scenarios.size();) {
      try {
        reports[i] = run(scenarios[i], dirs[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const unsigned n = std::min<unsigned>(worker_threads(a.threads), static_cast<unsigned>(scenarios.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int rc = 0;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    if (!reports[i]) {
      std::cerr << "run: " << a.scenarios[i] << ": " << errors[i] << '\n';
      rc = std::max(rc, kExitConfig);
      continue;
    }
    const std::string path = (fs::path(dirs[i]) / "report.json").string();
    write_json_file(path, to_json(*reports[i]));
    print_summary(*reports[i]);
    std::printf("  report: %s\n", path.c_str());
    if (reports[i]->terminated_early) rc = std::max(rc, kExitRuntime);
  }
  return rc;
}

// ---- budget ----

struct BudgetArgs {
  std::vector<std::string> configs;
  int channels = 5;
};

int cmd_budget(const BudgetArgs& a) {
  for (const auto& path : a.configs) {
    BudgetConfig cfg;
    double normal = 0, cancelling = 0;
    try {
      cfg = load_budget(path);
      normal = current_budget(BudgetMode::Normal, a.channels, cfg);
      cancelling = current_budget(BudgetMode::Cancelling, a.channels, cfg);
    } catch (const std::exception& e) {
      std::cerr << "budget: " << path << ": " << e.what() << '\n';
      return kExitConfig;
    }
    std::printf("%s: %.2f uA normal, %.2f uA cancelling per channel at %d channels\n",
                cfg.label.empty() ? path.c_str() : cfg.label.c_str(), normal * 1e6, cancelling * 1e6, a.channels);
  }
  std::printf("note: config-consistency check; block currents are inputs back-solved from published totals\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavioral simulator for a DC-coupled neural front end with offset cancellation"};
  app.require_subcommand(1);
  std::optional<uint64_t> seed;
  app.add_option("--seed", seed, "Seed for every random stream (default: per-command)");

  DesignArgs design;
  auto* c_design = app.add_subcommand("design-filter", "Design and quantize the low-pass biquad");
  c_design->add_option("--fs", design.spec.fs, "Sampling rate (Hz)");
  c_design->add_option("--fpass", design.spec.passband_edge, "Passband edge (Hz)");
  c_design->add_option("--fstop", design.spec.stopband_edge, "Stopband edge (Hz)");
  c_design->add_option("--ripple-db", design.spec.passband_ripple_db, "Passband ripple (dB)");
  c_design->add_option("--atten-db", design.spec.stopband_atten_db, "Stopband attenuation (dB)");
  c_design->add_option("--coeff-bits", design.coeff_bits, "Coefficient fraction bits");
  c_design->add_option("--out", design.out_dir, "Output directory");
  c_design->add_option("--artifact", design.artifact, "Artifact file name");
  c_design->add_option("--response", design.response, "Response CSV file name");
  c_design->add_option("--points", design.points, "Response points")->check(CLI::Range(512, 1 << 20));

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep-wordlength", "L1 impulse-error sweep over coefficient fraction bits");
  c_sweep->add_option("artifact", sweep.artifact, "Filter artifact JSON")->required();
  c_sweep->add_option("--bits", sweep.bits, "Width or range A..B");
  c_sweep->add_option("--samples", sweep.samples, "Impulse-response length");
  c_sweep->add_option("--out", sweep.out, "CSV output");
  c_sweep->add_option("--threads", sweep.threads, "Worker threads (0: AFESIM_THREADS or all cores)");

  AdcArgs adc;
  auto* c_adc = app.add_subcommand("verify-adc", "SAR conversion against the ideal quantizer");
  c_adc->add_option("--grid", adc.grid, "Grid points");
  c_adc->add_option("--random", adc.random, "Random differential inputs");
  c_adc->add_option("--trace-vd", adc.trace_vd, "Differential input for --trace");
  c_adc->add_option("--trace", adc.trace_out, "Write the bit-decision trace CSV");

  RdacArgs rdac;
  auto* c_rdac = app.add_subcommand("verify-rdac", "RDAC transfer invariants over seeds and corners");
  c_rdac->add_option("--corner", rdac.corner, "typical, fast, slow or all");
  c_rdac->add_option("--seeds", rdac.seeds, "Number of seeds per corner");
  c_rdac->add_option("--export", rdac.export_path, "Write the first corner's transfer for --seed as CSV");

  RunArgs runa;
  auto* c_run = app.add_subcommand("run", "Run one or more scenarios");
  c_run->add_option("scenarios", runa.scenarios, "Scenario JSON files")->required();
  c_run->add_option("--out", runa.out_dir, "Output directory");
  c_run->add_option("--accelerate-loop", runa.accelerate, "Replace the loop dwell with this many seconds");
  c_run->add_option("--threads", runa.threads, "Scenarios run in parallel");

  BudgetArgs budget;
  auto* c_budget = app.add_subcommand("budget", "Per-channel supply current from block currents");
  c_budget->add_option("configs", budget.configs, "Budget JSON files")->required();
  c_budget->add_option("--channels", budget.channels, "Channels sharing the ADC")->check(CLI::Range(1, 64));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (c_design->parsed()) return cmd_design_filter(design);
    if (c_sweep->parsed()) return cmd_sweep(sweep);
    if (c_adc->parsed()) return cmd_verify_adc(adc, seed.value_or(1));
    if (c_rdac->parsed()) return cmd_verify_rdac(rdac, seed.value_or(1));
    if (c_run->parsed()) return cmd_run(runa, seed);
    if (c_budget->parsed()) return cmd_budget(budget);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
  return kExitConfig;
}
