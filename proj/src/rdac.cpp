#include "afesim/rdac.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace afesim {

namespace {

// Steps 159..254 form the fine region (96 steps).
constexpr int kFineFirstStep = 159;
constexpr int kSteps = RdacTransfer::kCodes - 1;
constexpr double kFineLo = 220e-6;
constexpr double kFineHi = 312e-6;

uint64_t corner_salt(CornerName c) {
  switch (c) {
    case CornerName::Typical: return 0x7f4a7c15u;
    case CornerName::Fast: return 0x9e3779b9u;
    case CornerName::Slow: return 0x85ebca6bu;
  }
  return 0;
}

}  // namespace

const char* to_string(CornerName c) {
  switch (c) {
    case CornerName::Typical: return "typical";
    case CornerName::Fast: return "fast";
    case CornerName::Slow: return "slow";
  }
  return "?";
}

CornerName parse_corner(const std::string& s) {
  if (s == "typical") return CornerName::Typical;
  if (s == "fast") return CornerName::Fast;
  if (s == "slow") return CornerName::Slow;
  throw std::invalid_argument("unknown corner '" + s + "' (expected typical, fast or slow)");
}

RdacCorner RdacCorner::preset(CornerName name, uint64_t seed) {
  switch (name) {
    case CornerName::Fast: return {name, kMinUnitResistance, seed};
    case CornerName::Slow: return {name, kMaxUnitResistance, seed};
    case CornerName::Typical: break;
  }
  return {CornerName::Typical, 60e12, seed};
}

void RdacCorner::validate() const {
  if (!(unit_resistance >= kMinUnitResistance && unit_resistance <= kMaxUnitResistance)) {
    throw std::invalid_argument("unit resistance outside [27.82, 136] Tohm");
  }
}

bool RdacTransfer::strictly_increasing() const {
  for (int k = 0; k + 1 < kCodes; ++k) {
    if (!(v[k + 1] > v[k])) return false;
  }
  return true;
}

std::string RdacTransfer::check_invariants() const {
  char buf[160];
  if (!strictly_increasing()) return "transfer is not strictly increasing";
  if (std::fabs(v[0] - kVMin) > 1e-3) {
    std::snprintf(buf, sizeof buf, "v[0] = %.6f V, expected %.3f +/- 1 mV", v[0], kVMin);
    return buf;
  }
  if (std::fabs(v[kCodes - 1] - kVMax) > 1e-3) {
    std::snprintf(buf, sizeof buf, "v[255] = %.6f V, expected %.3f +/- 1 mV", v[kCodes - 1], kVMax);
    return buf;
  }
  for (int k = 0; k + 1 < kCodes; ++k) {
    const double s = v[k + 1] - v[k];
    // Steps are compared with a femtovolt slack for table round-off.
    if (s < kMinStep - 1e-15 || s > kMaxStep + 1e-15) {
      std::snprintf(buf, sizeof buf, "step %d = %.3f uV outside [170 uV, 2.96 mV]", k, s * 1e6);
      return buf;
    }
  }
  for (int k = 0; k < kCodes; ++k) {
    if (i[k] < kMinCurrent * (1 - 1e-12) || i[k] > kMaxCurrent * (1 + 1e-12)) {
      std::snprintf(buf, sizeof buf, "current at code %d = %.3g A outside [1, 150] nA", k, i[k]);
      return buf;
    }
  }
  return {};
}

RdacTransfer build_transfer(const RdacCorner& corner) {
  corner.validate();
  std::mt19937_64 rng(corner.seed * 0x2545F4914F6CDD1DULL ^ corner_salt(corner.name));
  std::uniform_real_distribution<double> fine(kFineLo, kFineHi);
  std::uniform_real_distribution<double> jitter(0.7, 1.3);

  // Higher-resistance corners show a stronger code-dependent tilt of the
  // coarse steps (larger steps towards code 0).
  const double tilt = (corner.unit_resistance - RdacCorner::kMinUnitResistance) /
                      (RdacCorner::kMaxUnitResistance - RdacCorner::kMinUnitResistance);
  const double span = RdacTransfer::kVMax - RdacTransfer::kVMin;

  for (int attempt = 0; attempt < 100; ++attempt) {
    std::array<double, kSteps> step{};
    double fine_sum = 0.0;
    for (int k = kFineFirstStep; k < kSteps; ++k) {
      step[k] = fine(rng);
      fine_sum += step[k];
    }
    const double coarse_target = span - fine_sum;

    std::array<double, kFineFirstStep> weight{};
    for (int k = 0; k < kFineFirstStep; ++k) {
      const double pos = 1.0 - static_cast<double>(k) / (kFineFirstStep - 1);
      weight[k] = (1.0 + tilt * pos) * jitter(rng);
    }

    // Scale to the remaining span; pin clamped steps and rescale the rest.
    std::array<bool, kFineFirstStep> pinned{};
    bool ok = false;
    for (int iter = 0; iter < 64; ++iter) {
      double pinned_sum = 0.0, free_weight = 0.0;
      for (int k = 0; k < kFineFirstStep; ++k) {
        if (pinned[k]) pinned_sum += step[k];
        else free_weight += weight[k];
      }
      if (free_weight <= 0.0) break;
      const double scale = (coarse_target - pinned_sum) / free_weight;
      bool changed = false;
      for (int k = 0; k < kFineFirstStep; ++k) {
        if (pinned[k]) continue;
        step[k] = weight[k] * scale;
        if (step[k] < RdacTransfer::kMinStep || step[k] > RdacTransfer::kMaxStep) {
          step[k] = std::clamp(step[k], RdacTransfer::kMinStep, RdacTransfer::kMaxStep);
          pinned[k] = true;
          changed = true;
        }
      }
      if (!changed) {
        ok = true;
        break;
      }
    }
    if (!ok) continue;

    RdacTransfer t;
    t.v[0] = RdacTransfer::kVMin;
    for (int k = 0; k < kSteps; ++k) t.v[k + 1] = t.v[k] + step[k];
    for (int k = 0; k < RdacTransfer::kCodes; ++k) {
      const double frac = (t.v[k] - t.v[0]) / (t.v[kSteps] - t.v[0]);
      t.i[k] = RdacTransfer::kMaxCurrent *
               std::pow(RdacTransfer::kMinCurrent / RdacTransfer::kMaxCurrent, frac);
    }
    t.i[0] = RdacTransfer::kMaxCurrent;
    t.i[kSteps] = RdacTransfer::kMinCurrent;
    if (t.check_invariants().empty()) return t;
  }
  throw RdacError(std::string("no valid RDAC transfer for corner ") + to_string(corner.name) + " seed " +
                  std::to_string(corner.seed));
}

StepStats step_stats(const RdacTransfer& t, int first_step, int last_step) {
  if (first_step < 0 || last_step > kSteps - 1 || first_step > last_step) {
    throw std::out_of_range("step range outside [0, 254]");
  }
  StepStats s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (int k = first_step; k <= last_step; ++k) {
    const double d = t.v[k + 1] - t.v[k];
    s.min = std::min(s.min, d);
    s.max = std::max(s.max, d);
    sum += d;
  }
  s.count = last_step - first_step + 1;
  s.mean = sum / s.count;
  return s;
}

RdacOutput output(const RdacTransfer& t, int code) {
  if (code < 0 || code >= RdacTransfer::kCodes) throw std::out_of_range("RDAC code outside 0..255");
  return {t.v[code], t.i[code]};
}

void write_transfer_csv(std::ostream& os, const RdacTransfer& t) {
  os << "code,volts,amps\n";
  char buf[96];
  for (int k = 0; k < RdacTransfer::kCodes; ++k) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", k, t.v[k], t.i[k]);
    os << buf;
  }
}

RdacTransfer read_transfer_csv(std::istream& is) {
  RdacTransfer t;
  std::string line;
  if (!std::getline(is, line) || line.rfind("code,volts,amps", 0) != 0) {
    throw RdacError("transfer CSV must start with header 'code,volts,amps'");
  }
  std::array<bool, RdacTransfer::kCodes> seen{};
  int rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    int code = -1;
    double volts = 0.0, amps = 0.0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &code, &volts, &amps) != 3) {
      throw RdacError("malformed transfer row: " + line);
    }
    if (code < 0 || code >= RdacTransfer::kCodes || seen[code]) {
      throw RdacError("bad or duplicate code in transfer row: " + line);
    }
    seen[code] = true;
    t.v[code] = volts;
    t.i[code] = amps;
    ++rows;
  }
  if (rows != RdacTransfer::kCodes) throw RdacError("transfer CSV needs 256 rows, got " + std::to_string(rows));
  if (!t.strictly_increasing()) throw RdacError("transfer CSV is not strictly increasing");
  return t;
}

RdacTransfer load_transfer_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw RdacError("cannot open transfer CSV " + path);
  return read_transfer_csv(f);
}

void save_transfer_csv(const std::string& path, const RdacTransfer& t) {
  std::ofstream f(path);
  if (!f) throw RdacError("cannot write transfer CSV " + path);
  write_transfer_csv(f, t);
}

}  // namespace afesim
