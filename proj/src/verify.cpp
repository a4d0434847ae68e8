#include "afesim/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace afesim {

namespace {

void note(std::string& first, const char* what, double vp, double vn, int got, int want) {
  if (!first.empty()) return;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s: vp=%.17g vn=%.17g code %d, expected %d", what, vp, vn, got, want);
  first = buf;
}

}  // namespace

AdcVerifyReport verify_adc(const AdcConfig& cfg, int grid_points, int random_cases, uint64_t seed, double cm_shift) {
  cfg.validate();
  AdcVerifyReport r;
  const double fs = cfg.vref_fullscale;
  const double vcm = cfg.vcm;

  for (int i = 0; i < grid_points; ++i) {
    const double vd = -fs + (i + 0.5) * 2.0 * fs / grid_points;
    const double vp = vcm + vd / 2, vn = vcm - vd / 2;
    const int got = convert(vp, vn, cfg).code;
    const int want = ideal_quantize(vp - vn, cfg);
    ++r.grid_points;
    if (got != want) {
      ++r.grid_mismatches;
      note(r.first_failure, "grid", vp, vn, got, want);
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < random_cases; ++i) {
    const double vd = -fs + 2.0 * fs * u01(rng);
    const double half = std::fabs(vd) / 2;
    const double cm = half + (fs - 2 * half) * u01(rng);
    const double vp = std::clamp(cm + vd / 2, 0.0, fs), vn = std::clamp(cm - vd / 2, 0.0, fs);
    const int got = convert_code(vp, vn, cfg);
    const int want = ideal_quantize(vp - vn, cfg);
    ++r.random_cases;
    if (got != want) {
      ++r.random_mismatches;
      note(r.first_failure, "random", vp, vn, got, want);
    }

    // Common-mode shift, kept inside the rails.
    for (double s : {cm_shift, -cm_shift}) {
      const double sp = vp + s, sn = vn + s;
      if (sp < 0 || sp > fs || sn < 0 || sn > fs) continue;
      ++r.cm_cases;
      const int shifted = convert_code(sp, sn, cfg);
      // The shifted pair is a new float difference; compare against its own
      // ideal code so that a rounding of vp - vn is not counted.
      if (shifted != ideal_quantize(sp - sn, cfg) || (sp - sn == vp - vn && shifted != got)) {
        ++r.cm_changes;
        note(r.first_failure, "common-mode", sp, sn, shifted, got);
      }
    }
  }

  int prev = -1;
  const int n = 1 << 16;
  for (int i = 0; i <= n; ++i) {
    const double vd = -fs + 2.0 * fs * i / n;
    const int code = convert_code(vcm + vd / 2, vcm - vd / 2, cfg);
    ++r.monotone_points;
    if (code < prev) {
      ++r.monotone_violations;
      note(r.first_failure, "monotone", vcm + vd / 2, vcm - vd / 2, code, prev);
    }
    prev = code;
  }
  return r;
}

bool RdacVerifyReport::ok() const {
  for (const auto& c : corners) {
    if (c.failures != 0 || c.seeds == 0) return false;
  }
  return !corners.empty();
}

RdacVerifyReport verify_rdac(const std::vector<CornerName>& corners, int n_seeds, uint64_t first_seed) {
  RdacVerifyReport rep;
  for (CornerName name : corners) {
    RdacCornerSummary s;
    s.corner = name;
    s.min_step = s.min_span = std::numeric_limits<double>::infinity();
    s.max_step = s.max_span = -std::numeric_limits<double>::infinity();
    double fine_sum = 0.0;
    for (int k = 0; k < n_seeds; ++k) {
      ++s.seeds;
      const uint64_t seed = first_seed + static_cast<uint64_t>(k);
      RdacTransfer t;
      try {
        t = build_transfer(RdacCorner::preset(name, seed));
      } catch (const RdacError& e) {
        ++s.failures;
        if (s.first_failure.empty()) s.first_failure = e.what();
        continue;
      }
      const std::string why = t.check_invariants();
      const double span = t.v[RdacTransfer::kCodes - 1] - t.v[0];
      if (!why.empty() || std::fabs(span - 0.149) > 1e-3) {
        ++s.failures;
        if (s.first_failure.empty()) {
          s.first_failure = "seed " + std::to_string(seed) + ": " + (why.empty() ? "span outside 149 mV +/- 1 mV" : why);
        }
      }
      const StepStats st = step_stats(t);
      s.min_step = std::min(s.min_step, st.min);
      s.max_step = std::max(s.max_step, st.max);
      s.min_span = std::min(s.min_span, span);
      s.max_span = std::max(s.max_span, span);
      fine_sum += step_stats(t, 159, 254).mean;
    }
    s.fine_mean_step = s.seeds ? fine_sum / s.seeds : 0.0;
    rep.corners.push_back(s);
  }
  return rep;
}

}  // namespace afesim
