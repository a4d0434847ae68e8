#include "afesim/offset_controller.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <stdexcept>

namespace afesim {

const char* to_string(LoopPhase p) {
  switch (p) {
    case LoopPhase::Idle: return "Idle";
    case LoopPhase::Cancelling: return "Cancelling";
    case LoopPhase::Hold: return "Hold";
    case LoopPhase::Saturated: return "Saturated";
  }
  return "?";
}

const char* to_string(LoopAction a) {
  switch (a) {
    case LoopAction::None: return "none";
    case LoopAction::DecP: return "dec_p";
    case LoopAction::DecN: return "dec_n";
    case LoopAction::IncP: return "inc_p";
    case LoopAction::IncN: return "inc_n";
    case LoopAction::EnterHold: return "enter_hold";
    case LoopAction::FlagSaturated: return "flag_saturated";
  }
  return "?";
}

void LoopConfig::validate() const {
  if (target_band < 0) throw std::invalid_argument("target band must be non-negative");
  if (!(target_band < trigger_threshold)) throw std::invalid_argument("target band must be below the trigger threshold");
  if (max_steps <= 0) throw std::invalid_argument("max_steps must be positive");
  if (dwell.kind == DwellPolicy::Kind::Fixed && !(dwell.fixed_seconds >= 0)) {
    throw std::invalid_argument("fixed dwell must be non-negative");
  }
  if (dwell.kind == DwellPolicy::Kind::Adaptive && (!(dwell.window_seconds > 0) || dwell.max_delta_codes < 1)) {
    throw std::invalid_argument("adaptive dwell needs window_seconds > 0 and max_delta_codes >= 1");
  }
}

OffsetController::OffsetController(const LoopConfig& cfg, double sample_rate_hz) : cfg_(cfg) {
  cfg_.validate();
  if (!(sample_rate_hz > 0)) throw std::invalid_argument("controller sample rate must be positive");
  const double secs = cfg_.dwell.kind == DwellPolicy::Kind::Fixed ? cfg_.dwell.fixed_seconds : cfg_.dwell.window_seconds;
  dwell_samples_ = static_cast<uint64_t>(std::llround(secs * sample_rate_hz));
}

void OffsetController::set_phase(LoopPhase p) {
  state_.phase = p;
  state_.mode_request = p == LoopPhase::Cancelling ? LnaMode::HP : LnaMode::LP;
}

void OffsetController::reset_dwell() {
  state_.samples_since_action = 0;
  win_min_.clear();
  win_max_.clear();
}

void OffsetController::push_window(int v) {
  if (cfg_.dwell.kind != DwellPolicy::Kind::Adaptive) return;
  const uint64_t idx = sample_index_;
  while (!win_min_.empty() && win_min_.back().second >= v) win_min_.pop_back();
  while (!win_max_.empty() && win_max_.back().second <= v) win_max_.pop_back();
  win_min_.emplace_back(idx, v);
  win_max_.emplace_back(idx, v);
  const uint64_t oldest = idx >= dwell_samples_ ? idx - dwell_samples_ + 1 : 0;
  while (win_min_.front().first < oldest) win_min_.pop_front();
  while (win_max_.front().first < oldest) win_max_.pop_front();
}

bool OffsetController::dwell_elapsed() const {
  if (state_.samples_since_action < dwell_samples_) return false;
  if (cfg_.dwell.kind == DwellPolicy::Kind::Fixed) return true;
  if (win_min_.empty()) return true;
  return win_max_.front().second - win_min_.front().second < cfg_.dwell.max_delta_codes;
}

LoopAction OffsetController::step_towards(int sign) {
  LoopAction a = LoopAction::None;
  if (sign > 0) {
    if (state_.code_n < 255) {
      ++state_.code_n;
      a = LoopAction::IncN;
    } else if (state_.code_p > 0) {
      --state_.code_p;
      a = LoopAction::DecP;
    }
  } else {
    if (state_.code_p < 255) {
      ++state_.code_p;
      a = LoopAction::IncP;
    } else if (state_.code_n > 0) {
      --state_.code_n;
      a = LoopAction::DecN;
    }
  }
  if (a == LoopAction::None) {
    set_phase(LoopPhase::Saturated);
    return LoopAction::FlagSaturated;
  }
  ++state_.steps_taken;
  reset_dwell();
  return a;
}

LoopAction OffsetController::update(int lpf_out) {
  ++sample_index_;
  ++state_.samples_since_action;
  push_window(lpf_out);
  const int mag = std::abs(lpf_out);
  const int sign = lpf_out > 0 ? 1 : -1;

  switch (state_.phase) {
    case LoopPhase::Idle:
    case LoopPhase::Hold:
      if (mag > cfg_.trigger_threshold) {
        set_phase(LoopPhase::Cancelling);
        state_.direction = sign;
        state_.corrective_used = false;
        state_.steps_taken = 0;
        reset_dwell();
      }
      return LoopAction::None;

    case LoopPhase::Saturated:
      if (mag <= cfg_.target_band) {
        set_phase(LoopPhase::Hold);
        return LoopAction::EnterHold;
      }
      if (sign != state_.direction && mag > cfg_.trigger_threshold) {
        set_phase(LoopPhase::Cancelling);
        state_.direction = sign;
        state_.corrective_used = false;
        state_.steps_taken = 0;
        reset_dwell();
      }
      return LoopAction::None;

    case LoopPhase::Cancelling:
      break;
  }

  if (!dwell_elapsed()) return LoopAction::None;
  if (mag <= cfg_.target_band) {
    set_phase(LoopPhase::Hold);
    reset_dwell();
    return LoopAction::EnterHold;
  }
  if (state_.steps_taken >= cfg_.max_steps) {
    set_phase(LoopPhase::Saturated);
    return LoopAction::FlagSaturated;
  }
  if (sign != state_.direction) {
    // Overshoot past zero: one corrective step back, then hold.
    if (state_.corrective_used) {
      set_phase(LoopPhase::Hold);
      reset_dwell();
      return LoopAction::EnterHold;
    }
    state_.corrective_used = true;
  }
  return step_towards(sign);
}

double input_referred_residual(const LoopState& state, const RdacTransfer& transfer_p, const RdacTransfer& transfer_n,
                               double true_offset, const AnalogConfig& cfg) {
  const double bp = output(transfer_p, state.code_p).volts;
  const double bn = output(transfer_n, state.code_n).volts;
  return true_offset - bulk_correction(bp, bn, cfg);
}

void write_event_header(std::ostream& os) { os << "t,phase,code_p,code_n,lpf_out,action\n"; }

void write_event(std::ostream& os, double t, const LoopState& s, int lpf_out, LoopAction a) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.6f,%s,%d,%d,%d,%s\n", t, to_string(s.phase), s.code_p, s.code_n, lpf_out,
                to_string(a));
  os << buf;
}

}  // namespace afesim
