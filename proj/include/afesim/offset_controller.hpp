// Autonomous offset-cancellation state machine. It watches the sub-hertz
// filter output and walks the two RDAC codes one step at a time.
//
//   Idle --|lpf| > trigger--> Cancelling --|lpf| <= target--> Hold
//                                 |                             |
//                                 +--code pegged--> Saturated   +--|lpf| > trigger--> Cancelling
//
// Both codes start at 255 (no correction). A positive offset is cancelled by
// lowering code_p; a negative one by lowering code_n. Moves that undo an
// existing correction on the opposite side are taken first.
#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <string>
#include <utility>

#include "afesim/afe_analog.hpp"
#include "afesim/rdac.hpp"

namespace afesim {

enum class LoopPhase { Idle, Cancelling, Hold, Saturated };
enum class LoopAction { None, DecP, DecN, IncP, IncN, EnterHold, FlagSaturated };

const char* to_string(LoopPhase p);
const char* to_string(LoopAction a);

struct DwellPolicy {
  enum class Kind { Fixed, Adaptive };
  Kind kind = Kind::Adaptive;
  double fixed_seconds = 20.0;
  int max_delta_codes = 1;
  double window_seconds = 5.0;
};

struct LoopConfig {
  int trigger_threshold = 25;
  int target_band = 6;
  DwellPolicy dwell{};
  int max_steps = 260;

  void validate() const;
};

struct LoopState {
  LoopPhase phase = LoopPhase::Idle;
  int code_p = 255;
  int code_n = 255;
  LnaMode mode_request = LnaMode::LP;
  int steps_taken = 0;
  int direction = 0;  // sign of the offset being cancelled
  bool corrective_used = false;
  uint64_t samples_since_action = 0;
};

/// One controller per channel, clocked once per filter output sample.
class OffsetController {
 public:
  OffsetController(const LoopConfig& cfg, double sample_rate_hz);

  LoopAction update(int lpf_out);

  const LoopState& state() const { return state_; }
  const LoopConfig& config() const { return cfg_; }
  uint64_t dwell_samples() const { return dwell_samples_; }
  bool dwell_elapsed() const;

 private:
  void reset_dwell();
  void push_window(int v);
  LoopAction step_towards(int sign);
  void set_phase(LoopPhase p);

  LoopConfig cfg_;
  LoopState state_;
  uint64_t dwell_samples_ = 0;
  // Sliding-window min/max of the filter output since the last action.
  std::deque<std::pair<uint64_t, int>> win_min_;
  std::deque<std::pair<uint64_t, int>> win_max_;
  uint64_t sample_index_ = 0;
};

/// Diagnostic: true offset minus the correction applied by the current codes.
double input_referred_residual(const LoopState& state, const RdacTransfer& transfer_p,
                               const RdacTransfer& transfer_n, double true_offset, const AnalogConfig& cfg);

/// `t,phase,code_p,code_n,lpf_out,action` header.
void write_event_header(std::ostream& os);
void write_event(std::ostream& os, double t, const LoopState& s, int lpf_out, LoopAction a);

}  // namespace afesim
