#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "speechgait/channels.hpp"
#include "speechgait/config.hpp"
#include "speechgait/cpg.hpp"
#include "speechgait/gait.hpp"
#include "speechgait/latency.hpp"
#include "speechgait/planner.hpp"
#include "speechgait/plant.hpp"

namespace speechgait {

struct TransitionRecord {
  double t = 0.0;
  FsmState from = FsmState::sitting;
  FsmState to = FsmState::sitting;
  std::optional<Intent> intent; ///< empty for timer completions
  std::string effect;
  std::string reason; ///< set for rejections
  bool accepted = true;
};

inline nlohmann::json to_json(const TransitionRecord& r) {
  nlohmann::json j = {{"t", r.t},
                      {"from", std::string(to_string(r.from))},
                      {"to", std::string(to_string(r.to))},
                      {"intent", r.intent ? nlohmann::json(std::string(to_string(*r.intent))) : nlohmann::json()},
                      {"effect", r.effect}};
  if (!r.reason.empty())
    j["reason"] = r.reason;
  return j;
}

struct InvariantViolation {
  double t = 0.0;
  std::string what;
};

/// Running health counters. Violations are contract breaches; the rest are
/// diagnostics (clamp activity, raw gait rates) that do not fail a run.
struct EngineDiagnostics {
  std::vector<InvariantViolation> violations;
  std::uint64_t clamp_ticks = 0; ///< ticks on which the clamp changed any joint
  JointArray<std::uint64_t> angle_clamps{};
  JointArray<std::uint64_t> rate_clamps{};
  JointArray<double> max_gait_step{}; ///< largest per-tick change of the raw gait output, degrees
  std::uint64_t gait_rate_excess_ticks = 0;
  std::optional<double> first_gait_rate_excess;
  JointArray<double> max_velocity{}; ///< |q̇| of the plant, degrees/s
  std::uint64_t overruns = 0;
};

struct TickOutput {
  TelemetrySample sample;
  std::vector<TransitionRecord> transitions;
  ClampResult clamp;
};

/// Owns the planner, CPG, gait model and plant, and advances them one
/// control period at a time. Not thread-safe; the control loop is the only
/// caller.
class Engine {
public:
  static constexpr double kStepTolerance = 1e-6; ///< degrees, on top of v_max·dt

  explicit Engine(EngineConfig config)
      : config_((config.validate(), std::move(config))),
        gait_(load_coefficients(config_.gait), config_.gait.sit_stand_period, config_.cpg.ramp_period),
        latency_(config_.latency, config_.plant.dt) {
    reset();
  }

  void reset() {
    cpg_ = CpgState::initial(config_.cpg);
    planner_ = PlannerState{};
    planner_.fsm = config_.plant.initial_state;
    planner_.transition_period = config_.cpg.ramp_period;
    planner_.limits = config_.limits;
    const JointAngles pose = planner_.fsm == FsmState::sitting ? gait_.sitting_pose() : JointAngles{};
    plant_ = PlantState{};
    plant_.q = pose;
    plant_.tau_track = config_.plant.tau_track;
    plant_.v_max = config_.limits.v_max;
    q_cmd_prev_ = pose;
    q_gait_prev_ = pose;
    tick_ = 0;
    last_intent_.reset();
    ready_.clear();
    latency_ = LatencyLine<Intent>(config_.latency, config_.plant.dt);
    diagnostics_ = EngineDiagnostics{};
    timed_entry_tick_ = 0;
    last_sample_t_ = 0.0;
  }

  /// Hands an intent to the engine; it passes the latency line (if enabled)
  /// and is consumed FIFO, at most one per tick.
  void submit(Intent intent) { latency_.schedule(intent, tick_); }

  void note_overrun() noexcept { ++diagnostics_.overruns; }

  TickOutput tick() {
    const double dt = config_.plant.dt;
    const double t0 = static_cast<double>(tick_) * dt;
    const double t1 = static_cast<double>(tick_ + 1) * dt;
    TickOutput out;

    for (Intent k : latency_.release(tick_))
      ready_.push_back(k);
    if (!ready_.empty()) {
      const Intent k = ready_.front();
      ready_.pop_front();
      last_intent_ = k;
      const FsmState from = planner_.fsm;
      auto [next, effect] = handle_intent(planner_, k);
      planner_ = next;
      apply(effect);
      out.transitions.push_back({t0, from, planner_.fsm, k, describe(effect), effect.reason, effect.accepted()});
      if (effect.accepted())
        entered(from, planner_.fsm, t0);
    }

    try {
      cpg_ = step(cpg_, config_.cpg, dt);
    } catch (const DivergenceError& e) {
      diagnostics_.violations.push_back({t1, e.what()});
      throw;
    }

    const FsmState before_tick = planner_.fsm;
    auto ticked = speechgait::tick(planner_, dt);
    planner_ = ticked.state;
    if (ticked.completed_from) {
      apply(ticked.effect);
      out.transitions.push_back({t1, before_tick, planner_.fsm, std::nullopt,
                                 ticked.effect.kind == EffectKind::none ? "complete" : "complete+" + describe(ticked.effect),
                                 "", true});
      const double held = static_cast<double>(tick_ + 1 - timed_entry_tick_) * dt;
      if (held > planner_.transition_period + dt + 1e-9)
        violation(t1, std::string(to_string(before_tick)) + " held for " + std::to_string(held) + " s");
      entered(before_tick, planner_.fsm, t1);
    } else if (is_timed(planner_.fsm) &&
               static_cast<double>(tick_ + 1 - timed_entry_tick_) * dt > planner_.transition_period + dt + 1e-9) {
      violation(t1, std::string(to_string(planner_.fsm)) + " exceeded its period");
    }

    GaitContext ctx;
    ctx.fsm = planner_.fsm;
    ctx.theta = cpg_.theta;
    ctx.r = cpg_.r;
    ctx.lambda = ramp_gain(cpg_, config_.cpg);
    ctx.transition_elapsed = planner_.transition_elapsed;
    const JointAngles q_gait = gait_.desired_pose(ctx);

    out.clamp = clamp_detailed(q_gait, q_cmd_prev_, planner_.limits, dt);
    plant_ = actuate(plant_, out.clamp.q, dt);

    monitor(t1, q_gait, out.clamp);
    q_cmd_prev_ = out.clamp.q;
    q_gait_prev_ = q_gait;

    auto& s = out.sample;
    s.t = t1;
    s.q_des = out.clamp.q;
    s.q_gait = q_gait;
    s.q_act = plant_.q;
    s.q_dot = plant_.q_dot;
    s.fsm = planner_.fsm;
    s.omega = cpg_.omega;
    s.r = cpg_.r;
    s.lambda = ctx.lambda;
    s.last_intent = last_intent_;
    s.overruns = diagnostics_.overruns;
    last_sample_t_ = t1;
    ++tick_;
    return out;
  }

  double time() const noexcept { return static_cast<double>(tick_) * config_.plant.dt; }
  std::int64_t tick_index() const noexcept { return tick_; }
  double dt() const noexcept { return config_.plant.dt; }
  std::size_t backlog() const noexcept { return ready_.size() + latency_.pending(); }

  const EngineConfig& config() const noexcept { return config_; }
  const CpgState& cpg() const noexcept { return cpg_; }
  const PlannerState& planner() const noexcept { return planner_; }
  const PlantState& plant() const noexcept { return plant_; }
  const GaitModel& gait() const noexcept { return gait_; }
  const EngineDiagnostics& diagnostics() const noexcept { return diagnostics_; }

  /// Fault injection for tests and experiments: shift one oscillator phase.
  void perturb_phase(JointId joint, double delta) { cpg_.theta[joint.index()] += delta; }

  nlohmann::json snapshot() const {
    nlohmann::json limits = nlohmann::json::object();
    for (JointId joint : kAllJoints) {
      const auto i = joint.index();
      limits[joint_name(joint)] = {
          {"q_min", planner_.limits.q_min[i]}, {"q_max", planner_.limits.q_max[i]}, {"v_max", planner_.limits.v_max[i]}};
    }
    return {{"t", time()},
            {"fsm", std::string(to_string(planner_.fsm))},
            {"transition_elapsed", planner_.transition_elapsed},
            {"Omega_n", cpg_.omega_target},
            {"A_n", cpg_.amplitude_target},
            {"omega", cpg_.omega},
            {"r", cpg_.r},
            {"lambda", ramp_gain(cpg_, config_.cpg)},
            {"ramp_mode", std::string(to_string(cpg_.ramp_mode))},
            {"limits", limits}};
  }

private:
  void apply(const Effect& effect) {
    switch (effect.kind) {
    case EffectKind::ramp:
      cpg_ = set_ramp(cpg_, effect.ramp);
      break;
    case EffectKind::modulate:
      cpg_ = apply_intent(cpg_, config_.cpg, *effect.intent);
      break;
    default:
      break;
    }
  }

  void entered(FsmState from, FsmState to, double t) {
    if (!is_allowed_transition(from, to))
      violation(t, "forbidden transition " + std::string(to_string(from)) + " -> " + std::string(to_string(to)));
    if (is_timed(to) && from != to)
      timed_entry_tick_ = tick_;
  }

  void violation(double t, std::string what) { diagnostics_.violations.push_back({t, std::move(what)}); }

  void monitor(double t, const JointAngles& q_gait, const ClampResult& clamp) {
    const double dt = config_.plant.dt;
    const auto& lim = planner_.limits;
    if (clamp.any())
      ++diagnostics_.clamp_ticks;
    bool excess = false;
    for (std::size_t i = 0; i < kJointCount; ++i) {
      const std::string name = joint_name(JointId::from_index(i));
      diagnostics_.angle_clamps[i] += clamp.angle_limited[i] ? 1 : 0;
      diagnostics_.rate_clamps[i] += clamp.rate_limited[i] ? 1 : 0;
      if (!std::isfinite(q_gait[i]) || !std::isfinite(plant_.q[i]))
        violation(t, name + " angle is not finite");
      const double bound = lim.v_max[i] * dt + kStepTolerance;
      const double gait_step = std::abs(q_gait[i] - q_gait_prev_[i]);
      diagnostics_.max_gait_step[i] = std::max(diagnostics_.max_gait_step[i], gait_step);
      excess = excess || gait_step > bound;
      if (std::abs(clamp.q[i] - q_cmd_prev_[i]) > bound)
        violation(t, name + " commanded step exceeds v_max*dt");
      if (plant_.q[i] < lim.q_min[i] - 1.0 || plant_.q[i] > lim.q_max[i] + 1.0)
        violation(t, name + " actual angle left [q_min - 1, q_max + 1]");
      diagnostics_.max_velocity[i] = std::max(diagnostics_.max_velocity[i], std::abs(plant_.q_dot[i]));
    }
    if (excess) {
      ++diagnostics_.gait_rate_excess_ticks;
      if (!diagnostics_.first_gait_rate_excess)
        diagnostics_.first_gait_rate_excess = t;
    }
    if (!(t > last_sample_t_))
      violation(t, "telemetry time is not increasing");
  }

  EngineConfig config_;
  GaitModel gait_;
  LatencyLine<Intent> latency_;
  CpgState cpg_;
  PlannerState planner_;
  PlantState plant_;
  JointAngles q_cmd_prev_{};
  JointAngles q_gait_prev_{};
  std::int64_t tick_ = 0;
  std::int64_t timed_entry_tick_ = 0;
  double last_sample_t_ = 0.0;
  std::optional<Intent> last_intent_;
  std::deque<Intent> ready_;
  EngineDiagnostics diagnostics_;
};

// ---------------------------------------------------------------------------
// Control loop

enum class ClockMode { simulation, realtime };

struct LoopOptions {
  ClockMode mode = ClockMode::simulation;
  double duration = 0.0;                      ///< seconds; <= 0 runs until stop is set
  const std::atomic<bool>* stop = nullptr;    ///< optional external stop flag
};

/// Runs the fixed-rate pipeline. `poll(engine)` feeds commands at the start
/// of every tick; `sink(output)` receives each tick's telemetry and
/// transition records. In real-time mode each tick waits for its wall-clock
/// slot; a tick that finishes after its deadline is counted as an overrun,
/// never skipped.
template <typename Poll, typename Sink>
void run_loop(Engine& engine, Poll&& poll, Sink&& sink, const LoopOptions& options) {
  const auto ticks = options.duration > 0.0
                         ? static_cast<std::int64_t>(std::llround(options.duration / engine.dt()))
                         : std::numeric_limits<std::int64_t>::max();
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(engine.dt()));
  const auto start = clock::now();
  for (std::int64_t k = 0; k < ticks; ++k) {
    if (options.stop != nullptr && options.stop->load(std::memory_order_relaxed))
      break;
    if (options.mode == ClockMode::realtime)
      std::this_thread::sleep_until(start + period * k);
    poll(engine);
    sink(engine.tick());
    if (options.mode == ClockMode::realtime && clock::now() > start + period * (k + 1))
      engine.note_overrun();
  }
}

/// Drains a network command queue into the engine.
class QueueSource {
public:
  explicit QueueSource(BoundedQueue<Intent>& queue) : queue_(queue) {}

  void operator()(Engine& engine) {
    while (auto intent = queue_.try_pop())
      engine.submit(*intent);
  }

private:
  BoundedQueue<Intent>& queue_;
};

} // namespace speechgait
