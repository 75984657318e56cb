#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "speechgait/cpg.hpp"

using namespace speechgait;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDt = 0.01;

CpgState run(CpgState s, const CpgParams& p, double seconds, double dt = kDt) {
  const auto n = static_cast<int>(std::lround(seconds / dt));
  for (int i = 0; i < n; ++i)
    s = step(s, p, dt);
  return s;
}

CpgState walking_start(const CpgParams& p) {
  auto s = CpgState::initial(p);
  s.ramp_mode = RampMode::walking;
  return s;
}

// circular distance of the left-right offset from π
double offset_error(const CpgState& s) { return std::abs(oracle::wrap(cross_side_offset(s) - kPi)); }

oracle::Vec to_vec(const CpgState& s) {
  oracle::Vec x{};
  for (int i = 0; i < 6; ++i)
    x[i] = s.theta[i];
  x[6] = s.omega;
  x[7] = s.omega_dot;
  x[8] = s.r;
  x[9] = s.r_dot;
  return x;
}

} // namespace

TEST(Cpg, DefaultParameters) {
  const auto p = CpgParams::defaults();
  EXPECT_DOUBLE_EQ(p.beta_omega, 10 * kPi);
  EXPECT_DOUBLE_EQ(p.beta_r, 10 * kPi);
  EXPECT_DOUBLE_EQ(p.c_theta, 2.0);
  EXPECT_DOUBLE_EQ(p.c_r, 2.5);
  EXPECT_DOUBLE_EQ(p.ramp_period, 2.0);
  EXPECT_DOUBLE_EQ(p.omega_target0, kPi / 2);
  EXPECT_DOUBLE_EQ(p.amplitude_target0, 1.0);
  EXPECT_DOUBLE_EQ(p.theta_left0, 2.0 + kPi);
  EXPECT_DOUBLE_EQ(p.theta_right0, 2.0);
  for (std::size_t i = 0; i < kJointCount; ++i)
    for (std::size_t j = 0; j < kJointCount; ++j) {
      EXPECT_DOUBLE_EQ(p.coupling[i][j], 0.1);
      EXPECT_DOUBLE_EQ(p.phase_offset[i][j], (i < 3) == (j < 3) ? 0.0 : kPi);
    }
  EXPECT_NO_THROW(p.validate());
}

TEST(Cpg, ValidateRejectsBadParameters) {
  auto p = CpgParams::defaults();
  p.coupling[0][1] = -0.1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = CpgParams::defaults();
  p.phase_offset[2][2] = 0.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = CpgParams::defaults();
  p.phase_offset[0][1] = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Cpg, EquilibriumHasPureDrift) {
  const auto p = CpgParams::defaults();
  auto s = walking_start(p);
  s.omega = s.omega_target;
  s.r = s.amplitude_target;
  const auto rates = phase_rates(s, p);
  for (double r : rates)
    EXPECT_NEAR(r, s.omega, 1e-15);
  const auto next = step(s, p, kDt);
  EXPECT_DOUBLE_EQ(next.omega, s.omega);
  EXPECT_DOUBLE_EQ(next.r, s.r);
  EXPECT_EQ(next.omega_dot, 0.0);
  EXPECT_EQ(next.r_dot, 0.0);
  for (std::size_t i = 0; i < kJointCount; ++i)
    EXPECT_NEAR(next.theta[i], s.theta[i] + s.omega * kDt, 1e-12);
}

TEST(Cpg, ZeroGainFreezesModulation) {
  const auto p = CpgParams::defaults();
  auto s = CpgState::initial(p);
  s.ramp_mode = RampMode::otherwise;
  s.omega = 0.7;
  s.r = 0.3;
  s.omega_target = 3.0;
  s.amplitude_target = 2.0;
  const auto next = run(s, p, 1.0);
  EXPECT_EQ(next.omega, 0.7);
  EXPECT_EQ(next.r, 0.3);
}

TEST(Cpg, SettlesToOraclePrediction) {
  const auto p = CpgParams::defaults();
  const auto s = run(walking_start(p), p, 10.0);
  const auto ref = oracle::integrate_adaptive(oracle::Network{}, to_vec(walking_start(p)), 0.0, 10.0);
  EXPECT_NEAR(s.omega, ref[6], 1e-8);
  for (int i = 0; i < 6; ++i)
    EXPECT_NEAR(s.theta[i], ref[i], 1e-8);
  EXPECT_LT(std::abs(s.omega - kPi / 2) / (kPi / 2), 0.01);
  EXPECT_LT(offset_error(s), 0.05);
  EXPECT_LT(std::abs(oracle::wrap(ref[0] - ref[3] - kPi)), 0.05);
}

TEST(Cpg, FrequencyConsensus) {
  const auto p = CpgParams::defaults();
  auto s = walking_start(p);
  s.theta[1] += 0.2;
  s.theta[4] -= 0.25;
  s = run(s, p, 60.0);
  for (double r : phase_rates(s, p))
    EXPECT_LT(std::abs(r - s.omega), 1e-3);
}

TEST(Cpg, CriticallyDampedNoOvershoot) {
  const auto p = CpgParams::defaults();
  auto s = walking_start(p);
  s.omega = s.omega_target;
  s.r = s.amplitude_target;
  s = apply_intent(s, p, Intent::speed_up);
  const double target = s.omega_target;
  double previous = s.omega;
  for (int i = 0; i < 300; ++i) {
    s = step(s, p, kDt);
    EXPECT_GE(s.omega, previous - 1e-12);
    EXPECT_LE(s.omega, target * (1.0 + 1e-6));
    previous = s.omega;
  }
}

TEST(Cpg, SpeedUpSettlesWithinHalfSecond) {
  const auto p = CpgParams::defaults();
  auto s = walking_start(p);
  s.omega = s.omega_target;
  s.r = s.amplitude_target;
  const double before = s.omega_target;
  s = apply_intent(s, p, Intent::speed_up);
  s = run(s, p, 0.5);
  EXPECT_LT(std::abs(s.omega - s.omega_target), 0.01 * (s.omega_target - before));
  EXPECT_LT(std::abs(s.omega - (kPi / 2 + 2.0)) / (kPi / 2 + 2.0), 0.01);
}

TEST(Cpg, ApplyIntentExamples) {
  const auto p = CpgParams::defaults();
  auto s = CpgState::initial(p);
  auto up = apply_intent(s, p, Intent::speed_up);
  EXPECT_DOUBLE_EQ(up.omega_target, kPi / 2 + 2);
  EXPECT_DOUBLE_EQ(up.amplitude_target, 3.5);
  auto same = apply_intent(s, p, Intent::maintain);
  EXPECT_EQ(same.omega_target, s.omega_target);
  EXPECT_EQ(same.amplitude_target, s.amplitude_target);
  for (Intent k : {Intent::stand, Intent::sit, Intent::walk, Intent::stop})
    EXPECT_EQ(apply_intent(s, p, k).omega_target, s.omega_target);

  s.omega_target = p.omega_min;
  s.amplitude_target = p.amplitude_min;
  auto down = apply_intent(s, p, Intent::slow_down);
  EXPECT_EQ(down.omega_target, p.omega_min);
  EXPECT_EQ(down.amplitude_target, p.amplitude_min);
  for (int i = 0; i < 10; ++i)
    up = apply_intent(up, p, Intent::speed_up);
  EXPECT_EQ(up.omega_target, p.omega_max);
  EXPECT_EQ(up.amplitude_target, p.amplitude_max);
}

TEST(Cpg, RampGainExamples) {
  EXPECT_EQ(ramp_gain(RampMode::stand_to_walk, 0.0, 2.0), 0.0);
  EXPECT_EQ(ramp_gain(RampMode::stand_to_walk, 2.0, 2.0), 1.0);
  EXPECT_EQ(ramp_gain(RampMode::walk_to_stop, 1.0, 2.0), 0.5);
  EXPECT_EQ(ramp_gain(RampMode::otherwise, 1.3, 2.0), 0.0);
  EXPECT_EQ(ramp_gain(RampMode::walking, 100.0, 2.0), 1.0);
  EXPECT_EQ(ramp_gain(RampMode::stand_to_walk, 5.0, 2.0), 1.0);
  EXPECT_EQ(ramp_gain(RampMode::walk_to_stop, -1.0, 2.0), 1.0);
  for (double t = -1.0; t < 4.0; t += 0.01)
    for (RampMode m : {RampMode::stand_to_walk, RampMode::walk_to_stop, RampMode::walking, RampMode::otherwise}) {
      const double l = ramp_gain(m, t, 2.0);
      EXPECT_GE(l, 0.0);
      EXPECT_LE(l, 1.0);
    }
}

TEST(Cpg, SetRampResetsClock) {
  const auto p = CpgParams::defaults();
  auto s = CpgState::initial(p);
  s.ramp_elapsed = 7.0;
  s = set_ramp(s, RampMode::stand_to_walk);
  EXPECT_EQ(s.ramp_mode, RampMode::stand_to_walk);
  EXPECT_EQ(s.ramp_elapsed, 0.0);
  s = run(s, p, 1.0);
  EXPECT_NEAR(ramp_gain(s, p), 0.5, 1e-12);
}

TEST(Cpg, RampedStartMatchesOracle) {
  const auto p = CpgParams::defaults();
  auto s = set_ramp(CpgState::initial(p), RampMode::stand_to_walk);
  s = run(s, p, 2.0);
  oracle::Network net;
  net.lambda = [](double t) { return std::clamp(t / 2.0, 0.0, 1.0); };
  const auto ref = oracle::integrate_adaptive(net, to_vec(set_ramp(CpgState::initial(p), RampMode::stand_to_walk)),
                                              0.0, 2.0);
  EXPECT_NEAR(s.omega, ref[6], 1e-7);
  EXPECT_NEAR(s.r, ref[8], 1e-7);
  for (int i = 0; i < 6; ++i)
    EXPECT_NEAR(s.theta[i], ref[i], 1e-7);
}

TEST(Cpg, PerturbationRecovery) {
  const auto p = CpgParams::defaults();
  auto s = run(walking_start(p), p, 10.0);
  for (std::size_t joint = 0; joint < kJointCount; ++joint) {
    auto q = s;
    q.theta[joint] += 0.3;
    q = run(q, p, 10.0);
    EXPECT_GT(offset_error(q), 0.0);
    EXPECT_LT(offset_error(q), 0.05) << joint;
  }
}

TEST(Cpg, PrintedConventionDriftsAwayFromAntiPhase) {
  auto p = CpgParams::defaults();
  p.convention = CouplingConvention::printed;
  auto s = walking_start(p);
  s.theta[0] += 0.05;
  s = run(s, p, 60.0);
  // anti-phase is unstable under the printed sign; the sides pull together
  EXPECT_GT(offset_error(s), 0.5);
}

TEST(Cpg, IntegratorConvergence) {
  const auto p = CpgParams::defaults();
  const auto coarse = run(walking_start(p), p, 10.0, 0.01);
  const auto fine = run(walking_start(p), p, 10.0, 0.005);
  for (std::size_t i = 0; i < kJointCount; ++i)
    EXPECT_LT(std::abs(coarse.theta[i] - fine.theta[i]), 1e-6);
  // order measured mid-transient, where the error is well above round-off
  auto at = [&](double dt) { return run(walking_start(p), p, 0.2, dt).omega; };
  const double e1 = std::abs(at(0.01) - at(0.005));
  const double e2 = std::abs(at(0.005) - at(0.0025));
  EXPECT_GT(e1 / e2, 12.0);
  EXPECT_LT(e1 / e2, 20.0);
}

TEST(Cpg, Deterministic) {
  const auto p = CpgParams::defaults();
  const auto a = run(walking_start(p), p, 5.0);
  const auto b = run(walking_start(p), p, 5.0);
  for (std::size_t i = 0; i < kJointCount; ++i)
    EXPECT_EQ(a.theta[i], b.theta[i]);
  EXPECT_EQ(a.omega, b.omega);
}

TEST(Cpg, StepErrors) {
  const auto p = CpgParams::defaults();
  auto s = CpgState::initial(p);
  EXPECT_THROW(step(s, p, 0.0), std::invalid_argument);
  EXPECT_THROW(step(s, p, -0.01), std::invalid_argument);
  s.theta[2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(step(s, p, kDt), DivergenceError);
  s = CpgState::initial(p);
  s.ramp_mode = RampMode::walking;
  s.omega_target = 1e308;
  EXPECT_THROW(run(s, p, 1.0), DivergenceError);
}

TEST(Cpg, WrapAngle) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi + 0.1), -kPi + 0.1, 1e-12);
  EXPECT_NEAR(wrap_angle(-0.2), -0.2, 1e-15);
}
