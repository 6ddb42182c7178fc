#include <doctest.h>

#include "lls/sample_model.hpp"

using namespace lls;

namespace {
const OrderParameterMap kMap =
    OrderParameterMap::calibrated(302.0, 0.2, 1600.0, 294.0, 640.0);
}

TEST_CASE("order parameter anchors") {
  CHECK(kMap.coupling(294.0) == doctest::Approx(640.0).epsilon(1e-12));
  CHECK(kMap.order_parameter(305.0) == 0.0);
  CHECK(kMap.coupling(305.0) == 0.0);
  CHECK(kMap.order_parameter(302.0) == 0.0);  // continuous at the transition
  CHECK(kMap.order_parameter(301.999) < 0.2);
  CHECK_THROWS_AS(kMap.order_parameter(-1.0), PhysicsError);
}

TEST_CASE("order parameter is monotone and bounded on a temperature sweep") {
  double prev = 1.1;
  for (double t = 250.0; t <= 320.0; t += 0.5) {
    const double s = kMap.order_parameter(t);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(s <= prev + 1e-12);
    prev = s;
  }
}

TEST_CASE("calibrated map rejects impossible anchors") {
  CHECK_THROWS_AS(OrderParameterMap::calibrated(302.0, 0.2, 100.0, 294.0, 640.0),
                  ConfigError);
  CHECK_THROWS_AS(OrderParameterMap::calibrated(302.0, 0.2, 1600.0, 303.0, 640.0),
                  ConfigError);
}

TEST_CASE("user tables interpolate and vanish above the clearing point") {
  OrderParameterMap m;
  m.d_max = 1000.0;
  m.table = {{290.0, 0.5}, {296.0, 0.3}, {302.0, 0.0}};
  CHECK(m.order_parameter(293.0) == doctest::Approx(0.4));
  CHECK(m.order_parameter(310.0) == 0.0);
  CHECK(m.order_parameter(280.0) == doctest::Approx(0.5));
}

TEST_CASE("transition ramp reproduces the coupling endpoints") {
  const PhaseSchedule s = transition_ramp(294.0, 305.0, 5.0, RampShape::Linear, kMap);
  CHECK(s.d_of(0.0) == doctest::Approx(640.0));
  CHECK(s.d_of(5.0) == 0.0);
  CHECK(s.d_of(1e9) == 0.0);
  // D stays within [0, d_max] along the ramp
  for (double t = 0.0; t <= 5.0; t += 0.05) {
    CHECK(s.d_of(t) >= 0.0);
    CHECK(s.d_of(t) <= kMap.d_max);
  }
  const auto tx = s.transition_time();
  REQUIRE(tx.has_value());
  CHECK(s.temperature(*tx) == doctest::Approx(302.0).epsilon(1e-9));
  CHECK_FALSE(s.in_isotropic_phase(*tx - 1e-6));
  CHECK(s.in_isotropic_phase(*tx + 1e-6));
}

TEST_CASE("sigmoid ramp hits its endpoints too") {
  const PhaseSchedule s =
      transition_ramp(294.0, 305.0, 5.0, RampShape::Sigmoid, kMap);
  CHECK(s.temperature(0.0) == doctest::Approx(294.0));
  CHECK(s.temperature(5.0) == doctest::Approx(305.0));
  CHECK(s.temperature(2.5) == doctest::Approx(299.5).epsilon(1e-6));
}

TEST_CASE("zero-width ramp is a step and constant schedules stay put") {
  PhaseSchedule step;
  step.t_start_k = 294.0;
  step.t_end_k = 305.0;
  step.ramp_s = 0.0;
  step.map = kMap;
  CHECK(step.d_of(0.0) == 0.0);
  CHECK(step.d_of(10.0) == 0.0);

  const PhaseSchedule iso = PhaseSchedule::constant(305.0, kMap);
  CHECK(iso.d_of(0.0) == 0.0);
  CHECK(iso.d_of(100.0) == 0.0);
  CHECK_FALSE(iso.transition_time().has_value());
  CHECK_THROWS_AS(transition_ramp(294.0, 305.0, 0.0, RampShape::Linear, kMap),
                  ConfigError);
}

TEST_CASE("calibration hits the oriented-phase targets") {
  const SpinSystem pop{46.6, 3.1, 640.0};
  const RateCalibration cal =
      calibrate_rates({1.1, 3.7}, pop, StorageMode::FreeEvolution);
  CHECK(std::abs(cal.achieved_t1 - 1.1) <= 0.02 * 1.1);
  CHECK(std::abs(cal.achieved_t_lls - 3.7) <= 0.02 * 3.7);
  CHECK(cal.symmetric_dipolar_rate > 0.0);
  CHECK(cal.uncorrelated_field_rate > 0.0);
}

TEST_CASE("calibration hits the isotropic-phase targets") {
  const SpinSystem ip{46.6, 3.1, 0.0};
  const RateCalibration cal = calibrate_rates({1.5, 8.1}, ip, StorageMode::IdealLock);
  CHECK(std::abs(cal.achieved_t1 - 1.5) <= 0.02 * 1.5);
  CHECK(std::abs(cal.achieved_t_lls - 8.1) <= 0.02 * 8.1);
}

TEST_CASE("infeasible targets are rejected with the model frontier") {
  const SpinSystem pop{46.6, 3.1, 640.0};
  CHECK_THROWS_AS(calibrate_rates({1.0, 0.5}, pop, StorageMode::FreeEvolution),
                  PhysicsError);
  CHECK_THROWS_AS(calibrate_rates({1.0, -1.0}, pop, StorageMode::FreeEvolution),
                  PhysicsError);
  CHECK_THROWS_AS(calibrate_rates({0.0, 1.0}, pop, StorageMode::FreeEvolution),
                  PhysicsError);
}

TEST_CASE("raising the uncorrelated rate strictly shortens the singlet lifetime") {
  const SpinSystem pop{46.6, 3.1, 640.0};
  double prev = 1e99;
  for (double b : {0.05, 0.1, 0.2, 0.4}) {
    const auto ch = std::vector<RelaxationChannel>{
        RelaxationChannel::exchange_symmetric_dipolar(0.3),
        RelaxationChannel::uncorrelated_random_field(b)};
    const double t = simulate_t_lls(pop, ch, StorageMode::FreeEvolution);
    CHECK(t < prev);
    prev = t;
  }
}

TEST_CASE("calibrated sets keep the singlet longer-lived than T1") {
  const SpinSystem pop{46.6, 3.1, 640.0};
  for (const RateTargets t : {RateTargets{1.1, 3.7}, RateTargets{1.6, 4.6}}) {
    const RateCalibration cal =
        calibrate_rates(t, pop, StorageMode::FreeEvolution);
    CHECK(cal.achieved_t_lls >= cal.achieved_t1);
  }
}
