#include <doctest.h>

#include <cmath>
#include <random>

#include "lls/fitting.hpp"

using namespace lls;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = a + (b - a) * i / (n - 1);
  return out;
}

std::vector<double> with_noise(const std::vector<double>& y, double sigma,
                               uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<double> out = y;
  for (auto& v : out) v += n(rng);
  return out;
}

}  // namespace

TEST_CASE("noiseless exponential recovers exactly") {
  const std::vector<double> t = {0.4, 2.9};
  std::vector<double> y;
  for (double x : t) y.push_back(1.7 * std::exp(-x / 0.9));
  const FitResult fit = fit_monoexponential(t, y);
  CHECK(fit.params[0] == doctest::Approx(1.7).epsilon(1e-9));
  CHECK(fit.params[1] == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("noisy long-lifetime fit lands within two percent") {
  const std::vector<double> t = linspace(0.0, 30.0, 12);
  std::vector<double> clean;
  for (double x : t) clean.push_back(std::exp(-x / 8.1));
  const std::vector<double> y = with_noise(clean, 0.01, 42);
  const FitResult fit = fit_monoexponential(t, y);
  CHECK(std::abs(fit.params[1] - 8.1) < 0.02 * 8.1);
  CHECK(fit.stderrs[1] < 0.5);
}

TEST_CASE("trans-phase synthetic lifetime") {
  const std::vector<double> t = linspace(0.5, 20.0, 10);
  std::vector<double> clean;
  for (double x : t) clean.push_back(0.8 * std::exp(-x / 6.3));
  const FitResult fit = fit_monoexponential(t, with_noise(clean, 0.008, 7));
  CHECK(std::abs(fit.params[1] - 6.3) < 0.02 * 6.3);
}

TEST_CASE("negative-amplitude exponentials fit too") {
  const std::vector<double> t = linspace(0.1, 5.0, 8);
  std::vector<double> y;
  for (double x : t) y.push_back(-1.2 * std::exp(-x / 1.4));
  const FitResult fit = fit_monoexponential(t, y);
  CHECK(fit.params[0] == doctest::Approx(-1.2).epsilon(1e-6));
  CHECK(fit.params[1] == doctest::Approx(1.4).epsilon(1e-6));
}

TEST_CASE("fit rejects degenerate input") {
  CHECK_THROWS_AS(fit_monoexponential({1.0, 2.0, 3.0}, {0.5, 0.5, 0.5}),
                  SimulationError);
  CHECK_THROWS_AS(fit_monoexponential({1.0}, {0.5}), SimulationError);
}

TEST_CASE("inversion recovery fits") {
  const std::vector<double> t = linspace(0.0, 8.0, 12);
  for (double t1 : {1.1, 1.5}) {
    std::vector<double> clean;
    for (double x : t) clean.push_back(2.0 * (1.0 - 2.0 * std::exp(-x / t1)));
    SUBCASE("noiseless") {
      const FitResult fit = fit_inversion_recovery(t, clean);
      CHECK(std::abs(fit.params[1] - t1) < 1e-8);
      CHECK(clean.front() == doctest::Approx(-fit.params[0]));
    }
    SUBCASE("one percent noise") {
      const FitResult fit =
          fit_inversion_recovery(t, with_noise(clean, 0.02, 11));
      CHECK(std::abs(fit.params[1] - t1) < 0.02 * t1);
    }
  }
}

TEST_CASE("gaussian attenuation fit recovers the diffusion coefficient") {
  // gradient sweep in kappa units
  const double big_delta = 10.0;
  std::vector<double> kappa;
  for (int i = 0; i < 19; ++i) {
    const double g = 2.5e-2 + i * (45.0e-2 / 18.0);  // T/m
    kappa.push_back(2.675e8 * g * 320e-6 * (2.0 / kPi));
  }
  for (double d_true : {1.32e-10, 1.81e-10, 1.92e-10}) {
    std::vector<double> ratio;
    for (double k : kappa) ratio.push_back(std::exp(-d_true * k * k * big_delta));
    const FitResult fit = fit_gaussian_attenuation(kappa, ratio, big_delta);
    CHECK(std::abs(fit.params[0] - d_true) < 0.03 * d_true);
  }
}

TEST_CASE("flat attenuation reports D = 0") {
  const std::vector<double> kappa = {1e3, 2e3, 3e3, 4e3};
  const std::vector<double> ratio = {1.0, 1.0, 1.0, 1.0};
  const FitResult fit = fit_gaussian_attenuation(kappa, ratio, 1.0);
  CHECK(fit.params[0] == doctest::Approx(0.0));
}

TEST_CASE("fits are scale equivariant") {
  const std::vector<double> t = linspace(0.0, 6.0, 9);
  std::vector<double> y;
  for (double x : t) y.push_back(0.7 * std::exp(-x / 2.2));
  const FitResult a = fit_monoexponential(t, y);
  std::vector<double> yc = y;
  for (auto& v : yc) v *= 13.0;
  const FitResult b = fit_monoexponential(t, yc);
  CHECK(b.params[0] == doctest::Approx(13.0 * a.params[0]).epsilon(1e-9));
  CHECK(b.params[1] == doctest::Approx(a.params[1]).epsilon(1e-9));
}
