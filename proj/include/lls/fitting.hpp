#pragma once

#include <functional>
#include <vector>

#include "lls/types.hpp"

namespace lls {

struct FitResult {
  std::vector<double> params;
  std::vector<double> stderrs;
  double rss = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Levenberg-Marquardt on a generic model y(x; p) with numeric Jacobian.
// Small problems only (2-3 parameters); stderrs from (J^T J)^-1 * s^2.
FitResult fit_least_squares(
    const std::vector<double>& x, const std::vector<double>& y,
    const std::function<double(double, const std::vector<double>&)>& model,
    std::vector<double> initial, int max_iter = 200, double tol = 1e-12);

// A * exp(-t / T); returns {A, T}
FitResult fit_monoexponential(const std::vector<double>& t,
                              const std::vector<double>& y);

// M0 * (1 - 2 exp(-t / T1)); returns {M0, T1}
FitResult fit_inversion_recovery(const std::vector<double>& t,
                                 const std::vector<double>& y);

// ratio(kappa) = exp(-D kappa^2 Delta); x is kappa in rad/m; returns {D}
FitResult fit_gaussian_attenuation(const std::vector<double>& kappa,
                                   const std::vector<double>& ratio,
                                   double big_delta);

}  // namespace lls
