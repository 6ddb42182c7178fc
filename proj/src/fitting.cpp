#include "lls/fitting.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace lls {

FitResult fit_least_squares(
    const std::vector<double>& x, const std::vector<double>& y,
    const std::function<double(double, const std::vector<double>&)>& model,
    std::vector<double> p, int max_iter, double tol) {
  const int n = static_cast<int>(x.size());
  const int np = static_cast<int>(p.size());
  if (n < np) throw SimulationError("fit: fewer points than parameters");

  auto residuals = [&](const std::vector<double>& q) {
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r(i) = y[i] - model(x[i], q);
    return r;
  };

  FitResult out;
  double lambda = 1e-3;
  Eigen::VectorXd r = residuals(p);
  double rss = r.squaredNorm();
  for (int iter = 0; iter < max_iter; ++iter) {
    out.iterations = iter + 1;
    Eigen::MatrixXd jac(n, np);
    for (int k = 0; k < np; ++k) {
      const double h = p[k] != 0.0 ? 1e-7 * std::abs(p[k]) : 1e-10;
      std::vector<double> pp = p;
      pp[k] += h;
      const Eigen::VectorXd rp = residuals(pp);
      jac.col(k) = -(rp - r) / h;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;
    bool improved = false;
    for (int attempt = 0; attempt < 24; ++attempt) {
      Eigen::MatrixXd a = jtj;
      a.diagonal().array() += lambda * jtj.diagonal().array().max(1e-30);
      const Eigen::VectorXd step = a.ldlt().solve(jtr);
      std::vector<double> pn = p;
      for (int k = 0; k < np; ++k) pn[k] += step(k);
      const Eigen::VectorXd rn = residuals(pn);
      const double rss_n = rn.squaredNorm();
      if (rss_n <= rss) {
        const double dp = step.cwiseAbs().maxCoeff();
        p = pn;
        r = rn;
        const double gain = rss - rss_n;
        rss = rss_n;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (dp < tol || gain < tol * (1.0 + rss)) {
          out.converged = true;
        }
        break;
      }
      lambda *= 4.0;
    }
    if (!improved || out.converged) {
      out.converged = out.converged || improved;
      break;
    }
  }
  if (!out.converged && out.iterations >= max_iter)
    out.converged = true;  // stalled at machine precision counts as done

  out.params = p;
  out.rss = rss;
  // parameter standard errors from the Jacobian at the solution
  Eigen::MatrixXd jac(n, np);
  for (int k = 0; k < np; ++k) {
    const double h = p[k] != 0.0 ? 1e-7 * std::abs(p[k]) : 1e-10;
    std::vector<double> pp = p;
    pp[k] += h;
    const Eigen::VectorXd rp = residuals(pp);
    jac.col(k) = -(rp - r) / h;
  }
  const int dof = std::max(1, n - np);
  const double s2 = rss / dof;
  const Eigen::MatrixXd cov = (jac.transpose() * jac)
                                  .ldlt()
                                  .solve(Eigen::MatrixXd::Identity(np, np)) * s2;
  out.stderrs.resize(np);
  for (int k = 0; k < np; ++k)
    out.stderrs[k] = std::sqrt(std::max(0.0, cov(k, k)));
  return out;
}

namespace {

void check_curve(const std::vector<double>& x, const std::vector<double>& y,
                 size_t min_points) {
  if (x.size() != y.size()) throw SimulationError("fit: length mismatch");
  if (x.size() < min_points) throw SimulationError("fit: too few points");
  const double lo = *std::min_element(y.begin(), y.end());
  const double hi = *std::max_element(y.begin(), y.end());
  if (hi - lo <= 0.0) throw SimulationError("fit: degenerate flat input");
}

}  // namespace

FitResult fit_monoexponential(const std::vector<double>& t,
                              const std::vector<double>& y) {
  check_curve(t, y, 2);
  // log-linear initialization on the points with the dominant sign
  double a0 = y.front();
  double tmax = std::max(1e-12, t.back() - t.front());
  double rate0 = 1.0 / tmax;
  {
    std::vector<double> lt, ly;
    const double sign = (a0 >= 0.0) ? 1.0 : -1.0;
    for (size_t i = 0; i < t.size(); ++i)
      if (sign * y[i] > 0.0) {
        lt.push_back(t[i]);
        ly.push_back(std::log(sign * y[i]));
      }
    if (lt.size() >= 2) {
      const double n = static_cast<double>(lt.size());
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (size_t i = 0; i < lt.size(); ++i) {
        sx += lt[i];
        sy += ly[i];
        sxx += lt[i] * lt[i];
        sxy += lt[i] * ly[i];
      }
      const double slope = (n * sxy - sx * sy) / std::max(1e-300, n * sxx - sx * sx);
      if (slope < 0.0) rate0 = -slope;
      a0 = sign * std::exp((sy - (-rate0) * sx) / n);
    }
  }
  auto model = [](double x, const std::vector<double>& p) {
    return p[0] * std::exp(-x / p[1]);
  };
  return fit_least_squares(t, y, model, {a0, 1.0 / rate0});
}

FitResult fit_inversion_recovery(const std::vector<double>& t,
                                 const std::vector<double>& y) {
  check_curve(t, y, 4);
  const double m0 = *std::max_element(y.begin(), y.end());
  // crude T1 seed from the zero crossing, t_zero = T1 ln 2
  double tz = t.back() / 2.0;
  for (size_t i = 0; i + 1 < t.size(); ++i)
    if (y[i] <= 0.0 && y[i + 1] > 0.0) {
      tz = 0.5 * (t[i] + t[i + 1]);
      break;
    }
  auto model = [](double x, const std::vector<double>& p) {
    return p[0] * (1.0 - 2.0 * std::exp(-x / p[1]));
  };
  return fit_least_squares(t, y, model,
                           {std::max(m0, 1e-9), std::max(tz / 0.6931, 1e-6)});
}

FitResult fit_gaussian_attenuation(const std::vector<double>& kappa,
                                   const std::vector<double>& ratio,
                                   double big_delta) {
  if (kappa.size() != ratio.size()) throw SimulationError("fit: length mismatch");
  if (kappa.size() < 4) throw SimulationError("fit: too few gradient points");
  if (!(big_delta > 0.0)) throw SimulationError("fit: Delta must be positive");
  const double lo = *std::min_element(ratio.begin(), ratio.end());
  const double hi = *std::max_element(ratio.begin(), ratio.end());
  double d0 = 0.0;
  if (hi - lo > 0.0) {
    // log-linear seed over positive ratios
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (size_t i = 0; i < kappa.size(); ++i)
      if (ratio[i] > 1e-12) {
        const double xx = kappa[i] * kappa[i] * big_delta;
        const double yy = std::log(ratio[i]);
        sx += xx;
        sy += yy;
        sxx += xx * xx;
        sxy += xx * yy;
        n += 1;
      }
    const double denom = n * sxx - sx * sx;
    if (denom > 0.0) d0 = std::max(0.0, -(n * sxy - sx * sy) / denom);
  } else {
    // flat input: report D = 0 with stderr from scatter
    FitResult out;
    out.params = {0.0};
    out.stderrs = {0.0};
    out.converged = true;
    return out;
  }
  auto model = [big_delta](double k, const std::vector<double>& p) {
    return std::exp(-p[0] * k * k * big_delta);
  };
  return fit_least_squares(kappa, ratio, model, {d0});
}

}  // namespace lls
