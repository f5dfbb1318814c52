#pragma once

// L1-penalized least squares by cyclic coordinate descent.
//
//   minimize (1/2n) ||y - Z b - c||^2 + alpha ||b||_1
//
// over standardized columns Z (zero mean, unit population variance). The
// intercept c is unpenalized. Constant columns keep a zero coefficient.

#include <cmath>
#include <span>
#include <vector>

#include "usat/errors.hpp"
#include "usat/matrix.hpp"

namespace usat {

struct LassoHyperparams {
  double alpha = 0.001;
  double tol = 1e-7;
  int max_sweeps = 10000;

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be >= 0");
    if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
    if (max_sweeps < 1) throw ConfigError("max_sweeps must be >= 1");
  }

  friend bool operator==(const LassoHyperparams&, const LassoHyperparams&) = default;
};

struct LassoFit {
  std::vector<double> standardized;  // coefficients on standardized columns
  std::vector<double> coefficients;  // original feature units
  double intercept = 0.0;
  std::vector<double> means;
  std::vector<double> scales;  // population std dev; 0 for constant columns
  int sweeps = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // objective after each sweep
};

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

inline LassoFit lasso_coordinate_descent(const Matrix& X, std::span<const double> y, const LassoHyperparams& hp) {
  hp.validate();
  const std::size_t n = X.rows(), p = X.cols();
  if (n == 0) throw DataError("lasso needs at least one row");
  const double nd = static_cast<double>(n);

  LassoFit fit;
  fit.means.assign(p, 0.0);
  fit.scales.assign(p, 0.0);
  fit.standardized.assign(p, 0.0);
  fit.coefficients.assign(p, 0.0);

  // Column-major standardized design.
  std::vector<std::vector<double>> z(p, std::vector<double>(n));
  std::vector<double> col_norm(p, 0.0);  // z_j' z_j / n
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += X(i, j);
    mean /= nd;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (X(i, j) - mean) * (X(i, j) - mean);
    var /= nd;
    fit.means[j] = mean;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * (1.0 + std::abs(mean)))) continue;
    fit.scales[j] = sd;
    for (std::size_t i = 0; i < n; ++i) z[j][i] = (X(i, j) - mean) / sd;
    for (double v : z[j]) col_norm[j] += v * v;
    col_norm[j] /= nd;
  }

  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  y_mean /= nd;
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - y_mean;

  auto& beta = fit.standardized;
  auto objective = [&] {
    double rss = 0.0, l1 = 0.0;
    for (double v : r) rss += v * v;
    for (double b : beta) l1 += std::abs(b);
    return rss / (2.0 * nd) + hp.alpha * l1;
  };

  for (fit.sweeps = 0; fit.sweeps < hp.max_sweeps;) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (fit.scales[j] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += z[j][i] * r[i];
      const double updated = soft_threshold(dot / nd + col_norm[j] * beta[j], hp.alpha) / col_norm[j];
      const double delta = updated - beta[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) r[i] -= z[j][i] * delta;
        beta[j] = updated;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    ++fit.sweeps;
    fit.objective_trace.push_back(objective());
    if (max_change < hp.tol) {
      fit.converged = true;
      break;
    }
  }

  fit.intercept = y_mean;
  for (std::size_t j = 0; j < p; ++j) {
    if (fit.scales[j] == 0.0) continue;
    fit.coefficients[j] = beta[j] / fit.scales[j];
    fit.intercept -= fit.coefficients[j] * fit.means[j];
  }
  return fit;
}

}  // namespace usat
