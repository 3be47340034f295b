#pragma once

// Ordinary least squares for the three rate models used by the sweeps.

#include <cmath>
#include <string>
#include <vector>

#include "qlab/core.hpp"

namespace qlab {

enum class RateModel {
  power,          // y = C x^gamma
  log_power,      // y = C (log x)^gamma
  affine_in_log,  // y = gamma log x + C
};

inline const char* to_string(RateModel m) {
  switch (m) {
    case RateModel::power: return "power";
    case RateModel::log_power: return "logpower";
    case RateModel::affine_in_log: return "affine-in-log";
  }
  return "?";
}

struct RateFit {
  RateModel model = RateModel::power;
  double gamma = 0.0;  // exponent, or slope a for the affine model
  double C = 0.0;      // prefactor, or intercept b for the affine model
  double r_squared = 0.0;
  std::vector<double> residuals;  // in the fitted (transformed) coordinates
  std::vector<double> xs, ys;

  /// Model prediction at x.
  [[nodiscard]] double predict(double x) const {
    switch (model) {
      case RateModel::power: return C * std::pow(x, gamma);
      case RateModel::log_power: return C * std::pow(std::log(x), gamma);
      case RateModel::affine_in_log: return gamma * std::log(x) + C;
    }
    return 0.0;
  }
};

namespace detail {

struct Line {
  double slope, intercept, r2;
  std::vector<double> residuals;
};

inline Line least_squares(const std::vector<double>& u, const std::vector<double>& v) {
  const double n = static_cast<double>(u.size());
  double su = 0, sv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    su += u[i];
    sv += v[i];
  }
  const double mu = su / n, mv = sv / n;
  double suu = 0, suv = 0, svv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    suu += (u[i] - mu) * (u[i] - mu);
    suv += (u[i] - mu) * (v[i] - mv);
    svv += (v[i] - mv) * (v[i] - mv);
  }
  if (!(suu > 0.0)) throw DomainError("rate fit needs at least two distinct abscissae");
  Line l;
  l.slope = suv / suu;
  l.intercept = mv - l.slope * mu;
  double sse = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double r = v[i] - (l.intercept + l.slope * u[i]);
    l.residuals.push_back(r);
    sse += r * r;
  }
  // an exactly constant response is a perfect (flat) fit
  l.r2 = svv > 0.0 ? std::min(1.0, std::max(0.0, 1.0 - sse / svv)) : 1.0;
  return l;
}

inline void check_fit_input(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DomainError("rate fit: xs and ys differ in length");
  if (xs.size() < 3) throw DomainError("rate fit needs at least 3 points");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw DomainError("rate fit: nonfinite data");
    if (i > 0 && !(xs[i] > xs[i - 1])) throw DomainError("rate fit: xs must be strictly increasing");
  }
}

}  // namespace detail

inline RateFit fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys) {
  detail::check_fit_input(xs, ys);
  std::vector<double> u, v;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw DomainError("power-law fit needs positive data");
    u.push_back(std::log(xs[i]));
    v.push_back(std::log(ys[i]));
  }
  const auto l = detail::least_squares(u, v);
  return {RateModel::power, l.slope, std::exp(l.intercept), l.r2, l.residuals, xs, ys};
}

inline RateFit fit_log_power(const std::vector<double>& xs, const std::vector<double>& ys) {
  detail::check_fit_input(xs, ys);
  std::vector<double> u, v;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > M_E)) throw DomainError("log-power fit needs x > e");
    if (!(ys[i] > 0.0)) throw DomainError("log-power fit needs positive y");
    u.push_back(std::log(std::log(xs[i])));
    v.push_back(std::log(ys[i]));
  }
  const auto l = detail::least_squares(u, v);
  return {RateModel::log_power, l.slope, std::exp(l.intercept), l.r2, l.residuals, xs, ys};
}

/// y = a log x + b.
inline RateFit fit_affine_log(const std::vector<double>& xs, const std::vector<double>& ys) {
  detail::check_fit_input(xs, ys);
  std::vector<double> u;
  for (double x : xs) {
    if (!(x > 0.0)) throw DomainError("affine-in-log fit needs positive x");
    u.push_back(std::log(x));
  }
  const auto l = detail::least_squares(u, ys);
  return {RateModel::affine_in_log, l.slope, l.intercept, l.r2, l.residuals, xs, ys};
}

}  // namespace qlab
