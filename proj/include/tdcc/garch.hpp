#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tdcc {

/// sigma2_t = omega + a * x_{t-1}^2 + b * sigma2_{t-1}.
struct GarchParams {
  double omega = 0.0;
  double a = 0.0;
  double b = 0.0;

  /// omega / (1 - a - b); requires a + b < 1.
  double unconditional_variance() const;
  /// omega > 0, a >= 0, b >= 0 and a + b < 1.
  bool valid() const noexcept;
};

struct GarchFit {
  GarchParams params;
  double sigma2_init = 0.0;
  std::vector<double> sigma2_path;
  double loglik = 0.0;
  bool converged = false;
};

/// Largest persistence a + b allowed by the fitter.
inline constexpr double kMaxPersistence = 1.0 - 1e-6;

/// Variance path for t = 1..T starting from sigma2_init.
std::vector<double> garch_filter(const GarchParams& params, std::span<const double> returns,
                                 double sigma2_init);

/// -(1/2T) * sum_t (log sigma2_t + x_t^2 / sigma2_t).
double garch_loglik(const GarchParams& params, std::span<const double> returns, double sigma2_init);

/// Population variance (1/T divisor) of the series; the default filter start.
double sample_variance(std::span<const double> returns);

/// Gaussian QML fit with sigma2_init = sample variance. Requires T >= 20.
GarchFit garch_fit(std::span<const double> returns);

/// One-step variance forecast: omega + a * last_return^2 + b * sigma2_T.
double garch_forecast(const GarchFit& fit, double last_return);

}  // namespace tdcc
