#include "tdcc/garch.hpp"

#include "tdcc/error.hpp"
#include "tdcc/optim.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <limits>

namespace tdcc {

namespace {

constexpr const char* kModule = "garch";

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

// (log omega, logit of persistence share, logit of the ARCH share of persistence)
GarchParams from_unconstrained(const Eigen::VectorXd& u) {
  const double persistence = kMaxPersistence * logistic(u[1]);
  const double a = persistence * logistic(u[2]);
  return {std::exp(u[0]), a, std::max(0.0, persistence - a)};
}

Eigen::VectorXd to_unconstrained(const GarchParams& p) {
  Eigen::VectorXd u(3);
  const double persistence = p.a + p.b;
  u << std::log(p.omega), logit(persistence / kMaxPersistence), logit(p.a / persistence);
  return u;
}

// Negative loglik without allocating the path.
double neg_loglik(const GarchParams& p, std::span<const double> x, double sigma2_init) {
  double s2 = sigma2_init;
  double acc = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (t > 0) s2 = p.omega + p.a * x[t - 1] * x[t - 1] + p.b * s2;
    if (!(s2 > 0.0) || !std::isfinite(s2)) return std::numeric_limits<double>::infinity();
    acc += std::log(s2) + x[t] * x[t] / s2;
  }
  return acc / (2.0 * static_cast<double>(x.size()));
}

}  // namespace

double GarchParams::unconditional_variance() const {
  if (!(a + b < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, kModule, "a + b >= 1 has no unconditional variance");
  }
  return omega / (1.0 - a - b);
}

bool GarchParams::valid() const noexcept { return omega > 0.0 && a >= 0.0 && b >= 0.0 && a + b < 1.0; }

std::vector<double> garch_filter(const GarchParams& params, std::span<const double> returns,
                                 double sigma2_init) {
  if (!(sigma2_init > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, kModule, "sigma2_init must be positive");
  }
  if (returns.empty()) throw Error(ErrorCode::InvalidArgument, kModule, "empty return series");
  std::vector<double> path(returns.size());
  path[0] = sigma2_init;
  for (std::size_t t = 1; t < returns.size(); ++t) {
    path[t] = params.omega + params.a * returns[t - 1] * returns[t - 1] + params.b * path[t - 1];
  }
  return path;
}

double garch_loglik(const GarchParams& params, std::span<const double> returns, double sigma2_init) {
  const std::vector<double> path = garch_filter(params, returns, sigma2_init);
  double acc = 0.0;
  for (std::size_t t = 0; t < returns.size(); ++t) {
    acc += std::log(path[t]) + returns[t] * returns[t] / path[t];
  }
  return -acc / (2.0 * static_cast<double>(returns.size()));
}

double sample_variance(std::span<const double> returns) {
  if (returns.empty()) return 0.0;
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(returns.size());
  double ss = 0.0;
  for (double r : returns) ss += (r - mean) * (r - mean);
  return ss / static_cast<double>(returns.size());
}

GarchFit garch_fit(std::span<const double> returns) {
  if (returns.size() < 20) {
    throw Error(ErrorCode::InvalidArgument, kModule,
                fmt::format("GARCH fit needs at least 20 observations, got {}", returns.size()));
  }
  const double var = sample_variance(returns);
  if (!(var > 0.0) || !std::isfinite(var)) {
    throw Error(ErrorCode::Degenerate, kModule, "unfittable entry: series has zero sample variance");
  }

  static constexpr std::array<std::array<double, 2>, 3> kStarts{{{0.05, 0.90}, {0.10, 0.80}, {0.02, 0.95}}};
  auto objective = [&](const Eigen::VectorXd& u) { return neg_loglik(from_unconstrained(u), returns, var); };

  optim::NelderMeadOptions opts;
  opts.ftol = 1e-8;
  opts.step = 0.5;
  opts.max_evals = 3000;

  optim::NelderMeadResult best;
  best.f = std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : kStarts) {
    const GarchParams start{var * (1.0 - a - b), a, b};
    optim::NelderMeadResult r = optim::nelder_mead(objective, to_unconstrained(start), opts);
    if (r.f < best.f) best = r;
  }

  GarchFit fit;
  fit.params = from_unconstrained(best.x);
  fit.sigma2_init = var;
  fit.sigma2_path = garch_filter(fit.params, returns, var);
  fit.loglik = -best.f;
  fit.converged = best.converged && std::isfinite(best.f);
  return fit;
}

double garch_forecast(const GarchFit& fit, double last_return) {
  if (fit.sigma2_path.empty()) throw Error(ErrorCode::InvalidArgument, kModule, "fit has no variance path");
  const GarchParams& p = fit.params;
  return p.omega + p.a * last_return * last_return + p.b * fit.sigma2_path.back();
}

}  // namespace tdcc
