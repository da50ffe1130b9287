#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>

namespace tdcc::optim {

struct NelderMeadOptions {
  /// Stop when f_worst - f_best <= ftol * (|f_best| + ftol).
  double ftol = 1e-8;
  /// Initial simplex edge along every coordinate.
  double step = 0.5;
  std::size_t max_evals = 4000;
  /// Restarts from the incumbent after convergence (guards simplex collapse).
  int restarts = 1;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  std::size_t evals = 0;
  bool converged = false;
};

/// Unconstrained Nelder-Mead minimisation. The objective may return +inf for
/// infeasible points; the start point must be finite.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opts = {});

}  // namespace tdcc::optim
