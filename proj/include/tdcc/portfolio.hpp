#pragma once

#include "tdcc/baselines.hpp"
#include "tdcc/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tdcc {

enum class Objective { MinVar, MeanVar };

std::string to_string(Objective o);
Objective parse_objective(const std::string& text);

struct QpResult {
  Vector w;
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
};

/**
 * Convex QP on the probability simplex:
 *   min 0.5 w'Gw + g'w  s.t.  1'w = 1, w >= 0
 * solved by a primal active-set method from the uniform start. Ties between
 * blocking or releasing bounds go to the smallest index. G must be PD.
 */
QpResult simplex_qp(const Matrix& g_mat, const Vector& g_vec, double tol = 1e-8);

/// Scale-free natural residual max_i |min(w_i, r_i / s)| plus |1'w - 1|, where
/// r = grad + nu 1 is the reduced gradient at the optimal multiplier.
double simplex_kkt_residual(const Matrix& g_mat, const Vector& g_vec, const Vector& w);

/// w = Sigma^{-1} 1 / (1' Sigma^{-1} 1).
Vector minvar_unconstrained(const Matrix& sigma);
/// Long-only minimum variance.
QpResult minvar_constrained(const Matrix& sigma);

/// w'mu / (w' Sigma w).
double meanvar_objective(const Vector& w, const Vector& mu, const Matrix& sigma);

/**
 * argmax of w'mu / (w'Sigma w) on the hyperplane 1'w = 1. Stationary points
 * are w ∝ Sigma^{-1}(mu - lambda 1); the ratio along that family has critical
 * points at lambda = ±sqrt(c/a) (a = 1'S^{-1}1, c = mu'S^{-1}mu), compared with
 * the lambda -> infinity limit. mu ∝ 1 reduces to the minimum-variance weights.
 */
Vector meanvar_unconstrained(const Vector& mu, const Matrix& sigma);

/// Projected-gradient ascent of the ratio on the hyperplane (cross-check).
Vector meanvar_gradient_ascent(const Vector& mu, const Matrix& sigma, std::size_t max_iter = 200000);

/// First-order residual of the ratio on the hyperplane, relative to |f|.
double meanvar_stationarity(const Vector& w, const Vector& mu, const Matrix& sigma);

/// Ratio maximisation over the simplex (Dinkelbach iterations on concave QPs).
QpResult meanvar_constrained(const Vector& mu, const Matrix& sigma);

struct BacktestReport {
  std::vector<std::size_t> test_index;  // 0-based row of each test point
  std::vector<Vector> weights;
  std::vector<double> returns;
  double av = 0.0;
  double sd = 0.0;
  std::optional<double> ir;  // unset when SD = 0
  std::size_t fallbacks = 0;
  std::vector<std::string> fallback_messages;
  std::size_t refits = 0;
  std::size_t stride = 1;
};

/// AV = p * mean(w'R), SD = sqrt(p) * stdev(w'R) with the (T_test - 1) divisor, IR = AV/SD.
BacktestReport evaluate(std::span<const Vector> returns_realized, std::span<const Vector> weights,
                        double periods_per_year = 252.0);

struct BacktestConfig {
  MethodSpec method;
  std::size_t train_window = 630;
  Objective objective = Objective::MinVar;
  bool constrained = false;
  std::size_t stride = 1;
  double periods_per_year = 252.0;
  /// Optional mean forecasts, one per test point (vec order); the
  /// training-window sample mean is used otherwise.
  std::vector<Vector> mu;
  std::size_t threads = default_threads();
};

/**
 * Rolling-window backtest over test points t0 = T_train, ..., T-1. The model is
 * refitted on the latest T_train (demeaned) observations every `stride`
 * points and filtered forward in between. Failed points reuse the previous
 * weights (equal weights before the first success) and are counted.
 */
BacktestReport rolling_backtest(std::span<const Tensor> x, const BacktestConfig& cfg);

/// One CSV row per test point: index (or date), realized return, then the
/// weights summed over every mode index (w_m<k>_<i>).
std::string backtest_csv(const BacktestReport& report, const Dims& dims,
                         const std::vector<std::string>& dates = {});

}  // namespace tdcc
