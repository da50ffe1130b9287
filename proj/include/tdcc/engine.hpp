#pragma once

#include "tdcc/garch.hpp"
#include "tdcc/parallel.hpp"
#include "tdcc/tensor.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tdcc {

enum class InterceptMethod { Sample, LinearShrinkage, NonlinearShrinkage };

std::string to_string(InterceptMethod m);
InterceptMethod parse_intercept_method(const std::string& text);

/// Per-mode recursion scalars; alpha + beta < 1.
struct ModeCorr {
  double alpha = 0.0;
  double beta = 0.0;
};
using CorrParams = std::vector<ModeCorr>;

struct Intercepts {
  std::vector<Matrix> c;                // C_k, one per mode
  std::vector<double> shrink_intensity;  // zero for the sample method
};

/// Full parameter set: per-entry GARCH (vec order), intercepts, mode scalars.
struct TdccModel {
  Dims dims;
  std::vector<GarchParams> garch;
  std::vector<Matrix> intercepts;
  CorrParams corr;

  /// Throws if lengths or orders are inconsistent or a stationarity bound fails.
  void validate() const;
};

/// Quasi-correlations Q_k and correlations R_k of every mode at one time point.
struct CorrState {
  std::vector<Matrix> q;
  std::vector<Matrix> r;

  /// Rescales Q to unit diagonal; fails with FilterBreakdown on q_ii <= 0.
  static CorrState from_q(std::vector<Matrix> q);
};

/// Conditional moments at time t: per-entry variances and quasi-correlations.
struct TdccState {
  Tensor sigma2;
  std::vector<Matrix> q;
};

struct ModeCovariance {
  Matrix s;  // S_k = D_k R_k D_k
  Matrix u;  // U_1 = S_1, U_k = S_k / tr(S_k) for later modes
};

// ---------------------------------------------------------------------------
// Building blocks

/// e = x / sigma entrywise for every t.
std::vector<Tensor> devolatilize(std::span<const Tensor> x, std::span<const Tensor> sigma2);

/// C_k = (1/T) sum_t (N_k/N) mat_k(E_t) mat_k(E_t)', or its linear-shrinkage
/// counterpart over the T N_{-k} column samples.
Intercepts estimate_intercepts(std::span<const Tensor> e, InterceptMethod method);

/// One step of the mode-wise quasi-correlation recursion driven by e_{t-1}.
std::vector<Matrix> advance_q(std::span<const Matrix> q, std::span<const Matrix> c,
                              const CorrParams& corr, const Tensor& e_prev);

/// Correlation states for t = 1..T, starting from Q_1 = q_init.
std::vector<CorrState> corr_filter(std::span<const Tensor> e, std::span<const Matrix> c,
                                   const CorrParams& corr, std::vector<Matrix> q_init);

/// Correlation part of the Gaussian quasi-likelihood, evaluated through mode
/// products and mode-wise Cholesky factors (no N x N matrices).
double corr_loglik(std::span<const Tensor> e, std::span<const CorrState> states);

struct CorrFitResult {
  CorrParams params;
  double objective = 0.0;        // L_c at the optimum
  double start_objective = 0.0;  // L_c at alpha=0.05, beta=0.90 per mode
  std::size_t evals = 0;
  bool converged = false;
};

/// Maximises L_c over (alpha_k, beta_k) with the intercepts held fixed.
CorrFitResult fit_correlation(std::span<const Tensor> e, std::span<const Matrix> c);

/// s_jj for j = 1..N_k: sums of sigma2 over every index but mode k.
Vector mode_variance_diag(const Tensor& sigma2, std::size_t mode);

/// y_t: sum of every entry variance.
double trace_process(const Tensor& sigma2);

ModeCovariance mode_covariance(const Tensor& sigma2, const CorrState& state, std::size_t mode);

/// Sigma = D (R_K ⊗ ... ⊗ R_1) D with D = diag(sigma) in vec order.
Matrix assemble_sigma(const Tensor& sigma2, const CorrState& state);

// ---------------------------------------------------------------------------
// Two-step estimation and filtering

struct FitOptions {
  InterceptMethod intercept = InterceptMethod::Sample;
  /// Store every CorrState of the in-sample path (memory: T * sum_k N_k^2).
  bool keep_states = false;
  std::size_t threads = default_threads();
};

struct FitDiagnostics {
  std::size_t garch_not_converged = 0;
  double volatility_loglik = 0.0;  // L_v
  double corr_loglik = 0.0;        // L_c
  double corr_start_loglik = 0.0;
  std::size_t corr_evals = 0;
  bool corr_converged = false;
  std::vector<double> intercept_diag_gap;  // max |diag(C_k) - 1|
  std::vector<double> shrink_intensity;
  /// Max relative gap between per-entry sigma and the mode-product form of D_t.
  double d_form_gap = 0.0;
};

struct TdccFit {
  TdccModel model;
  std::vector<GarchFit> garch;   // vec order
  std::vector<Tensor> sigma2;    // t = 1..T
  std::vector<Tensor> e;         // devolatilised series
  TdccState initial;             // state at t = 1
  TdccState last;                // state at t = T
  Tensor last_x;
  std::vector<CorrState> states;  // filled when keep_states
  FitDiagnostics diagnostics;
};

/// Step 1 only: one GARCH fit per entry, in vec order.
std::vector<GarchFit> fit_volatility(std::span<const Tensor> x, std::size_t threads = default_threads());

/// Step 2 given Step 1 results (lets several methods share one volatility fit).
TdccFit fit_from_volatility(std::span<const Tensor> x, std::vector<GarchFit> garch, const FitOptions& opts = {});

/// Both steps. Requires T >= 50.
TdccFit two_step_fit(std::span<const Tensor> x, const FitOptions& opts = {});

/// sigma2_1 = per-entry sample variance of x, Q_1 = C_k.
TdccState initial_state(const TdccModel& model, std::span<const Tensor> x);

/// Advances variances and quasi-correlations one step using the observation x_t.
TdccState advance(const TdccModel& model, const TdccState& state, const Tensor& x);

using StateVisitor = std::function<void(std::size_t t, const Tensor& sigma2, const CorrState& corr)>;

/// Runs the filter over x from `init`, calling visit for t = 0..T-1 before
/// consuming x_t. Returns the state after the last observation (time T+1).
TdccState filter(const TdccModel& model, std::span<const Tensor> x, const TdccState& init,
                 const StateVisitor& visit = {});

/// In-sample states of a fit (re-filtered; used when states were not kept).
void for_each_state(const TdccFit& fit, const StateVisitor& visit);

/// L_T = L_v + L_c of `model` on x, filtered from initial_state(model, x).
double loglik(const TdccModel& model, std::span<const Tensor> x);

struct Forecast {
  Tensor sigma2;
  CorrState corr;
  Matrix sigma;
};

/// Conditional moments for T+1 given the state at T and the observation x_T.
Forecast forecast_from_state(const TdccModel& model, const TdccState& state_t, const Tensor& x_t);
Forecast forecast_one_step(const TdccFit& fit);
/// Filters x with the model from initial_state and forecasts T+1.
Forecast forecast_one_step(const TdccModel& model, std::span<const Tensor> x);

}  // namespace tdcc
