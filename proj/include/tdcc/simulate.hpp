#pragma once

#include "tdcc/baselines.hpp"
#include "tdcc/engine.hpp"
#include "tdcc/rng.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tdcc {

struct SimConfig {
  TdccModel model;
  std::size_t T = 500;
  std::size_t burn_in = 200;
  std::uint64_t seed = 0;
  std::size_t replications = 1;
};

/// A simulated path with its true conditional moments.
struct SimPath {
  std::vector<Tensor> x;
  std::vector<Tensor> sigma2;            // per-entry GARCH variances
  std::vector<std::vector<Matrix>> u;    // U_kt per t, per mode
};

/// TN(0, I, ..., I): i.i.d. standard normal entries.
Tensor sample_standard_tensor_normal(const Dims& dims, Philox& rng);

/// Z ×_1 U_1^{1/2} ×_2 ... ×_K U_K^{1/2} with Z ~ TN(0, I, ..., I), so that
/// Cov(vec X) = U_K ⊗ ... ⊗ U_1.
Tensor sample_tensor_normal(std::span<const Matrix> u, Philox& rng);

/// Simulates cfg.T observations after cfg.burn_in discarded draws using the
/// generator Philox(cfg.seed + replication).
SimPath simulate_tdcc(const SimConfig& cfg, std::size_t replication = 0);

/// (1 - c) I + c 11'.
Matrix equicorrelation(std::size_t n, double c);

/// Truth model with common GARCH and mode-recursion parameters.
TdccModel make_truth(const Dims& dims, std::vector<Matrix> intercepts, const GarchParams& garch = {0.4, 0.05, 0.9},
                     const ModeCorr& corr = {0.05, 0.93});

/// [tr(H S H)/N] / [tr(H)/N]^2 - 1/[tr(S^{-1})/N] with H = sigma_hat^{-1}.
double loss(const Matrix& sigma_hat, const Matrix& sigma_true);

/// Estimated D (R_K ⊗ ... ⊗ R_1) D in an adapted vec order (see Adapted::perm).
struct KronEstimate {
  Dims dims;
  Vector sd;
  std::vector<Matrix> r;
  std::vector<std::size_t> perm;
};

/// loss() for a Kronecker-structured estimate against U_K ⊗ ... ⊗ U_1 given in
/// source order, without inverting N x N matrices.
double structured_loss(const KronEstimate& est, std::span<const Matrix> u_true);

struct ExperimentConfig {
  Dims dims{10, 11, 4};
  std::vector<std::size_t> horizons{500};
  std::vector<MethodSpec> methods;
  std::size_t replications = 100;
  std::uint64_t seed = 1;
  std::size_t burn_in = 200;
  std::vector<Matrix> intercepts;  // truth C_k; equicorrelation(0.3) when empty
  GarchParams garch{0.4, 0.05, 0.9};
  ModeCorr corr{0.05, 0.93};
  std::size_t threads = default_threads();
};

struct CellReport {
  MethodSpec requested;
  MethodSpec used;
  std::size_t T = 0;
  std::vector<double> losses;  // one per replication; NaN marks a failed fit
  double mean = 0.0;
  double sd = 0.0;
  std::size_t completed = 0;
  std::vector<std::string> failures;
};

struct ExperimentReport {
  std::vector<CellReport> cells;  // horizons outer, methods inner
  std::vector<std::string> substitutions;
};

using ProgressFn = std::function<void(std::size_t replication, std::size_t T)>;

/// Monte Carlo loss comparison. Replication r simulates with seed + r; every
/// method is fitted on the same path and scored by the average loss over the
/// in-sample Sigma_t.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// CSV with columns method,T,mean_loss,sd_loss,n_completed.
std::string experiment_csv(const ExperimentReport& report);

}  // namespace tdcc
