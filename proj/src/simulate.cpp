#include "tdcc/simulate.hpp"

#include "tdcc/error.hpp"
#include "tdcc/parallel.hpp"

#include <boost/random/normal_distribution.hpp>
#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <map>

namespace tdcc {

namespace {

constexpr const char* kModule = "simulate";

Eigen::LLT<Matrix> checked_llt(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPd, kModule, fmt::format("{} is singular or not positive definite", what));
  }
  return llt;
}

double trace_of_inverse(const Matrix& m, const char* what) {
  auto llt = checked_llt(m, what);
  Matrix linv = Matrix::Identity(m.rows(), m.cols());
  llt.matrixL().solveInPlace(linv);
  return linv.squaredNorm();
}

}  // namespace

Tensor sample_standard_tensor_normal(const Dims& dims, Philox& rng) {
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  Tensor z(dims);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return z;
}

Tensor sample_tensor_normal(std::span<const Matrix> u, Philox& rng) {
  std::vector<std::size_t> sizes;
  for (const Matrix& m : u) {
    if (m.rows() != m.cols()) throw Error(ErrorCode::ShapeMismatch, kModule, "mode covariances must be square");
    sizes.push_back(static_cast<std::size_t>(m.rows()));
  }
  Tensor x = sample_standard_tensor_normal(Dims(std::move(sizes)), rng);
  for (std::size_t k = 0; k < u.size(); ++k) {
    Matrix root;
    try {
      root = sym_sqrt(u[k]);
    } catch (const Error& err) {
      throw Error(ErrorCode::NotPsd, kModule, fmt::format("U of mode {} is not PSD: {}", k + 1, err.what()));
    }
    x = mode_product(x, root, k);
  }
  return x;
}

SimPath simulate_tdcc(const SimConfig& cfg, std::size_t replication) {
  const TdccModel& m = cfg.model;
  m.validate();
  if (cfg.T < 1) throw Error(ErrorCode::InvalidArgument, kModule, "T must be at least 1");
  const Dims& d = m.dims;
  const std::size_t order = d.order();
  Philox rng(cfg.seed + replication);

  Tensor sigma2(d);
  for (std::size_t i = 0; i < d.total(); ++i) sigma2[i] = m.garch[i].unconditional_variance();
  std::vector<Matrix> q = m.intercepts;

  SimPath path;
  path.x.reserve(cfg.T);
  path.sigma2.reserve(cfg.T);
  path.u.reserve(cfg.T);
  const std::size_t steps = cfg.burn_in + cfg.T;
  for (std::size_t s = 0; s < steps; ++s) {
    const CorrState corr = CorrState::from_q(q);
    std::vector<Matrix> u(order);
    for (std::size_t k = 0; k < order; ++k) u[k] = mode_covariance(sigma2, corr, k).u;
    Tensor x;
    try {
      x = sample_tensor_normal(u, rng);
    } catch (const Error& err) {
      throw Error(err.code(), kModule, fmt::format("step {}: {}", s + 1, err.what()));
    }
    if (s >= cfg.burn_in) {
      path.x.push_back(x);
      path.sigma2.push_back(sigma2);
      path.u.push_back(std::move(u));
    }
    Tensor e(d);
    Tensor next(d);
    for (std::size_t i = 0; i < d.total(); ++i) {
      const GarchParams& p = m.garch[i];
      e[i] = x[i] / std::sqrt(sigma2[i]);
      next[i] = p.omega + p.a * x[i] * x[i] + p.b * sigma2[i];
    }
    q = advance_q(q, m.intercepts, m.corr, e);
    sigma2 = std::move(next);
  }
  return path;
}

Matrix equicorrelation(std::size_t n, double c) {
  if (!(c > -1.0 / static_cast<double>(std::max<std::size_t>(n, 2) - 1) && c < 1.0) && n > 1) {
    throw Error(ErrorCode::InvalidArgument, kModule, fmt::format("equicorrelation {} is not positive definite", c));
  }
  const auto k = static_cast<Eigen::Index>(n);
  Matrix m = Matrix::Constant(k, k, c);
  m.diagonal().setOnes();
  return m;
}

TdccModel make_truth(const Dims& dims, std::vector<Matrix> intercepts, const GarchParams& garch, const ModeCorr& corr) {
  TdccModel m;
  m.dims = dims;
  m.garch.assign(dims.total(), garch);
  m.intercepts = std::move(intercepts);
  m.corr.assign(dims.order(), corr);
  m.validate();
  return m;
}

double loss(const Matrix& sigma_hat, const Matrix& sigma_true) {
  if (sigma_hat.rows() != sigma_hat.cols() || sigma_true.rows() != sigma_true.cols() ||
      sigma_hat.rows() != sigma_true.rows()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "loss needs two square matrices of the same order");
  }
  const auto n = static_cast<double>(sigma_hat.rows());
  auto llt = checked_llt(sigma_hat, "estimated covariance");
  auto llt_true = checked_llt(sigma_true, "true covariance");
  // tr(H S H) = ||H L||_F^2 with S = L L'.
  Matrix hl = llt.solve(Matrix(llt_true.matrixL()));
  const double num = hl.squaredNorm() / n;
  const double den = trace_of_inverse(sigma_hat, "estimated covariance") / n;
  const double inv_true = trace_of_inverse(sigma_true, "true covariance") / n;
  return num / (den * den) - 1.0 / inv_true;
}

double structured_loss(const KronEstimate& est, std::span<const Matrix> u_true) {
  const Dims& d = est.dims;
  const std::size_t n = d.total();
  if (est.r.size() != d.order() || static_cast<std::size_t>(est.sd.size()) != n || est.perm.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "estimate does not match its dims");
  }
  std::vector<Matrix> lt;
  double inv_true = 1.0;
  std::size_t n_true = 1;
  for (const Matrix& u : u_true) {
    auto llt = checked_llt(u, "true mode covariance");
    lt.push_back(llt.matrixL());
    inv_true *= trace_of_inverse(u, "true mode covariance");
    n_true *= static_cast<std::size_t>(u.rows());
  }
  if (n_true != n) throw Error(ErrorCode::ShapeMismatch, kModule, "true covariance has the wrong order");
  const Matrix l_true = kron_chain(lt);

  std::vector<Matrix> lr;
  std::vector<Vector> rinv_diag;
  for (const Matrix& r : est.r) {
    auto llt = checked_llt(r, "estimated correlation");
    Matrix inv = llt.solve(Matrix::Identity(r.rows(), r.cols()));
    rinv_diag.push_back(inv.diagonal());
    lr.push_back(llt.matrixL());
  }
  if ((est.sd.array() <= 0.0).any()) throw Error(ErrorCode::NotPd, kModule, "estimated variances must be positive");
  const Vector inv_sd = est.sd.cwiseInverse();

  // B = H L_true column by column, with the columns as a trailing batch mode.
  std::vector<std::size_t> sizes = d.sizes();
  sizes.push_back(n);
  Tensor b{Dims(sizes)};
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::Map<Matrix> bm(b.data().data(), ni, ni);
  for (Eigen::Index p = 0; p < ni; ++p) {
    bm.row(p) = l_true.row(static_cast<Eigen::Index>(est.perm[static_cast<std::size_t>(p)])) * inv_sd[p];
  }
  for (std::size_t k = 0; k < d.order(); ++k) mode_solve_lower(b, lr[k], k);
  for (std::size_t k = 0; k < d.order(); ++k) mode_solve_lower(b, lr[k], k, true);
  bm = inv_sd.asDiagonal() * bm;
  const double num = bm.squaredNorm() / static_cast<double>(n);

  // tr(H) = sum_p sd_p^{-2} prod_k (R_k^{-1})_{i_k i_k}.
  double tr_h = 0.0;
  std::vector<std::size_t> idx(d.order(), 0);
  for (std::size_t p = 0; p < n; ++p) {
    double v = inv_sd[static_cast<Eigen::Index>(p)] * inv_sd[static_cast<Eigen::Index>(p)];
    for (std::size_t k = 0; k < d.order(); ++k) v *= rinv_diag[k][static_cast<Eigen::Index>(idx[k])];
    tr_h += v;
    for (std::size_t k = 0; k < d.order(); ++k) {
      if (++idx[k] < d[k]) break;
      idx[k] = 0;
    }
  }
  const double den = tr_h / static_cast<double>(n);
  return num / (den * den) - static_cast<double>(n) / inv_true;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  if (cfg.replications == 0) throw Error(ErrorCode::InvalidArgument, kModule, "replications must be positive");
  if (cfg.horizons.empty() || cfg.methods.empty()) {
    throw Error(ErrorCode::InvalidArgument, kModule, "experiment needs at least one horizon and one method");
  }
  for (std::size_t T : cfg.horizons) {
    if (T < 50) throw Error(ErrorCode::InvalidArgument, kModule, fmt::format("horizon {} is below 50", T));
  }
  std::vector<Matrix> c = cfg.intercepts;
  if (c.empty()) {
    for (std::size_t k = 0; k < cfg.dims.order(); ++k) c.push_back(equicorrelation(cfg.dims[k], 0.3));
  }
  const TdccModel truth = make_truth(cfg.dims, c, cfg.garch, cfg.corr);

  ExperimentReport report;
  // Distinct methods actually fitted, after substituting LS for NLS.
  std::vector<MethodSpec> used;
  std::vector<std::size_t> used_index;
  std::map<std::string, std::size_t> seen;
  for (const MethodSpec& m : cfg.methods) {
    adapted_dims(cfg.dims, m);  // validates MDCC modes up front
    MethodSpec u = m;
    if (u.intercept == InterceptMethod::NonlinearShrinkage) {
      u.intercept = InterceptMethod::LinearShrinkage;
      report.substitutions.push_back(fmt::format("{} -> {}", m.name(), u.name()));
    }
    auto [it, inserted] = seen.emplace(u.name(), used.size());
    if (inserted) used.push_back(u);
    used_index.push_back(it->second);
  }

  const std::size_t H = cfg.horizons.size();
  const std::size_t M = used.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  // results[r][h * M + m]
  std::vector<std::vector<double>> results(cfg.replications, std::vector<double>(H * M, nan));
  std::vector<std::vector<std::string>> errors(cfg.replications, std::vector<std::string>(H * M));

  parallel_for(
      cfg.replications,
      [&](std::size_t r) {
        for (std::size_t h = 0; h < H; ++h) {
          const std::size_t T = cfg.horizons[h];
          SimConfig sc{truth, T, cfg.burn_in, cfg.seed, cfg.replications};
          std::vector<GarchFit> garch;
          SimPath path;
          try {
            path = simulate_tdcc(sc, r);
            garch = fit_volatility(path.x, 1);
          } catch (const Error& err) {
            for (std::size_t m = 0; m < M; ++m) errors[r][h * M + m] = err.what();
            continue;
          }
          for (std::size_t m = 0; m < M; ++m) {
            try {
              Adapted a = adapt(path.x, used[m]);
              FitOptions opts;
              opts.intercept = used[m].intercept;
              opts.threads = 1;
              TdccFit fit = fit_from_volatility(a.x, permute_entries(garch, a.perm), opts);
              double acc = 0.0;
              for_each_state(fit, [&](std::size_t t, const Tensor& s2, const CorrState& corr) {
                KronEstimate est{fit.model.dims, s2.data().cwiseSqrt(), corr.r, a.perm};
                acc += structured_loss(est, path.u[t]);
              });
              results[r][h * M + m] = acc / static_cast<double>(T);
            } catch (const Error& err) {
              errors[r][h * M + m] = err.what();
            }
          }
          if (progress) progress(r, T);
        }
      },
      cfg.threads);

  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
      const std::size_t m = used_index[i];
      CellReport cell;
      cell.requested = cfg.methods[i];
      cell.used = used[m];
      cell.T = cfg.horizons[h];
      double sum = 0.0;
      for (std::size_t r = 0; r < cfg.replications; ++r) {
        const double v = results[r][h * M + m];
        cell.losses.push_back(v);
        if (std::isfinite(v)) {
          sum += v;
          ++cell.completed;
        } else {
          cell.failures.push_back(fmt::format("replication {}: {}", r, errors[r][h * M + m]));
        }
      }
      cell.mean = cell.completed ? sum / static_cast<double>(cell.completed) : nan;
      if (cell.completed > 1) {
        double ss = 0.0;
        for (double v : cell.losses) {
          if (std::isfinite(v)) ss += (v - cell.mean) * (v - cell.mean);
        }
        cell.sd = std::sqrt(ss / static_cast<double>(cell.completed - 1));
      } else {
        cell.sd = nan;
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

std::string experiment_csv(const ExperimentReport& report) {
  std::string out = "method,T,mean_loss,sd_loss,n_completed\n";
  for (const CellReport& c : report.cells) {
    out += fmt::format("{},{},{:.6f},{:.6f},{}\n", c.requested.name(), c.T, c.mean, c.sd, c.completed);
  }
  return out;
}

}  // namespace tdcc
