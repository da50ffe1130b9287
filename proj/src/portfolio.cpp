#include "tdcc/portfolio.hpp"

#include "tdcc/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tdcc {

namespace {

constexpr const char* kModule = "portfolio";

Eigen::LLT<Matrix> checked_llt(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "covariance must be a non-empty square matrix");
  }
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPd, kModule, "covariance is singular or not positive definite");
  }
  return llt;
}

void check_mu(const Vector& mu, const Matrix& sigma) {
  if (mu.size() != sigma.rows()) throw Error(ErrorCode::ShapeMismatch, kModule, "mean and covariance sizes differ");
  if (!mu.allFinite()) throw Error(ErrorCode::InvalidArgument, kModule, "mean forecast has non-finite entries");
  if (mu.isZero(0.0)) throw Error(ErrorCode::InvalidArgument, kModule, "mean forecast is identically zero");
}

}  // namespace

std::string to_string(Objective o) { return o == Objective::MinVar ? "minvar" : "meanvar"; }

Objective parse_objective(const std::string& text) {
  if (text == "minvar") return Objective::MinVar;
  if (text == "meanvar") return Objective::MeanVar;
  throw Error(ErrorCode::Parse, kModule, fmt::format("unknown objective '{}' (minvar|meanvar)", text));
}

double simplex_kkt_residual(const Matrix& g_mat, const Vector& g_vec, const Vector& w) {
  const Vector grad = g_mat * w + g_vec;
  const double nu = -w.dot(grad);
  const double scale = std::max({std::abs(nu), grad.cwiseAbs().maxCoeff(), 1e-300});
  double res = std::abs(w.sum() - 1.0);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    res = std::max(res, std::abs(std::min(w[i], (grad[i] + nu) / scale)));
  }
  return res;
}

QpResult simplex_qp(const Matrix& g_mat, const Vector& g_vec, double tol) {
  const Eigen::Index n = g_mat.rows();
  if (g_mat.cols() != n || g_vec.size() != n || n == 0) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "QP data must be n x n and n");
  }
  Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  std::vector<bool> active(static_cast<std::size_t>(n), false);
  const std::size_t max_iter = 50 * static_cast<std::size_t>(n) + 100;
  bool at_min = false;

  QpResult out;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    out.iterations = iter + 1;
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) free.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(free.size());
    const Vector grad = g_mat * w + g_vec;
    Matrix gff(m, m);
    Vector gf(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      gf[i] = grad[free[i]];
      for (Eigen::Index j = 0; j < m; ++j) gff(i, j) = g_mat(free[i], free[j]);
    }
    Eigen::LLT<Matrix> llt(gff);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPd, kModule, "QP Hessian is not positive definite");
    // Equality-constrained step: p = -G^{-1}(grad + lam 1) with 1'p = 0.
    const Vector ginv_grad = llt.solve(gf);
    const Vector ginv_one = llt.solve(Vector::Ones(m));
    const double lam = -ginv_grad.sum() / ginv_one.sum();
    const Vector p = -(ginv_grad + lam * ginv_one);

    if (at_min || p.cwiseAbs().maxCoeff() <= 1e-14) {
      // Bound multipliers mu_i = grad_i + lam must be nonnegative.
      const double scale = std::max({std::abs(lam), grad.cwiseAbs().maxCoeff(), 1e-300});
      Eigen::Index release = -1;
      double worst = -1e-13 * scale;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!active[static_cast<std::size_t>(i)]) continue;
        const double mult = grad[i] + lam;
        if (mult < worst) {
          worst = mult;
          release = i;
        }
      }
      if (release < 0) {
        out.w = w;
        out.kkt_residual = simplex_kkt_residual(g_mat, g_vec, w);
        if (out.kkt_residual > tol) {
          throw Error(ErrorCode::NoConvergence, kModule,
                      fmt::format("active-set QP stopped with KKT residual {:.3e}", out.kkt_residual));
        }
        return out;
      }
      active[static_cast<std::size_t>(release)] = false;
      at_min = false;
      continue;
    }

    double alpha = 1.0;
    Eigen::Index block = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (p[i] < 0.0) {
        const double ratio = -w[free[i]] / p[i];
        if (ratio < alpha) {
          alpha = ratio;
          block = free[i];
        }
      }
    }
    for (Eigen::Index i = 0; i < m; ++i) w[free[i]] += alpha * p[i];
    if (block >= 0) {
      w[block] = 0.0;
      active[static_cast<std::size_t>(block)] = true;
      at_min = false;
    } else {
      at_min = true;
    }
  }
  throw Error(ErrorCode::NoConvergence, kModule,
              fmt::format("active-set QP hit the iteration cap; KKT residual {:.3e}",
                          simplex_kkt_residual(g_mat, g_vec, w)));
}

Vector minvar_unconstrained(const Matrix& sigma) {
  auto llt = checked_llt(sigma);
  const Vector s1 = llt.solve(Vector::Ones(sigma.rows()));
  return s1 / s1.sum();
}

QpResult minvar_constrained(const Matrix& sigma) {
  const Vector wu = minvar_unconstrained(sigma);
  const Vector zero = Vector::Zero(sigma.rows());
  if (wu.minCoeff() >= 0.0) {
    return QpResult{wu, simplex_kkt_residual(sigma, zero, wu), 0};
  }
  return simplex_qp(sigma, zero);
}

double meanvar_objective(const Vector& w, const Vector& mu, const Matrix& sigma) {
  return w.dot(mu) / w.dot(sigma * w);
}

Vector meanvar_unconstrained(const Vector& mu, const Matrix& sigma) {
  check_mu(mu, sigma);
  auto llt = checked_llt(sigma);
  const Vector s1 = llt.solve(Vector::Ones(sigma.rows()));
  const Vector sm = llt.solve(mu);
  const double a = s1.sum();
  const double b = sm.sum();
  const double c = mu.dot(sm);
  const Vector minvar = s1 / a;
  if (a * c - b * b <= 1e-12 * a * c) return minvar;  // mu ∝ 1

  // f(lambda) = (c - lambda b)(b - lambda a) / (c - 2 lambda b + lambda^2 a);
  // f'(lambda) ∝ (ac - b^2)(a lambda^2 - c), limit b as lambda -> infinity.
  Vector best = minvar;
  double best_f = meanvar_objective(minvar, mu, sigma);
  for (double sign : {-1.0, 1.0}) {
    const double lambda = sign * std::sqrt(c / a);
    const Vector v = sm - lambda * s1;
    const double total = v.sum();
    if (std::abs(total) <= 1e-14 * v.cwiseAbs().sum()) continue;
    const Vector w = v / total;
    const double f = meanvar_objective(w, mu, sigma);
    if (f > best_f) {
      best_f = f;
      best = w;
    }
  }
  return best;
}

double meanvar_stationarity(const Vector& w, const Vector& mu, const Matrix& sigma) {
  const Vector sw = sigma * w;
  const double q = w.dot(sw);
  const double f = w.dot(mu) / q;
  Vector grad = mu / q - 2.0 * f / q * sw;
  grad.array() -= grad.mean();
  const double scale = std::abs(f) > 0.0 ? std::abs(f) / w.cwiseAbs().maxCoeff() : 1.0;
  return grad.cwiseAbs().maxCoeff() / scale;
}

Vector meanvar_gradient_ascent(const Vector& mu, const Matrix& sigma, std::size_t max_iter) {
  check_mu(mu, sigma);
  Vector w = minvar_unconstrained(sigma);
  double f = meanvar_objective(w, mu, sigma);
  double step = 1.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const Vector sw = sigma * w;
    const double q = w.dot(sw);
    Vector grad = mu / q - 2.0 * f / q * sw;
    grad.array() -= grad.mean();
    const double gnorm2 = grad.squaredNorm();
    if (gnorm2 <= 1e-30 * std::max(1.0, f * f)) break;
    step *= 2.0;
    bool moved = false;
    while (step > 1e-20) {
      const Vector trial = w + step * grad;
      const double ft = meanvar_objective(trial, mu, sigma);
      if (ft >= f + 1e-4 * step * gnorm2) {
        w = trial;
        f = ft;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return w;
}

QpResult meanvar_constrained(const Vector& mu, const Matrix& sigma) {
  check_mu(mu, sigma);
  checked_llt(sigma);
  const Eigen::Index n = sigma.rows();
  // Best vertex: objective mu_i / Sigma_ii.
  Eigen::Index vertex = 0;
  for (Eigen::Index i = 1; i < n; ++i) {
    if (mu[i] / sigma(i, i) > mu[vertex] / sigma(vertex, vertex)) vertex = i;
  }
  if (mu.maxCoeff() <= 0.0) {
    // w'Sigma w / (-mu'w) is quasi-convex, so the ratio peaks at a vertex.
    Vector w = Vector::Zero(n);
    w[vertex] = 1.0;
    return QpResult{w, 0.0, 0};
  }
  const Vector wu = meanvar_unconstrained(mu, sigma);
  if (wu.minCoeff() >= 0.0) return QpResult{wu, meanvar_stationarity(wu, mu, sigma), 0};

  // Dinkelbach: theta <- f(argmax_w mu'w - theta w'Sigma w) on the simplex.
  double theta = mu[vertex] / sigma(vertex, vertex);
  QpResult best;
  best.w = Vector::Zero(n);
  best.w[vertex] = 1.0;
  for (int it = 0; it < 100; ++it) {
    QpResult r = simplex_qp(2.0 * theta * sigma, -mu);
    const double f = meanvar_objective(r.w, mu, sigma);
    const double gap = r.w.dot(mu) - theta * r.w.dot(sigma * r.w);
    if (f >= meanvar_objective(best.w, mu, sigma)) best = r;
    if (gap <= 1e-15 * std::max(1.0, std::abs(r.w.dot(mu))) || f <= theta) {
      best.iterations = static_cast<std::size_t>(it + 1);
      return best;
    }
    theta = f;
  }
  throw Error(ErrorCode::NoConvergence, kModule, "ratio maximisation did not converge");
}

BacktestReport evaluate(std::span<const Vector> returns_realized, std::span<const Vector> weights,
                        double periods_per_year) {
  if (returns_realized.size() != weights.size()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "returns and weights have different lengths");
  }
  if (returns_realized.size() < 2) throw Error(ErrorCode::InvalidArgument, kModule, "evaluation needs T_test >= 2");
  if (!(periods_per_year > 0.0)) throw Error(ErrorCode::InvalidArgument, kModule, "annualization must be positive");
  BacktestReport rep;
  rep.weights.assign(weights.begin(), weights.end());
  for (std::size_t t = 0; t < weights.size(); ++t) {
    if (weights[t].size() != returns_realized[t].size()) {
      throw Error(ErrorCode::ShapeMismatch, kModule, fmt::format("weight length mismatch at test point {}", t + 1));
    }
    rep.returns.push_back(weights[t].dot(returns_realized[t]));
    rep.test_index.push_back(t);
  }
  const auto n = static_cast<double>(rep.returns.size());
  const double mean = std::accumulate(rep.returns.begin(), rep.returns.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : rep.returns) ss += (r - mean) * (r - mean);
  const auto [lo, hi] = std::minmax_element(rep.returns.begin(), rep.returns.end());
  const double sd = *lo == *hi ? 0.0 : std::sqrt(ss / (n - 1.0));
  rep.av = periods_per_year * mean;
  rep.sd = std::sqrt(periods_per_year) * sd;
  if (rep.sd > 0.0) rep.ir = rep.av / rep.sd;
  return rep;
}

BacktestReport rolling_backtest(std::span<const Tensor> x, const BacktestConfig& cfg) {
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, kModule, "empty return series");
  const std::size_t T = x.size();
  const std::size_t W = cfg.train_window;
  if (W < 50) throw Error(ErrorCode::InvalidArgument, kModule, "training window must be at least 50");
  if (W + 1 > T) {
    throw Error(ErrorCode::InvalidArgument, kModule,
                fmt::format("need T_train + 1 <= T (T_train={}, T={})", W, T));
  }
  if (cfg.stride < 1) throw Error(ErrorCode::InvalidArgument, kModule, "stride must be at least 1");
  const std::size_t n_test = T - W;
  if (!cfg.mu.empty() && cfg.mu.size() != n_test) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "one mean forecast per test point required");
  }
  const Dims source = x.front().dims();
  const auto n = static_cast<Eigen::Index>(source.total());
  const Adapted a = adapt(x, cfg.method);
  bool identity = true;
  for (std::size_t p = 0; p < a.perm.size(); ++p) identity = identity && a.perm[p] == p;

  FitOptions opts;
  opts.intercept = cfg.method.intercept;
  opts.threads = cfg.threads;

  BacktestReport rep;
  rep.stride = cfg.stride;
  std::vector<Vector> realized;
  std::vector<Vector> weights;
  Vector previous = Vector::Constant(n, 1.0 / static_cast<double>(n));

  bool have_model = false;
  TdccModel model;
  TdccState state;
  Tensor last_x;
  Vector window_mean;  // adapted order

  for (std::size_t i = 0; i < n_test; ++i) {
    const std::size_t t0 = W + i;
    Vector w;
    try {
      if (i % cfg.stride == 0) {
        have_model = false;
        window_mean = Vector::Zero(n);
        for (std::size_t t = t0 - W; t < t0; ++t) window_mean += a.x[t].data();
        window_mean /= static_cast<double>(W);
        std::vector<Tensor> window;
        window.reserve(W);
        for (std::size_t t = t0 - W; t < t0; ++t) {
          window.emplace_back(a.x[t].dims(), Vector(a.x[t].data() - window_mean));
        }
        TdccFit fit = two_step_fit(window, opts);
        ++rep.refits;
        model = std::move(fit.model);
        state = std::move(fit.last);
        last_x = std::move(fit.last_x);
        have_model = true;
      } else if (have_model) {
        state = advance(model, state, last_x);
        last_x = Tensor(a.x[t0 - 1].dims(), Vector(a.x[t0 - 1].data() - window_mean));
      }
      if (!have_model) throw Error(ErrorCode::NoConvergence, kModule, "no fitted model since the last refit");

      const Forecast f = forecast_from_state(model, state, last_x);
      const Matrix sigma = identity ? f.sigma : to_source_order(f.sigma, a.perm);
      if (cfg.objective == Objective::MinVar) {
        w = cfg.constrained ? minvar_constrained(sigma).w : minvar_unconstrained(sigma);
      } else {
        Vector mu;
        if (!cfg.mu.empty()) {
          mu = cfg.mu[i];
        } else {
          mu = Vector::Zero(n);
          for (std::size_t t = t0 - W; t < t0; ++t) mu += x[t].data();
          mu /= static_cast<double>(W);
        }
        w = cfg.constrained ? meanvar_constrained(mu, sigma).w : meanvar_unconstrained(mu, sigma);
      }
      if (!w.allFinite()) throw Error(ErrorCode::NoConvergence, kModule, "non-finite weights");
      previous = w;
    } catch (const Error& err) {
      if (i % cfg.stride != 0) have_model = false;
      ++rep.fallbacks;
      rep.fallback_messages.push_back(fmt::format("test point {}: {}", t0, err.what()));
      w = previous;
    }
    weights.push_back(w);
    realized.push_back(x[t0].data());
  }

  BacktestReport ev = evaluate(realized, weights, cfg.periods_per_year);
  rep.weights = std::move(ev.weights);
  rep.returns = std::move(ev.returns);
  rep.av = ev.av;
  rep.sd = ev.sd;
  rep.ir = ev.ir;
  for (std::size_t i = 0; i < n_test; ++i) rep.test_index.push_back(W + i);
  return rep;
}

std::string backtest_csv(const BacktestReport& report, const Dims& dims, const std::vector<std::string>& dates) {
  std::string out = dates.empty() ? "index" : "date";
  out += ",return";
  for (std::size_t k = 0; k < dims.order(); ++k) {
    for (std::size_t j = 0; j < dims[k]; ++j) out += fmt::format(",w_m{}_{}", k + 1, j + 1);
  }
  out += '\n';
  for (std::size_t t = 0; t < report.returns.size(); ++t) {
    const std::size_t idx = report.test_index.at(t);
    out += dates.empty() ? std::to_string(idx + 1) : dates.at(idx);
    out += fmt::format(",{:.10g}", report.returns[t]);
    const Tensor w(dims, report.weights[t]);
    for (std::size_t k = 0; k < dims.order(); ++k) {
      const Vector agg = mode_variance_diag(w, k);
      for (Eigen::Index j = 0; j < agg.size(); ++j) out += fmt::format(",{:.10g}", agg[j]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace tdcc
