#include "tdcc/engine.hpp"

#include "tdcc/error.hpp"
#include "tdcc/optim.hpp"
#include "tdcc/shrinkage.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <optional>

namespace tdcc {

namespace {

constexpr const char* kModule = "tdcc";
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_series(std::span<const Tensor> x, const char* what) {
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, kModule, fmt::format("{} series is empty", what));
  for (const Tensor& t : x) {
    if (!(t.dims() == x.front().dims())) {
      throw Error(ErrorCode::ShapeMismatch, kModule, fmt::format("{} series has inconsistent dims", what));
    }
  }
}

// Cholesky factors of every R_k plus sum_k (N/N_k) log|R_k|; nullopt when some
// R_k is not positive definite.
struct CorrFactors {
  std::vector<Matrix> lower;
  double weighted_logdet = 0.0;
};

std::optional<CorrFactors> factor(const Dims& dims, const CorrState& state) {
  CorrFactors f;
  f.lower.reserve(state.r.size());
  const auto n = static_cast<double>(dims.total());
  for (std::size_t k = 0; k < state.r.size(); ++k) {
    Eigen::LLT<Matrix> llt(state.r[k]);
    if (llt.info() != Eigen::Success) return std::nullopt;
    Matrix l = llt.matrixL();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    if (!std::isfinite(logdet)) return std::nullopt;
    f.weighted_logdet += n / static_cast<double>(dims[k]) * logdet;
    f.lower.push_back(std::move(l));
  }
  return f;
}

// log|R_t| + e'R_t^{-1}e - e'e for R_t = R_K ⊗ ... ⊗ R_1.
double corr_term(const Tensor& e, const CorrFactors& f) {
  Tensor z = e;
  for (std::size_t k = 0; k < f.lower.size(); ++k) mode_solve_lower(z, f.lower[k], k);
  return f.weighted_logdet + z.data().squaredNorm() - e.data().squaredNorm();
}

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

CorrParams corr_from_unconstrained(const Eigen::VectorXd& v) {
  CorrParams p(static_cast<std::size_t>(v.size() / 2));
  for (std::size_t k = 0; k < p.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(2 * k);
    const double persistence = kMaxPersistence * logistic(v[i]);
    p[k].alpha = persistence * logistic(v[i + 1]);
    p[k].beta = std::max(0.0, persistence - p[k].alpha);
  }
  return p;
}

Eigen::VectorXd corr_to_unconstrained(const CorrParams& p) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(2 * p.size()));
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double persistence = p[k].alpha + p[k].beta;
    v[static_cast<Eigen::Index>(2 * k)] = logit(persistence / kMaxPersistence);
    v[static_cast<Eigen::Index>(2 * k + 1)] = logit(p[k].alpha / persistence);
  }
  return v;
}

// Scaled mode Gram matrices (N_k/N) mat_k(e) mat_k(e)'.
std::vector<Matrix> scaled_grams(const Tensor& e) {
  const Dims& d = e.dims();
  std::vector<Matrix> g(d.order());
  for (std::size_t k = 0; k < d.order(); ++k) {
    g[k] = mode_gram(e, k) * (static_cast<double>(d[k]) / static_cast<double>(d.total()));
  }
  return g;
}

void advance_q_with_grams(std::vector<Matrix>& q, std::span<const Matrix> c, const CorrParams& corr,
                          std::span<const Matrix> grams) {
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double a = corr[k].alpha;
    const double b = corr[k].beta;
    q[k] = (1.0 - a - b) * c[k] + a * grams[k] + b * q[k];
  }
}

void check_corr(const CorrParams& corr, std::size_t order) {
  if (corr.size() != order) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "correlation parameters must have one entry per mode");
  }
  for (std::size_t k = 0; k < corr.size(); ++k) {
    const auto& p = corr[k];
    if (!(p.alpha >= 0.0 && p.beta >= 0.0 && p.alpha + p.beta < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, kModule,
                  fmt::format("mode {} needs alpha, beta >= 0 and alpha + beta < 1", k + 1));
    }
  }
}

std::vector<double> entry_series(std::span<const Tensor> x, std::size_t offset) {
  std::vector<double> s(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) s[t] = x[t][offset];
  return s;
}

std::string entry_label(const Dims& dims, std::size_t offset) {
  std::string out = "(";
  for (std::size_t k = 0; k < dims.order(); ++k) {
    if (k) out += ',';
    out += std::to_string(offset % dims[k] + 1);
    offset /= dims[k];
  }
  return out + ")";
}

// Max relative gap between sigma and y^{-(K-1)/2} prod_k sqrt(s_{i_k,k}).
double product_form_gap(const Tensor& sigma2) {
  const Dims& d = sigma2.dims();
  const std::size_t order = d.order();
  if (order == 1) return 0.0;
  std::vector<Vector> s(order);
  for (std::size_t k = 0; k < order; ++k) s[k] = mode_variance_diag(sigma2, k).cwiseSqrt();
  const double scale = std::pow(trace_process(sigma2), -0.5 * static_cast<double>(order - 1));
  std::vector<std::size_t> idx(order, 0);
  double gap = 0.0;
  for (std::size_t off = 0; off < d.total(); ++off) {
    double prod = scale;
    for (std::size_t k = 0; k < order; ++k) prod *= s[k][static_cast<Eigen::Index>(idx[k])];
    const double sigma = std::sqrt(sigma2[off]);
    gap = std::max(gap, std::abs(prod - sigma) / sigma);
    for (std::size_t k = 0; k < order; ++k) {
      if (++idx[k] < d[k]) break;
      idx[k] = 0;
    }
  }
  return gap;
}

}  // namespace

std::string to_string(InterceptMethod m) {
  switch (m) {
    case InterceptMethod::Sample: return "sample";
    case InterceptMethod::LinearShrinkage: return "ls";
    case InterceptMethod::NonlinearShrinkage: return "nls";
  }
  return "sample";
}

InterceptMethod parse_intercept_method(const std::string& text) {
  if (text == "sample" || text == "s") return InterceptMethod::Sample;
  if (text == "ls" || text == "linear_shrinkage") return InterceptMethod::LinearShrinkage;
  if (text == "nls" || text == "nonlinear_shrinkage") return InterceptMethod::NonlinearShrinkage;
  throw Error(ErrorCode::Parse, kModule, fmt::format("unknown intercept method '{}' (sample|ls)", text));
}

void TdccModel::validate() const {
  if (garch.size() != dims.total()) {
    throw Error(ErrorCode::ShapeMismatch, kModule,
                fmt::format("model has {} GARCH entries for N={}", garch.size(), dims.total()));
  }
  if (intercepts.size() != dims.order()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "model needs one intercept matrix per mode");
  }
  for (std::size_t k = 0; k < intercepts.size(); ++k) {
    const auto nk = static_cast<Eigen::Index>(dims[k]);
    if (intercepts[k].rows() != nk || intercepts[k].cols() != nk) {
      throw Error(ErrorCode::ShapeMismatch, kModule, fmt::format("intercept {} has the wrong order", k + 1));
    }
  }
  check_corr(corr, dims.order());
  for (std::size_t i = 0; i < garch.size(); ++i) {
    if (!garch[i].valid()) {
      throw Error(ErrorCode::InvalidArgument, kModule,
                  fmt::format("GARCH parameters of entry {} violate positivity or stationarity",
                              entry_label(dims, i)));
    }
  }
}

CorrState CorrState::from_q(std::vector<Matrix> q) {
  CorrState s;
  s.r.reserve(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    const Vector d = q[k].diagonal();
    if ((d.array() <= 0.0).any() || !d.allFinite()) {
      throw Error(ErrorCode::FilterBreakdown, kModule,
                  fmt::format("quasi-correlation of mode {} has a nonpositive diagonal", k + 1));
    }
    const Vector inv = d.cwiseSqrt().cwiseInverse();
    Matrix r = inv.asDiagonal() * q[k] * inv.asDiagonal();
    r = symmetrize(r);
    r.diagonal().setOnes();
    s.r.push_back(std::move(r));
  }
  s.q = std::move(q);
  return s;
}

std::vector<Tensor> devolatilize(std::span<const Tensor> x, std::span<const Tensor> sigma2) {
  if (x.size() != sigma2.size()) throw Error(ErrorCode::ShapeMismatch, kModule, "series lengths differ");
  std::vector<Tensor> e;
  e.reserve(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (!(x[t].dims() == sigma2[t].dims())) throw Error(ErrorCode::ShapeMismatch, kModule, "dims differ");
    if ((sigma2[t].data().array() <= 0.0).any()) {
      throw Error(ErrorCode::InvalidArgument, kModule, fmt::format("nonpositive variance at t={}", t + 1));
    }
    e.emplace_back(x[t].dims(), Vector(x[t].data().array() / sigma2[t].data().array().sqrt()));
  }
  return e;
}

Intercepts estimate_intercepts(std::span<const Tensor> e, InterceptMethod method) {
  check_series(e, "devolatilised");
  const Dims& d = e.front().dims();
  Intercepts out;
  out.c.resize(d.order());
  out.shrink_intensity.assign(d.order(), 0.0);
  switch (method) {
    case InterceptMethod::Sample: {
      const double scale = 1.0 / static_cast<double>(e.size());
      for (std::size_t k = 0; k < d.order(); ++k) {
        const auto nk = static_cast<Eigen::Index>(d[k]);
        Matrix acc = Matrix::Zero(nk, nk);
        for (const Tensor& et : e) acc += mode_gram(et, k);
        out.c[k] = symmetrize(acc * (scale * static_cast<double>(d[k]) / static_cast<double>(d.total())));
      }
      break;
    }
    case InterceptMethod::LinearShrinkage: {
      for (std::size_t k = 0; k < d.order(); ++k) {
        LinearShrinkage acc(static_cast<Eigen::Index>(d[k]));
        for (const Tensor& et : e) acc.add_columns(unfold(et, k));
        ShrinkResult r = acc.finish();
        out.c[k] = symmetrize(r.matrix);
        out.shrink_intensity[k] = r.intensity;
      }
      break;
    }
    case InterceptMethod::NonlinearShrinkage:
      throw Error(ErrorCode::Unimplemented, "shrinkage", "nonlinear shrinkage is not implemented");
  }
  return out;
}

std::vector<Matrix> advance_q(std::span<const Matrix> q, std::span<const Matrix> c, const CorrParams& corr,
                              const Tensor& e_prev) {
  std::vector<Matrix> next(q.begin(), q.end());
  const std::vector<Matrix> grams = scaled_grams(e_prev);
  advance_q_with_grams(next, c, corr, grams);
  return next;
}

std::vector<CorrState> corr_filter(std::span<const Tensor> e, std::span<const Matrix> c, const CorrParams& corr,
                                   std::vector<Matrix> q_init) {
  check_series(e, "devolatilised");
  const Dims& d = e.front().dims();
  check_corr(corr, d.order());
  if (c.size() != d.order() || q_init.size() != d.order()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "need one intercept and one initial Q per mode");
  }
  std::vector<CorrState> states;
  states.reserve(e.size());
  states.push_back(CorrState::from_q(std::move(q_init)));
  for (std::size_t t = 1; t < e.size(); ++t) {
    states.push_back(CorrState::from_q(advance_q(states.back().q, c, corr, e[t - 1])));
  }
  return states;
}

double corr_loglik(std::span<const Tensor> e, std::span<const CorrState> states) {
  check_series(e, "devolatilised");
  if (e.size() != states.size()) throw Error(ErrorCode::ShapeMismatch, kModule, "one state per time point");
  const Dims& d = e.front().dims();
  double acc = 0.0;
  for (std::size_t t = 0; t < e.size(); ++t) {
    auto f = factor(d, states[t]);
    if (!f) throw Error(ErrorCode::NotPd, kModule, fmt::format("correlation matrix not PD at t={}", t + 1));
    acc += corr_term(e[t], *f);
  }
  return -acc / (2.0 * static_cast<double>(e.size()));
}

CorrFitResult fit_correlation(std::span<const Tensor> e, std::span<const Matrix> c) {
  check_series(e, "devolatilised");
  const Dims& d = e.front().dims();
  if (c.size() != d.order()) throw Error(ErrorCode::ShapeMismatch, kModule, "need one intercept per mode");
  const std::size_t T = e.size();

  // Cache the scaled Gram matrices when they fit in ~128 MB.
  std::size_t per_t = 0;
  for (std::size_t k = 0; k < d.order(); ++k) per_t += d[k] * d[k];
  std::vector<std::vector<Matrix>> grams;
  if (per_t * T <= (std::size_t{1} << 24)) {
    grams.reserve(T);
    for (const Tensor& et : e) grams.push_back(scaled_grams(et));
  }

  auto negloglik = [&](const CorrParams& params) {
    std::vector<Matrix> q(c.begin(), c.end());
    double acc = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      CorrState state;
      try {
        state = CorrState::from_q(q);
      } catch (const Error&) {
        return kInf;
      }
      auto f = factor(d, state);
      if (!f) return kInf;
      acc += corr_term(e[t], *f);
      if (t + 1 < T) {
        if (grams.empty()) {
          advance_q_with_grams(q, c, params, scaled_grams(e[t]));
        } else {
          advance_q_with_grams(q, c, params, grams[t]);
        }
      }
    }
    return acc / (2.0 * static_cast<double>(T));
  };

  const CorrParams start(d.order(), ModeCorr{0.05, 0.90});
  const double f0 = negloglik(start);
  if (!std::isfinite(f0)) {
    throw Error(ErrorCode::NotPd, kModule,
                "correlation likelihood undefined at the start point (intercept matrix not positive definite)");
  }
  optim::NelderMeadOptions opts;
  opts.ftol = 1e-8;
  opts.step = 0.5;
  opts.max_evals = 2000 * d.order();
  const auto res = optim::nelder_mead(
      [&](const Eigen::VectorXd& v) { return negloglik(corr_from_unconstrained(v)); },
      corr_to_unconstrained(start), opts);

  CorrFitResult out;
  out.params = corr_from_unconstrained(res.x);
  out.objective = -res.f;
  out.start_objective = -f0;
  out.evals = res.evals + 1;
  out.converged = res.converged;
  return out;
}

Vector mode_variance_diag(const Tensor& sigma2, std::size_t mode) {
  const Dims& d = sigma2.dims();
  if (mode >= d.order()) throw Error(ErrorCode::InvalidArgument, kModule, "mode out of range");
  const auto nk = static_cast<Eigen::Index>(d[mode]);
  const auto left = static_cast<Eigen::Index>(d.stride(mode));
  const auto right = static_cast<Eigen::Index>(d.total() / (d.stride(mode) * d[mode]));
  Vector s = Vector::Zero(nk);
  for (Eigen::Index r = 0; r < right; ++r) {
    Eigen::Map<const Matrix> slab(sigma2.data().data() + r * left * nk, left, nk);
    s += slab.colwise().sum().transpose();
  }
  return s;
}

double trace_process(const Tensor& sigma2) { return sigma2.data().sum(); }

ModeCovariance mode_covariance(const Tensor& sigma2, const CorrState& state, std::size_t mode) {
  if (mode >= state.r.size()) throw Error(ErrorCode::InvalidArgument, kModule, "mode out of range");
  const Vector dk = mode_variance_diag(sigma2, mode).cwiseSqrt();
  if (dk.size() != state.r[mode].rows()) throw Error(ErrorCode::ShapeMismatch, kModule, "state/dims mismatch");
  ModeCovariance out;
  out.s = symmetrize(dk.asDiagonal() * state.r[mode] * dk.asDiagonal());
  out.u = mode == 0 ? out.s : Matrix(out.s / out.s.trace());
  return out;
}

Matrix assemble_sigma(const Tensor& sigma2, const CorrState& state) {
  if (state.r.size() != sigma2.dims().order()) throw Error(ErrorCode::ShapeMismatch, kModule, "state/dims mismatch");
  for (std::size_t k = 0; k < state.r.size(); ++k) {
    Eigen::LLT<Matrix> llt(state.r[k]);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::NotPd, kModule, fmt::format("R of mode {} is not positive definite", k + 1));
    }
  }
  const Vector sd = sigma2.data().cwiseSqrt();
  Matrix sigma = kron_chain(state.r);
  sigma = sd.asDiagonal() * sigma * sd.asDiagonal();
  return symmetrize(sigma);
}

std::vector<GarchFit> fit_volatility(std::span<const Tensor> x, std::size_t threads) {
  check_series(x, "return");
  const Dims& d = x.front().dims();
  std::vector<GarchFit> fits(d.total());
  parallel_for(
      d.total(),
      [&](std::size_t i) {
        try {
          fits[i] = garch_fit(entry_series(x, i));
        } catch (const Error& err) {
          throw Error(err.code(), err.module(), fmt::format("entry {}: {}", entry_label(d, i), err.what()));
        }
      },
      threads);
  return fits;
}

TdccFit fit_from_volatility(std::span<const Tensor> x, std::vector<GarchFit> garch, const FitOptions& opts) {
  check_series(x, "return");
  const Dims& d = x.front().dims();
  if (garch.size() != d.total()) throw Error(ErrorCode::ShapeMismatch, kModule, "one GARCH fit per entry required");
  const std::size_t T = x.size();

  TdccFit fit;
  fit.sigma2.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    Tensor s2(d);
    for (std::size_t i = 0; i < d.total(); ++i) s2[i] = garch[i].sigma2_path.at(t);
    fit.sigma2.push_back(std::move(s2));
  }
  fit.e = devolatilize(x, fit.sigma2);

  Intercepts intercepts = estimate_intercepts(fit.e, opts.intercept);
  CorrFitResult corr;
  try {
    corr = fit_correlation(fit.e, intercepts.c);
  } catch (const Error& err) {
    throw Error(err.code(), err.module(), fmt::format("correlation step: {}", err.what()));
  }

  fit.model.dims = d;
  fit.model.garch.reserve(garch.size());
  for (const GarchFit& g : garch) fit.model.garch.push_back(g.params);
  fit.model.intercepts = intercepts.c;
  fit.model.corr = corr.params;

  FitDiagnostics& diag = fit.diagnostics;
  for (const GarchFit& g : garch) {
    diag.volatility_loglik += g.loglik;
    if (!g.converged) ++diag.garch_not_converged;
  }
  diag.corr_loglik = corr.objective;
  diag.corr_start_loglik = corr.start_objective;
  diag.corr_evals = corr.evals;
  diag.corr_converged = corr.converged;
  diag.shrink_intensity = intercepts.shrink_intensity;
  for (const Matrix& c : intercepts.c) {
    diag.intercept_diag_gap.push_back((c.diagonal().array() - 1.0).abs().maxCoeff());
  }

  fit.initial = TdccState{fit.sigma2.front(), intercepts.c};
  std::vector<Matrix> q = intercepts.c;
  if (opts.keep_states) fit.states.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    diag.d_form_gap = std::max(diag.d_form_gap, product_form_gap(fit.sigma2[t]));
    if (opts.keep_states) fit.states.push_back(CorrState::from_q(q));
    if (t + 1 < T) q = advance_q(q, intercepts.c, corr.params, fit.e[t]);
  }
  fit.last = TdccState{fit.sigma2.back(), std::move(q)};
  fit.last_x = x.back();
  fit.garch = std::move(garch);
  return fit;
}

TdccFit two_step_fit(std::span<const Tensor> x, const FitOptions& opts) {
  if (x.size() < 50) {
    throw Error(ErrorCode::InvalidArgument, kModule,
                fmt::format("two-step fit needs at least 50 observations, got {}", x.size()));
  }
  return fit_from_volatility(x, fit_volatility(x, opts.threads), opts);
}

TdccState initial_state(const TdccModel& model, std::span<const Tensor> x) {
  check_series(x, "return");
  if (!(x.front().dims() == model.dims)) throw Error(ErrorCode::ShapeMismatch, kModule, "data dims differ from model");
  Tensor s2(model.dims);
  for (std::size_t i = 0; i < model.dims.total(); ++i) {
    const double v = sample_variance(entry_series(x, i));
    if (!(v > 0.0)) {
      throw Error(ErrorCode::Degenerate, kModule,
                  fmt::format("entry {} has zero sample variance", entry_label(model.dims, i)));
    }
    s2[i] = v;
  }
  return TdccState{std::move(s2), model.intercepts};
}

TdccState advance(const TdccModel& model, const TdccState& state, const Tensor& x) {
  const Dims& d = model.dims;
  if (!(x.dims() == d) || !(state.sigma2.dims() == d)) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "observation dims differ from model");
  }
  TdccState next;
  next.sigma2 = Tensor(d);
  Tensor e(d);
  for (std::size_t i = 0; i < d.total(); ++i) {
    const GarchParams& p = model.garch[i];
    const double s2 = state.sigma2[i];
    e[i] = x[i] / std::sqrt(s2);
    next.sigma2[i] = p.omega + p.a * x[i] * x[i] + p.b * s2;
  }
  next.q = advance_q(state.q, model.intercepts, model.corr, e);
  return next;
}

TdccState filter(const TdccModel& model, std::span<const Tensor> x, const TdccState& init,
                 const StateVisitor& visit) {
  TdccState state = init;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (visit) visit(t, state.sigma2, CorrState::from_q(state.q));
    state = advance(model, state, x[t]);
  }
  return state;
}

void for_each_state(const TdccFit& fit, const StateVisitor& visit) {
  if (!fit.states.empty()) {
    for (std::size_t t = 0; t < fit.states.size(); ++t) visit(t, fit.sigma2[t], fit.states[t]);
    return;
  }
  std::vector<Matrix> q = fit.initial.q;
  for (std::size_t t = 0; t < fit.e.size(); ++t) {
    visit(t, fit.sigma2[t], CorrState::from_q(q));
    if (t + 1 < fit.e.size()) q = advance_q(q, fit.model.intercepts, fit.model.corr, fit.e[t]);
  }
}

double loglik(const TdccModel& model, std::span<const Tensor> x) {
  model.validate();
  const Dims& d = model.dims;
  double acc = 0.0;
  filter(model, x, initial_state(model, x), [&](std::size_t t, const Tensor& s2, const CorrState& corr) {
    const Vector& xv = x[t].data();
    acc += (s2.data().array().log() + xv.array().square() / s2.data().array()).sum();
    const Tensor e(d, Vector(xv.array() / s2.data().array().sqrt()));
    auto f = factor(d, corr);
    if (!f) throw Error(ErrorCode::NotPd, kModule, fmt::format("correlation matrix not PD at t={}", t + 1));
    acc += corr_term(e, *f);
  });
  return -acc / (2.0 * static_cast<double>(x.size()));
}

Forecast forecast_from_state(const TdccModel& model, const TdccState& state_t, const Tensor& x_t) {
  TdccState next = advance(model, state_t, x_t);
  Forecast f;
  f.corr = CorrState::from_q(std::move(next.q));
  f.sigma = assemble_sigma(next.sigma2, f.corr);
  f.sigma2 = std::move(next.sigma2);
  return f;
}

Forecast forecast_one_step(const TdccFit& fit) { return forecast_from_state(fit.model, fit.last, fit.last_x); }

Forecast forecast_one_step(const TdccModel& model, std::span<const Tensor> x) {
  model.validate();
  TdccState state = initial_state(model, x);
  for (std::size_t t = 0; t + 1 < x.size(); ++t) state = advance(model, state, x[t]);
  return forecast_from_state(model, state, x.back());
}

}  // namespace tdcc
