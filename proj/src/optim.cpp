#include "tdcc/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace tdcc::optim {

namespace {

// One Nelder-Mead pass with the standard coefficients (1, 2, 1/2, 1/2).
NelderMeadResult run_once(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& x0, const NelderMeadOptions& opts,
                          std::size_t budget) {
  const Eigen::Index n = x0.size();
  std::vector<Eigen::VectorXd> pts;
  std::vector<double> vals;
  std::size_t evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  pts.push_back(x0);
  vals.push_back(eval(x0));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd x = x0;
    x[i] += opts.step;
    double v = eval(x);
    if (!std::isfinite(v)) {
      x[i] = x0[i] - opts.step;
      v = eval(x);
    }
    pts.push_back(std::move(x));
    vals.push_back(v);
  }

  std::vector<std::size_t> order(pts.size());
  bool converged = false;
  while (evals < budget) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];
    if (std::isfinite(vals[worst]) &&
        vals[worst] - vals[best] <= opts.ftol * (std::abs(vals[best]) + opts.ftol)) {
      converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i : order) {
      if (i != worst) centroid += pts[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    // Contraction, outside or inside.
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    // Shrink toward the best vertex.
    for (std::size_t i : order) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      vals[i] = eval(pts[i]);
    }
  }

  const auto it = std::min_element(vals.begin(), vals.end());
  NelderMeadResult res;
  res.x = pts[static_cast<std::size_t>(it - vals.begin())];
  res.f = *it;
  res.evals = evals;
  res.converged = converged;
  return res;
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opts) {
  NelderMeadResult best = run_once(f, x0, opts, opts.max_evals);
  std::size_t total = best.evals;
  for (int r = 0; r < opts.restarts && total < opts.max_evals; ++r) {
    NelderMeadOptions again = opts;
    again.step = opts.step * 0.25;
    NelderMeadResult next = run_once(f, best.x, again, opts.max_evals - total);
    total += next.evals;
    const bool improved = next.f < best.f;
    if (improved) best = next;
    best.converged = next.converged;
    if (!improved) break;
  }
  best.evals = total;
  return best;
}

}  // namespace tdcc::optim
