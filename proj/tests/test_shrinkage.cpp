#include "support.hpp"
#include "tdcc/error.hpp"
#include "tdcc/shrinkage.hpp"

#include <doctest.h>

#include <algorithm>

using namespace tdcc;
using namespace tdcc::test;

namespace {

// Direct evaluation with scaled norms ||A||^2 = tr(AA')/n and explicit
// per-sample dispersion terms.
Matrix reference_lw(const Matrix& x, double* intensity) {
  const Eigen::Index n = x.rows();
  const auto m = static_cast<double>(x.cols());
  const Matrix s = x * x.transpose() / m;
  const double mu = s.trace() / static_cast<double>(n);
  const Matrix target = mu * Matrix::Identity(n, n);
  const double d2 = (s - target).squaredNorm() / static_cast<double>(n);
  double b2bar = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    b2bar += (x.col(j) * x.col(j).transpose() - s).squaredNorm() / static_cast<double>(n);
  }
  b2bar /= m * m;
  const double b2 = std::min(b2bar, d2);
  *intensity = b2 / d2;
  return b2 / d2 * target + (d2 - b2) / d2 * s;
}

}  // namespace

TEST_CASE("linear shrinkage matches the direct formula") {
  Philox rng(21);
  for (auto [n, m] : {std::pair{4, 6}, std::pair{5, 200}, std::pair{10, 8}}) {
    const Matrix x = random_matrix(n, m, rng);
    double rho = 0.0;
    const Matrix expect = reference_lw(x, &rho);
    const ShrinkResult r = linear_shrink(x);
    CHECK((r.matrix - expect).norm() < 1e-12 * expect.norm());
    CHECK(r.intensity == doctest::Approx(rho).epsilon(1e-12));
    CHECK(r.intensity >= 0.0);
    CHECK(r.intensity <= 1.0);
    CHECK(r.target_scale == doctest::Approx(x.squaredNorm() / (n * m)));

    LinearShrinkage acc(n);
    acc.add_columns(x.leftCols(m / 2));
    for (Eigen::Index j = m / 2; j < m; ++j) acc.add(x.col(j));
    CHECK(acc.count() == static_cast<std::size_t>(m));
    CHECK((acc.finish().matrix - r.matrix).norm() < 1e-12 * expect.norm());
  }
}

TEST_CASE("few samples shrink fully toward the target; many samples barely") {
  Philox rng(22);
  const Matrix few = random_matrix(20, 3, rng);
  CHECK(linear_shrink(few).intensity > 0.5);
  Matrix corr = Matrix::Constant(3, 3, 0.5);
  corr.diagonal().setOnes();
  const Matrix many_corr = Matrix(corr.llt().matrixL()) * random_matrix(3, 20000, rng);
  CHECK(linear_shrink(many_corr).intensity < 0.05);
}

TEST_CASE("shrinkage input validation") {
  CHECK_THROWS_AS(linear_shrink(Matrix::Ones(3, 1)), Error);
  LinearShrinkage acc(3);
  CHECK_THROWS_AS(acc.add(Vector::Ones(2)), Error);
}

TEST_CASE("two samples by hand") {
  // x1 = (2, 1), x2 = (1, 0): S = [[2.5, 1], [1, 0.5]], mu = 1.5, d2 = 2,
  // b2bar = (2.25 + 2.25) / 4 = 1.125, intensity 0.5625.
  Matrix x(2, 2);
  x << 2.0, 1.0, 1.0, 0.0;
  const ShrinkResult r = linear_shrink(x);
  CHECK(r.intensity == doctest::Approx(0.5625).epsilon(1e-15));
  CHECK(r.target_scale == doctest::Approx(1.5).epsilon(1e-15));
  Matrix expect(2, 2);
  expect << 1.9375, 0.4375, 0.4375, 1.0625;
  CHECK((r.matrix - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("intensity vanishes for large samples from a non-spherical covariance") {
  Philox rng(23);
  const Matrix corr = Matrix::Constant(10, 10, 0.5) + 0.5 * Matrix::Identity(10, 10);
  const Matrix x = Matrix(corr.llt().matrixL()) * random_matrix(10, 10000, rng);
  const ShrinkResult r = linear_shrink(x);
  CHECK(r.intensity < 0.05);
  const Matrix s = x * x.transpose() / 10000.0;
  CHECK((r.matrix - s).norm() < 0.05 * s.norm());
}

TEST_CASE("spherical samples keep the output near the sample matrix") {
  Philox rng(24);
  const Matrix x = random_matrix(10, 10000, rng);
  const ShrinkResult r = linear_shrink(x);
  const Matrix s = x * x.transpose() / 10000.0;
  // The target is the truth here, so the intensity stays large while S itself
  // approaches mu I.
  CHECK(r.intensity > 0.5);
  CHECK((r.matrix - s).norm() < 0.05 * s.norm());
}
