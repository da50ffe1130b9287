#pragma once

#include "tdcc/rng.hpp"
#include "tdcc/tensor.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <vector>

namespace tdcc::test {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Philox& rng) {
  boost::random::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline Tensor random_tensor(const Dims& dims, Philox& rng) {
  boost::random::normal_distribution<double> normal;
  Tensor x(dims);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = normal(rng);
  return x;
}

/// Random SPD matrix with eigenvalues in [0.5, 2] (times `scale`).
inline Matrix random_spd(Eigen::Index n, Philox& rng, double scale = 1.0) {
  boost::random::uniform_real_distribution<double> unif(0.5, 2.0);
  Eigen::HouseholderQR<Matrix> qr(random_matrix(n, n, rng));
  Matrix q = qr.householderQ();
  Vector lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) lambda[i] = unif(rng) * scale;
  Matrix s = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

inline Matrix random_corr(Eigen::Index n, Philox& rng) {
  Matrix s = random_spd(n, rng);
  Vector d = s.diagonal().cwiseSqrt().cwiseInverse();
  Matrix r = d.asDiagonal() * s * d.asDiagonal();
  r.diagonal().setOnes();
  return 0.5 * (r + r.transpose());
}

/// Explicit Kronecker product a ⊗ b.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index k = 0; k < b.rows(); ++k)
        for (Eigen::Index l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

/// Multi-index of a vec offset (mode 0 fastest).
inline std::vector<std::size_t> multi_index(const Dims& d, std::size_t off) {
  std::vector<std::size_t> idx(d.order());
  for (std::size_t k = 0; k < d.order(); ++k) {
    idx[k] = off % d[k];
    off /= d[k];
  }
  return idx;
}

}  // namespace tdcc::test
