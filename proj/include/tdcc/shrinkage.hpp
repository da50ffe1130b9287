#pragma once

#include "tdcc/tensor.hpp"

namespace tdcc {

struct ShrinkResult {
  Matrix matrix;
  double intensity = 0.0;     // weight on the target, in [0, 1]
  double target_scale = 0.0;  // mu = tr(S) / n
};

/**
 * Streaming accumulator for the Ledoit-Wolf (2004) linear shrinkage estimator
 * toward mu * I, using the uncentred second-moment matrix S = (1/M) sum x x'.
 *
 * The dispersion term sum_m ||x_m x_m' - S||_F^2 equals
 * sum_m (x_m'x_m)^2 - M ||S||_F^2, so only S and sum (x'x)^2 are accumulated.
 */
class LinearShrinkage {
 public:
  explicit LinearShrinkage(Eigen::Index dim);

  void add(const Eigen::Ref<const Vector>& sample);
  /// Adds every column of `samples` as one observation.
  void add_columns(const Eigen::Ref<const Matrix>& samples);

  std::size_t count() const noexcept { return count_; }
  ShrinkResult finish() const;

 private:
  Eigen::Index dim_;
  std::size_t count_ = 0;
  Matrix outer_sum_;
  double norm4_sum_ = 0.0;
};

/// samples: n x M, one observation per column. Requires M >= 2.
ShrinkResult linear_shrink(const Matrix& samples);

}  // namespace tdcc
