#include "tdcc/shrinkage.hpp"

#include "tdcc/error.hpp"

#include <algorithm>

namespace tdcc {

namespace {
constexpr const char* kModule = "shrinkage";
}

LinearShrinkage::LinearShrinkage(Eigen::Index dim) : dim_(dim), outer_sum_(Matrix::Zero(dim, dim)) {
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, kModule, "dimension must be positive");
}

void LinearShrinkage::add(const Eigen::Ref<const Vector>& sample) {
  if (sample.size() != dim_) throw Error(ErrorCode::ShapeMismatch, kModule, "sample dimension mismatch");
  outer_sum_.selfadjointView<Eigen::Lower>().rankUpdate(sample);
  const double sq = sample.squaredNorm();
  norm4_sum_ += sq * sq;
  ++count_;
}

void LinearShrinkage::add_columns(const Eigen::Ref<const Matrix>& samples) {
  if (samples.rows() != dim_) throw Error(ErrorCode::ShapeMismatch, kModule, "sample dimension mismatch");
  outer_sum_.selfadjointView<Eigen::Lower>().rankUpdate(samples);
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const double sq = samples.col(j).squaredNorm();
    norm4_sum_ += sq * sq;
  }
  count_ += static_cast<std::size_t>(samples.cols());
}

ShrinkResult LinearShrinkage::finish() const {
  if (count_ < 2) throw Error(ErrorCode::InvalidArgument, kModule, "linear shrinkage needs at least 2 samples");
  const auto m = static_cast<double>(count_);
  const auto n = static_cast<double>(dim_);
  Matrix s = outer_sum_.selfadjointView<Eigen::Lower>();
  s /= m;

  const double mu = s.trace() / n;
  const double s_norm2 = s.squaredNorm();
  // Frobenius norms below are normalised by n, as in Ledoit-Wolf (2004).
  const double d2 = (s_norm2 - 2.0 * mu * s.trace() + mu * mu * n) / n;
  const double b2_bar = std::max(0.0, (norm4_sum_ - m * s_norm2) / (m * m * n));
  const double b2 = std::min(b2_bar, d2);
  const double rho = d2 > 0.0 ? std::clamp(b2 / d2, 0.0, 1.0) : 0.0;

  ShrinkResult out;
  out.matrix = (1.0 - rho) * s;
  out.matrix.diagonal().array() += rho * mu;
  out.intensity = rho;
  out.target_scale = mu;
  return out;
}

ShrinkResult linear_shrink(const Matrix& samples) {
  LinearShrinkage acc(samples.rows());
  acc.add_columns(samples);
  return acc.finish();
}

}  // namespace tdcc
