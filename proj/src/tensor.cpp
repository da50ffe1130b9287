#include "tdcc/tensor.hpp"

#include "tdcc/error.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace tdcc {

namespace {

constexpr const char* kModule = "tensor-core";

void check_mode(const Dims& dims, std::size_t mode) {
  if (mode >= dims.order()) {
    throw Error(ErrorCode::InvalidArgument, kModule,
                fmt::format("mode {} out of range for an order-{} tensor", mode + 1, dims.order()));
  }
}

}  // namespace

Dims::Dims(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) {
    throw Error(ErrorCode::InvalidArgument, kModule, "tensor order must be at least 1");
  }
  std::size_t n = 1;
  for (std::size_t s : sizes_) {
    if (s == 0) throw Error(ErrorCode::InvalidArgument, kModule, "every mode size must be positive");
    if (n > std::numeric_limits<std::size_t>::max() / s) {
      throw Error(ErrorCode::Overflow, kModule, "dimension product overflows");
    }
    n *= s;
  }
  // Eigen indexes with a signed type.
  if (n > static_cast<std::size_t>(std::numeric_limits<Eigen::Index>::max())) {
    throw Error(ErrorCode::Overflow, kModule, "dimension product overflows");
  }
  total_ = n;
}

std::size_t Dims::stride(std::size_t mode) const {
  check_mode(*this, mode);
  std::size_t s = 1;
  for (std::size_t k = 0; k < mode; ++k) s *= sizes_[k];
  return s;
}

std::string Dims::str() const {
  std::string out;
  for (std::size_t k = 0; k < sizes_.size(); ++k) {
    if (k) out += 'x';
    out += std::to_string(sizes_[k]);
  }
  return out;
}

Dims Dims::parse(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t next = text.find('x', pos);
    if (next == std::string::npos) next = text.size();
    std::size_t value = 0;
    const char* first = text.data() + pos;
    const char* last = text.data() + next;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (first == last || ec != std::errc() || ptr != last) {
      throw Error(ErrorCode::Parse, kModule,
                  fmt::format("malformed dims '{}'; expected N1xN2x...xNK", text));
    }
    sizes.push_back(value);
    pos = next + 1;
  }
  return Dims(std::move(sizes));
}

Tensor::Tensor(Dims dims)
    : dims_(std::move(dims)), data_(Vector::Zero(static_cast<Eigen::Index>(dims_.total()))) {}

Tensor::Tensor(Dims dims, Vector data) : dims_(std::move(dims)), data_(std::move(data)) {
  if (static_cast<std::size_t>(data_.size()) != dims_.total()) {
    throw Error(ErrorCode::ShapeMismatch, kModule,
                fmt::format("data length {} does not match dims {} (N={})", data_.size(),
                            dims_.str(), dims_.total()));
  }
}

Tensor Tensor::from_values(Dims dims, std::span<const double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::InvalidArgument, kModule,
                  fmt::format("non-finite tensor entry at offset {}", i));
    }
    v[static_cast<Eigen::Index>(i)] = values[i];
  }
  return Tensor(std::move(dims), std::move(v));
}

Tensor Tensor::constant(Dims dims, double value) {
  Tensor t(std::move(dims));
  t.data_.setConstant(value);
  return t;
}

std::size_t Tensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != dims_.order()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "index arity does not match tensor order");
  }
  std::size_t off = 0;
  std::size_t stride = 1;
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= dims_[k]) throw Error(ErrorCode::InvalidArgument, kModule, "index out of range");
    off += index[k] * stride;
    stride *= dims_[k];
  }
  return off;
}

double Tensor::at(std::span<const std::size_t> index) const { return (*this)[offset(index)]; }
double& Tensor::at(std::span<const std::size_t> index) { return (*this)[offset(index)]; }

Vector vec(const Tensor& x) { return x.data(); }

Tensor reshape(const Vector& v, const Dims& dims) { return Tensor(dims, v); }

// The vec layout viewed as a (left, N_k, right) block: for each right index r
// the slab data[r*left*N_k ...] is a column-major left x N_k matrix whose
// column j holds the entries with i_k = j.

Matrix unfold(const Tensor& x, std::size_t mode) {
  const Dims& d = x.dims();
  check_mode(d, mode);
  const auto nk = static_cast<Eigen::Index>(d[mode]);
  const auto left = static_cast<Eigen::Index>(d.stride(mode));
  const auto right = static_cast<Eigen::Index>(d.total() / (d.stride(mode) * d[mode]));
  Matrix m(nk, left * right);
  for (Eigen::Index r = 0; r < right; ++r) {
    Eigen::Map<const Matrix> slab(x.data().data() + r * left * nk, left, nk);
    m.middleCols(r * left, left) = slab.transpose();
  }
  return m;
}

Tensor fold(const Matrix& m, const Dims& dims, std::size_t mode) {
  check_mode(dims, mode);
  const auto nk = static_cast<Eigen::Index>(dims[mode]);
  const auto left = static_cast<Eigen::Index>(dims.stride(mode));
  const auto right = static_cast<Eigen::Index>(dims.total() / (dims.stride(mode) * dims[mode]));
  if (m.rows() != nk || m.cols() != left * right) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "unfolding shape does not match dims");
  }
  Tensor x(dims);
  for (Eigen::Index r = 0; r < right; ++r) {
    Eigen::Map<Matrix> slab(x.data().data() + r * left * nk, left, nk);
    slab = m.middleCols(r * left, left).transpose();
  }
  return x;
}

Tensor mode_product(const Tensor& x, const Matrix& a, std::size_t mode) {
  const Dims& d = x.dims();
  check_mode(d, mode);
  const auto nk = static_cast<Eigen::Index>(d[mode]);
  if (a.cols() != nk) {
    throw Error(ErrorCode::ShapeMismatch, kModule,
                fmt::format("mode-{} product needs {} columns, got {}", mode + 1, nk, a.cols()));
  }
  std::vector<std::size_t> sizes = d.sizes();
  sizes[mode] = static_cast<std::size_t>(a.rows());
  Dims out_dims(std::move(sizes));
  Tensor out(out_dims);
  const auto left = static_cast<Eigen::Index>(d.stride(mode));
  const auto right = static_cast<Eigen::Index>(d.total() / (d.stride(mode) * d[mode]));
  const Eigen::Index m = a.rows();
  for (Eigen::Index r = 0; r < right; ++r) {
    Eigen::Map<const Matrix> in(x.data().data() + r * left * nk, left, nk);
    Eigen::Map<Matrix> res(out.data().data() + r * left * m, left, m);
    res.noalias() = in * a.transpose();
  }
  return out;
}

Matrix mode_gram(const Tensor& x, std::size_t mode) {
  const Dims& d = x.dims();
  check_mode(d, mode);
  const auto nk = static_cast<Eigen::Index>(d[mode]);
  const auto left = static_cast<Eigen::Index>(d.stride(mode));
  const auto right = static_cast<Eigen::Index>(d.total() / (d.stride(mode) * d[mode]));
  Matrix g = Matrix::Zero(nk, nk);
  for (Eigen::Index r = 0; r < right; ++r) {
    Eigen::Map<const Matrix> slab(x.data().data() + r * left * nk, left, nk);
    g.selfadjointView<Eigen::Lower>().rankUpdate(slab.transpose());
  }
  return g.selfadjointView<Eigen::Lower>();
}

void mode_solve_lower(Tensor& x, const Matrix& lower, std::size_t mode, bool transpose) {
  const Dims& d = x.dims();
  check_mode(d, mode);
  const auto nk = static_cast<Eigen::Index>(d[mode]);
  if (lower.rows() != nk || lower.cols() != nk) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "triangular factor does not match mode size");
  }
  const auto left = static_cast<Eigen::Index>(d.stride(mode));
  const auto right = static_cast<Eigen::Index>(d.total() / (d.stride(mode) * d[mode]));
  if (left == 1) {
    // Mode fibres are contiguous columns: one blocked solve.
    Eigen::Map<Matrix> fibres(x.data().data(), nk, right);
    if (transpose) {
      lower.transpose().triangularView<Eigen::Upper>().solveInPlace(fibres);
    } else {
      lower.triangularView<Eigen::Lower>().solveInPlace(fibres);
    }
    return;
  }
  for (Eigen::Index r = 0; r < right; ++r) {
    Eigen::Map<Matrix> slab(x.data().data() + r * left * nk, left, nk);
    // slab <- slab * L^{-T} (fibre <- L^{-1} fibre), or slab * L^{-1} for the transpose.
    if (transpose) {
      lower.triangularView<Eigen::Lower>().solveInPlace<Eigen::OnTheRight>(slab);
    } else {
      lower.transpose().triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(slab);
    }
  }
}

Matrix kron_chain(std::span<const Matrix> mats) {
  if (mats.empty()) throw Error(ErrorCode::InvalidArgument, kModule, "kron_chain needs at least one matrix");
  for (const Matrix& m : mats) {
    if (m.rows() != m.cols()) throw Error(ErrorCode::ShapeMismatch, kModule, "kron_chain factors must be square");
  }
  // Build A_1, then A_2 ⊗ A_1, then A_3 ⊗ (A_2 ⊗ A_1), ...
  Matrix acc = mats[0];
  for (std::size_t k = 1; k < mats.size(); ++k) {
    const Matrix& a = mats[k];
    Matrix next(a.rows() * acc.rows(), a.cols() * acc.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        next.block(i * acc.rows(), j * acc.cols(), acc.rows(), acc.cols()) = a(i, j) * acc;
      }
    }
    acc = std::move(next);
  }
  return acc;
}

Matrix sym_sqrt(const Matrix& u) {
  if (u.rows() != u.cols()) throw Error(ErrorCode::ShapeMismatch, kModule, "sym_sqrt needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(u));
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::NotPsd, kModule, "eigendecomposition failed");
  Vector lambda = eig.eigenvalues();
  const double top = lambda.size() ? std::max(0.0, lambda.maxCoeff()) : 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < -1e-10 * top) {
      throw Error(ErrorCode::NotPsd, kModule,
                  fmt::format("matrix is not PSD (eigenvalue {:.3e}, largest {:.3e})", lambda[i], top));
    }
    lambda[i] = std::sqrt(std::max(lambda[i], 0.0));
  }
  const Matrix& v = eig.eigenvectors();
  return symmetrize(v * lambda.asDiagonal() * v.transpose());
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace tdcc
