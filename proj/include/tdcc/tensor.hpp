#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tdcc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/**
 * Dimension vector (N_1, ..., N_K) of an order-K tensor.
 *
 * Modes are addressed 0-based in the API (mode 0 is what the notation calls mode 1).
 * Construction rejects empty shapes, zero extents and products that overflow.
 */
class Dims {
 public:
  Dims() = default;
  explicit Dims(std::vector<std::size_t> sizes);
  Dims(std::initializer_list<std::size_t> sizes) : Dims(std::vector<std::size_t>(sizes)) {}

  std::size_t order() const noexcept { return sizes_.size(); }
  std::size_t operator[](std::size_t mode) const { return sizes_.at(mode); }
  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }

  /// N = prod_k N_k.
  std::size_t total() const noexcept { return total_; }
  /// N_{-k} = N / N_k.
  std::size_t complement(std::size_t mode) const { return total_ / sizes_.at(mode); }
  /// Product of the extents of modes strictly before `mode`.
  std::size_t stride(std::size_t mode) const;

  /// Renders as "N1xN2x...xNK".
  std::string str() const;
  static Dims parse(const std::string& text);

  friend bool operator==(const Dims&, const Dims&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::size_t total_ = 0;
};

/**
 * Dense order-K tensor stored in vec order: mode 0 varies fastest, so index
 * (i_1, ..., i_K) sits at offset i_1 + N_1 i_2 + N_1 N_2 i_3 + ...
 */
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims dims);  // zero-filled
  Tensor(Dims dims, Vector data);

  /// Builds a tensor from external input; rejects non-finite values.
  static Tensor from_values(Dims dims, std::span<const double> values);
  static Tensor constant(Dims dims, double value);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(data_.size()); }

  const Vector& data() const noexcept { return data_; }
  Vector& data() noexcept { return data_; }

  double operator[](std::size_t offset) const { return data_[static_cast<Eigen::Index>(offset)]; }
  double& operator[](std::size_t offset) { return data_[static_cast<Eigen::Index>(offset)]; }

  double at(std::span<const std::size_t> index) const;
  double& at(std::span<const std::size_t> index);
  std::size_t offset(std::span<const std::size_t> index) const;

 private:
  Dims dims_;
  Vector data_;
};

/// vec(x): the data in vec order.
Vector vec(const Tensor& x);
/// Inverse of vec.
Tensor reshape(const Vector& v, const Dims& dims);

/// Mode-k unfolding (N_k x N_{-k}); lower modes vary fastest across columns.
Matrix unfold(const Tensor& x, std::size_t mode);
/// Inverse of unfold.
Tensor fold(const Matrix& m, const Dims& dims, std::size_t mode);

/// x ×_k a, where a is M x N_k; the result has N_k replaced by M.
Tensor mode_product(const Tensor& x, const Matrix& a, std::size_t mode);

/// mat_k(x) mat_k(x)', computed without forming the unfolding.
Matrix mode_gram(const Tensor& x, std::size_t mode);

/// In-place x ← x ×_k L^{-1} (or x ×_k L^{-T} when `transpose`) for lower-triangular L.
void mode_solve_lower(Tensor& x, const Matrix& lower, std::size_t mode, bool transpose = false);

/// A_K ⊗ ... ⊗ A_1 for mats = [A_1, ..., A_K] (the last mode is leftmost).
Matrix kron_chain(std::span<const Matrix> mats);

/// Symmetric PSD square root via eigendecomposition.
Matrix sym_sqrt(const Matrix& u);

/// (a + a') / 2.
Matrix symmetrize(const Matrix& a);

}  // namespace tdcc
