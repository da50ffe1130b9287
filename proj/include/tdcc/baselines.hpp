#pragma once

#include "tdcc/engine.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tdcc {

enum class Family { Tdcc, Mdcc, Vdcc };

/// One comparison method: a data adapter plus an intercept estimator.
struct MethodSpec {
  Family family = Family::Tdcc;
  std::size_t mode = 0;  // MDCC unfolding mode, 0-based
  InterceptMethod intercept = InterceptMethod::Sample;

  /// "tdcc-s", "mdcc2-ls", "vdcc-nls", ...
  std::string name() const;
  static MethodSpec parse(const std::string& text);
};

/// The nine methods of the comparison grid for an order-K source tensor.
std::vector<MethodSpec> method_grid(std::size_t order, bool include_nonlinear = true);

/**
 * A series rearranged for one method. `perm[p]` is the source vec offset of
 * adapted vec offset p, so every adapted tensor satisfies
 * adapted[p] = source[perm[p]].
 */
struct Adapted {
  Dims source_dims;
  std::vector<Tensor> x;
  std::vector<std::size_t> perm;
};

/// Each X_t replaced by vec(X_t) as an order-1 tensor (VDCC).
Adapted vectorize_adapter(std::span<const Tensor> x);
/// Each X_t replaced by mat_k(X_t) as an N_k x N_{-k} tensor (MDCC-k).
Adapted unfold_adapter(std::span<const Tensor> x, std::size_t mode);
/// Identity for TDCC, otherwise one of the two adapters above.
Adapted adapt(std::span<const Tensor> x, const MethodSpec& spec);

/// Adapted dims of `spec` for a source shape.
Dims adapted_dims(const Dims& source, const MethodSpec& spec);
/// Permutation of `spec` for a source shape (see Adapted::perm).
std::vector<std::size_t> adapted_perm(const Dims& source, const MethodSpec& spec);

/// Inverse rearrangement back to the source layout.
std::vector<Tensor> restore(std::span<const Tensor> adapted, const Dims& source_dims,
                            std::span<const std::size_t> perm);

/// Reorders per-entry results from source vec order to adapted order.
template <typename T>
std::vector<T> permute_entries(const std::vector<T>& source, std::span<const std::size_t> perm) {
  std::vector<T> out;
  out.reserve(perm.size());
  for (std::size_t p : perm) out.push_back(source.at(p));
  return out;
}

/// Sigma in adapted order mapped back to source vec order.
Matrix to_source_order(const Matrix& adapted_sigma, std::span<const std::size_t> perm);

struct MethodFit {
  MethodSpec spec;
  Dims source_dims;
  std::vector<std::size_t> perm;
  TdccFit fit;  // in adapted coordinates
};

/// Fits one method. Per-entry GARCH fits (source vec order) may be shared
/// across methods; they are refitted when absent.
MethodFit fit_method(std::span<const Tensor> x, const MethodSpec& spec,
                     const std::optional<std::vector<GarchFit>>& garch = std::nullopt, FitOptions opts = {});

}  // namespace tdcc
