#include "tdcc/baselines.hpp"

#include "tdcc/error.hpp"

#include <fmt/format.h>

#include <charconv>

namespace tdcc {

namespace {

constexpr const char* kModule = "baselines";

void check_series(std::span<const Tensor> x) {
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, kModule, "series is empty");
  for (const Tensor& t : x) {
    if (!(t.dims() == x.front().dims())) throw Error(ErrorCode::ShapeMismatch, kModule, "inconsistent dims");
  }
}

Adapted apply(std::span<const Tensor> x, const Dims& dims, std::vector<std::size_t> perm) {
  Adapted out;
  out.source_dims = x.front().dims();
  out.x.reserve(x.size());
  for (const Tensor& t : x) {
    Vector v(static_cast<Eigen::Index>(perm.size()));
    for (std::size_t p = 0; p < perm.size(); ++p) v[static_cast<Eigen::Index>(p)] = t[perm[p]];
    out.x.emplace_back(dims, std::move(v));
  }
  out.perm = std::move(perm);
  return out;
}

}  // namespace

std::string MethodSpec::name() const {
  const std::string suffix = intercept == InterceptMethod::Sample ? "s" : to_string(intercept);
  switch (family) {
    case Family::Tdcc: return "tdcc-" + suffix;
    case Family::Vdcc: return "vdcc-" + suffix;
    case Family::Mdcc: return fmt::format("mdcc{}-{}", mode + 1, suffix);
  }
  return "";
}

MethodSpec MethodSpec::parse(const std::string& text) {
  const auto dash = text.find('-');
  auto fail = [&]() {
    return Error(ErrorCode::Parse, kModule,
                 fmt::format("unknown method '{}' (expected tdcc-s, mdcc<k>-ls, vdcc-s, ...)", text));
  };
  if (dash == std::string::npos) throw fail();
  const std::string family = text.substr(0, dash);
  MethodSpec spec;
  try {
    spec.intercept = parse_intercept_method(text.substr(dash + 1));
  } catch (const Error&) {
    throw fail();
  }
  if (family == "tdcc") {
    spec.family = Family::Tdcc;
  } else if (family == "vdcc") {
    spec.family = Family::Vdcc;
  } else if (family.rfind("mdcc", 0) == 0 && family.size() > 4) {
    std::size_t k = 0;
    const char* first = family.data() + 4;
    const char* last = family.data() + family.size();
    auto [ptr, ec] = std::from_chars(first, last, k);
    if (ec != std::errc() || ptr != last || k == 0) throw fail();
    spec.family = Family::Mdcc;
    spec.mode = k - 1;
  } else {
    throw fail();
  }
  return spec;
}

std::vector<MethodSpec> method_grid(std::size_t order, bool include_nonlinear) {
  std::vector<MethodSpec> grid;
  const InterceptMethod shrink = include_nonlinear ? InterceptMethod::NonlinearShrinkage : InterceptMethod::LinearShrinkage;
  grid.push_back({Family::Tdcc, 0, InterceptMethod::Sample});
  grid.push_back({Family::Tdcc, 0, InterceptMethod::LinearShrinkage});
  if (include_nonlinear) grid.push_back({Family::Tdcc, 0, shrink});
  for (std::size_t k = 0; k < order; ++k) grid.push_back({Family::Mdcc, k, InterceptMethod::LinearShrinkage});
  grid.push_back({Family::Vdcc, 0, InterceptMethod::Sample});
  grid.push_back({Family::Vdcc, 0, InterceptMethod::LinearShrinkage});
  if (include_nonlinear) grid.push_back({Family::Vdcc, 0, shrink});
  return grid;
}

Dims adapted_dims(const Dims& source, const MethodSpec& spec) {
  switch (spec.family) {
    case Family::Tdcc: return source;
    case Family::Vdcc: return Dims{source.total()};
    case Family::Mdcc:
      if (spec.mode >= source.order()) {
        throw Error(ErrorCode::InvalidArgument, kModule,
                    fmt::format("unfolding mode {} out of range for an order-{} tensor", spec.mode + 1, source.order()));
      }
      return Dims{source[spec.mode], source.complement(spec.mode)};
  }
  return source;
}

std::vector<std::size_t> adapted_perm(const Dims& source, const MethodSpec& spec) {
  std::vector<std::size_t> perm(source.total());
  if (spec.family != Family::Mdcc) {
    for (std::size_t p = 0; p < perm.size(); ++p) perm[p] = p;
    return perm;
  }
  adapted_dims(source, spec);  // range check
  // Source offset l + left*i + left*nk*r sits at row i, column l + left*r of mat_k.
  const std::size_t nk = source[spec.mode];
  const std::size_t left = source.stride(spec.mode);
  const std::size_t right = source.total() / (left * nk);
  for (std::size_t r = 0; r < right; ++r) {
    for (std::size_t i = 0; i < nk; ++i) {
      for (std::size_t l = 0; l < left; ++l) {
        perm[i + nk * (l + left * r)] = l + left * i + left * nk * r;
      }
    }
  }
  return perm;
}

Adapted vectorize_adapter(std::span<const Tensor> x) {
  check_series(x);
  const MethodSpec spec{Family::Vdcc, 0, InterceptMethod::Sample};
  return apply(x, adapted_dims(x.front().dims(), spec), adapted_perm(x.front().dims(), spec));
}

Adapted unfold_adapter(std::span<const Tensor> x, std::size_t mode) {
  check_series(x);
  const MethodSpec spec{Family::Mdcc, mode, InterceptMethod::Sample};
  const Dims dims = adapted_dims(x.front().dims(), spec);
  return apply(x, dims, adapted_perm(x.front().dims(), spec));
}

Adapted adapt(std::span<const Tensor> x, const MethodSpec& spec) {
  check_series(x);
  switch (spec.family) {
    case Family::Vdcc: return vectorize_adapter(x);
    case Family::Mdcc: return unfold_adapter(x, spec.mode);
    case Family::Tdcc: break;
  }
  Adapted out;
  out.source_dims = x.front().dims();
  out.x.assign(x.begin(), x.end());
  out.perm = adapted_perm(out.source_dims, spec);
  return out;
}

std::vector<Tensor> restore(std::span<const Tensor> adapted, const Dims& source_dims,
                            std::span<const std::size_t> perm) {
  if (perm.size() != source_dims.total()) throw Error(ErrorCode::ShapeMismatch, kModule, "permutation length");
  std::vector<Tensor> out;
  out.reserve(adapted.size());
  for (const Tensor& t : adapted) {
    if (t.size() != perm.size()) throw Error(ErrorCode::ShapeMismatch, kModule, "adapted tensor length");
    Tensor s(source_dims);
    for (std::size_t p = 0; p < perm.size(); ++p) s[perm[p]] = t[p];
    out.push_back(std::move(s));
  }
  return out;
}

Matrix to_source_order(const Matrix& adapted_sigma, std::span<const std::size_t> perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  if (adapted_sigma.rows() != n || adapted_sigma.cols() != n) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "covariance does not match permutation");
  }
  Matrix out(n, n);
  for (Eigen::Index q = 0; q < n; ++q) {
    const auto sq = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(q)]);
    for (Eigen::Index p = 0; p < n; ++p) {
      out(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(p)]), sq) = adapted_sigma(p, q);
    }
  }
  return out;
}

MethodFit fit_method(std::span<const Tensor> x, const MethodSpec& spec,
                     const std::optional<std::vector<GarchFit>>& garch, FitOptions opts) {
  check_series(x);
  opts.intercept = spec.intercept;
  Adapted a = adapt(x, spec);
  std::vector<GarchFit> source_garch = garch ? *garch : fit_volatility(x, opts.threads);
  MethodFit out;
  out.spec = spec;
  out.source_dims = a.source_dims;
  out.fit = fit_from_volatility(a.x, permute_entries(source_garch, a.perm), opts);
  out.perm = std::move(a.perm);
  return out;
}

}  // namespace tdcc
