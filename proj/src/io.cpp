#include "tdcc/io.hpp"

#include "tdcc/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tdcc {

namespace {

constexpr const char* kModule = "cli";
constexpr const char* kHeaderSyntax = "# dims=N1xN2x...xNK";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(',', pos);
    cells.push_back(line.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  for (auto& c : cells) {
    const auto first = c.find_first_not_of(" \t");
    const auto last = c.find_last_not_of(" \t");
    c = first == std::string::npos ? std::string() : c.substr(first, last - first + 1);
  }
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return first != last && ec == std::errc() && ptr == last;
}

Matrix matrix_from_json(const nlohmann::json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty()) throw Error(ErrorCode::Parse, kModule, what + " must be a non-empty array");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw Error(ErrorCode::Parse, kModule, what + " must be square");
    }
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Dims dims_from_json(const nlohmann::json& j) {
  std::vector<std::size_t> sizes;
  for (const auto& v : j) sizes.push_back(v.get<std::size_t>());
  return Dims(std::move(sizes));
}

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, kModule, fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, kModule, fmt::format("cannot write '{}'", path));
  out << content;
  if (!out) throw Error(ErrorCode::Io, kModule, fmt::format("write to '{}' failed", path));
}

Dataset parse_dataset(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    return Error(ErrorCode::Parse, kModule, fmt::format("{}:{}: {}", name, line_no, msg));
  };

  Dataset data;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string prefix = "# dims=";
    if (line.rfind(prefix, 0) != 0) throw fail(fmt::format("missing header; expected '{}'", kHeaderSyntax));
    try {
      data.dims = Dims::parse(line.substr(prefix.size()));
    } catch (const Error& err) {
      throw fail(fmt::format("malformed header ({}); expected '{}'", err.what(), kHeaderSyntax));
    }
    have_header = true;
    break;
  }
  if (!have_header) throw fail(fmt::format("empty file; expected header '{}'", kHeaderSyntax));

  const std::size_t n = data.dims.total();
  bool first_row = true;
  bool has_date = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (first_row) {
      if (cells.size() != n && cells.size() != n + 1) {
        throw fail(fmt::format("expected {} values (optionally after a date), found {} cells", n, cells.size()));
      }
      has_date = cells.size() == n + 1;
      first_row = false;
      // Column-name row: every value cell non-numeric.
      bool names = true;
      double tmp = 0.0;
      for (std::size_t c = has_date ? 1 : 0; c < cells.size(); ++c) names = names && !parse_double(cells[c], tmp);
      if (names) continue;
    }
    if (cells.size() != n + (has_date ? 1 : 0)) {
      throw fail(fmt::format("ragged row: expected {} cells, found {}", n + (has_date ? 1 : 0), cells.size()));
    }
    Vector v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& cell = cells[i + (has_date ? 1 : 0)];
      double value = 0.0;
      if (!parse_double(cell, value)) throw fail(fmt::format("non-numeric cell '{}' in column {}", cell, i + 1));
      if (!std::isfinite(value)) throw fail(fmt::format("non-finite value in column {}", i + 1));
      v[static_cast<Eigen::Index>(i)] = value;
    }
    if (has_date) data.dates.push_back(cells.front());
    data.x.emplace_back(data.dims, std::move(v));
  }
  if (data.x.empty()) throw fail("no data rows");
  return data;
}

Dataset load_dataset(const std::string& path) { return parse_dataset(read_text(path), path); }

std::string format_dataset(const Dataset& data) {
  if (!data.dates.empty() && data.dates.size() != data.x.size()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "one date per row required");
  }
  std::string out = fmt::format("# dims={}\n", data.dims.str());
  for (std::size_t t = 0; t < data.x.size(); ++t) {
    if (!data.dates.empty()) out += data.dates[t] + ",";
    const Vector& v = data.x[t].data();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += fmt::format("{}", v[i]);
    }
    out += '\n';
  }
  return out;
}

void save_dataset(const std::string& path, const Dataset& data) { write_text(path, format_dataset(data)); }

nlohmann::ordered_json model_to_json(const MethodFit& mf) {
  const TdccFit& fit = mf.fit;
  const TdccModel& m = fit.model;
  nlohmann::ordered_json j;
  j["schema"] = "tdcc_model_v1";
  j["method"] = mf.spec.name();
  j["source_dims"] = mf.source_dims.sizes();
  j["dims"] = m.dims.sizes();
  nlohmann::ordered_json garch;
  std::vector<double> omega, a, b;
  for (const GarchParams& p : m.garch) {
    omega.push_back(p.omega);
    a.push_back(p.a);
    b.push_back(p.b);
  }
  garch["omega"] = omega;
  garch["a"] = a;
  garch["b"] = b;
  j["garch"] = std::move(garch);
  nlohmann::ordered_json intercepts = nlohmann::ordered_json::array();
  for (const Matrix& c : m.intercepts) intercepts.push_back(matrix_to_json(c));
  j["intercepts"] = std::move(intercepts);
  nlohmann::ordered_json corr = nlohmann::ordered_json::array();
  for (const ModeCorr& p : m.corr) corr.push_back({{"alpha", p.alpha}, {"beta", p.beta}});
  j["corr"] = std::move(corr);

  const FitDiagnostics& d = fit.diagnostics;
  nlohmann::ordered_json diag;
  diag["T"] = fit.e.size();
  diag["converged"] = d.corr_converged && d.garch_not_converged == 0;
  diag["garch_not_converged"] = d.garch_not_converged;
  diag["volatility_loglik"] = d.volatility_loglik;
  diag["corr_loglik"] = d.corr_loglik;
  diag["corr_start_loglik"] = d.corr_start_loglik;
  diag["corr_evals"] = d.corr_evals;
  diag["corr_converged"] = d.corr_converged;
  diag["intercept_diag_gap"] = d.intercept_diag_gap;
  diag["shrink_intensity"] = d.shrink_intensity;
  diag["d_form_gap"] = d.d_form_gap;
  j["diagnostics"] = std::move(diag);
  return j;
}

StoredModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema", std::string()) != "tdcc_model_v1") {
      throw Error(ErrorCode::Parse, kModule, "model file is not tdcc_model_v1");
    }
    StoredModel s;
    s.method = MethodSpec::parse(j.at("method").get<std::string>());
    s.source_dims = dims_from_json(j.at("source_dims"));
    s.model.dims = dims_from_json(j.at("dims"));
    if (!(adapted_dims(s.source_dims, s.method) == s.model.dims)) {
      throw Error(ErrorCode::ShapeMismatch, kModule, "model dims do not match its method and source dims");
    }
    const auto& g = j.at("garch");
    const auto omega = g.at("omega").get<std::vector<double>>();
    const auto a = g.at("a").get<std::vector<double>>();
    const auto b = g.at("b").get<std::vector<double>>();
    if (omega.size() != a.size() || a.size() != b.size()) {
      throw Error(ErrorCode::Parse, kModule, "GARCH arrays differ in length");
    }
    for (std::size_t i = 0; i < omega.size(); ++i) s.model.garch.push_back({omega[i], a[i], b[i]});
    for (const auto& c : j.at("intercepts")) s.model.intercepts.push_back(matrix_from_json(c, "intercept"));
    for (const auto& p : j.at("corr")) s.model.corr.push_back({p.at("alpha").get<double>(), p.at("beta").get<double>()});
    s.model.validate();
    return s;
  } catch (const nlohmann::json::exception& err) {
    throw Error(ErrorCode::Parse, kModule, fmt::format("malformed model file: {}", err.what()));
  }
}

StoredModel load_model(const std::string& path) {
  const std::string text = read_text(path);
  try {
    return model_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& err) {
    throw Error(ErrorCode::Parse, kModule, fmt::format("{}: {}", path, err.what()));
  }
}

std::vector<Matrix> load_intercepts(const std::string& path) {
  const std::string text = read_text(path);
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<Matrix> out;
    for (const auto& c : j.at("intercepts")) out.push_back(matrix_from_json(c, "intercept"));
    return out;
  } catch (const nlohmann::json::exception& err) {
    throw Error(ErrorCode::Parse, kModule, fmt::format("{}: {}", path, err.what()));
  }
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text, const std::string& name) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return std::string();
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      throw Error(ErrorCode::Parse, kModule, fmt::format("{}:{}: expected key = value", name, line_no));
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::string forecast_csv(const Matrix& sigma) {
  std::string out = "i,j,sigma\n";
  for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) out += fmt::format("{},{},{}\n", i + 1, j + 1, sigma(i, j));
  }
  return out;
}

}  // namespace tdcc
