#pragma once

#include "tdcc/baselines.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace tdcc {

/**
 * DatasetFile: a `# dims=N1x...xNK` header line, then one CSV row per time
 * point with N values in vec order, optionally preceded by a date cell.
 * A single non-numeric column-name row after the header is skipped.
 */
struct Dataset {
  Dims dims;
  std::vector<Tensor> x;
  std::vector<std::string> dates;  // empty when the file has no date column
};

Dataset parse_dataset(const std::string& text, const std::string& name = "<input>");
Dataset load_dataset(const std::string& path);
/// Canonical formatting: shortest round-trip decimal for every value.
std::string format_dataset(const Dataset& data);
void save_dataset(const std::string& path, const Dataset& data);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& content);

/// A model as stored in a `tdcc_model_v1` file.
struct StoredModel {
  MethodSpec method;
  Dims source_dims;
  TdccModel model;  // adapted coordinates
};

nlohmann::ordered_json model_to_json(const MethodFit& fit);
StoredModel model_from_json(const nlohmann::json& j);
StoredModel load_model(const std::string& path);

/// Reads the "intercepts" array (one square matrix per mode) of a JSON file.
std::vector<Matrix> load_intercepts(const std::string& path);

/// `key = value` lines; '#' starts a comment. Keys keep file order.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text,
                                                                  const std::string& name = "<config>");

/// Rows i,j,value for the lower triangle in row-major order (1-based indices).
std::string forecast_csv(const Matrix& sigma);

}  // namespace tdcc
