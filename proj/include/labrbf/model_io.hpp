#pragma once

#include "labrbf/data.hpp"
#include "labrbf/kernel_learning.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>

namespace labrbf::io {

inline constexpr int kModelFormatVersion = 1;

class FormatError : public Error {
public:
    using Error::Error;
};

[[nodiscard]] nlohmann::json normalization_to_json(const data::NormalizationParams& p);
[[nodiscard]] data::NormalizationParams normalization_from_json(const nlohmann::json& j);

/// Model document: format_version, dims, lambda, theta_min, support_x (row-major),
/// support_y, theta (row-major), alpha, normalization.
[[nodiscard]] nlohmann::json model_to_json(const learning::LabModel& model);
[[nodiscard]] learning::LabModel model_from_json(const nlohmann::json& j);

void save_model(const learning::LabModel& model, const std::filesystem::path& path);
[[nodiscard]] learning::LabModel load_model(const std::filesystem::path& path);

/// One row per outer iteration.
void write_trace_csv(const learning::TrainTrace& trace, const std::filesystem::path& path);

/// Reads a flat key/value map from a JSON object or from `key = value` lines
/// ('#' starts a comment). Keys use the CLI flag spelling, e.g. "max-sv" or "max_sv".
[[nodiscard]] std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Applies one setting to a TrainConfig. Returns false for keys it does not know.
bool apply_train_setting(learning::TrainConfig& config, const std::string& key,
                         const std::string& value);

[[nodiscard]] nlohmann::json train_config_to_json(const learning::TrainConfig& config);

}  // namespace labrbf::io
