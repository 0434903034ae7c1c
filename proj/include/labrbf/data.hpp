#pragma once

#include "labrbf/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace labrbf::data {

/// Features and targets in their original units.
struct RawDataset {
    Matrix features;
    Vector targets;
    std::vector<std::string> column_names;  // feature names; empty without a header
    std::string target_name;

    [[nodiscard]] Index size() const { return features.rows(); }
    [[nodiscard]] Index dims() const { return features.cols(); }
};

/// Per-column (min, max) of the affine map onto [-1, 1].
struct NormalizationParams {
    Vector feature_min;
    Vector feature_max;
    double target_min = 0.0;
    double target_max = 0.0;

    /// Maps raw feature rows onto the normalized scale. Constant columns map to 0.
    [[nodiscard]] Matrix normalize_features(const Matrix& raw) const;
    [[nodiscard]] Vector normalize_targets(const Vector& raw) const;
    [[nodiscard]] Matrix denormalize_features(const Matrix& scaled) const;
    [[nodiscard]] Vector denormalize_targets(const Vector& scaled) const;
};

/// Normalized data. Every entry lies in [-1, 1].
struct Dataset {
    Matrix features;
    Vector targets;
    NormalizationParams norm;

    [[nodiscard]] Index size() const { return features.rows(); }
    [[nodiscard]] Index dims() const { return features.cols(); }
    [[nodiscard]] Dataset subset(const IndexList& rows) const;
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

struct TrainTestSplit {
    Dataset train;
    Dataset test;
    IndexList train_indices;
    IndexList test_indices;
};

enum class SupportStrategy { UniformRandom, LabelSortedEven };

[[nodiscard]] std::string to_string(SupportStrategy s);
[[nodiscard]] SupportStrategy parse_support_strategy(const std::string& name);

struct SupportSelection {
    IndexList support;
    IndexList remainder;
};

/// A target column addressed by header name or zero-based index.
using ColumnRef = std::variant<std::string, std::size_t>;

/// Parses `text` as a column reference: all-digit strings become indices.
[[nodiscard]] ColumnRef parse_column_ref(const std::string& text);

/// Reads a numeric table. Empty cells and literal "NaN" are missing values;
/// with `impute` they become the mean of the present cells in that column.
/// Files without commas on the first line are split on whitespace instead.
[[nodiscard]] RawDataset load_csv(const std::filesystem::path& path, const ColumnRef& target,
                                  bool impute);

/// Same as load_csv but reads from an in-memory string.
[[nodiscard]] RawDataset parse_csv(const std::string& text, const ColumnRef& target, bool impute);

/// Reads a table whose columns are all features (no target column).
[[nodiscard]] Matrix load_features_csv(const std::filesystem::path& path, bool impute);
[[nodiscard]] Matrix parse_features_csv(const std::string& text, bool impute);

[[nodiscard]] NormalizationParams fit_normalization(const RawDataset& raw);
[[nodiscard]] Dataset normalize(const RawDataset& raw);
[[nodiscard]] Dataset apply_normalization(const RawDataset& raw, const NormalizationParams& norm);
[[nodiscard]] RawDataset denormalize(const Dataset& ds);

[[nodiscard]] TrainTestSplit split(const Dataset& ds, const SplitSpec& spec);

/// y = sin(2 x^3).
[[nodiscard]] double sin2x3(double x);

/// Cherkassky-Mulier test functions f1 (M=2), f2 (M=6), f3 (M=4).
[[nodiscard]] double cherkassky(int id, PointRef x);
[[nodiscard]] int cherkassky_dims(int id);
/// Default sampling box for each function. f1 uses [-2, 2]^2.
[[nodiscard]] std::pair<double, double> cherkassky_domain(int id);

/// x ~ U[lo, hi]; noise is Gaussian with variance noise * var(clean targets).
[[nodiscard]] RawDataset synth_sin2x3(Index n, double lo, double hi, double noise,
                                      std::uint64_t seed);

[[nodiscard]] RawDataset synth_cherkassky(int id, Index n, double noise, std::uint64_t seed,
                                          std::optional<std::pair<double, double>> domain = {});

[[nodiscard]] SupportSelection select_initial_support(const Dataset& ds, Index n0,
                                                      SupportStrategy strategy,
                                                      std::uint64_t seed);

/// Writes normalized values as CSV (features then target) plus a JSON sidecar
/// holding the normalization parameters.
void export_dataset(const Dataset& ds, const std::filesystem::path& csv_path,
                    const std::filesystem::path& json_path,
                    const std::vector<std::string>& column_names = {},
                    const std::string& target_name = "y");

/// Writes raw values as CSV with a header row.
void write_csv(const RawDataset& raw, const std::filesystem::path& path);

}  // namespace labrbf::data
