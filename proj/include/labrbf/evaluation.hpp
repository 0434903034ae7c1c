#pragma once

#include "labrbf/data.hpp"
#include "labrbf/kernel_learning.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace labrbf::eval {

/// 1 - sum (y - yhat)^2 / sum (y - mean y)^2. Throws on zero target variance.
[[nodiscard]] double r_squared(const Vector& predictions, const Vector& targets);

/// Relative sum of squared errors, 1 - R^2.
[[nodiscard]] double rsse(const Vector& predictions, const Vector& targets);

enum class Method { Lab, RbfKrr, Tl1Krr };

[[nodiscard]] std::string to_string(Method m);
[[nodiscard]] Method parse_method(const std::string& name);

struct ExperimentConfig {
    learning::TrainConfig lab;
    /// Global RBF bandwidth; chosen on a validation fifth of the training data when unset.
    std::optional<double> rbf_sigma;
    double rbf_lambda = 1e-3;
    std::vector<double> sigma_grid{0.1, 0.5, 1, 2, 3, 5, 10, 20, 50, 80, 100};
    /// TL1 truncation radius; chosen like rbf_sigma when unset.
    std::optional<double> tl1_rho;
    double tl1_lambda = 1e-3;
    std::vector<double> rho_grid{0.5, 1, 2, 2.5, 4, 6, 10, 15, 22};
    double train_fraction = 0.8;
    unsigned jobs = 1;
};

struct RepeatResult {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double r2 = 0.0;
    double rsse = 0.0;
    Index support_count = 0;
    double train_seconds = 0.0;
    double predict_seconds = 0.0;
    std::optional<double> selected_param;  // sigma or rho picked by grid search
};

struct ExperimentReport {
    Method method = Method::Lab;
    std::vector<RepeatResult> repeats;  // in seed order
    double mean_r2 = 0.0;
    double std_r2 = 0.0;
    double mean_rsse = 0.0;
    double std_rsse = 0.0;
    double mean_support = 0.0;
    std::size_t failed = 0;
    nlohmann::json config;

    /// Recomputes the aggregates from the successful per-repeat rows
    /// (population standard deviation).
    void aggregate();
};

/// Outcome of one train/evaluate cycle on an already split dataset.
[[nodiscard]] RepeatResult evaluate_split(const data::Dataset& train, const data::Dataset& test,
                                          Method method, const ExperimentConfig& config,
                                          std::uint64_t seed);

/// Per repeat r: normalize, split with seed base_seed + r, fit, score test R^2 on the
/// normalized scale. Failures are recorded per repeat.
[[nodiscard]] ExperimentReport run_experiment(const data::RawDataset& dataset, Method method,
                                              const ExperimentConfig& config, Index repeats,
                                              std::uint64_t base_seed);

struct SweepPoint {
    double value = 0.0;  // support ratio or initial bandwidth
    double mean_rsse = 0.0;
    double std_rsse = 0.0;
    Index support_count = 0;  // max_sv used for this point
    std::size_t failed = 0;
};

/// For each ratio, max_sv = floor(ratio * N_train) and the LAB method is run
/// through run_experiment.
[[nodiscard]] std::vector<SweepPoint> support_ratio_sweep(const data::RawDataset& dataset,
                                                          const std::vector<double>& ratios,
                                                          const ExperimentConfig& config,
                                                          Index repeats, std::uint64_t base_seed);

/// Same protocol as support_ratio_sweep but varying the initial bandwidth sigma0.
[[nodiscard]] std::vector<SweepPoint> sigma0_sweep(const data::RawDataset& dataset,
                                                   const std::vector<double>& sigma0_values,
                                                   const ExperimentConfig& config, Index repeats,
                                                   std::uint64_t base_seed);

[[nodiscard]] nlohmann::json report_to_json(const ExperimentReport& report);
void write_report_json(const std::vector<ExperimentReport>& reports,
                       const std::filesystem::path& path);
void write_repeats_csv(const std::vector<ExperimentReport>& reports,
                       const std::filesystem::path& path);
void write_sweep_csv(const std::vector<SweepPoint>& curve, const std::string& value_name,
                     const std::filesystem::path& path);

}  // namespace labrbf::eval
