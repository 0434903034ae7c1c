#pragma once

#include "labrbf/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace labrbf::checks {

/// Outcome of one randomized numerical self-check.
struct CheckResult {
    std::string name;
    double value = 0.0;      // worst residual or error observed
    double threshold = 0.0;  // passes iff value < threshold
    Index instances = 0;
    double seconds = 0.0;
    std::string detail;

    [[nodiscard]] bool passed() const { return value < threshold; }
};

struct SuiteOptions {
    std::uint64_t seed = 0;
    Index instances = 10;
    Index max_points = 40;    // N
    Index max_features = 32;  // F, feature-map width
    double lambda = 0.5;
};

/// Matrix inversion lemma residual on random diagonally dominant instances up to max_n.
[[nodiscard]] CheckResult woodbury_check(std::uint64_t seed, Index instances = 20,
                                         Index max_n = 20);

/// Largest analytic gradient norm of the asymmetric objective at the closed-form
/// stationary point.
[[nodiscard]] CheckResult stationarity_check(const SuiteOptions& options);

/// Worst relative disagreement between the analytic objective gradient and
/// central finite differences (step 1e-5), at the stationary point and at a
/// random nearby point of each instance.
[[nodiscard]] CheckResult stationarity_fd_check(const SuiteOptions& options);

/// max(|e - beta|, |r - alpha|) over all instances.
[[nodiscard]] CheckResult kkt_check(const SuiteOptions& options);

/// Kernel-side recomputation of the KKT residuals: e = lambda (K + lambda I)^-1 Y and
/// r = lambda (K' + lambda I)^-1 Y with K = phi'psi, plus sum e_i r_i = sum alpha_i beta_i.
[[nodiscard]] CheckResult kkt_kernel_check(const SuiteOptions& options);

/// With phi = psi: max of ||w* - v*|| and ||w* - phi (phi'phi + lambda I)^-1 Y||.
[[nodiscard]] CheckResult shared_map_check(const SuiteOptions& options);

/// Constant-bandwidth LAB pipeline versus symmetric RBF KRR at random test points.
[[nodiscard]] CheckResult constant_bandwidth_check(std::uint64_t seed, Index datasets = 10,
                                                   Index test_points = 200);

/// Predictions at the support points with lambda = 1e-8 versus Y_sv.
[[nodiscard]] CheckResult interpolation_check(std::uint64_t seed, Index instances = 10);

/// Finite-difference checks of loss_grad and lab_rbf_grad_theta over random probes.
/// Relative error uses an absolute floor of 1e-8 for near-zero components.
struct GradcheckReport {
    CheckResult loss_grad;
    CheckResult kernel_grad;
};
[[nodiscard]] GradcheckReport gradcheck(std::uint64_t seed, Index probes);

/// Largest |loss_grad| entry for a batch whose targets equal the model's own
/// predictions, so the residual is exactly zero.
[[nodiscard]] double zero_residual_gradient(std::uint64_t seed);

/// Every akrr self-check above with its default threshold.
[[nodiscard]] std::vector<CheckResult> verify_suite(const SuiteOptions& options);

/// Relative error |a - b| / max(|a|, |b|), or |a - b| when both are below floor.
[[nodiscard]] double relative_error(double analytic, double numeric, double floor = 1e-8);

}  // namespace labrbf::checks
