#pragma once

#include "labrbf/akrr.hpp"
#include "labrbf/data.hpp"
#include "labrbf/kernels.hpp"
#include "labrbf/types.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace labrbf::learning {

enum class Optimizer { Sgd, Adam };

[[nodiscard]] std::string to_string(Optimizer o);
[[nodiscard]] Optimizer parse_optimizer(const std::string& name);

/// Hyperparameters of the bandwidth-learning loop.
struct TrainConfig {
    double lambda = 1e-6;
    double eta = 0.01;        // learning rate
    double sigma0 = 1.0;      // initial bandwidth of every support row
    Index n0 = 10;            // initial support size
    Index k = 10;             // points added per expansion
    double epsilon = 1e-4;    // squared-error tolerance on the normalized scale
    Index max_sv = 100;
    Index inner_iters = 200;
    Index outer_iters = 50;
    Index batch_size = 128;
    double theta_min = kernels::kDefaultThetaMin;
    std::uint64_t seed = 0;
    data::SupportStrategy support_strategy = data::SupportStrategy::UniformRandom;
    Optimizer optimizer = Optimizer::Sgd;

    /// Throws Error on violated invariants (n0 <= max_sv, positive fields, ...).
    void validate() const;
};

/// The deployable regressor f(t) = K_theta(t, X_sv) alpha.
struct LabModel {
    Matrix support_x;
    Vector support_y;
    kernels::BandwidthSet theta;
    Vector alpha;
    double lambda = 0.0;
    data::NormalizationParams norm;

    [[nodiscard]] Index support_size() const { return support_x.rows(); }
    [[nodiscard]] Index dims() const { return support_x.cols(); }
    /// Predictions for normalized inputs, on the normalized target scale.
    [[nodiscard]] Vector predict(const Matrix& normalized_x) const;
    /// Predictions for raw inputs, de-normalized to raw target units.
    [[nodiscard]] Vector predict_raw(const Matrix& raw_x) const;
};

struct TraceRecord {
    Index outer_iteration = 0;
    Index support_size = 0;
    double pool_loss = 0.0;        // mean squared error over the remaining pool
    double max_pool_error = 0.0;   // max_i xi_i
    Index added = 0;
    double wall_seconds = 0.0;     // cumulative since the start of training
};

struct TrainTrace {
    std::vector<TraceRecord> records;
    IndexList initial_support;     // rows of the training set
    std::vector<IndexList> added;  // rows moved into the support set per expansion
    double final_train_loss = 0.0; // mean squared error over the whole training set
    std::string stop_reason;
};

/// Borrowed (X, Y) pair.
struct SampleView {
    const Matrix& x;
    const Vector& y;
};

/// ||K(X_b, X_sv) (K(X_sv, X_sv) + lambda I)^-1 Y_sv - Y_b||^2.
[[nodiscard]] double loss(const kernels::BandwidthSet& theta, SampleView support, SampleView batch,
                          double lambda);

struct LossAndGradient {
    double loss = 0.0;
    Matrix gradient;  // N_sv x M, d loss / d theta(l, m)
};

/// Loss and its exact gradient with respect to every bandwidth. One LU
/// factorization of K_sv + lambda I serves both the forward solve and the
/// adjoint solve; per-parameter work exploits that d K / d theta(l, m) is
/// nonzero only in column l.
[[nodiscard]] LossAndGradient loss_grad(const kernels::BandwidthSet& theta, SampleView support,
                                        SampleView batch, double lambda);

/// Runs config.inner_iters minibatch steps theta <- max(theta - eta * grad, theta_min),
/// each on batch_size pool points drawn uniformly without replacement.
[[nodiscard]] kernels::BandwidthSet inner_sgd(kernels::BandwidthSet theta, SampleView support,
                                              SampleView pool, const TrainConfig& config,
                                              std::mt19937_64& rng);

struct ExpandResult {
    bool done = false;
    IndexList support;
    IndexList pool;
    IndexList added;  // in order of decreasing error
    double max_error = 0.0;
};

/// Given squared errors xi (aligned with pool), either reports done (max xi <= epsilon
/// or the support is full) or moves the k pool points with largest error into the
/// support set, never exceeding max_sv. Ties go to the lower index.
[[nodiscard]] ExpandResult dynamic_expand(const IndexList& support, const IndexList& pool,
                                          const Vector& pool_errors, Index k, double epsilon,
                                          Index max_sv);

struct TrainResult {
    LabModel model;
    TrainTrace trace;
};

/// Full bandwidth-learning loop on a normalized training set.
[[nodiscard]] TrainResult train(const data::Dataset& train_set, const TrainConfig& config);

}  // namespace labrbf::learning
