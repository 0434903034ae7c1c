#pragma once

#include "labrbf/types.hpp"

namespace labrbf::kernels {

inline constexpr double kDefaultThetaMin = 1e-6;

/// Per-support-point bandwidth vectors: row i holds theta_i, one entry per
/// input dimension. Every entry stays >= theta_min > 0.
class BandwidthSet {
public:
    BandwidthSet() = default;
    BandwidthSet(Matrix theta, double theta_min = kDefaultThetaMin);

    /// n rows of constant bandwidth `value`.
    static BandwidthSet constant(Index n, Index dims, double value,
                                 double theta_min = kDefaultThetaMin);

    [[nodiscard]] Index size() const { return theta_.rows(); }
    [[nodiscard]] Index dims() const { return theta_.cols(); }
    [[nodiscard]] double theta_min() const { return theta_min_; }
    [[nodiscard]] const Matrix& values() const { return theta_; }
    [[nodiscard]] double operator()(Index i, Index m) const { return theta_(i, m); }
    [[nodiscard]] auto row(Index i) const { return theta_.row(i); }

    /// theta <- max(theta - step, theta_min), elementwise.
    void descend(const Matrix& step);

    /// Appends `count` rows initialized to `value`.
    void append_rows(Index count, double value);

private:
    Matrix theta_;
    double theta_min_ = kDefaultThetaMin;
};

/// A single bandwidth shared by every point and dimension.
struct GlobalBandwidth {
    explicit GlobalBandwidth(double s);
    double sigma;
};

/// exp(-sum_p theta_p^2 (t_p - x_p)^2). The bandwidth belongs to x.
[[nodiscard]] double lab_rbf_eval(PointRef t, PointRef x, PointRef theta);

/// R x N_sv matrix K(T_i, X_j) evaluated with the bandwidth of column point j.
[[nodiscard]] KernelMatrix lab_rbf_cross(const Matrix& t, const Matrix& support,
                                         const BandwidthSet& theta);

/// Asymmetric N_sv x N_sv Gram matrix of the support points; unit diagonal.
[[nodiscard]] KernelMatrix lab_rbf_gram(const Matrix& support, const BandwidthSet& theta);

/// Derivative of lab_rbf_cross(t, support, theta) with respect to theta(l, m).
/// Only column l is nonzero.
[[nodiscard]] KernelMatrix lab_rbf_grad_theta(const Matrix& t, const Matrix& support,
                                              const BandwidthSet& theta, Index l, Index m);

/// Global RBF kernel exp(-sigma^2 ||x - x'||^2). This is the constant-bandwidth
/// case of the LAB RBF kernel, not the exp(-||x - x'||^2 / (2 sigma^2)) convention.
[[nodiscard]] KernelMatrix rbf_cross(const Matrix& t, const Matrix& x, GlobalBandwidth sigma);
[[nodiscard]] KernelMatrix rbf_gram(const Matrix& x, GlobalBandwidth sigma);

/// Truncated l1 kernel max(rho - ||x - x'||_1, 0).
[[nodiscard]] double tl1_eval(PointRef x, PointRef y, double rho);
[[nodiscard]] KernelMatrix tl1_cross(const Matrix& t, const Matrix& x, double rho);

}  // namespace labrbf::kernels
