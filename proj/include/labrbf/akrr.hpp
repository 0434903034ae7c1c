#pragma once

#include "labrbf/kernels.hpp"
#include "labrbf/types.hpp"

#include <cstdint>

namespace labrbf::akrr {

/// Reciprocal-condition threshold: 1-norm condition estimates above 1e12 trigger jitter.
inline constexpr double kMaxCondition = 1e12;

/// Coefficients alpha of (K + lambda I) alpha = Y.
struct RidgeSolution {
    Vector alpha;
    double lambda = 0.0;
    double condition = 1.0;  // 1-norm condition estimate of the factorized matrix
    double jitter = 0.0;     // diagonal shift added on top of lambda, 0 unless ill-conditioned
};

/// Partially pivoted LU of K + lambda I, kept for repeated solves with the same
/// matrix or its transpose. If the 1-norm condition estimate exceeds
/// kMaxCondition the diagonal is shifted once more by 1e-10 * trace(K) / N; a
/// second failure throws SolveError.
class RidgeFactor {
public:
    RidgeFactor(const KernelMatrix& k, double lambda);

    /// (K + lambda I)^-1 y, with one step of iterative refinement when the
    /// residual exceeds 1e-8 ||y||.
    [[nodiscard]] Vector solve(const Vector& y) const;
    /// (K + lambda I)^-T y
    [[nodiscard]] Vector solve_transpose(const Vector& y) const;

    [[nodiscard]] double lambda() const { return lambda_; }
    [[nodiscard]] double jitter() const { return jitter_; }
    [[nodiscard]] double condition() const { return condition_; }

private:
    Eigen::MatrixXd shifted_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    double lambda_;
    double jitter_ = 0.0;
    double condition_ = 1.0;
};

/// Solves (K + lambda I) alpha = Y with partially pivoted LU. K need not be
/// symmetric. If the condition estimate exceeds kMaxCondition the diagonal is
/// shifted once more by 1e-10 * trace(K) / N; a second failure throws SolveError.
[[nodiscard]] RidgeSolution fit_alpha(const KernelMatrix& k, const Vector& y, double lambda);

/// Same contract as fit_alpha but for symmetric K, using an LDL^T factorization.
[[nodiscard]] RidgeSolution fit_alpha_symmetric(const KernelMatrix& k, const Vector& y,
                                                double lambda);

/// Support-point interpolant: lab_rbf_cross(T, X_sv, theta) * alpha.
[[nodiscard]] Vector predict(const RidgeSolution& sol, const Matrix& support,
                             const kernels::BandwidthSet& theta, const Matrix& t);

/// Classical KRR with the global RBF kernel.
[[nodiscard]] RidgeSolution symmetric_krr_fit(const Matrix& x, const Vector& y,
                                              kernels::GlobalBandwidth sigma, double lambda);

[[nodiscard]] Vector symmetric_krr_predict(const RidgeSolution& sol, const Matrix& x,
                                           kernels::GlobalBandwidth sigma, const Matrix& t);

/// ||(A + B D^-1 C)^-1 B D^-1 - A^-1 B (C A^-1 B + D)^-1||_F.
[[nodiscard]] double woodbury_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                       const Eigen::MatrixXd& c, const Eigen::MatrixXd& d);

/// Two explicit feature maps phi, psi: R^M -> R^F of the form tanh(W x + b).
/// Only used to make the asymmetric KRR identities machine-checkable.
struct FeatureMapPair {
    Eigen::MatrixXd w_phi, w_psi;  // F x M
    Eigen::VectorXd b_phi, b_psi;  // F

    /// Standard-normal weights from a fixed seed. With `shared`, psi == phi.
    static FeatureMapPair random(Index input_dims, Index feature_dims, std::uint64_t seed,
                                 bool shared = false);

    [[nodiscard]] Index feature_dims() const { return w_phi.rows(); }
    /// F x N matrices [phi(x_1), ..., phi(x_N)].
    [[nodiscard]] Eigen::MatrixXd phi(const Matrix& x) const;
    [[nodiscard]] Eigen::MatrixXd psi(const Matrix& x) const;
};

/// Value of the asymmetric KRR objective
/// lambda w'v + 1/2||phi'w - Y||^2 + 1/2||psi'v - Y||^2 - 1/2||psi'v - phi'w||^2.
[[nodiscard]] double asymmetric_objective(const Eigen::MatrixXd& phi_x,
                                          const Eigen::MatrixXd& psi_x, const Vector& y,
                                          double lambda, const Vector& w, const Vector& v);

struct ObjectiveGradient {
    Vector dw;
    Vector dv;
};

/// Analytic gradient: dL/dw = lambda v + phi (psi'v - Y), dL/dv = lambda w + psi (phi'w - Y).
[[nodiscard]] ObjectiveGradient asymmetric_gradient(const Eigen::MatrixXd& phi_x,
                                                    const Eigen::MatrixXd& psi_x, const Vector& y,
                                                    double lambda, const Vector& w,
                                                    const Vector& v);

struct StationaryPoint {
    Vector w;
    Vector v;
    double grad_norm_w = 0.0;
    double grad_norm_v = 0.0;
};

/// w* = psi (phi'psi + lambda I)^-1 Y and v* = phi (psi'phi + lambda I)^-1 Y,
/// with the objective gradient norms evaluated there.
[[nodiscard]] StationaryPoint asymmetric_stationary(const FeatureMapPair& maps, const Matrix& x,
                                                    const Vector& y, double lambda);

struct KktPoint {
    Vector w, v;
    Vector e, r;
    Vector alpha_dual, beta_dual;

    /// max_i |e_i - beta_i|
    [[nodiscard]] double e_beta_gap() const;
    /// max_i |r_i - alpha_i|
    [[nodiscard]] double r_alpha_gap() const;
    /// Fraction of training points where the two regressors err in opposite directions.
    [[nodiscard]] double opposite_sign_fraction() const;
    [[nodiscard]] double train_error_f1() const { return e.squaredNorm(); }
    [[nodiscard]] double train_error_f2() const { return r.squaredNorm(); }
};

/// KKT point of the error-variable form: beta = lambda (phi'psi + lambda I)^-1 Y,
/// alpha = lambda (psi'phi + lambda I)^-1 Y, w = psi beta / lambda, v = phi alpha / lambda,
/// e = Y - phi'w, r = Y - psi'v.
[[nodiscard]] KktPoint kkt_point(const FeatureMapPair& maps, const Matrix& x, const Vector& y,
                                 double lambda);

}  // namespace labrbf::akrr
