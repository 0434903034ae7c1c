#include "labrbf/akrr.hpp"

#include "labrbf/logging.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <tuple>
#include <utility>

namespace labrbf::akrr {

namespace {

double condition_of(double rcond) {
    return rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
}

void check_shape(const KernelMatrix& k, double lambda) {
    if (k.rows() != k.cols()) throw DimensionError("kernel matrix must be square");
    if (k.rows() == 0) throw DimensionError("empty kernel matrix");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error("lambda must be positive");
}

void check_system(const KernelMatrix& k, const Vector& y, double lambda) {
    check_shape(k, lambda);
    if (k.rows() != y.size()) {
        throw DimensionError("kernel matrix has " + std::to_string(k.rows()) + " rows but " +
                             std::to_string(y.size()) + " targets");
    }
}

double jitter_for(const KernelMatrix& k) {
    const double scale = k.trace() / static_cast<double>(k.rows());
    return 1e-10 * (scale > 0.0 ? scale : 1.0);
}

// Factorizes the shifted matrix in place, retrying once with jitter when the
// condition estimate is too large. Returns (condition, jitter).
template <typename Factor>
std::pair<double, double> factor_with_jitter(Factor& factor, Eigen::MatrixXd& shifted,
                                             const KernelMatrix& k) {
    factor.compute(shifted);
    double condition = condition_of(factor.rcond());
    double jitter = 0.0;
    if (!(condition <= kMaxCondition)) {
        jitter = jitter_for(k);
        std::ostringstream msg;
        msg << "K + lambda I is ill-conditioned (condition estimate " << condition
            << "), adding jitter " << jitter;
        log::warn(msg.str());
        shifted.diagonal().array() += jitter;
        factor.compute(shifted);
        condition = condition_of(factor.rcond());
        if (!(condition <= kMaxCondition)) {
            throw SolveError("K + lambda I is singular to working precision (condition estimate " +
                                 std::to_string(condition) + ")",
                             condition);
        }
    }
    return {condition, jitter};
}

template <typename Factor>
Vector refined_solve(const Factor& factor, const Eigen::MatrixXd& shifted, const Vector& y) {
    Vector x = factor.solve(y);
    const Vector residual = y - shifted * x;
    if (residual.norm() > 1e-8 * y.norm()) x += factor.solve(residual);
    if (!x.allFinite()) throw SolveError("ridge solve produced non-finite coefficients", 0.0);
    return x;
}

Eigen::MatrixXd apply_map(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Matrix& x) {
    if (x.cols() != w.cols()) throw DimensionError("feature map input dimension mismatch");
    Eigen::MatrixXd z = w * x.transpose();
    z.colwise() += b;
    return z.array().tanh().matrix();
}

Eigen::MatrixXd solve_checked(const Eigen::MatrixXd& a, const Eigen::MatrixXd& rhs,
                              const char* what) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const double cond = condition_of(lu.rcond());
    if (!(cond <= kMaxCondition)) {
        throw SolveError(std::string(what) + " is singular to working precision", cond);
    }
    return lu.solve(rhs);
}

}  // namespace

RidgeFactor::RidgeFactor(const KernelMatrix& k, double lambda) : lambda_(lambda) {
    check_shape(k, lambda);
    shifted_ = k;
    shifted_.diagonal().array() += lambda;
    std::tie(condition_, jitter_) = factor_with_jitter(lu_, shifted_, k);
}

Vector RidgeFactor::solve(const Vector& y) const {
    if (y.size() != shifted_.rows()) throw DimensionError("right-hand side size mismatch");
    return refined_solve(lu_, shifted_, y);
}

Vector RidgeFactor::solve_transpose(const Vector& y) const {
    if (y.size() != shifted_.rows()) throw DimensionError("right-hand side size mismatch");
    return lu_.transpose().solve(y);
}

RidgeSolution fit_alpha(const KernelMatrix& k, const Vector& y, double lambda) {
    check_system(k, y, lambda);
    const RidgeFactor factor(k, lambda);
    return {factor.solve(y), lambda, factor.condition(), factor.jitter()};
}

RidgeSolution fit_alpha_symmetric(const KernelMatrix& k, const Vector& y, double lambda) {
    check_system(k, y, lambda);
    Eigen::MatrixXd shifted = k;
    shifted.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    const auto [condition, jitter] = factor_with_jitter(ldlt, shifted, k);
    return {refined_solve(ldlt, shifted, y), lambda, condition, jitter};
}

Vector predict(const RidgeSolution& sol, const Matrix& support, const kernels::BandwidthSet& theta,
               const Matrix& t) {
    if (sol.alpha.size() != support.rows()) {
        throw DimensionError("coefficient count does not match support size");
    }
    return kernels::lab_rbf_cross(t, support, theta) * sol.alpha;
}

RidgeSolution symmetric_krr_fit(const Matrix& x, const Vector& y, kernels::GlobalBandwidth sigma,
                                double lambda) {
    return fit_alpha_symmetric(kernels::rbf_gram(x, sigma), y, lambda);
}

Vector symmetric_krr_predict(const RidgeSolution& sol, const Matrix& x,
                             kernels::GlobalBandwidth sigma, const Matrix& t) {
    if (sol.alpha.size() != x.rows()) {
        throw DimensionError("coefficient count does not match training size");
    }
    return kernels::rbf_cross(t, x, sigma) * sol.alpha;
}

double woodbury_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         const Eigen::MatrixXd& c, const Eigen::MatrixXd& d) {
    const Index n = a.rows();
    const Index k = d.rows();
    if (a.cols() != n || d.cols() != k || b.rows() != n || b.cols() != k || c.rows() != k ||
        c.cols() != n) {
        throw DimensionError("woodbury_residual: shapes are not conformable");
    }
    // B D^-1 = (D^-T B^T)^T
    const Eigen::MatrixXd b_dinv = solve_checked(d.transpose(), b.transpose(), "D").transpose();
    const Eigen::MatrixXd ainv_b = solve_checked(a, b, "A");

    const Eigen::MatrixXd outer = a + b_dinv * c;
    const Eigen::MatrixXd lhs = solve_checked(outer, b_dinv, "A + B D^-1 C");

    const Eigen::MatrixXd inner = c * ainv_b + d;
    // A^-1 B (inner)^-1 = (inner^-T (A^-1 B)^T)^T
    const Eigen::MatrixXd rhs =
        solve_checked(inner.transpose(), ainv_b.transpose(), "C A^-1 B + D").transpose();
    return (lhs - rhs).norm();
}

FeatureMapPair FeatureMapPair::random(Index input_dims, Index feature_dims, std::uint64_t seed,
                                      bool shared) {
    if (input_dims < 1 || feature_dims < 1) throw DimensionError("feature map dims must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw = [&](Index r, Index c) {
        Eigen::MatrixXd m(r, c);
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < c; ++j) m(i, j) = gauss(rng);
        return m;
    };
    FeatureMapPair maps;
    maps.w_phi = draw(feature_dims, input_dims);
    maps.b_phi = draw(feature_dims, 1);
    if (shared) {
        maps.w_psi = maps.w_phi;
        maps.b_psi = maps.b_phi;
    } else {
        maps.w_psi = draw(feature_dims, input_dims);
        maps.b_psi = draw(feature_dims, 1);
    }
    return maps;
}

Eigen::MatrixXd FeatureMapPair::phi(const Matrix& x) const { return apply_map(w_phi, b_phi, x); }
Eigen::MatrixXd FeatureMapPair::psi(const Matrix& x) const { return apply_map(w_psi, b_psi, x); }

double asymmetric_objective(const Eigen::MatrixXd& phi_x, const Eigen::MatrixXd& psi_x,
                            const Vector& y, double lambda, const Vector& w, const Vector& v) {
    const Vector f1 = phi_x.transpose() * w;
    const Vector f2 = psi_x.transpose() * v;
    return lambda * w.dot(v) + 0.5 * (f1 - y).squaredNorm() + 0.5 * (f2 - y).squaredNorm() -
           0.5 * (f2 - f1).squaredNorm();
}

ObjectiveGradient asymmetric_gradient(const Eigen::MatrixXd& phi_x, const Eigen::MatrixXd& psi_x,
                                      const Vector& y, double lambda, const Vector& w,
                                      const Vector& v) {
    ObjectiveGradient g;
    g.dw = lambda * v + phi_x * (psi_x.transpose() * v - y);
    g.dv = lambda * w + psi_x * (phi_x.transpose() * w - y);
    return g;
}

StationaryPoint asymmetric_stationary(const FeatureMapPair& maps, const Matrix& x, const Vector& y,
                                      double lambda) {
    if (x.rows() != y.size()) throw DimensionError("sample count mismatch");
    if (!(lambda > 0.0)) throw Error("lambda must be positive");
    const Eigen::MatrixXd phi_x = maps.phi(x);
    const Eigen::MatrixXd psi_x = maps.psi(x);
    const Index n = x.rows();
    const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);

    StationaryPoint sp;
    sp.w = psi_x * solve_checked(phi_x.transpose() * psi_x + lambda * ident, y, "phi'psi + lambda I");
    sp.v = phi_x * solve_checked(psi_x.transpose() * phi_x + lambda * ident, y, "psi'phi + lambda I");
    const auto g = asymmetric_gradient(phi_x, psi_x, y, lambda, sp.w, sp.v);
    sp.grad_norm_w = g.dw.norm();
    sp.grad_norm_v = g.dv.norm();
    return sp;
}

double KktPoint::e_beta_gap() const { return (e - beta_dual).cwiseAbs().maxCoeff(); }
double KktPoint::r_alpha_gap() const { return (r - alpha_dual).cwiseAbs().maxCoeff(); }

double KktPoint::opposite_sign_fraction() const {
    if (e.size() == 0) return 0.0;
    return static_cast<double>((e.array() * r.array() < 0.0).count()) /
           static_cast<double>(e.size());
}

KktPoint kkt_point(const FeatureMapPair& maps, const Matrix& x, const Vector& y, double lambda) {
    if (x.rows() != y.size()) throw DimensionError("sample count mismatch");
    if (!(lambda > 0.0)) throw Error("lambda must be positive");
    const Eigen::MatrixXd phi_x = maps.phi(x);
    const Eigen::MatrixXd psi_x = maps.psi(x);
    const Index n = x.rows();
    const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);

    KktPoint p;
    p.beta_dual = lambda * solve_checked(phi_x.transpose() * psi_x + lambda * ident, y,
                                         "phi'psi + lambda I");
    p.alpha_dual = lambda * solve_checked(psi_x.transpose() * phi_x + lambda * ident, y,
                                          "psi'phi + lambda I");
    p.w = psi_x * p.beta_dual / lambda;
    p.v = phi_x * p.alpha_dual / lambda;
    p.e = y - phi_x.transpose() * p.w;
    p.r = y - psi_x.transpose() * p.v;
    return p;
}

}  // namespace labrbf::akrr
