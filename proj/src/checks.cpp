#include "labrbf/checks.hpp"

#include "labrbf/akrr.hpp"
#include "labrbf/kernel_learning.hpp"
#include "labrbf/kernels.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace labrbf::checks {

namespace {

using Clock = std::chrono::steady_clock;
using Eigen::MatrixXd;

class Timer {
public:
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(Clock::now() - start_).count();
    }

private:
    Clock::time_point start_ = Clock::now();
};

Index uniform_index(std::mt19937_64& rng, Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

MatrixXd gaussian(std::mt19937_64& rng, Index rows, Index cols) {
    std::normal_distribution<double> n01;
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = n01(rng);
    return m;
}

Matrix uniform_points(std::mt19937_64& rng, Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = uniform(rng, 0.0, 1.0);
    return m;
}

// One random finite-map instance of the asymmetric KRR problem.
struct MapInstance {
    akrr::FeatureMapPair maps;
    Matrix x;
    Vector y;
    MatrixXd phi_x, psi_x;
};

// One random finite-map instance whose inner matrix phi'psi + lambda I has a
// 1-norm condition estimate below 1e6; near-singular draws are redrawn.
MapInstance make_instance(std::mt19937_64& rng, const SuiteOptions& o, bool shared) {
    for (;;) {
        const Index f = uniform_index(rng, 4, std::max<Index>(4, o.max_features));
        const Index n = uniform_index(rng, 2, std::max<Index>(2, o.max_points));
        const Index m = uniform_index(rng, 1, 5);
        MapInstance inst;
        inst.maps = akrr::FeatureMapPair::random(m, f, rng(), shared);
        inst.x = gaussian(rng, n, m);
        inst.y = gaussian(rng, n, 1).col(0);
        inst.phi_x = inst.maps.phi(inst.x);
        inst.psi_x = inst.maps.psi(inst.x);
        const MatrixXd inner =
            inst.phi_x.transpose() * inst.psi_x + o.lambda * MatrixXd::Identity(n, n);
        if (inner.partialPivLu().rcond() > 1e-6) return inst;
    }
}

// Central differences of the asymmetric objective in every coordinate of (w, v).
Vector objective_fd(const MapInstance& inst, double lambda, const Vector& w, const Vector& v,
                    double h) {
    const Index f = w.size();
    Vector g(2 * f);
    for (Index i = 0; i < 2 * f; ++i) {
        Vector wp = w, wm = w, vp = v, vm = v;
        if (i < f) {
            wp(i) += h;
            wm(i) -= h;
        } else {
            vp(i - f) += h;
            vm(i - f) -= h;
        }
        const double lp = akrr::asymmetric_objective(inst.phi_x, inst.psi_x, inst.y, lambda, wp, vp);
        const double lm = akrr::asymmetric_objective(inst.phi_x, inst.psi_x, inst.y, lambda, wm, vm);
        g(i) = (lp - lm) / (2.0 * h);
    }
    return g;
}

Vector stacked_gradient(const MapInstance& inst, double lambda, const Vector& w, const Vector& v) {
    const auto g = akrr::asymmetric_gradient(inst.phi_x, inst.psi_x, inst.y, lambda, w, v);
    Vector out(g.dw.size() + g.dv.size());
    out << g.dw, g.dv;
    return out;
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    const double diff = std::abs(analytic - numeric);
    return scale < floor ? diff : diff / scale;
}

CheckResult woodbury_check(std::uint64_t seed, Index instances, Index max_n) {
    Timer timer;
    std::mt19937_64 rng(seed);
    CheckResult out{"woodbury", 0.0, 1e-10, instances, 0.0, {}};
    for (Index t = 0; t < instances; ++t) {
        const Index n = uniform_index(rng, 1, max_n);
        const Index m = uniform_index(rng, 1, max_n);
        const MatrixXd a = gaussian(rng, n, n) + 2.0 * std::sqrt(double(n)) * MatrixXd::Identity(n, n);
        const MatrixXd d = gaussian(rng, m, m) + 2.0 * std::sqrt(double(m)) * MatrixXd::Identity(m, m);
        const MatrixXd b = gaussian(rng, n, m) / std::sqrt(double(m));
        const MatrixXd c = gaussian(rng, m, n) / std::sqrt(double(n));
        out.value = std::max(out.value, akrr::woodbury_residual(a, b, c, d));
    }
    out.seconds = timer.seconds();
    return out;
}

CheckResult stationarity_check(const SuiteOptions& o) {
    Timer timer;
    std::mt19937_64 rng(derive_seed(o.seed, 11));
    CheckResult out{"stationarity", 0.0, 1e-8, o.instances, 0.0, {}};
    for (Index t = 0; t < o.instances; ++t) {
        const auto inst = make_instance(rng, o, false);
        const auto s = akrr::asymmetric_stationary(inst.maps, inst.x, inst.y, o.lambda);
        out.value = std::max({out.value, s.grad_norm_w, s.grad_norm_v});
    }
    out.seconds = timer.seconds();
    return out;
}

CheckResult stationarity_fd_check(const SuiteOptions& o) {
    Timer timer;
    std::mt19937_64 rng(derive_seed(o.seed, 11));
    CheckResult out{"stationarity_fd", 0.0, 1e-4, o.instances, 0.0, {}};
    constexpr double h = 1e-5;
    for (Index t = 0; t < o.instances; ++t) {
        const auto inst = make_instance(rng, o, false);
        const auto s = akrr::asymmetric_stationary(inst.maps, inst.x, inst.y, o.lambda);
        // Both sides vanish at the stationary point, so the disagreement there is
        // measured against the gradient scale at a random nearby point.
        const Vector g0 = stacked_gradient(inst, o.lambda, s.w, s.v);
        const Vector fd0 = objective_fd(inst, o.lambda, s.w, s.v, h);

        const Vector w = s.w + gaussian(rng, s.w.size(), 1).col(0);
        const Vector v = s.v + gaussian(rng, s.v.size(), 1).col(0);
        const Vector g = stacked_gradient(inst, o.lambda, w, v);
        const Vector fd = objective_fd(inst, o.lambda, w, v, h);
        const double scale = std::max(g.norm(), 1e-8);
        out.value = std::max({out.value, (g - fd).norm() / scale, (g0 - fd0).norm() / scale});
    }
    out.seconds = timer.seconds();
    return out;
}

CheckResult kkt_check(const SuiteOptions& o) {
    Timer timer;
    std::mt19937_64 rng(derive_seed(o.seed, 11));
    CheckResult out{"kkt", 0.0, 1e-8, o.instances, 0.0, {}};
    double opposite = 0.0;
    for (Index t = 0; t < o.instances; ++t) {
        const auto inst = make_instance(rng, o, false);
        const auto k = akrr::kkt_point(inst.maps, inst.x, inst.y, o.lambda);
        out.value = std::max({out.value, k.e_beta_gap(), k.r_alpha_gap()});
        opposite += k.opposite_sign_fraction();
    }
    out.detail = "mean fraction of opposite-sign residuals " +
                 std::to_string(opposite / static_cast<double>(std::max<Index>(1, o.instances)));
    out.seconds = timer.seconds();
    return out;
}

CheckResult kkt_kernel_check(const SuiteOptions& o) {
    Timer timer;
    std::mt19937_64 rng(derive_seed(o.seed, 11));
    CheckResult out{"kkt_kernel", 0.0, 1e-8, o.instances, 0.0, {}};
    for (Index t = 0; t < o.instances; ++t) {
        const auto inst = make_instance(rng, o, false);
        const auto k = akrr::kkt_point(inst.maps, inst.x, inst.y, o.lambda);
        const MatrixXd gram = inst.phi_x.transpose() * inst.psi_x;
        const Index n = gram.rows();
        const MatrixXd eye = MatrixXd::Identity(n, n);
        const Vector e = o.lambda * (gram + o.lambda * eye).partialPivLu().solve(inst.y);
        const Vector r = o.lambda * (gram.transpose() + o.lambda * eye).partialPivLu().solve(inst.y);
        const double cross = std::abs(k.e.dot(k.r) - k.alpha_dual.dot(k.beta_dual));
        out.value = std::max({out.value, (k.e - e).lpNorm<Eigen::Infinity>(),
                              (k.r - r).lpNorm<Eigen::Infinity>(), cross});
    }
    out.seconds = timer.seconds();
    return out;
}

CheckResult shared_map_check(const SuiteOptions& o) {
    Timer timer;
    std::mt19937_64 rng(derive_seed(o.seed, 13));
    CheckResult out{"shared_map", 0.0, 1e-10, o.instances, 0.0, {}};
    for (Index t = 0; t < o.instances; ++t) {
        const auto inst = make_instance(rng, o, true);
        const auto s = akrr::asymmetric_stationary(inst.maps, inst.x, inst.y, o.lambda);
        const Index n = inst.x.rows();
        const MatrixXd gram = inst.phi_x.transpose() * inst.phi_x;
        const Vector w_sym =
            inst.phi_x * (gram + o.lambda * MatrixXd::Identity(n, n)).ldlt().solve(inst.y);
        const double scale = std::max(1.0, w_sym.norm());
        out.value = std::max({out.value, (s.w - s.v).norm() / scale, (s.w - w_sym).norm() / scale});
    }
    out.seconds = timer.seconds();
    return out;
}

CheckResult constant_bandwidth_check(std::uint64_t seed, Index datasets, Index test_points) {
    Timer timer;
    std::mt19937_64 rng(derive_seed(seed, 17));
    CheckResult out{"constant_bandwidth", 0.0, 1e-10, datasets, 0.0, {}};
    for (Index t = 0; t < datasets; ++t) {
        const Index n = uniform_index(rng, 2, 50);
        const Index m = uniform_index(rng, 1, 4);
        const double sigma = uniform(rng, 0.5, 5.0);
        const double lambda = uniform(rng, 1e-2, 1.0);
        const Matrix x = uniform_points(rng, n, m);
        const Vector y = gaussian(rng, n, 1).col(0);
        const Matrix test = uniform_points(rng, test_points, m);

        const auto theta = kernels::BandwidthSet::constant(n, m, sigma);
        const auto lab = akrr::fit_alpha(kernels::lab_rbf_gram(x, theta), y, lambda);
        const Vector p_lab = akrr::predict(lab, x, theta, test);
        const kernels::GlobalBandwidth bw(sigma);
        const auto sym = akrr::symmetric_krr_fit(x, y, bw, lambda);
        const Vector p_sym = akrr::symmetric_krr_predict(sym, x, bw, test);
        out.value = std::max(out.value, (p_lab - p_sym).lpNorm<Eigen::Infinity>());
    }
    out.seconds = timer.seconds();
    return out;
}

CheckResult interpolation_check(std::uint64_t seed, Index instances) {
    Timer timer;
    std::mt19937_64 rng(derive_seed(seed, 19));
    CheckResult out{"interpolation", 0.0, 1e-4, instances, 0.0, {}};
    double worst_condition = 0.0;
    for (Index t = 0; t < instances; ++t) {
        // Points on a jittered grid with sharp bandwidths keep the Gram close to identity.
        const Index n = uniform_index(rng, 2, 20);
        Matrix x(n, 2);
        for (Index i = 0; i < n; ++i) {
            x(i, 0) = static_cast<double>(i) + uniform(rng, -0.1, 0.1);
            x(i, 1) = uniform(rng, -0.1, 0.1);
        }
        Matrix theta(n, 2);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < 2; ++j) theta(i, j) = uniform(rng, 1.0, 3.0);
        const kernels::BandwidthSet bw(theta);
        const Vector y = gaussian(rng, n, 1).col(0);
        const auto sol = akrr::fit_alpha(kernels::lab_rbf_gram(x, bw), y, 1e-8);
        worst_condition = std::max(worst_condition, sol.condition);
        out.value = std::max(out.value, (akrr::predict(sol, x, bw, x) - y).lpNorm<Eigen::Infinity>());
    }
    out.detail = "worst condition estimate " + std::to_string(worst_condition);
    out.seconds = timer.seconds();
    return out;
}

GradcheckReport gradcheck(std::uint64_t seed, Index probes) {
    Timer timer;
    std::mt19937_64 rng(derive_seed(seed, 23));
    GradcheckReport report;
    report.loss_grad = {"loss_grad", 0.0, 1e-4, probes, 0.0, {}};
    report.kernel_grad = {"lab_rbf_grad_theta", 0.0, 1e-4, probes, 0.0, {}};
    constexpr double h = 1e-5;

    for (Index p = 0; p < probes; ++p) {
        const Index n_sv = uniform_index(rng, 1, 8);
        const Index dims = uniform_index(rng, 1, 3);
        const Index n_b = uniform_index(rng, 1, 12);
        const double lambda = uniform(rng, 1e-2, 1.0);
        const Matrix sx = uniform_points(rng, n_sv, dims);
        const Vector sy = gaussian(rng, n_sv, 1).col(0);
        const Matrix bx = uniform_points(rng, n_b, dims);
        const Vector by = gaussian(rng, n_b, 1).col(0);
        Matrix theta(n_sv, dims);
        for (Index i = 0; i < n_sv; ++i)
            for (Index j = 0; j < dims; ++j) theta(i, j) = uniform(rng, 0.5, 3.0);
        const kernels::BandwidthSet bw(theta);
        const Index l = uniform_index(rng, 0, n_sv - 1);
        const Index m = uniform_index(rng, 0, dims - 1);

        Matrix plus = theta, minus = theta;
        plus(l, m) += h;
        minus(l, m) -= h;
        const kernels::BandwidthSet bw_plus(plus), bw_minus(minus);

        const auto lg = learning::loss_grad(bw, {sx, sy}, {bx, by}, lambda);
        const double fd = (learning::loss(bw_plus, {sx, sy}, {bx, by}, lambda) -
                           learning::loss(bw_minus, {sx, sy}, {bx, by}, lambda)) /
                          (2.0 * h);
        report.loss_grad.value =
            std::max(report.loss_grad.value, relative_error(lg.gradient(l, m), fd));

        const KernelMatrix dk = kernels::lab_rbf_grad_theta(bx, sx, bw, l, m);
        const KernelMatrix dk_fd =
            (kernels::lab_rbf_cross(bx, sx, bw_plus) - kernels::lab_rbf_cross(bx, sx, bw_minus)) /
            (2.0 * h);
        for (Index i = 0; i < dk.rows(); ++i)
            for (Index j = 0; j < dk.cols(); ++j)
                report.kernel_grad.value =
                    std::max(report.kernel_grad.value, relative_error(dk(i, j), dk_fd(i, j)));
    }
    report.loss_grad.seconds = report.kernel_grad.seconds = timer.seconds();
    return report;
}

double zero_residual_gradient(std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 29));
    const Matrix sx = uniform_points(rng, 6, 2);
    const Vector sy = gaussian(rng, 6, 1).col(0);
    const Matrix bx = uniform_points(rng, 9, 2);
    const auto bw = kernels::BandwidthSet::constant(6, 2, 1.5);
    // Same operations as inside loss_grad, so the residual cancels exactly.
    const akrr::RidgeFactor factor(kernels::lab_rbf_gram(sx, bw), 0.1);
    const Vector by = kernels::lab_rbf_cross(bx, sx, bw) * factor.solve(sy);
    return learning::loss_grad(bw, {sx, sy}, {bx, by}, 0.1).gradient.cwiseAbs().maxCoeff();
}

std::vector<CheckResult> verify_suite(const SuiteOptions& o) {
    return {woodbury_check(o.seed, 20, std::min<Index>(20, o.max_points)),
            stationarity_check(o),
            stationarity_fd_check(o),
            kkt_check(o),
            kkt_kernel_check(o),
            shared_map_check(o),
            constant_bandwidth_check(o.seed),
            interpolation_check(o.seed)};
}

}  // namespace labrbf::checks
