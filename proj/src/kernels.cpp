#include "labrbf/kernels.hpp"

#include <cmath>
#include <string>

namespace labrbf::kernels {

namespace {

void require_same_dims(Index a, Index b, const char* what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                             " vs " + std::to_string(b) + ")");
    }
}

}  // namespace

BandwidthSet::BandwidthSet(Matrix theta, double theta_min)
    : theta_(std::move(theta)), theta_min_(theta_min) {
    if (!(theta_min_ > 0.0) || !std::isfinite(theta_min_)) {
        throw Error("theta_min must be a positive finite number");
    }
    if (!theta_.allFinite()) throw Error("bandwidths must be finite");
    if (theta_.size() > 0 && theta_.minCoeff() < theta_min_) {
        throw Error("bandwidth below theta_min");
    }
}

BandwidthSet BandwidthSet::constant(Index n, Index dims, double value, double theta_min) {
    return BandwidthSet(Matrix::Constant(n, dims, value), theta_min);
}

void BandwidthSet::descend(const Matrix& step) {
    require_same_dims(step.rows(), theta_.rows(), "bandwidth update rows");
    require_same_dims(step.cols(), theta_.cols(), "bandwidth update cols");
    theta_ = (theta_ - step).cwiseMax(theta_min_);
}

void BandwidthSet::append_rows(Index count, double value) {
    if (value < theta_min_) throw Error("bandwidth below theta_min");
    const Index old = theta_.rows();
    theta_.conservativeResize(old + count, theta_.cols());
    theta_.bottomRows(count).setConstant(value);
}

GlobalBandwidth::GlobalBandwidth(double s) : sigma(s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw Error("global bandwidth must be positive");
}

double lab_rbf_eval(PointRef t, PointRef x, PointRef theta) {
    require_same_dims(t.size(), x.size(), "lab_rbf_eval");
    require_same_dims(t.size(), theta.size(), "lab_rbf_eval bandwidth");
    if (theta.size() > 0 && !(theta.minCoeff() > 0.0)) {
        throw Error("lab_rbf_eval: bandwidth entries must be positive");
    }
    return std::exp(-(theta.array() * (t - x).array()).square().sum());
}

KernelMatrix lab_rbf_cross(const Matrix& t, const Matrix& support, const BandwidthSet& theta) {
    require_same_dims(t.cols(), support.cols(), "lab_rbf_cross");
    require_same_dims(theta.size(), support.rows(), "lab_rbf_cross bandwidth rows");
    require_same_dims(theta.dims(), support.cols(), "lab_rbf_cross bandwidth dims");
    const Index r = t.rows();
    const Index n = support.rows();
    const Index m = t.cols();
    const Matrix& th = theta.values();
    KernelMatrix k(r, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < r; ++i) {
            double s = 0.0;
            for (Index p = 0; p < m; ++p) {
                const double d = th(j, p) * (t(i, p) - support(j, p));
                s += d * d;
            }
            k(i, j) = std::exp(-s);
        }
    }
    return k;
}

KernelMatrix lab_rbf_gram(const Matrix& support, const BandwidthSet& theta) {
    return lab_rbf_cross(support, support, theta);
}

KernelMatrix lab_rbf_grad_theta(const Matrix& t, const Matrix& support, const BandwidthSet& theta,
                                Index l, Index m) {
    require_same_dims(t.cols(), support.cols(), "lab_rbf_grad_theta");
    require_same_dims(theta.size(), support.rows(), "lab_rbf_grad_theta bandwidth rows");
    if (l < 0 || l >= support.rows() || m < 0 || m >= support.cols()) {
        throw DimensionError("lab_rbf_grad_theta: index out of range");
    }
    KernelMatrix g = KernelMatrix::Zero(t.rows(), support.rows());
    const double th = theta(l, m);
    for (Index i = 0; i < t.rows(); ++i) {
        const double k = lab_rbf_eval(t.row(i), support.row(l), theta.row(l));
        const double d = t(i, m) - support(l, m);
        g(i, l) = -2.0 * th * d * d * k;
    }
    return g;
}

KernelMatrix rbf_cross(const Matrix& t, const Matrix& x, GlobalBandwidth sigma) {
    require_same_dims(t.cols(), x.cols(), "rbf_cross");
    const double s2 = sigma.sigma * sigma.sigma;
    KernelMatrix k(t.rows(), x.rows());
    for (Index j = 0; j < x.rows(); ++j)
        for (Index i = 0; i < t.rows(); ++i)
            k(i, j) = std::exp(-s2 * (t.row(i) - x.row(j)).squaredNorm());
    return k;
}

KernelMatrix rbf_gram(const Matrix& x, GlobalBandwidth sigma) {
    const double s2 = sigma.sigma * sigma.sigma;
    const Index n = x.rows();
    KernelMatrix k(n, n);
    for (Index j = 0; j < n; ++j) {
        k(j, j) = 1.0;
        for (Index i = j + 1; i < n; ++i) {
            k(i, j) = std::exp(-s2 * (x.row(i) - x.row(j)).squaredNorm());
            k(j, i) = k(i, j);
        }
    }
    return k;
}

double tl1_eval(PointRef x, PointRef y, double rho) {
    require_same_dims(x.size(), y.size(), "tl1_eval");
    if (!(rho > 0.0)) throw Error("tl1 rho must be positive");
    return std::max(rho - (x - y).lpNorm<1>(), 0.0);
}

KernelMatrix tl1_cross(const Matrix& t, const Matrix& x, double rho) {
    require_same_dims(t.cols(), x.cols(), "tl1_cross");
    if (!(rho > 0.0)) throw Error("tl1 rho must be positive");
    KernelMatrix k(t.rows(), x.rows());
    for (Index j = 0; j < x.rows(); ++j)
        for (Index i = 0; i < t.rows(); ++i)
            k(i, j) = std::max(rho - (t.row(i) - x.row(j)).lpNorm<1>(), 0.0);
    return k;
}

}  // namespace labrbf::kernels
