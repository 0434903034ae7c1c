#include "labrbf/kernel_learning.hpp"

#include "labrbf/logging.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iterator>
#include <numeric>
#include <sstream>

namespace labrbf::learning {

namespace {

void check_samples(SampleView s, Index dims, const char* what) {
    if (s.x.rows() != s.y.size()) {
        throw DimensionError(std::string(what) + ": feature and target row counts differ");
    }
    if (s.x.cols() != dims) throw DimensionError(std::string(what) + ": dimension mismatch");
}

Matrix gather_rows(const Matrix& x, const IndexList& rows) {
    Matrix out(static_cast<Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = x.row(rows[r]);
    return out;
}

Vector gather(const Vector& y, const IndexList& rows) {
    Vector out(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Index>(r)) = y(rows[r]);
    return out;
}

// sum_i weight_i * K(i, l) * (points(i, m) - support(l, m))^2 for every (l, m).
void accumulate_weighted_sqdist(const Vector& weight, const KernelMatrix& k, const Matrix& points,
                                const Matrix& support, Matrix& out) {
    const Index n = support.rows();
    const Index dims = support.cols();
    for (Index l = 0; l < n; ++l) {
        for (Index i = 0; i < points.rows(); ++i) {
            const double w = weight(i) * k(i, l);
            if (w == 0.0) continue;
            for (Index m = 0; m < dims; ++m) {
                const double d = points(i, m) - support(l, m);
                out(l, m) += w * d * d;
            }
        }
    }
}

}  // namespace

std::string to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(const std::string& name) {
    if (name == "sgd") return Optimizer::Sgd;
    if (name == "adam") return Optimizer::Adam;
    throw Error("unknown optimizer: " + name);
}

void TrainConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw Error(std::string(name) + " must be positive");
    };
    positive(lambda, "lambda");
    positive(eta, "eta");
    positive(sigma0, "sigma0");
    positive(theta_min, "theta_min");
    if (!(epsilon >= 0.0)) throw Error("epsilon must be nonnegative");
    if (n0 < 1) throw Error("n0 must be at least 1");
    if (k < 1) throw Error("k must be at least 1");
    if (max_sv < 1) throw Error("max_sv must be at least 1");
    if (n0 > max_sv) throw Error("n0 must not exceed max_sv");
    if (batch_size < 1) throw Error("batch_size must be at least 1");
    if (inner_iters < 0 || outer_iters < 0) throw Error("iteration counts must be nonnegative");
    if (sigma0 < theta_min) throw Error("sigma0 must be at least theta_min");
}

Vector LabModel::predict(const Matrix& normalized_x) const {
    if (normalized_x.cols() != dims()) {
        throw DimensionError("model expects " + std::to_string(dims()) + " features, got " +
                             std::to_string(normalized_x.cols()));
    }
    return kernels::lab_rbf_cross(normalized_x, support_x, theta) * alpha;
}

Vector LabModel::predict_raw(const Matrix& raw_x) const {
    return norm.denormalize_targets(predict(norm.normalize_features(raw_x)));
}

double loss(const kernels::BandwidthSet& theta, SampleView support, SampleView batch,
            double lambda) {
    check_samples(support, theta.dims(), "support");
    check_samples(batch, theta.dims(), "batch");
    const auto sol = akrr::fit_alpha(kernels::lab_rbf_gram(support.x, theta), support.y, lambda);
    return (kernels::lab_rbf_cross(batch.x, support.x, theta) * sol.alpha - batch.y).squaredNorm();
}

LossAndGradient loss_grad(const kernels::BandwidthSet& theta, SampleView support,
                          SampleView batch, double lambda) {
    check_samples(support, theta.dims(), "support");
    check_samples(batch, theta.dims(), "batch");
    const KernelMatrix k_sv = kernels::lab_rbf_gram(support.x, theta);
    const KernelMatrix k_b = kernels::lab_rbf_cross(batch.x, support.x, theta);
    const akrr::RidgeFactor factor(k_sv, lambda);
    const Vector alpha = factor.solve(support.y);
    const Vector residual = k_b * alpha - batch.y;
    // Adjoint of the support solve: u = (K_sv + lambda I)^-T K_b' r.
    const Vector adjoint = factor.solve_transpose(k_b.transpose() * residual);

    Matrix through_batch = Matrix::Zero(theta.size(), theta.dims());
    Matrix through_support = Matrix::Zero(theta.size(), theta.dims());
    accumulate_weighted_sqdist(residual, k_b, batch.x, support.x, through_batch);
    accumulate_weighted_sqdist(adjoint, k_sv, support.x, support.x, through_support);

    LossAndGradient out;
    out.loss = residual.squaredNorm();
    out.gradient = (-4.0 * theta.values().array() * (through_batch - through_support).array())
                       .colwise() *
                   alpha.array();
    return out;
}

kernels::BandwidthSet inner_sgd(kernels::BandwidthSet theta, SampleView support, SampleView pool,
                                const TrainConfig& config, std::mt19937_64& rng) {
    check_samples(pool, theta.dims(), "pool");
    if (pool.x.rows() == 0) throw Error("inner_sgd: empty training pool");
    const Index pool_size = pool.x.rows();
    const Index batch = std::min(config.batch_size, pool_size);

    IndexList all(static_cast<std::size_t>(pool_size));
    std::iota(all.begin(), all.end(), Index{0});
    IndexList picked;
    picked.reserve(static_cast<std::size_t>(batch));

    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double adam_eps = 1e-8;
    Matrix first_moment;
    Matrix second_moment;
    if (config.optimizer == Optimizer::Adam) {
        first_moment = Matrix::Zero(theta.size(), theta.dims());
        second_moment = Matrix::Zero(theta.size(), theta.dims());
    }

    for (Index step = 0; step < config.inner_iters; ++step) {
        picked.clear();
        std::sample(all.begin(), all.end(), std::back_inserter(picked), batch, rng);
        const Matrix bx = gather_rows(pool.x, picked);
        const Vector by = gather(pool.y, picked);
        const auto lg = loss_grad(theta, support, {bx, by}, config.lambda);

        if (config.optimizer == Optimizer::Sgd) {
            theta.descend(config.eta * lg.gradient);
        } else {
            const double t = static_cast<double>(step + 1);
            first_moment = beta1 * first_moment + (1.0 - beta1) * lg.gradient;
            second_moment = beta2 * second_moment +
                            (1.0 - beta2) * lg.gradient.array().square().matrix();
            const Matrix m_hat = first_moment / (1.0 - std::pow(beta1, t));
            const Matrix v_hat = second_moment / (1.0 - std::pow(beta2, t));
            theta.descend(config.eta *
                          (m_hat.array() / (v_hat.array().sqrt() + adam_eps)).matrix());
        }
    }
    return theta;
}

ExpandResult dynamic_expand(const IndexList& support, const IndexList& pool,
                            const Vector& pool_errors, Index k, double epsilon, Index max_sv) {
    if (pool.empty()) throw Error("dynamic_expand: empty pool");
    if (pool_errors.size() != static_cast<Index>(pool.size())) {
        throw DimensionError("dynamic_expand: one error per pool point required");
    }
    ExpandResult out;
    out.max_error = pool_errors.maxCoeff();
    out.support = support;
    out.pool = pool;
    const auto support_size = static_cast<Index>(support.size());
    if (out.max_error <= epsilon || support_size >= max_sv) {
        out.done = true;
        return out;
    }

    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ea = pool_errors(static_cast<Index>(a));
        const double eb = pool_errors(static_cast<Index>(b));
        if (ea != eb) return ea > eb;
        return pool[a] < pool[b];
    });
    const auto count = static_cast<std::size_t>(
        std::min({k, static_cast<Index>(pool.size()), max_sv - support_size}));

    std::vector<bool> moved(pool.size(), false);
    for (std::size_t i = 0; i < count; ++i) {
        moved[order[i]] = true;
        out.added.push_back(pool[order[i]]);
        out.support.push_back(pool[order[i]]);
    }
    out.pool.clear();
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!moved[i]) out.pool.push_back(pool[i]);
    }
    return out;
}

TrainResult train(const data::Dataset& train_set, const TrainConfig& config) {
    config.validate();
    if (train_set.size() <= config.n0) {
        throw Error("training set of " + std::to_string(train_set.size()) +
                    " rows must be larger than n0 = " + std::to_string(config.n0));
    }
    const auto start = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    const auto selection = data::select_initial_support(
        train_set, config.n0, config.support_strategy, derive_seed(config.seed, 1));
    std::mt19937_64 rng(derive_seed(config.seed, 2));

    TrainResult result;
    TrainTrace& trace = result.trace;
    trace.initial_support = selection.support;
    IndexList support = selection.support;
    IndexList pool = selection.remainder;
    auto theta = kernels::BandwidthSet::constant(config.n0, train_set.dims(), config.sigma0,
                                                 config.theta_min);
    trace.stop_reason = "outer iteration limit";

    for (Index outer = 0; outer < config.outer_iters; ++outer) {
        if (pool.empty()) {
            trace.stop_reason = "pool exhausted";
            break;
        }
        const Matrix sx = gather_rows(train_set.features, support);
        const Vector sy = gather(train_set.targets, support);
        const Matrix px = gather_rows(train_set.features, pool);
        const Vector py = gather(train_set.targets, pool);

        theta = inner_sgd(std::move(theta), {sx, sy}, {px, py}, config, rng);

        const auto sol = akrr::fit_alpha(kernels::lab_rbf_gram(sx, theta), sy, config.lambda);
        const Vector errors =
            (kernels::lab_rbf_cross(px, sx, theta) * sol.alpha - py).array().square().matrix();
        auto expansion = dynamic_expand(support, pool, errors, config.k, config.epsilon,
                                        config.max_sv);

        TraceRecord rec;
        rec.outer_iteration = outer;
        rec.support_size = static_cast<Index>(support.size());
        rec.pool_loss = errors.mean();
        rec.max_pool_error = expansion.max_error;
        rec.added = static_cast<Index>(expansion.added.size());
        rec.wall_seconds = elapsed();
        trace.records.push_back(rec);

        std::ostringstream msg;
        msg << "outer " << outer << ": support " << rec.support_size << ", pool mse "
            << rec.pool_loss << ", max error " << rec.max_pool_error;
        log::debug(msg.str());

        if (expansion.done) {
            trace.stop_reason = expansion.max_error <= config.epsilon ? "error tolerance reached"
                                                                      : "support limit reached";
            break;
        }
        theta.append_rows(static_cast<Index>(expansion.added.size()), config.sigma0);
        trace.added.push_back(expansion.added);
        support = std::move(expansion.support);
        pool = std::move(expansion.pool);
    }

    LabModel& model = result.model;
    model.support_x = gather_rows(train_set.features, support);
    model.support_y = gather(train_set.targets, support);
    model.theta = std::move(theta);
    model.lambda = config.lambda;
    model.norm = train_set.norm;
    model.alpha = akrr::fit_alpha(kernels::lab_rbf_gram(model.support_x, model.theta),
                                  model.support_y, config.lambda)
                      .alpha;
    trace.final_train_loss = (model.predict(train_set.features) - train_set.targets).squaredNorm() /
                             static_cast<double>(train_set.size());
    return result;
}

}  // namespace labrbf::learning
