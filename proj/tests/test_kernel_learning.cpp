#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "labrbf/checks.hpp"
#include "labrbf/kernel_learning.hpp"

#include <cmath>
#include <set>

using namespace labrbf;
using namespace labrbf::learning;
using kernels::BandwidthSet;

namespace {

struct Problem {
    Matrix sx;
    Vector sy;
    Matrix bx;
    Vector by;
    BandwidthSet theta;
};

Problem random_problem(std::uint64_t seed, Index n_sv, Index r, Index m) {
    std::mt19937_64 rng(seed);
    Problem p;
    p.sx = testing::uniform_matrix(rng, n_sv, m, -1.0, 1.0);
    p.sy = testing::normal_vector(rng, n_sv);
    p.bx = testing::uniform_matrix(rng, r, m, -1.0, 1.0);
    p.by = testing::normal_vector(rng, r);
    p.theta = BandwidthSet(testing::uniform_matrix(rng, n_sv, m, 0.5, 2.5));
    return p;
}

data::Dataset sin_dataset(Index n, double noise, std::uint64_t seed) {
    return data::normalize(data::synth_sin2x3(n, 0.0, 2.0, noise, seed));
}

}  // namespace

TEST_CASE("loss closed forms") {
    Matrix sx(1, 1);
    sx << 0.0;
    Vector sy(1);
    sy << 2.0;
    Matrix bx(1, 1);
    bx << 0.5;
    Vector by(1);
    by << 0.3;
    const auto theta = BandwidthSet::constant(1, 1, 2.0);
    const double kb = std::exp(-1.0);
    CHECK(loss(theta, {sx, sy}, {bx, by}, 0.25) ==
          doctest::Approx(std::pow(kb * 2.0 / 1.25 - 0.3, 2)).epsilon(1e-13));
}

TEST_CASE("loss vanishes when the batch is the support with a tiny ridge") {
    const auto p = random_problem(3, 6, 1, 2);
    CHECK(loss(p.theta, {p.sx, p.sy}, {p.sx, p.sy}, 1e-10) < 1e-6);
}

TEST_CASE("zero residual gives zero loss and zero gradient") {
    auto p = random_problem(4, 5, 7, 3);
    const auto sol = akrr::fit_alpha(kernels::lab_rbf_gram(p.sx, p.theta), p.sy, 0.1);
    const Vector exact = akrr::predict(sol, p.sx, p.theta, p.bx);
    const auto lg = loss_grad(p.theta, {p.sx, p.sy}, {p.bx, exact}, 0.1);
    CHECK(lg.loss < 1e-28);
    CHECK(lg.gradient.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(checks::zero_residual_gradient(0) == 0.0);
}

TEST_CASE("loss_grad agrees with loss") {
    const auto p = random_problem(5, 6, 9, 2);
    const auto lg = loss_grad(p.theta, {p.sx, p.sy}, {p.bx, p.by}, 1e-2);
    CHECK(lg.loss == doctest::Approx(loss(p.theta, {p.sx, p.sy}, {p.bx, p.by}, 1e-2)).epsilon(1e-12));
    CHECK(lg.gradient.rows() == 6);
    CHECK(lg.gradient.cols() == 2);
}

TEST_CASE("loss_grad matches central differences") {
    const double h = 1e-5;
    int probes = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = random_problem(100 + seed, 4, 6, 2);
        const auto lg = loss_grad(p.theta, {p.sx, p.sy}, {p.bx, p.by}, 1e-2);
        for (Index l = 0; l < 4; ++l)
            for (Index m = 0; m < 2; ++m) {
                Matrix up = p.theta.values(), down = p.theta.values();
                up(l, m) += h;
                down(l, m) -= h;
                const double fd = (loss(BandwidthSet(up), {p.sx, p.sy}, {p.bx, p.by}, 1e-2) -
                                   loss(BandwidthSet(down), {p.sx, p.sy}, {p.bx, p.by}, 1e-2)) /
                                  (2 * h);
                CHECK(checks::relative_error(lg.gradient(l, m), fd) < 1e-4);
                ++probes;
            }
    }
    CHECK(probes >= 50);
    const auto report = checks::gradcheck(1, 60);
    CHECK(report.loss_grad.passed());
    CHECK(report.kernel_grad.passed());
}

TEST_CASE("gradient vanishes at a local minimum reached by descent") {
    Matrix sx(2, 1);
    sx << -0.5, 0.5;
    Vector sy(2);
    sy << -0.4, 0.7;
    Matrix bx(3, 1);
    bx << -0.8, 0.1, 0.9;
    Vector by(3);
    by << -0.2, 0.2, 0.5;
    Matrix start(2, 1);
    start << 1.0, 1.0;
    BandwidthSet theta(start);
    double grad = 1.0;
    for (int step = 0; step < 200000 && grad >= 1e-6; ++step) {
        const auto lg = loss_grad(theta, {sx, sy}, {bx, by}, 1e-2);
        grad = lg.gradient.norm();
        theta.descend(0.5 * lg.gradient);
    }
    CHECK(theta.values().minCoeff() > 10 * theta.theta_min());  // interior point
    CHECK(loss_grad(theta, {sx, sy}, {bx, by}, 1e-2).gradient.norm() < 1e-5);
}

TEST_CASE("inner_sgd steps") {
    const auto p = random_problem(8, 4, 6, 2);
    TrainConfig cfg;
    cfg.inner_iters = 5;
    cfg.batch_size = 3;
    cfg.lambda = 1e-2;
    cfg.eta = 0.0;
    std::mt19937_64 rng(1);
    const auto same = inner_sgd(p.theta, {p.sx, p.sy}, {p.bx, p.by}, cfg, rng);
    CHECK(same.values() == p.theta.values());

    cfg.eta = 1e-4;
    cfg.inner_iters = 1;
    cfg.batch_size = 6;  // whole pool, so the step is on the checked loss
    const auto moved = inner_sgd(p.theta, {p.sx, p.sy}, {p.bx, p.by}, cfg, rng);
    CHECK(loss(moved, {p.sx, p.sy}, {p.bx, p.by}, 1e-2) <
          loss(p.theta, {p.sx, p.sy}, {p.bx, p.by}, 1e-2));

    cfg.eta = 1e6;
    cfg.theta_min = 0.4;
    const BandwidthSet floored(p.theta.values(), 0.4);
    const auto clamped = inner_sgd(floored, {p.sx, p.sy}, {p.bx, p.by}, cfg, rng);
    CHECK(clamped.values().minCoeff() >= 0.4);
    CHECK((clamped.values().array() == 0.4).any());

    const Matrix empty_x(0, 2);
    const Vector empty_y(0);
    CHECK_THROWS_AS((void)inner_sgd(p.theta, {p.sx, p.sy}, {empty_x, empty_y}, cfg, rng), Error);
}

TEST_CASE("adam mode keeps bandwidths above the floor") {
    const auto p = random_problem(9, 5, 20, 2);
    TrainConfig cfg;
    cfg.optimizer = Optimizer::Adam;
    cfg.eta = 0.5;
    cfg.inner_iters = 50;
    cfg.batch_size = 8;
    cfg.lambda = 1e-2;
    std::mt19937_64 rng(2);
    const auto out = inner_sgd(p.theta, {p.sx, p.sy}, {p.bx, p.by}, cfg, rng);
    CHECK(out.values().minCoeff() >= cfg.theta_min);
    CHECK(parse_optimizer(to_string(Optimizer::Adam)) == Optimizer::Adam);
    CHECK_THROWS((void)parse_optimizer("rmsprop"));
}

TEST_CASE("dynamic_expand selection rules") {
    Vector errors(3);
    errors << 0.5, 0.1, 0.9;
    const auto top = dynamic_expand({10}, {20, 21, 22}, errors, 2, 1e-3, 100);
    CHECK_FALSE(top.done);
    CHECK(top.added == IndexList{22, 20});
    CHECK(top.pool == IndexList{21});
    CHECK(top.support == IndexList{10, 22, 20});
    CHECK(top.max_error == 0.9);

    const auto quiet = dynamic_expand({10}, {20, 21, 22}, errors, 2, 1.0, 100);
    CHECK(quiet.done);
    CHECK(quiet.added.empty());

    const auto all = dynamic_expand({10}, {20, 21, 22}, errors, 10, 0.0, 100);
    CHECK(all.pool.empty());
    CHECK(all.support.size() == 4);

    const auto capped = dynamic_expand({1, 2}, {20, 21, 22}, errors, 3, 0.0, 3);
    CHECK(capped.added == IndexList{22});
    CHECK(dynamic_expand({1, 2, 3}, {20, 21, 22}, errors, 3, 0.0, 3).done);

    Vector tied(4);
    tied << 0.3, 0.7, 0.7, 0.3;
    CHECK(dynamic_expand({}, {5, 6, 7, 8}, tied, 3, 0.0, 10).added == IndexList{6, 7, 5});

    CHECK_THROWS_AS((void)dynamic_expand({1}, {}, Vector(0), 1, 0.0, 10), Error);
    CHECK_THROWS_AS((void)dynamic_expand({1}, {2, 3}, errors, 1, 0.0, 10), Error);
}

TEST_CASE("config validation") {
    TrainConfig ok;
    CHECK_NOTHROW(ok.validate());
    auto bad = ok;
    bad.n0 = 200;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = ok;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = ok;
    bad.lambda = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = ok;
    bad.epsilon = -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = ok;
    bad.theta_min = -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_THROWS_AS((void)train(sin_dataset(10, 0.0, 1), ok), Error);  // n0 = 10 = N
}

TEST_CASE("training without iterations is the plain interpolant of the initial support") {
    const auto ds = sin_dataset(60, 0.0, 3);
    TrainConfig cfg;
    cfg.outer_iters = 0;
    cfg.n0 = 12;
    cfg.sigma0 = 4.0;
    cfg.lambda = 1e-3;
    const auto res = train(ds, cfg);
    CHECK(res.model.support_size() == 12);
    CHECK(res.trace.records.empty());
    CHECK(res.model.theta.values().isConstant(4.0));
    const auto sel = data::select_initial_support(ds, 12, cfg.support_strategy, derive_seed(cfg.seed, 1));
    CHECK(sel.support == res.trace.initial_support);
    Matrix sx(12, 1);
    Vector sy(12);
    for (Index i = 0; i < 12; ++i) {
        sx.row(i) = ds.features.row(sel.support[static_cast<std::size_t>(i)]);
        sy(i) = ds.targets(sel.support[static_cast<std::size_t>(i)]);
    }
    const auto theta = BandwidthSet::constant(12, 1, 4.0);
    const auto sol = akrr::fit_alpha(kernels::lab_rbf_gram(sx, theta), sy, 1e-3);
    const Vector expect = akrr::predict(sol, sx, theta, ds.features);
    CHECK((res.model.predict(ds.features) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("training invariants") {
    const auto ds = sin_dataset(150, 0.1, 5);
    TrainConfig cfg;
    cfg.n0 = 5;
    cfg.k = 7;
    cfg.max_sv = 40;
    cfg.sigma0 = 3.0;
    cfg.lambda = 1e-3;
    cfg.eta = 1e-3;
    cfg.inner_iters = 20;
    cfg.outer_iters = 20;
    cfg.batch_size = 32;
    cfg.epsilon = 0.0;
    cfg.seed = 17;
    const auto res = train(ds, cfg);

    CHECK(res.model.support_size() <= cfg.max_sv);
    CHECK(res.model.theta.values().minCoeff() >= cfg.theta_min);
    CHECK(res.model.theta.size() == res.model.support_size());
    Index prev = 0;
    for (const auto& rec : res.trace.records) {
        CHECK(rec.support_size >= prev);
        CHECK(rec.support_size <= cfg.max_sv);
        prev = rec.support_size;
    }
    for (std::size_t i = 0; i + 1 < res.trace.records.size(); ++i) {
        const auto& rec = res.trace.records[i];
        if (rec.added > 0)
            CHECK(res.trace.records[i + 1].support_size == rec.support_size + rec.added);
    }
    std::set<Index> seen(res.trace.initial_support.begin(), res.trace.initial_support.end());
    for (const auto& batch : res.trace.added) {
        CHECK(static_cast<Index>(batch.size()) <= cfg.k);
        for (Index i : batch) CHECK(seen.insert(i).second);
    }
    CHECK(static_cast<Index>(seen.size()) == res.model.support_size());

    const KernelMatrix g = kernels::lab_rbf_gram(res.model.support_x, res.model.theta);
    const Eigen::MatrixXd a = g + cfg.lambda * Eigen::MatrixXd::Identity(g.rows(), g.cols());
    CHECK((a * res.model.alpha - res.model.support_y).norm() <= 1e-8 * res.model.support_y.norm());
}

TEST_CASE("training is deterministic under a fixed seed") {
    const auto ds = sin_dataset(120, 0.2, 6);
    TrainConfig cfg;
    cfg.n0 = 6;
    cfg.k = 6;
    cfg.max_sv = 30;
    cfg.inner_iters = 15;
    cfg.outer_iters = 10;
    cfg.batch_size = 16;
    cfg.sigma0 = 2.0;
    cfg.lambda = 1e-3;
    cfg.eta = 1e-3;
    cfg.seed = 99;
    const auto a = train(ds, cfg);
    const auto b = train(ds, cfg);
    CHECK(a.trace.initial_support == b.trace.initial_support);
    CHECK(a.trace.added == b.trace.added);
    CHECK(std::abs(a.trace.final_train_loss - b.trace.final_train_loss) <= 1e-12);
    CHECK(a.model.theta.values() == b.model.theta.values());
    cfg.seed = 100;
    const auto c = train(ds, cfg);
    CHECK(c.trace.initial_support != a.trace.initial_support);
}

TEST_CASE("noise-free sin(2x^3) is fitted almost exactly") {
    const auto ds = sin_dataset(200, 0.0, 7);
    TrainConfig cfg;
    cfg.n0 = 20;
    cfg.k = 20;
    cfg.max_sv = 100;
    cfg.sigma0 = 10.0;
    cfg.lambda = 1e-3;
    cfg.eta = 0.01;
    cfg.optimizer = Optimizer::Adam;
    cfg.inner_iters = 100;
    cfg.outer_iters = 10;
    cfg.batch_size = 64;
    cfg.epsilon = 1e-4;
    const auto res = train(ds, cfg);
    const Vector pred = res.model.predict(ds.features);
    const double ss_res = (pred - ds.targets).squaredNorm();
    const double ss_tot = (ds.targets.array() - ds.targets.mean()).square().sum();
    CHECK(1.0 - ss_res / ss_tot > 0.99);
}

TEST_CASE("predict_raw undoes the normalization") {
    const auto raw = data::synth_sin2x3(80, 0.0, 2.0, 0.0, 8);
    const auto ds = data::normalize(raw);
    TrainConfig cfg;
    cfg.outer_iters = 0;
    cfg.n0 = 20;
    cfg.sigma0 = 5.0;
    const auto model = train(ds, cfg).model;
    const Vector raw_pred = model.predict_raw(raw.features);
    const Vector norm_pred = model.predict(ds.features);
    CHECK((ds.norm.denormalize_targets(norm_pred) - raw_pred).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS((void)model.predict(Matrix::Zero(3, 2)), DimensionError);
}
