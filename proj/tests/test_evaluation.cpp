#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "labrbf/evaluation.hpp"

#include <cmath>

using namespace labrbf;
using namespace labrbf::eval;
using testing::TempDir;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

ExperimentConfig quick_config() {
    ExperimentConfig cfg;
    cfg.lab.n0 = 5;
    cfg.lab.k = 5;
    cfg.lab.max_sv = 25;
    cfg.lab.inner_iters = 10;
    cfg.lab.outer_iters = 6;
    cfg.lab.batch_size = 16;
    cfg.lab.sigma0 = 3.0;
    cfg.lab.lambda = 1e-3;
    cfg.lab.eta = 1e-3;
    return cfg;
}

}  // namespace

TEST_CASE("r_squared and rsse examples") {
    const Vector y = vec({1, 2, 3});
    CHECK(r_squared(y, y) == 1.0);
    CHECK(rsse(y, y) == 0.0);
    CHECK(r_squared(Vector::Constant(3, 2.0), y) == 0.0);
    CHECK(rsse(Vector::Constant(3, 2.0), y) == 1.0);
    CHECK(r_squared(vec({1, 2, 4}), y) == 0.5);
    CHECK(rsse(vec({1, 2, 4}), y) == 0.5);
    CHECK_THROWS_AS((void)r_squared(y, Vector::Constant(3, 1.0)), Error);
    CHECK_THROWS_AS((void)r_squared(vec({1, 2}), y), Error);
    CHECK_THROWS_AS((void)r_squared(Vector(0), Vector(0)), Error);
}

TEST_CASE("r_squared is invariant under a common affine map") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> coef(-5.0, 5.0);
    for (int rep = 0; rep < 50; ++rep) {
        const Vector y = testing::normal_vector(rng, 40);
        const Vector p = y + 0.3 * testing::normal_vector(rng, 40);
        double a = coef(rng);
        if (std::abs(a) < 0.1) a = 1.0;
        const double b = coef(rng);
        const Vector ya = (a * y.array() + b).matrix();
        const Vector pa = (a * p.array() + b).matrix();
        CHECK(std::abs(r_squared(pa, ya) - r_squared(p, y)) < 1e-12);
        CHECK(rsse(p, y) == 1.0 - r_squared(p, y));
    }
}

TEST_CASE("method names") {
    for (auto m : {Method::Lab, Method::RbfKrr, Method::Tl1Krr}) CHECK(parse_method(to_string(m)) == m);
    CHECK(parse_method("rbf") == Method::RbfKrr);
    CHECK(parse_method("tl1") == Method::Tl1Krr);
    CHECK_THROWS((void)parse_method("svr"));
}

TEST_CASE("single repeat has zero spread") {
    const auto raw = data::synth_cherkassky(1, 80, 0.1, 2);
    const auto report = run_experiment(raw, Method::Lab, quick_config(), 1, 0);
    REQUIRE(report.repeats.size() == 1);
    CHECK(report.std_r2 == 0.0);
    CHECK(report.std_rsse == 0.0);
    CHECK_THROWS_AS((void)run_experiment(raw, Method::Lab, quick_config(), 0, 0), Error);
}

TEST_CASE("reports are consistent with their rows") {
    const auto raw = data::synth_cherkassky(2, 100, 0.1, 3);
    for (auto method : {Method::Lab, Method::RbfKrr, Method::Tl1Krr}) {
        auto cfg = quick_config();
        const auto report = run_experiment(raw, method, cfg, 4, 10);
        REQUIRE(report.repeats.size() == 4);
        CHECK(report.failed == 0);
        double sum = 0.0;
        for (std::size_t r = 0; r < 4; ++r) {
            const auto& row = report.repeats[r];
            CHECK(row.seed == 10 + r);
            CHECK(row.ok);
            CHECK(row.rsse == 1.0 - row.r2);
            sum += row.r2;
            if (method == Method::Lab) CHECK(row.support_count <= cfg.lab.max_sv);
            if (method != Method::Lab) CHECK(row.selected_param.has_value());
        }
        CHECK(std::abs(report.mean_r2 - sum / 4.0) < 1e-12);
        auto copy = report;
        copy.aggregate();
        CHECK(std::abs(copy.mean_r2 - report.mean_r2) < 1e-12);
        CHECK(std::abs(copy.std_rsse - report.std_rsse) < 1e-12);
        if (method == Method::RbfKrr) CHECK(report.mean_r2 > 0.5);
        CHECK(std::isfinite(report.mean_r2));
    }
}

TEST_CASE("experiments are deterministic and independent of the job count") {
    const auto raw = data::synth_sin2x3(120, 0.0, 2.0, 0.2, 4);
    auto cfg = quick_config();
    const auto a = run_experiment(raw, Method::Lab, cfg, 3, 5);
    cfg.jobs = 3;
    const auto b = run_experiment(raw, Method::Lab, cfg, 3, 5);
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(a.repeats[r].r2 == b.repeats[r].r2);
        CHECK(a.repeats[r].support_count == b.repeats[r].support_count);
    }
}

TEST_CASE("a fixed bandwidth skips the grid search") {
    const auto raw = data::synth_cherkassky(1, 80, 0.0, 6);
    auto cfg = quick_config();
    cfg.rbf_sigma = 2.0;
    const auto report = run_experiment(raw, Method::RbfKrr, cfg, 2, 0);
    CHECK(report.repeats[0].selected_param == 2.0);
}

TEST_CASE("failed repeats are recorded, not thrown") {
    const auto raw = data::synth_cherkassky(1, 40, 0.0, 6);
    auto cfg = quick_config();
    cfg.lab.n0 = 35;  // larger than the 32-row training split
    cfg.lab.max_sv = 40;
    const auto report = run_experiment(raw, Method::Lab, cfg, 2, 0);
    CHECK(report.failed == 2);
    CHECK_FALSE(report.repeats[0].ok);
    CHECK_FALSE(report.repeats[0].error.empty());
}

TEST_CASE("support ratio sweep") {
    const auto raw = data::synth_cherkassky(2, 100, 0.1, 7);
    auto cfg = quick_config();
    const auto one = support_ratio_sweep(raw, {0.3}, cfg, 1, 0);
    REQUIRE(one.size() == 1);
    CHECK(one[0].value == 0.3);
    CHECK(one[0].support_count == 24);  // floor(0.3 * 80)
    const auto curve = support_ratio_sweep(raw, {0.1, 0.5, 0.99}, cfg, 1, 0);
    CHECK(curve.size() == 3);
    CHECK(curve[2].support_count == 79);
    for (const auto& p : curve) CHECK(p.failed == 0);
}

TEST_CASE("report and sweep writers") {
    const auto raw = data::synth_cherkassky(1, 60, 0.0, 8);
    const auto report = run_experiment(raw, Method::RbfKrr, quick_config(), 2, 0);
    TempDir dir("eval");
    write_report_json({report}, dir.file("r.json"));
    const auto j = nlohmann::json::parse(testing::read_text(dir.file("r.json")));
    CHECK(j.dump().find("rbf_krr") != std::string::npos);
    write_repeats_csv({report}, dir.file("rows.csv"));
    const auto rows = testing::read_text(dir.file("rows.csv"));
    CHECK(std::count(rows.begin(), rows.end(), '\n') == 3);
    write_sweep_csv({{0.1, 0.2, 0.01, 5, 0}}, "ratio", dir.file("s.csv"));
    CHECK(testing::read_text(dir.file("s.csv")).rfind("ratio,mean,std", 0) == 0);
    CHECK_THROWS_AS(write_report_json({report}, "/nonexistent/dir/r.json"), Error);
}
