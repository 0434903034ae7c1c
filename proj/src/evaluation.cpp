#include "labrbf/evaluation.hpp"

#include "labrbf/akrr.hpp"
#include "labrbf/kernels.hpp"
#include "labrbf/logging.hpp"
#include "labrbf/model_io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

namespace labrbf::eval {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rbf_score(const data::Dataset& fit, const data::Dataset& val, double sigma, double lambda) {
    const kernels::GlobalBandwidth bw(sigma);
    const auto sol = akrr::symmetric_krr_fit(fit.features, fit.targets, bw, lambda);
    return r_squared(akrr::symmetric_krr_predict(sol, fit.features, bw, val.features), val.targets);
}

double tl1_score(const data::Dataset& fit, const data::Dataset& val, double rho, double lambda) {
    const auto sol = akrr::fit_alpha(kernels::tl1_cross(fit.features, fit.features, rho),
                                     fit.targets, lambda);
    return r_squared(kernels::tl1_cross(val.features, fit.features, rho) * sol.alpha, val.targets);
}

// Picks the grid value with the best R^2 on a held-out fifth of the training data.
template <typename Score>
double select_on_validation(const data::Dataset& train, const std::vector<double>& grid,
                            std::uint64_t seed, Score score) {
    if (grid.empty()) throw Error("empty hyperparameter grid");
    const auto parts = data::split(train, {0.8, derive_seed(seed, 7)});
    double best = grid.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (double value : grid) {
        double s = -std::numeric_limits<double>::infinity();
        try {
            s = score(parts.train, parts.test, value);
        } catch (const Error&) {
            continue;
        }
        if (s > best_score) {
            best_score = s;
            best = value;
        }
    }
    return best;
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn fn) {
    const unsigned workers =
        std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
    }
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

Index train_size(const data::RawDataset& dataset, double fraction) {
    return static_cast<Index>(std::floor(fraction * static_cast<double>(dataset.size())));
}

}  // namespace

double r_squared(const Vector& predictions, const Vector& targets) {
    if (predictions.size() != targets.size()) throw DimensionError("r_squared: length mismatch");
    if (targets.size() == 0) throw DimensionError("r_squared: empty input");
    const double total = (targets.array() - targets.mean()).square().sum();
    if (!(total > 0.0)) throw Error("r_squared: targets have zero variance");
    return 1.0 - (targets - predictions).squaredNorm() / total;
}

double rsse(const Vector& predictions, const Vector& targets) {
    return 1.0 - r_squared(predictions, targets);
}

std::string to_string(Method m) {
    switch (m) {
        case Method::Lab: return "lab";
        case Method::RbfKrr: return "rbf_krr";
        case Method::Tl1Krr: return "tl1_krr";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    if (name == "lab") return Method::Lab;
    if (name == "rbf_krr" || name == "rbf") return Method::RbfKrr;
    if (name == "tl1_krr" || name == "tl1") return Method::Tl1Krr;
    throw Error("unknown method: " + name);
}

void ExperimentReport::aggregate() {
    std::vector<double> r2s;
    std::vector<double> rsses;
    std::vector<double> supports;
    failed = 0;
    for (const auto& r : repeats) {
        if (!r.ok) {
            ++failed;
            continue;
        }
        r2s.push_back(r.r2);
        rsses.push_back(r.rsse);
        supports.push_back(static_cast<double>(r.support_count));
    }
    mean_r2 = mean_of(r2s);
    std_r2 = std_of(r2s);
    mean_rsse = mean_of(rsses);
    std_rsse = std_of(rsses);
    mean_support = mean_of(supports);
}

RepeatResult evaluate_split(const data::Dataset& train, const data::Dataset& test, Method method,
                            const ExperimentConfig& config, std::uint64_t seed) {
    RepeatResult row;
    row.seed = seed;
    try {
        auto t0 = Clock::now();
        Vector predictions;
        switch (method) {
            case Method::Lab: {
                auto lab = config.lab;
                lab.seed = seed;
                const auto result = learning::train(train, lab);
                row.train_seconds = seconds_since(t0);
                t0 = Clock::now();
                predictions = result.model.predict(test.features);
                row.support_count = result.model.support_size();
                break;
            }
            case Method::RbfKrr: {
                const double sigma = config.rbf_sigma.value_or(
                    select_on_validation(train, config.sigma_grid, seed, [&](auto& a, auto& b, double s) {
                        return rbf_score(a, b, s, config.rbf_lambda);
                    }));
                row.selected_param = sigma;
                const kernels::GlobalBandwidth bw(sigma);
                const auto sol =
                    akrr::symmetric_krr_fit(train.features, train.targets, bw, config.rbf_lambda);
                row.train_seconds = seconds_since(t0);
                t0 = Clock::now();
                predictions = akrr::symmetric_krr_predict(sol, train.features, bw, test.features);
                row.support_count = train.size();
                break;
            }
            case Method::Tl1Krr: {
                const double rho = config.tl1_rho.value_or(
                    select_on_validation(train, config.rho_grid, seed, [&](auto& a, auto& b, double r) {
                        return tl1_score(a, b, r, config.tl1_lambda);
                    }));
                row.selected_param = rho;
                const auto sol = akrr::fit_alpha(kernels::tl1_cross(train.features, train.features, rho),
                                                 train.targets, config.tl1_lambda);
                row.train_seconds = seconds_since(t0);
                t0 = Clock::now();
                predictions = kernels::tl1_cross(test.features, train.features, rho) * sol.alpha;
                row.support_count = train.size();
                break;
            }
        }
        row.predict_seconds = seconds_since(t0);
        row.r2 = r_squared(predictions, test.targets);
        row.rsse = 1.0 - row.r2;
        row.ok = std::isfinite(row.r2);
        if (!row.ok) row.error = "non-finite score";
    } catch (const Error& e) {
        row.ok = false;
        row.error = e.what();
        log::warn("repeat with seed " + std::to_string(seed) + " failed: " + e.what());
    }
    return row;
}

ExperimentReport run_experiment(const data::RawDataset& dataset, Method method,
                                const ExperimentConfig& config, Index repeats,
                                std::uint64_t base_seed) {
    if (repeats < 1) throw Error("repeats must be at least 1");
    const data::Dataset normalized = data::normalize(dataset);

    ExperimentReport report;
    report.method = method;
    report.repeats.resize(static_cast<std::size_t>(repeats));
    parallel_for(report.repeats.size(), config.jobs, [&](std::size_t r) {
        const std::uint64_t seed = base_seed + r;
        RepeatResult row;
        try {
            const auto parts = data::split(normalized, {config.train_fraction, seed});
            row = evaluate_split(parts.train, parts.test, method, config, seed);
        } catch (const Error& e) {
            row.seed = seed;
            row.ok = false;
            row.error = e.what();
        }
        report.repeats[r] = std::move(row);
    });
    report.aggregate();

    report.config = {{"method", to_string(method)},
                     {"repeats", repeats},
                     {"base_seed", base_seed},
                     {"train_fraction", config.train_fraction}};
    if (method == Method::Lab) report.config["lab"] = io::train_config_to_json(config.lab);
    if (method == Method::RbfKrr) {
        report.config["rbf_lambda"] = config.rbf_lambda;
        if (config.rbf_sigma) report.config["rbf_sigma"] = *config.rbf_sigma;
        else report.config["sigma_grid"] = config.sigma_grid;
    }
    if (method == Method::Tl1Krr) {
        report.config["tl1_lambda"] = config.tl1_lambda;
        if (config.tl1_rho) report.config["tl1_rho"] = *config.tl1_rho;
        else report.config["rho_grid"] = config.rho_grid;
    }
    return report;
}

std::vector<SweepPoint> support_ratio_sweep(const data::RawDataset& dataset,
                                            const std::vector<double>& ratios,
                                            const ExperimentConfig& config, Index repeats,
                                            std::uint64_t base_seed) {
    const Index n_train = train_size(dataset, config.train_fraction);
    std::vector<SweepPoint> curve;
    for (double ratio : ratios) {
        if (!(ratio > 0.0 && ratio <= 1.0)) throw Error("support ratio must lie in (0, 1]");
        ExperimentConfig cfg = config;
        cfg.lab.max_sv = std::clamp<Index>(
            static_cast<Index>(std::floor(ratio * static_cast<double>(n_train))), 1, n_train - 1);
        cfg.lab.n0 = std::min(cfg.lab.n0, cfg.lab.max_sv);
        const auto report = run_experiment(dataset, Method::Lab, cfg, repeats, base_seed);
        curve.push_back({ratio, report.mean_rsse, report.std_rsse, cfg.lab.max_sv, report.failed});
    }
    return curve;
}

std::vector<SweepPoint> sigma0_sweep(const data::RawDataset& dataset,
                                     const std::vector<double>& sigma0_values,
                                     const ExperimentConfig& config, Index repeats,
                                     std::uint64_t base_seed) {
    std::vector<SweepPoint> curve;
    for (double sigma0 : sigma0_values) {
        ExperimentConfig cfg = config;
        cfg.lab.sigma0 = sigma0;
        const auto report = run_experiment(dataset, Method::Lab, cfg, repeats, base_seed);
        curve.push_back({sigma0, report.mean_rsse, report.std_rsse, cfg.lab.max_sv, report.failed});
    }
    return curve;
}

json report_to_json(const ExperimentReport& report) {
    json rows = json::array();
    for (const auto& r : report.repeats) {
        json row = {{"seed", r.seed},
                    {"ok", r.ok},
                    {"r2", r.r2},
                    {"rsse", r.rsse},
                    {"support_count", r.support_count},
                    {"train_seconds", r.train_seconds},
                    {"predict_seconds", r.predict_seconds}};
        if (!r.error.empty()) row["error"] = r.error;
        if (r.selected_param) row["selected_param"] = *r.selected_param;
        rows.push_back(std::move(row));
    }
    std::vector<std::uint64_t> seeds;
    for (const auto& r : report.repeats) seeds.push_back(r.seed);
    return {{"method", to_string(report.method)},
            {"mean_r2", report.mean_r2},
            {"std_r2", report.std_r2},
            {"mean_rsse", report.mean_rsse},
            {"std_rsse", report.std_rsse},
            {"mean_support", report.mean_support},
            {"failed", report.failed},
            {"seeds", seeds},
            {"config", report.config},
            {"repeats", rows}};
}

void write_report_json(const std::vector<ExperimentReport>& reports,
                       const std::filesystem::path& path) {
    json doc = {{"reports", json::array()}};
    for (const auto& r : reports) doc["reports"].push_back(report_to_json(r));
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw Error("failed writing file: " + path.string());
}

void write_repeats_csv(const std::vector<ExperimentReport>& reports,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path.string());
    out.precision(12);
    out << "method,seed,ok,r2,rsse,support_count,train_seconds,predict_seconds\n";
    for (const auto& rep : reports) {
        for (const auto& r : rep.repeats) {
            out << to_string(rep.method) << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ',' << r.r2
                << ',' << r.rsse << ',' << r.support_count << ',' << r.train_seconds << ','
                << r.predict_seconds << '\n';
        }
    }
}

void write_sweep_csv(const std::vector<SweepPoint>& curve, const std::string& value_name,
                     const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path.string());
    out.precision(12);
    out << value_name << ",mean,std,max_sv,failed\n";
    for (const auto& p : curve) {
        out << p.value << ',' << p.mean_rsse << ',' << p.std_rsse << ',' << p.support_count << ','
            << p.failed << '\n';
    }
}

}  // namespace labrbf::eval
