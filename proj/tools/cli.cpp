#include "cli.hpp"

#include "labrbf/checks.hpp"
#include "labrbf/evaluation.hpp"
#include "labrbf/kernel_learning.hpp"
#include "labrbf/logging.hpp"
#include "labrbf/model_io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <functional>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace labkrr {

using namespace labrbf;

namespace {

constexpr std::pair<const char*, const char*> kTrainFlags[] = {
    {"lambda", "ridge regularizer"},
    {"eta", "learning rate"},
    {"sigma0", "initial bandwidth of every support point"},
    {"n0", "initial support size"},
    {"k", "points added per expansion"},
    {"epsilon", "pointwise squared-error tolerance"},
    {"max-sv", "support size cap"},
    {"inner-iters", "SGD steps per outer iteration"},
    {"outer-iters", "outer iteration cap"},
    {"batch-size", "minibatch size"},
    {"theta-min", "bandwidth floor"},
    {"seed", "random seed"},
    {"strategy", "initial support: uniform-random | label-sorted-even"},
    {"optimizer", "sgd | adam"},
};

constexpr std::pair<const char*, const char*> kExperimentFlags[] = {
    {"repeats", "number of random splits"},
    {"jobs", "worker threads for repeats"},
    {"train-fraction", "share of rows used for training"},
    {"rbf-sigma", "global RBF bandwidth (grid search when omitted)"},
    {"rbf-lambda", "global RBF ridge regularizer"},
    {"tl1-rho", "TL1 truncation radius (grid search when omitted)"},
    {"tl1-lambda", "TL1 ridge regularizer"},
    {"methods", "comma separated: lab, rbf_krr, tl1_krr"},
};

// Flag values kept as strings so a config file and the command line share one parser.
struct Settings {
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;
    std::string config_path;

    void add(CLI::App* app, const char* name, const char* help) {
        auto& slot = values[name];
        options.emplace_back(name, app->add_option(std::string("--") + name, slot, help));
    }

    // Defaults < config file < flags.
    [[nodiscard]] std::map<std::string, std::string> resolve() const {
        std::map<std::string, std::string> merged;
        if (!config_path.empty()) merged = io::read_config_file(config_path);
        for (const auto& [name, opt] : options)
            if (opt->count() > 0) merged[name] = values.at(name);
        return merged;
    }
};

void add_train_flags(CLI::App* app, Settings& s) {
    for (const auto& [name, help] : kTrainFlags) s.add(app, name, help);
    app->add_option("--config", s.config_path, "JSON or key = value settings file");
}

void add_experiment_flags(CLI::App* app, Settings& s) {
    for (const auto& [name, help] : kExperimentFlags) s.add(app, name, help);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw UsageError("invalid number for " + key + ": '" + v + "'");
}

long long to_integer(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (used == v.size()) return i;
    } catch (const std::exception&) {
    }
    throw UsageError("invalid integer for " + key + ": '" + v + "'");
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto a = item.find_first_not_of(" \t[]\"");
        const auto b = item.find_last_not_of(" \t[]\"");
        if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& key, const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) out.push_back(to_double(key, item));
    if (out.empty()) throw UsageError(key + " needs at least one value");
    return out;
}

struct Experiment {
    eval::ExperimentConfig config;
    labrbf::Index repeats = 10;
    std::vector<eval::Method> methods{eval::Method::Lab, eval::Method::RbfKrr};
};

Experiment build_experiment(const std::map<std::string, std::string>& settings) {
    Experiment e;
    for (const auto& [key, value] : settings) {
        try {
            if (io::apply_train_setting(e.config.lab, key, value)) continue;
        } catch (const io::FormatError&) {
            throw;
        } catch (const Error& ex) {
            throw UsageError(ex.what());
        }
        if (key == "repeats") e.repeats = to_integer(key, value);
        else if (key == "jobs") e.config.jobs = static_cast<unsigned>(std::max(1LL, to_integer(key, value)));
        else if (key == "train-fraction") e.config.train_fraction = to_double(key, value);
        else if (key == "rbf-sigma") e.config.rbf_sigma = to_double(key, value);
        else if (key == "rbf-lambda") e.config.rbf_lambda = to_double(key, value);
        else if (key == "tl1-rho") e.config.tl1_rho = to_double(key, value);
        else if (key == "tl1-lambda") e.config.tl1_lambda = to_double(key, value);
        else if (key == "methods" || key == "method") {
            e.methods.clear();
            for (const auto& m : split_list(value)) {
                try {
                    e.methods.push_back(eval::parse_method(m));
                } catch (const Error& ex) {
                    throw UsageError(ex.what());
                }
            }
            if (e.methods.empty()) throw UsageError("no methods given");
        } else {
            throw UsageError("unknown setting: " + key);
        }
    }
    if (e.repeats < 1) throw UsageError("repeats must be at least 1");
    if (!(e.config.train_fraction > 0.0 && e.config.train_fraction < 1.0)) {
        throw UsageError("train-fraction must lie in (0, 1)");
    }
    return e;
}

learning::TrainConfig build_train_config(const std::map<std::string, std::string>& settings) {
    const Experiment e = build_experiment(settings);
    try {
        e.config.lab.validate();
    } catch (const Error& ex) {
        throw UsageError(ex.what());
    }
    return e.config.lab;
}

void ensure_writable(const std::string& path) {
    std::ofstream probe(path, std::ios::app);
    if (!probe) throw Error("cannot write file: " + path);
}

struct DataSource {
    std::string data_path;
    std::string target;
    bool impute = false;
    std::string synth;

    void add(CLI::App* app) {
        app->add_option("--data", data_path, "CSV file");
        app->add_option("--target", target, "target column name or zero-based index (default: last)");
        app->add_flag("--impute", impute, "replace missing cells by the column mean");
        app->add_option("--synth", synth, "synthetic dataset spec instead of --data");
    }

    [[nodiscard]] data::RawDataset load(std::uint64_t seed) const {
        if (data_path.empty() == synth.empty()) throw UsageError("give exactly one of --data or --synth");
        if (!synth.empty()) return generate(parse_synth_spec(synth), derive_seed(seed, 101));
        return load_with_target(data_path, target, impute);
    }

    static data::RawDataset load_with_target(const std::string& path, const std::string& target,
                                             bool impute) {
        if (!target.empty()) return data::load_csv(path, data::parse_column_ref(target), impute);
        // Default target: the last column. Find its index from a first pass.
        const Matrix table = data::load_features_csv(path, impute);
        if (table.cols() < 2) throw DataError("need at least one feature column and a target column");
        return data::load_csv(path, static_cast<std::size_t>(table.cols() - 1), impute);
    }
};

std::uint64_t seed_of(const std::map<std::string, std::string>& settings) {
    const auto it = settings.find("seed");
    return it == settings.end() ? 0 : static_cast<std::uint64_t>(to_integer("seed", it->second));
}

// ---- commands -------------------------------------------------------------

struct TrainArgs {
    DataSource source;
    Settings settings;
    std::string out = "model.json";
    std::string trace;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const auto settings = a.settings.resolve();
    const auto config = build_train_config(settings);
    if (a.source.data_path.empty()) throw UsageError("--data is required");
    const auto raw = DataSource::load_with_target(a.source.data_path, a.source.target, a.source.impute);
    const auto result = learning::train(data::normalize(raw), config);
    io::save_model(result.model, a.out);
    const std::string trace_path = a.trace.empty() ? a.out + ".trace.csv" : a.trace;
    io::write_trace_csv(result.trace, trace_path);
    out << std::setprecision(10);
    out << "final train loss: " << result.trace.final_train_loss << '\n';
    out << "support size: " << result.model.support_size() << '\n';
    out << "stop reason: " << result.trace.stop_reason << '\n';
    out << "model: " << a.out << "\ntrace: " << trace_path << '\n';
    return kExitOk;
}

struct PredictArgs {
    std::string model;
    std::string data;
    std::string target;
    bool impute = false;
    std::string out = "predictions.csv";
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
    const auto model = io::load_model(a.model);
    Matrix x;
    if (!a.target.empty()) {
        x = data::load_csv(a.data, data::parse_column_ref(a.target), a.impute).features;
    } else {
        x = data::load_features_csv(a.data, a.impute);
        // A trailing target column (as in the training file) is ignored.
        if (x.cols() == model.dims() + 1) x = x.leftCols(model.dims()).eval();
    }
    if (x.cols() != model.dims()) {
        throw DimensionError("model expects " + std::to_string(model.dims()) +
                             " feature columns, input has " + std::to_string(x.cols()));
    }
    const Vector scaled = model.predict(model.norm.normalize_features(x));
    const Vector raw = model.norm.denormalize_targets(scaled);
    std::ofstream file(a.out);
    if (!file) throw Error("cannot write file: " + a.out);
    file << std::setprecision(17) << "prediction_normalized,prediction\n";
    for (labrbf::Index i = 0; i < scaled.size(); ++i) file << scaled(i) << ',' << raw(i) << '\n';
    if (!file) throw Error("failed writing file: " + a.out);
    out << "wrote " << scaled.size() << " predictions to " << a.out << '\n';
    return kExitOk;
}

struct BenchmarkArgs {
    DataSource source;
    Settings settings;
    std::string out = "report.json";
    std::string rows;
};

int cmd_benchmark(const BenchmarkArgs& a, std::ostream& out) {
    const auto settings = a.settings.resolve();
    const Experiment e = build_experiment(settings);
    ensure_writable(a.out);
    if (!a.rows.empty()) ensure_writable(a.rows);
    const auto seed = seed_of(settings);
    const auto raw = a.source.load(seed);

    std::vector<eval::ExperimentReport> reports;
    bool any_failed = false;
    out << std::left << std::setw(10) << "method" << std::setw(24) << "R2 mean +- std"
        << std::setw(24) << "RSSE mean +- std" << std::setw(10) << "support" << "failed\n";
    out << std::fixed;
    for (auto method : e.methods) {
        auto report = eval::run_experiment(raw, method, e.config, e.repeats, seed);
        std::ostringstream r2, rsse;
        r2 << std::fixed << std::setprecision(4) << report.mean_r2 << " +- " << report.std_r2;
        rsse << std::fixed << std::setprecision(4) << report.mean_rsse << " +- " << report.std_rsse;
        out << std::setw(10) << eval::to_string(method) << std::setw(24) << r2.str() << std::setw(24)
            << rsse.str() << std::setw(10) << std::setprecision(1) << report.mean_support
            << report.failed << '\n';
        any_failed = any_failed || report.failed > 0;
        reports.push_back(std::move(report));
    }
    eval::write_report_json(reports, a.out);
    if (!a.rows.empty()) eval::write_repeats_csv(reports, a.rows);
    out << "report: " << a.out << '\n';
    return any_failed ? kExitCheckFailed : kExitOk;
}

struct SweepArgs {
    DataSource source;
    Settings settings;
    std::string param = "ratio";
    std::string values;
    std::string out = "sweep.csv";
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
    const auto settings = a.settings.resolve();
    const Experiment e = build_experiment(settings);
    if (a.param != "ratio" && a.param != "sigma0") throw UsageError("--param must be ratio or sigma0");
    const std::string default_values =
        a.param == "ratio" ? "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9" : "0.01,0.1,1,10";
    const auto values = parse_doubles("--values", a.values.empty() ? default_values : a.values);
    ensure_writable(a.out);
    const auto seed = seed_of(settings);
    const auto raw = a.source.load(seed);

    const auto curve = a.param == "ratio"
                           ? eval::support_ratio_sweep(raw, values, e.config, e.repeats, seed)
                           : eval::sigma0_sweep(raw, values, e.config, e.repeats, seed);
    eval::write_sweep_csv(curve, a.param, a.out);
    out << std::setprecision(6);
    std::size_t failed = 0;
    for (const auto& p : curve) {
        out << a.param << ' ' << p.value << ": RSSE " << p.mean_rsse << " +- " << p.std_rsse
            << " (max_sv " << p.support_count << ", failed " << p.failed << ")\n";
        failed += p.failed;
    }
    out << "curve: " << a.out << '\n';
    return failed > 0 ? kExitCheckFailed : kExitOk;
}

void print_check(std::ostream& out, const checks::CheckResult& c) {
    out << (c.passed() ? "PASS " : "FAIL ") << std::left << std::setw(20) << c.name
        << std::scientific << std::setprecision(3) << c.value << " (threshold " << c.threshold
        << ", " << c.instances << " instances)";
    if (!c.detail.empty()) out << "  " << c.detail;
    out << '\n' << std::defaultfloat;
}

struct GradcheckArgs {
    std::uint64_t seed = 0;
    long long probes = 100;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
    if (a.probes < 1) throw UsageError("--probes must be at least 1");
    const auto report = checks::gradcheck(a.seed, a.probes);
    print_check(out, report.loss_grad);
    print_check(out, report.kernel_grad);
    out << std::scientific << std::setprecision(3)
        << "zero-residual batch: max |gradient| = " << checks::zero_residual_gradient(a.seed) << '\n'
        << "worst relative error: "
        << std::max(report.loss_grad.value, report.kernel_grad.value) << '\n';
    return report.loss_grad.passed() && report.kernel_grad.passed() ? kExitOk : kExitCheckFailed;
}

struct VerifyArgs {
    checks::SuiteOptions options;
    bool shared = false;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
    using Check = std::function<checks::CheckResult()>;
    const auto& o = a.options;
    std::vector<std::pair<std::string, Check>> suite;
    if (!a.shared) {
        suite.emplace_back("woodbury", [&] { return checks::woodbury_check(o.seed, 20, std::min<labrbf::Index>(20, o.max_points)); });
        suite.emplace_back("stationarity", [&] { return checks::stationarity_check(o); });
        suite.emplace_back("stationarity_fd", [&] { return checks::stationarity_fd_check(o); });
        suite.emplace_back("kkt", [&] { return checks::kkt_check(o); });
        suite.emplace_back("kkt_kernel", [&] { return checks::kkt_kernel_check(o); });
    }
    suite.emplace_back("shared_map", [&] { return checks::shared_map_check(o); });
    suite.emplace_back("constant_bandwidth", [&] { return checks::constant_bandwidth_check(o.seed); });
    if (!a.shared) suite.emplace_back("interpolation", [&] { return checks::interpolation_check(o.seed); });

    bool all = true;
    for (const auto& [name, run_check] : suite) {
        try {
            const auto c = run_check();
            print_check(out, c);
            all = all && c.passed();
        } catch (const Error& e) {
            out << "FAIL " << std::left << std::setw(20) << name << "error: " << e.what() << '\n';
            all = false;
        }
    }
    return all ? kExitOk : kExitCheckFailed;
}

struct SynthArgs {
    std::string spec;
    std::uint64_t seed = 0;
    std::string out;
    std::string grid;
    long long grid_points = 1000;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    const SynthSpec spec = parse_synth_spec(a.spec);
    if (a.grid_points < 2) throw UsageError("--grid-points must be at least 2");
    const auto raw = generate(spec, a.seed);
    data::write_csv(raw, a.out);
    out << "wrote " << raw.size() << " rows to " << a.out << '\n';
    if (raw.dims() != 1) return kExitOk;

    std::string grid_path = a.grid;
    if (grid_path.empty()) {
        std::filesystem::path p(a.out);
        grid_path = (p.parent_path() / (p.stem().string() + "_grid.csv")).string();
    }
    const auto [lo, hi] = spec.domain.value_or(std::pair{0.0, 2.0});
    std::ofstream file(grid_path);
    if (!file) throw Error("cannot write file: " + grid_path);
    file << std::setprecision(17) << "x,y\n";
    for (long long i = 0; i < a.grid_points; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(a.grid_points - 1);
        file << x << ',' << data::sin2x3(x) << '\n';
    }
    if (!file) throw Error("failed writing file: " + grid_path);
    out << "wrote " << a.grid_points << " ground-truth points to " << grid_path << '\n';
    return kExitOk;
}

}  // namespace

SynthSpec parse_synth_spec(const std::string& text) {
    SynthSpec spec;
    const auto colon = text.find(':');
    const std::string name = text.substr(0, colon);
    if (name == "sin2x3") spec.kind = SynthSpec::Kind::Sin2x3;
    else if (name == "cherkassky") spec.kind = SynthSpec::Kind::Cherkassky;
    else throw UsageError("unknown synthetic dataset '" + name + "' (expected sin2x3 or cherkassky)");

    std::optional<double> lo, hi;
    bool have_id = false;
    if (colon != std::string::npos) {
        for (const auto& item : split_list(text.substr(colon + 1))) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw UsageError("synthetic spec item '" + item + "' is not key=value");
            const std::string key = item.substr(0, eq);
            const std::string value = item.substr(eq + 1);
            if (key == "n") spec.n = to_integer(key, value);
            else if (key == "noise") spec.noise = to_double(key, value);
            else if (key == "lo") lo = to_double(key, value);
            else if (key == "hi") hi = to_double(key, value);
            else if (key == "id" && spec.kind == SynthSpec::Kind::Cherkassky) {
                spec.id = static_cast<int>(to_integer(key, value));
                have_id = true;
            } else {
                throw UsageError("unknown synthetic spec key '" + key + "'");
            }
        }
    }
    if (spec.kind == SynthSpec::Kind::Cherkassky) {
        if (!have_id) throw UsageError("cherkassky spec needs id=1, 2 or 3");
        if (spec.id < 1 || spec.id > 3) throw UsageError("cherkassky id must be 1, 2 or 3");
        if (lo || hi) {
            const auto def = data::cherkassky_domain(spec.id);
            spec.domain = std::pair{lo.value_or(def.first), hi.value_or(def.second)};
        }
    } else {
        spec.domain = std::pair{lo.value_or(0.0), hi.value_or(2.0)};
    }
    if (spec.n < 1) throw UsageError("synthetic spec needs n >= 1");
    if (!(spec.noise >= 0.0)) throw UsageError("synthetic spec needs noise >= 0");
    if (spec.domain && !(spec.domain->first < spec.domain->second)) {
        throw UsageError("synthetic spec needs lo < hi");
    }
    return spec;
}

data::RawDataset generate(const SynthSpec& spec, std::uint64_t seed) {
    if (spec.kind == SynthSpec::Kind::Sin2x3) {
        const auto [lo, hi] = spec.domain.value_or(std::pair{0.0, 2.0});
        return data::synth_sin2x3(spec.n, lo, hi, spec.noise, seed);
    }
    return data::synth_cherkassky(spec.id, spec.n, spec.noise, seed, spec.domain);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    log::init_from_env();
    CLI::App app{"Kernel ridge regression with locally adaptive bandwidth RBF kernels", "labkrr"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* c_train = app.add_subcommand("train", "learn bandwidths and support data from a CSV file");
    train.source.add(c_train);
    add_train_flags(c_train, train.settings);
    c_train->add_option("--out", train.out, "model JSON path");
    c_train->add_option("--trace", train.trace, "trace CSV path (default: <out>.trace.csv)");

    PredictArgs predict;
    auto* c_predict = app.add_subcommand("predict", "apply a saved model to a CSV file");
    c_predict->add_option("--model", predict.model, "model JSON")->required();
    c_predict->add_option("--data", predict.data, "CSV of features")->required();
    c_predict->add_option("--target", predict.target, "column to drop before predicting");
    c_predict->add_flag("--impute", predict.impute, "replace missing cells by the column mean");
    c_predict->add_option("--out", predict.out, "prediction CSV path");

    BenchmarkArgs bench;
    auto* c_bench = app.add_subcommand("benchmark", "repeated random-split evaluation of each method");
    bench.source.add(c_bench);
    add_train_flags(c_bench, bench.settings);
    add_experiment_flags(c_bench, bench.settings);
    c_bench->add_option("--out", bench.out, "report JSON path");
    c_bench->add_option("--rows", bench.rows, "per-repeat CSV path");

    SweepArgs sweep;
    auto* c_sweep = app.add_subcommand("sweep", "mean test RSSE against support ratio or sigma0");
    sweep.source.add(c_sweep);
    add_train_flags(c_sweep, sweep.settings);
    add_experiment_flags(c_sweep, sweep.settings);
    c_sweep->add_option("--param", sweep.param, "ratio | sigma0");
    c_sweep->add_option("--values", sweep.values, "comma separated sweep values");
    c_sweep->add_option("--out", sweep.out, "curve CSV path");

    GradcheckArgs grad;
    auto* c_grad = app.add_subcommand("gradcheck", "finite-difference check of the bandwidth gradients");
    c_grad->add_option("--seed", grad.seed, "random seed");
    c_grad->add_option("--probes", grad.probes, "number of random probes");

    VerifyArgs verify;
    auto* c_verify = app.add_subcommand("verify", "numerical self-checks of the asymmetric KRR identities");
    c_verify->add_option("--seed", verify.options.seed, "random seed");
    c_verify->add_option("--instances", verify.options.instances, "random instances per check");
    c_verify->add_option("--max-n", verify.options.max_points, "largest number of points");
    c_verify->add_option("--max-f", verify.options.max_features, "largest feature-map width");
    c_verify->add_option("--lambda", verify.options.lambda, "ridge regularizer");
    c_verify->add_flag("--shared", verify.shared, "only the identical-feature-map checks");

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "write a synthetic dataset (and a ground-truth grid for 1-D)");
    c_synth->add_option("--spec", synth.spec, "sin2x3[:n=..,lo=..,hi=..,noise=..] or cherkassky:id=..[,n=..,noise=..]")->required();
    c_synth->add_option("--seed", synth.seed, "random seed");
    c_synth->add_option("--out", synth.out, "dataset CSV path")->required();
    c_synth->add_option("--grid", synth.grid, "ground-truth grid CSV path (default: <out>_grid.csv)");
    c_synth->add_option("--grid-points", synth.grid_points, "grid resolution");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*c_train) return cmd_train(train, out);
        if (*c_predict) return cmd_predict(predict, out);
        if (*c_bench) return cmd_benchmark(bench, out);
        if (*c_sweep) return cmd_sweep(sweep, out);
        if (*c_grad) return cmd_gradcheck(grad, out);
        if (*c_verify) return cmd_verify(verify, out);
        if (*c_synth) return cmd_synth(synth, out);
    } catch (const SolveError& e) {
        err << "error: " << e.what() << '\n';
        return kExitCheckFailed;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace labkrr
