#include "labrbf/model_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace labrbf::io {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j, const char* what) {
    if (!j.is_array()) throw FormatError(std::string(what) + " must be an array");
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

json matrix_to_json(const Matrix& m) {
    return std::vector<double>(m.data(), m.data() + m.size());
}

Matrix matrix_from_json(const json& j, Index rows, Index cols, const char* what) {
    const Vector flat = vector_from_json(j, what);
    if (flat.size() != rows * cols) {
        throw FormatError(std::string(what) + " has " + std::to_string(flat.size()) +
                          " entries, expected " + std::to_string(rows * cols));
    }
    return Eigen::Map<const Matrix>(flat.data(), rows, cols);
}

std::string normalize_key(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error("invalid number for " + key + ": '" + value + "'");
    }
}

long long to_integer(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error("invalid integer for " + key + ": '" + value + "'");
    }
}

}  // namespace

json normalization_to_json(const data::NormalizationParams& p) {
    return {{"feature_min", vector_to_json(p.feature_min)},
            {"feature_max", vector_to_json(p.feature_max)},
            {"target_min", p.target_min},
            {"target_max", p.target_max}};
}

data::NormalizationParams normalization_from_json(const json& j) {
    data::NormalizationParams p;
    try {
        p.feature_min = vector_from_json(j.at("feature_min"), "feature_min");
        p.feature_max = vector_from_json(j.at("feature_max"), "feature_max");
        p.target_min = j.at("target_min").get<double>();
        p.target_max = j.at("target_max").get<double>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed normalization block: ") + e.what());
    }
    if (p.feature_min.size() != p.feature_max.size()) {
        throw FormatError("normalization feature_min/feature_max sizes differ");
    }
    return p;
}

json model_to_json(const learning::LabModel& model) {
    return {{"format_version", kModelFormatVersion},
            {"kernel", "lab_rbf"},
            {"dims", model.dims()},
            {"support_size", model.support_size()},
            {"lambda", model.lambda},
            {"theta_min", model.theta.theta_min()},
            {"support_x", matrix_to_json(model.support_x)},
            {"support_y", vector_to_json(model.support_y)},
            {"theta", matrix_to_json(model.theta.values())},
            {"alpha", vector_to_json(model.alpha)},
            {"normalization", normalization_to_json(model.norm)}};
}

learning::LabModel model_from_json(const json& j) {
    learning::LabModel model;
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw FormatError("unsupported model format version " + std::to_string(version) +
                              " (expected " + std::to_string(kModelFormatVersion) + ")");
        }
        const auto dims = j.at("dims").get<Index>();
        const auto n = j.at("support_size").get<Index>();
        if (dims < 1 || n < 1) throw FormatError("model must have positive dims and support size");
        model.lambda = j.at("lambda").get<double>();
        model.support_x = matrix_from_json(j.at("support_x"), n, dims, "support_x");
        model.support_y = vector_from_json(j.at("support_y"), "support_y");
        model.alpha = vector_from_json(j.at("alpha"), "alpha");
        model.theta = kernels::BandwidthSet(matrix_from_json(j.at("theta"), n, dims, "theta"),
                                            j.at("theta_min").get<double>());
        model.norm = normalization_from_json(j.at("normalization"));
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed model document: ") + e.what());
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(std::string("invalid model document: ") + e.what());
    }
    if (model.support_y.size() != model.support_size() ||
        model.alpha.size() != model.support_size()) {
        throw FormatError("support_y/alpha length does not match support_size");
    }
    if (model.norm.feature_min.size() != model.dims()) {
        throw FormatError("normalization dimension does not match model dims");
    }
    return model;
}

void save_model(const learning::LabModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path.string());
    out << model_to_json(model).dump(1) << '\n';
    if (!out) throw Error("failed writing file: " + path.string());
}

learning::LabModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("model file is not valid JSON: " + std::string(e.what()));
    }
    return model_from_json(j);
}

void write_trace_csv(const learning::TrainTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path.string());
    out.precision(12);
    out << "outer_iteration,support_size,pool_loss,max_pool_error,added,wall_seconds\n";
    for (const auto& r : trace.records) {
        out << r.outer_iteration << ',' << r.support_size << ',' << r.pool_loss << ','
            << r.max_pool_error << ',' << r.added << ',' << r.wall_seconds << '\n';
    }
    if (!out) throw Error("failed writing file: " + path.string());
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    std::map<std::string, std::string> out;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            throw Error("config file is not valid JSON: " + std::string(e.what()));
        }
        for (const auto& [key, value] : j.items()) {
            out[normalize_key(key)] = value.is_string() ? value.get<std::string>() : value.dump();
        }
        return out;
    }

    std::istringstream lines(text);
    std::string line;
    int number = 0;
    while (std::getline(lines, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error("config line " + std::to_string(number) + " is not key = value");
        }
        out[normalize_key(trim(line.substr(0, eq)))] = trim(line.substr(eq + 1));
    }
    return out;
}

bool apply_train_setting(learning::TrainConfig& c, const std::string& raw_key,
                         const std::string& value) {
    const std::string key = normalize_key(raw_key);
    if (key == "lambda") c.lambda = to_double(key, value);
    else if (key == "eta") c.eta = to_double(key, value);
    else if (key == "sigma0") c.sigma0 = to_double(key, value);
    else if (key == "n0") c.n0 = to_integer(key, value);
    else if (key == "k") c.k = to_integer(key, value);
    else if (key == "epsilon") c.epsilon = to_double(key, value);
    else if (key == "max-sv") c.max_sv = to_integer(key, value);
    else if (key == "inner-iters") c.inner_iters = to_integer(key, value);
    else if (key == "outer-iters") c.outer_iters = to_integer(key, value);
    else if (key == "batch-size") c.batch_size = to_integer(key, value);
    else if (key == "theta-min") c.theta_min = to_double(key, value);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_integer(key, value));
    else if (key == "strategy") c.support_strategy = data::parse_support_strategy(value);
    else if (key == "optimizer") c.optimizer = learning::parse_optimizer(value);
    else return false;
    return true;
}

json train_config_to_json(const learning::TrainConfig& c) {
    return {{"lambda", c.lambda},
            {"eta", c.eta},
            {"sigma0", c.sigma0},
            {"n0", c.n0},
            {"k", c.k},
            {"epsilon", c.epsilon},
            {"max_sv", c.max_sv},
            {"inner_iters", c.inner_iters},
            {"outer_iters", c.outer_iters},
            {"batch_size", c.batch_size},
            {"theta_min", c.theta_min},
            {"seed", c.seed},
            {"strategy", data::to_string(c.support_strategy)},
            {"optimizer", learning::to_string(c.optimizer)}};
}

}  // namespace labrbf::io
