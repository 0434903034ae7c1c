#include "labrbf/data.hpp"

#include "labrbf/model_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace labrbf::data {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    std::string out(s.substr(first, last - first + 1));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
        out = out.substr(1, out.size() - 2);
    }
    return out;
}

std::vector<std::string> split_line(const std::string& line, bool comma) {
    std::vector<std::string> cells;
    if (comma) {
        std::string cell;
        std::istringstream in(line);
        while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
        if (!line.empty() && line.back() == ',') cells.emplace_back();
    } else {
        std::istringstream in(line);
        std::string cell;
        while (in >> cell) cells.push_back(trim(cell));
    }
    return cells;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NaN"; }

std::optional<double> parse_number(const std::string& cell) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) return std::nullopt;
    return value;
}

double normalize_value(double x, double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    return 2.0 * (x - lo) / (hi - lo) - 1.0;
}

double denormalize_value(double z, double lo, double hi) {
    if (!(hi > lo)) return lo;
    return lo + (z + 1.0) * 0.5 * (hi - lo);
}

double population_variance(const Vector& v) {
    if (v.size() == 0) return 0.0;
    const double mean = v.mean();
    return (v.array() - mean).square().mean();
}

void add_noise(Vector& y, double noise, std::mt19937_64& rng) {
    if (noise < 0.0) throw DataError("noise level must be nonnegative");
    if (noise == 0.0) return;
    const double sd = std::sqrt(noise * population_variance(y));
    std::normal_distribution<double> gauss(0.0, sd);
    for (Index i = 0; i < y.size(); ++i) y(i) += gauss(rng);
}

}  // namespace

Matrix NormalizationParams::normalize_features(const Matrix& raw) const {
    if (raw.cols() != feature_min.size()) {
        throw DimensionError("expected " + std::to_string(feature_min.size()) +
                             " feature columns, got " + std::to_string(raw.cols()));
    }
    Matrix out(raw.rows(), raw.cols());
    for (Index i = 0; i < raw.rows(); ++i)
        for (Index j = 0; j < raw.cols(); ++j)
            out(i, j) = normalize_value(raw(i, j), feature_min(j), feature_max(j));
    return out;
}

Vector NormalizationParams::normalize_targets(const Vector& raw) const {
    return raw.unaryExpr([this](double y) { return normalize_value(y, target_min, target_max); });
}

Matrix NormalizationParams::denormalize_features(const Matrix& scaled) const {
    if (scaled.cols() != feature_min.size()) {
        throw DimensionError("feature column count does not match normalization");
    }
    Matrix out(scaled.rows(), scaled.cols());
    for (Index i = 0; i < scaled.rows(); ++i)
        for (Index j = 0; j < scaled.cols(); ++j)
            out(i, j) = denormalize_value(scaled(i, j), feature_min(j), feature_max(j));
    return out;
}

Vector NormalizationParams::denormalize_targets(const Vector& scaled) const {
    return scaled.unaryExpr(
        [this](double z) { return denormalize_value(z, target_min, target_max); });
}

Dataset Dataset::subset(const IndexList& rows) const {
    Dataset out;
    out.features.resize(static_cast<Index>(rows.size()), dims());
    out.targets.resize(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.features.row(static_cast<Index>(r)) = features.row(rows[r]);
        out.targets(static_cast<Index>(r)) = targets(rows[r]);
    }
    out.norm = norm;
    return out;
}

std::string to_string(SupportStrategy s) {
    switch (s) {
        case SupportStrategy::UniformRandom: return "uniform-random";
        case SupportStrategy::LabelSortedEven: return "label-sorted-even";
    }
    return "unknown";
}

SupportStrategy parse_support_strategy(const std::string& name) {
    if (name == "uniform-random" || name == "uniform") return SupportStrategy::UniformRandom;
    if (name == "label-sorted-even" || name == "sorted") return SupportStrategy::LabelSortedEven;
    throw DataError("unknown support strategy: " + name);
}

ColumnRef parse_column_ref(const std::string& text) {
    if (!text.empty() && std::all_of(text.begin(), text.end(),
                                     [](unsigned char c) { return std::isdigit(c); })) {
        return static_cast<std::size_t>(std::stoull(text));
    }
    return text;
}

namespace {

struct Table {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

Table parse_table(const std::string& text, bool impute) {
    std::istringstream in(text);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::optional<bool> comma;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        if (!comma) comma = line.find(',') != std::string::npos;
        rows.push_back(split_line(line, *comma));
    }
    if (rows.empty()) throw DataError("empty table");

    // A first row with any cell that is neither numeric nor a missing marker is a header.
    Table out;
    const bool has_header = std::any_of(rows.front().begin(), rows.front().end(),
                                        [](const std::string& c) {
                                            return !is_missing(c) && !parse_number(c);
                                        });
    if (has_header) {
        out.header = rows.front();
        rows.erase(rows.begin());
    }
    if (rows.empty()) throw DataError("empty table");

    const std::size_t width = has_header ? out.header.size() : rows.front().size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != width) {
            throw DataError("row " + std::to_string(r + 1) + " has " +
                            std::to_string(rows[r].size()) + " cells, expected " +
                            std::to_string(width));
        }
    }

    const auto n = static_cast<Index>(rows.size());
    Eigen::MatrixXd& table = out.values;
    table.resize(n, static_cast<Index>(width));
    std::vector<std::vector<Index>> missing(width);
    for (Index i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            const std::string& cell = rows[static_cast<std::size_t>(i)][j];
            if (is_missing(cell)) {
                if (!impute) {
                    throw DataError("missing value at row " + std::to_string(i + 1) +
                                    ", column " + std::to_string(j) + " (imputation disabled)");
                }
                missing[j].push_back(i);
                table(i, static_cast<Index>(j)) = 0.0;
                continue;
            }
            const auto value = parse_number(cell);
            if (!value) {
                throw DataError("non-numeric cell '" + cell + "' at row " +
                                std::to_string(i + 1) + ", column " + std::to_string(j));
            }
            table(i, static_cast<Index>(j)) = *value;
        }
    }
    for (std::size_t j = 0; j < width; ++j) {
        if (missing[j].empty()) continue;
        const auto present = n - static_cast<Index>(missing[j].size());
        if (present == 0) throw DataError("column " + std::to_string(j) + " has no values");
        const double mean = table.col(static_cast<Index>(j)).sum() / static_cast<double>(present);
        for (Index i : missing[j]) table(i, static_cast<Index>(j)) = mean;
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

RawDataset parse_csv(const std::string& text, const ColumnRef& target, bool impute) {
    const Table t = parse_table(text, impute);
    const auto width = static_cast<std::size_t>(t.values.cols());
    if (width < 2) throw DataError("need at least one feature column and a target column");

    std::size_t target_col = 0;
    if (const auto* name = std::get_if<std::string>(&target)) {
        const auto it = std::find(t.header.begin(), t.header.end(), *name);
        if (it == t.header.end()) throw DataError("target column not found: " + *name);
        target_col = static_cast<std::size_t>(it - t.header.begin());
    } else {
        target_col = std::get<std::size_t>(target);
        if (target_col >= width) {
            throw DataError("target column not found: index " + std::to_string(target_col));
        }
    }

    RawDataset raw;
    raw.features.resize(t.values.rows(), static_cast<Index>(width - 1));
    raw.targets = t.values.col(static_cast<Index>(target_col));
    Index out_col = 0;
    for (std::size_t j = 0; j < width; ++j) {
        if (j == target_col) continue;
        raw.features.col(out_col++) = t.values.col(static_cast<Index>(j));
        if (!t.header.empty()) raw.column_names.push_back(t.header[j]);
    }
    raw.target_name = t.header.empty() ? std::to_string(target_col) : t.header[target_col];
    return raw;
}

Matrix parse_features_csv(const std::string& text, bool impute) {
    return parse_table(text, impute).values;
}

Matrix load_features_csv(const std::filesystem::path& path, bool impute) {
    return parse_features_csv(read_file(path), impute);
}

RawDataset load_csv(const std::filesystem::path& path, const ColumnRef& target, bool impute) {
    return parse_csv(read_file(path), target, impute);
}

NormalizationParams fit_normalization(const RawDataset& raw) {
    if (raw.size() == 0 || raw.dims() == 0) throw DataError("empty dataset");
    if (!raw.features.allFinite() || !raw.targets.allFinite()) {
        throw DataError("dataset contains non-finite values");
    }
    NormalizationParams p;
    p.feature_min = raw.features.colwise().minCoeff().transpose();
    p.feature_max = raw.features.colwise().maxCoeff().transpose();
    p.target_min = raw.targets.minCoeff();
    p.target_max = raw.targets.maxCoeff();
    return p;
}

Dataset apply_normalization(const RawDataset& raw, const NormalizationParams& norm) {
    Dataset ds;
    ds.features = norm.normalize_features(raw.features);
    ds.targets = norm.normalize_targets(raw.targets);
    ds.norm = norm;
    return ds;
}

Dataset normalize(const RawDataset& raw) { return apply_normalization(raw, fit_normalization(raw)); }

RawDataset denormalize(const Dataset& ds) {
    RawDataset raw;
    raw.features = ds.norm.denormalize_features(ds.features);
    raw.targets = ds.norm.denormalize_targets(ds.targets);
    return raw;
}

TrainTestSplit split(const Dataset& ds, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw DataError("train fraction must lie in (0, 1)");
    }
    const Index n = ds.size();
    const auto n_train = static_cast<Index>(std::floor(spec.train_fraction * static_cast<double>(n)));
    if (n_train < 1 || n_train >= n) {
        throw DataError("dataset of " + std::to_string(n) +
                        " rows is too small for a nonempty train/test split");
    }
    IndexList order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);

    TrainTestSplit out;
    out.train_indices.assign(order.begin(), order.begin() + n_train);
    out.test_indices.assign(order.begin() + n_train, order.end());
    out.train = ds.subset(out.train_indices);
    out.test = ds.subset(out.test_indices);
    return out;
}

double sin2x3(double x) { return std::sin(2.0 * x * x * x); }

int cherkassky_dims(int id) {
    switch (id) {
        case 1: return 2;
        case 2: return 6;
        case 3: return 4;
        default: throw DataError("invalid test function id " + std::to_string(id) + " (expected 1, 2 or 3)");
    }
}

std::pair<double, double> cherkassky_domain(int id) {
    switch (id) {
        case 1: return {-2.0, 2.0};
        case 2: return {-1.0, 1.0};
        case 3: return {-0.25, 0.25};
        default: throw DataError("invalid test function id " + std::to_string(id) + " (expected 1, 2 or 3)");
    }
}

double cherkassky(int id, PointRef x) {
    if (x.size() != cherkassky_dims(id)) throw DimensionError("wrong input dimension for test function");
    using std::numbers::pi;
    switch (id) {
        case 1:
            return (1.0 + std::sin(2.0 * x(0) + 3.0 * x(1))) / (3.5 + std::sin(x(0) - x(1)));
        case 2:
            return 10.0 * std::sin(pi * x(0) * x(1)) + 20.0 * (x(2) - 0.5) * (x(2) - 0.5) +
                   5.0 * x(3) + 10.0 * x(4) + 0.0 * x(5);
        default:
            return std::exp(2.0 * pi * x(0) * std::sin(x(3)) + std::sin(x(1) * x(2)));
    }
}

RawDataset synth_sin2x3(Index n, double lo, double hi, double noise, std::uint64_t seed) {
    if (n < 1) throw DataError("sample count must be positive");
    if (!(lo < hi)) throw DataError("sampling interval must satisfy lo < hi");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(lo, hi);
    RawDataset raw;
    raw.features.resize(n, 1);
    raw.targets.resize(n);
    for (Index i = 0; i < n; ++i) {
        raw.features(i, 0) = unif(rng);
        raw.targets(i) = sin2x3(raw.features(i, 0));
    }
    add_noise(raw.targets, noise, rng);
    raw.column_names = {"x"};
    raw.target_name = "y";
    return raw;
}

RawDataset synth_cherkassky(int id, Index n, double noise, std::uint64_t seed,
                            std::optional<std::pair<double, double>> domain) {
    const int m = cherkassky_dims(id);
    if (n < 1) throw DataError("sample count must be positive");
    const auto [lo, hi] = domain.value_or(cherkassky_domain(id));
    if (!(lo < hi)) throw DataError("sampling interval must satisfy lo < hi");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(lo, hi);
    RawDataset raw;
    raw.features.resize(n, m);
    raw.targets.resize(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) raw.features(i, j) = unif(rng);
        raw.targets(i) = cherkassky(id, raw.features.row(i));
    }
    add_noise(raw.targets, noise, rng);
    for (Index j = 0; j < m; ++j) raw.column_names.push_back("x" + std::to_string(j + 1));
    raw.target_name = "y";
    return raw;
}

SupportSelection select_initial_support(const Dataset& ds, Index n0, SupportStrategy strategy,
                                        std::uint64_t seed) {
    const Index n = ds.size();
    if (n0 < 1 || n0 >= n) {
        throw DataError("initial support size " + std::to_string(n0) + " must lie in [1, " +
                        std::to_string(n - 1) + "]");
    }
    IndexList order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::vector<bool> chosen(static_cast<std::size_t>(n), false);

    if (strategy == SupportStrategy::UniformRandom) {
        std::mt19937_64 rng(seed);
        std::shuffle(order.begin(), order.end(), rng);
        for (Index i = 0; i < n0; ++i) chosen[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
    } else {
        std::stable_sort(order.begin(), order.end(),
                         [&](Index a, Index b) { return ds.targets(a) < ds.targets(b); });
        // Rank of the i-th pick is the midpoint of the i-th of n0 equal bins.
        for (Index i = 0; i < n0; ++i) {
            const auto rank = static_cast<std::size_t>(
                (static_cast<double>(i) + 0.5) * static_cast<double>(n) / static_cast<double>(n0));
            chosen[static_cast<std::size_t>(order[std::min<std::size_t>(rank, static_cast<std::size_t>(n - 1))])] = true;
        }
    }

    SupportSelection sel;
    for (Index i = 0; i < n; ++i) {
        (chosen[static_cast<std::size_t>(i)] ? sel.support : sel.remainder).push_back(i);
    }
    return sel;
}

void write_csv(const RawDataset& raw, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path.string());
    out.precision(17);
    for (Index j = 0; j < raw.dims(); ++j) {
        out << (static_cast<std::size_t>(j) < raw.column_names.size()
                    ? raw.column_names[static_cast<std::size_t>(j)]
                    : "x" + std::to_string(j + 1))
            << ',';
    }
    out << (raw.target_name.empty() ? "y" : raw.target_name) << '\n';
    for (Index i = 0; i < raw.size(); ++i) {
        for (Index j = 0; j < raw.dims(); ++j) out << raw.features(i, j) << ',';
        out << raw.targets(i) << '\n';
    }
    if (!out) throw DataError("failed writing file: " + path.string());
}

void export_dataset(const Dataset& ds, const std::filesystem::path& csv_path,
                    const std::filesystem::path& json_path,
                    const std::vector<std::string>& column_names, const std::string& target_name) {
    RawDataset view;
    view.features = ds.features;
    view.targets = ds.targets;
    view.column_names = column_names;
    view.target_name = target_name;
    write_csv(view, csv_path);

    std::ofstream out(json_path);
    if (!out) throw DataError("cannot write file: " + json_path.string());
    out << io::normalization_to_json(ds.norm).dump(2) << '\n';
}

}  // namespace labrbf::data
