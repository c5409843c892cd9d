#include "havok_mpc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "havok_mpc/errors.hpp"

namespace havok {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim spaces and stray carriage returns
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw DataError("row " + std::to_string(row) + ", column '" + column +
                        "': cannot parse '" + cell + "' as a number");
    }
    if (!std::isfinite(value)) {
        throw DataError("row " + std::to_string(row) + ", column '" + column +
                        "': non-finite value '" + cell + "'");
    }
    return value;
}

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw DataError(std::string(what) + " contains non-finite values");
}

std::vector<std::string> default_names(const char* prefix, Index n) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i + 1));
    return names;
}

}  // namespace

Vector NormalizationSpec::apply_input(const Vector& u) const {
    return (u - input_offset).cwiseQuotient(input_scale);
}

Vector NormalizationSpec::invert_input(const Vector& u) const {
    return u.cwiseProduct(input_scale) + input_offset;
}

Vector NormalizationSpec::apply_output(const Vector& y) const {
    return (y - output_offset).cwiseQuotient(output_scale);
}

Vector NormalizationSpec::invert_output(const Vector& y) const {
    return y.cwiseProduct(output_scale) + output_offset;
}

NormalizationSpec identity_normalization(Index n_u, Index n_y) {
    NormalizationSpec spec;
    spec.method = NormMethod::None;
    spec.input_offset = Vector::Zero(n_u);
    spec.input_scale = Vector::Ones(n_u);
    spec.output_offset = Vector::Zero(n_y);
    spec.output_scale = Vector::Ones(n_y);
    return spec;
}

TimeSeriesDataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream file(path);
    if (!file) throw DataError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(file, line)) throw DataError("'" + path + "' is empty");
    const auto header = split_line(line);

    auto column_of = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw DataError("'" + path + "' has no column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    };

    std::vector<std::string> input_cols = schema.input_columns;
    std::vector<std::string> output_cols = schema.output_columns;
    if (input_cols.empty()) {
        for (const auto& name : header) {
            if (!name.empty() && name.front() == 'u') input_cols.push_back(name);
        }
    }
    if (output_cols.empty()) {
        for (const auto& name : header) {
            if (!name.empty() && name.front() == 'y') output_cols.push_back(name);
        }
    }
    if (input_cols.empty()) throw DataError("'" + path + "': no input columns found");
    if (output_cols.empty()) throw DataError("'" + path + "': no output columns found");

    const std::size_t t_idx = column_of(schema.time_column);
    std::vector<std::size_t> u_idx, y_idx;
    for (const auto& name : input_cols) u_idx.push_back(column_of(name));
    for (const auto& name : output_cols) y_idx.push_back(column_of(name));

    std::vector<double> times;
    std::vector<std::vector<double>> u_rows, y_rows;
    std::size_t row = 0;
    while (std::getline(file, line)) {
        ++row;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw DataError("'" + path + "' row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        }
        times.push_back(parse_cell(cells[t_idx], row, schema.time_column));
        std::vector<double> u_row, y_row;
        for (std::size_t i = 0; i < u_idx.size(); ++i)
            u_row.push_back(parse_cell(cells[u_idx[i]], row, input_cols[i]));
        for (std::size_t i = 0; i < y_idx.size(); ++i)
            y_row.push_back(parse_cell(cells[y_idx[i]], row, output_cols[i]));
        u_rows.push_back(std::move(u_row));
        y_rows.push_back(std::move(y_row));
    }

    const Index n = static_cast<Index>(times.size());
    if (n < 2) throw DataError("'" + path + "': need at least 2 samples, got " + std::to_string(n));

    const double sample_period = (times.back() - times.front()) / static_cast<double>(n - 1);
    if (!(sample_period > 0.0)) {
        throw DataError("'" + path + "': time column is not strictly increasing");
    }
    for (Index k = 0; k + 1 < n; ++k) {
        const double delta = times[static_cast<std::size_t>(k + 1)] - times[static_cast<std::size_t>(k)];
        if (std::abs(delta - sample_period) > 1e-6 * sample_period) {
            throw DataError("'" + path + "': non-uniform sampling at row " + std::to_string(k + 1) +
                            " (delta " + g17(delta) + " vs period " + g17(sample_period) + ")");
        }
    }

    TimeSeriesDataset ds;
    ds.sample_period = sample_period;
    ds.t0 = times.front();
    ds.inputs.resize(n, static_cast<Index>(input_cols.size()));
    ds.outputs.resize(n, static_cast<Index>(output_cols.size()));
    for (Index k = 0; k < n; ++k) {
        for (Index c = 0; c < ds.inputs.cols(); ++c)
            ds.inputs(k, c) = u_rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
        for (Index c = 0; c < ds.outputs.cols(); ++c)
            ds.outputs(k, c) = y_rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
    }
    ds.input_names = input_cols;
    ds.output_names = output_cols;
    return ds;
}

void write_csv(const TimeSeriesDataset& ds, const std::string& path) {
    require_finite(ds.inputs, "inputs");
    require_finite(ds.outputs, "outputs");
    std::ofstream file(path);
    if (!file) throw DataError("cannot write '" + path + "'");

    const auto in_names =
        ds.input_names.size() == static_cast<std::size_t>(ds.n_inputs())
            ? ds.input_names
            : default_names("u", ds.n_inputs());
    const auto out_names =
        ds.output_names.size() == static_cast<std::size_t>(ds.n_outputs())
            ? ds.output_names
            : default_names("y", ds.n_outputs());

    file << "t";
    for (const auto& name : in_names) file << ',' << name;
    for (const auto& name : out_names) file << ',' << name;
    file << '\n';
    for (Index k = 0; k < ds.n_samples(); ++k) {
        file << g17(ds.t0 + static_cast<double>(k) * ds.sample_period);
        for (Index c = 0; c < ds.n_inputs(); ++c) file << ',' << g17(ds.inputs(k, c));
        for (Index c = 0; c < ds.n_outputs(); ++c) file << ',' << g17(ds.outputs(k, c));
        file << '\n';
    }
}

namespace {

// Offset/scale per column. ZScore: mean and population std (denominator n).
// MinMax: min and range. Throws on channels that would yield scale <= 0.
void estimate_channels(const Matrix& data, NormMethod method, const char* what,
                       Vector& offset, Vector& scale) {
    const Index n = data.rows();
    const Index n_ch = data.cols();
    offset = Vector::Zero(n_ch);
    scale = Vector::Ones(n_ch);
    if (method == NormMethod::None) return;
    for (Index c = 0; c < n_ch; ++c) {
        if (method == NormMethod::ZScore) {
            const double mean = data.col(c).mean();
            const double var =
                (data.col(c).array() - mean).square().sum() / static_cast<double>(n);
            const double std = std::sqrt(var);
            if (!(std > 0.0)) {
                throw DataError(std::string(what) + " channel " + std::to_string(c + 1) +
                                " has zero variance; zscore is degenerate");
            }
            offset(c) = mean;
            scale(c) = std;
        } else {  // MinMax
            const double lo = data.col(c).minCoeff();
            const double hi = data.col(c).maxCoeff();
            if (!(hi > lo)) {
                throw DataError(std::string(what) + " channel " + std::to_string(c + 1) +
                                " is constant; minmax is degenerate");
            }
            offset(c) = lo;
            scale(c) = hi - lo;
        }
    }
}

}  // namespace

std::pair<TimeSeriesDataset, NormalizationSpec> normalize(const TimeSeriesDataset& ds,
                                                          NormMethod method) {
    if (ds.n_samples() < 2) throw DataError("normalize: need at least 2 samples");
    NormalizationSpec spec;
    spec.method = method;
    estimate_channels(ds.inputs, method, "input", spec.input_offset, spec.input_scale);
    estimate_channels(ds.outputs, method, "output", spec.output_offset, spec.output_scale);
    return {apply_normalization(ds, spec), spec};
}

TimeSeriesDataset apply_normalization(const TimeSeriesDataset& ds,
                                      const NormalizationSpec& spec) {
    if (spec.input_scale.size() != ds.n_inputs() ||
        spec.output_scale.size() != ds.n_outputs()) {
        throw DataError("normalization spec does not match dataset channel counts");
    }
    if ((spec.input_scale.array() <= 0.0).any() || (spec.output_scale.array() <= 0.0).any()) {
        throw DataError("normalization scales must be strictly positive");
    }
    TimeSeriesDataset out = ds;
    out.inputs = (ds.inputs.rowwise() - spec.input_offset.transpose()).array().rowwise() /
                 spec.input_scale.transpose().array();
    out.outputs = (ds.outputs.rowwise() - spec.output_offset.transpose()).array().rowwise() /
                  spec.output_scale.transpose().array();
    return out;
}

TimeSeriesDataset denormalize(const TimeSeriesDataset& ds, const NormalizationSpec& spec) {
    if (spec.input_scale.size() != ds.n_inputs() ||
        spec.output_scale.size() != ds.n_outputs()) {
        throw DataError("normalization spec does not match dataset channel counts");
    }
    TimeSeriesDataset out = ds;
    out.inputs = (ds.inputs.array().rowwise() * spec.input_scale.transpose().array())
                     .rowwise() +
                 spec.input_offset.transpose().array();
    out.outputs = (ds.outputs.array().rowwise() * spec.output_scale.transpose().array())
                      .rowwise() +
                  spec.output_offset.transpose().array();
    return out;
}

std::pair<TimeSeriesDataset, TimeSeriesDataset> split(const TimeSeriesDataset& ds,
                                                      double train_fraction) {
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
        throw ConfigError("train_fraction must lie in (0, 1), got " + g17(train_fraction));
    }
    const Index n = ds.n_samples();
    const Index n_train = static_cast<Index>(std::floor(train_fraction * static_cast<double>(n)));

    TimeSeriesDataset train = ds;
    TimeSeriesDataset test = ds;
    train.inputs = ds.inputs.topRows(n_train);
    train.outputs = ds.outputs.topRows(n_train);
    test.inputs = ds.inputs.bottomRows(n - n_train);
    test.outputs = ds.outputs.bottomRows(n - n_train);
    test.t0 = ds.t0 + static_cast<double>(n_train) * ds.sample_period;
    return {std::move(train), std::move(test)};
}

NormMethod parse_norm_method(const std::string& name) {
    if (name == "none") return NormMethod::None;
    if (name == "zscore") return NormMethod::ZScore;
    if (name == "minmax") return NormMethod::MinMax;
    throw ConfigError("unknown normalization method '" + name + "'");
}

std::string norm_method_name(NormMethod method) {
    switch (method) {
        case NormMethod::None: return "none";
        case NormMethod::ZScore: return "zscore";
        case NormMethod::MinMax: return "minmax";
    }
    return "none";
}

}  // namespace havok
