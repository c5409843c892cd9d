#pragma once

#include <string>
#include <utility>
#include <vector>

#include "havok_mpc/types.hpp"

namespace havok {

// Uniformly sampled input/output record used for identification and
// evaluation. Immutable by convention after construction; all operations
// below are pure functions returning new datasets.
struct TimeSeriesDataset {
    double sample_period = 0.0;  // seconds, > 0
    double t0 = 0.0;             // time of sample 0, informational
    Matrix inputs;               // n_samples x n_u
    Matrix outputs;              // n_samples x n_y
    std::vector<std::string> input_names;   // u1..u{n_u} when defaulted
    std::vector<std::string> output_names;  // y1..y{n_y} when defaulted

    Index n_samples() const { return outputs.rows(); }
    Index n_inputs() const { return inputs.cols(); }
    Index n_outputs() const { return outputs.cols(); }
};

enum class NormMethod { None, ZScore, MinMax };

// Per-channel affine transform: normalized = (x - offset) / scale.
// ZScore uses the population standard deviation (denominator n), which makes
// apply/invert an exact pair.
struct NormalizationSpec {
    NormMethod method = NormMethod::None;
    Vector input_offset;
    Vector input_scale;
    Vector output_offset;
    Vector output_scale;

    Vector apply_input(const Vector& u) const;
    Vector invert_input(const Vector& u) const;
    Vector apply_output(const Vector& y) const;
    Vector invert_output(const Vector& y) const;
};

// Identity spec (offset 0, scale 1) sized for the given channel counts.
NormalizationSpec identity_normalization(Index n_u, Index n_y);

// Column-name mapping for CSV ingestion. Empty input/output lists select all
// columns whose names start with "u" (inputs) or "y" (outputs).
struct CsvSchema {
    std::string time_column = "t";
    std::vector<std::string> input_columns;
    std::vector<std::string> output_columns;
};

// Loads a CSV file (header row, comma separator) and validates: >= 2 rows,
// uniform sampling (successive time deltas within 1e-6 * sample_period of
// each other), all values finite.
TimeSeriesDataset load_csv(const std::string& path, const CsvSchema& schema = {});

// Writes the dataset in the same format load_csv reads: columns t, u1..,
// y1.., values with 17 significant digits so load_csv(write_csv(ds)) is the
// identity on field values.
void write_csv(const TimeSeriesDataset& ds, const std::string& path);

// Estimates a per-channel normalization from ds and applies it.
std::pair<TimeSeriesDataset, NormalizationSpec> normalize(const TimeSeriesDataset& ds,
                                                          NormMethod method);

// Applies an existing spec (e.g. estimated on training data) to ds.
TimeSeriesDataset apply_normalization(const TimeSeriesDataset& ds,
                                      const NormalizationSpec& spec);

// Inverts a normalization.
TimeSeriesDataset denormalize(const TimeSeriesDataset& ds, const NormalizationSpec& spec);

// Contiguous prefix/suffix split at floor(train_fraction * n_samples); no
// shuffling, temporal order preserved. train_fraction must lie in (0, 1).
std::pair<TimeSeriesDataset, TimeSeriesDataset> split(const TimeSeriesDataset& ds,
                                                      double train_fraction);

NormMethod parse_norm_method(const std::string& name);
std::string norm_method_name(NormMethod method);

}  // namespace havok
