#pragma once

#include <optional>
#include <string>
#include <vector>

#include "havok_mpc/dataset.hpp"
#include "havok_mpc/embedding.hpp"
#include "havok_mpc/mpc.hpp"
#include "havok_mpc/plant.hpp"

namespace havok {

// Reference-trajectory source for closed-loop runs.
struct ReferenceSpec {
    enum class Kind { Constant, Step, Csv };

    Kind kind = Kind::Constant;
    double value = 0.0;       // Constant
    double step_time = 0.0;   // Step: switch time, seconds
    double initial = 0.0;     // Step: level before the switch
    double final = 1.0;       // Step: level after the switch
    std::string csv_path;     // Csv: single-column file (header "r")
};

Vector build_reference(const ReferenceSpec& spec, int steps, double sample_period);

struct RunSection {
    std::uint64_t seed = 0;
    std::string output_dir = "out";
};

struct DatasetSection {
    std::string csv_path;
    CsvSchema schema;
    double train_fraction = 0.75;
    NormMethod normalization = NormMethod::None;
};

struct EmbeddingSection {
    HankelConfig hankel;
    RankPolicy policy;
};

struct MpcSection {
    MpcConfig mpc;
    ReferenceSpec reference;
    int steps = 200;
};

struct BenchSection {
    std::vector<int> depths = {5, 10, 20, 40, 80};
    int rank = 8;
    int steps = 30;
};

// Parsed and validated run configuration. Identification data comes either
// from `dataset` (a CSV on disk) or from simulating `plant` under
// `excitation`; subcommands check that the sections they need are present.
struct RunConfig {
    RunSection run;
    std::optional<DatasetSection> dataset;
    std::optional<PlantConfig> plant;
    std::optional<ExcitationSpec> excitation;
    EmbeddingSection embedding;
    std::optional<MpcSection> mpc;
    BenchSection bench;
};

// Loads and fully validates a JSON config. Referenced files must exist and
// every numeric field is checked against its module's invariants before any
// computation starts. The HAVOK_MPC_SEED environment variable overrides
// run.seed; sections without an explicit seed inherit run.seed.
RunConfig load_config(const std::string& path);

}  // namespace havok
