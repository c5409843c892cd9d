#include "havok_mpc/config.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "havok_mpc/errors.hpp"

namespace havok {

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        file >> j;
    } catch (const json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
    return j;
}

// Accepts a scalar (promoted to 1x1 / uniform diagonal), a flat array
// (diagonal), or an array of arrays (full matrix).
Matrix parse_weight(const json& j, Index dim, const std::string& name) {
    if (j.is_number()) {
        return j.get<double>() * Matrix::Identity(dim, dim);
    }
    if (j.is_array() && !j.empty() && j.front().is_number()) {
        if (static_cast<Index>(j.size()) != dim) {
            throw ConfigError(name + ": expected " + std::to_string(dim) + " diagonal entries");
        }
        Vector diag(dim);
        for (Index i = 0; i < dim; ++i) diag(i) = j[static_cast<std::size_t>(i)].get<double>();
        return diag.asDiagonal();
    }
    if (j.is_array()) {
        if (static_cast<Index>(j.size()) != dim) {
            throw ConfigError(name + ": expected " + std::to_string(dim) + " rows");
        }
        Matrix m(dim, dim);
        for (Index i = 0; i < dim; ++i) {
            const auto& row = j[static_cast<std::size_t>(i)];
            if (static_cast<Index>(row.size()) != dim) {
                throw ConfigError(name + ": row " + std::to_string(i) + " has the wrong length");
            }
            for (Index c = 0; c < dim; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
        return m;
    }
    throw ConfigError(name + ": expected a number, array, or array of arrays");
}

Vector parse_bound(const json& j, Index dim, const std::string& name) {
    if (j.is_number()) return Vector::Constant(dim, j.get<double>());
    if (j.is_array()) {
        if (static_cast<Index>(j.size()) != dim) {
            throw ConfigError(name + ": expected " + std::to_string(dim) + " entries");
        }
        Vector v(dim);
        for (Index i = 0; i < dim; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
        return v;
    }
    throw ConfigError(name + ": expected a number or array");
}

RankPolicy parse_rank_policy(const json& j) {
    const std::string kind = j.value("rank_policy", std::string("energy"));
    if (kind == "energy") {
        RankPolicy p = RankPolicy::energy(j.value("energy", 0.999));
        if (!(p.tau > 0.0) || p.tau > 1.0) {
            throw ConfigError("embedding.energy must lie in (0, 1]");
        }
        return p;
    }
    if (kind == "hard_threshold") return RankPolicy::hard_threshold();
    if (kind == "fixed") {
        const int r = j.value("rank", 0);
        if (r < 1) throw ConfigError("embedding.rank must be >= 1 for the fixed policy");
        return RankPolicy::fixed(r);
    }
    if (kind == "full") {
        // Retain everything up to the numerical rank.
        return RankPolicy::fixed(1 << 20);
    }
    throw ConfigError("unknown rank_policy '" + kind + "'");
}

ExcitationSpec parse_excitation(const json& j, std::uint64_t default_seed) {
    ExcitationSpec spec;
    const std::string kind = j.value("kind", std::string("prbs"));
    if (kind == "prbs") {
        spec.kind = ExcitationSpec::Kind::Prbs;
    } else if (kind == "multisine") {
        spec.kind = ExcitationSpec::Kind::Multisine;
    } else if (kind == "step") {
        spec.kind = ExcitationSpec::Kind::Step;
    } else if (kind == "chirp") {
        spec.kind = ExcitationSpec::Kind::Chirp;
    } else {
        throw ConfigError("unknown excitation kind '" + kind + "'");
    }
    spec.duration = j.value("duration", 0);
    if (spec.duration < 1) throw ConfigError("excitation.duration must be >= 1");
    spec.seed = j.value("seed", default_seed);
    spec.amplitude = j.value("amplitude", 1.0);
    spec.period = j.value("period", 1);
    spec.frequencies = j.value("frequencies", std::vector<double>{});
    spec.amplitudes = j.value("amplitudes", std::vector<double>{});
    spec.phases = j.value("phases", std::vector<double>{});
    spec.step_time = j.value("step_time", 0.0);
    spec.step_level = j.value("step_level", 1.0);
    spec.f0 = j.value("f0", 0.0);
    spec.f1 = j.value("f1", 0.0);
    if (spec.kind == ExcitationSpec::Kind::Multisine && spec.frequencies.empty()) {
        throw ConfigError("multisine excitation needs a frequencies list");
    }
    return spec;
}

PlantConfig parse_plant(const json& j, std::uint64_t default_seed) {
    PlantConfig cfg;
    cfg.gain = j.value("gain", 1.0);
    cfg.time_constant = j.value("time_constant", 1.0);
    cfg.dead_time = j.value("dead_time", 0.0);
    cfg.sample_period = j.value("sample_period", 1.0);
    cfg.noise_std = j.value("noise_std", 0.0);
    cfg.nonlinearity = parse_nonlinearity(j.value("nonlinearity", std::string("none")));
    cfg.sat_lo = j.value("sat_lo", -1.0);
    cfg.sat_hi = j.value("sat_hi", 1.0);
    cfg.seed = j.value("seed", default_seed);
    cfg.initial_output = j.value("initial_output", 0.0);
    // Construction validates the numeric invariants.
    DelayPlant probe(cfg);
    return cfg;
}

ReferenceSpec parse_reference(const json& j) {
    ReferenceSpec spec;
    const std::string kind = j.value("kind", std::string("constant"));
    if (kind == "constant") {
        spec.kind = ReferenceSpec::Kind::Constant;
        spec.value = j.value("value", 0.0);
    } else if (kind == "step") {
        spec.kind = ReferenceSpec::Kind::Step;
        spec.step_time = j.value("time", 0.0);
        spec.initial = j.value("initial", 0.0);
        spec.final = j.value("final", 1.0);
    } else if (kind == "csv") {
        spec.kind = ReferenceSpec::Kind::Csv;
        spec.csv_path = j.value("path", std::string{});
        if (spec.csv_path.empty()) throw ConfigError("reference.path is required for kind csv");
        if (!std::filesystem::exists(spec.csv_path)) {
            throw ConfigError("reference file '" + spec.csv_path + "' does not exist");
        }
    } else {
        throw ConfigError("unknown reference kind '" + kind + "'");
    }
    return spec;
}

}  // namespace

Vector build_reference(const ReferenceSpec& spec, int steps, double sample_period) {
    if (steps < 1) throw ConfigError("reference length must be >= 1");
    Vector r(steps);
    switch (spec.kind) {
        case ReferenceSpec::Kind::Constant:
            r.setConstant(spec.value);
            break;
        case ReferenceSpec::Kind::Step: {
            const auto onset = std::llround(spec.step_time / sample_period);
            for (int k = 0; k < steps; ++k) r(k) = k >= onset ? spec.final : spec.initial;
            break;
        }
        case ReferenceSpec::Kind::Csv: {
            std::ifstream file(spec.csv_path);
            if (!file) throw DataError("cannot open reference '" + spec.csv_path + "'");
            std::string line;
            std::getline(file, line);  // header
            std::vector<double> values;
            while (std::getline(file, line)) {
                if (line.empty()) continue;
                double v = 0.0;
                const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
                if (ec != std::errc{}) {
                    throw DataError("reference '" + spec.csv_path + "': cannot parse '" + line + "'");
                }
                values.push_back(v);
            }
            if (values.empty()) throw DataError("reference '" + spec.csv_path + "' has no samples");
            // Shorter references are constant-extended to the run length.
            for (int k = 0; k < steps; ++k) {
                r(k) = values[std::min<std::size_t>(static_cast<std::size_t>(k), values.size() - 1)];
            }
            break;
        }
    }
    return r;
}

RunConfig load_config(const std::string& path) {
    const json j = read_json_file(path);
    RunConfig cfg;

    const json run = j.value("run", json::object());
    cfg.run.seed = run.value("seed", std::uint64_t{0});
    cfg.run.output_dir = run.value("output_dir", std::string("out"));
    if (const char* env_seed = std::getenv("HAVOK_MPC_SEED")) {
        std::uint64_t seed = 0;
        const std::string text(env_seed);
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
            throw ConfigError("HAVOK_MPC_SEED must be an unsigned integer");
        }
        cfg.run.seed = seed;
    }

    if (j.contains("dataset")) {
        // csv may be omitted when the data comes from the plant simulator;
        // the section then only carries split/normalization choices.
        const json& d = j.at("dataset");
        DatasetSection ds;
        ds.csv_path = d.value("csv", std::string{});
        if (!ds.csv_path.empty() && !std::filesystem::exists(ds.csv_path)) {
            throw ConfigError("dataset file '" + ds.csv_path + "' does not exist");
        }
        ds.schema.time_column = d.value("time_column", std::string("t"));
        ds.schema.input_columns = d.value("input_columns", std::vector<std::string>{});
        ds.schema.output_columns = d.value("output_columns", std::vector<std::string>{});
        ds.train_fraction = d.value("train_fraction", 0.75);
        if (!(ds.train_fraction > 0.0) || !(ds.train_fraction < 1.0)) {
            throw ConfigError("dataset.train_fraction must lie in (0, 1)");
        }
        ds.normalization = parse_norm_method(d.value("normalization", std::string("none")));
        cfg.dataset = std::move(ds);
    }

    if (j.contains("plant")) cfg.plant = parse_plant(j.at("plant"), cfg.run.seed);
    if (j.contains("excitation")) {
        cfg.excitation = parse_excitation(j.at("excitation"), cfg.run.seed + 1);
    }

    const json emb = j.value("embedding", json::object());
    cfg.embedding.hankel.depth = emb.value("depth", 1);
    if (cfg.embedding.hankel.depth < 1) throw ConfigError("embedding.depth must be >= 1");
    cfg.embedding.hankel.include_inputs = emb.value("include_inputs", true);
    cfg.embedding.policy = parse_rank_policy(emb);

    if (j.contains("mpc")) {
        const json& m = j.at("mpc");
        MpcSection section;
        section.mpc.horizon = m.value("horizon", 10);
        if (section.mpc.horizon < 1) throw ConfigError("mpc.horizon must be >= 1");
        // The desk-scale plant is single-input single-output; dimensions are
        // rechecked against the model when a subcommand runs.
        const Index n_u = m.value("n_inputs", 1);
        const Index n_y = m.value("n_outputs", 1);
        section.mpc.Q = m.contains("q") ? parse_weight(m.at("q"), n_y, "mpc.q")
                                        : Matrix::Identity(n_y, n_y);
        section.mpc.R = m.contains("r") ? parse_weight(m.at("r"), n_u, "mpc.r")
                                        : Matrix(0.01 * Matrix::Identity(n_u, n_u));
        if (m.contains("r_delta")) {
            section.mpc.R_delta = parse_weight(m.at("r_delta"), n_u, "mpc.r_delta");
        }
        section.mpc.u_min = m.contains("u_min") ? parse_bound(m.at("u_min"), n_u, "mpc.u_min")
                                                : Vector::Constant(n_u, -1.0);
        section.mpc.u_max = m.contains("u_max") ? parse_bound(m.at("u_max"), n_u, "mpc.u_max")
                                                : Vector::Constant(n_u, 1.0);
        section.mpc.max_qp_iterations = m.value("max_qp_iterations", 0);
        section.mpc.validate(n_u, n_y);
        section.reference = parse_reference(m.value("reference", json::object()));
        section.steps = m.value("steps", 200);
        if (section.steps < 1) throw ConfigError("mpc.steps must be >= 1");
        cfg.mpc = std::move(section);
    }

    if (j.contains("bench")) {
        const json& b = j.at("bench");
        cfg.bench.depths = b.value("depths", cfg.bench.depths);
        if (cfg.bench.depths.empty()) throw ConfigError("bench.depths must not be empty");
        for (int d : cfg.bench.depths) {
            if (d < 1) throw ConfigError("bench.depths entries must be >= 1");
        }
        cfg.bench.rank = b.value("rank", cfg.bench.rank);
        if (cfg.bench.rank < 1) throw ConfigError("bench.rank must be >= 1");
        cfg.bench.steps = b.value("steps", cfg.bench.steps);
        if (cfg.bench.steps < 1) throw ConfigError("bench.steps must be >= 1");
    }

    const bool has_csv = cfg.dataset && !cfg.dataset->csv_path.empty();
    if (!has_csv && !(cfg.plant && cfg.excitation)) {
        throw ConfigError("config needs either dataset.csv or plant + excitation");
    }
    return cfg;
}

}  // namespace havok
