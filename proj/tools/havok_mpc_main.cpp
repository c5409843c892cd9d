// Command-line front end: data generation, identification, open-loop
// prediction, closed-loop control, and the delay-sweep complexity benchmark.
// All numeric output uses 17 significant digits so artifacts round-trip
// exactly; runs with a fixed seed reproduce bit-identically (timing columns
// excepted, they measure the wall clock).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "havok_mpc/config.hpp"
#include "havok_mpc/dataset.hpp"
#include "havok_mpc/errors.hpp"
#include "havok_mpc/havok.hpp"
#include "havok_mpc/model_io.hpp"
#include "havok_mpc/mpc.hpp"
#include "havok_mpc/plant.hpp"

namespace {

using namespace havok;
namespace fs = std::filesystem;

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream file(path);
    if (!file) throw DataError("cannot write '" + path.string() + "'");
    return file;
}

fs::path prepare_output_dir(const RunConfig& cfg, const std::string& out_override) {
    const fs::path dir = out_override.empty() ? fs::path(cfg.run.output_dir)
                                              : fs::path(out_override);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "'");
    return dir;
}

// Identification data: an on-disk CSV wins over the simulator sections.
TimeSeriesDataset obtain_dataset(const RunConfig& cfg) {
    if (cfg.dataset && !cfg.dataset->csv_path.empty()) {
        return load_csv(cfg.dataset->csv_path, cfg.dataset->schema);
    }
    DelayPlant plant(*cfg.plant);
    const Vector excitation =
        generate_excitation(*cfg.excitation, cfg.plant->sample_period);
    return run_experiment(plant, excitation);
}

void write_fit_report(const FitReport& report, const HavokModel& model,
                      const fs::path& path) {
    auto file = open_output(path);
    file << "metric,value\n";
    file << "rank," << model.rank() << '\n';
    file << "gram_condition," << g17(report.gram_condition) << '\n';
    file << "ill_posed," << (report.ill_posed ? 1 : 0) << '\n';
    for (Index c = 0; c < report.one_step_rmse.size(); ++c) {
        file << "one_step_rmse_y" << (c + 1) << ',' << g17(report.one_step_rmse(c)) << '\n';
    }
    for (const auto& [horizon, rmse] : report.multi_step_rmse) {
        file << "multi_step_rmse_h" << horizon << ',' << g17(rmse) << '\n';
    }
}

void write_spectrum(const HavokModel& model, const fs::path& path) {
    auto file = open_output(path);
    file << "index,singular_value\n";
    const Vector& s = model.embedding.full_singular_values;
    for (Index i = 0; i < s.size(); ++i) {
        file << (i + 1) << ',' << g17(s(i)) << '\n';
    }
}

int cmd_identify(const RunConfig& cfg, const std::string& out_override) {
    const TimeSeriesDataset raw = obtain_dataset(cfg);
    const double fraction = cfg.dataset ? cfg.dataset->train_fraction : 0.75;
    const NormMethod method = cfg.dataset ? cfg.dataset->normalization : NormMethod::None;

    auto [train_raw, test_raw] = split(raw, fraction);
    auto [train, spec] = normalize(train_raw, method);
    const TimeSeriesDataset test = apply_normalization(test_raw, spec);

    auto [model, report] =
        fit(train, cfg.embedding.hankel, cfg.embedding.policy, &test, &spec);

    const fs::path dir = prepare_output_dir(cfg, out_override);
    save_model(model, (dir / "model.json").string());
    write_fit_report(report, model, dir / "fit_report.csv");
    write_spectrum(model, dir / "spectrum.csv");

    std::cout << "identify: rank " << model.rank() << ", held-out one-step RMSE "
              << g17(report.one_step_rmse.maxCoeff()) << '\n';
    if (report.ill_posed) {
        std::cout << "warning: regression ill-posed (Gram condition "
                  << g17(report.gram_condition) << "), pseudoinverse used\n";
    }
    std::cout << "artifacts in " << dir.string() << '\n';
    return 0;
}

int cmd_predict(const RunConfig& cfg, const std::string& model_path,
                const std::string& out_override) {
    if (model_path.empty()) throw ConfigError("predict needs --model");
    const HavokModel model = load_model(model_path);
    const TimeSeriesDataset raw = obtain_dataset(cfg);
    const TimeSeriesDataset ds = apply_normalization(raw, model.norm);

    const FitReport report = evaluate(model, ds);
    const fs::path dir = prepare_output_dir(cfg, out_override);

    // One-step-ahead predictions in physical units, aligned with the sample
    // they predict.
    auto file = open_output(dir / "predictions.csv");
    file << "t";
    for (Index c = 0; c < raw.n_outputs(); ++c) file << ",y" << (c + 1) << "_measured";
    for (Index c = 0; c < raw.n_outputs(); ++c) file << ",y" << (c + 1) << "_predicted";
    file << '\n';
    const auto& hankel = model.embedding.config;
    for (Index k = hankel.depth - 1; k + 1 < ds.n_samples(); ++k) {
        Vector z = project(model.embedding, delay_vector(ds.outputs, ds.inputs, hankel, k));
        z = step(model, z, ds.inputs.row(k).transpose());
        const Vector y_pred = model.norm.invert_output(model.C * z);
        file << g17(raw.t0 + static_cast<double>(k + 1) * raw.sample_period);
        for (Index c = 0; c < raw.n_outputs(); ++c) file << ',' << g17(raw.outputs(k + 1, c));
        for (Index c = 0; c < raw.n_outputs(); ++c) file << ',' << g17(y_pred(c));
        file << '\n';
    }
    write_fit_report(report, model, dir / "fit_report.csv");

    std::cout << "predict: one-step RMSE " << g17(report.one_step_rmse.maxCoeff());
    for (const auto& [horizon, rmse] : report.multi_step_rmse) {
        std::cout << ", h" << horizon << " RMSE " << g17(rmse);
    }
    std::cout << "\nartifacts in " << dir.string() << '\n';
    return 0;
}

int cmd_closed_loop(const RunConfig& cfg, const std::string& model_path,
                    const std::string& out_override) {
    if (model_path.empty()) throw ConfigError("closed-loop needs --model");
    if (!cfg.plant) throw ConfigError("closed-loop needs a plant section");
    if (!cfg.mpc) throw ConfigError("closed-loop needs an mpc section");

    const HavokModel model = load_model(model_path);
    if (model.n_inputs() != 1 || model.n_outputs() != 1) {
        throw ConfigError("model is " + std::to_string(model.n_inputs()) + "x" +
                          std::to_string(model.n_outputs()) +
                          " but the plant is single-input single-output");
    }
    if (std::abs(model.sample_period - cfg.plant->sample_period) >
        1e-9 * cfg.plant->sample_period) {
        throw ConfigError("model sample period does not match the plant");
    }

    DelayPlant plant(*cfg.plant);
    MpcController controller(model, cfg.mpc->mpc);
    const Vector reference =
        build_reference(cfg.mpc->reference, cfg.mpc->steps, cfg.plant->sample_period);
    const ClosedLoopResult result =
        run_closed_loop(plant, controller, reference, cfg.mpc->steps);

    const fs::path dir = prepare_output_dir(cfg, out_override);
    auto telemetry = open_output(dir / "telemetry.csv");
    telemetry << "k,t,u1,y1,r1,cost,qp_iterations,solve_time_s\n";
    for (const auto& s : result.steps) {
        telemetry << s.k << ',' << g17(s.t) << ',' << g17(s.u) << ',' << g17(s.y) << ','
                  << g17(s.reference) << ',' << g17(s.cost) << ',' << s.qp_iterations << ','
                  << g17(s.solve_time) << '\n';
    }

    auto summary = open_output(dir / "summary.txt");
    summary << "closed-loop summary\n";
    summary << "steps: " << result.steps.size() << '\n';
    summary << "tracking_rmse_final_half: " << g17(result.tracking_rmse) << '\n';
    summary << "reference_step_size: " << g17(result.step_size) << '\n';
    summary << "max_overshoot_fraction: " << g17(result.max_overshoot) << '\n';
    summary << "settle_time_s: " << g17(result.settle_time) << '\n';
    summary << "fallback_steps: " << result.fallback_count << '\n';
    summary << "mean_qp_iterations: " << g17(result.mean_qp_iterations) << '\n';
    summary << "mean_solve_time_s: " << g17(result.mean_solve_time) << '\n';
    summary << "max_solve_time_s: " << g17(result.max_solve_time) << '\n';

    std::cout << "closed-loop: tracking RMSE " << g17(result.tracking_rmse) << " over "
              << result.steps.size() << " steps";
    if (result.fallback_count > 0) {
        std::cout << " (" << result.fallback_count << " fallback steps)";
    }
    std::cout << "\nartifacts in " << dir.string() << '\n';
    return 0;
}

int cmd_bench(const RunConfig& cfg, const std::string& out_override) {
    if (!cfg.plant || !cfg.excitation) {
        throw ConfigError("bench-delay needs plant and excitation sections");
    }
    if (!cfg.mpc) throw ConfigError("bench-delay needs an mpc section");

    DelayPlant plant(*cfg.plant);
    const Vector excitation =
        generate_excitation(*cfg.excitation, cfg.plant->sample_period);
    const TimeSeriesDataset data = run_experiment(plant, excitation);

    std::vector<HavokModel> models;
    models.reserve(cfg.bench.depths.size());
    for (int depth : cfg.bench.depths) {
        HankelConfig hankel = cfg.embedding.hankel;
        hankel.depth = depth;
        models.push_back(fit(data, hankel, RankPolicy::fixed(cfg.bench.rank)).first);
    }

    const std::vector<BenchRow> rows =
        bench_complexity(models, cfg.mpc->mpc, data, cfg.bench.steps);

    const fs::path dir = prepare_output_dir(cfg, out_override);
    auto file = open_output(dir / "bench.csv");
    file << "depth,rank,qp_dim,median_solve_time_s\n";
    for (const auto& row : rows) {
        file << row.depth << ',' << row.rank << ',' << row.qp_dim << ','
             << g17(row.median_solve_time) << '\n';
        std::cout << "m=" << row.depth << ": qp_dim " << row.qp_dim << ", median solve "
                  << g17(row.median_solve_time) << " s\n";
    }
    std::cout << "artifacts in " << dir.string() << '\n';
    return 0;
}

int cmd_simulate(const RunConfig& cfg, const std::string& out_override) {
    if (!cfg.plant || !cfg.excitation) {
        throw ConfigError("simulate needs plant and excitation sections");
    }
    DelayPlant plant(*cfg.plant);
    const Vector excitation =
        generate_excitation(*cfg.excitation, cfg.plant->sample_period);
    const TimeSeriesDataset ds = run_experiment(plant, excitation);

    const fs::path dir = prepare_output_dir(cfg, out_override);
    write_csv(ds, (dir / "dataset.csv").string());
    std::cout << "simulate: " << ds.n_samples() << " samples\nartifacts in " << dir.string()
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HAVOK identification and bounded-complexity MPC for delay systems"};
    app.require_subcommand(1);

    std::string config_path, model_path, out_dir;
    app.add_option("--config", config_path, "JSON run configuration")->required();
    app.add_option("--model", model_path, "serialized model file");
    app.add_option("--out", out_dir, "output directory (overrides run.output_dir)");

    auto* identify = app.add_subcommand("identify", "fit a model from data");
    auto* predict = app.add_subcommand("predict", "evaluate a model's predictions");
    auto* closed_loop = app.add_subcommand("closed-loop", "run the controller on the plant");
    auto* bench = app.add_subcommand("bench-delay", "QP-size sweep over embedding depths");
    auto* simulate = app.add_subcommand("simulate", "generate data from the plant");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const havok::RunConfig cfg = havok::load_config(config_path);
        if (identify->parsed()) return cmd_identify(cfg, out_dir);
        if (predict->parsed()) return cmd_predict(cfg, model_path, out_dir);
        if (closed_loop->parsed()) return cmd_closed_loop(cfg, model_path, out_dir);
        if (bench->parsed()) return cmd_bench(cfg, out_dir);
        if (simulate->parsed()) return cmd_simulate(cfg, out_dir);
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const havok::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << '\n';
        return 1;
    }
}
