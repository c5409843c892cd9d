#include "havok_mpc/plant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "havok_mpc/errors.hpp"

namespace havok {

namespace {

void validate_plant_config(const PlantConfig& cfg) {
    if (!(cfg.sample_period > 0.0)) throw ConfigError("plant sample_period must be > 0");
    if (!(cfg.time_constant > 0.0)) throw ConfigError("plant time_constant must be > 0");
    if (cfg.dead_time < 0.0) throw ConfigError("plant dead_time must be >= 0");
    if (cfg.noise_std < 0.0) throw ConfigError("plant noise_std must be >= 0");
    if (!std::isfinite(cfg.gain)) throw ConfigError("plant gain must be finite");
    if (cfg.nonlinearity == Nonlinearity::Saturation && !(cfg.sat_hi > cfg.sat_lo)) {
        throw ConfigError("saturation bounds must satisfy sat_lo < sat_hi");
    }
    const double ratio = cfg.dead_time / cfg.sample_period;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
        throw ConfigError("dead_time must be an integer multiple of sample_period");
    }
}

double static_nonlinearity(const PlantConfig& cfg, double u) {
    switch (cfg.nonlinearity) {
        case Nonlinearity::None: return u;
        case Nonlinearity::Saturation: return std::clamp(u, cfg.sat_lo, cfg.sat_hi);
        case Nonlinearity::SquareRoot:
            // Sign-preserving square root, the usual valve-flow shape.
            return u >= 0.0 ? std::sqrt(u) : -std::sqrt(-u);
    }
    return u;
}

}  // namespace

DelayPlant::DelayPlant(const PlantConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    validate_plant_config(cfg_);
    alpha_ = std::exp(-cfg_.sample_period / cfg_.time_constant);
    delay_line_.assign(
        static_cast<std::size_t>(std::llround(cfg_.dead_time / cfg_.sample_period)), 0.0);
    reset();
}

void DelayPlant::reset() {
    std::fill(delay_line_.begin(), delay_line_.end(), 0.0);
    head_ = 0;
    lag_state_ = cfg_.initial_output;
    rng_ = Rng(cfg_.seed);
    draw_measurement();
}

void DelayPlant::draw_measurement() {
    measurement_ = lag_state_;
    if (cfg_.noise_std > 0.0) measurement_ += rng_.gaussian(0.0, cfg_.noise_std);
}

void DelayPlant::advance(double u) {
    if (!std::isfinite(u)) throw DataError("plant input must be finite");
    double delayed = u;
    if (!delay_line_.empty()) {
        delayed = delay_line_[head_];
        delay_line_[head_] = u;
        head_ = (head_ + 1) % delay_line_.size();
    }
    lag_state_ = alpha_ * lag_state_ +
                 (1.0 - alpha_) * cfg_.gain * static_nonlinearity(cfg_, delayed);
    draw_measurement();
}

double DelayPlant::step(double u) {
    const double y = measure();
    advance(u);
    return y;
}

Vector generate_excitation(const ExcitationSpec& spec, double sample_period) {
    if (spec.duration < 1) throw ConfigError("excitation duration must be >= 1 sample");
    if (!(sample_period > 0.0)) throw ConfigError("sample_period must be > 0");
    if (!std::isfinite(spec.amplitude)) throw ConfigError("excitation amplitude must be finite");

    Vector u(spec.duration);
    switch (spec.kind) {
        case ExcitationSpec::Kind::Prbs: {
            if (spec.period < 1) throw ConfigError("prbs period must be >= 1 sample");
            Rng rng(spec.seed);
            double level = 0.0;
            for (int k = 0; k < spec.duration; ++k) {
                if (k % spec.period == 0) {
                    level = rng.coin() ? spec.amplitude : -spec.amplitude;
                }
                u(k) = level;
            }
            break;
        }
        case ExcitationSpec::Kind::Multisine: {
            if (spec.frequencies.empty()) {
                throw ConfigError("multisine needs at least one frequency");
            }
            if (!spec.amplitudes.empty() && spec.amplitudes.size() != spec.frequencies.size()) {
                throw ConfigError("multisine amplitudes must match frequencies");
            }
            if (!spec.phases.empty() && spec.phases.size() != spec.frequencies.size()) {
                throw ConfigError("multisine phases must match frequencies");
            }
            Rng rng(spec.seed);
            std::vector<double> phases = spec.phases;
            if (phases.empty()) {
                phases.resize(spec.frequencies.size());
                for (auto& phi : phases) phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
            }
            u.setZero();
            for (std::size_t i = 0; i < spec.frequencies.size(); ++i) {
                const double a = spec.amplitudes.empty() ? spec.amplitude : spec.amplitudes[i];
                const double w = 2.0 * std::numbers::pi * spec.frequencies[i];
                for (int k = 0; k < spec.duration; ++k) {
                    u(k) += a * std::sin(w * k * sample_period + phases[i]);
                }
            }
            break;
        }
        case ExcitationSpec::Kind::Step: {
            const auto onset = std::llround(spec.step_time / sample_period);
            for (int k = 0; k < spec.duration; ++k) {
                u(k) = k >= onset ? spec.step_level : 0.0;
            }
            break;
        }
        case ExcitationSpec::Kind::Chirp: {
            // Linear sweep from f0 to f1 over the record.
            const double total = spec.duration * sample_period;
            for (int k = 0; k < spec.duration; ++k) {
                const double t = k * sample_period;
                const double phase =
                    2.0 * std::numbers::pi * (spec.f0 * t + 0.5 * (spec.f1 - spec.f0) * t * t / total);
                u(k) = spec.amplitude * std::sin(phase);
            }
            break;
        }
    }
    return u;
}

TimeSeriesDataset run_experiment(DelayPlant& plant, const Vector& excitation) {
    if (excitation.size() < 1) throw ConfigError("excitation must have at least one sample");
    plant.reset();

    const Index n = excitation.size();
    TimeSeriesDataset ds;
    ds.sample_period = plant.config().sample_period;
    ds.inputs.resize(n, 1);
    ds.outputs.resize(n, 1);
    for (Index k = 0; k < n; ++k) {
        ds.inputs(k, 0) = excitation(k);
        ds.outputs(k, 0) = plant.step(excitation(k));
    }
    ds.input_names = {"u1"};
    ds.output_names = {"y1"};
    return ds;
}

ClosedLoopResult run_closed_loop(DelayPlant& plant, MpcController& controller,
                                 const Vector& reference, int steps) {
    if (steps < 1) throw ConfigError("closed loop needs at least one step");
    if (reference.size() < 1) throw ConfigError("reference must have at least one sample");
    const auto& model = controller.model();
    const auto& cfg = controller.config();
    const int m = model.embedding.config.depth;
    const double Ts = plant.config().sample_period;
    const int N = cfg.horizon;

    // Warm-up: hold the midpoint input for m samples to fill the history.
    const double u_mid = 0.5 * (cfg.u_min(0) + cfg.u_max(0));
    std::vector<double> y_hist, u_hist;
    for (int j = 0; j < m; ++j) {
        y_hist.push_back(plant.measure());
        plant.advance(u_mid);
        u_hist.push_back(u_mid);
    }
    double u_prev = u_mid;

    auto ref_at = [&](int k) {
        return reference(std::min<Index>(k, reference.size() - 1));
    };

    ClosedLoopResult result;
    result.steps.reserve(static_cast<std::size_t>(steps));
    double y_start = 0.0;
    for (int k = 0; k < steps; ++k) {
        const double y_k = plant.measure();
        if (k == 0) y_start = y_k;
        y_hist.push_back(y_k);
        y_hist.erase(y_hist.begin());

        Matrix y_mat(m, 1);
        for (int j = 0; j < m; ++j) y_mat(j, 0) = y_hist[static_cast<std::size_t>(j)];
        Matrix u_mat(m > 1 ? m - 1 : 0, 1);
        for (int j = 0; j + 1 < m; ++j) {
            u_mat(j, 0) = u_hist[u_hist.size() - static_cast<std::size_t>(m - 1 - j)];
        }
        Matrix ref_window(N, 1);
        for (int i = 0; i < N; ++i) ref_window(i, 0) = ref_at(k + 1 + i);

        const MpcStepResult step_result =
            controller.step(y_mat, u_mat, ref_window, Vector::Constant(1, u_prev));
        const double u_k = step_result.u_applied(0);

        plant.advance(u_k);
        u_hist.push_back(u_k);
        u_prev = u_k;

        ClosedLoopStep log;
        log.k = k;
        log.t = k * Ts;
        log.u = u_k;
        log.y = y_k;
        log.reference = ref_at(k);
        log.cost = step_result.cost;
        log.qp_iterations = step_result.qp_iterations;
        log.solve_time = step_result.solve_time;
        log.used_fallback = step_result.used_fallback;
        result.steps.push_back(log);

        if (step_result.used_fallback) ++result.fallback_count;
        result.mean_solve_time += step_result.solve_time;
        result.max_solve_time = std::max(result.max_solve_time, step_result.solve_time);
        result.mean_qp_iterations += step_result.qp_iterations;
    }
    result.mean_solve_time /= steps;
    result.mean_qp_iterations /= steps;

    // Metrics against the reference over the run.
    const double r_final = ref_at(steps - 1);
    result.step_size = std::abs(r_final - y_start);
    const double scale = result.step_size > 0.0 ? result.step_size : std::max(1.0, std::abs(r_final));
    const double direction = r_final >= y_start ? 1.0 : -1.0;

    double sq_sum = 0.0;
    int count = 0;
    for (std::size_t i = result.steps.size() / 2; i < result.steps.size(); ++i) {
        const double err = result.steps[i].y - result.steps[i].reference;
        sq_sum += err * err;
        ++count;
    }
    result.tracking_rmse = count > 0 ? std::sqrt(sq_sum / count) : 0.0;

    for (const auto& s : result.steps) {
        const double excursion = direction * (s.y - s.reference);
        result.max_overshoot = std::max(result.max_overshoot, excursion / scale);
    }

    result.settle_time = std::numeric_limits<double>::infinity();
    for (std::size_t i = result.steps.size(); i-- > 0;) {
        if (std::abs(result.steps[i].y - result.steps[i].reference) > 0.02 * scale) {
            if (i + 1 < result.steps.size()) {
                result.settle_time = result.steps[i + 1].t;
            }
            break;
        }
        if (i == 0) result.settle_time = 0.0;
    }
    return result;
}

Nonlinearity parse_nonlinearity(const std::string& name) {
    if (name == "none") return Nonlinearity::None;
    if (name == "saturation") return Nonlinearity::Saturation;
    if (name == "square_root") return Nonlinearity::SquareRoot;
    throw ConfigError("unknown nonlinearity '" + name + "'");
}

std::string nonlinearity_name(Nonlinearity nl) {
    switch (nl) {
        case Nonlinearity::None: return "none";
        case Nonlinearity::Saturation: return "saturation";
        case Nonlinearity::SquareRoot: return "square_root";
    }
    return "none";
}

}  // namespace havok
