#pragma once

#include <cstdint>
#include <vector>

#include "havok_mpc/dataset.hpp"
#include "havok_mpc/mpc.hpp"
#include "havok_mpc/rng.hpp"
#include "havok_mpc/types.hpp"

namespace havok {

enum class Nonlinearity { None, Saturation, SquareRoot };

struct PlantConfig {
    double gain = 1.0;           // K, output units per input unit
    double time_constant = 1.0;  // tau, seconds, > 0
    double dead_time = 0.0;      // seconds, integer multiple of sample_period
    double sample_period = 1.0;  // Ts, seconds, > 0
    double noise_std = 0.0;      // measurement noise, output units
    Nonlinearity nonlinearity = Nonlinearity::None;
    double sat_lo = -1.0;        // saturation bounds (Nonlinearity::Saturation)
    double sat_hi = 1.0;
    std::uint64_t seed = 0;
    double initial_output = 0.0;
};

// Transport-delay first-order process (FOPDT) with measurement noise:
//   x_{k+1} = alpha x_k + (1 - alpha) K f(u_{k-D}),   alpha = exp(-Ts/tau),
//   y_k     = x_k + e_k,
// where D = dead_time / Ts and f is the optional static nonlinearity.
// alpha is the ZOH-exact pole, so the noise-free step response equals
// K (1 - e^{-(t - d)/tau}) exactly at sample instants (zero through t = d).
//
// measure() returns the measurement for the current instant (idempotent: the
// noise sample is drawn once per advance). step(u) is measure() followed by
// advance(u).
class DelayPlant {
public:
    explicit DelayPlant(const PlantConfig& cfg);

    double measure() const { return measurement_; }
    void advance(double u);
    double step(double u);
    void reset();

    const PlantConfig& config() const { return cfg_; }
    int delay_samples() const { return static_cast<int>(delay_line_.size()); }

private:
    void draw_measurement();

    PlantConfig cfg_;
    double alpha_ = 0.0;
    std::vector<double> delay_line_;  // ring buffer of pending inputs
    std::size_t head_ = 0;
    double lag_state_ = 0.0;
    Rng rng_;
    double measurement_ = 0.0;
};

// Excitation-signal generator configuration. All kinds are deterministic
// given the seed.
struct ExcitationSpec {
    enum class Kind { Prbs, Multisine, Step, Chirp };

    Kind kind = Kind::Prbs;
    int duration = 0;        // samples, >= 1
    std::uint64_t seed = 0;
    double amplitude = 1.0;  // prbs level / multisine default / chirp scale

    // prbs
    int period = 1;  // minimum hold, samples

    // multisine
    std::vector<double> frequencies;  // Hz
    std::vector<double> amplitudes;   // per frequency; empty -> `amplitude`
    std::vector<double> phases;       // radians; empty -> randomized from seed

    // step
    double step_time = 0.0;   // seconds
    double step_level = 1.0;

    // chirp
    double f0 = 0.0;  // Hz at t = 0
    double f1 = 0.0;  // Hz at the end of the record
};

Vector generate_excitation(const ExcitationSpec& spec, double sample_period);

// Resets the plant, feeds the excitation through it, and returns the aligned
// (u, y) record at the plant's sample period.
TimeSeriesDataset run_experiment(DelayPlant& plant, const Vector& excitation);

struct ClosedLoopStep {
    int k = 0;
    double t = 0.0;
    double u = 0.0;
    double y = 0.0;
    double reference = 0.0;
    double cost = 0.0;
    int qp_iterations = 0;
    double solve_time = 0.0;
    bool used_fallback = false;
};

struct ClosedLoopResult {
    std::vector<ClosedLoopStep> steps;
    double tracking_rmse = 0.0;   // over the final 50% of the run
    double max_overshoot = 0.0;   // fraction of the reference step size
    double settle_time = 0.0;     // seconds to the +/-2% band; inf if never
    double step_size = 0.0;       // |r_final - y at loop start|
    int fallback_count = 0;
    double mean_solve_time = 0.0;
    double max_solve_time = 0.0;
    double mean_qp_iterations = 0.0;
};

// Runs the controller against the plant for `steps` samples. Warm-up: the
// input is held at the midpoint of the bounds for m samples to fill the
// embedding history before control starts. reference has one value per step
// (shorter ones are constant-extended).
ClosedLoopResult run_closed_loop(DelayPlant& plant, MpcController& controller,
                                 const Vector& reference, int steps);

Nonlinearity parse_nonlinearity(const std::string& name);
std::string nonlinearity_name(Nonlinearity nl);

}  // namespace havok
