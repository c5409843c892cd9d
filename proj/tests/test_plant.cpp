#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "havok_mpc/errors.hpp"
#include "havok_mpc/havok.hpp"
#include "havok_mpc/plant.hpp"
#include "havok_mpc/rng.hpp"
#include "oracles.hpp"

using namespace havok;

namespace {

PlantConfig fopdt(double gain, double tau, double dead_time, double Ts = 1.0,
                  double noise = 0.0, std::uint64_t seed = 0) {
    PlantConfig cfg;
    cfg.gain = gain;
    cfg.time_constant = tau;
    cfg.dead_time = dead_time;
    cfg.sample_period = Ts;
    cfg.noise_std = noise;
    cfg.seed = seed;
    return cfg;
}

std::vector<double> run_plant(DelayPlant& plant, const std::vector<double>& u) {
    plant.reset();
    std::vector<double> y;
    y.reserve(u.size());
    for (double uk : u) y.push_back(plant.step(uk));
    return y;
}

HavokModel exact_scalar_model(double a, double b) {
    HavokModel model;
    model.A = Matrix::Constant(1, 1, a);
    model.B = Matrix::Constant(1, 1, b);
    model.C = Matrix::Constant(1, 1, 1.0);
    model.embedding.config = {1, true};
    model.embedding.n_outputs = 1;
    model.embedding.n_inputs = 0;
    model.embedding.rank = 1;
    model.embedding.U = Matrix::Identity(1, 1);
    model.embedding.S = Vector::Ones(1);
    model.embedding.full_singular_values = model.embedding.S;
    model.sample_period = 1.0;
    model.norm = identity_normalization(1, 1);
    return model;
}

}  // namespace

TEST_CASE("dead time blanks the step response exactly") {
    DelayPlant plant(fopdt(2.0, 4.0, 3.0));
    const std::vector<double> u(20, 1.0);
    const auto y = run_plant(plant, u);
    for (int k = 0; k <= 3; ++k) CHECK(y[static_cast<std::size_t>(k)] == 0.0);
    CHECK(y[4] != 0.0);
}

TEST_CASE("step response matches the closed form at sample instants") {
    DelayPlant plant(fopdt(2.0, 4.0, 3.0));
    const std::vector<double> u(40, 1.0);
    const auto y = run_plant(plant, u);
    for (int k = 0; k < 40; ++k) {
        CHECK(std::abs(y[static_cast<std::size_t>(k)] -
                       oracles::fopdt_step_response(2.0, 4.0, 3.0, 1.0, k)) < 1e-10);
    }
    // t = d + tau: y = K (1 - 1/e)
    CHECK(y[7] == doctest::Approx(2.0 * (1.0 - std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("the loop oracle and the plant agree on arbitrary inputs") {
    Rng rng(3);
    std::vector<double> u(60);
    for (auto& v : u) v = rng.uniform(-2.0, 2.0);
    DelayPlant plant(fopdt(1.5, 2.5, 4.0));
    const auto y = run_plant(plant, u);
    const auto expected = oracles::fopdt_loop(1.5, 2.5, 1.0, 4, u);
    for (std::size_t k = 0; k < u.size(); ++k) CHECK(y[k] == doctest::Approx(expected[k]));
}

TEST_CASE("the step response approaches the DC gain") {
    DelayPlant plant(fopdt(2.0, 4.0, 3.0));
    const std::vector<double> u(200, 1.0);
    const auto y = run_plant(plant, u);
    CHECK(std::abs(y.back() - 2.0) < 1e-6);
}

TEST_CASE("the noise-free plant is linear") {
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> u1(50), u2(50), mix(50);
        const double a = rng.uniform(-2.0, 2.0);
        const double b = rng.uniform(-2.0, 2.0);
        for (int k = 0; k < 50; ++k) {
            u1[static_cast<std::size_t>(k)] = rng.gaussian();
            u2[static_cast<std::size_t>(k)] = rng.gaussian();
            mix[static_cast<std::size_t>(k)] = a * u1[static_cast<std::size_t>(k)] +
                                               b * u2[static_cast<std::size_t>(k)];
        }
        DelayPlant plant(fopdt(1.7, 3.0, 2.0));
        const auto y1 = run_plant(plant, u1);
        const auto y2 = run_plant(plant, u2);
        const auto y_mix = run_plant(plant, mix);
        for (int k = 0; k < 50; ++k) {
            const double expected = a * y1[static_cast<std::size_t>(k)] +
                                    b * y2[static_cast<std::size_t>(k)];
            CHECK(std::abs(y_mix[static_cast<std::size_t>(k)] - expected) < 1e-10);
        }
    }
}

TEST_CASE("the impulse response onset pins the delay") {
    // With the measurement taken before the state update, a dead time of D
    // samples shows up as an onset at index D + 1.
    DelayPlant plant(fopdt(1.0, 2.0, 5.0));
    std::vector<double> impulse(20, 0.0);
    impulse[0] = 1.0;
    const auto y = run_plant(plant, impulse);
    int onset = -1;
    for (std::size_t k = 0; k < y.size(); ++k) {
        if (y[k] != 0.0) {
            onset = static_cast<int>(k);
            break;
        }
    }
    CHECK(onset == plant.delay_samples() + 1);
}

TEST_CASE("identical seeds reproduce noisy runs bitwise") {
    const auto cfg = fopdt(2.0, 3.0, 2.0, 1.0, 0.1, 42);
    DelayPlant p1(cfg), p2(cfg);
    Rng rng(7);
    std::vector<double> u(100);
    for (auto& v : u) v = rng.gaussian();
    const auto y1 = run_plant(p1, u);
    const auto y2 = run_plant(p2, u);
    CHECK(y1 == y2);
}

TEST_CASE("static nonlinearities shape the steady state") {
    SUBCASE("square root") {
        DelayPlant plant(fopdt(2.0, 1.0, 0.0));
        PlantConfig cfg = plant.config();
        cfg.nonlinearity = Nonlinearity::SquareRoot;
        DelayPlant nl(cfg);
        const std::vector<double> u(300, 4.0);
        const auto y = run_plant(nl, u);
        CHECK(std::abs(y.back() - 2.0 * 2.0) < 1e-6);  // K * sqrt(4)
    }
    SUBCASE("saturation") {
        PlantConfig cfg = fopdt(2.0, 1.0, 0.0);
        cfg.nonlinearity = Nonlinearity::Saturation;
        cfg.sat_lo = -1.0;
        cfg.sat_hi = 1.0;
        DelayPlant plant(cfg);
        const std::vector<double> u(300, 10.0);
        const auto y = run_plant(plant, u);
        CHECK(std::abs(y.back() - 2.0) < 1e-6);  // K * sat(10) = K
    }
}

TEST_CASE("fractional dead times are rejected") {
    CHECK_THROWS_AS(DelayPlant(fopdt(1.0, 1.0, 0.5, 1.0)), ConfigError);
    CHECK_NOTHROW(DelayPlant(fopdt(1.0, 1.0, 3.0, 1.0)));
}

TEST_CASE("non-finite inputs are rejected") {
    DelayPlant plant(fopdt(1.0, 1.0, 0.0));
    CHECK_THROWS_AS(plant.step(std::numeric_limits<double>::quiet_NaN()), DataError);
    CHECK_THROWS_AS(plant.step(std::numeric_limits<double>::infinity()), DataError);
}

TEST_CASE("prbs excitation is deterministic with held levels") {
    ExcitationSpec spec;
    spec.kind = ExcitationSpec::Kind::Prbs;
    spec.duration = 24;
    spec.period = 3;
    spec.amplitude = 1.5;
    spec.seed = 42;
    const Vector u1 = generate_excitation(spec, 1.0);
    const Vector u2 = generate_excitation(spec, 1.0);
    CHECK(u1 == u2);
    for (Index k = 0; k < u1.size(); ++k) {
        CHECK(std::abs(u1(k)) == 1.5);
        if (k % 3 != 0) CHECK(u1(k) == u1(k - k % 3));  // held within each period
    }
}

TEST_CASE("step excitation switches at the requested sample") {
    ExcitationSpec spec;
    spec.kind = ExcitationSpec::Kind::Step;
    spec.duration = 10;
    spec.step_time = 5.0;
    spec.step_level = 2.0;
    const Vector u = generate_excitation(spec, 1.0);
    for (Index k = 0; k < 10; ++k) CHECK(u(k) == (k >= 5 ? 2.0 : 0.0));
}

TEST_CASE("single-frequency multisine with forced zero phase is a plain sine") {
    ExcitationSpec spec;
    spec.kind = ExcitationSpec::Kind::Multisine;
    spec.duration = 50;
    spec.frequencies = {0.05};
    spec.amplitudes = {0.7};
    spec.phases = {0.0};
    const Vector u = generate_excitation(spec, 1.0);
    for (Index k = 0; k < 50; ++k) {
        CHECK(u(k) ==
              doctest::Approx(0.7 * std::sin(2.0 * std::numbers::pi * 0.05 * k)).epsilon(1e-12));
    }
}

TEST_CASE("multisine requires frequencies") {
    ExcitationSpec spec;
    spec.kind = ExcitationSpec::Kind::Multisine;
    spec.duration = 10;
    CHECK_THROWS_AS(generate_excitation(spec, 1.0), ConfigError);
}

TEST_CASE("chirp stays within its amplitude") {
    ExcitationSpec spec;
    spec.kind = ExcitationSpec::Kind::Chirp;
    spec.duration = 100;
    spec.amplitude = 2.0;
    spec.f0 = 0.01;
    spec.f1 = 0.2;
    const Vector u = generate_excitation(spec, 1.0);
    CHECK(u.cwiseAbs().maxCoeff() <= 2.0);
    CHECK(u.cwiseAbs().maxCoeff() > 0.5);
}

TEST_CASE("run_experiment aligns inputs and outputs") {
    DelayPlant plant(fopdt(1.0, 2.0, 1.0));
    SUBCASE("zero excitation from rest stays at zero") {
        const auto ds = run_experiment(plant, Vector::Zero(30));
        CHECK(ds.outputs.cwiseAbs().maxCoeff() == 0.0);
        CHECK(ds.n_samples() == 30);
    }
    SUBCASE("two runs with the same seed are bitwise identical") {
        PlantConfig cfg = fopdt(1.0, 2.0, 1.0, 1.0, 0.2, 9);
        DelayPlant noisy(cfg);
        ExcitationSpec spec;
        spec.kind = ExcitationSpec::Kind::Prbs;
        spec.duration = 64;
        spec.seed = 11;
        const Vector u = generate_excitation(spec, 1.0);
        const auto ds1 = run_experiment(noisy, u);
        const auto ds2 = run_experiment(noisy, u);
        CHECK(ds1.outputs == ds2.outputs);
        CHECK(ds1.inputs == ds2.inputs);
    }
}

TEST_CASE("an unreachable reference saturates at the input bound") {
    PlantConfig plant_cfg = fopdt(2.0, 1.0 / std::log(2.0), 0.0);
    DelayPlant plant(plant_cfg);

    MpcConfig cfg;
    cfg.horizon = 15;
    cfg.Q = Matrix::Constant(1, 1, 1.0);
    cfg.R = Matrix::Constant(1, 1, 1e-6);
    cfg.u_min = Vector::Constant(1, -1.0);
    cfg.u_max = Vector::Constant(1, 1.0);
    MpcController controller(exact_scalar_model(0.5, 1.0), cfg);

    // K * u_max = 2; ask for 3.
    const auto result = run_closed_loop(plant, controller, Vector::Constant(80, 3.0), 80);
    CHECK(result.steps.back().u == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(result.steps.back().y - 2.0) < 1e-3);
}

TEST_CASE("measurement noise sets the tracking floor") {
    // Exact model, perfect plant: the only tracking error left is the noise.
    const double noise_std = 0.05;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        PlantConfig plant_cfg = fopdt(2.0, 1.0 / std::log(2.0), 0.0, 1.0, noise_std, seed);
        DelayPlant plant(plant_cfg);
        MpcConfig cfg;
        cfg.horizon = 10;
        cfg.Q = Matrix::Constant(1, 1, 1.0);
        cfg.R = Matrix::Constant(1, 1, 1e-4);
        cfg.u_min = Vector::Constant(1, -10.0);
        cfg.u_max = Vector::Constant(1, 10.0);
        MpcController controller(exact_scalar_model(0.5, 1.0), cfg);

        const auto result = run_closed_loop(plant, controller, Vector::Constant(80, 1.0), 80);
        CHECK(result.tracking_rmse > 0.5 * noise_std);
    }
}

TEST_CASE("the end-to-end pipeline controls a swept dead time with one depth") {
    // Cheap single-case version of the sweep the acceptance suite runs in
    // full: identify with a conservative depth, then track a step.
    const int d = 6;
    PlantConfig plant_cfg = fopdt(2.0, 4.0, static_cast<double>(d));
    DelayPlant plant(plant_cfg);

    ExcitationSpec excitation;
    excitation.kind = ExcitationSpec::Kind::Prbs;
    excitation.duration = 900;
    excitation.seed = 21;
    const auto data = run_experiment(plant, generate_excitation(excitation, 1.0));

    const auto [model, report] = fit(data, {12, true}, RankPolicy::fixed(1 << 20));
    CHECK(report.one_step_rmse.maxCoeff() < 1e-8);

    MpcConfig cfg;
    cfg.horizon = 25;
    cfg.Q = Matrix::Constant(1, 1, 1.0);
    cfg.R = Matrix::Constant(1, 1, 5e-2);
    cfg.u_min = Vector::Constant(1, -5.0);
    cfg.u_max = Vector::Constant(1, 5.0);
    cfg.max_qp_iterations = 3000;
    MpcController controller(model, cfg);

    DelayPlant fresh(plant_cfg);
    const auto result = run_closed_loop(fresh, controller, Vector::Constant(120, 1.0), 120);
    CHECK(result.tracking_rmse < 0.05);
    CHECK(result.fallback_count == 0);
}
