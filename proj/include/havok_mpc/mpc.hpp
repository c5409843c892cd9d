#pragma once

#include <optional>
#include <vector>

#include "havok_mpc/havok.hpp"
#include "havok_mpc/types.hpp"

namespace havok {

// Receding-horizon controller configuration. Q, R, R_delta and the bounds are
// expressed in physical units; mpc_step converts through model.norm
// internally.
struct MpcConfig {
    int horizon = 10;  // N, steps
    Matrix Q;          // n_y x n_y output tracking weight, PSD
    Matrix R;          // n_u x n_u input weight, PD
    Matrix R_delta;    // n_u x n_u input-rate weight, PSD (zero disables)
    Vector u_min;      // per-channel input bounds
    Vector u_max;
    int max_qp_iterations = 0;  // 0 -> max(10 * N * n_u, 500)

    int iteration_cap(Index n_u) const;
    // Throws ConfigError on dimension mismatch, non-PD R, or u_min >= u_max.
    void validate(Index n_u, Index n_y) const;
};

// Stacked free/forced response over the horizon:
//   yhat = Phi z + Gamma u_seq,
// where yhat block i is the output i+1 steps ahead. Gamma is block
// lower-triangular: block (i, j) = C A^{i-j} B for j <= i and exactly zero
// above the diagonal, so predicted outputs never depend on later inputs.
struct PredictionMatrices {
    Matrix Phi;    // (N n_y) x r
    Matrix Gamma;  // (N n_y) x (N n_u)
};

// Dense box-constrained QP in the input sequence only. The decision dimension
// is N * n_u regardless of the embedding depth behind the model.
struct CondensedQp {
    Matrix H;   // symmetric positive definite
    Vector g;
    Vector lb;
    Vector ub;
    double cost_offset = 0.0;  // completes 0.5 u'Hu + g'u to the true objective
    int horizon = 0;
    Index n_u = 0;
    Index n_y = 0;
};

struct QpSolution {
    Vector u;
    int iterations = 0;
    double kkt_residual = 0.0;
};

struct MpcStepResult {
    Vector u_applied;          // first input of the optimized sequence
    Vector u_sequence;         // full sequence (warm-start source)
    Matrix predicted_outputs;  // N x n_y
    int qp_iterations = 0;
    double solve_time = 0.0;   // seconds
    double cost = 0.0;         // QP objective including the constant term
    bool used_fallback = false;
};

PredictionMatrices build_prediction(const HavokModel& model, int horizon);

// Condenses the tracking objective
//   0.5 ||yhat - r||^2_Qbar + 0.5 ||u||^2_Rbar + 0.5 ||du||^2_RdBar
// into H, g, with the rate term anchored at u_prev. reference is N x n_y
// (rows beyond the provided ones are constant-extended by the caller).
// All quantities here live in the model's normalized domain.
CondensedQp assemble_qp(const PredictionMatrices& pred, const MpcConfig& cfg,
                        const Vector& z, const Matrix& reference,
                        const Vector& u_prev);

// Projected-gradient solver with Barzilai-Borwein steps and a fixed-step
// 1/L fallback (L from 100 power iterations at tolerance 1e-10). Terminates
// when the projected-gradient residual ||u - clamp(u - (H u + g))||_inf drops
// below 1e-8; throws NumericError at the iteration cap, carrying the best
// residual seen. Deterministic for identical inputs.
QpSolution solve_box_qp(const CondensedQp& qp, const Vector* warm_start = nullptr,
                        int max_iterations = 0);

// One receding-horizon step from measured history (physical units): embeds
// the current state, assembles and solves the QP, returns the first input.
// On solver failure the controller falls back to u_prev clamped to bounds and
// flags the result. reference may have fewer than N rows; it is
// constant-extended.
MpcStepResult mpc_step(const HavokModel& model, const MpcConfig& cfg,
                       const Matrix& y_history, const Matrix& u_history,
                       const Matrix& reference, const Vector& u_prev,
                       const Vector* warm_start = nullptr);

// Thin stateful wrapper owning the warm start carried between steps: the
// previous solution shifted by one block with the last block repeated.
class MpcController {
public:
    MpcController(HavokModel model, MpcConfig cfg);

    MpcStepResult step(const Matrix& y_history, const Matrix& u_history,
                       const Matrix& reference, const Vector& u_prev);
    void reset_warm_start();

    const HavokModel& model() const { return model_; }
    const MpcConfig& config() const { return cfg_; }

private:
    HavokModel model_;
    MpcConfig cfg_;
    std::optional<Vector> warm_;
};

struct BenchRow {
    int depth = 0;
    int rank = 0;
    int qp_dim = 0;
    double median_solve_time = 0.0;  // seconds
};

// Replays receding-horizon steps of each model over the same dataset and
// records the QP dimension and median solve time per model. The QP dimension
// must equal N * n_u for every row; violations throw NumericError.
std::vector<BenchRow> bench_complexity(const std::vector<HavokModel>& models,
                                       const MpcConfig& cfg,
                                       const TimeSeriesDataset& data, int steps);

}  // namespace havok
