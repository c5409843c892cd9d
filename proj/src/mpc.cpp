#include "havok_mpc/mpc.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "havok_mpc/errors.hpp"
#include "havok_mpc/qp_error.hpp"

namespace havok {

namespace {

constexpr double kKktTolerance = 1e-8;

Vector clamp(const Vector& v, const Vector& lb, const Vector& ub) {
    return v.cwiseMax(lb).cwiseMin(ub);
}

// Largest eigenvalue by power iteration: 100 iterations, tolerance 1e-10,
// deterministic start vector.
double largest_eigenvalue(const Matrix& H) {
    const Index n = H.rows();
    Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
    double lambda = 0.0;
    for (int it = 0; it < 100; ++it) {
        const Vector w = H * v;
        const double rayleigh = v.dot(w);
        const double norm = w.norm();
        if (!(norm > 0.0)) return std::max(rayleigh, 0.0);
        v = w / norm;
        if (std::abs(rayleigh - lambda) <= 1e-10 * std::max(1.0, std::abs(rayleigh))) {
            return rayleigh;
        }
        lambda = rayleigh;
    }
    return lambda;
}

void check_psd(const Matrix& M, Index dim, const char* name, bool strictly) {
    if (M.rows() != dim || M.cols() != dim) {
        throw ConfigError(std::string(name) + " must be " + std::to_string(dim) + "x" +
                          std::to_string(dim));
    }
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff())) {
        throw ConfigError(std::string(name) + " must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(M);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (strictly && !(min_eig > 0.0)) {
        throw ConfigError(std::string(name) + " must be positive definite");
    }
    if (!strictly && min_eig < -1e-10 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
        throw ConfigError(std::string(name) + " must be positive semidefinite");
    }
}

Matrix effective_r_delta(const MpcConfig& cfg, Index n_u) {
    return cfg.R_delta.size() == 0 ? Matrix::Zero(n_u, n_u) : cfg.R_delta;
}

// Constant-extends a reference trajectory to exactly `horizon` rows.
Matrix extend_reference(const Matrix& reference, int horizon) {
    if (reference.rows() == 0) throw ConfigError("reference trajectory is empty");
    Matrix out(horizon, reference.cols());
    for (int i = 0; i < horizon; ++i) {
        out.row(i) = reference.row(std::min<Index>(i, reference.rows() - 1));
    }
    return out;
}

Matrix apply_rows(const Matrix& rows, const Vector& offset, const Vector& scale) {
    return (rows.rowwise() - offset.transpose()).array().rowwise() /
           scale.transpose().array();
}

Matrix invert_rows(const Matrix& rows, const Vector& offset, const Vector& scale) {
    return (rows.array().rowwise() * scale.transpose().array()).rowwise() +
           offset.transpose().array();
}

}  // namespace

int MpcConfig::iteration_cap(Index n_u) const {
    if (max_qp_iterations > 0) return max_qp_iterations;
    return std::max(10 * horizon * static_cast<int>(n_u), 500);
}

void MpcConfig::validate(Index n_u, Index n_y) const {
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    check_psd(Q, n_y, "Q", /*strictly=*/false);
    check_psd(R, n_u, "R", /*strictly=*/true);
    if (R_delta.size() != 0) check_psd(R_delta, n_u, "R_delta", /*strictly=*/false);
    if (u_min.size() != n_u || u_max.size() != n_u) {
        throw ConfigError("input bounds must have " + std::to_string(n_u) + " entries");
    }
    if (((u_max - u_min).array() <= 0.0).any()) {
        throw ConfigError("u_min must be strictly below u_max in every channel");
    }
}

PredictionMatrices build_prediction(const HavokModel& model, int horizon) {
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    const Index r = model.rank();
    const Index n_y = model.n_outputs();
    const Index n_u = model.n_inputs();

    PredictionMatrices pred;
    pred.Phi.resize(Index(horizon) * n_y, r);
    pred.Gamma = Matrix::Zero(Index(horizon) * n_y, Index(horizon) * n_u);

    // One pass accumulating C A^p: impulse blocks C A^p B feed Gamma, the
    // advanced map C A^{p+1} feeds Phi.
    std::vector<Matrix> impulse(static_cast<std::size_t>(horizon));
    Matrix CAp = model.C;
    for (int p = 0; p < horizon; ++p) {
        impulse[static_cast<std::size_t>(p)] = CAp * model.B;
        CAp = CAp * model.A;
        pred.Phi.middleRows(Index(p) * n_y, n_y) = CAp;
    }
    for (int i = 0; i < horizon; ++i) {
        for (int j = 0; j <= i; ++j) {
            pred.Gamma.block(Index(i) * n_y, Index(j) * n_u, n_y, n_u) =
                impulse[static_cast<std::size_t>(i - j)];
        }
    }

    // Causality: everything above the block diagonal stays exactly zero.
    for (int i = 0; i < horizon; ++i) {
        for (int j = i + 1; j < horizon; ++j) {
            if (!pred.Gamma.block(Index(i) * n_y, Index(j) * n_u, n_y, n_u).isZero(0.0)) {
                throw NumericError("forced-response map violates causality");
            }
        }
    }
    return pred;
}

CondensedQp assemble_qp(const PredictionMatrices& pred, const MpcConfig& cfg,
                        const Vector& z, const Matrix& reference, const Vector& u_prev) {
    const int N = cfg.horizon;
    const Index n_y = pred.Gamma.rows() / N;
    const Index n_u = pred.Gamma.cols() / N;
    cfg.validate(n_u, n_y);
    if (u_prev.size() != n_u) throw ConfigError("u_prev has the wrong number of channels");
    if (reference.cols() != n_y) throw ConfigError("reference has the wrong number of channels");
    if (z.size() != pred.Phi.cols()) throw ConfigError("state dimension mismatch");

    const Matrix ref = extend_reference(reference, N);
    Vector r_vec(Index(N) * n_y);
    for (int i = 0; i < N; ++i) r_vec.segment(Index(i) * n_y, n_y) = ref.row(i).transpose();

    // Q-weighted forced response, block row by block row.
    Matrix QGamma(pred.Gamma.rows(), pred.Gamma.cols());
    Vector q_err(Index(N) * n_y);
    const Vector free_response = pred.Phi * z;
    for (int i = 0; i < N; ++i) {
        QGamma.middleRows(Index(i) * n_y, n_y) =
            cfg.Q * pred.Gamma.middleRows(Index(i) * n_y, n_y);
        q_err.segment(Index(i) * n_y, n_y) =
            cfg.Q * (free_response.segment(Index(i) * n_y, n_y) - r_vec.segment(Index(i) * n_y, n_y));
    }

    CondensedQp qp;
    qp.horizon = N;
    qp.n_u = n_u;
    qp.n_y = n_y;
    qp.H = pred.Gamma.transpose() * QGamma;
    qp.g = pred.Gamma.transpose() * q_err;
    qp.cost_offset =
        0.5 * (free_response - r_vec).dot(q_err);  // q_err = Q(free - r)

    for (int j = 0; j < N; ++j) {
        qp.H.block(Index(j) * n_u, Index(j) * n_u, n_u, n_u) += cfg.R;
    }

    const Matrix Rd = effective_r_delta(cfg, n_u);
    if (!Rd.isZero(0.0)) {
        // First-difference operator anchored at u_prev: du = D u - e with
        // e = [u_prev; 0; ...].
        Matrix D = Matrix::Identity(Index(N) * n_u, Index(N) * n_u);
        for (int j = 1; j < N; ++j) {
            D.block(Index(j) * n_u, Index(j - 1) * n_u, n_u, n_u) =
                -Matrix::Identity(n_u, n_u);
        }
        Vector e = Vector::Zero(Index(N) * n_u);
        e.head(n_u) = u_prev;

        Matrix RdBar = Matrix::Zero(Index(N) * n_u, Index(N) * n_u);
        for (int j = 0; j < N; ++j) RdBar.block(Index(j) * n_u, Index(j) * n_u, n_u, n_u) = Rd;

        qp.H += D.transpose() * RdBar * D;
        qp.g -= D.transpose() * (RdBar * e);
        qp.cost_offset += 0.5 * e.dot(RdBar * e);
    }

    qp.H = 0.5 * (qp.H + qp.H.transpose());

    qp.lb.resize(Index(N) * n_u);
    qp.ub.resize(Index(N) * n_u);
    for (int j = 0; j < N; ++j) {
        qp.lb.segment(Index(j) * n_u, n_u) = cfg.u_min;
        qp.ub.segment(Index(j) * n_u, n_u) = cfg.u_max;
    }
    return qp;
}

QpSolution solve_box_qp(const CondensedQp& qp, const Vector* warm_start,
                        int max_iterations) {
    const Index n = qp.H.rows();
    if (qp.H.cols() != n || qp.g.size() != n || qp.lb.size() != n || qp.ub.size() != n) {
        throw ConfigError("solve_box_qp: inconsistent problem dimensions");
    }
    if (((qp.ub - qp.lb).array() < 0.0).any()) {
        throw ConfigError("solve_box_qp: lb must not exceed ub");
    }
    if (!qp.H.allFinite() || !qp.g.allFinite()) {
        throw DataError("solve_box_qp: non-finite problem data");
    }

    const int cap = max_iterations > 0
                        ? max_iterations
                        : std::max(10 * static_cast<int>(n), 500);

    double L = largest_eigenvalue(qp.H);
    if (!(L > 0.0)) L = 1.0;
    const double fixed_step = 1.0 / L;

    auto objective = [&](const Vector& u, const Vector& grad) {
        // 0.5 u'Hu + g'u, reusing grad = Hu + g.
        return 0.5 * (u.dot(grad) + u.dot(qp.g));
    };

    Vector u = warm_start ? clamp(*warm_start, qp.lb, qp.ub)
                          : clamp(Vector::Zero(n), qp.lb, qp.ub);
    Vector grad = qp.H * u + qp.g;
    double f = objective(u, grad);

    // Bounded nonmonotone acceptance (window of recent objective values);
    // strict monotonicity would stall on rounding noise near the optimum.
    constexpr int kMemory = 10;
    std::vector<double> recent(kMemory, f);
    auto accept_level = [&]() {
        double level = recent[0];
        for (double v : recent) level = std::max(level, v);
        return level + 1e-12 * std::max(1.0, std::abs(level));
    };

    Vector u_prev, grad_prev;
    bool have_prev = false;
    Vector best_u = u;
    double best_residual = std::numeric_limits<double>::infinity();

    for (int iter = 0;; ++iter) {
        const double residual = (u - clamp(u - grad, qp.lb, qp.ub)).lpNorm<Eigen::Infinity>();
        if (residual < best_residual) {
            best_residual = residual;
            best_u = u;
        }
        if (residual < kKktTolerance) {
            return {u, iter, residual};
        }
        if (iter >= cap) {
            throw QpConvergenceError("box QP exceeded " + std::to_string(cap) +
                                         " iterations (best residual " +
                                         std::to_string(best_residual) + ")",
                                     best_u, best_residual);
        }

        // Barzilai-Borwein step, falling back to 1/L whenever the curvature
        // estimate is unusable or the step fails the acceptance test.
        double alpha = fixed_step;
        if (have_prev) {
            const Vector s = u - u_prev;
            const Vector y = grad - grad_prev;
            const double sy = s.dot(y);
            if (sy > 0.0) {
                alpha = std::clamp(s.squaredNorm() / sy, 1e-12, 1e12);
            }
        }

        const double level = accept_level();
        Vector u_trial = clamp(u - alpha * grad, qp.lb, qp.ub);
        Vector grad_trial = qp.H * u_trial + qp.g;
        double f_trial = objective(u_trial, grad_trial);
        if (f_trial > level && alpha != fixed_step) {
            alpha = fixed_step;
            u_trial = clamp(u - alpha * grad, qp.lb, qp.ub);
            grad_trial = qp.H * u_trial + qp.g;
            f_trial = objective(u_trial, grad_trial);
        }
        // The 1/L step can still miss the acceptance level when the power
        // iteration underestimated L; halving terminates on a convex problem.
        int halvings = 0;
        while (f_trial > level && halvings < 64) {
            alpha *= 0.5;
            u_trial = clamp(u - alpha * grad, qp.lb, qp.ub);
            grad_trial = qp.H * u_trial + qp.g;
            f_trial = objective(u_trial, grad_trial);
            ++halvings;
        }

        u_prev = u;
        grad_prev = grad;
        have_prev = true;
        u = std::move(u_trial);
        grad = std::move(grad_trial);
        f = f_trial;
        recent[static_cast<std::size_t>(iter % kMemory)] = f;
    }
}

namespace {

struct ModelDomainProblem {
    MpcConfig cfg;      // weights and bounds mapped through the normalization
    Matrix y_history;
    Matrix u_history;
    Matrix reference;
    Vector u_prev;
};

// Maps the physical-units controller inputs into the model's normalized
// domain. Affine per channel, so boxes stay boxes and quadratic weights pick
// up the channel scales.
ModelDomainProblem to_model_domain(const HavokModel& model, const MpcConfig& cfg,
                                   const Matrix& y_history, const Matrix& u_history,
                                   const Matrix& reference, const Vector& u_prev) {
    const auto& norm = model.norm;
    const Matrix Su = norm.input_scale.asDiagonal();
    const Matrix Sy = norm.output_scale.asDiagonal();

    ModelDomainProblem p;
    p.cfg = cfg;
    p.cfg.Q = Sy * cfg.Q * Sy;
    p.cfg.R = Su * cfg.R * Su;
    if (cfg.R_delta.size() != 0) p.cfg.R_delta = Su * cfg.R_delta * Su;
    p.cfg.u_min = norm.apply_input(cfg.u_min);
    p.cfg.u_max = norm.apply_input(cfg.u_max);
    p.y_history = apply_rows(y_history, norm.output_offset, norm.output_scale);
    p.u_history = u_history.rows() > 0
                      ? apply_rows(u_history, norm.input_offset, norm.input_scale)
                      : u_history;
    p.reference = apply_rows(reference, norm.output_offset, norm.output_scale);
    p.u_prev = norm.apply_input(u_prev);
    return p;
}

}  // namespace

MpcStepResult mpc_step(const HavokModel& model, const MpcConfig& cfg,
                       const Matrix& y_history, const Matrix& u_history,
                       const Matrix& reference, const Vector& u_prev,
                       const Vector* warm_start) {
    cfg.validate(model.n_inputs(), model.n_outputs());
    const int N = cfg.horizon;
    const Index n_u = model.n_inputs();
    const Index n_y = model.n_outputs();

    const ModelDomainProblem p =
        to_model_domain(model, cfg, y_history, u_history, reference, u_prev);

    const Vector z = embed_initial_state(model, p.y_history, p.u_history);
    const PredictionMatrices pred = build_prediction(model, N);
    const CondensedQp qp = assemble_qp(pred, p.cfg, z, p.reference, p.u_prev);

    Vector warm_n;
    const Vector* warm_ptr = nullptr;
    if (warm_start) {
        if (warm_start->size() != Index(N) * n_u) {
            throw ConfigError("warm start has the wrong length");
        }
        warm_n.resize(warm_start->size());
        for (int j = 0; j < N; ++j) {
            warm_n.segment(Index(j) * n_u, n_u) =
                model.norm.apply_input(warm_start->segment(Index(j) * n_u, n_u));
        }
        warm_ptr = &warm_n;
    }

    MpcStepResult result;
    Vector u_seq_n;
    const auto start = std::chrono::steady_clock::now();
    try {
        const QpSolution sol = solve_box_qp(qp, warm_ptr, cfg.iteration_cap(n_u));
        u_seq_n = sol.u;
        result.qp_iterations = sol.iterations;
    } catch (const QpConvergenceError&) {
        // Hold the previous input, clamped into the feasible box.
        const Vector u_hold = clamp(p.u_prev, p.cfg.u_min, p.cfg.u_max);
        u_seq_n.resize(Index(N) * n_u);
        for (int j = 0; j < N; ++j) u_seq_n.segment(Index(j) * n_u, n_u) = u_hold;
        result.qp_iterations = cfg.iteration_cap(n_u);
        result.used_fallback = true;
    }
    result.solve_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    result.cost = 0.5 * u_seq_n.dot(qp.H * u_seq_n) + qp.g.dot(u_seq_n) + qp.cost_offset;

    const Vector stacked = pred.Phi * z + pred.Gamma * u_seq_n;
    Matrix predicted(N, n_y);
    for (int i = 0; i < N; ++i) predicted.row(i) = stacked.segment(Index(i) * n_y, n_y).transpose();
    result.predicted_outputs =
        invert_rows(predicted, model.norm.output_offset, model.norm.output_scale);

    result.u_sequence.resize(Index(N) * n_u);
    for (int j = 0; j < N; ++j) {
        result.u_sequence.segment(Index(j) * n_u, n_u) =
            model.norm.invert_input(u_seq_n.segment(Index(j) * n_u, n_u));
    }
    result.u_applied = result.u_sequence.head(n_u);
    return result;
}

MpcController::MpcController(HavokModel model, MpcConfig cfg)
    : model_(std::move(model)), cfg_(std::move(cfg)) {
    cfg_.validate(model_.n_inputs(), model_.n_outputs());
}

MpcStepResult MpcController::step(const Matrix& y_history, const Matrix& u_history,
                                  const Matrix& reference, const Vector& u_prev) {
    MpcStepResult result = mpc_step(model_, cfg_, y_history, u_history, reference, u_prev,
                                    warm_ ? &*warm_ : nullptr);
    if (result.used_fallback) {
        warm_.reset();
    } else {
        // Shift by one block, repeating the last block.
        const Index n_u = model_.n_inputs();
        const Index len = result.u_sequence.size();
        Vector shifted(len);
        shifted.head(len - n_u) = result.u_sequence.tail(len - n_u);
        shifted.tail(n_u) = result.u_sequence.tail(n_u);
        warm_ = std::move(shifted);
    }
    return result;
}

void MpcController::reset_warm_start() { warm_.reset(); }

std::vector<BenchRow> bench_complexity(const std::vector<HavokModel>& models,
                                       const MpcConfig& cfg,
                                       const TimeSeriesDataset& data, int steps) {
    if (steps < 1) throw ConfigError("bench_complexity: steps must be >= 1");

    std::vector<BenchRow> rows;
    rows.reserve(models.size());
    for (const auto& model : models) {
        const int m = model.embedding.config.depth;
        MpcController controller(model, cfg);
        const Matrix reference = Matrix::Ones(1, model.n_outputs());

        std::vector<double> times;
        for (Index k = m - 1; k + 1 < data.n_samples() &&
                              times.size() < static_cast<std::size_t>(steps);
             ++k) {
            const Matrix y_hist = data.outputs.middleRows(k - m + 1, m);
            const Matrix u_hist = m > 1 ? Matrix(data.inputs.middleRows(k - m + 1, m - 1))
                                        : Matrix(0, data.n_inputs());
            const Vector u_prev = k >= 1 ? Vector(data.inputs.row(k - 1).transpose())
                                         : Vector(Vector::Zero(data.n_inputs()));
            const MpcStepResult result = controller.step(y_hist, u_hist, reference, u_prev);
            times.push_back(result.solve_time);

            BenchRow row;
            row.depth = m;
            row.rank = static_cast<int>(model.rank());
            row.qp_dim = static_cast<int>(result.u_sequence.size());
            if (times.size() == 1) rows.push_back(row);
        }
        if (times.empty()) throw DataError("bench_complexity: dataset too short for depth " +
                                           std::to_string(m));

        std::sort(times.begin(), times.end());
        const std::size_t mid = times.size() / 2;
        rows.back().median_solve_time = times.size() % 2 == 1
                                            ? times[mid]
                                            : 0.5 * (times[mid - 1] + times[mid]);

        const int expected = cfg.horizon * static_cast<int>(model.n_inputs());
        if (rows.back().qp_dim != expected) {
            throw NumericError("QP dimension " + std::to_string(rows.back().qp_dim) +
                               " depends on the embedding depth (expected " +
                               std::to_string(expected) + ")");
        }
    }
    return rows;
}

}  // namespace havok
