#include "havok_mpc/havok.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <string>

#include "havok_mpc/errors.hpp"

namespace havok {

namespace {

constexpr double kNormalEquationLimit = 1e6;   // Gram condition for the fast path
constexpr double kIllPosedLimit = 1e12;        // beyond this, flag the fit
constexpr double kPinvCutoff = 1e-12;          // relative singular-value cutoff

struct Regression {
    Matrix A;
    Matrix B;
    double gram_condition = 0.0;
};

// Least squares for [A B] in min ||Z+ - A Z - B U_now||_F. Z columns are the
// projected delay vectors at times m-1 .. n-2, Z+ the same one step later,
// and U_now the inputs applied at those times. Everything in the regressor at
// column k is data up to time k; u_k enters only through B.
Regression regress(const Matrix& basis, const Matrix& delay_matrix,
                   const Matrix& inputs, int depth) {
    const Index r = basis.cols();
    const Index n_u = inputs.cols();
    const Index pairs = delay_matrix.cols() - 1;

    const Matrix Z = basis.transpose() * delay_matrix;  // r x (pairs + 1)
    Matrix G(r + n_u, pairs);
    G.topRows(r) = Z.leftCols(pairs);
    G.bottomRows(n_u) =
        inputs.middleRows(depth - 1, pairs).transpose();  // u_{m-1} .. u_{n-2}
    const Matrix Zplus = Z.rightCols(pairs);

    Eigen::JacobiSVD<Matrix> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sigma = svd.singularValues();
    const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
    const double sigma_min = sigma.size() > 0 ? sigma(sigma.size() - 1) : 0.0;

    Regression out;
    out.gram_condition = (sigma_min > 0.0)
                             ? (sigma_max / sigma_min) * (sigma_max / sigma_min)
                             : std::numeric_limits<double>::infinity();

    Matrix theta;
    if (out.gram_condition < kNormalEquationLimit) {
        const Matrix gram = G * G.transpose();
        theta = gram.ldlt().solve(G * Zplus.transpose()).transpose();
    } else {
        // Pseudoinverse with cutoff 1e-12 * sigma_max.
        Vector inv_sigma = Vector::Zero(sigma.size());
        for (Index i = 0; i < sigma.size(); ++i) {
            if (sigma(i) > kPinvCutoff * sigma_max) inv_sigma(i) = 1.0 / sigma(i);
        }
        theta = Zplus * svd.matrixV() * inv_sigma.asDiagonal() * svd.matrixU().transpose();
    }
    if (!theta.allFinite()) throw NumericError("regression produced non-finite matrices");

    out.A = theta.leftCols(r);
    out.B = theta.rightCols(n_u);
    return out;
}

// Output map read off the basis: the rows belonging to the newest output
// block of the delay vector.
Matrix output_map(const Matrix& basis, int depth, Index n_y) {
    return basis.middleRows(Index(depth - 1) * n_y, n_y);
}

void check_fit_length(const TimeSeriesDataset& train, int depth) {
    if (train.n_samples() < Index(depth) + 2) {
        throw DataError("fit: need at least depth + 2 = " + std::to_string(depth + 2) +
                        " samples, got " + std::to_string(train.n_samples()));
    }
}

}  // namespace

std::pair<HavokModel, FitReport> fit(const TimeSeriesDataset& train, const HankelConfig& cfg,
                                     const RankPolicy& policy,
                                     const TimeSeriesDataset* holdout,
                                     const NormalizationSpec* norm) {
    check_fit_length(train, cfg.depth);

    HavokModel model;
    model.embedding = make_embedding(train.outputs, train.inputs, cfg, policy);
    model.sample_period = train.sample_period;
    model.norm = norm ? *norm : identity_normalization(train.n_inputs(), train.n_outputs());

    const Matrix H = build_delay_matrix(train.outputs, train.inputs, cfg);
    const Regression reg = regress(model.embedding.U, H, train.inputs, cfg.depth);
    model.A = reg.A;
    model.B = reg.B;
    model.C = output_map(model.embedding.U, cfg.depth, train.n_outputs());

    FitReport report = evaluate(model, holdout ? *holdout : train);
    report.gram_condition = reg.gram_condition;
    report.ill_posed = !(reg.gram_condition < kIllPosedLimit);
    return {std::move(model), std::move(report)};
}

HavokModel fit_with_basis(const TimeSeriesDataset& train, const HankelConfig& cfg,
                          const Matrix& basis, double* gram_condition) {
    check_fit_length(train, cfg.depth);

    DelayEmbedding emb;
    emb.config = cfg;
    emb.n_outputs = static_cast<int>(train.n_outputs());
    emb.n_inputs =
        (cfg.include_inputs && cfg.depth > 1) ? static_cast<int>(train.n_inputs()) : 0;
    if (basis.rows() != emb.delay_dim()) {
        throw DataError("basis rows do not match the delay-vector dimension");
    }
    const Matrix gram = basis.transpose() * basis;
    if ((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-10) {
        throw DataError("basis columns are not orthonormal");
    }
    emb.rank = static_cast<int>(basis.cols());
    emb.U = basis;
    emb.S = Vector::Ones(emb.rank);  // placeholder; not the data's spectrum
    emb.full_singular_values = emb.S;

    HavokModel model;
    model.embedding = std::move(emb);
    model.sample_period = train.sample_period;
    model.norm = identity_normalization(train.n_inputs(), train.n_outputs());

    const Matrix H = build_delay_matrix(train.outputs, train.inputs, cfg);
    const Regression reg = regress(model.embedding.U, H, train.inputs, cfg.depth);
    if (gram_condition) *gram_condition = reg.gram_condition;
    model.A = reg.A;
    model.B = reg.B;
    model.C = output_map(model.embedding.U, cfg.depth, train.n_outputs());
    return model;
}

Vector step(const HavokModel& model, const Vector& z, const Vector& u) {
    if (z.size() != model.rank() || u.size() != model.n_inputs()) {
        throw DataError("step: dimension mismatch");
    }
    return model.A * z + model.B * u;
}

Vector predict_output(const HavokModel& model, const Vector& z, bool physical_units) {
    if (z.size() != model.rank()) throw DataError("predict_output: dimension mismatch");
    Vector y = model.C * z;
    return physical_units ? model.norm.invert_output(y) : y;
}

Matrix simulate(const HavokModel& model, Vector z0, const Matrix& inputs) {
    if (z0.size() != model.rank()) throw DataError("simulate: initial state dimension mismatch");
    if (inputs.cols() != model.n_inputs()) throw DataError("simulate: input channel mismatch");
    if (inputs.rows() < 1) throw DataError("simulate: need at least one input sample");

    const Index T = inputs.rows();
    Matrix outputs(T, model.n_outputs());
    Vector z = std::move(z0);
    for (Index k = 0; k < T; ++k) {
        if (!z.allFinite()) {
            throw NumericError("simulate: state diverged at step " + std::to_string(k));
        }
        outputs.row(k) = (model.C * z).transpose();
        z = model.A * z + model.B * inputs.row(k).transpose();
    }
    return outputs;
}

Vector embed_initial_state(const HavokModel& model, const Matrix& y_history,
                           const Matrix& u_history) {
    const auto& emb = model.embedding;
    const int m = emb.config.depth;
    const Index n_y = emb.n_outputs;
    const bool with_u = emb.config.include_inputs && m > 1;

    if (y_history.rows() != m || y_history.cols() != n_y) {
        throw DataError("embed_initial_state: need exactly " + std::to_string(m) +
                        " output samples of " + std::to_string(n_y) + " channels");
    }
    if (with_u && (u_history.rows() != m - 1 || u_history.cols() != emb.n_inputs)) {
        throw DataError("embed_initial_state: need exactly " + std::to_string(m - 1) +
                        " input samples of " + std::to_string(emb.n_inputs) + " channels");
    }

    Vector h(emb.delay_dim());
    for (int blk = 0; blk < m; ++blk) {
        h.segment(Index(blk) * n_y, n_y) = y_history.row(blk).transpose();
    }
    if (with_u) {
        const Index base = Index(m) * n_y;
        for (int blk = 0; blk + 1 < m; ++blk) {
            h.segment(base + Index(blk) * emb.n_inputs, emb.n_inputs) =
                u_history.row(blk).transpose();
        }
    }
    return project(emb, h);
}

FitReport evaluate(const HavokModel& model, const TimeSeriesDataset& ds) {
    const auto& cfg = model.embedding.config;
    const int m = cfg.depth;
    const Index n = ds.n_samples();
    const Index n_y = model.n_outputs();
    if (ds.n_outputs() != n_y || ds.n_inputs() != model.n_inputs()) {
        throw DataError("evaluate: dataset channels do not match the model");
    }
    if (n < Index(m) + 1) {
        throw DataError("evaluate: need at least depth + 1 samples");
    }

    FitReport report;
    for (int horizon : kFitHorizons) {
        const Index count = n - Index(m - 1) - horizon;
        if (count < 1) continue;

        double sq_sum = 0.0;
        Vector channel_sq = Vector::Zero(n_y);
        Matrix residuals(count, n_y);
        for (Index k = m - 1; k + horizon < n; ++k) {
            Vector z = project(model.embedding, delay_vector(ds.outputs, ds.inputs, cfg, k));
            for (int t = 0; t < horizon; ++t) {
                z = model.A * z + model.B * ds.inputs.row(k + t).transpose();
            }
            const Vector err = model.C * z - ds.outputs.row(k + horizon).transpose();
            sq_sum += err.squaredNorm();
            channel_sq += err.cwiseAbs2();
            if (horizon == 1) residuals.row(k - (m - 1)) = err.transpose();
        }
        const double denom = static_cast<double>(count);
        report.multi_step_rmse.emplace_back(
            horizon, std::sqrt(sq_sum / (denom * static_cast<double>(n_y))));
        if (horizon == 1) {
            report.one_step_rmse = (channel_sq / denom).cwiseSqrt();
            report.residuals = std::move(residuals);
        }
    }
    if (report.one_step_rmse.size() == 0) {
        throw DataError("evaluate: dataset too short for a one-step prediction");
    }
    return report;
}

}  // namespace havok
