#include "havok_mpc/embedding.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>

#include "havok_mpc/errors.hpp"

namespace havok {

namespace {

// Numerical-rank cutoff relative to the largest singular value. Keeps the
// retained spectrum strictly positive even when the delay matrix has exact
// row duplicates (pure-delay data produces those).
constexpr double kRankCutoff = 1e-12;

void check_depth(int depth, Index n_samples) {
    if (depth < 1) throw ConfigError("embedding depth must be >= 1, got " + std::to_string(depth));
    if (Index(depth) > n_samples) {
        throw DataError("embedding depth " + std::to_string(depth) + " exceeds the " +
                        std::to_string(n_samples) + " available samples");
    }
}

}  // namespace

Matrix build_hankel(const Matrix& series, int depth) {
    check_depth(depth, series.rows());
    const Index n = series.rows();
    const Index n_ch = series.cols();
    const Index cols = n - depth + 1;

    Matrix H(Index(depth) * n_ch, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index blk = 0; blk < depth; ++blk) {
            H.block(blk * n_ch, j, n_ch, 1) = series.row(j + blk).transpose();
        }
    }
    return H;
}

Matrix build_delay_matrix(const Matrix& outputs, const Matrix& inputs,
                          const HankelConfig& cfg) {
    if (outputs.rows() != inputs.rows()) {
        throw DataError("outputs and inputs must have the same sample count");
    }
    const Matrix Hy = build_hankel(outputs, cfg.depth);
    if (!cfg.include_inputs || cfg.depth == 1) return Hy;

    // Input block of depth m-1 over samples 0 .. n-2, so column k (ending at
    // y_k) carries u_{k-m+1} .. u_{k-1} and never the current input.
    const Matrix Hu = build_hankel(inputs.topRows(inputs.rows() - 1), cfg.depth - 1);
    Matrix H(Hy.rows() + Hu.rows(), Hy.cols());
    H.topRows(Hy.rows()) = Hy;
    H.bottomRows(Hu.rows()) = Hu;
    return H;
}

Vector delay_vector(const Matrix& outputs, const Matrix& inputs,
                    const HankelConfig& cfg, Index k) {
    const Index m = cfg.depth;
    if (k < m - 1 || k >= outputs.rows()) {
        throw DataError("delay vector index " + std::to_string(k) + " out of range");
    }
    const Index n_y = outputs.cols();
    const Index n_u = inputs.cols();
    const bool with_u = cfg.include_inputs && m > 1;

    Vector h(m * n_y + (with_u ? (m - 1) * n_u : 0));
    for (Index blk = 0; blk < m; ++blk) {
        h.segment(blk * n_y, n_y) = outputs.row(k - m + 1 + blk).transpose();
    }
    if (with_u) {
        const Index base = m * n_y;
        for (Index blk = 0; blk < m - 1; ++blk) {
            h.segment(base + blk * n_u, n_u) = inputs.row(k - m + 1 + blk).transpose();
        }
    }
    return h;
}

SvdFactors svd_factorize(const Matrix& H) {
    if (!H.allFinite()) throw DataError("svd_factorize: matrix has non-finite entries");
    Eigen::JacobiSVD<Matrix> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

int choose_rank(const Vector& singular_values, const RankPolicy& policy,
                double aspect_ratio) {
    const Index n = singular_values.size();
    if (n == 0) throw NumericError("choose_rank: empty spectrum");
    const double total_energy = singular_values.squaredNorm();
    if (!(total_energy > 0.0)) throw NumericError("choose_rank: all singular values are zero");

    switch (policy.kind) {
        case RankPolicy::Kind::Energy: {
            if (!(policy.tau > 0.0) || policy.tau > 1.0) {
                throw ConfigError("energy fraction must lie in (0, 1]");
            }
            double cumulative = 0.0;
            for (Index i = 0; i < n; ++i) {
                cumulative += singular_values(i) * singular_values(i);
                if (cumulative / total_energy >= policy.tau) return static_cast<int>(i + 1);
            }
            return static_cast<int>(n);
        }
        case RankPolicy::Kind::HardThreshold: {
            // Optimal hard threshold for unknown noise: omega(beta) * median,
            // with the cubic omega approximation in beta = min/max dimension.
            const double beta = std::clamp(aspect_ratio, 0.0, 1.0);
            const double omega =
                0.56 * beta * beta * beta - 0.95 * beta * beta + 1.82 * beta + 1.43;
            Vector sorted = singular_values;
            std::sort(sorted.data(), sorted.data() + sorted.size());
            const double median = (n % 2 == 1)
                                      ? sorted(n / 2)
                                      : 0.5 * (sorted(n / 2 - 1) + sorted(n / 2));
            const double cutoff = omega * median;
            int r = 0;
            for (Index i = 0; i < n; ++i) {
                if (singular_values(i) > cutoff) ++r;
            }
            return std::max(r, 1);
        }
        case RankPolicy::Kind::Fixed: {
            if (policy.r < 1) throw ConfigError("fixed rank must be >= 1");
            return static_cast<int>(std::min<Index>(policy.r, n));
        }
    }
    throw ConfigError("unknown rank policy");
}

DelayEmbedding make_embedding(const Matrix& outputs, const Matrix& inputs,
                              const HankelConfig& cfg, const RankPolicy& policy) {
    const Matrix H = build_delay_matrix(outputs, inputs, cfg);
    const SvdFactors factors = svd_factorize(H);

    DelayEmbedding emb;
    emb.config = cfg;
    emb.n_outputs = static_cast<int>(outputs.cols());
    emb.n_inputs = (cfg.include_inputs && cfg.depth > 1) ? static_cast<int>(inputs.cols()) : 0;
    emb.full_singular_values = factors.S;

    const double sigma_max = factors.S.size() > 0 ? factors.S(0) : 0.0;
    Index numerical_rank = 0;
    for (Index i = 0; i < factors.S.size(); ++i) {
        if (factors.S(i) > kRankCutoff * sigma_max) ++numerical_rank;
    }

    if (numerical_rank == 0) {
        // Degenerate (all-zero) data: keep a single canonical direction so
        // downstream fits stay finite. The zero singular value marks it.
        emb.rank = 1;
        emb.U = Matrix::Zero(H.rows(), 1);
        emb.U(0, 0) = 1.0;
        emb.S = Vector::Zero(1);
        emb.V = Matrix::Zero(H.cols(), 1);
        return emb;
    }

    const double aspect = static_cast<double>(std::min(H.rows(), H.cols())) /
                          static_cast<double>(std::max(H.rows(), H.cols()));
    const int requested = choose_rank(factors.S, policy, aspect);
    emb.rank = static_cast<int>(std::min<Index>(requested, numerical_rank));
    emb.U = factors.U.leftCols(emb.rank);
    emb.S = factors.S.head(emb.rank);
    emb.V = factors.V.leftCols(emb.rank);
    return emb;
}

Vector project(const DelayEmbedding& emb, const Vector& h) {
    if (h.size() != emb.delay_dim()) {
        throw DataError("project: delay vector has length " + std::to_string(h.size()) +
                        ", embedding expects " + std::to_string(emb.delay_dim()));
    }
    return emb.U.transpose() * h;
}

Vector lift(const DelayEmbedding& emb, const Vector& z) {
    if (z.size() != emb.rank) {
        throw DataError("lift: coordinate vector has length " + std::to_string(z.size()) +
                        ", embedding rank is " + std::to_string(emb.rank));
    }
    return emb.U * z;
}

}  // namespace havok
