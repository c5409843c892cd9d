#pragma once

#include "havok_mpc/types.hpp"

namespace havok {

// Time-delay embedding configuration. `depth` is the number of stacked
// samples m; pick it at least one larger than the worst-case system delay in
// samples. With include_inputs the delay vector also stacks the m-1 most
// recent past inputs, which is what lets the model express input delays.
struct HankelConfig {
    int depth = 1;
    bool include_inputs = true;
};

// Truncation-rank selection rule.
struct RankPolicy {
    enum class Kind { Energy, HardThreshold, Fixed };

    Kind kind = Kind::Energy;
    double tau = 0.999;  // cumulative-energy fraction (Energy)
    int r = 0;           // requested rank (Fixed)

    static RankPolicy energy(double tau) { return {Kind::Energy, tau, 0}; }
    static RankPolicy hard_threshold() { return {Kind::HardThreshold, 0.0, 0}; }
    static RankPolicy fixed(int r) { return {Kind::Fixed, 0.0, r}; }
};

struct SvdFactors {
    Matrix U;
    Vector S;
    Matrix V;
};

// Truncated SVD basis of the delay matrix, plus the layout needed to map
// between raw measurements and projected delay coordinates.
//
// Delay-vector layout at time k (one column of the delay matrix):
//   rows 0 .. depth*n_y-1                 outputs y_{k-m+1} .. y_k, oldest
//                                         sample first, channel-major within
//                                         each sample block
//   rows depth*n_y .. end (include_inputs) inputs u_{k-m+1} .. u_{k-1},
//                                         same ordering
// The input block stops at u_{k-1}: the current input never enters the state,
// which is what enforces causality downstream.
struct DelayEmbedding {
    HankelConfig config;
    int n_outputs = 0;
    int n_inputs = 0;  // channels stacked in the input block (0 when excluded)
    Matrix U;          // delay_dim() x rank, orthonormal columns
    Vector S;          // retained singular values, positive, non-increasing
    Matrix V;          // right factors of the retained directions
    int rank = 0;
    Vector full_singular_values;  // spectrum before truncation

    Index delay_dim() const {
        const Index input_rows =
            config.include_inputs ? Index(config.depth - 1) * n_inputs : 0;
        return Index(config.depth) * n_outputs + input_rows;
    }
};

// Hankel matrix of a multi-channel series: column j stacks samples
// j .. j+depth-1 (oldest at top, channel-major within each sample block), so
// H(i + n_ch, j) == H(i, j + 1) for all valid i, j.
Matrix build_hankel(const Matrix& series, int depth);

// Joint delay matrix: output Hankel block of depth m stacked over the input
// Hankel block of depth m-1 (aligned so column k ends at y_k and u_{k-1}).
// Columns correspond to times k = m-1 .. n_samples-1.
Matrix build_delay_matrix(const Matrix& outputs, const Matrix& inputs,
                          const HankelConfig& cfg);

// Single delay vector at time k (see layout above); k in [m-1, n_samples-1].
Vector delay_vector(const Matrix& outputs, const Matrix& inputs,
                    const HankelConfig& cfg, Index k);

// Thin SVD with ||U S V^T - H||_F <= 1e-10 * max(1, ||H||_F); singular values
// non-increasing and non-negative. Deterministic for identical input bits.
SvdFactors svd_factorize(const Matrix& H);

// Truncation rank from the full spectrum. aspect_ratio = min/max dimension of
// the factorized matrix, needed by the hard-threshold rule; the other rules
// ignore it. Throws on an all-zero spectrum.
int choose_rank(const Vector& singular_values, const RankPolicy& policy,
                double aspect_ratio = 1.0);

// Full pipeline: delay matrix, SVD, rank selection. The retained rank is
// additionally capped at the numerical rank (sigma > 1e-12 * sigma_max) so
// the retained singular values stay strictly positive; an all-zero matrix
// degenerates to a rank-1 canonical basis with a zero singular value.
DelayEmbedding make_embedding(const Matrix& outputs, const Matrix& inputs,
                              const HankelConfig& cfg, const RankPolicy& policy);

// z = U^T h. Plain projection without singular-value scaling, so lift() is
// the exact adjoint and project(lift(z)) == z.
Vector project(const DelayEmbedding& emb, const Vector& h);

// h = U z, the best rank-r reconstruction of a delay vector.
Vector lift(const DelayEmbedding& emb, const Vector& z);

}  // namespace havok
