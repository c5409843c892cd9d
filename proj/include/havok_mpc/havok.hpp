#pragma once

#include <utility>
#include <vector>

#include "havok_mpc/dataset.hpp"
#include "havok_mpc/embedding.hpp"
#include "havok_mpc/types.hpp"

namespace havok {

// Reduced linear predictor in projected delay coordinates:
//   z_{k+1} = A z_k + B u_k,   y_k = C z_k.
// A and B are regressed from data; C is read off the embedding basis (the
// rows of U belonging to the newest output block), so the output map is exact
// by construction. The model operates in the normalized domain recorded in
// `norm`; use the spec to move to and from physical units.
struct HavokModel {
    Matrix A;  // r x r
    Matrix B;  // r x n_u
    Matrix C;  // n_y x r
    DelayEmbedding embedding;
    double sample_period = 0.0;
    NormalizationSpec norm;

    Index rank() const { return A.rows(); }
    Index n_inputs() const { return B.cols(); }
    Index n_outputs() const { return C.rows(); }
};

// Fit diagnostics. Prediction statistics are computed on held-out data when
// fit() is given one, otherwise on the training set.
struct FitReport {
    Vector one_step_rmse;  // per output channel
    std::vector<std::pair<int, double>> multi_step_rmse;  // horizons {1,5,20} that fit
    Matrix residuals;      // one-step residuals, n_eval x n_y
    double gram_condition = 0.0;  // condition number of the regression Gram matrix
    bool ill_posed = false;       // gram_condition > 1e12, pseudoinverse used
};

inline constexpr int kFitHorizons[] = {1, 5, 20};

// Identifies A, B by least squares over snapshot pairs of projected delay
// coordinates: min || Z+ - A Z - B U_now ||_F. Regressors at column k use
// data up to time k only, and u_k enters only through B. Normal equations are
// used while the Gram condition number stays below 1e6; otherwise an
// SVD pseudoinverse with cutoff 1e-12 * sigma_max. Requires
// n_samples >= depth + 2.
std::pair<HavokModel, FitReport> fit(const TimeSeriesDataset& train,
                                     const HankelConfig& cfg,
                                     const RankPolicy& policy = {},
                                     const TimeSeriesDataset* holdout = nullptr,
                                     const NormalizationSpec* norm = nullptr);

// Same regression against a caller-supplied orthonormal basis. Used to check
// basis-rotation invariance; fit() is this with the SVD basis.
HavokModel fit_with_basis(const TimeSeriesDataset& train, const HankelConfig& cfg,
                          const Matrix& basis, double* gram_condition = nullptr);

// One predictor step, z_{k+1} = A z_k + B u_k.
Vector step(const HavokModel& model, const Vector& z, const Vector& u);

// y = C z; physical_units maps the result back through model.norm.
Vector predict_output(const HavokModel& model, const Vector& z,
                      bool physical_units = false);

// Iterates the predictor from z0 under the given input sequence (T x n_u).
// Row k of the result is C z_k, i.e. the output *before* inputs[k] acts:
// inputs affect outputs strictly after their own sample, matching the
// predictor's proper (no feedthrough) structure. Throws with the step index
// if the state diverges to non-finite values.
Matrix simulate(const HavokModel& model, Vector z0, const Matrix& inputs);

// Assembles the delay vector from measured history and projects it.
// y_history must hold exactly m samples (oldest first); u_history the m-1
// most recent inputs when the embedding includes them (ignored otherwise).
Vector embed_initial_state(const HavokModel& model, const Matrix& y_history,
                           const Matrix& u_history);

// Prediction statistics of a model on a dataset in the model's (normalized)
// domain: per-channel one-step RMSE plus multi-step RMSE at the horizons in
// kFitHorizons that the dataset length allows. Gram fields are left zero.
FitReport evaluate(const HavokModel& model, const TimeSeriesDataset& ds);

}  // namespace havok
