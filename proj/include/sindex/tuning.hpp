#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sindex/lasso.hpp"
#include "sindex/precision.hpp"

namespace sindex {

struct TuningConfig {
    int lambda_grid_size = 50;
    double lambda_grid_ratio = 0.01;
    std::vector<double> h_grid = default_h_grid();
    double bic_c = 1.0;
    int cv_folds = 5;
    /// Validate rolling candidates against 2 H^(s) / n_s instead of the normalized H^(s).
    bool rolling_raw_scaling = false;
    /// Radii are scored from large to small; scoring stops after this many consecutive radii worse than
    /// the best so far. 0 scores the whole grid.
    int h_patience = 1;

    void validate() const;

    /// `count` log-spaced radii in [lo, hi], ascending.
    static std::vector<double> log_grid(double lo, double hi, int count);
    static std::vector<double> default_h_grid() { return log_grid(1e-3, 1.0, 20); }
};

/// log(objective) + c loglog(p) log(n_eff)/n_eff * |beta|_0. Nonpositive objectives give -inf.
double modified_bic(const Vector& beta, const SurrogateObjective& obj, double n_eff, Index p, double c);

struct LambdaSelection {
    double lambda = 0.0;
    LassoFit fit;
    double bic = 0.0;
    std::vector<double> grid;   // descending
    std::vector<double> scores; // BIC per grid point
};

/// Fits the descending log grid from lambda_max with warm starts and returns the BIC minimizer.
/// Ties go to the larger lambda; among -inf scores the smallest lambda wins.
LambdaSelection select_lambda(const SurrogateObjective& obj, const Vector& warm_start, const TuningConfig& cfg,
                              const LassoOptions& opts = {});

/// tr(H Omega) - log det Omega; +inf when Omega is not positive definite.
double validation_loss(const Matrix& h_val, const Matrix& omega);

struct HSelection {
    double h = 0.0;
    std::size_t index = 0;
    std::vector<double> losses; // per grid point, +inf when unusable
};

/// Argmin of the validation loss over candidates (ascending grid); ties go to the smaller h.
HSelection select_h_rolling(std::span<const double> h_grid,
                            const std::vector<std::optional<PrecisionEstimate>>& candidates, const Matrix& h_val);

/// Rolling selection walking one CLIME path (trained on history) from the largest radius down.
/// Unscored radii keep a +inf loss.
HSelection select_h_rolling(std::span<const double> h_grid, PrecisionPath& path, const Matrix& h_val,
                            int patience);

/// K-fold cross-validation on one half of the first batch. Each fold refits the Lasso on the training rows
/// at `lambda`, builds training and held-out Hessians at that fit and scores the grid radii.
HSelection select_h_first_batch(std::span<const double> h_grid, BatchView half, const LossSpec& loss, double lambda,
                                int folds, int patience = 0, const LassoOptions& lasso_opts = {},
                                const ClimeOptions& clime_opts = {});

/// (1/n) sum_i w(y_i, x_i^T beta) x_i x_i^T over the rows of `data`.
Matrix mean_hessian(BatchView data, const LossSpec& loss, const Vector& beta);

} // namespace sindex
