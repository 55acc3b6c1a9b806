#pragma once

#include "sindex/loss.hpp"
#include "sindex/types.hpp"

namespace sindex {

/// Smooth part of a penalized objective:
///   [ (b-c)^T Q (b-c)/2 + g^T (b-c) + k + 2 * sum_i l(y_i, x_i^T b) ] / scale
/// Q and g are optional. With Q empty this is the single-batch objective (2/n) sum l.
struct SurrogateObjective {
    SurrogateObjective(BatchView half_, LossSpec loss_, double scale_) : half(half_), loss(loss_), scale(scale_) {}

    Vector quad_center;
    Matrix quad_matrix;
    Vector linear_term;
    double constant = 0.0;
    BatchView half;
    LossSpec loss;
    double scale;

    Index p() const { return half.p(); }
    bool has_history() const { return quad_matrix.size() > 0; }

    /// Throws on inconsistent dimensions or a nonpositive scale.
    void validate() const;

    double value(const Vector& beta) const;
    /// Value without g and k: the anchored quadratic plus the batch loss. Nonnegative; used for BIC.
    double anchored_value(const Vector& beta) const;
    double value_and_gradient(const Vector& beta, Vector& grad) const;
    Vector gradient(const Vector& beta) const;

    /// Upper bound on the Lipschitz constant of the gradient (power iteration).
    double lipschitz_bound(int power_iters = 50) const;
};

struct LassoOptions {
    double kkt_tol = 1e-6;
    int max_iter = 10000;
    double shrink = 0.5;
    int power_iters = 50;
};

struct LassoFit {
    Vector beta;
    double smooth = 0.0;    // smooth part at beta
    double objective = 0.0; // smooth + lambda * |beta|_1
    double kkt = 0.0;
    int iterations = 0;
    double step = 0.0;
};

double soft_threshold(double x, double t);

/// Subgradient optimality residual; zero iff beta is optimal for the gradient given.
double kkt_residual(const Vector& beta, const Vector& grad, double lambda);

/// Smallest lambda at which zero is optimal: |grad(0)|_inf.
double lambda_max(const SurrogateObjective& obj);

/// Accelerated proximal gradient with backtracking and objective-based restart.
/// `step_hint` (if positive) replaces the power-iteration step bound.
LassoFit fit_online_lasso(const SurrogateObjective& obj, double lambda, const Vector& warm_start,
                          const LassoOptions& opts = {}, double step_hint = 0.0);

/// (2/batch_size) sum_{half} l + lambda |b|_1 from a zero start. batch_size defaults to twice the half.
LassoFit fit_initial_lasso(BatchView half, const LossSpec& loss, double lambda, const LassoOptions& opts = {},
                           double batch_size = 0.0);

} // namespace sindex
