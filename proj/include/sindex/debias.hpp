#pragma once

#include <utility>

#include "sindex/precision.hpp"
#include "sindex/types.hpp"

namespace sindex {

double normal_cdf(double x);

/// Inverse standard normal CDF (Wichura AS241), accurate to about 1e-16 relative.
double normal_quantile(double p);

/// Quantities for one split. `correction` is the braced vector of the one-step update,
/// already assembled from the accumulators (see engine); the estimate is beta + omega^T correction / n_total.
struct DebiasInputs {
    Vector beta1, beta2;
    Vector correction1, correction2;
    Matrix omega1, omega2;
    double n_total = 0.0;

    void validate() const;
};

struct DebiasedEstimates {
    Vector beta_d1, beta_d2, beta_da;
};

DebiasedEstimates debias_estimates(const DebiasInputs& inp);

/// Braced one-step correction for one split at step s, from accumulators through s:
///   q - hsum * beta_own + batch_hsum * (beta_own - beta_cross)
/// where batch_hsum = n_s H^(s) and beta_cross is the other split's step-s estimate.
Vector debias_correction(const Vector& q, const Matrix& hsum, const Matrix& batch_hsum, const Vector& beta_own,
                         const Vector& beta_cross);

/// sigma^2_l = (W1_l + W2_l)^T (tsum/n) (W1_l + W2_l) / 4, clamped at 0 inside (-1e-12, 0].
Vector estimate_variance(const Matrix& omega1, const Matrix& omega2, const Matrix& tsum, double n_total);

std::pair<double, double> confidence_interval(double beta, double sigma, double n_total, double alpha);

/// Two-sided normal p-value. With sigma = 0 the result is 0 for beta != 0 and 1 otherwise.
double p_value(double beta, double sigma, double n_total, bool* degenerate = nullptr);

} // namespace sindex
