#include "sindex/debias.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

#include "sindex/error.hpp"

namespace sindex {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p)
{
    require(p > 0.0 && p < 1.0, ErrorCode::invalid_argument, "normal_quantile: p must lie in (0,1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                    45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
                 133.14166789178437745) * r + 3.387132872796366608) /
               (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                    21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
                 42.313330701600911252) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                   1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
                4.6303378461565452959) * r + 1.42343711074968357734) /
              (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                   0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
                2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                   0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
                5.4637849111641143699) * r + 6.6579046435011037772) /
              (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                   7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
                0.59983220655588793769) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

void DebiasInputs::validate() const
{
    const Index p = beta1.size();
    const bool ok = beta2.size() == p && correction1.size() == p && correction2.size() == p &&
                    omega1.rows() == p && omega1.cols() == p && omega2.rows() == p && omega2.cols() == p;
    require(ok, ErrorCode::dimension_mismatch, "debias inputs have inconsistent dimensions");
    require(n_total > 0.0, ErrorCode::invalid_argument, "debias: n_total must be positive");
}

DebiasedEstimates debias_estimates(const DebiasInputs& inp)
{
    inp.validate();
    DebiasedEstimates out;
    out.beta_d1 = inp.beta1 + inp.omega1.transpose() * inp.correction1 / inp.n_total;
    out.beta_d2 = inp.beta2 + inp.omega2.transpose() * inp.correction2 / inp.n_total;
    out.beta_da = 0.5 * (out.beta_d1 + out.beta_d2);
    return out;
}

Vector debias_correction(const Vector& q, const Matrix& hsum, const Matrix& batch_hsum, const Vector& beta_own,
                         const Vector& beta_cross)
{
    const Index p = q.size();
    require(hsum.rows() == p && hsum.cols() == p && batch_hsum.rows() == p && batch_hsum.cols() == p &&
                beta_own.size() == p && beta_cross.size() == p,
            ErrorCode::dimension_mismatch, "debias correction inputs have inconsistent dimensions");
    return q - hsum * beta_own + batch_hsum * (beta_own - beta_cross);
}

Vector estimate_variance(const Matrix& omega1, const Matrix& omega2, const Matrix& tsum, double n_total)
{
    const Index p = tsum.rows();
    require(tsum.cols() == p && omega1.rows() == p && omega1.cols() == p && omega2.rows() == p && omega2.cols() == p,
            ErrorCode::dimension_mismatch, "variance inputs have inconsistent dimensions");
    require(n_total > 0.0, ErrorCode::invalid_argument, "variance: n_total must be positive");
    const Matrix w = omega1 + omega2;
    const Matrix tw = (tsum / n_total) * w;
    Vector var = (w.array() * tw.array()).colwise().sum().transpose() / 4.0;
    for (Index l = 0; l < p; ++l) {
        if (var[l] >= 0.0) continue;
        if (var[l] < -1e-12)
            fail(ErrorCode::internal, "negative variance " + std::to_string(var[l]) + " at coordinate " +
                                          std::to_string(l) + "; T accumulator is not PSD");
        spdlog::warn("variance {:.3e} at coordinate {} clamped to zero", var[l], l);
        var[l] = 0.0;
    }
    return var;
}

std::pair<double, double> confidence_interval(double beta, double sigma, double n_total, double alpha)
{
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::invalid_argument, "alpha must lie in (0,1)");
    require(sigma >= 0.0 && n_total > 0.0, ErrorCode::invalid_argument, "confidence interval: bad sigma or n");
    const double half = sigma * normal_quantile(1.0 - alpha / 2.0) / std::sqrt(n_total);
    return {beta - half, beta + half};
}

double p_value(double beta, double sigma, double n_total, bool* degenerate)
{
    require(sigma >= 0.0 && n_total > 0.0, ErrorCode::invalid_argument, "p_value: bad sigma or n");
    if (degenerate) *degenerate = sigma == 0.0;
    if (sigma == 0.0) return beta != 0.0 ? 0.0 : 1.0;
    const double z = std::sqrt(n_total) * std::abs(beta) / sigma;
    return std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
}

} // namespace sindex
