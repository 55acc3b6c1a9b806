#include "sindex/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sindex/error.hpp"

namespace sindex {

namespace {

constexpr double logistic_cutoff = 35.0;

double softplus(double eta)
{
    if (eta > logistic_cutoff) return eta + std::log1p(std::exp(-eta));
    if (eta < -logistic_cutoff) return std::exp(eta);
    return std::log1p(std::exp(eta));
}

double sigmoid(double eta)
{
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

void check_binary(double y)
{
    if (y != 0.0 && y != 1.0)
        fail(ErrorCode::domain, "logistic loss requires responses in {0,1}, got " + std::to_string(y));
}

} // namespace

void LossSpec::validate() const
{
    if (kind == LossKind::huber)
        require(tau > 0.0 && std::isfinite(tau), ErrorCode::invalid_argument, "Huber tau must be positive and finite");
}

const char* loss_kind_name(LossKind kind) noexcept
{
    return kind == LossKind::huber ? "huber" : "logistic";
}

LossKind parse_loss_kind(const std::string& name)
{
    if (name == "huber") return LossKind::huber;
    if (name == "logistic") return LossKind::logistic;
    fail(ErrorCode::invalid_argument, "unknown loss '" + name + "'");
}

double loss_value(const LossSpec& spec, double y, double eta)
{
    if (spec.kind == LossKind::huber) {
        const double r = y - eta;
        const double a = std::abs(r);
        return a <= spec.tau ? 0.5 * r * r : spec.tau * a - 0.5 * spec.tau * spec.tau;
    }
    check_binary(y);
    return softplus(eta) - y * eta;
}

double loss_score(const LossSpec& spec, double y, double eta)
{
    if (spec.kind == LossKind::huber) {
        const double r = y - eta;
        if (std::abs(r) <= spec.tau) return -r;
        return r > 0.0 ? -spec.tau : spec.tau;
    }
    check_binary(y);
    return sigmoid(eta) - y;
}

double hessian_weight(const LossSpec& spec, double y, double eta)
{
    if (spec.kind == LossKind::huber) return std::abs(y - eta) <= spec.tau ? 1.0 : 0.0;
    check_binary(y);
    const double s = sigmoid(eta);
    return s * (1.0 - s);
}

double max_hessian_weight(const LossSpec& spec)
{
    return spec.kind == LossKind::huber ? 1.0 : 0.25;
}

double select_tau(std::span<const double> residuals, double coverage)
{
    require(!residuals.empty(), ErrorCode::invalid_argument, "select_tau: residuals are empty");
    require(coverage > 0.0 && coverage < 1.0, ErrorCode::invalid_argument, "select_tau: coverage must lie in (0,1)");
    std::vector<double> a(residuals.size());
    std::transform(residuals.begin(), residuals.end(), a.begin(), [](double r) { return std::abs(r); });
    const auto n = static_cast<double>(a.size());
    // Guard against coverage*n landing a hair above an integer.
    auto k = static_cast<std::size_t>(std::ceil(coverage * n - 1e-9 * n));
    k = std::clamp<std::size_t>(k, 1, a.size());
    std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(k - 1), a.end());
    const double tau = a[k - 1];
    require(tau > 0.0, ErrorCode::domain, "select_tau: order statistic is zero, tau must be positive");
    return tau;
}

void check_responses(const LossSpec& spec, const Eigen::Ref<const Vector>& y)
{
    if (spec.kind != LossKind::logistic) return;
    for (Index i = 0; i < y.size(); ++i) check_binary(y[i]);
}

} // namespace sindex
