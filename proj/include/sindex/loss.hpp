#pragma once

#include <span>

#include "sindex/types.hpp"

namespace sindex {

enum class LossKind { huber, logistic };

struct LossSpec {
    LossKind kind = LossKind::huber;
    double tau = 1.0; // Huber only

    static LossSpec huber(double tau) { return {LossKind::huber, tau}; }
    static LossSpec logistic() { return {LossKind::logistic, 0.0}; }

    void validate() const;
};

const char* loss_kind_name(LossKind kind) noexcept;
LossKind parse_loss_kind(const std::string& name);

double loss_value(const LossSpec& spec, double y, double eta);

/// Derivative of the loss in the linear predictor.
double loss_score(const LossSpec& spec, double y, double eta);

/// Per-observation Hessian contribution is w * x x^T. Huber uses the closed indicator |r| <= tau.
double hessian_weight(const LossSpec& spec, double y, double eta);

/// Smallest tau covering at least `coverage` of |residuals|: the ceil(coverage*n)-th order statistic.
double select_tau(std::span<const double> residuals, double coverage = 0.8);

/// Throws a domain error unless every response is admissible for the loss.
void check_responses(const LossSpec& spec, const Eigen::Ref<const Vector>& y);

/// Upper bound on hessian_weight over all inputs.
double max_hessian_weight(const LossSpec& spec);

} // namespace sindex
