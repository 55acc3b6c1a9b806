#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "sindex/engine.hpp"
#include "sindex/types.hpp"

namespace sindex {

enum class ModelKind { model1, model2 };
enum class ErrorDist { gaussian, lognormal, t3, weibull };
enum class CovKind { identity, toeplitz };

std::string model_kind_name(ModelKind k);
std::string error_dist_name(ErrorDist e);
ErrorDist parse_error_dist(const std::string& s);

struct ModelSpec {
    ModelKind model = ModelKind::model1;
    Index p = 200;
    Index s0 = 5;
    CovKind cov = CovKind::toeplitz;
    double rho = 0.5;
    ErrorDist error = ErrorDist::gaussian; // ignored by model2
    std::uint64_t seed = 0;

    void validate() const;
    /// "identity" or "toeplitz:RHO".
    std::string cov_string() const;
    void parse_cov(const std::string& s);
};

class Simulator {
public:
    explicit Simulator(ModelSpec spec);

    const ModelSpec& spec() const { return spec_; }
    const Matrix& sigma() const { return sigma_; }
    const Vector& beta0() const { return beta0_; }

    /// Deterministic in (spec.seed, replication, batch).
    Batch gen_batch(Index n, std::uint64_t replication, std::uint64_t batch) const;

private:
    ModelSpec spec_;
    Matrix sigma_;
    Matrix sigma_half_; // symmetric square root; empty for identity
    Vector beta0_;
};

/// 1 - cos(a, b). Throws domain when either vector is zero.
double sine_distance(const Vector& a, const Vector& b);

struct RejectionRates {
    double fpr = 0.0;
    Vector tpr; // length s0
};

/// Rejection at p_value <= alpha. Coordinates 0..s0-1 are signals, the rest nulls.
RejectionRates fpr_tpr(std::span<const InferenceReport> reports, Index s0, double alpha);

} // namespace sindex
