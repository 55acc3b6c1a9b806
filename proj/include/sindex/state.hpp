#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "sindex/loss.hpp"
#include "sindex/types.hpp"

namespace sindex {

struct Tunings {
    double lambda = 0.0; // split-1 penalty at the latest step
    double gamma = 0.0;  // split-2 penalty at the latest step
    double h = 0.0;      // split-1 CLIME radius (first-batch CV, then the latest rolling choice)
    double kappa = 0.0;  // split-2 CLIME radius
    double tau = 0.0;    // Huber threshold used at the latest step
};

/// Constant-size summary of the stream. Matrices prefixed `hsum`/`batch_h` are unnormalized (n_j H^(j)).
struct StreamState {
    Index p = 0;
    std::uint64_t step = 0;
    std::uint64_t total_count = 0;
    std::uint64_t batch_count = 0; // n_s of the latest batch
    LossSpec loss;

    Vector beta1, beta2;
    Matrix hsum1, hsum2;
    Vector q1, q2;
    Matrix tsum;
    Matrix batch_h1, batch_h2; // n_s H_1^(s), n_s H_2^(s) of the latest step

    // Sum over steps of 2 sum_half l(b) - b^T n grad + b^T n H b / 2 at the cross-fitted b. With q and
    // hsum it reproduces the pooled historical loss exactly for quadratic losses.
    double hist_const1 = 0.0, hist_const2 = 0.0;

    Tunings tunings;

    bool initialized() const { return step > 0; }
    Vector beta_ave() const { return 0.5 * (beta1 + beta2); }

    /// Throws an invariant-violation error on wrong shapes, asymmetric or indefinite accumulators.
    void validate() const;

    /// Bytes held by the state (object plus heap storage).
    std::size_t footprint_bytes() const;
};

/// Binary layout (little endian): magic "SIDXSTAT", u32 version, u32 loss kind, f64 tau, u64 p, u64 step,
/// u64 total_count, u64 batch_count, f64 tunings[5], f64 hist_const[2], then vectors beta1, beta2, q1, q2
/// (p f64 each) and matrices hsum1, hsum2, tsum, batch_h1, batch_h2 (p*p f64 each, column major).
void save_state(const StreamState& state, const std::string& path);
StreamState load_state(const std::string& path);

inline constexpr std::uint32_t state_format_version = 1;

} // namespace sindex
