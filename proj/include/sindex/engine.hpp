#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sindex/lasso.hpp"
#include "sindex/precision.hpp"
#include "sindex/state.hpp"
#include "sindex/tuning.hpp"

namespace sindex {

enum class SurrogateForm {
    taylor,             // (b-c)^T Q (b-c)/2 anchored at the other split's previous estimate
    gradient_corrected, // adds the stored first-order term so quadratic losses reproduce the pooled objective
};

enum class TauMode { adaptive, fixed };

struct EngineConfig {
    LossSpec loss;                 // Huber tau is the fixed value, or ignored when adaptive
    TauMode tau_mode = TauMode::adaptive;
    double tau_coverage = 0.8;
    double alpha = 0.05;
    TuningConfig tuning;
    LassoOptions lasso;
    ClimeOptions clime;
    SurrogateForm surrogate = SurrogateForm::gradient_corrected;
    bool infer_every_step = true;
    std::vector<std::uint64_t> infer_at; // used when infer_every_step is false
    std::uint64_t seed = 0;

    void validate() const;
    bool infers_at(std::uint64_t step) const;
};

struct InferenceReport {
    std::uint64_t step = 0;
    std::uint64_t n_total = 0;
    double alpha = 0.05;
    Vector beta1, beta2, beta_ave;
    Vector beta_d1, beta_d2, beta_da;
    Vector sigma, ci_lo, ci_hi, p_values;
    Tunings tunings;
    double ridge1 = 0.0, ridge2 = 0.0;
    std::vector<std::size_t> degenerate; // coordinates with zero standard error
};

/// First batch: split Lasso fits with BIC tuning, Huber tau calibration, accumulator initialisation and,
/// when inference at step 1 is configured, first-batch cross-validation of the CLIME radii.
StreamState init_stream(const Batch& batch1, const EngineConfig& cfg);

/// One online step. The input state is not modified; the updated state is returned.
StreamState update_stream(const StreamState& state, const Batch& batch, const EngineConfig& cfg);

/// Debiased inference from the state alone. Deterministic: equal states give equal reports.
InferenceReport run_inference(const StreamState& state, const EngineConfig& cfg);

/// Single-writer driver around the free functions.
class Engine {
public:
    explicit Engine(EngineConfig cfg);
    Engine(EngineConfig cfg, StreamState resumed);

    /// Ingests one batch and returns a report when inference is configured for the new step. The state
    /// advances only when both the update and the inference succeed.
    std::optional<InferenceReport> ingest(const Batch& batch);

    /// Inference at the current step; records the chosen radii in the state.
    InferenceReport infer();

    const StreamState& state() const { return state_; }
    const EngineConfig& config() const { return cfg_; }

private:
    EngineConfig cfg_;
    StreamState state_;
};

} // namespace sindex
