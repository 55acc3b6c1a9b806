#include "sindex/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

#include "sindex/debias.hpp"
#include "sindex/error.hpp"

namespace sindex {

namespace {

// Contributions of one half evaluated at the other split's estimate.
struct HalfStats {
    Matrix gram2;  // 2 sum w x x^T
    Vector ngrad;  // 2 sum score x
    Matrix tgram;  // sum score^2 x x^T
    double loss2;  // 2 sum l
};

Matrix weighted_gram(BatchView d, const Vector& w)
{
    const Matrix xw = d.x.array().colwise() * w.array().sqrt();
    Matrix g = Matrix::Zero(d.p(), d.p());
    g.selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose());
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    return g;
}

HalfStats half_stats(BatchView d, const LossSpec& loss, const Vector& beta)
{
    const Vector eta = d.x * beta;
    const Index n = d.n();
    Vector w(n), score(n);
    double lsum = 0.0;
    for (Index i = 0; i < n; ++i) {
        w[i] = 2.0 * hessian_weight(loss, d.y[i], eta[i]);
        score[i] = loss_score(loss, d.y[i], eta[i]);
        lsum += loss_value(loss, d.y[i], eta[i]);
    }
    HalfStats s;
    s.gram2 = weighted_gram(d, w);
    s.ngrad = 2.0 * (d.x.transpose() * score);
    s.tgram = weighted_gram(d, score.array().square().matrix());
    s.loss2 = 2.0 * lsum;
    return s;
}

void accumulate(StreamState& st, const SplitBatch& split, Index n)
{
    const HalfStats a = half_stats(split.first, st.loss, st.beta2);
    const HalfStats b = half_stats(split.second, st.loss, st.beta1);
    st.hsum1 += a.gram2;
    st.hsum2 += b.gram2;
    st.q1 += a.gram2 * st.beta2 - a.ngrad;
    st.q2 += b.gram2 * st.beta1 - b.ngrad;
    st.tsum += a.tgram + b.tgram;
    st.hist_const1 += a.loss2 - st.beta2.dot(a.ngrad) + 0.5 * st.beta2.dot(a.gram2 * st.beta2);
    st.hist_const2 += b.loss2 - st.beta1.dot(b.ngrad) + 0.5 * st.beta1.dot(b.gram2 * st.beta1);
    st.batch_h1 = a.gram2;
    st.batch_h2 = b.gram2;
    st.batch_count = static_cast<std::uint64_t>(n);
}

void check_batch(const Batch& batch, const LossSpec& loss, Index min_rows)
{
    batch.validate();
    require(batch.p() >= 1, ErrorCode::invalid_argument, "batch has no covariates");
    require(batch.n() >= min_rows, ErrorCode::invalid_argument,
            "batch has " + std::to_string(batch.n()) + " rows; at least " + std::to_string(min_rows) +
                " are required");
    check_responses(loss, batch.y);
    if (batch.n() % 2 != 0)
        spdlog::warn("batch {} has odd size {}; halves hold {} and {} rows", batch.index, batch.n(), batch.n() / 2,
                     batch.n() - batch.n() / 2);
}

bool adaptive_tau(const EngineConfig& cfg) { return cfg.loss.kind == LossKind::huber && cfg.tau_mode == TauMode::adaptive; }

std::optional<double> tau_from_residuals(const Vector& residuals, double coverage)
{
    try {
        return select_tau(std::span<const double>(residuals.data(), static_cast<std::size_t>(residuals.size())),
                          coverage);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::domain) throw;
        return std::nullopt;
    }
}

Vector range_projection(const Matrix& q, const Vector& g)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(q);
    const Vector& ev = es.eigenvalues();
    const double tol = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 1.0);
    const Index rank = (ev.array() > tol).count();
    if (rank == q.rows()) return g;
    const auto v = es.eigenvectors().rightCols(rank);
    return v * (v.transpose() * g);
}

SurrogateObjective history_objective(const StreamState& st, BatchView half, const LossSpec& loss, double scale,
                                     int split, const EngineConfig& cfg)
{
    SurrogateObjective obj(half, loss, scale);
    const Matrix& q = split == 1 ? st.hsum1 : st.hsum2;
    const Vector& c = split == 1 ? st.beta2 : st.beta1;
    obj.quad_matrix = q;
    obj.quad_center = c;
    if (cfg.surrogate == SurrogateForm::gradient_corrected) {
        const Vector& qacc = split == 1 ? st.q1 : st.q2;
        const double k = split == 1 ? st.hist_const1 : st.hist_const2;
        const Vector qc = q * c;
        obj.linear_term = qc - qacc;
        // Zero-curvature Huber rows leave gradient directions that Q cannot bound; drop them.
        if (loss.kind == LossKind::huber) obj.linear_term = range_projection(q, obj.linear_term);
        obj.constant = k + 0.5 * c.dot(qc) - qacc.dot(c);
    }
    return obj;
}

// Estimate at radius h, or at the smallest feasible grid radius above it.
PrecisionEstimate final_precision(const Matrix& hbar, double h, const EngineConfig& cfg, const char* which)
{
    {
        PrecisionPath path(hbar, cfg.clime);
        if (auto est = path.at(h)) return std::move(*est);
    }
    PrecisionPath path(hbar, cfg.clime);
    std::optional<PrecisionEstimate> last;
    const auto& grid = cfg.tuning.h_grid;
    for (auto it = grid.rbegin(); it != grid.rend() && *it > h; ++it) {
        auto est = path.at(*it);
        if (!est) break;
        last = std::move(est);
    }
    if (!last)
        fail(ErrorCode::infeasible, std::string("CLIME infeasible for ") + which + " at h=" + std::to_string(h) +
                                        " and every larger grid radius; supply a larger h grid");
    spdlog::warn("{} radius {:.4g} infeasible on the current Hessian; using {:.4g}", which, h, last->h_used);
    return std::move(*last);
}

} // namespace

void EngineConfig::validate() const
{
    loss.validate();
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::invalid_argument, "alpha must lie in (0,1)");
    require(tau_coverage > 0.0 && tau_coverage < 1.0, ErrorCode::invalid_argument, "tau coverage must lie in (0,1)");
    tuning.validate();
}

bool EngineConfig::infers_at(std::uint64_t step) const
{
    return infer_every_step || std::find(infer_at.begin(), infer_at.end(), step) != infer_at.end();
}

StreamState init_stream(const Batch& batch1, const EngineConfig& cfg)
{
    cfg.validate();
    check_batch(batch1, cfg.loss, 4);
    const SplitBatch split = split_batch(batch1);
    const Index p = batch1.p();
    const double n = static_cast<double>(batch1.n());

    LossSpec loss = cfg.loss;
    if (adaptive_tau(cfg)) {
        // Pilot threshold from the zero fit; recalibrated below from the initial estimates.
        const auto pilot = tau_from_residuals(batch1.y, cfg.tau_coverage);
        require(pilot.has_value(), ErrorCode::domain, "cannot calibrate Huber tau: all first-batch responses are zero");
        loss.tau = *pilot;
    }
    auto fit_halves = [&](const LossSpec& l) {
        SurrogateObjective o1(split.first, l, n), o2(split.second, l, n);
        return std::pair{select_lambda(o1, Vector::Zero(p), cfg.tuning, cfg.lasso),
                         select_lambda(o2, Vector::Zero(p), cfg.tuning, cfg.lasso)};
    };
    auto [sel1, sel2] = fit_halves(loss);
    if (adaptive_tau(cfg)) {
        const Vector ave = 0.5 * (sel1.fit.beta + sel2.fit.beta);
        if (auto tau = tau_from_residuals(batch1.y - batch1.x * ave, cfg.tau_coverage)) {
            loss.tau = *tau;
            std::tie(sel1, sel2) = fit_halves(loss);
        }
    }

    StreamState st;
    st.p = p;
    st.loss = loss;
    st.beta1 = sel1.fit.beta;
    st.beta2 = sel2.fit.beta;
    st.hsum1 = st.hsum2 = st.tsum = Matrix::Zero(p, p);
    st.q1 = st.q2 = Vector::Zero(p);
    accumulate(st, split, batch1.n());
    st.step = 1;
    st.total_count = static_cast<std::uint64_t>(batch1.n());
    st.tunings.lambda = sel1.lambda;
    st.tunings.gamma = sel2.lambda;
    st.tunings.tau = loss.kind == LossKind::huber ? loss.tau : 0.0;

    if (cfg.infers_at(1)) {
        const auto& t = cfg.tuning;
        st.tunings.h = select_h_first_batch(t.h_grid, split.first, loss, sel1.lambda, t.cv_folds, t.h_patience,
                                            cfg.lasso, cfg.clime)
                           .h;
        st.tunings.kappa = select_h_first_batch(t.h_grid, split.second, loss, sel2.lambda, t.cv_folds,
                                                t.h_patience, cfg.lasso, cfg.clime)
                               .h;
    }
    return st;
}

StreamState update_stream(const StreamState& state, const Batch& batch, const EngineConfig& cfg)
{
    cfg.validate();
    require(state.initialized(), ErrorCode::state, "update_stream needs an initialized state");
    require(batch.p() == state.p, ErrorCode::dimension_mismatch,
            "batch has " + std::to_string(batch.p()) + " covariates; the stream has " + std::to_string(state.p));
    require(cfg.loss.kind == state.loss.kind, ErrorCode::invalid_argument, "loss kind differs from the stream's");
    check_batch(batch, state.loss, 2);
    const SplitBatch split = split_batch(batch);

    StreamState next = state;
    if (adaptive_tau(cfg)) {
        if (auto tau = tau_from_residuals(batch.y - batch.x * state.beta_ave(), cfg.tau_coverage))
            next.loss.tau = *tau;
        else
            spdlog::warn("step {}: residuals are all zero; keeping tau={:.4g}", state.step + 1, state.loss.tau);
    } else {
        next.loss = cfg.loss;
    }
    const double n_total = static_cast<double>(state.total_count + static_cast<std::uint64_t>(batch.n()));
    const SurrogateObjective o1 = history_objective(state, split.first, next.loss, n_total, 1, cfg);
    const SurrogateObjective o2 = history_objective(state, split.second, next.loss, n_total, 2, cfg);
    const LambdaSelection sel1 = select_lambda(o1, state.beta1, cfg.tuning, cfg.lasso);
    const LambdaSelection sel2 = select_lambda(o2, state.beta2, cfg.tuning, cfg.lasso);

    next.beta1 = sel1.fit.beta;
    next.beta2 = sel2.fit.beta;
    accumulate(next, split, batch.n());
    next.step = state.step + 1;
    next.total_count = static_cast<std::uint64_t>(n_total);
    next.tunings.lambda = sel1.lambda;
    next.tunings.gamma = sel2.lambda;
    next.tunings.tau = next.loss.kind == LossKind::huber ? next.loss.tau : 0.0;
    return next;
}

InferenceReport run_inference(const StreamState& st, const EngineConfig& cfg)
{
    cfg.validate();
    require(st.initialized(), ErrorCode::state, "inference needs an initialized state");
    const double n = static_cast<double>(st.total_count);
    const auto& grid = cfg.tuning.h_grid;

    double h = st.tunings.h, kappa = st.tunings.kappa;
    if (st.step >= 2) {
        const double nb = static_cast<double>(st.batch_count);
        const double prev = n - nb;
        auto rolling = [&](const Matrix& hsum, const Matrix& bh) {
            PrecisionPath path((hsum - bh) / prev, cfg.clime);
            const Matrix val = cfg.tuning.rolling_raw_scaling ? Matrix(2.0 * bh / (nb * nb)) : Matrix(bh / nb);
            return select_h_rolling(grid, path, val, cfg.tuning.h_patience).h;
        };
        h = rolling(st.hsum1, st.batch_h1);
        kappa = rolling(st.hsum2, st.batch_h2);
    }
    require(h > 0.0 && kappa > 0.0, ErrorCode::state,
            "no CLIME radius available at step 1; first-batch cross-validation was not run");

    const PrecisionEstimate om1 = final_precision(st.hsum1 / n, h, cfg, "h");
    const PrecisionEstimate om2 = final_precision(st.hsum2 / n, kappa, cfg, "kappa");

    DebiasInputs inp;
    inp.beta1 = st.beta1;
    inp.beta2 = st.beta2;
    inp.correction1 = debias_correction(st.q1, st.hsum1, st.batch_h1, st.beta1, st.beta2);
    inp.correction2 = debias_correction(st.q2, st.hsum2, st.batch_h2, st.beta2, st.beta1);
    inp.omega1 = om1.omega;
    inp.omega2 = om2.omega;
    inp.n_total = n;
    const DebiasedEstimates est = debias_estimates(inp);
    const Vector var = estimate_variance(om1.omega, om2.omega, st.tsum, n);

    InferenceReport rep;
    rep.step = st.step;
    rep.n_total = st.total_count;
    rep.alpha = cfg.alpha;
    rep.beta1 = st.beta1;
    rep.beta2 = st.beta2;
    rep.beta_ave = st.beta_ave();
    rep.beta_d1 = est.beta_d1;
    rep.beta_d2 = est.beta_d2;
    rep.beta_da = est.beta_da;
    rep.sigma = var.cwiseSqrt();
    const Index p = st.p;
    rep.ci_lo.resize(p);
    rep.ci_hi.resize(p);
    rep.p_values.resize(p);
    for (Index l = 0; l < p; ++l) {
        std::tie(rep.ci_lo[l], rep.ci_hi[l]) = confidence_interval(rep.beta_da[l], rep.sigma[l], n, cfg.alpha);
        bool degenerate = false;
        rep.p_values[l] = p_value(rep.beta_da[l], rep.sigma[l], n, &degenerate);
        if (degenerate) rep.degenerate.push_back(static_cast<std::size_t>(l));
    }
    rep.tunings = st.tunings;
    rep.tunings.h = om1.h_used;
    rep.tunings.kappa = om2.h_used;
    rep.ridge1 = om1.ridge;
    rep.ridge2 = om2.ridge;
    return rep;
}

Engine::Engine(EngineConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

Engine::Engine(EngineConfig cfg, StreamState resumed) : cfg_(std::move(cfg)), state_(std::move(resumed))
{
    cfg_.validate();
    state_.validate();
    require(state_.loss.kind == cfg_.loss.kind, ErrorCode::invalid_argument,
            "resumed state uses a different loss than the configuration");
}

std::optional<InferenceReport> Engine::ingest(const Batch& batch)
{
    StreamState next = state_.initialized() ? update_stream(state_, batch, cfg_) : init_stream(batch, cfg_);
    std::optional<InferenceReport> rep;
    if (cfg_.infers_at(next.step)) {
        rep = run_inference(next, cfg_);
        next.tunings.h = rep->tunings.h;
        next.tunings.kappa = rep->tunings.kappa;
    }
    // Commit only after inference succeeded.
    state_ = std::move(next);
    return rep;
}

InferenceReport Engine::infer()
{
    InferenceReport rep = run_inference(state_, cfg_);
    state_.tunings.h = rep.tunings.h;
    state_.tunings.kappa = rep.tunings.kappa;
    return rep;
}

} // namespace sindex
