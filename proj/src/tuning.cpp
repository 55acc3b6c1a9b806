#include "sindex/tuning.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <spdlog/spdlog.h>

#include "sindex/error.hpp"

namespace sindex {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Walks the grid from the largest radius down. `score(g)` returns the loss at grid index g, or nullopt when
// the radius is infeasible (so are all smaller radii).
template <class Score>
HSelection descend_grid(std::span<const double> h_grid, int patience, Score&& score)
{
    HSelection sel;
    sel.losses.assign(h_grid.size(), inf);
    double best = inf;
    bool found = false;
    int worse = 0;
    for (std::size_t d = 0; d < h_grid.size(); ++d) {
        const std::size_t g = h_grid.size() - 1 - d;
        const std::optional<double> loss = score(g);
        if (!loss) break;
        sel.losses[g] = *loss;
        // Ties move to the smaller radius.
        if (*loss <= best && *loss < inf) {
            best = *loss;
            sel.index = g;
            found = true;
            worse = 0;
        } else if (found && patience > 0 && ++worse >= patience) {
            break;
        }
    }
    require(found, ErrorCode::infeasible, "no h candidate yields a positive definite precision estimate");
    sel.h = h_grid[sel.index];
    return sel;
}

} // namespace

std::vector<double> TuningConfig::log_grid(double lo, double hi, int count)
{
    require(count >= 1 && lo > 0.0 && hi >= lo, ErrorCode::invalid_argument, "log_grid: bad range");
    std::vector<double> g(static_cast<std::size_t>(count));
    if (count == 1) {
        g[0] = hi;
        return g;
    }
    const double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (count - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

void TuningConfig::validate() const
{
    require(lambda_grid_size >= 1, ErrorCode::invalid_argument, "lambda grid must be nonempty");
    require(lambda_grid_ratio > 0.0 && lambda_grid_ratio <= 1.0, ErrorCode::invalid_argument,
            "lambda grid ratio must lie in (0,1]");
    require(!h_grid.empty(), ErrorCode::invalid_argument, "h grid must be nonempty");
    for (std::size_t i = 0; i < h_grid.size(); ++i) {
        require(h_grid[i] > 0.0, ErrorCode::invalid_argument, "h grid must be positive");
        require(i == 0 || h_grid[i] > h_grid[i - 1], ErrorCode::invalid_argument, "h grid must be sorted ascending");
    }
    require(cv_folds >= 2, ErrorCode::invalid_argument, "cv_folds must be at least 2");
}

double modified_bic(const Vector& beta, const SurrogateObjective& obj, double n_eff, Index p, double c)
{
    require(n_eff > 0.0, ErrorCode::invalid_argument, "modified_bic: n_eff must be positive");
    const double value = obj.anchored_value(beta);
    if (!(value > 0.0)) return -inf;
    const double loglogp = p >= 3 ? std::log(std::log(static_cast<double>(p))) : 0.0;
    const double df = static_cast<double>((beta.array() != 0.0).count());
    return std::log(value) + c * loglogp * std::log(n_eff) / n_eff * df;
}

LambdaSelection select_lambda(const SurrogateObjective& obj, const Vector& warm_start, const TuningConfig& cfg,
                              const LassoOptions& opts)
{
    obj.validate();
    cfg.validate();
    const Index p = obj.p();
    const double lmax = lambda_max(obj);
    const double n_eff = obj.scale / 2.0;

    LambdaSelection sel;
    const int k = cfg.lambda_grid_size;
    sel.grid.resize(static_cast<std::size_t>(k));
    // lambda_max itself is included; a zero lambda_max means zero is optimal everywhere.
    const double top = lmax > 0.0 ? lmax : 1e-12;
    for (int i = 0; i < k; ++i)
        sel.grid[static_cast<std::size_t>(i)] = k == 1 ? top : top * std::pow(cfg.lambda_grid_ratio, double(i) / (k - 1));

    const double lip = obj.lipschitz_bound(opts.power_iters);
    const double step = lip > 0.0 ? 1.0 / lip : 1.0;
    Vector warm = warm_start.size() == p ? warm_start : Vector::Zero(p);
    std::size_t best = 0;
    bool have = false;
    sel.scores.resize(sel.grid.size());
    for (std::size_t i = 0; i < sel.grid.size(); ++i) {
        LassoFit fit = fit_online_lasso(obj, sel.grid[i], warm, opts, step);
        const double score = modified_bic(fit.beta, obj, n_eff, p, cfg.bic_c);
        sel.scores[i] = score;
        // Strict improvement keeps ties at the larger lambda; -inf ties move to the smaller one.
        const bool take = !have || score < sel.bic || (score == -inf && sel.bic == -inf);
        if (take) {
            if (score == -inf && !(have && sel.bic == -inf))
                spdlog::warn("surrogate objective is nonpositive at lambda={:.3e}; BIC is -inf", sel.grid[i]);
            have = true;
            best = i;
            sel.bic = score;
            sel.fit = fit;
        }
        warm = std::move(fit.beta);
    }
    sel.lambda = sel.grid[best];
    return sel;
}

double validation_loss(const Matrix& h_val, const Matrix& omega)
{
    require(h_val.rows() == omega.rows() && h_val.cols() == omega.cols(), ErrorCode::dimension_mismatch,
            "validation_loss: dimension mismatch");
    Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success) return inf;
    const auto d = llt.matrixLLT().diagonal();
    if ((d.array() <= 0.0).any()) return inf;
    const double logdet = 2.0 * d.array().log().sum();
    const double tr = (h_val.array() * omega.transpose().array()).sum();
    const double v = tr - logdet;
    return std::isfinite(v) ? v : inf;
}

HSelection select_h_rolling(std::span<const double> h_grid,
                            const std::vector<std::optional<PrecisionEstimate>>& candidates, const Matrix& h_val)
{
    require(!h_grid.empty() && candidates.size() == h_grid.size(), ErrorCode::invalid_argument,
            "select_h_rolling: candidates must match the grid");
    return descend_grid(h_grid, 0, [&](std::size_t g) -> std::optional<double> {
        return candidates[g] ? validation_loss(h_val, candidates[g]->omega) : inf;
    });
}

HSelection select_h_rolling(std::span<const double> h_grid, PrecisionPath& path, const Matrix& h_val, int patience)
{
    require(!h_grid.empty(), ErrorCode::invalid_argument, "empty h grid");
    return descend_grid(h_grid, patience, [&](std::size_t g) -> std::optional<double> {
        auto est = path.at(h_grid[g]);
        if (!est) return std::nullopt;
        return validation_loss(h_val, est->omega);
    });
}

Matrix mean_hessian(BatchView data, const LossSpec& loss, const Vector& beta)
{
    const Index n = data.n();
    require(n > 0, ErrorCode::invalid_argument, "mean_hessian: empty data");
    const Vector eta = data.x * beta;
    Vector w(n);
    for (Index i = 0; i < n; ++i) w[i] = hessian_weight(loss, data.y[i], eta[i]);
    const Matrix xw = data.x.array().colwise() * w.array().sqrt();
    Matrix h = Matrix::Zero(data.p(), data.p());
    h.selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose());
    h.triangularView<Eigen::StrictlyUpper>() = h.transpose();
    return h / static_cast<double>(n);
}

HSelection select_h_first_batch(std::span<const double> h_grid, BatchView half, const LossSpec& loss, double lambda,
                                int folds, int patience, const LassoOptions& lasso_opts,
                                const ClimeOptions& clime_opts)
{
    const Index n = half.n();
    require(folds >= 2, ErrorCode::invalid_argument, "cross-validation needs at least 2 folds");
    require(static_cast<Index>(folds) <= n / 2, ErrorCode::invalid_argument,
            "cross-validation folds (" + std::to_string(folds) + ") exceed half the first-batch half size");
    require(!h_grid.empty(), ErrorCode::invalid_argument, "empty h grid");
    const Index p = half.p();
    std::vector<PrecisionPath> paths;
    std::vector<Matrix> h_vals;
    for (int f = 0; f < folds; ++f) {
        const Index lo = n * f / folds, hi = n * (f + 1) / folds;
        const Index m = n - (hi - lo);
        Vector ytr(m);
        Matrix xtr(m, p);
        ytr << half.y.head(lo), half.y.tail(n - hi);
        xtr << half.x.topRows(lo), half.x.bottomRows(n - hi);
        const BatchView train(ytr, xtr);
        const BatchView val(half.y.segment(lo, hi - lo), half.x.middleRows(lo, hi - lo));
        const LassoFit fit = fit_initial_lasso(train, loss, lambda, lasso_opts, 2.0 * static_cast<double>(m));
        paths.emplace_back(mean_hessian(train, loss, fit.beta), clime_opts);
        h_vals.push_back(mean_hessian(val, loss, fit.beta));
    }
    return descend_grid(h_grid, patience, [&](std::size_t g) -> std::optional<double> {
        double total = 0.0;
        bool any = false;
        for (int f = 0; f < folds; ++f) {
            auto est = paths[static_cast<std::size_t>(f)].at(h_grid[g]);
            if (!est) {
                total = inf;
                continue;
            }
            any = true;
            total += validation_loss(h_vals[static_cast<std::size_t>(f)], est->omega);
        }
        if (!any) return std::nullopt;
        return total / folds;
    });
}

} // namespace sindex
