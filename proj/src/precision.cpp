#include "sindex/precision.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <spdlog/spdlog.h>

#include "sindex/error.hpp"
#include "sindex/parallel.hpp"

namespace sindex {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Parametric dual simplex for min |w|_1 s.t. -h <= A w - e_j <= h as h decreases.
// Basis: k rows R held at their bounds r_i = s_i h, k columns C with w_c = sigma_c |w_c| free of zero.
// B is the inverse of A(R, C); rows of B follow C, columns follow R.
class ColumnPath {
public:
    ColumnPath(const Matrix& a, Index j, const ClimeOptions& opts, Index max_basis)
        : a_(a), j_(j), p_(a.rows()), opts_(opts), max_basis_(max_basis), pos_r_(p_, -1), pos_c_(p_, -1)
    {
        max_pivots_ = opts.max_pivots > 0 ? opts.max_pivots : static_cast<int>(40 * p_ + 400);
        const double mean_diag = a.diagonal().cwiseAbs().mean();
        inverse_limit_ = opts.condition_limit / (mean_diag > 0.0 ? mean_diag : 1.0);
    }

    /// Continues the path down to radius h (non-increasing across calls); empty once infeasible.
    std::optional<Vector> advance(double h)
    {
        if (h >= 1.0) return Vector::Zero(p_);
        if (infeasible_) return std::nullopt;
        if (!started_) {
            started_ = true;
            h_ = 1.0;
            refresh();
            if (!enter_row(j_, -1.0)) {
                infeasible_ = true;
                return std::nullopt;
            }
            if (!basis_ok_ || binv_.cwiseAbs().maxCoeff() > inverse_limit_) return give_up("ill-conditioned basis");
        }
        for (;;) {
            const Event ev = next_event(h_);
            if (ev.kind == Event::none || ev.h < h) {
                if (!residuals_within(h)) return give_up("residual check failed");
                return solution(h);
            }
            if (++pivots_ > max_pivots_) return give_up("pivot cap reached");
            stalled_ = ev.h < h_ ? 0 : stalled_ + 1;
            if (stalled_ > p_ + 50) return give_up("degenerate pivots without progress");
            h_ = ev.h;
            const bool ok = ev.kind == Event::row ? enter_row(ev.index, ev.sign) : leave_column(ev.index);
            if (!ok) {
                infeasible_ = true;
                return std::nullopt;
            }
            if (!basis_ok_ || binv_.cwiseAbs().maxCoeff() > inverse_limit_) return give_up("ill-conditioned basis");
            // A basis larger than the rank of the unridged input is invertible only through the ridge.
            if (k() > max_basis_) return give_up("basis exceeds numerical rank");
        }
    }

    /// True when the path stopped for numerical reasons rather than a dual certificate.
    bool numerically_stopped() const { return numeric_stop_; }

private:
    struct Event {
        enum Kind { none, row, column } kind = none;
        double h = -inf;
        Index index = -1; // row index, or position in C
        double sign = 0.0;
    };

    struct Ratio {
        double t = inf;
        double pivot = 0.0;
        Index index = -1;      // column index, or position in R
        bool is_column = false;
        double sign = 0.0;
    };

    Index k() const { return static_cast<Index>(rows_.size()); }

    std::optional<Vector> give_up(const char* why)
    {
        spdlog::debug("CLIME column {} treated as infeasible below h={:.3e}: {}", j_, h_, why);
        infeasible_ = true;
        numeric_stop_ = true;
        return std::nullopt;
    }

    bool residuals_within(double h) const
    {
        const double tol = 1e-7 * std::max(1.0, h);
        for (Index i = 0; i < p_; ++i)
            if (std::abs(alpha_[i] + h * beta_[i]) > h + tol) return false;
        return true;
    }

    Vector solution(double h) const
    {
        Vector w = Vector::Zero(p_);
        for (Index q = 0; q < k(); ++q) w[cols_[q]] = av_[q] + h * bv_[q];
        return w;
    }

    void refactor()
    {
        const Index kk = k();
        Matrix m(kk, kk);
        for (Index t = 0; t < kk; ++t)
            for (Index q = 0; q < kk; ++q) m(t, q) = a_(rows_[t], cols_[q]);
        Eigen::FullPivLU<Matrix> lu(m);
        updates_ = 0;
        if (kk > 0 && !lu.isInvertible()) {
            basis_ok_ = false;
            return;
        }
        binv_ = kk > 0 ? Matrix(lu.inverse()) : Matrix(0, 0);
    }

    void refresh()
    {
        if (updates_ >= opts_.refactor_every) refactor();
        const Index kk = k();
        Vector er = Vector::Zero(kk), sr(kk), sc(kk);
        for (Index t = 0; t < kk; ++t) {
            er[t] = rows_[t] == j_ ? 1.0 : 0.0;
            sr[t] = row_sign_[t];
            sc[t] = col_sign_[t];
        }
        av_ = binv_ * er;
        bv_ = binv_ * sr;
        y_ = binv_.transpose() * sc;
        phi_.setZero(p_);
        for (Index t = 0; t < kk; ++t) phi_.noalias() += y_[t] * a_.col(rows_[t]);
        alpha_.setZero(p_);
        beta_.setZero(p_);
        for (Index q = 0; q < kk; ++q) {
            alpha_.noalias() += av_[q] * a_.col(cols_[q]);
            beta_.noalias() += bv_[q] * a_.col(cols_[q]);
        }
        alpha_[j_] -= 1.0;
    }

    Event next_event(double h) const
    {
        constexpr double slope_tol = 1e-12;
        Event best;
        auto consider = [&](double hs, Event::Kind kind, Index index, double sign) {
            hs = std::min(hs, h);
            if (hs > best.h) best = {kind, hs, index, sign};
        };
        for (Index q = 0; q < k(); ++q) {
            const double slope = col_sign_[q] * bv_[q];
            if (slope <= slope_tol) continue;
            const double v = col_sign_[q] * (av_[q] + h * bv_[q]);
            consider(v <= 0.0 ? h : h - v / slope, Event::column, q, 0.0);
        }
        for (Index i = 0; i < p_; ++i) {
            if (pos_r_[i] >= 0) continue;
            const double up = 1.0 - beta_[i];
            if (up > slope_tol) consider(alpha_[i] / up, Event::row, i, 1.0);
            const double lo = 1.0 + beta_[i];
            if (lo > slope_tol) consider(-alpha_[i] / lo, Event::row, i, -1.0);
        }
        if (best.kind != Event::none && best.h <= 0.0) best.kind = Event::none;
        return best;
    }

    // Dual ratio test along y + t * delta (delta given on R, plus an optional entering row).
    Ratio ratio_test(const Vector& delta_r, Index new_row, double delta_new, Index leaving_pos) const
    {
        Vector psi = Vector::Zero(p_);
        for (Index t = 0; t < k(); ++t)
            if (delta_r[t] != 0.0) psi.noalias() += delta_r[t] * a_.col(rows_[t]);
        if (new_row >= 0) psi.noalias() += delta_new * a_.col(new_row);

        Ratio best;
        auto consider = [&](double t, double pivot, Index index, bool is_column, double sign) {
            t = std::max(t, 0.0);
            const double slack = 1e-12 * (1.0 + std::abs(best.t));
            if (t < best.t - slack || (t <= best.t + slack && std::abs(pivot) > std::abs(best.pivot)))
                best = {t, pivot, index, is_column, sign};
        };
        const Index leaving = leaving_pos >= 0 ? cols_[leaving_pos] : -1;
        for (Index c = 0; c < p_; ++c) {
            if (pos_c_[c] >= 0 && c != leaving) continue;
            const double ps = psi[c];
            const double ph = c == leaving ? col_sign_[leaving_pos] : phi_[c];
            if (ps > opts_.pivot_tol) consider((1.0 - ph) / ps, ps, c, true, 1.0);
            else if (ps < -opts_.pivot_tol) consider((-1.0 - ph) / ps, ps, c, true, -1.0);
        }
        for (Index t = 0; t < k(); ++t) {
            const double dv = delta_r[t];
            if (row_sign_[t] * dv > opts_.pivot_tol) consider(-y_[t] / dv, dv, t, false, 0.0);
        }
        return best;
    }

    // Row i reaches the bound s*h and leaves the set of basic residuals.
    bool enter_row(Index i, double s)
    {
        const Index kk = k();
        Vector v(kk);
        for (Index q = 0; q < kk; ++q) v[q] = a_(i, cols_[q]);
        const Vector delta_r = s * (binv_.transpose() * v);
        const Ratio r = ratio_test(delta_r, i, -s, -1);
        if (r.index < 0) return false;
        if (r.is_column) {
            append(i, s, r.index, r.sign);
        } else {
            replace_row(r.index, i, s);
        }
        refresh();
        return true;
    }

    // Basic column at position q reaches zero and leaves.
    bool leave_column(Index q)
    {
        const Vector delta_r = -col_sign_[q] * binv_.row(q).transpose();
        const Ratio r = ratio_test(delta_r, -1, 0.0, q);
        if (r.index < 0) return false;
        if (r.is_column) {
            replace_column(q, r.index, r.sign);
        } else {
            remove(r.index, q);
        }
        refresh();
        return true;
    }

    bool tiny(double pivot) const { return std::abs(pivot) < 1e-12; }

    void append(Index i, double s, Index c, double sigma)
    {
        const Index kk = k();
        Vector u(kk), v(kk);
        for (Index t = 0; t < kk; ++t) u[t] = a_(rows_[t], c);
        for (Index q = 0; q < kk; ++q) v[q] = a_(i, cols_[q]);
        const Vector bu = binv_ * u;
        const Vector vb = binv_.transpose() * v;
        const double schur = a_(i, c) - v.dot(bu);
        pos_r_[i] = kk;
        pos_c_[c] = kk;
        rows_.push_back(i);
        row_sign_.push_back(s);
        cols_.push_back(c);
        col_sign_.push_back(sigma);
        if (tiny(schur)) {
            refactor();
            return;
        }
        Matrix nb(kk + 1, kk + 1);
        nb.topLeftCorner(kk, kk) = binv_ + bu * vb.transpose() / schur;
        nb.topRightCorner(kk, 1) = -bu / schur;
        nb.bottomLeftCorner(1, kk) = -vb.transpose() / schur;
        nb(kk, kk) = 1.0 / schur;
        binv_.swap(nb);
        ++updates_;
    }

    void replace_row(Index t, Index i, double s)
    {
        const Index kk = k();
        Vector v(kk);
        for (Index q = 0; q < kk; ++q) v[q] = a_(i, cols_[q]);
        Vector vb = binv_.transpose() * v;
        const double denom = vb[t];
        pos_r_[rows_[t]] = -1;
        pos_r_[i] = t;
        rows_[t] = i;
        row_sign_[t] = s;
        if (tiny(denom)) {
            refactor();
            return;
        }
        vb[t] -= 1.0;
        const Vector bt = binv_.col(t);
        binv_.noalias() -= bt * vb.transpose() / denom;
        ++updates_;
    }

    void replace_column(Index q, Index c, double sigma)
    {
        const Index kk = k();
        Vector u(kk);
        for (Index t = 0; t < kk; ++t) u[t] = a_(rows_[t], c);
        Vector bu = binv_ * u;
        const double denom = bu[q];
        pos_c_[cols_[q]] = -1;
        pos_c_[c] = q;
        cols_[q] = c;
        col_sign_[q] = sigma;
        if (tiny(denom)) {
            refactor();
            return;
        }
        bu[q] -= 1.0;
        const Vector bq = binv_.row(q).transpose();
        binv_.noalias() -= bu * bq.transpose() / denom;
        ++updates_;
    }

    void remove(Index t, Index q)
    {
        const Index kk = k();
        const double piv = binv_(q, t);
        pos_r_[rows_[t]] = -1;
        pos_c_[cols_[q]] = -1;
        rows_.erase(rows_.begin() + t);
        row_sign_.erase(row_sign_.begin() + t);
        cols_.erase(cols_.begin() + q);
        col_sign_.erase(col_sign_.begin() + q);
        for (Index r = t; r < kk - 1; ++r) pos_r_[rows_[r]] = r;
        for (Index c = q; c < kk - 1; ++c) pos_c_[cols_[c]] = c;
        if (tiny(piv)) {
            refactor();
            return;
        }
        Matrix nb(kk - 1, kk - 1);
        Vector colt(kk - 1), rowq(kk - 1);
        for (Index a = 0, ra = 0; a < kk; ++a) {
            if (a == q) continue;
            colt[ra] = binv_(a, t);
            for (Index b = 0, rb = 0; b < kk; ++b) {
                if (b == t) continue;
                nb(ra, rb) = binv_(a, b);
                ++rb;
            }
            ++ra;
        }
        for (Index b = 0, rb = 0; b < kk; ++b) {
            if (b == t) continue;
            rowq[rb++] = binv_(q, b);
        }
        nb.noalias() -= colt * rowq.transpose() / piv;
        binv_.swap(nb);
        ++updates_;
    }

    const Matrix& a_;
    Index j_;
    Index p_;
    ClimeOptions opts_;
    Index max_basis_;
    int max_pivots_ = 0;
    int pivots_ = 0;
    double h_ = 1.0;
    bool started_ = false;
    bool infeasible_ = false;
    bool numeric_stop_ = false;
    bool basis_ok_ = true;
    int stalled_ = 0;
    double inverse_limit_ = 0.0;
    std::vector<Index> rows_, cols_;
    std::vector<double> row_sign_, col_sign_;
    std::vector<Index> pos_r_, pos_c_;
    Matrix binv_ = Matrix(0, 0);
    int updates_ = 0;
    Vector av_, bv_, y_, phi_, alpha_, beta_;
};

} // namespace

struct PrecisionPath::Impl {
    Matrix hbar;
    double ridge = 0.0;
    double last_h = std::numeric_limits<double>::infinity();
    bool dead = false;
    std::vector<ColumnPath> paths;
};

namespace {

double column_violation(const Matrix& a, const Vector& w, Index j)
{
    Vector r = a * w;
    r[j] -= 1.0;
    return r.lpNorm<Eigen::Infinity>();
}

PrecisionEstimate finish_estimate(const Matrix& hbar, Matrix raw, double h, double ridge)
{
    const Index p = hbar.cols();
    PrecisionEstimate est;
    est.h_used = h;
    est.ridge = ridge;
    est.constraint_violation.resize(p);
    for (Index j = 0; j < p; ++j) est.constraint_violation[j] = column_violation(hbar, raw.col(j), j);
    const double worst = est.constraint_violation.maxCoeff();
    if (worst > h + 1e-6)
        fail(ErrorCode::internal,
             "CLIME solution violates its constraint: " + std::to_string(worst) + " > h=" + std::to_string(h));
    est.omega = symmetrize_min_magnitude(raw);
    est.omega_raw = std::move(raw);
    return est;
}

void check_square_symmetric(const Matrix& hbar)
{
    require(hbar.rows() == hbar.cols() && hbar.rows() > 0, ErrorCode::dimension_mismatch,
            "precision input must be a nonempty square matrix");
    require(hbar.allFinite(), ErrorCode::domain, "precision input contains non-finite values");
    const double scale = std::max(1.0, hbar.cwiseAbs().maxCoeff());
    require((hbar - hbar.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, ErrorCode::invariant_violation,
            "precision input is not symmetric");
}

std::vector<std::optional<Vector>> column_path(const Matrix& a, Index j, std::span<const double> h_desc,
                                               const ClimeOptions& opts, Index max_basis)
{
    std::vector<std::optional<Vector>> out;
    out.reserve(h_desc.size());
    ColumnPath path(a, j, opts, max_basis);
    for (double h : h_desc) out.push_back(path.advance(h));
    return out;
}

} // namespace

std::vector<std::optional<Vector>> clime_column_path(const Matrix& a, Index j, std::span<const double> h_desc,
                                                     const ClimeOptions& opts)
{
    require(j >= 0 && j < a.cols(), ErrorCode::invalid_argument, "column index out of range");
    for (std::size_t g = 0; g < h_desc.size(); ++g) {
        require(h_desc[g] > 0.0, ErrorCode::invalid_argument, "CLIME radius must be positive");
        require(g == 0 || h_desc[g] < h_desc[g - 1], ErrorCode::invalid_argument, "radii must be strictly decreasing");
    }
    return column_path(a, j, h_desc, opts, a.rows());
}

Vector estimate_precision_column(const Matrix& hbar, Index j, double h, const ClimeOptions& opts)
{
    check_square_symmetric(hbar);
    const double hs[] = {h};
    auto out = clime_column_path(hbar, j, hs, opts);
    if (!out[0])
        fail(ErrorCode::infeasible, "CLIME column " + std::to_string(j) + " infeasible at h=" + std::to_string(h) +
                                        "; use a larger h");
    return std::move(*out[0]);
}

Matrix symmetrize_min_magnitude(const Matrix& raw)
{
    require(raw.rows() == raw.cols(), ErrorCode::dimension_mismatch, "symmetrize: matrix must be square");
    Matrix out = raw;
    for (Index c = 0; c < raw.cols(); ++c)
        for (Index r = 0; r < c; ++r) {
            const double v = std::abs(raw(r, c)) <= std::abs(raw(c, r)) ? raw(r, c) : raw(c, r);
            out(r, c) = v;
            out(c, r) = v;
        }
    return out;
}

namespace {

struct Conditioning {
    double ridge = 0.0;
    Index rank = 0; // of the input before any ridge
};

Conditioning condition_input(Matrix& hbar, bool allow_ridge)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(hbar, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double top = std::max(ev.maxCoeff(), 0.0);
    Conditioning c;
    c.rank = top > 0.0 ? (ev.array() > 1e-10 * top).count() : 0;
    if (c.rank == hbar.rows() || !allow_ridge) {
        c.rank = hbar.rows();
        return c;
    }
    const double p = static_cast<double>(hbar.rows());
    c.ridge = 1e-8 * hbar.trace() / p;
    if (!(c.ridge > 0.0)) c.ridge = 1e-8;
    hbar.diagonal().array() += c.ridge;
    return c;
}

} // namespace

double ridge_if_singular(Matrix& hbar) { return condition_input(hbar, true).ridge; }

PrecisionPath::PrecisionPath(const Matrix& hbar, const ClimeOptions& opts) : impl_(std::make_unique<Impl>())
{
    check_square_symmetric(hbar);
    impl_->hbar = hbar;
    const Conditioning c = condition_input(impl_->hbar, opts.ridge_singular);
    impl_->ridge = c.ridge;
    impl_->paths.reserve(static_cast<std::size_t>(hbar.cols()));
    for (Index j = 0; j < hbar.cols(); ++j) impl_->paths.emplace_back(impl_->hbar, j, opts, c.rank);
}

PrecisionPath::~PrecisionPath() = default;
PrecisionPath::PrecisionPath(PrecisionPath&&) noexcept = default;
PrecisionPath& PrecisionPath::operator=(PrecisionPath&&) noexcept = default;

double PrecisionPath::ridge() const { return impl_->ridge; }

std::optional<PrecisionEstimate> PrecisionPath::at(double h)
{
    require(h > 0.0, ErrorCode::invalid_argument, "CLIME radius must be positive");
    require(h <= impl_->last_h, ErrorCode::invalid_argument, "PrecisionPath radii must not increase");
    impl_->last_h = h;
    if (impl_->dead) return std::nullopt;
    const Index p = impl_->hbar.cols();
    Matrix raw(p, p);
    // One infeasible column makes the radius infeasible; the remaining columns are skipped.
    std::atomic<bool> failed{false};
    parallel_for(static_cast<std::size_t>(p), [&](std::size_t jj) {
        if (failed.load(std::memory_order_relaxed)) return;
        auto w = impl_->paths[jj].advance(h);
        if (!w) {
            failed.store(true, std::memory_order_relaxed);
            return;
        }
        raw.col(static_cast<Index>(jj)) = *w;
    });
    if (failed.load()) {
        impl_->dead = true;
        impl_->paths.clear();
        return std::nullopt;
    }
    return finish_estimate(impl_->hbar, std::move(raw), h, impl_->ridge);
}

std::vector<std::optional<PrecisionEstimate>> estimate_precision_grid(const Matrix& hbar_in,
                                                                      std::span<const double> h_grid,
                                                                      const ClimeOptions& opts)
{
    check_square_symmetric(hbar_in);
    require(!h_grid.empty(), ErrorCode::invalid_argument, "empty h grid");
    for (std::size_t g = 0; g < h_grid.size(); ++g) {
        require(h_grid[g] > 0.0, ErrorCode::invalid_argument, "CLIME radius must be positive");
        require(g == 0 || h_grid[g] > h_grid[g - 1], ErrorCode::invalid_argument, "h grid must be strictly ascending");
    }
    Matrix hbar = hbar_in;
    const Conditioning cond = condition_input(hbar, opts.ridge_singular);
    const double ridge = cond.ridge;
    if (ridge > 0.0) spdlog::debug("CLIME input singular; added diagonal ridge {:.3e}", ridge);

    const Index p = hbar.rows();
    const std::size_t ng = h_grid.size();
    std::vector<double> h_desc(h_grid.rbegin(), h_grid.rend());
    std::vector<Matrix> raw(ng, Matrix::Zero(p, p));
    std::vector<char> feasible(ng, 1);
    std::vector<std::vector<char>> col_ok(static_cast<std::size_t>(p), std::vector<char>(ng, 0));
    parallel_for(static_cast<std::size_t>(p), [&](std::size_t jj) {
        const auto j = static_cast<Index>(jj);
        auto path = column_path(hbar, j, h_desc, opts, cond.rank);
        for (std::size_t d = 0; d < ng; ++d) {
            if (!path[d]) continue;
            raw[ng - 1 - d].col(j) = *path[d];
            col_ok[jj][ng - 1 - d] = 1;
        }
    });
    for (std::size_t g = 0; g < ng; ++g)
        for (Index j = 0; j < p; ++j)
            if (!col_ok[static_cast<std::size_t>(j)][g]) feasible[g] = 0;

    std::vector<std::optional<PrecisionEstimate>> out(ng);
    for (std::size_t g = 0; g < ng; ++g)
        if (feasible[g]) out[g] = finish_estimate(hbar, std::move(raw[g]), h_grid[g], ridge);
    return out;
}

PrecisionEstimate estimate_precision(const Matrix& hbar, double h, const ClimeOptions& opts)
{
    const double hs[] = {h};
    auto out = estimate_precision_grid(hbar, hs, opts);
    if (!out[0]) {
        // Name the first failing column.
        Matrix reg = hbar;
        if (opts.ridge_singular) ridge_if_singular(reg);
        const double one[] = {h};
        for (Index j = 0; j < reg.cols(); ++j)
            if (!clime_column_path(reg, j, one, opts)[0])
                fail(ErrorCode::infeasible, "CLIME column " + std::to_string(j) + " infeasible at h=" +
                                                std::to_string(h) + "; use a larger h grid");
        fail(ErrorCode::infeasible, "CLIME infeasible at h=" + std::to_string(h));
    }
    return std::move(*out[0]);
}

} // namespace sindex
