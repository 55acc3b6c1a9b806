#include "sindex/lasso.hpp"

#include <cassert>
#include <cmath>
#include <sstream>

#include "sindex/error.hpp"

namespace sindex {

namespace {

// Dense products that skip zero coordinates of v; iterates are sparse most of the time.
template <class M>
void times_sparse(const M& a, const Vector& v, Vector& out)
{
    const Index nnz = (v.array() != 0.0).count();
    if (3 * nnz > v.size()) {
        out.noalias() = a * v;
        return;
    }
    out.setZero(a.rows());
    for (Index j = 0; j < v.size(); ++j)
        if (v[j] != 0.0) out.noalias() += a.col(j) * v[j];
}

double l1(const Vector& b) { return b.lpNorm<1>(); }

void prox(const Vector& v, double t, Vector& out)
{
    out.resize(v.size());
    for (Index j = 0; j < v.size(); ++j) out[j] = soft_threshold(v[j], t);
}

} // namespace

void SurrogateObjective::validate() const
{
    const Index pp = p();
    require(half.y.size() == half.x.rows(), ErrorCode::dimension_mismatch, "objective: response/covariate rows differ");
    require(scale > 0.0 && std::isfinite(scale), ErrorCode::invalid_argument, "objective: scale must be positive");
    if (has_history()) {
        require(quad_matrix.rows() == pp && quad_matrix.cols() == pp, ErrorCode::dimension_mismatch,
                "objective: quad_matrix is not p x p");
        require(quad_center.size() == pp, ErrorCode::dimension_mismatch, "objective: quad_center has wrong length");
    }
    if (linear_term.size() > 0) {
        require(linear_term.size() == pp && quad_center.size() == pp, ErrorCode::dimension_mismatch,
                "objective: linear_term needs a center of length p");
    }
    loss.validate();
    check_responses(loss, half.y);
}

namespace {

double evaluate(const SurrogateObjective& obj, const Vector& beta, bool with_linear)
{
    Vector eta;
    times_sparse(obj.half.x, beta, eta);
    double sum = 0.0;
    for (Index i = 0; i < eta.size(); ++i) sum += loss_value(obj.loss, obj.half.y[i], eta[i]);
    double v = 2.0 * sum;
    const bool linear = with_linear && obj.linear_term.size() > 0;
    if (with_linear) v += obj.constant;
    if (obj.has_history() || linear) {
        const Vector d = beta - obj.quad_center;
        if (obj.has_history()) {
            Vector qd;
            times_sparse(obj.quad_matrix, d, qd);
            v += 0.5 * d.dot(qd);
        }
        if (linear) v += obj.linear_term.dot(d);
    }
    return v / obj.scale;
}

} // namespace

double SurrogateObjective::value(const Vector& beta) const { return evaluate(*this, beta, true); }

double SurrogateObjective::anchored_value(const Vector& beta) const { return evaluate(*this, beta, false); }

double SurrogateObjective::value_and_gradient(const Vector& beta, Vector& grad) const
{
    Vector eta;
    times_sparse(half.x, beta, eta);
    Vector score(eta.size());
    double sum = 0.0;
    for (Index i = 0; i < eta.size(); ++i) {
        sum += loss_value(loss, half.y[i], eta[i]);
        score[i] = loss_score(loss, half.y[i], eta[i]);
    }
    grad.noalias() = 2.0 * (half.x.transpose() * score);
    double v = 2.0 * sum + constant;
    if (has_history() || linear_term.size() > 0) {
        const Vector d = beta - quad_center;
        if (has_history()) {
            Vector qd;
            times_sparse(quad_matrix, d, qd);
            v += 0.5 * d.dot(qd);
            grad += qd;
        }
        if (linear_term.size() > 0) {
            v += linear_term.dot(d);
            grad += linear_term;
        }
    }
    grad /= scale;
    return v / scale;
}

Vector SurrogateObjective::gradient(const Vector& beta) const
{
    Vector g;
    value_and_gradient(beta, g);
    return g;
}

double SurrogateObjective::lipschitz_bound(int power_iters) const
{
    auto spectral = [power_iters](auto&& apply, Index dim) {
        if (dim == 0) return 0.0;
        Vector v = Vector::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
        double est = 0.0;
        for (int it = 0; it < power_iters; ++it) {
            Vector w = apply(v);
            const double nw = w.norm();
            if (nw == 0.0) return 0.0;
            est = nw;
            v = w / nw;
        }
        // Power iteration underestimates; pad so the step stays safe before backtracking kicks in.
        return 1.05 * est;
    };
    const Index pp = p();
    double l = 0.0;
    if (half.n() > 0) {
        const double xx = spectral([this](const Vector& v) { return Vector(half.x.transpose() * (half.x * v)); }, pp);
        l += 2.0 * max_hessian_weight(loss) * xx;
    }
    if (has_history()) l += spectral([this](const Vector& v) { return Vector(quad_matrix * v); }, pp);
    return l / scale;
}

double soft_threshold(double x, double t)
{
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

double kkt_residual(const Vector& beta, const Vector& grad, double lambda)
{
    double r = 0.0;
    for (Index j = 0; j < beta.size(); ++j) {
        const double v = beta[j] != 0.0 ? std::abs(grad[j] + lambda * (beta[j] > 0.0 ? 1.0 : -1.0))
                                        : std::max(std::abs(grad[j]) - lambda, 0.0);
        r = std::max(r, v);
    }
    return r;
}

double lambda_max(const SurrogateObjective& obj)
{
    return obj.gradient(Vector::Zero(obj.p())).lpNorm<Eigen::Infinity>();
}

LassoFit fit_online_lasso(const SurrogateObjective& obj, double lambda, const Vector& warm_start,
                          const LassoOptions& opts, double step_hint)
{
    require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::invalid_argument, "lasso: lambda must be positive");
    const Index p = obj.p();
    Vector x = warm_start.size() == p ? warm_start : Vector::Zero(p);

    double t = step_hint;
    if (!(t > 0.0)) {
        const double lip = obj.lipschitz_bound(opts.power_iters);
        t = lip > 0.0 ? 1.0 / lip : 1.0;
    }

    Vector gx;
    double fx = obj.value_and_gradient(x, gx);
    double Fx = fx + lambda * l1(x);
    LassoFit fit;
    double kkt = kkt_residual(x, gx, lambda);
    if (kkt <= opts.kkt_tol) {
        fit.beta = x;
        fit.smooth = fx;
        fit.objective = Fx;
        fit.kkt = kkt;
        fit.step = t;
        return fit;
    }

    Vector y = x, gy = gx, z, gz, d;
    double fy = fx;
    double theta = 1.0;
    bool momentum = false;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        double fz = 0.0;
        for (;;) {
            prox(y - t * gy, t * lambda, z);
            fz = obj.value_and_gradient(z, gz);
            d = z - y;
            const double bound = fy + gy.dot(d) + d.squaredNorm() / (2.0 * t);
            if (fz <= bound + 1e-13 * std::abs(fy)) break;
            t *= opts.shrink;
            require(t > 1e-300, ErrorCode::convergence, "lasso: step size underflow in backtracking");
        }
        const double Fz = fz + lambda * l1(z);
        if (momentum && Fz > Fx) {
            // Restart from the last accepted iterate without momentum.
            theta = 1.0;
            momentum = false;
            y = x;
            fy = fx;
            gy = gx;
            continue;
        }
        assert(Fz <= Fx + 1e-12 * (1.0 + std::abs(Fx)));
        kkt = kkt_residual(z, gz, lambda);
        const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
        const double mom = (theta - 1.0) / theta_next;
        theta = theta_next;
        if (kkt <= opts.kkt_tol) {
            x.swap(z);
            fx = fz;
            Fx = Fz;
            ++it;
            break;
        }
        if (mom > 0.0) {
            y = z + mom * (z - x);
            fy = obj.value_and_gradient(y, gy);
            momentum = true;
        } else {
            y = z;
            fy = fz;
            gy = gz;
            momentum = false;
        }
        x.swap(z);
        gx.swap(gz);
        fx = fz;
        Fx = Fz;
    }
    if (kkt > opts.kkt_tol) {
        std::ostringstream msg;
        msg << "lasso did not converge: " << it << " iterations, KKT residual " << kkt << ", step " << t
            << ", lambda " << lambda;
        fail(ErrorCode::convergence, msg.str());
    }
    fit.beta = std::move(x);
    fit.smooth = fx;
    fit.objective = Fx;
    fit.kkt = kkt;
    fit.iterations = it;
    fit.step = t;
    return fit;
}

LassoFit fit_initial_lasso(BatchView half, const LossSpec& loss, double lambda, const LassoOptions& opts,
                           double batch_size)
{
    require(half.n() > 0, ErrorCode::invalid_argument, "lasso: empty half batch");
    SurrogateObjective obj(half, loss, batch_size > 0.0 ? batch_size : 2.0 * static_cast<double>(half.n()));
    obj.validate();
    return fit_online_lasso(obj, lambda, Vector::Zero(half.p()), opts);
}

} // namespace sindex
