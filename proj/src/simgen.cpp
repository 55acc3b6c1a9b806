#include "sindex/simgen.hpp"

#include <cmath>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/lognormal_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/student_t_distribution.hpp>
#include <boost/random/weibull_distribution.hpp>

#include "sindex/error.hpp"
#include "sindex/philox.hpp"

namespace sindex {

std::string model_kind_name(ModelKind k) { return k == ModelKind::model1 ? "model1" : "model2"; }

std::string error_dist_name(ErrorDist e)
{
    switch (e) {
    case ErrorDist::gaussian: return "gaussian";
    case ErrorDist::lognormal: return "lognormal";
    case ErrorDist::t3: return "t3";
    case ErrorDist::weibull: return "weibull";
    }
    return "?";
}

ErrorDist parse_error_dist(const std::string& s)
{
    for (ErrorDist e : {ErrorDist::gaussian, ErrorDist::lognormal, ErrorDist::t3, ErrorDist::weibull})
        if (s == error_dist_name(e)) return e;
    fail(ErrorCode::invalid_argument, "unknown error distribution '" + s + "'");
}

void ModelSpec::validate() const
{
    require(p >= 1, ErrorCode::invalid_argument, "p must be positive");
    require(s0 >= 1 && s0 <= p, ErrorCode::invalid_argument, "s0 must lie in [1, p]");
    if (cov == CovKind::toeplitz)
        require(rho > 0.0 && rho < 1.0, ErrorCode::invalid_argument, "toeplitz rho must lie in (0,1)");
}

std::string ModelSpec::cov_string() const
{
    if (cov == CovKind::identity) return "identity";
    char buf[64];
    std::snprintf(buf, sizeof buf, "toeplitz:%.17g", rho);
    return buf;
}

void ModelSpec::parse_cov(const std::string& s)
{
    if (s == "identity") {
        cov = CovKind::identity;
        return;
    }
    const std::string prefix = "toeplitz:";
    require(s.rfind(prefix, 0) == 0, ErrorCode::invalid_argument, "covariance must be identity or toeplitz:RHO");
    std::size_t used = 0;
    double r = 0.0;
    try {
        r = std::stod(s.substr(prefix.size()), &used);
    } catch (const std::exception&) {
        used = 0;
    }
    require(used > 0 && used == s.size() - prefix.size(), ErrorCode::invalid_argument,
            "cannot parse toeplitz rho in '" + s + "'");
    cov = CovKind::toeplitz;
    rho = r;
}

Simulator::Simulator(ModelSpec spec) : spec_(spec)
{
    spec_.validate();
    const Index p = spec_.p;
    sigma_ = Matrix::Identity(p, p);
    if (spec_.cov == CovKind::toeplitz) {
        for (Index i = 0; i < p; ++i)
            for (Index j = 0; j < p; ++j) sigma_(i, j) = std::pow(spec_.rho, static_cast<double>(std::abs(i - j)));
        Eigen::SelfAdjointEigenSolver<Matrix> es(sigma_);
        const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        sigma_half_ = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
    }
    Vector tilde = Vector::Zero(p);
    for (Index l = 0; l < spec_.s0; ++l) tilde[l] = static_cast<double>(l + 1);
    // ||Sigma^{1/2} b|| = sqrt(b^T Sigma b)
    beta0_ = tilde / std::sqrt(tilde.dot(sigma_ * tilde));
}

Batch Simulator::gen_batch(Index n, std::uint64_t replication, std::uint64_t batch) const
{
    require(n >= 1, ErrorCode::invalid_argument, "batch size must be positive");
    require(batch <= 0xFFFFFFFFu, ErrorCode::invalid_argument, "batch counter exceeds 32 bits");
    Philox4x32 eng(spec_.seed, replication, static_cast<std::uint32_t>(batch));
    boost::random::normal_distribution<double> normal;

    const Index p = spec_.p;
    Matrix z(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) z(i, j) = normal(eng);

    Batch b;
    b.index = static_cast<std::size_t>(batch);
    b.x = spec_.cov == CovKind::identity ? z : Matrix(z * sigma_half_);
    const Vector eta = b.x * beta0_;
    b.y.resize(n);
    if (spec_.model == ModelKind::model1) {
        boost::random::lognormal_distribution<double> lognormal(0.0, 1.0);
        boost::random::student_t_distribution<double> student(3.0);
        boost::random::weibull_distribution<double> weibull(0.5, 0.5);
        for (Index i = 0; i < n; ++i) {
            double eps = 0.0;
            switch (spec_.error) {
            case ErrorDist::gaussian: eps = normal(eng); break;
            case ErrorDist::lognormal: eps = lognormal(eng); break;
            case ErrorDist::t3: eps = student(eng); break;
            case ErrorDist::weibull: eps = weibull(eng); break;
            }
            b.y[i] = 3.0 * eta[i] + 10.0 * std::sin(eta[i]) + eps;
        }
    } else {
        for (Index i = 0; i < n; ++i) {
            const double prob = 1.0 / (1.0 + std::exp(-(eta[i] + std::sin(eta[i]))));
            boost::random::bernoulli_distribution<double> coin(prob);
            b.y[i] = coin(eng) ? 1.0 : 0.0;
        }
    }
    return b;
}

double sine_distance(const Vector& a, const Vector& b)
{
    require(a.size() == b.size(), ErrorCode::dimension_mismatch, "sine distance needs equal lengths");
    const double na = a.norm(), nb = b.norm();
    require(na > 0.0 && nb > 0.0, ErrorCode::domain, "sine distance of a zero vector (collapsed estimator)");
    const double c = a.dot(b) / (na * nb);
    return 1.0 - std::clamp(c, -1.0, 1.0);
}

RejectionRates fpr_tpr(std::span<const InferenceReport> reports, Index s0, double alpha)
{
    require(!reports.empty(), ErrorCode::invalid_argument, "no reports to aggregate");
    const Index p = reports.front().p_values.size();
    require(s0 >= 0 && s0 <= p, ErrorCode::invalid_argument, "s0 must lie in [0, p]");
    RejectionRates r;
    r.tpr = Vector::Zero(s0);
    for (const auto& rep : reports) {
        require(rep.p_values.size() == p, ErrorCode::dimension_mismatch, "reports differ in dimension");
        Index nulls = 0;
        for (Index l = s0; l < p; ++l) nulls += rep.p_values[l] <= alpha;
        if (p > s0) r.fpr += static_cast<double>(nulls) / static_cast<double>(p - s0);
        for (Index l = 0; l < s0; ++l) r.tpr[l] += rep.p_values[l] <= alpha;
    }
    const double m = static_cast<double>(reports.size());
    r.fpr /= m;
    r.tpr /= m;
    return r;
}

} // namespace sindex
