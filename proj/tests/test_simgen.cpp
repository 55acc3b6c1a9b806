#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sindex/error.hpp"
#include "sindex/philox.hpp"
#include "sindex/simgen.hpp"

using namespace sindex;

namespace {

InferenceReport report_with(const std::vector<double>& pv)
{
    InferenceReport r;
    r.p_values = Eigen::Map<const Vector>(pv.data(), static_cast<Index>(pv.size()));
    return r;
}

Vector errors_of(const Simulator& sim, const Batch& b)
{
    const Vector eta = b.x * sim.beta0();
    return b.y - 3.0 * eta - 10.0 * eta.array().sin().matrix();
}

} // namespace

TEST_CASE("philox known answers")
{
    using B = Philox4x32::Block;
    CHECK(Philox4x32::encrypt(B{0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::encrypt(B{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::encrypt(B{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("identity design with one signal normalises to a unit vector")
{
    ModelSpec spec;
    spec.p = 3;
    spec.s0 = 1;
    spec.cov = CovKind::identity;
    Simulator sim(spec);
    CHECK(sim.beta0()[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(sim.beta0()[1] == 0.0);
    CHECK(sim.beta0()[2] == 0.0);
}

TEST_CASE("beta0 has unit Sigma norm and increasing signal weights")
{
    for (double rho : {0.2, 0.5, 0.9}) {
        ModelSpec spec;
        spec.p = 30;
        spec.s0 = 5;
        spec.rho = rho;
        Simulator sim(spec);
        const Vector& b = sim.beta0();
        CHECK(b.dot(sim.sigma() * b) == doctest::Approx(1.0).epsilon(1e-12));
        for (Index l = 1; l < 5; ++l) CHECK(b[l] / b[0] == doctest::Approx(static_cast<double>(l + 1)));
        CHECK(b.tail(25).isZero(0.0));
    }
}

TEST_CASE("toeplitz covariance is reproduced empirically")
{
    ModelSpec spec;
    spec.p = 5;
    spec.s0 = 2;
    spec.rho = 0.5;
    spec.seed = 17;
    Simulator sim(spec);
    const Batch b = sim.gen_batch(50000, 0, 0);
    const Matrix centered = b.x.rowwise() - b.x.colwise().mean();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(b.n() - 1);
    CHECK((cov - sim.sigma()).cwiseAbs().maxCoeff() <= 0.05);
    for (Index l = 0; l < 5; ++l) CHECK(std::abs(cov(l, l) / sim.sigma()(l, l) - 1.0) <= 0.05);
}

TEST_CASE("generation is deterministic per seed, replication and batch")
{
    ModelSpec spec;
    spec.p = 12;
    spec.s0 = 3;
    spec.seed = 5;
    Simulator a(spec), b(spec);
    const Batch x1 = a.gen_batch(40, 2, 7);
    const Batch x2 = b.gen_batch(40, 2, 7);
    CHECK(x1.x == x2.x);
    CHECK(x1.y == x2.y);
    CHECK(x1.index == 7);
    CHECK(a.gen_batch(40, 2, 8).x != x1.x);
    CHECK(a.gen_batch(40, 3, 7).x != x1.x);
    spec.seed = 6;
    CHECK(Simulator(spec).gen_batch(40, 2, 7).x != x1.x);
}

TEST_CASE("model 1 error distributions have their textbook moments")
{
    ModelSpec spec;
    spec.p = 4;
    spec.s0 = 2;
    spec.cov = CovKind::identity;
    const Index n = 200000;

    spec.error = ErrorDist::gaussian;
    Vector e = errors_of(Simulator(spec), Simulator(spec).gen_batch(n, 0, 0));
    CHECK(std::abs(e.mean()) < 0.01);
    CHECK(std::abs(e.squaredNorm() / n - 1.0) < 0.02);

    spec.error = ErrorDist::lognormal;
    e = errors_of(Simulator(spec), Simulator(spec).gen_batch(n, 0, 0));
    CHECK(e.minCoeff() > 0.0);
    CHECK(std::abs(e.array().log().mean()) < 0.01);
    CHECK(std::abs(e.array().log().square().mean() - 1.0) < 0.02);

    spec.error = ErrorDist::t3;
    e = errors_of(Simulator(spec), Simulator(spec).gen_batch(n, 0, 0));
    // t3 cdf at 1: 1/2 + (atan(1/sqrt3) + sqrt3/4) / pi
    const double t_cdf1 = 0.5 + (std::atan(1.0 / std::sqrt(3.0)) + (std::sqrt(3.0) / 4.0)) / M_PI;
    const double inside = (e.array().abs() <= 1.0).cast<double>().mean();
    CHECK(std::abs(inside - (2.0 * t_cdf1 - 1.0)) < 0.01);

    spec.error = ErrorDist::weibull;
    e = errors_of(Simulator(spec), Simulator(spec).gen_batch(n, 0, 0));
    // shape 0.5, scale 0.5: mean 0.5 * Gamma(3) = 1, P(e > 0.5) = exp(-1)
    CHECK(e.minCoeff() >= 0.0);
    CHECK(std::abs(e.mean() - 1.0) < 0.05);
    CHECK(std::abs((e.array() > 0.5).cast<double>().mean() - std::exp(-1.0)) < 0.01);
}

TEST_CASE("model 2 responses are binary and follow the link")
{
    ModelSpec spec;
    spec.model = ModelKind::model2;
    spec.p = 6;
    spec.s0 = 3;
    spec.cov = CovKind::identity;
    Simulator sim(spec);
    const Batch b = sim.gen_batch(100000, 1, 0);
    for (Index i = 0; i < b.n(); ++i) REQUIRE((b.y[i] == 0.0 || b.y[i] == 1.0));
    CHECK(b.y.mean() > 0.0);
    CHECK(b.y.mean() < 1.0);
    const Vector eta = b.x * sim.beta0();
    double expected = 0.0;
    for (Index i = 0; i < b.n(); ++i) expected += 1.0 / (1.0 + std::exp(-(eta[i] + std::sin(eta[i]))));
    expected /= static_cast<double>(b.n());
    CHECK(std::abs(b.y.mean() - expected) < 0.005);
}

TEST_CASE("model spec validation")
{
    ModelSpec spec;
    spec.p = 3;
    spec.s0 = 4;
    CHECK_THROWS_AS(Simulator{spec}, Error);
    spec.s0 = 2;
    spec.rho = 1.0;
    CHECK_THROWS_AS(Simulator{spec}, Error);
    spec.rho = 0.5;
    CHECK_THROWS_AS(Simulator(spec).gen_batch(0, 0, 0), Error);
    CHECK_THROWS_AS(spec.parse_cov("toeplitz:x"), Error);
    spec.parse_cov("toeplitz:0.25");
    CHECK(spec.rho == 0.25);
    CHECK(spec.cov_string() == "toeplitz:0.25");
    CHECK_THROWS_AS(parse_error_dist("cauchy"), Error);
}

TEST_CASE("sine distance examples and scale freeness")
{
    Vector a(3), b(3);
    a << 1.0, 2.0, -0.5;
    CHECK(std::abs(sine_distance(a, a)) <= 1e-15);
    CHECK(sine_distance(a, -a) == doctest::Approx(2.0));
    b << 2.0, -1.0, 0.0;
    CHECK(sine_distance(a, b) == doctest::Approx(1.0));
    std::mt19937_64 rng(8);
    for (int t = 0; t < 50; ++t) {
        const Vector u = oracle::random_normal(rng, 7, 1).col(0), v = oracle::random_normal(rng, 7, 1).col(0);
        const double d = sine_distance(u, v);
        CHECK(d >= 0.0);
        CHECK(d <= 2.0);
        CHECK(sine_distance(3.7 * u, v) == doctest::Approx(d).epsilon(1e-12));
        CHECK(sine_distance(u, 0.01 * v) == doctest::Approx(d).epsilon(1e-12));
    }
    CHECK_THROWS_AS(sine_distance(Vector::Zero(3), a), Error);
    CHECK_THROWS_AS(sine_distance(Vector::Ones(2), a), Error);
}

TEST_CASE("rejection rates")
{
    std::vector<InferenceReport> all0{report_with({0, 0, 0, 0}), report_with({0, 0, 0, 0})};
    auto r = fpr_tpr(all0, 2, 0.05);
    CHECK(r.fpr == 1.0);
    CHECK(r.tpr == Vector::Ones(2));
    std::vector<InferenceReport> all1{report_with({1, 1, 1, 1})};
    r = fpr_tpr(all1, 2, 0.05);
    CHECK(r.fpr == 0.0);
    CHECK(r.tpr == Vector::Zero(2));

    // signals 0,1; nulls 2..5. rep A rejects 0 and null 2; rep B rejects 0, 1 and nulls 3, 4, 5.
    std::vector<InferenceReport> hand{report_with({0.01, 0.2, 0.05, 0.5, 0.9, 0.051}),
                                      report_with({0.0, 0.04, 0.3, 0.001, 0.02, 0.05})};
    r = fpr_tpr(hand, 2, 0.05);
    CHECK(r.fpr == doctest::Approx((1.0 / 4.0 + 3.0 / 4.0) / 2.0));
    CHECK(r.tpr[0] == 1.0);
    CHECK(r.tpr[1] == 0.5);

    CHECK_THROWS_AS(fpr_tpr(std::vector<InferenceReport>{}, 1, 0.05), Error);
    std::vector<InferenceReport> ragged{report_with({0, 0}), report_with({0, 0, 0})};
    CHECK_THROWS_AS(fpr_tpr(ragged, 1, 0.05), Error);
}
