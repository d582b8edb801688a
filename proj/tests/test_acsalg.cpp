#include <renormtrace.hpp>

#include <catch_amalgamated.hpp>

#include <random>

using namespace rt;
using Catch::Matchers::WithinAbs;

TEST_CASE("points are complex structures")
{
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
        auto p = t == 0 ? ACPoint::standard() : ACPoint::random(rng);
        CHECK((p.J * p.J + Mat2::Identity()).norm() < 1e-12 * std::max(1.0, p.J.squaredNorm()));
        CHECK_THAT(p.J.determinant(), WithinAbs(1.0, 1e-12));
        // orientation: {e1, J e1} positively oriented
        Mat2 B;
        B.col(0) = Eigen::Vector2d(1, 0);
        B.col(1) = p.J.col(0);
        CHECK(B.determinant() > 0);
    }
    CHECK_THROWS_AS(ACPoint::make(0.3, 0.5), Error);
}

TEST_CASE("tangent projection anticommutes with J")
{
    std::mt19937_64 rng(2);
    for (int t = 0; t < 50; ++t) {
        auto p = ACPoint::random(rng);
        auto H = TangentTensor::random(p, rng).H;
        CHECK((H * p.J + p.J * H).norm() < 1e-12 * std::max(1.0, p.J.squaredNorm()));
        CHECK_THAT(H.norm(), WithinAbs(1.0, 1e-14));
        // projecting twice is idempotent
        CHECK((TangentTensor::project(H, p).H - H).norm() < 1e-12 * p.J.squaredNorm());
    }
    Mat2 I = Mat2::Identity();
    CHECK_THROWS_AS(require_tangent(I, ACPoint::standard()), Error);
}

TEST_CASE("complexified trace anchors")
{
    auto p = ACPoint::standard();
    Mat2 I = Mat2::Identity();
    CHECK(complexified_trace(I, p) == cplx(1, 0));
    CHECK(complexified_trace(p.J, p) == cplx(0, 1));
    CHECK(complexified_trace(I, p, TraceConvention::unnormalized) == cplx(2, 0));
    CHECK(complexified_trace(p.J, p, TraceConvention::unnormalized) == cplx(0, -2));
    Mat2 K;
    K << 1, 0, 0, -1;
    CHECK_THROWS_AS(complexified_trace(K, p), Error);
}

TEST_CASE("complexified trace is the complex scalar of a J-linear map")
{
    // a I + b J acts on (R^2, J) as multiplication by a + ib
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int t = 0; t < 50; ++t) {
        auto p = ACPoint::random(rng);
        double a = u(rng), b = u(rng);
        Mat2 A = a * Mat2::Identity() + b * p.J;
        cplx z = complexified_trace(A, p);
        CHECK_THAT(z.real(), WithinAbs(a, 1e-12));
        CHECK_THAT(z.imag(), WithinAbs(b, 1e-12));
    }
}

TEST_CASE("connection compatibility and curvature identities")
{
    std::mt19937_64 rng(9);
    for (int t = 0; t < 200; ++t) {
        auto p = ACPoint::random(rng);
        Mat2 M = TangentTensor::random(p, rng).H, N = TangentTensor::random(p, rng).H, H = TangentTensor::random(p, rng).H;
        CHECK(compatibility_plus_defect(N, p) < 1e-14);
        CHECK(compatibility_minus_defect(N, H, p) < 1e-14);
        CHECK(lemma10_plus_identity(M, N, p) < 1e-14);
        Mat2 c = lemma10_minus_curvature(M, N, H);
        CHECK(scaled_defect(p, 2, c, -minus_curvature_direct(M, N, H, p)) < 1e-14);
        CHECK((c + lemma10_minus_curvature(N, M, H)).norm() < 1e-14);
    }
}

TEST_CASE("curvature integrand has the gamma I - delta J pattern")
{
    auto p = ACPoint::standard();
    Mat2 M, N;
    M << 1, 0, 0, -1;
    N << 0, 1, 1, 0;
    auto r = prop11_integrand(M, N, p);
    // [M, N] = 2 [[0, 1], [-1, 0]] = -2 J, so J[M, N] = 2 I
    CHECK_THAT(r.gamma, WithinAbs(2.0, 1e-15));
    CHECK_THAT(r.delta, WithinAbs(0.0, 1e-15));
    CHECK(r.pattern_defect < 1e-15);
    CHECK((r.plus - 0.5 * Mat2::Identity()).norm() < 1e-15);
    auto z = prop11_integrand(M, M, p);
    CHECK(z.plus.norm() + z.minus.norm() == 0.0);
}

TEST_CASE("randomized identity sweep")
{
    auto r = acs_identities(2000, 2024);
    CHECK(r.trials == 2000);
    for (double d : {r.lemma10_plus, r.minus_antisymmetry, r.minus_tangent, r.minus_vs_direct, r.compat_plus, r.compat_minus,
                     r.even_commute, r.odd_anticommute, r.prop11_pattern, r.prop11_zero_diag})
        CHECK(d <= 1e-14);
    CHECK(r.max_abs_gamma > 0.1);
    // same seed, same report
    auto s = acs_identities(2000, 2024);
    CHECK(s.compat_minus == r.compat_minus);
}
