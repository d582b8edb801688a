#include <renormtrace.hpp>

#include <catch_amalgamated.hpp>

#include <unsupported/Eigen/MatrixFunctions>

using namespace rt;
using Catch::Matchers::WithinAbs;

namespace {

// discrete Fourier coefficient of f from samples, exact for trig polynomials of low degree
cplx fourier_coeff(const Trig& f, int k, int M = 64)
{
    cplx s = 0;
    for (int j = 0; j < M; ++j) {
        double x = 2 * pi * j / M;
        s += f(x) * std::exp(cplx(0, -k * x));
    }
    return s / double(M);
}

double maxabs(const Mat& a) { return a.cwiseAbs().maxCoeff(); }

Mat random_hermitian(int n, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = cplx(g(rng), g(rng));
    return a + a.adjoint();
}

}  // namespace

TEST_CASE("trig from cos/sin evaluates pointwise")
{
    auto f = Trig::from_cos_sin({{0, 0.3, 0}, {1, 1.0, -0.5}, {3, 0, 2.0}});
    for (double x : {0.0, 0.7, 2.1, 5.9}) {
        double want = 0.3 + std::cos(x) - 0.5 * std::sin(x) + 2 * std::sin(3 * x);
        CHECK_THAT(f(x).real(), WithinAbs(want, 1e-14));
        CHECK_THAT(f(x).imag(), WithinAbs(0, 1e-14));
    }
    CHECK(f.max_mode() == 3);
    CHECK(f.mean() == cplx(0.3));
}

TEST_CASE("multiplication operator entries are Fourier coefficients")
{
    auto f = Trig::from_cos_sin({{0, 1.5, 0}, {1, 0.4, 0.9}, {2, -0.2, 0.1}});
    int N = 10;
    auto A = quantize(Symbol::multiplication(f), N);
    CHECK(A.bandwidth == 2);
    for (int m = -N; m <= N; ++m)
        for (int n = -N; n <= N; ++n) {
            cplx want = std::abs(m - n) <= 2 ? fourier_coeff(f, m - n) : cplx(0);
            CHECK(std::abs(A.at(m, n) - want) < 1e-14);
        }
    CHECK(A.self_adjoint);
}

TEST_CASE("Fourier multiplier is diagonal with m(n)")
{
    Multiplier m{{1.0, 0.5, 2.0}, 0.5};
    CHECK(m.degree() == 2);
    CHECK(m.order() == 1.0);
    int N = 12;
    auto A = quantize(Symbol::multiplier(m), N);
    for (int n = -N; n <= N; ++n) CHECK_THAT(A.at(n, n).real(), WithinAbs(std::sqrt(1 + 0.5 * n + 2.0 * n * n), 1e-13));
    CHECK(maxabs(A.entries - Mat(A.entries.diagonal().asDiagonal())) == 0.0);
}

TEST_CASE("symbol product quantizes to the matrix product away from the cutoff")
{
    auto f = Trig::from_cos_sin({{1, 1.0, 0.0}});
    auto g = Trig::from_cos_sin({{2, 0.0, 1.0}});
    Multiplier D{{0.5, 1.0}, 1.0};
    Symbol s = Symbol::multiplication(f) * Symbol::multiplier(D) * Symbol::multiplication(g);
    int N = 20;
    Mat want = quantize(Symbol::multiplication(f), N).entries * quantize(Symbol::multiplier(D), N).entries *
               quantize(Symbol::multiplication(g), N).entries;
    auto got = quantize(s, N);
    // interior block untouched by truncation
    int lo = 3, len = 2 * N + 1 - 6;
    CHECK(maxabs(got.entries.block(lo, lo, len, len) - want.block(lo, lo, len, len)) < 1e-13);
}

TEST_CASE("compose agrees with dense multiplication")
{
    int N = 40;
    auto A = quantize(Symbol::multiplication(Trig::from_cos_sin({{1, 1, 0}, {2, 0, 1}})), N);
    auto B = quantize(Symbol::multiplier({{1.0, 0.0, 1.0}, 1.0}) * Symbol::multiplication(Trig::from_cos_sin({{3, 0.5, 0}})), N);
    auto C = compose(A, B);
    CHECK(C.bandwidth == A.bandwidth + B.bandwidth);
    CHECK(maxabs(C.entries - A.entries * B.entries) < 1e-11);

    std::mt19937_64 rng(3);
    auto X = SpectralOperator::dense(random_hermitian(2 * N + 1, rng), N, 0.0);
    CHECK(maxabs(compose(A, X).entries - A.entries * X.entries) < 1e-11);
}

TEST_CASE("graded bracket anticommutes odd pairs only")
{
    int N = 6;
    std::mt19937_64 rng(5);
    auto A = SpectralOperator::dense(random_hermitian(2 * N + 1, rng), N, 0.0);
    auto B = SpectralOperator::dense(random_hermitian(2 * N + 1, rng), N, 0.0);
    Mat ab = A.entries * B.entries, ba = B.entries * A.entries;
    CHECK(maxabs(bracket(A, B, true).entries - (ab - ba)) < 1e-12);
    A.parity = B.parity = Parity::odd;
    CHECK(maxabs(bracket(A, B, true).entries - (ab + ba)) < 1e-12);
    CHECK(maxabs(bracket(A, B, false).entries - (ab - ba)) < 1e-12);
    CHECK(bracket(A, B, true).parity == Parity::even);
}

TEST_CASE("cutoff mismatch is rejected")
{
    auto A = SpectralOperator::identity(4), B = SpectralOperator::identity(5);
    CHECK_THROWS_AS(compose(A, B), Error);
    CHECK_THROWS_AS(A + B, Error);
}

TEST_CASE("iterated bracket equals nested commutators with Q")
{
    int N = 5, M = 2 * N + 1;
    std::mt19937_64 rng(11);
    Mat H = random_hermitian(M, rng);
    H += (maxabs(H) * M + 1.0) * Mat::Identity(M, M);
    auto Q = Weight::from_matrix(H, 2.0, N);
    auto A = SpectralOperator::dense(random_hermitian(M, rng), N, 0.5);
    Mat Qd = Q.basis * Q.eigenvalues.cast<cplx>().asDiagonal() * Q.basis.adjoint();
    Mat nested = A.entries;
    for (int j = 0; j <= 3; ++j) {
        auto b = iterated_bracket(A, Q, j);
        CHECK(maxabs(b.entries - nested) < 1e-9 * std::max(1.0, maxabs(nested)));
        CHECK(b.order == 0.5 + j);
        nested = Qd * nested - nested * Qd;
    }
    CHECK_THROWS_AS(iterated_bracket(A, Q, -1), Error);
}

TEST_CASE("heat operator of a matrix weight is the matrix exponential")
{
    int N = 4, M = 2 * N + 1;
    std::mt19937_64 rng(17);
    Mat H = random_hermitian(M, rng);
    H += (maxabs(H) * M + 1.0) * Mat::Identity(M, M);
    auto Q = Weight::from_matrix(H, 2.0, N);
    double eps = 0.05;
    Mat want = (-eps * H).exp();
    CHECK(maxabs(heat_operator(Q, eps).entries - want) < 1e-12);
    CHECK_THROWS_AS(heat_operator(Q, 0.0), Error);
}

TEST_CASE("tail bound matches the direct tail sum")
{
    int N = 30;
    auto Q = Weight::from_multiplier({{1.0, 0.0, 1.0}, 1.0}, N);
    for (double eps : {0.01, 0.1}) {
        double direct = 0;
        for (int n = N + 1; n < 5000; ++n) direct += 2 * std::exp(-eps * (double(n) * n + 1));
        CHECK_THAT(tail_bound(Q, eps), WithinAbs(direct, 1e-12 * direct + 1e-300));
    }
    // growth is a lower bound on the eigenvalues beyond N
    for (int n = N + 1; n < N + 50; ++n) CHECK(Q.growth(n) <= double(n) * n + 1 + 1e-9);
}

TEST_CASE("weight validation")
{
    CHECK_THROWS_AS(Weight::from_multiplier({{-1.0, 0.0, 1.0}, 1.0}, 8), Error);
    CHECK_THROWS_AS(Weight::from_multiplier({{1.0}, 1.0}, 8), Error);
    Mat H = -Mat::Identity(3, 3);
    CHECK_THROWS_AS(Weight::from_matrix(H, 2.0, 1), Error);
}

TEST_CASE("super weight stacks blocks with grading")
{
    int N = 3;
    auto p = Weight::from_multiplier({{1.0, 0.0, 1.0}, 1.0}, N);
    auto m = Weight::from_multiplier({{2.0, 0.0, 1.0}, 1.0}, N);
    auto s = Weight::super(p, m);
    REQUIRE(s.size() == 2 * (2 * N + 1));
    CHECK(s.grading.head(2 * N + 1).minCoeff() == 1.0);
    CHECK(s.grading.tail(2 * N + 1).maxCoeff() == -1.0);
    CHECK(s.eigenvalues(2 * N + 1) == 2.0 + N * N);
    CHECK(s.diagonal());
    auto q4 = Weight::from_multiplier({{1.0, 0.0, 0.0, 0.0, 1.0}, 1.0}, N);
    CHECK_THROWS_AS(Weight::super(p, q4), Error);
}

TEST_CASE("complex power and log of a diagonal weight")
{
    int N = 6;
    auto Q = Weight::from_multiplier({{1.0, 0.0, 1.0}, 1.0}, N);
    auto P = complex_power(Q, cplx(0.5, 0.2));
    auto L = log_weight(Q);
    for (int n = -N; n <= N; ++n) {
        double l = 1.0 + n * n;
        CHECK(std::abs(P.at(n, n) - std::pow(cplx(l), -cplx(0.5, 0.2))) < 1e-14);
        CHECK_THAT(L.at(n, n).real(), WithinAbs(std::log(l), 1e-14));
    }
    CHECK(P.order == -1.0);
}

TEST_CASE("supertrace of a super operator")
{
    int N = 2;
    auto p = SpectralOperator::identity(N) * cplx(2.0);
    auto m = SpectralOperator::identity(N);
    auto S = SuperOperator::even(p, m);
    CHECK(S.supertrace() == cplx(2.0 * (2 * N + 1) - (2 * N + 1)));
    auto O = SuperOperator::odd(SpectralOperator::identity(N), SpectralOperator::identity(N));
    CHECK(O.full().parity == Parity::odd);
    CHECK(O.supertrace() == cplx(0));
}
