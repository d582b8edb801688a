#include <renormtrace.hpp>

#include <catch_amalgamated.hpp>

#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/zeta.hpp>

using namespace rt;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const Multiplier laplace_plus_one{{1.0, 0.0, 1.0}, 1.0};
constexpr int N = 560;

const Weight& Q()
{
    static Weight w = Weight::from_multiplier(laplace_plus_one, N);
    return w;
}

// sum_n exp(-eps (n^2 + 1)) via Poisson summation
double theta_oracle(double eps)
{
    double s = 1;
    for (int k = 1; k < 20; ++k) s += 2 * std::exp(-pi * pi * k * k / eps);
    return std::sqrt(pi / eps) * s * std::exp(-eps);
}

// sum_n (n^2 + 1)^{-z}, continued in z by the binomial series on n >= 2
double zeta_oracle(double z)
{
    double s = 1 + 2 * std::pow(2.0, -z);
    for (int k = 0; k < 60; ++k) {
        double c = 1;
        for (int i = 0; i < k; ++i) c *= (-z - i) / (i + 1);
        s += 2 * c * (boost::math::zeta(2 * z + 2 * k) - 1);
    }
    return s;
}

}  // namespace

TEST_CASE("heat trace against theta function")
{
    auto I = SpectralOperator::identity(N);
    for (double eps : {1e-3, 1e-2, 0.3}) {
        auto r = heat_trace(I, Q(), eps);
        CHECK_THAT(r.value.real(), WithinRel(theta_oracle(eps), 1e-13));
        CHECK(r.tail_bound < 1e-12);
    }
    auto small = Weight::from_multiplier(laplace_plus_one, 20);
    CHECK_THROWS_AS(heat_trace(SpectralOperator::identity(20), small, 1e-3), Error);
}

TEST_CASE("heat expansion of the identity")
{
    auto ex = heat_expansion(Pairing::identity(Q()));
    CHECK_THAT(ex.power_coeff(-0.5).real(), WithinAbs(std::sqrt(pi), 1e-6));
    CHECK_THAT(ex.power_coeff(0.5).real(), WithinAbs(-std::sqrt(pi), 1e-4));
    auto w = weighted_trace(SpectralOperator::identity(N), Q(), 0.0);
    CHECK_THAT(std::abs(w.value), WithinAbs(0.0, 1e-8));
}

TEST_CASE("residue of Q^{-1/2} on all routes")
{
    Multiplier inv_sqrt{{1.0, 0.0, 1.0}, -0.5};
    CHECK_THAT(wodzicki_residue_symbol(Symbol::multiplier(inv_sqrt)).real(), WithinAbs(2.0, 1e-14));
    auto A = complex_power(Q(), 0.5);
    auto z = wodzicki_residue_zeta(A, Q());
    CHECK_THAT(z.value.real(), WithinAbs(2.0, 1e-6));
    // heat route: log coefficient is -res/q
    auto ex = heat_expansion(Pairing::make(A, Q()));
    CHECK_THAT(ex.log_coeff(0.0).real(), WithinAbs(-1.0, 1e-6));
}

TEST_CASE("residue of a modulated operator")
{
    // (1 + cos(x)/2) Q^{-1/2}: residue 2 * mean = 2
    Multiplier inv_sqrt{{1.0, 0.0, 1.0}, -0.5};
    Symbol s = Symbol::multiplication(Trig::from_cos_sin({{0, 1, 0}, {1, 0.5, 0}})) * Symbol::multiplier(inv_sqrt);
    CHECK_THAT(wodzicki_residue_symbol(s).real(), WithinAbs(2.0, 1e-14));
    CHECK_THAT(wodzicki_residue_zeta(quantize(s, N), Q()).value.real(), WithinAbs(2.0, 1e-6));
    // order below -1 has no residue
    CHECK(wodzicki_residue_symbol(Symbol::multiplier({{1.0, 0.0, 1.0}, -1.0})) == cplx(0));
}

TEST_CASE("residue symbol of a first-order commutator")
{
    // [D, cos] = i sin has order 0 and zero residue
    Symbol D = Symbol::multiplier({{0.0, 1.0}, 1.0});
    Symbol c = Symbol::multiplication(Trig::from_cos_sin({{1, 1, 0}}));
    auto k = classical_expansion(commutator(D, c), 3);
    REQUIRE(k.components.size() >= 1);
    CHECK(k.order() == 0.0);
    CHECK(std::abs(k.components.front().plus(0.4) - cplx(0, std::sin(0.4))) < 1e-14);
    CHECK(wodzicki_residue_symbol(commutator(D, c)) == cplx(0));
}

TEST_CASE("direct zeta sum")
{
    auto p = Pairing::identity(Q());
    double z2 = pi / 2 / std::tanh(pi) + pi * pi / 2 / std::pow(std::sinh(pi), 2);
    auto r = zeta_trace(p, 2.0);
    CHECK_THAT(r.value.real(), WithinAbs(z2, 1e-8));
    CHECK(r.tail_bound * (1 + 1e-6) >= std::abs(r.value.real() - z2));
    // truncation error at z = 1 is covered by the reported tail bound
    auto r1 = zeta_trace_direct(p, 1.0);
    double z1 = pi / std::tanh(pi);
    CHECK(r1.tail_bound * (1 + 1e-6) >= std::abs(r1.value.real() - z1));
    CHECK_THROWS_AS(zeta_trace_direct(p, 0.4), Error);
}

TEST_CASE("zeta continuation below the abscissa")
{
    CHECK_THAT(zeta_oracle(2.0), WithinAbs(pi / 2 / std::tanh(pi) + pi * pi / 2 / std::pow(std::sinh(pi), 2), 1e-12));
    auto p = Pairing::identity(Q());
    for (double z : {0.25, -0.3}) {
        auto r = zeta_trace_mellin(p, z);
        CHECK_FALSE(r.pole);
        CHECK_THAT(r.value.real(), WithinAbs(zeta_oracle(z), 5e-7));
    }
    auto r0 = zeta_trace(p, 0.0);
    CHECK_THAT(r0.value.real(), WithinAbs(0.0, 1e-8));
}

TEST_CASE("zeta poles at one half and minus one half")
{
    auto r = zeta_trace(Pairing::identity(Q()), 0.5);
    REQUIRE(r.pole);
    CHECK_THAT(r.pole_residue.real(), WithinAbs(1.0, 1e-6));
    // -z sum n^{-2z-2} contributes 1/2 at z = -1/2
    auto m = zeta_trace(Pairing::identity(Q()), -0.5);
    REQUIRE(m.pole);
    CHECK_THAT(m.pole_residue.real(), WithinAbs(0.5, 1e-4));
}

TEST_CASE("zeta determinant of -d^2 + 1")
{
    auto d = renormalized_determinant(Q(), 0.0);
    double want = 2 * std::log(2 * std::sinh(pi));
    CHECK_THAT(d.log_value, WithinAbs(want, 1e-8));
    // changing mu shifts log det by mu times the log coefficient of the cutoff determinant
    auto d1 = renormalized_determinant(Q(), 1.0);
    CHECK_THAT(d1.log_value - d.log_value, WithinAbs(-d.expansion->log_coeff(0.0).real(), 1e-12));
}

TEST_CASE("cutoff determinant matches a direct sum of E_1")
{
    auto small = Weight::from_multiplier(laplace_plus_one, 40);
    double eps = 0.05, want = 0;
    for (int n = -40; n <= 40; ++n) want -= boost::math::expint(1, eps * (double(n) * n + 1));
    auto r = cutoff_determinant(small, eps);
    CHECK_THAT(r.log_value, WithinRel(want, 1e-11));
}

TEST_CASE("supertrace of isospectral blocks vanishes")
{
    auto s = Weight::super(Q(), Q());
    Mat I = Mat::Identity(s.size(), s.size());
    auto p = Pairing::make(I, s, 0.0);
    for (double eps : {1e-3, 0.1}) CHECK(std::abs(heat_trace(p, eps).value) < 1e-10);
}
