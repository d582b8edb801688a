#include <renormtrace.hpp>

#include <catch_amalgamated.hpp>

using namespace rt;
using Catch::Matchers::WithinAbs;

namespace {

// 3 eps^{-1/2} + 0.7 log eps + 1.25 + 0.4 eps^{1/2} - 0.1 eps + 0.02 eps log eps
cplx model(double e)
{
    return 3.0 / std::sqrt(e) + 0.7 * std::log(e) + 1.25 + 0.4 * std::sqrt(e) - 0.1 * e + 0.02 * e * std::log(e);
}

std::vector<cplx> sampled(const std::vector<double>& eps, cplx (*f)(double))
{
    std::vector<cplx> v;
    for (double e : eps) v.push_back(f(e));
    return v;
}

}  // namespace

TEST_CASE("exponent lattice")
{
    ExponentLattice L{2, 1, 0.0};
    CHECK(L.lambda(0) == -0.5);
    CHECK(L.lambda(1) == 0.0);
    CHECK(L.zero_index() == 1);
    ExponentLattice H{2, 1, -0.5};
    CHECK(H.zero_index() == -1);
    ExponentLattice K{1, 1, 2.0};
    CHECK(K.lambda(0) == -3.0);
    CHECK(K.zero_index() == 3);
}

TEST_CASE("eps grid is geometric with the requested density")
{
    EpsGrid g;
    auto p = g.points();
    REQUIRE(p.size() == 49);
    CHECK_THAT(p.front(), WithinAbs(1e-4, 1e-18));
    CHECK_THAT(p.back(), WithinAbs(1e-1, 1e-15));
    for (size_t i = 2; i < p.size(); ++i) CHECK_THAT(p[i] / p[i - 1], WithinAbs(p[1] / p[0], 1e-12));
    CHECK_THROWS_AS(geometric_grid(1e-3, 1e-4, 10), Error);
}

TEST_CASE("fit recovers known coefficients")
{
    auto eps = EpsGrid{}.points();
    auto ex = fit_expansion(eps, sampled(eps, model), {2, 1, 0.0});
    CHECK_THAT(ex.coeff_a(0).real(), WithinAbs(3.0, 1e-7));
    CHECK_THAT(ex.log_coeff(0.0).real(), WithinAbs(0.7, 1e-7));
    CHECK_THAT(ex.power_coeff(0.0).real(), WithinAbs(1.25, 1e-7));
    CHECK_THAT(ex.power_coeff(0.5).real(), WithinAbs(0.4, 1e-5));
    CHECK_THAT(ex.log_coeff(1.0).real(), WithinAbs(0.02, 1e-4));
    CHECK(ex.residual < 1e-10);
    for (double e : {2e-4, 3e-3, 5e-2}) CHECK(std::abs(evaluate(ex, e) - model(e)) < 1e-10 * std::abs(model(e)));
}

TEST_CASE("renormalized limit subtracts mu times the log coefficient")
{
    auto eps = EpsGrid{}.points();
    auto ex = fit_expansion(eps, sampled(eps, model), {2, 1, 0.0});
    CHECK_THAT(renormalized_limit(ex, 0.0).real(), WithinAbs(1.25, 1e-7));
    CHECK_THAT(renormalized_limit(ex, 2.0).real(), WithinAbs(1.25 - 1.4, 1e-7));
    CHECK_THAT(renormalized_limit(ex, euler_gamma).real(), WithinAbs(1.25 - 0.7 * euler_gamma, 1e-7));
    // dependence on mu is affine with slope -b_0
    double s = (renormalized_limit(ex, 1.0) - renormalized_limit(ex, 0.0)).real();
    CHECK_THAT(s, WithinAbs(-ex.log_coeff(0.0).real(), 1e-15));
}

TEST_CASE("complex samples fit componentwise")
{
    auto eps = EpsGrid{}.points();
    std::vector<cplx> v;
    for (double e : eps) v.push_back(cplx(0, 2) / std::sqrt(e) + cplx(0.5, -0.25));
    auto ex = fit_expansion(eps, v, {2, 1, 0.0});
    CHECK(std::abs(ex.coeff_a(0) - cplx(0, 2)) < 1e-8);
    CHECK(std::abs(renormalized_limit(ex, 0) - cplx(0.5, -0.25)) < 1e-8);
}

TEST_CASE("extended precision agrees with double")
{
    auto eps = EpsGrid{}.points();
    FitOptions o;
    o.extended = true;
    auto a = fit_expansion(eps, sampled(eps, model), {2, 1, 0.0});
    auto b = fit_expansion(eps, sampled(eps, model), {2, 1, 0.0}, o);
    CHECK(std::abs(renormalized_limit(a, 0.3) - renormalized_limit(b, 0.3)) < 1e-8);
}

TEST_CASE("identically zero samples fit to zero")
{
    auto eps = EpsGrid{}.points();
    std::vector<cplx> v(eps.size(), 0.0);
    auto ex = fit_expansion(eps, v, {2, 1, 0.0});
    CHECK(std::abs(renormalized_limit(ex, 1.0)) == 0.0);
}

TEST_CASE("fit input validation")
{
    auto eps = EpsGrid{}.points();
    auto v = sampled(eps, model);
    ExponentLattice L{2, 1, 0.0};

    auto short_eps = geometric_grid(1e-3, 1e-1, 10);
    CHECK_THROWS_AS(fit_expansion(short_eps, sampled(short_eps, model), L), FitError);

    auto narrow = geometric_grid(1e-2, 5e-2, 60);
    CHECK_THROWS_AS(fit_expansion(narrow, sampled(narrow, model), L), FitError);

    auto uneven = eps;
    uneven[5] *= 1.01;
    CHECK_THROWS_AS(fit_expansion(uneven, v, L), FitError);

    auto bad = v;
    bad.pop_back();
    CHECK_THROWS_AS(fit_expansion(eps, bad, L), FitError);

    // eps^{-5/4} is more singular than anything on the lattice
    std::vector<cplx> off;
    for (double e : eps) off.push_back(std::pow(e, -1.25) + 1.0);
    CHECK_THROWS_AS(fit_expansion(eps, off, L), FitError);
}

TEST_CASE("integer lattice keeps log slots for non-positive integer exponents")
{
    auto eps = EpsGrid{}.points();
    std::vector<cplx> v;
    for (double e : eps) v.push_back(2.0 / e - 0.5 * std::log(e) + 4.0 + 3.0 * e);
    auto ex = fit_expansion(eps, v, {1, 1, 0.0});
    CHECK_THAT(ex.power_coeff(-1.0).real(), WithinAbs(2.0, 1e-9));
    CHECK_THAT(ex.log_coeff(0.0).real(), WithinAbs(-0.5, 1e-8));
    CHECK_THAT(renormalized_limit(ex, 0.0).real(), WithinAbs(4.0, 2e-7));
}
