#pragma once

#include "renorm.hpp"
#include "specops.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>

#include <optional>

namespace rt {

enum class Route { heat, zeta, symbol };

inline const char* route_name(Route r)
{
    switch (r) {
    case Route::heat: return "heat";
    case Route::zeta: return "zeta";
    default: return "symbol";
    }
}

struct TraceReport {
    cplx value = 0;
    Route route = Route::heat;
    double tail_bound = 0;
    std::optional<AsymptoticExpansion> expansion;
    double mu = 0;
    bool pole = false;
    cplx pole_residue = 0;
};

struct RenormOptions {
    EpsGrid grid;
    FitOptions fit;
    double tail_tolerance = 1e-12;
};

// diagonal of A in the eigenbasis of Q, with the grading signs of Q
struct Pairing {
    CVec d;
    RVec lambda;
    RVec grading;
    double order = 0;
    double q = 2;
    int dim = 1;
    int cutoff_N = 0;
    std::function<double(double)> growth;

    static Pairing make(const Mat& A, const Weight& Q, double order)
    {
        if (A.rows() != Q.size()) throw Error("operator and weight sizes differ");
        return {Q.eig_diag(A), Q.eigenvalues, Q.grading, order, Q.order_q, Q.dim_M, Q.cutoff_N, Q.growth};
    }

    static Pairing make(const SpectralOperator& A, const Weight& Q) { return make(A.entries, Q, A.order); }

    static Pairing identity(const Weight& Q)
    {
        return {CVec::Ones(Q.size()), Q.eigenvalues, Q.grading, 0.0, Q.order_q, Q.dim_M, Q.cutoff_N, Q.growth};
    }

    cplx heat(double eps) const
    {
        // long double accumulation; double sums lose ~1e-8 in the fitted constant term
        long double re = 0, im = 0;
        for (Eigen::Index k = 0; k < d.size(); ++k) {
            long double w = grading(k) * std::exp(-(long double)eps * lambda(k));
            re += w * d(k).real();
            im += w * d(k).imag();
        }
        return {double(re), double(im)};
    }

    // double accumulation, for quadrature where 1e-15 relative suffices
    cplx heat_fast(double eps) const
    {
        cplx s = 0;
        for (Eigen::Index k = 0; k < d.size(); ++k) s += grading(k) * d(k) * std::exp(-eps * lambda(k));
        return s;
    }

    double tail(double eps) const
    {
        Weight w;
        w.cutoff_N = cutoff_N;
        w.growth = growth;
        w.grading = grading;
        return d.cwiseAbs().maxCoeff() * tail_bound(w, eps, order);
    }

    ExponentLattice lattice() const
    {
        if (!is_integer(q)) throw Error("weight order must be an integer for the heat lattice");
        return {int(std::round(q)), dim, order};
    }
};

inline TraceReport heat_trace(const Pairing& p, double eps, double tail_tol = 1e-12)
{
    if (eps <= 0) throw Error("heat_trace requires eps > 0");
    TraceReport r;
    r.value = p.heat(eps);
    r.tail_bound = p.tail(eps);
    if (r.tail_bound > tail_tol * std::max(1.0, std::abs(r.value)))
        throw Error("heat trace tail bound " + std::to_string(r.tail_bound) + " above tolerance at this cutoff");
    return r;
}

inline TraceReport heat_trace(const SpectralOperator& A, const Weight& Q, double eps, double tail_tol = 1e-12)
{
    return heat_trace(Pairing::make(A, Q), eps, tail_tol);
}

// str(A e^{-eps Q}) with Q = Q+ (+) Q-
inline TraceReport heat_supertrace(const SuperOperator& A, const Weight& Qsuper, double eps, double tail_tol = 1e-12)
{
    return heat_trace(Pairing::make(A.assemble(), Qsuper, A.full().order), eps, tail_tol);
}

inline AsymptoticExpansion heat_expansion(const Pairing& p, const RenormOptions& opt = {})
{
    auto eps = opt.grid.points();
    double tb = p.tail(eps.front());
    auto vals = sample(eps, [&](double e) { return p.heat(e); });
    double scale = 0;
    for (auto& v : vals) scale = std::max(scale, std::abs(v));
    if (tb > opt.tail_tolerance * std::max(1.0, scale))
        throw Error("cutoff too small for the eps grid: tail bound " + std::to_string(tb));
    return fit_expansion(eps, vals, p.lattice(), opt.fit);
}

inline TraceReport weighted_trace(const Pairing& p, double mu, const RenormOptions& opt = {})
{
    TraceReport r;
    r.route = Route::heat;
    r.mu = mu;
    r.expansion = heat_expansion(p, opt);
    r.value = renormalized_limit(*r.expansion, mu);
    r.tail_bound = p.tail(opt.grid.min);
    return r;
}

inline TraceReport weighted_trace(const SpectralOperator& A, const Weight& Q, double mu, const RenormOptions& opt = {})
{
    return weighted_trace(Pairing::make(A, Q), mu, opt);
}

// res(A) = q * res_{z=0} tr(A Q^{-z}) = -q * (coefficient of log eps at eps^0)
inline TraceReport wodzicki_residue_zeta(const Pairing& p, const RenormOptions& opt = {})
{
    TraceReport r;
    r.route = Route::zeta;
    r.expansion = heat_expansion(p, opt);
    r.value = -p.q * r.expansion->log_coeff(0.0);
    r.tail_bound = p.tail(opt.grid.min);
    return r;
}

inline TraceReport wodzicki_residue_zeta(const SpectralOperator& A, const Weight& Q, const RenormOptions& opt = {})
{
    return wodzicki_residue_zeta(Pairing::make(A, Q), opt);
}

// sum_k g_k d_k lambda_k^{-z}, valid for Re z > (dim + ord A)/q
inline TraceReport zeta_trace_direct(const Pairing& p, cplx z)
{
    if (z.real() <= (p.dim + p.order) / p.q) throw Error("direct zeta sum diverges at this z");
    TraceReport r;
    r.route = Route::zeta;
    for (Eigen::Index k = 0; k < p.d.size(); ++k) r.value += p.grading(k) * p.d(k) * std::exp(-z * std::log(p.lambda(k)));
    double s = 0, a = std::max(p.order, 0.0), decay = z.real() * p.q - a;
    for (long n = p.cutoff_N + 1;; ++n) {
        double t = std::pow(1.0 + n, a) * std::pow(p.growth(double(n)), -z.real());
        s += t;
        if (t < 1e-17 * s || n >= p.cutoff_N + 1000000L) {
            // remaining terms bounded by the integral of the power law
            s += t * n / std::max(decay - 1.0, 1e-3);
            break;
        }
    }
    r.tail_bound = 2.0 * p.d.cwiseAbs().maxCoeff() * s;
    return r;
}

namespace detail {

template <class F>
cplx integrate_c(F&& f, double a, double b)
{
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    double re = GK::integrate([&](double t) { return f(t).real(); }, a, b, 15, 1e-13);
    double im = GK::integrate([&](double t) { return f(t).imag(); }, a, b, 15, 1e-13);
    return {re, im};
}

}  // namespace detail

// Mellin split: closed-form integration of the fitted expansion on [0, t0], direct summation on [t0, 1] and [1, inf)
inline TraceReport zeta_trace_mellin(const Pairing& p, cplx z, const RenormOptions& opt = {}, double t0 = 1e-2)
{
    TraceReport r;
    r.route = Route::zeta;
    auto ex = heat_expansion(p, opt);
    r.expansion = ex;
    double amax = 0;
    for (auto* m : {&ex.a, &ex.b, &ex.c})
        for (auto& [j, v] : *m) amax = std::max(amax, std::abs(v));
    double ztol = 1e-6 * std::max(amax, 1.0);

    // non-positive integer z: 1/Gamma vanishes, only the eps^k and eps^k log eps slots survive
    if (z.imag() == 0.0 && z.real() <= 1e-12 && is_integer(z.real(), 1e-12)) {
        int k = int(std::round(-z.real()));
        double fk = factorial(k) * (k % 2 ? -1.0 : 1.0);
        cplx ck = ex.power_coeff(double(k)), bk = ex.log_coeff(double(k));
        r.value = fk * (ck + bk * digamma_int(k + 1));
        if (std::abs(bk) > ztol) {
            r.pole = true;
            r.pole_residue = -fk * bk;
        }
        return r;
    }

    cplx bracket = 0;
    for (auto& [j, v] : ex.a) {
        cplx s = z + ex.lattice.lambda(j);
        if (std::abs(s) < 1e-10) {
            if (std::abs(v) > ztol) {
                r.pole = true;
                r.pole_residue += v * rgamma_c(z);
            }
            continue;
        }
        bracket += v * std::exp(s * std::log(t0)) / s;
    }
    for (auto& [k, v] : ex.c) {
        cplx s = z + double(k);
        bracket += v * std::exp(s * std::log(t0)) / s;
    }
    for (auto& [j, v] : ex.b) {
        // log slots at fit-noise level are treated as absent
        if (std::abs(v) <= ztol) continue;
        cplx s = z + ex.lattice.lambda(j);
        if (std::abs(s) < 1e-10) {
            if (std::abs(v) > ztol) r.pole = true;
            continue;
        }
        cplx ts = std::exp(s * std::log(t0));
        bracket += v * ts * (std::log(t0) / s - 1.0 / (s * s));
    }
    auto integrand = [&](double t) { return std::exp((z - 1.0) * std::log(t)) * p.heat_fast(t); };
    bracket += detail::integrate_c(integrand, t0, 1.0);
    bracket += detail::integrate_c(integrand, 1.0, std::numeric_limits<double>::infinity());
    r.value = r.pole ? cplx(std::nan(""), std::nan("")) : rgamma_c(z) * bracket;
    r.tail_bound = p.tail(opt.grid.min);
    return r;
}

inline TraceReport zeta_trace(const Pairing& p, cplx z, const RenormOptions& opt = {})
{
    if (z.real() > (p.dim + p.order) / p.q + 0.25) return zeta_trace_direct(p, z);
    return zeta_trace_mellin(p, z, opt);
}

inline TraceReport zeta_trace(const SpectralOperator& A, const Weight& Q, cplx z, const RenormOptions& opt = {})
{
    return zeta_trace(Pairing::make(A, Q), z, opt);
}

struct DeterminantReport {
    double log_value = 0;
    double value = 0;
    double tail_bound = 0;
    std::optional<AsymptoticExpansion> expansion;
};

// -int_eps^inf t^{-1} tr(e^{-tQ}) dt; quadrature on [eps, 1], closed form E_1 on [1, inf)
inline DeterminantReport cutoff_determinant(const Weight& Q, double eps)
{
    if (eps <= 0) throw Error("cutoff_determinant requires eps > 0");
    for (Eigen::Index k = 0; k < Q.size(); ++k)
        if (Q.eigenvalues(k) <= 0) throw Error("weight must be strictly positive");
    auto p = Pairing::identity(Q);
    double upper = std::max(eps, 1.0);
    double tail = 0;
    for (Eigen::Index k = 0; k < Q.size(); ++k) tail += boost::math::expint(1, upper * Q.eigenvalues(k));
    double quad = 0;
    if (eps < 1.0) {
        using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
        // substitute t = e^u to resolve the small-t region
        quad = GK::integrate([&](double u) { return p.heat_fast(std::exp(u)).real(); }, std::log(eps), 0.0, 20, 1e-14);
    }
    DeterminantReport r;
    r.log_value = -(quad + tail);
    r.value = std::exp(r.log_value);
    double tb = 0;
    for (long n = Q.cutoff_N + 1; n < Q.cutoff_N + 2000000L; ++n) {
        double t = boost::math::expint(1, eps * Q.growth(double(n)));
        tb += t;
        if (t < 1e-30 || t < 1e-17 * tb) break;
    }
    r.tail_bound = 2 * tb;
    return r;
}

// det_mu = exp(Lim^mu log det_eps)
inline DeterminantReport renormalized_determinant(const Weight& Q, double mu, const RenormOptions& opt = {})
{
    auto eps = opt.grid.points();
    auto vals = sample(eps, [&](double e) { return cplx(cutoff_determinant(Q, e).log_value); });
    if (!is_integer(Q.order_q)) throw Error("weight order must be an integer for the heat lattice");
    ExponentLattice L{int(std::round(Q.order_q)), Q.dim_M, 0.0};
    DeterminantReport r;
    r.expansion = fit_expansion(eps, vals, L, opt.fit);
    r.log_value = renormalized_limit(*r.expansion, mu).real();
    r.value = std::exp(r.log_value);
    r.tail_bound = cutoff_determinant(Q, opt.grid.min).tail_bound;
    return r;
}

}  // namespace rt
