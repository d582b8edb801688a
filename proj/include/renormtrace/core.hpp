#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rt {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

inline constexpr double pi = std::numbers::pi;
inline constexpr double euler_gamma = std::numbers::egamma;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FitError : Error {
    using Error::Error;
};

inline bool is_integer(double x, double tol = 1e-9) { return std::abs(x - std::round(x)) < tol; }

// log Gamma for complex argument (Lanczos, g = 7, n = 9)
inline cplx lgamma_c(cplx z)
{
    static const double g = 7.0;
    static const double c[9] = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                                771.32342877765313,   -176.61502916214059,   12.507343278686905,
                                -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    if (z.real() < 0.5) {
        // reflection
        return std::log(pi / std::sin(pi * z)) - lgamma_c(1.0 - z);
    }
    z -= 1.0;
    cplx x = c[0];
    for (int i = 1; i < 9; ++i) x += c[i] / (z + double(i));
    cplx t = z + g + 0.5;
    return 0.5 * std::log(2 * pi) + (z + 0.5) * std::log(t) - t + std::log(x);
}

inline cplx gamma_c(cplx z)
{
    if (z.imag() == 0.0) return std::tgamma(z.real());
    return std::exp(lgamma_c(z));
}

// 1/Gamma(z), entire
inline cplx rgamma_c(cplx z)
{
    if (z.imag() == 0.0 && z.real() <= 0 && z.real() == std::round(z.real())) return 0.0;
    if (z.imag() == 0.0) return 1.0 / std::tgamma(z.real());
    return std::exp(-lgamma_c(z));
}

// digamma at positive integers
inline double digamma_int(int k)
{
    double s = -euler_gamma;
    for (int i = 1; i < k; ++i) s += 1.0 / i;
    return s;
}

inline double factorial(int n)
{
    double r = 1;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

// worker count: RENORMTRACE_THREADS or the value set by the caller
inline std::atomic<int>& thread_setting()
{
    static std::atomic<int> n{[] {
        if (const char* s = std::getenv("RENORMTRACE_THREADS")) {
            int v = std::atoi(s);
            if (v > 0) return v;
        }
        return 1;
    }()};
    return n;
}

inline void set_threads(int n) { thread_setting() = std::max(1, n); }

template <class F>
void parallel_for(int n, F&& f)
{
    int nt = std::min(thread_setting().load(), n);
    if (nt <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) f(i);
        });
    for (auto& th : pool) th.join();
}

// relative defect normalised by the largest term, with a floor for identities of the form 0 = 0
inline double rel_defect(cplx lhs, cplx rhs, double floor = 0.0)
{
    double s = std::max({std::abs(lhs), std::abs(rhs), floor});
    return s == 0.0 ? 0.0 : std::abs(lhs - rhs) / s;
}

}  // namespace rt
