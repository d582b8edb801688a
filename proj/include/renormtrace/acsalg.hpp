#pragma once

#include "core.hpp"

#include <random>

namespace rt {

using Mat2 = Eigen::Matrix2d;

inline Mat2 anticomm(const Mat2& a, const Mat2& b) { return a * b + b * a; }
inline Mat2 comm(const Mat2& a, const Mat2& b) { return a * b - b * a; }

// J = [[a, b], [c, -a]] with c = -(1 + a^2)/b, so J^2 = -I and det J = 1; b < 0 keeps {v, Jv} positive
struct ACPoint {
    Mat2 J;

    static ACPoint standard()
    {
        ACPoint p;
        p.J << 0, -1, 1, 0;
        return p;
    }

    static ACPoint make(double a, double b)
    {
        if (b >= 0) throw Error("orientation-positive J needs b < 0");
        ACPoint p;
        p.J << a, b, -(1 + a * a) / b, -a;
        return p;
    }

    static ACPoint random(std::mt19937_64& rng)
    {
        std::uniform_real_distribution<double> ua(-1, 1), ub(-2, -0.5);
        double a = ua(rng), b = ub(rng);
        return make(a, b);
    }
};

// H = K + J K J anticommutes with J
struct TangentTensor {
    Mat2 H;

    static TangentTensor project(const Mat2& K, const ACPoint& p)
    {
        TangentTensor t{0.5 * (K + p.J * K * p.J)};
        return t;
    }

    static TangentTensor random(const ACPoint& p, std::mt19937_64& rng)
    {
        std::normal_distribution<double> g;
        Mat2 K;
        K << g(rng), g(rng), g(rng), g(rng);
        auto t = project(K, p);
        double n = t.H.norm();
        if (n > 0) t.H /= n;
        return t;
    }
};

inline void require_tangent(const Mat2& H, const ACPoint& p, double tol = 1e-12)
{
    if ((H * p.J + p.J * H).norm() > tol * std::max(1.0, H.norm() * p.J.norm())) throw Error("tensor does not anticommute with J");
}

inline Mat2 theta_plus(const Mat2& N, const ACPoint& p)
{
    require_tangent(N, p);
    return 0.5 * N * p.J;
}

inline Mat2 theta_minus(const Mat2& N, const Mat2& H, const ACPoint& p)
{
    require_tangent(N, p);
    return -0.5 * p.J * anticomm(N, H);
}

// |a + b + c| / kappa^k, kappa = max(1, |J|); tangent tensors have unit norm, so kappa^k is the operand scale of a degree-k identity in J
inline double scaled_defect(const ACPoint& p, int k, const Mat2& a, const Mat2& b, const Mat2& c = Mat2::Zero())
{
    return (a + b + c).norm() / std::pow(std::max(1.0, p.J.norm()), k);
}

// D_N J = N, so compatibility [nabla_N, J] = 0 reads N + [theta(N), J] = 0
inline double compatibility_plus_defect(const Mat2& N, const ACPoint& p) { return scaled_defect(p, 2, N, comm(theta_plus(N, p), p.J)); }

inline double compatibility_minus_defect(const Mat2& N, const Mat2& H, const ACPoint& p)
{
    return scaled_defect(p, 3, N * H, theta_minus(N, p.J * H, p), -p.J * theta_minus(N, H, p));
}

inline double lemma10_plus_identity(const Mat2& M, const Mat2& N, const ACPoint& p)
{
    const Mat2& J = p.J;
    return scaled_defect(p, 2, -0.5 * comm(M, N), 0.25 * comm(M * J, N * J), 0.25 * comm(M, N));
}

inline Mat2 lemma10_minus_curvature(const Mat2& M, const Mat2& N, const Mat2& H)
{
    return -0.5 * comm(M, N) * H + 0.5 * (-M * H * N + N * H * M) - 0.25 * comm(anticomm(M, H), anticomm(N, H));
}

// M(theta(N)) - N(theta(M)) + [theta(M), theta(N)] with theta(N)H = -J{N,H}/2 and D_M J = M
inline Mat2 minus_curvature_direct(const Mat2& M, const Mat2& N, const Mat2& H, const ACPoint& p)
{
    const Mat2& J = p.J;
    auto th = [&](const Mat2& X, const Mat2& Y) { Mat2 r = -0.5 * J * anticomm(X, Y); return r; };
    Mat2 dterm = -0.5 * M * anticomm(N, H) + 0.5 * N * anticomm(M, H);
    return dterm + th(M, th(N, H)) - th(N, th(M, H));
}

enum class TraceConvention { calibrated, unnormalized };

inline cplx complexified_trace(const Mat2& A, const ACPoint& p, TraceConvention c = TraceConvention::calibrated)
{
    if ((A * p.J - p.J * A).norm() > 1e-12 * std::max(1.0, A.norm())) throw Error("operator does not commute with J");
    double t = A.trace(), tj = (p.J * A).trace();
    if (c == TraceConvention::unnormalized) return {t, tj};
    return {0.5 * t, -0.5 * tj};
}

struct Prop11Integrand {
    Mat2 plus;           // J[M,N]/4
    Eigen::Matrix4d minus;  // H -> J[M,N]H/2 - (-MHN + NHM)/2 + J[{M,H},{N,H}]/4, acting on vec(H)
    double gamma = 0, delta = 0;
    double pattern_defect = 0;
};

inline Mat2 prop11_minus_apply(const Mat2& M, const Mat2& N, const Mat2& H, const ACPoint& p)
{
    const Mat2& J = p.J;
    return 0.5 * J * comm(M, N) * H - 0.5 * (-M * H * N + N * H * M) + 0.25 * J * comm(anticomm(M, H), anticomm(N, H));
}

inline Prop11Integrand prop11_integrand(const Mat2& M, const Mat2& N, const ACPoint& p)
{
    require_tangent(M, p);
    require_tangent(N, p);
    Prop11Integrand r;
    Mat2 jmn = p.J * comm(M, N);
    r.plus = 0.25 * jmn;
    for (int k = 0; k < 4; ++k) {
        Mat2 E = Mat2::Zero();
        E(k % 2, k / 2) = 1;
        Mat2 v = prop11_minus_apply(M, N, E, p);
        r.minus.col(k) = Eigen::Map<const Eigen::Vector4d>(v.data());
    }
    // gamma I - delta J, which is [[gamma, delta], [-delta, gamma]] for the standard J
    r.gamma = 0.5 * jmn.trace();
    r.delta = 0.5 * (p.J * jmn).trace();
    r.pattern_defect = scaled_defect(p, 2, jmn, -(r.gamma * Mat2::Identity() - r.delta * p.J));
    return r;
}

struct AcsReport {
    int trials = 0;
    double lemma10_plus = 0;
    double minus_antisymmetry = 0;
    double minus_tangent = 0;
    double minus_vs_direct = 0;
    double compat_plus = 0;
    double compat_minus = 0;
    double even_commute = 0;
    double odd_anticommute = 0;
    double prop11_pattern = 0;
    double prop11_zero_diag = 0;
    double max_abs_gamma = 0;
};

inline AcsReport acs_identities(int trials, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    AcsReport r;
    r.trials = trials;
    auto upd = [](double& m, double v) { m = std::max(m, v); };
    for (int t = 0; t < trials; ++t) {
        auto p = (t == 0) ? ACPoint::standard() : ACPoint::random(rng);
        Mat2 M = TangentTensor::random(p, rng).H, N = TangentTensor::random(p, rng).H, H = TangentTensor::random(p, rng).H;
        upd(r.lemma10_plus, lemma10_plus_identity(M, N, p));
        Mat2 c = lemma10_minus_curvature(M, N, H);
        upd(r.minus_antisymmetry, scaled_defect(p, 0, c, lemma10_minus_curvature(N, M, H)));
        upd(r.minus_tangent, scaled_defect(p, 2, c * p.J, p.J * c));
        upd(r.minus_vs_direct, scaled_defect(p, 2, c, -minus_curvature_direct(M, N, H, p)));
        upd(r.compat_plus, compatibility_plus_defect(N, p));
        upd(r.compat_minus, compatibility_minus_defect(N, H, p));
        Mat2 ev = M * N, od = M * N * H;
        upd(r.even_commute, scaled_defect(p, 2, ev * p.J, -p.J * ev));
        upd(r.odd_anticommute, scaled_defect(p, 2, od * p.J, p.J * od));
        auto pi11 = prop11_integrand(M, N, p);
        upd(r.prop11_zero_diag, prop11_integrand(M, M, p).plus.norm() + prop11_integrand(M, M, p).minus.norm());
        upd(r.prop11_pattern, pi11.pattern_defect);
        upd(r.max_abs_gamma, std::abs(pi11.gamma));
    }
    return r;
}

}  // namespace rt
