#pragma once

#include "symbol.hpp"

#include <functional>
#include <limits>
#include <optional>

namespace rt {

enum class Parity { even, odd };

inline Parity operator*(Parity a, Parity b) { return a == b ? Parity::even : Parity::odd; }

// matrix in the Fourier basis, modes m, n in [-N, N]
struct SpectralOperator {
    Mat entries;
    int cutoff_N = 0;
    int bandwidth = 0;
    double order = 0;
    Parity parity = Parity::even;
    bool self_adjoint = false;

    Eigen::Index size() const { return entries.rows(); }

    cplx at(int m, int n) const { return entries(m + cutoff_N, n + cutoff_N); }

    static SpectralOperator identity(int N)
    {
        return {Mat::Identity(2 * N + 1, 2 * N + 1), N, 0, 0.0, Parity::even, true};
    }

    static SpectralOperator zero(int N, double order = 0.0)
    {
        return {Mat::Zero(2 * N + 1, 2 * N + 1), N, 0, order, Parity::even, true};
    }

    static SpectralOperator dense(Mat m, int N, double order)
    {
        int bw = int(m.rows()) - 1;
        return {std::move(m), N, bw, order, Parity::even, false};
    }

    SpectralOperator adjoint() const
    {
        SpectralOperator r = *this;
        r.entries = entries.adjoint();
        return r;
    }

    SpectralOperator operator+(const SpectralOperator& o) const
    {
        check_same(o);
        SpectralOperator r = *this;
        r.entries += o.entries;
        r.bandwidth = std::max(bandwidth, o.bandwidth);
        r.order = std::max(order, o.order);
        r.self_adjoint = self_adjoint && o.self_adjoint;
        return r;
    }

    SpectralOperator operator-(const SpectralOperator& o) const { return *this + o * cplx(-1.0); }

    SpectralOperator operator*(cplx s) const
    {
        SpectralOperator r = *this;
        r.entries *= s;
        r.self_adjoint = self_adjoint && s.imag() == 0.0;
        return r;
    }

    void check_same(const SpectralOperator& o) const
    {
        if (cutoff_N != o.cutoff_N || size() != o.size()) throw Error("cutoff mismatch");
    }
};

inline SpectralOperator quantize(const Symbol& s, int N)
{
    int M = 2 * N + 1;
    Mat A = Mat::Zero(M, M);
    for (auto& t : s.terms)
        for (int n = -N; n <= N; ++n) {
            int m = n + t.mode;
            if (m < -N || m > N) continue;
            A(m + N, n + N) += t.at(n);
        }
    SpectralOperator r{std::move(A), N, s.bandwidth(), s.order(), Parity::even, false};
    r.self_adjoint = (r.entries - r.entries.adjoint()).cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, r.entries.cwiseAbs().maxCoeff());
    return r;
}

inline SpectralOperator compose(const SpectralOperator& A, const SpectralOperator& B)
{
    A.check_same(B);
    Eigen::Index M = A.size();
    int bw = A.bandwidth + B.bandwidth;
    SpectralOperator r;
    r.cutoff_N = A.cutoff_N;
    r.order = A.order + B.order;
    r.parity = A.parity * B.parity;
    if (bw < M / 8) {
        r.entries = Mat::Zero(M, M);
        for (Eigen::Index j = 0; j < M; ++j) {
            Eigen::Index k0 = std::max<Eigen::Index>(0, j - B.bandwidth), k1 = std::min<Eigen::Index>(M - 1, j + B.bandwidth);
            for (Eigen::Index k = k0; k <= k1; ++k) {
                cplx b = B.entries(k, j);
                if (b == 0.0) continue;
                Eigen::Index i0 = std::max<Eigen::Index>(0, k - A.bandwidth), i1 = std::min<Eigen::Index>(M - 1, k + A.bandwidth);
                for (Eigen::Index i = i0; i <= i1; ++i) r.entries(i, j) += A.entries(i, k) * b;
            }
        }
        r.bandwidth = bw;
    } else {
        r.entries = A.entries * B.entries;
        r.bandwidth = int(std::min<Eigen::Index>(bw, M - 1));
    }
    return r;
}

// [A, B] = AB - (-1)^{|A||B|} BA
inline SpectralOperator bracket(const SpectralOperator& A, const SpectralOperator& B, bool graded)
{
    SpectralOperator ab = compose(A, B), ba = compose(B, A);
    bool anti = graded && A.parity == Parity::odd && B.parity == Parity::odd;
    SpectralOperator r = ab;
    if (anti)
        r.entries += ba.entries;
    else
        r.entries -= ba.entries;
    r.bandwidth = std::max(ab.bandwidth, ba.bandwidth);
    return r;
}

// positive self-adjoint weight; eigenvalues indexed by Fourier mode when `basis` is empty
struct Weight {
    RVec eigenvalues;
    Mat basis;
    RVec grading;
    double order_q = 2;
    int dim_M = 1;
    int cutoff_N = 0;
    std::optional<Symbol> symbol;
    std::function<double(double)> growth;  // lower bound for eigenvalues at |n| > N

    bool diagonal() const { return basis.size() == 0; }
    Eigen::Index size() const { return eigenvalues.size(); }

    static Weight from_multiplier(const Multiplier& m, int N)
    {
        Weight w;
        w.cutoff_N = N;
        w.order_q = m.order();
        if (w.order_q <= 0) throw Error("weight must have positive order");
        w.eigenvalues.resize(2 * N + 1);
        for (int n = -N; n <= N; ++n) w.eigenvalues(n + N) = m(n);
        if (w.eigenvalues.minCoeff() <= 0) throw Error("weight eigenvalues must be positive");
        w.grading = RVec::Ones(2 * N + 1);
        w.symbol = Symbol::multiplier(m);
        w.growth = [m](double n) { return std::min(m(n), m(-n)); };
        double lead = std::pow(std::abs(m.poly[m.degree()]), m.power);
        double big = std::max(1.0, double(N));
        double ratio = std::min(m(big), m(-big)) / std::pow(big, w.order_q);
        if (N >= 16 && (ratio < 0.5 * lead || ratio > 2 * lead)) throw Error("weight growth inconsistent with its symbol");
        return w;
    }

    static Weight from_matrix(const Mat& H, double q, int N)
    {
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.adjoint()));
        Weight w;
        w.cutoff_N = N;
        w.order_q = q;
        w.eigenvalues = es.eigenvalues();
        if (w.eigenvalues.minCoeff() <= 0) throw Error("weight eigenvalues must be positive");
        w.basis = es.eigenvectors();
        w.grading = RVec::Ones(w.eigenvalues.size());
        double c = 0.5 * w.eigenvalues.maxCoeff() / std::pow(std::max(1, N), q);
        w.growth = [c, q](double n) { return c * std::pow(n, q); };
        return w;
    }

    // Q+ on the even part, Q- on the odd part
    static Weight super(const Weight& p, const Weight& m)
    {
        if (p.cutoff_N != m.cutoff_N || p.order_q != m.order_q) throw Error("super weight blocks must match");
        Weight w;
        w.cutoff_N = p.cutoff_N;
        w.order_q = p.order_q;
        Eigen::Index a = p.size(), b = m.size();
        w.eigenvalues.resize(a + b);
        w.eigenvalues << p.eigenvalues, m.eigenvalues;
        w.grading.resize(a + b);
        w.grading << RVec::Ones(a), -RVec::Ones(b);
        if (!p.diagonal() || !m.diagonal()) {
            w.basis = Mat::Zero(a + b, a + b);
            w.basis.topLeftCorner(a, a) = p.diagonal() ? Mat(Mat::Identity(a, a)) : p.basis;
            w.basis.bottomRightCorner(b, b) = m.diagonal() ? Mat(Mat::Identity(b, b)) : m.basis;
        }
        auto gp = p.growth, gm = m.growth;
        w.growth = [gp, gm](double n) { return std::min(gp(n), gm(n)); };
        return w;
    }

    Mat to_eigenbasis(const Mat& A) const { return diagonal() ? A : Mat(basis.adjoint() * A * basis); }

    Mat from_eigenbasis(const Mat& A) const { return diagonal() ? A : Mat(basis * A * basis.adjoint()); }

    // diagonal of U* A U
    CVec eig_diag(const Mat& A) const
    {
        if (diagonal()) return A.diagonal();
        Mat AU = A * basis;
        return (basis.conjugate().cwiseProduct(AU)).colwise().sum().transpose();
    }

    SpectralOperator function(const std::function<cplx(double)>& f, double order) const
    {
        Eigen::Index M = size();
        CVec d(M);
        for (Eigen::Index k = 0; k < M; ++k) d(k) = f(eigenvalues(k));
        SpectralOperator r;
        r.cutoff_N = cutoff_N;
        r.order = order;
        if (diagonal()) {
            r.entries = d.asDiagonal();
            r.bandwidth = 0;
        } else {
            r.entries = basis * d.asDiagonal() * basis.adjoint();
            r.bandwidth = int(M) - 1;
        }
        r.self_adjoint = d.imag().cwiseAbs().maxCoeff() == 0.0;
        return r;
    }
};

// sum over |n| > N of (1 + |n|)^a exp(-eps * growth(n)), both signs of n and both grading blocks
inline double tail_bound(const Weight& Q, double eps, double a = 0.0)
{
    int blocks = Q.grading.size() > 0 && Q.grading.minCoeff() < 0 ? 2 : 1;
    double s = 0;
    a = std::max(a, 0.0);
    for (long n = Q.cutoff_N + 1; n < Q.cutoff_N + 2000000L; ++n) {
        double t = std::pow(1.0 + n, a) * std::exp(-eps * Q.growth(double(n)));
        s += t;
        if (t < 1e-30 * std::max(s, 1e-300) || t < 1e-300) break;
    }
    return 2.0 * blocks * s;
}

inline SpectralOperator heat_operator(const Weight& Q, double eps)
{
    if (eps <= 0) throw Error("heat_operator requires eps > 0");
    auto r = Q.function([eps](double l) { return std::exp(-eps * l); }, -std::numeric_limits<double>::infinity());
    r.self_adjoint = true;
    return r;
}

// (Q + P_Q)^{-z}; P_Q = 0 for the positive weights handled here
inline SpectralOperator complex_power(const Weight& Q, cplx z)
{
    return Q.function([z](double l) { return std::exp(-z * std::log(l)); }, -z.real() * Q.order_q);
}

inline SpectralOperator log_weight(const Weight& Q)
{
    return Q.function([](double l) { return cplx(std::log(l)); }, 0.0);
}

// [A]_Q^j
inline SpectralOperator iterated_bracket(const SpectralOperator& A, const Weight& Q, int j)
{
    if (j < 0) throw Error("iterated_bracket requires j >= 0");
    SpectralOperator r = A;
    r.order = A.order + j * (Q.order_q - 1);
    if (j == 0) return r;
    Mat At = Q.to_eigenbasis(A.entries);
    for (Eigen::Index n = 0; n < At.cols(); ++n)
        for (Eigen::Index m = 0; m < At.rows(); ++m) At(m, n) *= std::pow(Q.eigenvalues(m) - Q.eigenvalues(n), j);
    r.entries = Q.from_eigenbasis(At);
    r.self_adjoint = false;
    return r;
}

// operator on E+ (+) E- split into blocks
struct SuperOperator {
    SpectralOperator A_plus, A_minus;  // even diagonal blocks
    SpectralOperator X, Y;             // odd blocks: X maps E- -> E+, Y maps E+ -> E-

    static SuperOperator even(const SpectralOperator& p, const SpectralOperator& m)
    {
        int N = p.cutoff_N;
        return {p, m, SpectralOperator::zero(N), SpectralOperator::zero(N)};
    }

    static SuperOperator odd(const SpectralOperator& x, const SpectralOperator& y)
    {
        int N = x.cutoff_N;
        return {SpectralOperator::zero(N), SpectralOperator::zero(N), x, y};
    }

    Mat assemble() const
    {
        Eigen::Index a = A_plus.size(), b = A_minus.size();
        Mat r(a + b, a + b);
        r << A_plus.entries, X.entries, Y.entries, A_minus.entries;
        return r;
    }

    SpectralOperator full() const
    {
        SpectralOperator r;
        r.entries = assemble();
        r.cutoff_N = A_plus.cutoff_N;
        r.bandwidth = int(r.entries.rows()) - 1;
        r.order = std::max({A_plus.order, A_minus.order, X.order, Y.order});
        bool even_zero = A_plus.entries.cwiseAbs().maxCoeff() == 0.0 && A_minus.entries.cwiseAbs().maxCoeff() == 0.0;
        r.parity = even_zero ? Parity::odd : Parity::even;
        return r;
    }

    // str A = tr A+ - tr A-
    cplx supertrace() const { return A_plus.entries.trace() - A_minus.entries.trace(); }
};

}  // namespace rt
