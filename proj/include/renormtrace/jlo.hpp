#pragma once

#include "traces.hpp"

#include <numeric>

namespace rt {

namespace detail {

// integral over the k-simplex of exp(-sum sigma_i u_i), nodes sorted, Taylor about the mean
inline double simplex_taylor(const double* u, int k)
{
    double c = 0;
    for (int i = 0; i <= k; ++i) c += u[i];
    c /= (k + 1);
    // |u_i - c| <= 1, so 28 terms reach double precision; odd h_m may vanish, hence no early exit
    constexpr int terms = 28;
    double h[terms] = {1.0};
    for (int i = 0; i <= k; ++i) {
        double y = u[i] - c;
        for (int m = 1; m < terms; ++m) h[m] += y * h[m - 1];
    }
    double s = 0, f = 1.0 / factorial(k);
    for (int m = 0; m < terms; ++m) {
        s += (m % 2 ? -1.0 : 1.0) * h[m] * f;
        f /= (k + m + 1);
    }
    return std::exp(-c) * s;
}

inline double simplex_sorted(const double* u, int k)
{
    if (k == 0) return std::exp(-u[0]);
    double d = u[k] - u[0];
    if (d <= 1.0) return simplex_taylor(u, k);
    if (k == 1) return std::exp(-u[0]) * (-std::expm1(-d)) / d;
    return (simplex_sorted(u, k - 1) - simplex_sorted(u + 1, k - 1)) / d;
}

}  // namespace detail

// int_{Delta^k} exp(-eps sum sigma_i x_i) dsigma
inline double simplex_weight(double eps, std::vector<double> nodes)
{
    if (!(eps > 0)) throw Error("simplex_weight requires eps > 0");
    if (nodes.empty()) throw Error("simplex_weight requires at least one node");
    for (auto& x : nodes) x *= eps;
    std::sort(nodes.begin(), nodes.end());
    return detail::simplex_sorted(nodes.data(), int(nodes.size()) - 1);
}

// k = 2 with nodes (a, b, a), already scaled by eps
inline double simplex_weight_aba(double a, double b)
{
    double d = b - a;
    if (std::abs(d) < 0.5) {
        double s = 0, t = 0.5;
        for (int m = 0; m < 30; ++m) {
            s += t;
            t *= -d / (m + 3);
        }
        return std::exp(-a) * s;
    }
    return (std::exp(-a) * (d - 1) + std::exp(-b)) / (d * d);
}

template <class T>
T pairwise_sum(const std::vector<T>& v, size_t lo, size_t hi)
{
    if (hi - lo <= 8) {
        T s = 0;
        for (size_t i = lo; i < hi; ++i) s += v[i];
        return s;
    }
    size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

template <class T>
T pairwise_sum(const std::vector<T>& v)
{
    return pairwise_sum(v, 0, v.size());
}

// operators already expressed in the eigenbasis of the weight
struct EigenFrame {
    RVec lambda;
    RVec grading;
};

inline EigenFrame frame(const Weight& Q, bool graded)
{
    return {Q.eigenvalues, graded ? Q.grading : RVec::Ones(Q.size())};
}

namespace detail {

struct SparseRows {
    std::vector<std::vector<std::pair<int, cplx>>> rows;

    explicit SparseRows(const Mat& A) : rows(size_t(A.rows()))
    {
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            for (Eigen::Index i = 0; i < A.rows(); ++i)
                if (A(i, j) != 0.0) rows[size_t(i)].push_back({int(j), A(i, j)});
    }
};

}  // namespace detail

// sum over index tuples of g_{n0} (A0)_{n0 n1} ... (Ak)_{nk n0} W(eps; lambda_{n1}, ..., lambda_{nk}, lambda_{n0})
inline cplx trace_form_eig(const std::vector<Mat>& ops, const EigenFrame& f, double eps)
{
    int k = int(ops.size()) - 1;
    if (k < 0) throw Error("trace_form needs at least one operator");
    if (k > 3) throw Error("trace_form supports k <= 3");
    Eigen::Index M = f.lambda.size();
    for (auto& A : ops)
        if (A.rows() != M || A.cols() != M) throw Error("cutoff mismatch");
    std::vector<detail::SparseRows> sp;
    for (int i = 0; i < k; ++i) sp.emplace_back(ops[size_t(i)]);
    const Mat& last = ops.back();
    std::vector<cplx> part(size_t(M), 0.0);
    parallel_for(int(M), [&](int n0) {
        cplx s = 0;
        std::vector<double> nodes(size_t(k + 1));
        std::vector<int> idx(size_t(k + 1));
        idx[0] = n0;
        auto rec = [&](auto&& self, int depth, cplx prod) -> void {
            if (depth == k) {
                cplx v = last(idx[size_t(k)], n0);
                if (v == 0.0) return;
                for (int i = 1; i <= k; ++i) nodes[size_t(i - 1)] = f.lambda(idx[size_t(i)]);
                nodes[size_t(k)] = f.lambda(n0);
                s += prod * v * simplex_weight(eps, nodes);
                return;
            }
            for (auto& [j, a] : sp[size_t(depth)].rows[size_t(idx[size_t(depth)])]) {
                idx[size_t(depth + 1)] = j;
                self(self, depth + 1, prod * a);
            }
        };
        if (k == 0) {
            s = ops[0](n0, n0) * std::exp(-eps * f.lambda(n0));
        } else {
            rec(rec, 0, 1.0);
        }
        part[size_t(n0)] = f.grading(n0) * s;
    });
    return pairwise_sum(part);
}

// <I, X, Y>_{eps,2} = sum_{k,l} g_k X_kl Y_lk W(lambda_k, lambda_l, lambda_k)
inline cplx trace_form_iXY(const Mat& X, const Mat& Y, const EigenFrame& f, double eps)
{
    Eigen::Index M = f.lambda.size();
    std::vector<cplx> part(size_t(M), 0.0);
    parallel_for(int(M), [&](int a) {
        cplx s = 0;
        double ua = eps * f.lambda(a);
        for (Eigen::Index l = 0; l < M; ++l) {
            cplx xy = X(a, l) * Y(l, a);
            if (xy == 0.0) continue;
            s += xy * simplex_weight_aba(ua, eps * f.lambda(l));
        }
        part[size_t(a)] = f.grading(a) * s;
    });
    return pairwise_sum(part);
}

struct TraceForm {
    std::vector<SpectralOperator> operators;
    Weight weight;
    bool graded = true;

    std::vector<Mat> eig_ops() const
    {
        std::vector<Mat> r;
        for (auto& A : operators) {
            if (A.cutoff_N != weight.cutoff_N || A.size() != weight.size()) throw Error("cutoff mismatch");
            r.push_back(weight.to_eigenbasis(A.entries));
        }
        return r;
    }

    double order() const
    {
        double a = 0;
        for (auto& A : operators) a += A.order;
        return a;
    }

    cplx value(double eps) const { return trace_form_eig(eig_ops(), frame(weight, graded), eps); }

    std::vector<cplx> values(const std::vector<double>& eps) const
    {
        auto ops = eig_ops();
        auto f = frame(weight, graded);
        std::vector<cplx> v;
        for (double e : eps) v.push_back(trace_form_eig(ops, f, e));
        return v;
    }
};

inline cplx trace_form(const std::vector<SpectralOperator>& ops, const Weight& Q, double eps, bool graded = true)
{
    if (!(eps > 0)) throw Error("trace_form requires eps > 0");
    return TraceForm{ops, Q, graded}.value(eps);
}

// sum_{k <= K} (-eps)^k <1, Q1, ..., Q1>_{eps,k,Q0}
inline cplx volterra_sum(const Weight& Q0, const SpectralOperator& Q1, double eps, int K, bool graded = true)
{
    if (K < 0) throw Error("volterra_sum requires K >= 0");
    if (K > 3) throw Error("volterra_sum supports K <= 3");
    auto f = frame(Q0, graded);
    Mat Id = Mat::Identity(Q0.size(), Q0.size());
    Mat q1 = Q0.to_eigenbasis(Q1.entries);
    cplx s = 0;
    for (int k = 0; k <= K; ++k) {
        std::vector<Mat> ops{Id};
        for (int i = 0; i < k; ++i) ops.push_back(q1);
        s += std::pow(-eps, k) * trace_form_eig(ops, f, eps);
    }
    return s;
}

// int over Delta^k of prod_i (sigma_0 + ... + sigma_{i-1})^{j_i}, i = 1..k
inline double b3_moment(const std::vector<int>& j)
{
    double m = 1;
    int acc = 0;
    for (size_t i = 0; i < j.size(); ++i) {
        acc += j[i] + 1;
        m /= acc;
    }
    return m;
}

// int over Delta^k of prod_i sigma_i^{p_i}, p has k + 1 entries
inline double dirichlet_moment(const std::vector<int>& p)
{
    int k = int(p.size()) - 1;
    double num = 1;
    int tot = k;
    for (int v : p) {
        num *= factorial(v);
        tot += v;
    }
    return num / factorial(tot);
}

enum class MomentConvention { partial_sums, literal };

inline double b4_moment(const std::vector<int>& j, MomentConvention c)
{
    if (c == MomentConvention::partial_sums) return b3_moment(j);
    std::vector<int> p{0};
    p.insert(p.end(), j.begin(), j.end());
    return dirichlet_moment(p);
}

namespace detail {

template <class F>
void for_each_multi_index(const std::vector<int>& limits, F&& f)
{
    std::vector<int> j(limits.size(), 0);
    while (true) {
        f(j);
        size_t i = 0;
        while (i < j.size() && j[i] == limits[i]) j[i++] = 0;
        if (i == j.size()) return;
        ++j[i];
    }
}

}  // namespace detail

// sum over j_i <= N_i of (-eps)^{|j|}/j! * moment(j) * str(A0 [A1]^{j1} ... [Ak]^{jk} e^{-eps Q})
inline cplx prop_b3_expansion(const std::vector<SpectralOperator>& ops, const Weight& Q, double eps,
                              const std::vector<int>& N_limits, bool graded = true)
{
    int k = int(ops.size()) - 1;
    if (k < 1) throw Error("prop_b3_expansion needs k >= 1");
    if (int(N_limits.size()) != k) throw Error("one truncation limit per operator A_1..A_k");
    for (auto& A : ops)
        if (A.cutoff_N != Q.cutoff_N) throw Error("cutoff mismatch");
    std::vector<std::vector<SpectralOperator>> br(static_cast<size_t>(k));
    for (int i = 1; i <= k; ++i)
        for (int j = 0; j <= N_limits[size_t(i - 1)]; ++j) br[size_t(i - 1)].push_back(iterated_bracket(ops[size_t(i)], Q, j));
    Weight Qg = Q;
    if (!graded) Qg.grading = RVec::Ones(Q.size());
    cplx total = 0;
    detail::for_each_multi_index(N_limits, [&](const std::vector<int>& j) {
        SpectralOperator B = ops[0];
        int tot = 0;
        double jf = 1;
        for (int i = 0; i < k; ++i) {
            B = compose(B, br[size_t(i)][size_t(j[size_t(i)])]);
            tot += j[size_t(i)];
            jf *= factorial(j[size_t(i)]);
        }
        total += std::pow(-eps, tot) / jf * b3_moment(j) * Pairing::make(B, Qg).heat(eps);
    });
    return total;
}

// predicted coefficient of eps^{lambda_j} in <A0, ..., An>_{eps,n,Q}
struct B4Prediction {
    double lambda = 0;
    cplx value = 0;
    std::vector<std::pair<std::vector<int>, cplx>> terms;
};

inline B4Prediction thm_b4_coefficient(const std::vector<Symbol>& ops, const Multiplier& Q, int j, const std::vector<int>& N_limits,
                                       MomentConvention conv = MomentConvention::partial_sums)
{
    int n = int(ops.size()) - 1;
    if (n < 0) throw Error("thm_b4_coefficient needs at least one operator");
    if (int(N_limits.size()) != n) throw Error("one truncation limit per operator A_1..A_n");
    double q = Q.order(), a = 0;
    for (auto& s : ops) a += s.order();
    B4Prediction r;
    r.lambda = (j - a - 1.0) / q;
    if (r.lambda >= 0) throw Error("lambda_j must have negative real part");
    Symbol Qs = Symbol::multiplier(Q);
    std::vector<std::vector<Symbol>> br(static_cast<size_t>(n));
    for (int i = 1; i <= n; ++i) {
        Symbol s = ops[size_t(i)];
        for (int l = 0; l <= N_limits[size_t(i - 1)]; ++l) {
            br[size_t(i - 1)].push_back(s);
            s = commutator(Qs, s);
        }
    }
    detail::for_each_multi_index(N_limits, [&](const std::vector<int>& jj) {
        int tot = std::accumulate(jj.begin(), jj.end(), 0);
        Symbol B = ops[0];
        double jf = 1;
        for (int i = 0; i < n; ++i) {
            B = B * br[size_t(i)][size_t(jj[size_t(i)])];
            jf *= factorial(jj[size_t(i)]);
        }
        double mu = r.lambda - tot;
        Multiplier Qp = Q;
        Qp.power *= mu;
        cplx res = wodzicki_residue_symbol(B * Symbol::multiplier(Qp));
        double mom = n == 0 ? 1.0 : b4_moment(jj, conv);
        cplx t = (tot % 2 ? -1.0 : 1.0) / jf * mom * std::tgamma(-mu) / q * res;
        r.terms.push_back({jj, t});
        r.value += t;
    });
    return r;
}

}  // namespace rt
