#pragma once

#include "core.hpp"

#include <map>

namespace rt {

// lambda_j = (j - alpha - n) / m
struct ExponentLattice {
    int m = 2;
    int n = 1;
    double alpha = 0.0;

    double lambda(int j) const { return (j - alpha - n) / m; }

    // index of the eps^0 slot, or -1 when alpha + n is not an integer
    int zero_index() const
    {
        double j = alpha + n;
        return is_integer(j) && j >= -1e-9 ? int(std::round(j)) : -1;
    }
};

struct FitOptions {
    int J = 8;
    bool extended = false;
    double residual_threshold = 1e-6;
    double residual_floor = 1e-10;  // samples below this are treated as exact zeros
    int refine_steps = 2;
};

struct AsymptoticExpansion {
    ExponentLattice lattice;
    int truncation_J = 8;
    std::map<int, cplx> a;  // eps^{lambda_j}
    std::map<int, cplx> b;  // eps^{lambda_j} log eps, integer lambda_j only
    std::map<int, cplx> c;  // eps^k
    double residual = 0;
    double condition = 1;

    cplx coeff_a(int j) const { return get(a, j); }
    cplx coeff_b(int j) const { return get(b, j); }
    cplx coeff_c(int k) const { return get(c, k); }

    // coefficient of eps^{lam} (with eps^k folded in for integer lam >= 0)
    cplx power_coeff(double lam) const
    {
        cplx s = 0;
        for (auto& [j, v] : a)
            if (std::abs(lattice.lambda(j) - lam) < 1e-9) s += v;
        if (is_integer(lam) && lam > -0.5) s += get(c, int(std::round(lam)));
        return s;
    }

    cplx log_coeff(double lam) const
    {
        for (auto& [j, v] : b)
            if (std::abs(lattice.lambda(j) - lam) < 1e-9) return v;
        return 0.0;
    }

private:
    static cplx get(const std::map<int, cplx>& m, int k)
    {
        auto it = m.find(k);
        return it == m.end() ? cplx(0) : it->second;
    }
};

inline std::vector<double> geometric_grid(double lo, double hi, int points)
{
    if (points < 2 || lo <= 0 || hi <= lo) throw Error("invalid eps grid");
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i) g[i] = lo * std::pow(hi / lo, double(i) / (points - 1));
    return g;
}

struct EpsGrid {
    double min = 1e-4;
    double max = 1e-1;
    int points_per_decade = 16;

    std::vector<double> points() const
    {
        int n = int(std::lround(std::log10(max / min) * points_per_decade)) + 1;
        return geometric_grid(min, max, std::max(n, 2));
    }
};

namespace detail {

enum class ColKind { a, b, c };

struct Column {
    ColKind kind;
    int index;
    double lam;
};

inline std::vector<Column> design_columns(const ExponentLattice& L, int J)
{
    std::vector<Column> cols;
    double lmax = double(J) / L.m + 1e-12;
    for (int j = 0; L.lambda(j) <= lmax; ++j) {
        double lam = L.lambda(j);
        if (is_integer(lam)) {
            int k = int(std::round(lam));
            if (k < 0) cols.push_back({ColKind::a, j, double(k)});
            cols.push_back({ColKind::b, j, double(k)});
        } else {
            cols.push_back({ColKind::a, j, lam});
        }
    }
    for (int k = 0; k <= int(std::floor(lmax)); ++k) cols.push_back({ColKind::c, k, double(k)});
    return cols;
}

template <class T>
T column_value(const Column& c, T eps)
{
    using std::log;
    using std::pow;
    T p = pow(eps, T(c.lam));
    return c.kind == ColKind::b ? p * log(eps) : p;
}

template <class T>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> solve_ls(const std::vector<Column>& cols, const std::vector<double>& eps,
                                                          const Eigen::MatrixXd& Y, int refine, Eigen::VectorXd& scale)
{
    using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    Eigen::Index n = Eigen::Index(eps.size()), p = Eigen::Index(cols.size());
    MatT X(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < p; ++k) X(i, k) = column_value<T>(cols[k], T(eps[i]));
    scale.resize(p);
    for (Eigen::Index k = 0; k < p; ++k) {
        scale(k) = double(X.col(k).norm());
        X.col(k) /= T(scale(k));
    }
    Eigen::HouseholderQR<MatT> qr(X);
    MatT Yt = Y.cast<T>();
    MatT coef = qr.solve(Yt);
    for (int it = 0; it < refine; ++it) {
        // residual in long double
        Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> r =
            Y.cast<long double>() - X.template cast<long double>() * coef.template cast<long double>();
        MatT rt = r.template cast<T>();
        coef += qr.solve(rt);
    }
    return coef;
}

}  // namespace detail

inline AsymptoticExpansion fit_expansion(const std::vector<double>& eps, const std::vector<cplx>& values,
                                         const ExponentLattice& L, const FitOptions& opt = {})
{
    if (L.m < 1) throw FitError("lattice m must be >= 1");
    if (eps.size() != values.size()) throw FitError("sample size mismatch");
    auto cols = detail::design_columns(L, opt.J);
    if (eps.size() < 2 * cols.size())
        throw FitError("need at least " + std::to_string(2 * cols.size()) + " samples, got " + std::to_string(eps.size()));
    std::vector<double> e = eps;
    std::sort(e.begin(), e.end());
    if (e.front() <= 0) throw FitError("eps samples must be positive");
    for (size_t i = 1; i < e.size(); ++i)
        if (e[i] == e[i - 1]) throw FitError("eps samples must be distinct");
    if (e.back() / e.front() < 100 * (1 - 1e-12)) throw FitError("eps samples must span at least two decades");
    double r0 = e[1] / e[0];
    for (size_t i = 2; i < e.size(); ++i)
        if (std::abs(e[i] / e[i - 1] - r0) > 1e-6 * r0) throw FitError("eps samples must be geometrically spaced");

    Eigen::Index n = Eigen::Index(eps.size()), p = Eigen::Index(cols.size());
    Eigen::MatrixXd Y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) Y(i, 0) = values[i].real(), Y(i, 1) = values[i].imag();

    Eigen::VectorXd scale;
    Eigen::MatrixXd coef;
    if (opt.extended)
        coef = detail::solve_ls<long double>(cols, eps, Y, opt.refine_steps, scale).cast<double>();
    else
        coef = detail::solve_ls<double>(cols, eps, Y, opt.refine_steps, scale);

    Eigen::MatrixXd Xs(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < p; ++k) Xs(i, k) = detail::column_value<double>(cols[k], eps[i]) / scale(k);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xs);
    auto sv = svd.singularValues();
    double cond = sv(p - 1) > 0 ? sv(0) / sv(p - 1) : std::numeric_limits<double>::infinity();
    if (!(sv(p - 1) > 1e-15 * sv(0))) throw FitError("rank-deficient design matrix (lattice degeneracy)");

    AsymptoticExpansion ex;
    ex.lattice = L;
    ex.truncation_J = opt.J;
    ex.condition = cond;
    for (Eigen::Index k = 0; k < p; ++k) {
        cplx v(coef(k, 0) / scale(k), coef(k, 1) / scale(k));
        auto& col = cols[size_t(k)];
        if (col.kind == detail::ColKind::a)
            ex.a[col.index] = v;
        else if (col.kind == detail::ColKind::b)
            ex.b[col.index] = v;
        else
            ex.c[col.index] = v;
    }
    double ymax = 0, rmax = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        cplx fit = 0;
        for (Eigen::Index k = 0; k < p; ++k)
            fit += cplx(coef(k, 0), coef(k, 1)) * detail::column_value<double>(cols[size_t(k)], eps[i]) / scale(k);
        ymax = std::max(ymax, std::abs(values[i]));
        rmax = std::max(rmax, std::abs(fit - values[i]));
    }
    ex.residual = rmax / std::max(ymax, opt.residual_floor);
    if (ex.residual > opt.residual_threshold)
        throw FitError("fit residual " + std::to_string(ex.residual) + " above threshold; samples not renormalizable on the declared lattice");
    return ex;
}

inline cplx evaluate(const AsymptoticExpansion& ex, double eps)
{
    cplx s = 0;
    double le = std::log(eps);
    for (auto& [j, v] : ex.a) s += v * std::pow(eps, ex.lattice.lambda(j));
    for (auto& [j, v] : ex.b) s += v * std::pow(eps, ex.lattice.lambda(j)) * le;
    for (auto& [k, v] : ex.c) s += v * std::pow(eps, double(k));
    return s;
}

// Lim^mu: a_{alpha+n} + c_0 - mu * b_{alpha+n}
inline cplx renormalized_limit(const AsymptoticExpansion& ex, double mu)
{
    int j0 = ex.lattice.zero_index();
    cplx v = ex.coeff_c(0);
    if (j0 >= 0) v += ex.coeff_a(j0) - mu * ex.coeff_b(j0);
    return v;
}

template <class F>
std::vector<cplx> sample(const std::vector<double>& eps, F&& f)
{
    std::vector<cplx> v(eps.size());
    parallel_for(int(eps.size()), [&](int i) { v[size_t(i)] = f(eps[size_t(i)]); });
    return v;
}

}  // namespace rt
