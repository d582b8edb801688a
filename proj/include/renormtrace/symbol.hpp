#pragma once

#include "core.hpp"

#include <map>
#include <tuple>

namespace rt {

// f(x) = sum_k c_k e^{ikx}
struct Trig {
    std::map<int, cplx> c;

    static Trig constant(cplx v)
    {
        Trig t;
        if (v != 0.0) t.c[0] = v;
        return t;
    }

    // f(x) = sum a_k cos(kx) + b_k sin(kx); mode 0 takes a_0 as the constant
    static Trig from_cos_sin(const std::vector<std::tuple<int, double, double>>& modes)
    {
        Trig t;
        for (auto [k, a, b] : modes) {
            if (k < 0) throw Error("trig mode must be nonnegative");
            if (k == 0) {
                t.c[0] += a;
                continue;
            }
            t.c[k] += 0.5 * a + b / cplx(0, 2);
            t.c[-k] += 0.5 * a - b / cplx(0, 2);
        }
        t.prune();
        return t;
    }

    void prune()
    {
        for (auto it = c.begin(); it != c.end();) it = (it->second == 0.0) ? c.erase(it) : std::next(it);
    }

    cplx operator()(double x) const
    {
        cplx s = 0;
        for (auto& [k, v] : c) s += v * std::exp(cplx(0, k * x));
        return s;
    }

    cplx mean() const
    {
        auto it = c.find(0);
        return it == c.end() ? cplx(0) : it->second;
    }

    int max_mode() const
    {
        int m = 0;
        for (auto& [k, v] : c) m = std::max(m, std::abs(k));
        return m;
    }

    Trig& operator+=(const Trig& o)
    {
        for (auto& [k, v] : o.c) c[k] += v;
        return *this;
    }
};

// m(xi) = (sum_d poly[d] xi^d)^power
struct Multiplier {
    std::vector<double> poly{1.0};
    double power = 1.0;

    int degree() const
    {
        for (int d = int(poly.size()) - 1; d >= 0; --d)
            if (poly[d] != 0.0) return d;
        throw Error("multiplier polynomial is identically zero");
    }

    double order() const { return degree() * power; }

    double base(double xi) const
    {
        double s = 0;
        for (int d = int(poly.size()) - 1; d >= 0; --d) s = s * xi + poly[d];
        return s;
    }

    double operator()(double xi) const
    {
        double v = base(xi);
        if ((power == std::round(power))) return std::pow(v, power);
        if (v <= 0) throw Error("non-integer power of a non-positive multiplier");
        return std::pow(v, power);
    }

    // coefficients a_i of (m(sigma r + s)) / (lead * r^{order}) as a series in w = 1/r, i < depth,
    // together with lead^power
    std::pair<cplx, std::vector<double>> expand(int sigma, int shift, int depth) const
    {
        int D = degree();
        double lead = poly[D] * (D % 2 && sigma < 0 ? -1.0 : 1.0);
        std::vector<double> e(D + 1, 0.0);
        for (int d = 0; d <= D; ++d) {
            if (poly[d] == 0.0) continue;
            // (sigma r + s)^d = sum_t C(d,t) sigma^{d-t} s^t r^{d-t}; r^{d-t} = r^{D-i} with i = D-d+t
            for (int t = 0; t <= d; ++t) {
                double binom = std::tgamma(d + 1.0) / (std::tgamma(t + 1.0) * std::tgamma(d - t + 1.0));
                double term = poly[d] * binom * ((d - t) % 2 && sigma < 0 ? -1.0 : 1.0) * std::pow(double(shift), t);
                e[D - d + t] += term;
            }
        }
        for (auto& v : e) v /= lead;
        // J.C.P. Miller recurrence for (sum e_i w^i)^power, e_0 = 1
        std::vector<double> b(depth, 0.0);
        if (depth > 0) b[0] = 1.0;
        for (int n = 1; n < depth; ++n) {
            double s = 0;
            for (int i = 1; i <= std::min(n, D); ++i) s += ((power + 1.0) * i - n) * e[i] * b[n - i];
            b[n] = s / n;
        }
        cplx pref;
        if (lead > 0)
            pref = std::pow(lead, power);
        else if ((power == std::round(power)))
            pref = std::pow(lead, power);
        else
            throw Error("non-integer power of a multiplier with negative leading symbol");
        return {pref, b};
    }
};

struct Factor {
    Multiplier m;
    int shift = 0;
};

// left-quantised term: entry (n + mode, n) = coeff * prod m_i(n + shift_i)
struct SymbolTerm {
    cplx coeff = 1.0;
    int mode = 0;
    std::vector<Factor> factors;

    double order() const
    {
        double o = 0;
        for (auto& f : factors) o += f.m.order();
        return o;
    }

    cplx at(int n) const
    {
        cplx v = coeff;
        for (auto& f : factors) v *= f.m(n + f.shift);
        return v;
    }
};

// finite sums of products of Fourier multipliers and trigonometric multiplication operators
struct Symbol {
    std::vector<SymbolTerm> terms;

    static Symbol identity() { return Symbol{{SymbolTerm{}}}; }

    static Symbol multiplier(const Multiplier& m)
    {
        SymbolTerm t;
        t.factors.push_back({m, 0});
        return Symbol{{t}};
    }

    static Symbol multiplication(const Trig& f)
    {
        Symbol s;
        for (auto& [k, v] : f.c) s.terms.push_back(SymbolTerm{v, k, {}});
        return s;
    }

    double order() const
    {
        double o = -1e300;
        for (auto& t : terms)
            if (t.coeff != 0.0) o = std::max(o, t.order());
        return terms.empty() ? 0.0 : o;
    }

    int bandwidth() const
    {
        int b = 0;
        for (auto& t : terms) b = std::max(b, std::abs(t.mode));
        return b;
    }

    Symbol operator*(const Symbol& o) const
    {
        Symbol r;
        for (auto& t1 : terms)
            for (auto& t2 : o.terms) {
                SymbolTerm t;
                t.coeff = t1.coeff * t2.coeff;
                if (t.coeff == 0.0) continue;
                t.mode = t1.mode + t2.mode;
                for (auto f : t1.factors) {
                    f.shift += t2.mode;
                    t.factors.push_back(f);
                }
                for (auto& f : t2.factors) t.factors.push_back(f);
                r.terms.push_back(std::move(t));
            }
        return r;
    }

    Symbol operator*(cplx s) const
    {
        Symbol r = *this;
        for (auto& t : r.terms) t.coeff *= s;
        return r;
    }

    Symbol operator+(const Symbol& o) const
    {
        Symbol r = *this;
        r.terms.insert(r.terms.end(), o.terms.begin(), o.terms.end());
        return r;
    }

    Symbol operator-(const Symbol& o) const { return *this + o * cplx(-1.0); }
};

inline Symbol commutator(const Symbol& a, const Symbol& b) { return a * b - b * a; }

struct SymbolComponent {
    double degree;
    Trig plus, minus;  // a_degree(x, +1) and a_degree(x, -1)
};

struct ClassicalSymbol {
    std::vector<SymbolComponent> components;  // strictly decreasing degrees

    double order() const { return components.empty() ? 0.0 : components.front().degree; }

    const SymbolComponent* find(double degree) const
    {
        for (auto& c : components)
            if (std::abs(c.degree - degree) < 1e-9) return &c;
        return nullptr;
    }
};

// homogeneous components down to order - depth
inline ClassicalSymbol classical_expansion(const Symbol& s, int depth = 6)
{
    double top = s.order();
    std::vector<SymbolComponent> comps;
    auto slot = [&](double deg) -> SymbolComponent& {
        for (auto& c : comps)
            if (std::abs(c.degree - deg) < 1e-9) return c;
        comps.push_back({deg, {}, {}});
        return comps.back();
    };
    for (auto& t : s.terms) {
        if (t.coeff == 0.0) continue;
        double ord = t.order();
        int n = int(std::floor(ord - (top - depth) + 1e-9)) + 1;
        if (n <= 0) continue;
        for (int sigma : {1, -1}) {
            std::vector<cplx> series(n, 0.0);
            series[0] = t.coeff;
            for (auto& f : t.factors) {
                auto [pref, b] = f.m.expand(sigma, f.shift, n);
                std::vector<cplx> next(n, 0.0);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; i + j < n; ++j) next[i + j] += series[i] * b[j];
                for (auto& v : next) v *= pref;
                series = std::move(next);
            }
            for (int i = 0; i < n; ++i) {
                if (series[i] == 0.0) continue;
                auto& c = slot(ord - i);
                (sigma > 0 ? c.plus : c.minus).c[t.mode] += series[i];
            }
        }
    }
    for (auto& c : comps) {
        c.plus.prune();
        c.minus.prune();
    }
    std::erase_if(comps, [](auto& c) { return c.plus.c.empty() && c.minus.c.empty(); });
    std::sort(comps.begin(), comps.end(), [](auto& a, auto& b) { return a.degree > b.degree; });
    return ClassicalSymbol{comps};
}

// (1/2pi) int (a_{-1}(x,+1) + a_{-1}(x,-1)) dx
inline cplx wodzicki_residue_symbol(const ClassicalSymbol& a)
{
    auto* c = a.find(-1.0);
    if (!c) return 0.0;
    return c->plus.mean() + c->minus.mean();
}

inline cplx wodzicki_residue_symbol(const Symbol& s)
{
    double o = s.order();
    if (o < -1.0 - 1e-9) return 0.0;
    return wodzicki_residue_symbol(classical_expansion(s, int(std::ceil(o + 1.0 + 1e-9)) + 1));
}

}  // namespace rt
