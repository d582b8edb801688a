#pragma once

#include "scenario.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>

namespace rt {

struct ReportRow {
    std::string task_id, quantity;
    cplx value = 0;
    std::string reference;
    std::optional<double> defect, tolerance;  // no tolerance: informational row
    bool pass = true;
    std::string route;
    std::optional<double> tail_bound, residual;
};

struct Report {
    std::string scenario;
    std::vector<ReportRow> rows;

    bool all_pass() const
    {
        for (auto& r : rows)
            if (!r.pass) return false;
        return true;
    }
};

struct RunOptions {
    bool fail_fast = false;
    bool extended = false;
    bool timings = true;  // per-task wall time on stderr
};

inline std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt17(cplx v) { return v.imag() == 0.0 ? fmt17(v.real()) : "[" + fmt17(v.real()) + ", " + fmt17(v.imag()) + "]"; }

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) throw Error("slope fit needs at least two points");
    double mx = 0, my = 0;
    size_t n = x.size();
    for (size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw Error("log-log slope needs positive data");
        mx += std::log(x[i]) / double(n);
        my += std::log(y[i]) / double(n);
    }
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < n; ++i) {
        double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

class TaskContext {
public:
    TaskContext(const Scenario& sc, const ojson& task, size_t index, const RunOptions& ro, std::vector<ReportRow>& rows)
        : sc_(sc), j_(task), rows_(rows)
    {
        id = task.at("id").get<std::string>();
        type = task.at("task").get<std::string>();
        path = lit::join("tasks", index);
        opt.grid = lit::has(j_, "eps_grid") ? lit::grid_literal(j_.at("eps_grid"), lit::join(path, "eps_grid"), sc.grid) : sc.grid;
        opt.fit.extended = ro.extended;
        opt.tail_tolerance = sc.tail_tolerance;
        mu = lit::number_or(j_, "mu", sc.mu, path);
    }

    std::string id, type, path;
    RenormOptions opt;
    double mu = 0;

    const Scenario& scenario() const { return sc_; }

    void allow(std::initializer_list<const char*> keys) const
    {
        for (auto& [k, v] : j_.items()) {
            bool ok = k == "id" || k == "task" || k == "tolerance" || k == "cutoff_N" || k == "eps_grid" || k == "mu" || k == "seed";
            for (auto* a : keys) ok = ok || k == a;
            if (!ok) throw ScenarioError(lit::join(path, k) + ": unknown key for task '" + type + "'");
        }
    }

    bool has(const char* key) const { return lit::has(j_, key); }
    const ojson& raw(const char* key) const { return lit::need(j_, key, path); }
    std::string at(const char* key) const { return lit::join(path, key); }

    double number(const char* key, double def) const { return lit::number_or(j_, key, def, path); }
    double positive(const char* key, double def) const { return lit::positive_or(j_, key, def, path); }
    int integer(const char* key, int def) const { return lit::integer_or(j_, key, def, path); }
    bool boolean(const char* key, bool def) const { return lit::boolean_or(j_, key, def, path); }

    std::vector<double> numbers(const char* key, std::vector<double> def) const
    {
        return has(key) ? lit::numbers(j_.at(key), at(key)) : def;
    }

    std::vector<int> integers(const char* key, std::vector<int> def) const { return has(key) ? lit::integers(j_.at(key), at(key)) : def; }

    std::uint64_t seed() const
    {
        if (!has("seed")) return sc_.seed;
        if (!j_.at("seed").is_number_unsigned()) throw ScenarioError(at("seed") + ": expected a nonnegative integer");
        return j_.at("seed").get<std::uint64_t>();
    }

    double tol(double def) const { return positive("tolerance", def); }

    OperatorLiteral op(const char* key) const { return lit::operator_literal(raw(key), at(key), sc_.operators); }

    std::vector<OperatorLiteral> ops(const char* key) const
    {
        const auto& arr = raw(key);
        if (!arr.is_array() || arr.empty()) throw ScenarioError(at(key) + ": expected a nonempty array of operator literals");
        std::vector<OperatorLiteral> r;
        for (size_t i = 0; i < arr.size(); ++i) r.push_back(lit::operator_literal(arr[i], lit::join(at(key), i), sc_.operators));
        return r;
    }

    Multiplier weight(const char* key = "weight") const { return lit::weight_literal(raw(key), at(key), sc_.weights); }

    const FamilySpec& family(const char* key = "family") const
    {
        const auto& v = raw(key);
        if (!v.is_string()) throw ScenarioError(at(key) + ": expected a family name");
        auto it = sc_.families.find(v.get<std::string>());
        if (it == sc_.families.end()) throw ScenarioError(at(key) + ": unknown family '" + v.get<std::string>() + "'");
        return it->second;
    }

    Base base(const char* key = "base", Base def = {0.15, -0.1}) const
    {
        if (!has(key)) return def;
        auto v = lit::numbers(j_.at(key), at(key));
        if (v.size() != 2) throw ScenarioError(at(key) + ": expected [b1, b2]");
        return {v[0], v[1]};
    }

    std::optional<int> explicit_cutoff() const
    {
        if (has("cutoff_N")) {
            int N = integer("cutoff_N", 0);
            if (N < 1) throw ScenarioError(at("cutoff_N") + ": must be positive");
            return N;
        }
        return sc_.cutoff_N;
    }

    int cutoff(const std::function<double(double)>& growth, double eps_min, double order)
    {
        int N = explicit_cutoff() ? *explicit_cutoff() : tail_cutoff(growth, eps_min, sc_.tail_tolerance, order);
        info("cutoff_N", double(N), explicit_cutoff() ? "fixed" : "tail tolerance " + fmt17(sc_.tail_tolerance));
        return N;
    }

    int weight_cutoff(const Multiplier& m, double eps_min, double order)
    {
        return cutoff([m](double n) { return std::min(m(n), m(-n)); }, eps_min, order);
    }

    int family_cutoff(const FamilySpec& f, const Base& b, double eps_min, double order = 1.0)
    {
        Multiplier m = f.principal;
        double beta = f.beta(b);
        return cutoff(
            [m, beta](double n) {
                double s = std::max(0.0, std::min(std::abs(m(n)), std::abs(m(-n))) - beta);
                return s * s;
            },
            eps_min, order);
    }

    ReportRow& check(const std::string& q, cplx value, const std::string& ref, double defect, double tolerance)
    {
        ReportRow r;
        r.task_id = id;
        r.quantity = q;
        r.value = value;
        r.reference = ref;
        r.defect = defect;
        r.tolerance = tolerance;
        r.pass = defect <= tolerance;  // NaN fails
        rows_.push_back(r);
        return rows_.back();
    }

    ReportRow& check_rel(const std::string& q, cplx lhs, cplx rhs, const std::string& ref, double tolerance, double floor = 0)
    {
        return check(q, lhs, ref + " = " + fmt17(rhs), rel_defect(lhs, rhs, floor), tolerance);
    }

    ReportRow& check_abs(const std::string& q, cplx value, double tolerance) { return check(q, value, "0", std::abs(value), tolerance); }

    ReportRow& info(const std::string& q, cplx value, const std::string& ref = "", std::optional<double> defect = std::nullopt)
    {
        ReportRow r;
        r.task_id = id;
        r.quantity = q;
        r.value = value;
        r.reference = ref;
        r.defect = defect;
        rows_.push_back(r);
        return rows_.back();
    }

    void trace_info(ReportRow& r, const TraceReport& t)
    {
        r.route = route_name(t.route);
        r.tail_bound = t.tail_bound;
        if (t.expansion) r.residual = t.expansion->residual;
    }

    void fit_info(const std::string& q, const AsymptoticExpansion& ex)
    {
        info(q + ".residual", ex.residual);
        info(q + ".condition", ex.condition);
    }

private:
    const Scenario& sc_;
    const ojson& j_;
    std::vector<ReportRow>& rows_;
};

namespace tasks {

inline std::string tag(const char* name, double v) { return std::string("[") + name + "=" + fmt17(v) + "]"; }

inline Weight weight_at(const Multiplier& m, int N) { return Weight::from_multiplier(m, N); }

inline cplx residue_with_power(const Symbol& A, Multiplier Q, double power)
{
    Q.power *= power;
    return wodzicki_residue_symbol(A * Symbol::multiplier(Q));
}

// ---------------------------------------------------------------- finite rank

inline void findim_lemma1(TaskContext& c)
{
    c.allow({"trials", "rank", "fd_step", "steps", "slope_tolerance"});
    int trials = c.integer("trials", 20), rank = c.integer("rank", 4);
    if (trials < 1 || rank < 1) throw ScenarioError(c.path + ": trials and rank must be positive");
    double h = c.positive("fd_step", 1e-4), tol = c.tol(1e-6);
    auto steps = c.numbers("steps", {1e-2, 1e-3, 1e-4});
    std::mt19937_64 rng(c.seed());
    std::uniform_real_distribution<double> ub(-0.5, 0.5);
    std::normal_distribution<double> g;
    auto draw = [&](int r) {
        auto B = FinDimBundle::random(r, rng);
        Base b{ub(rng), ub(rng)}, M{g(rng), g(rng)}, N{g(rng), g(rng)};
        return std::make_tuple(B, b, M, N);
    };
    double maxdef = 0;
    std::vector<double> logmean(steps.size(), 0.0);
    for (int t = 0; t < trials; ++t) {
        auto [B, b, M, N] = draw(rank);
        maxdef = std::max(maxdef, findim_det_curvature(B, b, M, N, h).defect);
        for (size_t s = 0; s < steps.size(); ++s)
            logmean[s] += std::log(std::max(findim_det_curvature(B, b, M, N, steps[s]).defect, 1e-300)) / trials;
    }
    c.check("max_defect", maxdef, "|Omega_Det(M,N) + str Omega(M,N)|, max over trials", maxdef, tol);
    if (steps.size() >= 2) {
        std::vector<double> d;
        for (double v : logmean) d.push_back(std::exp(v));
        for (size_t s = 0; s < steps.size(); ++s) c.info("mean_defect" + tag("fd_step", steps[s]), d[s], "geometric mean over trials");
        double slope = loglog_slope(steps, d);
        c.check("fd_slope", slope, "2", std::abs(slope - 2), c.positive("slope_tolerance", 0.2));
    }
    {
        auto [B, b, M, N] = draw(1);
        auto r = findim_det_curvature(B, b, M, N, h);
        c.check("rank1_defect", r.omega_det, "omega_minus - omega_plus = " + fmt17(r.minus_str_omega), r.defect, tol);
    }
    {
        auto [B, b, M, N] = draw(rank);
        for (auto& th : {&B.theta_plus, &B.theta_minus})
            for (auto& p : *th)
                for (auto& m : p.c) m.setZero();
        auto r = findim_det_curvature(B, b, M, N, h);
        c.check_abs("flat_omega_det", r.omega_det, tol);
        c.check_abs("flat_minus_str_omega", r.minus_str_omega, tol);
    }
}

// ---------------------------------------------------------------- heat and zeta

inline void heat_coefficients(TaskContext& c)
{
    c.allow({"weight", "operator", "expect", "laws", "law_lambda_max", "law_orders", "law_floor", "law_tolerance"});
    Multiplier qm = c.weight();
    OperatorLiteral A = c.has("operator") ? c.op("operator") : OperatorLiteral{Symbol::identity(), {}, 0};
    int N = c.weight_cutoff(qm, c.opt.grid.min, A.order());
    auto Q = tasks::weight_at(qm, N);
    auto p = Pairing::make(A.at(N), Q);
    auto ex = heat_expansion(p, c.opt);
    c.fit_info("fit", ex);
    double q = Q.order_q;
    if (c.has("expect")) {
        const auto& arr = c.raw("expect");
        if (!arr.is_array()) throw ScenarioError(c.at("expect") + ": expected an array");
        for (size_t i = 0; i < arr.size(); ++i) {
            auto pe = lit::join(c.at("expect"), i);
            const auto& e = arr[i];
            lit::allow_keys(e, {"lambda", "value", "log", "tolerance", "absolute"}, pe);
            double lam = lit::number(lit::need(e, "lambda", pe), lit::join(pe, "lambda"));
            cplx v = lit::complex_number(lit::need(e, "value", pe), lit::join(pe, "value"));
            bool lg = lit::boolean_or(e, "log", false, pe), absolute = lit::boolean_or(e, "absolute", false, pe);
            double t = lit::positive_or(e, "tolerance", 1e-6, pe);
            cplx fit = lg ? ex.log_coeff(lam) : ex.power_coeff(lam);
            std::string q_ = std::string(lg ? "log_coeff" : "coeff") + tag("lambda", lam);
            if (absolute)
                c.check(q_, fit, fmt17(v), std::abs(fit - v), t);
            else
                c.check_rel(q_, fit, v, "expected", t);
        }
    }
    if (!c.boolean("laws", false)) return;
    if (!A.symbol) throw ScenarioError(c.at("laws") + ": coefficient laws need a symbolic operator");
    double lmax = c.number("law_lambda_max", 1.0), floor = c.positive("law_floor", 1.0), lt = c.positive("law_tolerance", 1e-3);
    auto L = p.lattice();
    for (int j = 0; L.lambda(j) <= lmax + 1e-12; ++j) {
        double lam = L.lambda(j);
        if (is_integer(lam) && lam > -0.5) continue;
        cplx pred = gamma_c(-lam) / q * residue_with_power(*A.symbol, qm, lam);
        c.check_rel("alpha" + tag("lambda", lam), ex.power_coeff(lam), pred, "Gamma(-lambda)/q res(A Q^lambda)", lt, floor);
    }
    int K = c.integer("law_orders", 2);
    for (int k = 0; k <= K && k <= lmax + 1e-12; ++k) {
        cplx pred = (k % 2 ? 1.0 : -1.0) * residue_with_power(*A.symbol, qm, k) / (q * factorial(k));
        c.check_rel("beta" + tag("k", k), ex.log_coeff(k), pred, "(-1)^(k+1) res(A Q^k)/(q k!)", lt, floor);
        if (k >= 1) {
            cplx lit_ = (k % 2 ? -1.0 : 1.0) * q * residue_with_power(*A.symbol, qm, -k) / factorial(k - 1);
            c.info("beta_literal_law" + tag("k", k), lit_, "(-1)^k q res(A Q^-k)/(k-1)!", rel_defect(ex.log_coeff(k), lit_, floor));
        }
    }
}

inline void residue_calibration(TaskContext& c)
{
    c.allow({"weight", "operator", "expected", "pole", "zeta_value", "det"});
    Multiplier qm = c.weight();
    OperatorLiteral A = c.op("operator");
    if (!A.symbol) throw ScenarioError(c.at("operator") + ": residue calibration needs a symbolic operator");
    double tol = c.tol(1e-4);
    cplx expected = lit::complex_number(c.raw("expected"), c.at("expected"));
    int N = c.weight_cutoff(qm, c.opt.grid.min, A.order());
    auto Q = tasks::weight_at(qm, N);
    auto pa = Pairing::make(A.at(N), Q);
    cplx rs = wodzicki_residue_symbol(*A.symbol);
    auto rz = wodzicki_residue_zeta(pa, c.opt);
    c.check_rel("residue_symbol", rs, expected, "expected", tol).route = "symbol";
    c.trace_info(c.check_rel("residue_zeta", rz.value, expected, "expected", tol), rz);
    c.check_rel("residue_symbol_vs_zeta", rs, rz.value, "zeta route", tol);
    if (c.has("pole")) {
        const auto& pj = c.raw("pole");
        auto pp = c.at("pole");
        lit::allow_keys(pj, {"z", "residue"}, pp);
        double z = lit::number(lit::need(pj, "z", pp), lit::join(pp, "z"));
        cplx res = lit::complex_number(lit::need(pj, "residue", pp), lit::join(pp, "residue"));
        auto t = zeta_trace_mellin(pa, z, c.opt);
        if (!t.pole) {
            c.check("pole_residue" + tag("z", z), std::nan(""), "no pole detected", std::nan(""), tol);
        } else {
            c.trace_info(c.check_rel("pole_residue" + tag("z", z), t.pole_residue, res, "expected", tol), t);
            c.check_rel("q_times_pole_residue", Q.order_q * t.pole_residue, expected, "expected residue", tol);
        }
    }
    if (c.has("zeta_value")) {
        const auto& zj = c.raw("zeta_value");
        auto zp = c.at("zeta_value");
        lit::allow_keys(zj, {"z", "value", "tolerance"}, zp);
        double z = lit::number(lit::need(zj, "z", zp), lit::join(zp, "z"));
        cplx v = lit::complex_number(lit::need(zj, "value", zp), lit::join(zp, "value"));
        double zt = lit::positive_or(zj, "tolerance", 1e-8, zp);
        auto pi = Pairing::identity(Q);
        auto d = zeta_trace_direct(pi, z);
        auto m = zeta_trace_mellin(pi, z, c.opt);
        auto& rd = c.check_rel("zeta_direct" + tag("z", z), d.value, v, "closed form", zt);
        rd.route = "zeta_direct";
        rd.tail_bound = d.tail_bound;
        auto& rm = c.check_rel("zeta_mellin" + tag("z", z), m.value, v, "closed form", zt);
        c.trace_info(rm, m);
        rm.route = "zeta_mellin";
    }
    if (c.has("det")) {
        const auto& dj = c.raw("det");
        auto dp = c.at("det");
        lit::allow_keys(dj, {"mu", "log_value", "tolerance"}, dp);
        double m = lit::number_or(dj, "mu", c.mu, dp);
        double lv = lit::number(lit::need(dj, "log_value", dp), lit::join(dp, "log_value"));
        double dt = lit::positive_or(dj, "tolerance", 1e-6, dp);
        auto d = renormalized_determinant(Q, m, c.opt);
        auto& r = c.check_rel("log_det" + tag("mu", m), d.log_value, lv, "closed form", dt);
        r.route = "heat";
        r.tail_bound = d.tail_bound;
        r.residual = d.expansion->residual;
    }
}

inline void weighted_trace_task(TaskContext& c)
{
    c.allow({"weight", "operator", "expect"});
    Multiplier qm = c.weight();
    OperatorLiteral A = c.op("operator");
    int N = c.weight_cutoff(qm, c.opt.grid.min, A.order());
    auto t = weighted_trace(A.at(N), tasks::weight_at(qm, N), c.mu, c.opt);
    auto& r = c.has("expect") ? c.check_rel("weighted_trace", t.value, lit::complex_number(c.raw("expect"), c.at("expect")), "expected", c.tol(1e-6))
                              : c.info("weighted_trace", t.value);
    c.trace_info(r, t);
}

inline void residue_task(TaskContext& c)
{
    c.allow({"weight", "operator", "expect"});
    Multiplier qm = c.weight();
    OperatorLiteral A = c.op("operator");
    int N = c.weight_cutoff(qm, c.opt.grid.min, A.order());
    auto t = wodzicki_residue_zeta(A.at(N), tasks::weight_at(qm, N), c.opt);
    double tol = c.tol(1e-4);
    auto& r = c.has("expect") ? c.check_rel("residue_zeta", t.value, lit::complex_number(c.raw("expect"), c.at("expect")), "expected", tol)
                              : c.info("residue_zeta", t.value);
    c.trace_info(r, t);
    if (A.symbol) c.check_rel("residue_symbol", wodzicki_residue_symbol(*A.symbol), t.value, "zeta route", tol).route = "symbol";
}

inline void zeta_task(TaskContext& c)
{
    c.allow({"weight", "operator", "z", "expect"});
    Multiplier qm = c.weight();
    OperatorLiteral A = c.has("operator") ? c.op("operator") : OperatorLiteral{Symbol::identity(), {}, 0};
    cplx z = lit::complex_number(c.raw("z"), c.at("z"));
    int N = c.weight_cutoff(qm, c.opt.grid.min, A.order());
    auto t = zeta_trace(A.at(N), tasks::weight_at(qm, N), z, c.opt);
    std::string q = t.pole ? "pole_residue" : "zeta_value";
    cplx v = t.pole ? t.pole_residue : t.value;
    auto& r = c.has("expect") ? c.check_rel(q, v, lit::complex_number(c.raw("expect"), c.at("expect")), "expected", c.tol(1e-6)) : c.info(q, v);
    c.trace_info(r, t);
}

inline void det_task(TaskContext& c)
{
    c.allow({"weight", "expect"});
    Multiplier qm = c.weight();
    int N = c.weight_cutoff(qm, c.opt.grid.min, 0.0);
    auto d = renormalized_determinant(tasks::weight_at(qm, N), c.mu, c.opt);
    auto& r = c.has("expect") ? c.check_rel("log_det", d.log_value, lit::number(c.raw("expect"), c.at("expect")), "expected", c.tol(1e-6))
                              : c.info("log_det", d.log_value);
    r.route = "heat";
    r.tail_bound = d.tail_bound;
    r.residual = d.expansion->residual;
}

// ---------------------------------------------------------------- commutators and weight derivatives

inline void lemma2_commutator(TaskContext& c)
{
    c.allow({"weight", "alpha", "beta", "floor", "self_check", "self_tolerance"});
    Multiplier qm = c.weight();
    auto a = c.op("alpha"), b = c.op("beta");
    double floor = c.number("floor", 0.0), tol = c.tol(1e-4);
    int N = c.weight_cutoff(qm, c.opt.grid.min, std::max(0.0, a.order()) + std::max(0.0, b.order()));
    auto Q = tasks::weight_at(qm, N);
    auto A = a.at(N), B = b.at(N);
    auto r = lemma2_commutator_check(A, B, Q, c.mu, c.opt, floor);
    c.info("weighted_trace_of_commutator", r.lhs).route = "heat";
    c.info("minus_residue_over_q", r.rhs).route = "zeta";
    c.check("commutator_identity", r.lhs, "-res([log Q, alpha] beta)/q = " + fmt17(r.rhs), r.defect, tol);
    if (c.boolean("self_check", true)) {
        double st = c.positive("self_tolerance", 1e-6);
        auto s = lemma2_commutator_check(A, A, Q, c.mu, c.opt);
        c.check_abs("alpha_alpha_lhs", s.lhs, st);
        c.check_abs("alpha_alpha_rhs", s.rhs, st);
    }
}

inline void lemma2_derivative(TaskContext& c)
{
    c.allow({"weight", "weight_direction", "alpha", "alpha_direction", "b", "h", "floor"});
    Multiplier qm = c.weight();
    const auto& dj = c.raw("weight_direction");
    auto dpath = c.at("weight_direction");
    lit::allow_keys(dj, {"coeffs"}, dpath);
    Multiplier dir = lit::multiplier_body(dj, dpath);
    auto a = c.op("alpha");
    std::optional<OperatorLiteral> ad;
    if (c.has("alpha_direction")) ad = c.op("alpha_direction");
    double b = c.number("b", 0.0), h = c.positive("h", 0.25), floor = c.number("floor", 0.0), tol = c.tol(1e-3);
    auto at_b = [qm, dir](double s) {
        Multiplier m = qm;
        if (m.poly.size() < dir.poly.size()) m.poly.resize(dir.poly.size(), 0.0);
        for (size_t i = 0; i < dir.poly.size(); ++i) m.poly[i] += s * dir.poly[i];
        return m;
    };
    double order = std::max(0.0, a.order());
    if (ad) order = std::max(order, ad->order());
    int N = c.weight_cutoff(at_b(b), c.opt.grid.min, order);
    auto A0 = a.at(N);
    std::optional<SpectralOperator> A1;
    if (ad) A1 = ad->at(N);
    auto Qfam = [&](double s) { return tasks::weight_at(at_b(s), N); };
    auto alpha = [&](double s) { return A1 ? A0 + *A1 * cplx(s) : A0; };
    auto r = lemma2_derivative_check(Qfam, alpha, b, c.mu, h, c.opt, floor);
    c.info("d_weighted_trace", r.lhs).route = "heat";
    c.info("minus_residue_over_q", r.residue_term).route = "zeta";
    c.check("derivative_identity", r.lhs, "tr^{Q,mu}(d alpha) - res(alpha d log Q)/q = " + fmt17(r.rhs), r.defect, tol);
}

// ---------------------------------------------------------------- families

struct FamilyRun {
    const FamilySpec* spec;
    Base b;
    std::unique_ptr<FamilyEvaluator> ev;
};

inline FamilyRun family_run(TaskContext& c, double eps_min, double order = 1.0)
{
    FamilyRun r;
    r.spec = &c.family();
    r.b = c.base();
    int N = c.family_cutoff(*r.spec, r.b, eps_min, order);
    r.ev = std::make_unique<FamilyEvaluator>(r.spec->build(N));
    return r;
}

inline void prop4(TaskContext& c)
{
    c.allow({"family", "base", "eps", "odd_tolerance"});
    auto eps = c.numbers("eps", {0.5, 0.1});
    auto fr = family_run(c, *std::min_element(eps.begin(), eps.end()));
    double tol = c.tol(1e-4), odd = c.positive("odd_tolerance", 1e-10);
    for (double e : eps) {
        auto r = prop4_check(*fr.ev, fr.b, e);
        auto t = tag("eps", e);
        c.info("minus_r1" + t, r.minus_r1, "-str(Omega e^{-eps Q})");
        c.info("jlo" + t, r.jlo, "-eps(<I,X1,X2> - <I,X2,X1>)");
        c.info("fd_noise" + t, r.fd_noise, "|Omega_h - Omega_{h/2}|");
        c.check("prop4_identity" + t, r.lhs, "-r1 + jlo = " + fmt17(r.minus_r1 + r.jlo), r.defect, tol);
        c.check_abs("odd_component" + t, r.odd_component, odd);
    }
}

inline void theorem3(TaskContext& c)
{
    c.allow({"family", "base", "floor", "thm5_tolerance"});
    auto fr = family_run(c, c.opt.grid.min);
    double tol = c.tol(1e-3), floor = c.number("floor", 0.0);
    auto r = theorem3_check(*fr.ev, fr.b, c.mu, c.opt, floor);
    c.info("omega_det_mu", r.omega_det_mu, "Lim^mu of the determinant curvature");
    c.info("R1_mu", r.R1_mu, "str^{Q,mu}(Omega)");
    for (int i = 0; i < 3; ++i) c.info("residue_term" + std::to_string(i + 1), r.residue_terms[size_t(i)]);
    c.info("residue_obstruction", r.residue_obstruction, "(t1 - t2 + t3)/(2q)");
    c.info("jlo_limit", r.theorem5, "Lim^mu of -eps(<I,X1,X2> - <I,X2,X1>)");
    c.info("proportionality", r.proportionality, "(Omega + R1)/calR");
    c.info("fd_noise", r.fd_noise);
    c.check("theorem3_identity", r.omega_det_mu + r.R1_mu, "residue obstruction = " + fmt17(r.residue_obstruction), r.defect_thm3, tol);
    c.check("theorem5_identity", r.theorem5, "residue obstruction = " + fmt17(r.residue_obstruction), r.defect_thm5, c.positive("thm5_tolerance", tol));
}

inline void transgression(TaskContext& c)
{
    c.allow({"family", "base", "eps_pair", "degree0_tolerance"});
    auto ep = c.numbers("eps_pair", {0.2, 0.5});
    if (ep.size() != 2) throw ScenarioError(c.at("eps_pair") + ": expected [eps1, eps2]");
    auto fr = family_run(c, std::min(ep[0], ep[1]));
    auto r = transgression_check(*fr.ev, fr.b, ep[0], ep[1]);
    c.info("ch2_difference", r.lhs, "ch2(eps2) - ch2(eps1)");
    c.check("transgression", r.lhs, "-1/2 int d str(L [nabla, L] e^{-tQ}) dt = " + fmt17(r.rhs), r.defect, c.tol(1e-5));
    c.check_rel("degree0", r.degree0_lhs, r.degree0_rhs, "-tr(Q+ e^{-t Q+})", c.positive("degree0_tolerance", 1e-6));
}

inline void connection_forms(TaskContext& c)
{
    c.allow({"family", "base", "eps", "renormalized", "mu_tolerance"});
    auto eps = c.numbers("eps", {0.1, 0.5});
    bool ren = c.boolean("renormalized", true);
    double emin = *std::min_element(eps.begin(), eps.end());
    if (ren) emin = std::min(emin, c.opt.grid.min);
    auto fr = family_run(c, emin, 0.0);
    auto& ev = *fr.ev;
    double tol = c.tol(1e-6);
    for (int i = 0; i < 2; ++i)
        for (double e : eps) {
            auto r = bf_connection_form(ev, fr.b, i, e);
            c.check("connection_forms" + tag("i", i + 1) + tag("eps", e), r.first, "(d log det + str-form)/2 = " + fmt17(r.second), r.defect, tol);
        }
    if (!ren) return;
    double mt = c.positive("mu_tolerance", 1e-5), h = ev.family().fd_step;
    auto& f = ev.fiber(fr.b);
    for (int i = 0; i < 2; ++i) {
        auto lhs = weighted_trace(f.plus_pairing(f.conn_p[size_t(i)]), c.mu, c.opt);
        Pairing pm{f.conn_m[size_t(i)], f.Qm.eigenvalues, RVec::Ones(f.Qm.size()), 0.0, f.Qm.order_q, 1, f.Qm.cutoff_N, f.Qm.growth};
        cplx str = lhs.value - weighted_trace(pm, c.mu, c.opt).value;
        cplx dlogdet = richardson([&](double s) { return cplx(renormalized_determinant(ev.fiber(shifted(fr.b, i, s)).Qp, c.mu, c.opt).log_value); }, h);
        cplx rhs = 0.5 * (dlogdet + str);
        auto& r = c.check_rel("renormalized_connection_forms" + tag("i", i + 1), lhs.value, rhs, "(d log det_mu + str^{Q,mu}-form)/2", mt);
        c.trace_info(r, lhs);
    }
}

inline void chern_mu(TaskContext& c)
{
    c.allow({"family", "base", "mus", "log_tolerance"});
    bool listed = c.has("mus");
    auto mus = c.numbers("mus", {c.mu});
    auto fr = family_run(c, c.opt.grid.min, 0.0);
    std::vector<cplx> v;
    std::optional<AsymptoticExpansion> ex;
    for (double m : mus) {
        auto t = chern_form_mu(*fr.ev, fr.b, m, c.opt);
        c.trace_info(c.info(listed ? "chern_mu" + tag("mu", m) : "chern_mu", t.value, "str^{Q,mu}(Omega)"), t);
        v.push_back(t.value);
        ex = t.expansion;
    }
    double tol = c.tol(1e-8);
    if (v.size() >= 2) {
        double d = 0;
        for (auto& x : v) d = std::max(d, std::abs(x - v[0]));
        c.check("mu_independence", v[0], "max |value(mu) - value(mu_0)|", d, tol);
    }
    c.check_abs("log_coefficient", ex->log_coeff(0.0), c.positive("log_tolerance", 1e-8)).reference = "b_0 = 0";
}

// ---------------------------------------------------------------- trace forms

// Gauss-Legendre on [0, 1] via Golub-Welsch
inline std::pair<RVec, RVec> gauss_legendre01(int n)
{
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) T(k, k - 1) = T(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    RVec x = (es.eigenvalues().array() + 1.0) / 2.0;
    RVec w = es.eigenvectors().row(0).transpose().array().square();
    return {x, w};
}

// int over the k-simplex of tr(A0 e^{-s1 eps Q} A1 ... Ak e^{-s_{k+1} eps Q}), collapsed-coordinate tensor Gauss-Legendre
inline cplx simplex_bruteforce(const std::vector<Mat>& ops, const RVec& lam, double eps, int n)
{
    int k = int(ops.size()) - 1;
    auto E = [&](double s) { return (-s * eps * lam.array()).exp().matrix().cast<cplx>().asDiagonal(); };
    if (k == 0) return (ops[0] * E(1.0)).trace();
    auto [x, w] = gauss_legendre01(n);
    std::vector<int> idx(size_t(k), 0);
    cplx total = 0;
    while (true) {
        double rem = 1, jac = 1, wt = 1;
        std::vector<double> s(size_t(k + 1));
        for (int i = 0; i < k; ++i) {
            double u = x(idx[size_t(i)]);
            s[size_t(i)] = rem * u;
            jac *= std::pow(rem, 1.0);
            rem *= 1 - u;
            wt *= w(idx[size_t(i)]);
        }
        s[size_t(k)] = rem;
        Mat M = ops[0];
        for (int i = 1; i <= k; ++i) M = M * E(s[size_t(i - 1)]) * ops[size_t(i)];
        total += wt * jac * (M * E(s[size_t(k)])).trace();
        int i = 0;
        while (i < k && idx[size_t(i)] == n - 1) idx[size_t(i++)] = 0;
        if (i == k) break;
        ++idx[size_t(i)];
    }
    return total;
}

inline void trace_form_bruteforce(TaskContext& c)
{
    c.allow({"weight", "operators", "eps", "quad_points"});
    Multiplier qm = c.weight();
    auto ol = c.ops("operators");
    if (ol.size() > 4) throw ScenarioError(c.at("operators") + ": at most four operators (k <= 3)");
    auto N = c.explicit_cutoff();
    if (!N) throw ScenarioError(c.at("cutoff_N") + ": brute-force comparison needs an explicit cutoff");
    if (*N > 8) throw ScenarioError(c.at("cutoff_N") + ": brute-force comparison is limited to cutoff N <= 8");
    c.info("cutoff_N", double(*N), "fixed");
    auto Q = tasks::weight_at(qm, *N);
    std::vector<SpectralOperator> ops;
    std::vector<Mat> dense;
    for (auto& o : ol) {
        ops.push_back(o.at(*N));
        dense.push_back(ops.back().entries);
    }
    int n = c.integer("quad_points", 32);
    double tol = c.tol(1e-8);
    for (double e : c.numbers("eps", {0.05, 0.1})) {
        cplx v = trace_form(ops, Q, e, false);
        cplx bf = simplex_bruteforce(dense, Q.eigenvalues, e, n);
        c.check_rel("trace_form" + tag("eps", e), v, bf, "simplex quadrature", tol, 1.0);
    }
}

inline void volterra_order(TaskContext& c)
{
    c.allow({"weight", "perturbation", "eps", "scales", "orders"});
    Multiplier qm = c.weight();
    auto pl = c.op("perturbation");
    double eps = c.positive("eps", 0.1), tol = c.tol(0.2);
    auto scales = c.numbers("scales", {0.4, 0.2, 0.1, 0.05});
    auto orders = c.integers("orders", {0, 1, 2, 3});
    int N = c.explicit_cutoff().value_or(16);
    c.info("cutoff_N", double(N), "fixed");
    auto Q0 = tasks::weight_at(qm, N);
    auto Q1 = pl.at(N);
    if (!(Q1.order < Q0.order_q)) throw ScenarioError(c.at("perturbation") + ": order must be below the weight order");
    Mat H0 = Q0.eigenvalues.cast<cplx>().asDiagonal();
    for (int K : orders) {
        std::vector<double> d;
        for (double s : scales) {
            Mat Hs = -eps * (H0 + s * Q1.entries);
            cplx exact = Hs.exp().trace();
            d.push_back(std::abs(exact - volterra_sum(Q0, Q1 * cplx(s), eps, K, false)));
            c.info("defect" + tag("K", K) + tag("scale", s), d.back(), "|tr e^{-eps(Q0 + s Q1)} - volterra_sum|");
        }
        double slope = loglog_slope(scales, d);
        c.check("truncation_order" + tag("K", K), slope, std::to_string(K + 1), std::abs(slope - (K + 1)), tol);
    }
}

inline void prop_b3(TaskContext& c)
{
    c.allow({"weight", "operators", "limits", "eps", "min_slope"});
    Multiplier qm = c.weight();
    auto ol = c.ops("operators");
    auto limits = c.integers("limits", std::vector<int>(ol.size() - 1, 5));
    auto eps = c.numbers("eps", {0.1, 0.05, 0.025, 0.0125});
    int N = c.explicit_cutoff().value_or(300);
    c.info("cutoff_N", double(N), "fixed");
    auto Q = tasks::weight_at(qm, N);
    std::vector<SpectralOperator> ops;
    for (auto& o : ol) ops.push_back(o.at(N));
    std::vector<double> d;
    for (double e : eps) {
        cplx tf = trace_form(ops, Q, e, false), ex = prop_b3_expansion(ops, Q, e, limits, false);
        d.push_back(std::abs(tf - ex));
        c.info("defect" + tag("eps", e), d.back(), "trace_form - truncated expansion = " + fmt17(ex));
    }
    double slope = loglog_slope(eps, d), ms = c.number("min_slope", 2.0);
    c.check("defect_slope", slope, ">= " + fmt17(ms), std::max(0.0, ms - slope), 0.0);
}

inline void thm_b4(TaskContext& c)
{
    c.allow({"weight", "operators", "limits", "j", "floor", "literal"});
    Multiplier qm = c.weight();
    auto ol = c.ops("operators");
    std::vector<Symbol> syms;
    double alpha = 0;
    for (size_t i = 0; i < ol.size(); ++i) {
        if (!ol[i].symbol) throw ScenarioError(lit::join(c.at("operators"), i) + ": coefficient prediction needs symbolic operators");
        syms.push_back(*ol[i].symbol);
        alpha += ol[i].order();
    }
    auto limits = c.integers("limits", std::vector<int>(ol.size() - 1, 3));
    if (limits.size() + 1 != ol.size()) throw ScenarioError(c.at("limits") + ": one truncation limit per operator after the first");
    int N = c.explicit_cutoff().value_or(600);
    c.info("cutoff_N", double(N), "fixed");
    auto Q = tasks::weight_at(qm, N);
    std::vector<SpectralOperator> ops;
    for (auto& o : ol) ops.push_back(o.at(N));
    if (!is_integer(Q.order_q)) throw ScenarioError(c.at("weight") + ": weight order must be an integer");
    auto eps = c.opt.grid.points();
    auto ex = fit_expansion(eps, TraceForm{ops, Q, false}.values(eps), {int(std::round(Q.order_q)), 1, alpha}, c.opt.fit);
    c.fit_info("fit", ex);
    double tol = c.tol(1e-3), floor = c.number("floor", 1e-6);
    bool lit_ = c.boolean("literal", true);
    for (int j : c.integers("j", {0, 1})) {
        auto p = thm_b4_coefficient(syms, qm, j, limits);
        auto t = tag("j", j) + tag("lambda", p.lambda);
        c.check_rel("coefficient" + t, ex.coeff_a(j), p.value, "predicted", tol, floor);
        if (lit_ && ol.size() > 2) {
            auto pl = thm_b4_coefficient(syms, qm, j, limits, MomentConvention::literal);
            c.info("literal_moment_prediction" + t, pl.value, "Dirichlet moments", rel_defect(ex.coeff_a(j), pl.value, floor));
        }
    }
}

// ---------------------------------------------------------------- algebra and fitter

inline void acs_identities_task(TaskContext& c)
{
    c.allow({"trials"});
    int trials = c.integer("trials", 10000);
    double tol = c.tol(1e-14);
    auto r = acs_identities(trials, c.seed());
    c.check_abs("lemma10_plus", r.lemma10_plus, tol);
    c.check_abs("minus_antisymmetry", r.minus_antisymmetry, tol);
    c.check_abs("minus_tangent", r.minus_tangent, tol);
    c.check_abs("minus_vs_direct", r.minus_vs_direct, tol);
    c.check_abs("compatibility_plus", r.compat_plus, tol);
    c.check_abs("compatibility_minus", r.compat_minus, tol);
    c.check_abs("even_commute", r.even_commute, tol);
    c.check_abs("odd_anticommute", r.odd_anticommute, tol);
    c.check_abs("prop11_pattern", r.prop11_pattern, tol);
    c.check_abs("prop11_zero_diagonal", r.prop11_zero_diag, tol);
    c.info("max_abs_gamma", r.max_abs_gamma);
    auto p = ACPoint::standard();
    Mat2 I = Mat2::Identity();
    cplx tI = complexified_trace(I, p), tJ = complexified_trace(p.J, p);
    c.check("anchor_identity", tI, "1", std::abs(tI - 1.0), 0.0);
    c.check("anchor_J", tJ, "i", std::abs(tJ - cplx(0, 1)), 0.0);
    std::mt19937_64 rng(c.seed() + 1);
    double d = 0;
    for (int t = 0; t < 100; ++t) {
        auto q = ACPoint::random(rng);
        d = std::max({d, std::abs(complexified_trace(I, q) - 1.0), std::abs(complexified_trace(q.J, q) - cplx(0, 1))});
    }
    c.check_abs("anchors_random_points", d, tol);
    c.info("unnormalized_convention_identity", complexified_trace(I, p, TraceConvention::unnormalized), "tr A + i tr JA");
    c.info("unnormalized_convention_J", complexified_trace(p.J, p, TraceConvention::unnormalized), "tr A + i tr JA");
}

inline void fit_synthetic(TaskContext& c)
{
    c.allow({"lattice", "terms", "J", "mus"});
    ExponentLattice L{2, 1, 0.0};
    if (c.has("lattice")) {
        const auto& lj = c.raw("lattice");
        auto lp = c.at("lattice");
        lit::allow_keys(lj, {"m", "n", "alpha"}, lp);
        L.m = lit::integer_or(lj, "m", 2, lp);
        L.n = lit::integer_or(lj, "n", 1, lp);
        L.alpha = lit::number_or(lj, "alpha", 0.0, lp);
    }
    int terms = c.integer("terms", 8);
    FitOptions fo = c.opt.fit;
    fo.J = c.integer("J", 4);
    auto cols = detail::design_columns(L, fo.J);
    if (terms > int(cols.size())) throw ScenarioError(c.at("terms") + ": lattice truncation has only " + std::to_string(cols.size()) + " slots");
    std::vector<size_t> order(cols.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return cols[a].lam < cols[b].lam; });
    std::mt19937_64 rng(c.seed());
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<cplx> coef(cols.size(), 0.0);
    for (int t = 0; t < terms; ++t) coef[order[size_t(t)]] = cplx(u(rng), u(rng));
    auto eps = c.opt.grid.points();
    std::vector<cplx> vals;
    for (double e : eps) {
        cplx s = 0;
        for (size_t k = 0; k < cols.size(); ++k) s += coef[k] * detail::column_value<double>(cols[k], e);
        vals.push_back(s);
    }
    auto ex = fit_expansion(eps, vals, L, fo);
    c.fit_info("fit", ex);
    double err = 0, scale = 0;
    cplx b0 = 0;
    for (size_t k = 0; k < cols.size(); ++k) {
        auto& col = cols[k];
        cplx got = col.kind == detail::ColKind::a ? ex.coeff_a(col.index) : col.kind == detail::ColKind::b ? ex.coeff_b(col.index) : ex.coeff_c(col.index);
        err = std::max(err, std::abs(got - coef[k]));
        scale = std::max(scale, std::abs(coef[k]));
        if (col.kind == detail::ColKind::b && std::abs(col.lam) < 1e-12) b0 = coef[k];
    }
    double tol = c.tol(1e-8);
    c.check("coefficient_recovery", err / scale, "max coefficient error / max coefficient", err / scale, tol);
    auto mus = c.numbers("mus", {0.0, 1.0, euler_gamma});
    std::vector<cplx> lim;
    for (double m : mus) lim.push_back(renormalized_limit(ex, m));
    for (size_t i = 1; i < mus.size(); ++i) {
        cplx slope = (lim[i] - lim[0]) / (mus[i] - mus[0]);
        c.check_rel("lim_mu_slope" + tag("mu", mus[i]), slope, -b0, "-b_0", tol, 1.0);
    }
}

}  // namespace tasks

struct TaskType {
    std::function<void(TaskContext&)> run;
    const char* description;
};

inline const std::map<std::string, TaskType>& task_registry()
{
    static const std::map<std::string, TaskType> reg{
        {"findim_lemma1", {tasks::findim_lemma1, "finite-rank determinant curvature vs -str of the superbundle curvature"}},
        {"heat_coefficients", {tasks::heat_coefficients, "fitted heat-trace coefficients vs expected values and residue laws"}},
        {"residue_calibration", {tasks::residue_calibration, "symbol and zeta residues, zeta values, determinant anchors"}},
        {"weighted_trace", {tasks::weighted_trace_task, "mu-renormalized trace of an operator"}},
        {"residue", {tasks::residue_task, "Wodzicki residue by the zeta route, checked against the symbol"}},
        {"zeta", {tasks::zeta_task, "zeta-regularized trace tr(A Q^-z) or its pole residue"}},
        {"det", {tasks::det_task, "mu-renormalized log determinant"}},
        {"lemma2_commutator", {tasks::lemma2_commutator, "weighted trace of a commutator vs its residue defect"}},
        {"lemma2_derivative", {tasks::lemma2_derivative, "derivative of a weighted trace along a weight family"}},
        {"prop4", {tasks::prop4, "determinant curvature vs -r1 plus the JLO two-form"}},
        {"theorem3", {tasks::theorem3, "renormalized curvature defect vs the residue obstruction"}},
        {"transgression", {tasks::transgression, "eps-variation of the degree-two Chern form"}},
        {"connection_forms", {tasks::connection_forms, "the two expressions of the determinant connection form"}},
        {"chern_mu", {tasks::chern_mu, "renormalized first Chern form and its mu-dependence"}},
        {"trace_form", {tasks::trace_form_bruteforce, "trace_form vs tensor quadrature over the simplex"}},
        {"volterra", {tasks::volterra_order, "Volterra series truncation order vs a matrix exponential"}},
        {"b3", {tasks::prop_b3, "trace form vs its truncated bracket expansion"}},
        {"b4", {tasks::thm_b4, "predicted vs fitted trace-form coefficients"}},
        {"acs_identities", {tasks::acs_identities_task, "almost complex structure identities and trace anchors"}},
        {"fit_synthetic", {tasks::fit_synthetic, "fitter recovery of synthetic expansions"}},
    };
    return reg;
}

inline Report run_scenario(const Scenario& sc, const RunOptions& ro = {})
{
    Report rep;
    rep.scenario = sc.name;
    auto& reg = task_registry();
    for (size_t i = 0; i < sc.tasks.size(); ++i) {
        const auto& t = sc.tasks[i];
        std::string type = t.at("task").get<std::string>();
        auto it = reg.find(type);
        if (it == reg.end()) throw ScenarioError(lit::join(lit::join("tasks", i), "task") + ": unknown task type '" + type + "'");
        TaskContext ctx(sc, t, i, ro, rep.rows);
        size_t first = rep.rows.size();
        auto t0 = std::chrono::steady_clock::now();
        try {
            it->second.run(ctx);
        } catch (const ScenarioError&) {
            throw;
        } catch (const std::exception& e) {
            ctx.check("error", std::nan(""), e.what(), std::nan(""), 0.0);
        }
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool ok = true;
        for (size_t k = first; k < rep.rows.size(); ++k) ok = ok && rep.rows[k].pass;
        if (ro.timings) std::cerr << "[" << sc.name << "] " << ctx.id << " (" << type << "): " << (ok ? "pass" : "FAIL") << ", " << sec << " s\n";
        if (!ok && ro.fail_fast) break;
    }
    return rep;
}

// ---------------------------------------------------------------- output

inline std::string utc_timestamp()
{
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace detail {

inline std::string json_num(double v) { return std::isfinite(v) ? fmt17(v) : "null"; }
inline std::string json_num(const std::optional<double>& v) { return v ? json_num(*v) : "null"; }
inline std::string json_str(const std::string& s) { return ojson(s).dump(); }

inline void json_rows(std::ostream& os, const std::vector<ReportRow>& rows, const std::string& indent)
{
    os << "[";
    for (size_t i = 0; i < rows.size(); ++i) {
        auto& r = rows[i];
        os << (i ? "," : "") << "\n" << indent << "  {"
           << "\"task_id\": " << json_str(r.task_id) << ", \"quantity\": " << json_str(r.quantity) << ", \"value_re\": " << json_num(r.value.real())
           << ", \"value_im\": " << json_num(r.value.imag()) << ", \"reference\": " << json_str(r.reference) << ", \"defect\": " << json_num(r.defect)
           << ", \"tolerance\": " << json_num(r.tolerance) << ", \"pass\": " << (r.pass ? "true" : "false")
           << ", \"route\": " << (r.route.empty() ? "null" : json_str(r.route)) << ", \"tail_bound\": " << json_num(r.tail_bound)
           << ", \"residual\": " << json_num(r.residual) << "}";
    }
    os << (rows.empty() ? "" : "\n" + indent) << "]";
}

inline std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string r = "\"";
    for (char ch : s) r += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return r + "\"";
}

inline std::string csv_num(const std::optional<double>& v) { return v && std::isfinite(*v) ? fmt17(*v) : ""; }

}  // namespace detail

inline const char* csv_header = "task_id,quantity,value_re,value_im,reference,defect,tolerance,pass,route,tail_bound,residual";

inline void write_csv_row(std::ostream& os, const ReportRow& r)
{
    using namespace detail;
    os << csv_field(r.task_id) << ',' << csv_field(r.quantity) << ',' << csv_num(r.value.real()) << ',' << csv_num(r.value.imag()) << ','
       << csv_field(r.reference) << ',' << csv_num(r.defect) << ',' << csv_num(r.tolerance) << ',' << (r.pass ? "true" : "false") << ','
       << csv_field(r.route) << ',' << csv_num(r.tail_bound) << ',' << csv_num(r.residual) << '\n';
}

inline void write_json(std::ostream& os, const Report& rep, const std::string& generated_at)
{
    os << "{\n  \"scenario\": " << detail::json_str(rep.scenario) << ",\n  \"generated_at\": " << detail::json_str(generated_at)
       << ",\n  \"all_pass\": " << (rep.all_pass() ? "true" : "false") << ",\n  \"rows\": ";
    detail::json_rows(os, rep.rows, "  ");
    os << "\n}\n";
}

inline void write_csv(std::ostream& os, const Report& rep)
{
    os << csv_header << '\n';
    for (auto& r : rep.rows) write_csv_row(os, r);
}

// ---------------------------------------------------------------- sweep

struct SweepSeries {
    std::string task_id, quantity;
    std::vector<double> values, defects;
    std::optional<double> slope;
};

struct SweepResult {
    std::string scenario, param;
    std::vector<double> values;
    std::vector<Report> reports;
    std::vector<SweepSeries> aggregate;

    bool all_pass() const
    {
        for (auto& r : reports)
            if (!r.all_pass()) return false;
        return true;
    }
};

// sets a dotted key wherever it already exists: top level, any task, any family
inline int set_parameter(ojson& doc, const std::string& param, double value)
{
    std::vector<std::string> parts;
    std::stringstream ss(param);
    for (std::string s; std::getline(ss, s, '.');) parts.push_back(s);
    if (parts.empty() || std::any_of(parts.begin(), parts.end(), [](auto& s) { return s.empty(); }))
        throw ScenarioError("sweep parameter '" + param + "': malformed path");
    int count = 0;
    auto apply = [&](ojson& root) {
        ojson* cur = &root;
        for (auto& p : parts) {
            if (!cur->is_object() || !cur->contains(p)) return;
            cur = &(*cur)[p];
        }
        if (!cur->is_number()) throw ScenarioError("sweep parameter '" + param + "' is not numeric");
        // integer-only keys reject fractional values when the scenario is parsed
        if (cur->is_number_integer() && is_integer(value, 0.0))
            *cur = std::int64_t(std::llround(value));
        else
            *cur = value;
        ++count;
    };
    apply(doc);
    if (doc.contains("tasks") && doc["tasks"].is_array())
        for (auto& t : doc["tasks"]) apply(t);
    if (doc.contains("families") && doc["families"].is_object())
        for (auto& [k, f] : doc["families"].items()) apply(f);
    if (count == 0) throw ScenarioError("sweep parameter '" + param + "' not found in the scenario");
    return count;
}

inline SweepResult sweep(const ojson& doc, const std::string& param, const std::vector<double>& values, const RunOptions& ro = {})
{
    if (values.empty()) throw ScenarioError("sweep needs at least one value");
    SweepResult res;
    res.param = param;
    res.values = values;
    for (double v : values) {
        ojson d = doc;
        set_parameter(d, param, v);
        auto sc = parse_scenario(d);
        res.scenario = sc.name;
        res.reports.push_back(run_scenario(sc, ro));
    }
    // series keyed by (task, quantity) in first-report order
    for (auto& row : res.reports.front().rows) {
        SweepSeries s{row.task_id, row.quantity, {}, {}, std::nullopt};
        for (size_t i = 0; i < values.size(); ++i)
            for (auto& r : res.reports[i].rows)
                if (r.task_id == row.task_id && r.quantity == row.quantity && r.defect && std::isfinite(*r.defect)) {
                    s.values.push_back(values[i]);
                    s.defects.push_back(*r.defect);
                    break;
                }
        if (s.defects.empty()) continue;
        bool positive = s.defects.size() >= 2;
        for (size_t i = 0; i < s.defects.size(); ++i) positive = positive && s.defects[i] > 0 && s.values[i] > 0;
        if (positive) s.slope = loglog_slope(s.values, s.defects);
        res.aggregate.push_back(s);
    }
    return res;
}

inline void write_json(std::ostream& os, const SweepResult& res, const std::string& generated_at)
{
    using namespace detail;
    os << "{\n  \"scenario\": " << json_str(res.scenario) << ",\n  \"generated_at\": " << json_str(generated_at) << ",\n  \"param\": " << json_str(res.param)
       << ",\n  \"values\": [";
    for (size_t i = 0; i < res.values.size(); ++i) os << (i ? ", " : "") << json_num(res.values[i]);
    os << "],\n  \"all_pass\": " << (res.all_pass() ? "true" : "false") << ",\n  \"reports\": [";
    for (size_t i = 0; i < res.reports.size(); ++i) {
        os << (i ? "," : "") << "\n    {\"value\": " << json_num(res.values[i]) << ", \"all_pass\": " << (res.reports[i].all_pass() ? "true" : "false")
           << ", \"rows\": ";
        json_rows(os, res.reports[i].rows, "    ");
        os << "}";
    }
    os << "\n  ],\n  \"aggregate\": [";
    for (size_t i = 0; i < res.aggregate.size(); ++i) {
        auto& s = res.aggregate[i];
        os << (i ? "," : "") << "\n    {\"task_id\": " << json_str(s.task_id) << ", \"quantity\": " << json_str(s.quantity) << ", \"values\": [";
        for (size_t k = 0; k < s.values.size(); ++k) os << (k ? ", " : "") << json_num(s.values[k]);
        os << "], \"defects\": [";
        for (size_t k = 0; k < s.defects.size(); ++k) os << (k ? ", " : "") << json_num(s.defects[k]);
        os << "], \"loglog_slope\": " << json_num(s.slope) << "}";
    }
    os << "\n  ]\n}\n";
}

// one line per (task, quantity, value), slope repeated for plotting
inline void write_csv(std::ostream& os, const SweepResult& res)
{
    using namespace detail;
    os << "task_id,quantity,param_value,defect,loglog_slope\n";
    for (auto& s : res.aggregate)
        for (size_t k = 0; k < s.values.size(); ++k)
            os << csv_field(s.task_id) << ',' << csv_field(s.quantity) << ',' << fmt17(s.values[k]) << ',' << fmt17(s.defects[k]) << ','
               << csv_num(s.slope) << '\n';
}

}  // namespace rt
