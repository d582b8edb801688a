#pragma once

#include "acsalg.hpp"
#include "detbundle.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace rt {

using ojson = nlohmann::ordered_json;

struct ScenarioError : Error {
    using Error::Error;
};

// symbolic operators quantize at any cutoff; explicit matrices carry their own
struct OperatorLiteral {
    std::optional<Symbol> symbol;
    Mat matrix;
    double matrix_order = 0;

    SpectralOperator at(int N) const
    {
        if (symbol) return quantize(*symbol, N);
        if (matrix.rows() != 2 * N + 1)
            throw ScenarioError("matrix literal has size " + std::to_string(matrix.rows()) + ", cutoff needs " + std::to_string(2 * N + 1));
        return SpectralOperator::dense(matrix, N, matrix_order);
    }

    double order() const { return symbol ? symbol->order() : matrix_order; }
    int fixed_cutoff() const { return symbol ? -1 : int(matrix.rows() - 1) / 2; }
};

namespace lit {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
inline std::string join(const std::string& path, size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline void allow_keys(const ojson& j, std::initializer_list<const char*> keys, const std::string& path)
{
    if (!j.is_object()) throw ScenarioError(path + ": expected an object");
    for (auto& [k, v] : j.items()) {
        bool ok = false;
        for (auto* a : keys) ok = ok || k == a;
        if (!ok) throw ScenarioError(join(path, k) + ": unknown key");
    }
}

inline bool has(const ojson& j, const std::string& key) { return j.is_object() && j.contains(key); }

inline const ojson& need(const ojson& j, const std::string& key, const std::string& path)
{
    if (!j.is_object()) throw ScenarioError(path + ": expected an object");
    if (!j.contains(key)) throw ScenarioError(join(path, key) + ": missing required key");
    return j.at(key);
}

inline double number(const ojson& j, const std::string& path)
{
    if (!j.is_number()) throw ScenarioError(path + ": expected a number");
    return j.get<double>();
}

inline double number_or(const ojson& j, const std::string& key, double def, const std::string& path)
{
    return has(j, key) ? number(j.at(key), join(path, key)) : def;
}

inline double positive_or(const ojson& j, const std::string& key, double def, const std::string& path)
{
    double v = number_or(j, key, def, path);
    if (!(v > 0)) throw ScenarioError(join(path, key) + ": must be positive");
    return v;
}

inline int integer(const ojson& j, const std::string& path)
{
    if (!j.is_number_integer()) throw ScenarioError(path + ": expected an integer");
    return j.get<int>();
}

inline int integer_or(const ojson& j, const std::string& key, int def, const std::string& path)
{
    return has(j, key) ? integer(j.at(key), join(path, key)) : def;
}

inline bool boolean_or(const ojson& j, const std::string& key, bool def, const std::string& path)
{
    if (!has(j, key)) return def;
    if (!j.at(key).is_boolean()) throw ScenarioError(join(path, key) + ": expected true or false");
    return j.at(key).get<bool>();
}

inline std::string string_or(const ojson& j, const std::string& key, const std::string& def, const std::string& path)
{
    if (!has(j, key)) return def;
    if (!j.at(key).is_string()) throw ScenarioError(join(path, key) + ": expected a string");
    return j.at(key).get<std::string>();
}

// number or [re, im]
inline cplx complex_number(const ojson& j, const std::string& path)
{
    if (j.is_number()) return j.get<double>();
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) return {j[0].get<double>(), j[1].get<double>()};
    throw ScenarioError(path + ": expected a number or [re, im]");
}

inline std::vector<double> numbers(const ojson& j, const std::string& path)
{
    if (!j.is_array() || j.empty()) throw ScenarioError(path + ": expected a nonempty array of numbers");
    std::vector<double> v;
    for (size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], join(path, i)));
    return v;
}

inline std::vector<int> integers(const ojson& j, const std::string& path)
{
    if (!j.is_array()) throw ScenarioError(path + ": expected an array of integers");
    std::vector<int> v;
    for (size_t i = 0; i < j.size(); ++i) v.push_back(integer(j[i], join(path, i)));
    return v;
}

inline void tuple(const ojson& j, size_t n, const std::string& path, const char* what)
{
    if (!j.is_array() || j.size() != n) throw ScenarioError(path + ": expected " + what);
}

// coeffs: [[degree, value], ...]
inline Multiplier multiplier_body(const ojson& j, const std::string& path)
{
    auto p = join(path, "coeffs");
    const auto& cs = need(j, "coeffs", path);
    if (!cs.is_array() || cs.empty()) throw ScenarioError(p + ": expected a nonempty array of [degree, value]");
    Multiplier m;
    m.poly.clear();
    for (size_t i = 0; i < cs.size(); ++i) {
        auto pi = join(p, i);
        tuple(cs[i], 2, pi, "[degree, value]");
        int d = integer(cs[i][0], join(pi, 0));
        if (d < 0) throw ScenarioError(join(pi, 0) + ": degree must be nonnegative");
        if (size_t(d) >= m.poly.size()) m.poly.resize(size_t(d) + 1, 0.0);
        m.poly[size_t(d)] += number(cs[i][1], join(pi, 1));
    }
    m.power = number_or(j, "power", 1.0, path);
    try {
        m.degree();
    } catch (const Error&) {
        throw ScenarioError(p + ": polynomial is identically zero");
    }
    return m;
}

// trig: [[mode, cos_coeff, sin_coeff], ...], exp: [[mode, re, im], ...]
inline Trig trig_body(const ojson& j, const std::string& path)
{
    if (!has(j, "trig") && !has(j, "exp")) throw ScenarioError(path + ": multiplication needs trig or exp");
    Trig t;
    if (has(j, "trig")) {
        auto p = join(path, "trig");
        const auto& arr = j.at("trig");
        if (!arr.is_array()) throw ScenarioError(p + ": expected an array of [mode, cos, sin]");
        for (size_t i = 0; i < arr.size(); ++i) {
            auto pi = join(p, i);
            tuple(arr[i], 3, pi, "[mode, cos, sin]");
            int k = integer(arr[i][0], join(pi, 0));
            if (k < 0) throw ScenarioError(join(pi, 0) + ": mode must be nonnegative");
            t += Trig::from_cos_sin({{k, number(arr[i][1], join(pi, 1)), number(arr[i][2], join(pi, 2))}});
        }
    }
    if (has(j, "exp")) {
        auto p = join(path, "exp");
        const auto& arr = j.at("exp");
        if (!arr.is_array()) throw ScenarioError(p + ": expected an array of [mode, re, im]");
        for (size_t i = 0; i < arr.size(); ++i) {
            auto pi = join(p, i);
            tuple(arr[i], 3, pi, "[mode, re, im]");
            t.c[integer(arr[i][0], join(pi, 0))] += cplx(number(arr[i][1], join(pi, 1)), number(arr[i][2], join(pi, 2)));
        }
    }
    t.prune();
    return t;
}

using OperatorTable = std::map<std::string, OperatorLiteral>;

inline OperatorLiteral operator_literal(const ojson& j, const std::string& path, const OperatorTable& named);

inline Symbol symbolic(const ojson& j, const std::string& path, const OperatorTable& named)
{
    auto o = operator_literal(j, path, named);
    if (!o.symbol) throw ScenarioError(path + ": matrix literals cannot be combined or used symbolically");
    return *o.symbol;
}

inline OperatorLiteral operator_literal(const ojson& j, const std::string& path, const OperatorTable& named)
{
    if (j.is_string()) {
        auto it = named.find(j.get<std::string>());
        if (it == named.end()) throw ScenarioError(path + ": unknown operator '" + j.get<std::string>() + "'");
        return it->second;
    }
    if (!j.is_object()) throw ScenarioError(path + ": expected an operator literal or a name");
    auto kind = string_or(j, "kind", "", path);
    OperatorLiteral o;
    if (kind == "identity") {
        allow_keys(j, {"kind", "scale"}, path);
        o.symbol = Symbol::identity();
    } else if (kind == "multiplier") {
        allow_keys(j, {"kind", "coeffs", "power", "scale"}, path);
        o.symbol = Symbol::multiplier(multiplier_body(j, path));
    } else if (kind == "multiplication") {
        allow_keys(j, {"kind", "trig", "exp", "scale"}, path);
        o.symbol = Symbol::multiplication(trig_body(j, path));
    } else if (kind == "product" || kind == "sum") {
        const char* key = kind == "product" ? "factors" : "terms";
        allow_keys(j, {"kind", key, "scale"}, path);
        auto p = join(path, key);
        const auto& arr = need(j, key, path);
        if (!arr.is_array() || arr.empty()) throw ScenarioError(p + ": expected a nonempty array of operator literals");
        Symbol s = symbolic(arr[0], join(p, 0), named);
        for (size_t i = 1; i < arr.size(); ++i) {
            Symbol t = symbolic(arr[i], join(p, i), named);
            s = kind == "product" ? s * t : s + t;
        }
        o.symbol = s;
    } else if (kind == "matrix") {
        allow_keys(j, {"kind", "entries", "order", "scale"}, path);
        auto p = join(path, "entries");
        const auto& rows = need(j, "entries", path);
        if (!rows.is_array() || rows.size() % 2 == 0) throw ScenarioError(p + ": expected an odd number (2N+1) of rows");
        auto n = Eigen::Index(rows.size());
        o.matrix.resize(n, n);
        for (size_t r = 0; r < rows.size(); ++r) {
            auto pr = join(p, r);
            if (!rows[r].is_array() || rows[r].size() != rows.size()) throw ScenarioError(pr + ": expected " + std::to_string(n) + " entries");
            for (size_t c = 0; c < rows.size(); ++c) o.matrix(Eigen::Index(r), Eigen::Index(c)) = complex_number(rows[r][c], join(pr, c));
        }
        o.matrix_order = number_or(j, "order", 0.0, path);
    } else if (kind.empty()) {
        throw ScenarioError(join(path, "kind") + ": missing required key");
    } else {
        throw ScenarioError(join(path, "kind") + ": unknown operator kind '" + kind + "'");
    }
    if (has(j, "scale")) {
        cplx s = complex_number(j.at("scale"), join(path, "scale"));
        if (o.symbol)
            o.symbol = *o.symbol * s;
        else
            o.matrix *= s;
    }
    return o;
}

using WeightTable = std::map<std::string, Multiplier>;

// weights are positive Fourier multipliers of positive order
inline Multiplier weight_literal(const ojson& j, const std::string& path, const WeightTable& named)
{
    if (j.is_string()) {
        auto it = named.find(j.get<std::string>());
        if (it == named.end()) throw ScenarioError(path + ": unknown weight '" + j.get<std::string>() + "'");
        return it->second;
    }
    if (string_or(j, "kind", "", path) != "multiplier") throw ScenarioError(join(path, "kind") + ": a weight must be a multiplier literal");
    allow_keys(j, {"kind", "coeffs", "power"}, path);
    auto m = multiplier_body(j, path);
    if (m.order() <= 0) throw ScenarioError(path + ": weight must have positive order");
    return m;
}

}  // namespace lit

struct AffineSymbol {
    std::optional<Symbol> c0, c1, c2;

    AffineOperator at(int N) const
    {
        auto q = [N](const std::optional<Symbol>& s) { return s ? quantize(*s, N) : SpectralOperator::zero(N); };
        return {q(c0), {q(c1), q(c2)}};
    }
};

struct FamilySpec {
    std::string name;
    AffineSymbol L_plus;
    std::array<AffineSymbol, 2> theta_plus, theta_minus;
    Multiplier principal;
    double fd_step = 1e-3;
    std::array<double, 2> row_norm{};  // of the b-coefficients of L+

    OperatorFamily build(int N) const
    {
        OperatorFamily f;
        f.name = name;
        f.cutoff_N = N;
        f.order_q = 2 * principal.order();
        f.L_plus = L_plus.at(N);
        for (size_t i = 0; i < 2; ++i) {
            f.theta_plus[i] = theta_plus[i].at(N);
            f.theta_minus[i] = theta_minus[i].at(N);
        }
        f.principal = principal;
        f.fd_step = fd_step;
        return f;
    }

    // perturbation bound over the finite-difference stencil around b
    double beta(const Base& b) const
    {
        double m = 2 * fd_step;
        return (std::abs(b[0]) + m) * row_norm[0] + (std::abs(b[1]) + m) * row_norm[1];
    }
};

namespace lit {

inline AffineSymbol affine(const ojson& j, const std::string& path, const OperatorTable& named)
{
    allow_keys(j, {"const", "b1", "b2"}, path);
    AffineSymbol a;
    if (has(j, "const")) a.c0 = symbolic(j.at("const"), join(path, "const"), named);
    if (has(j, "b1")) a.c1 = symbolic(j.at("b1"), join(path, "b1"), named);
    if (has(j, "b2")) a.c2 = symbolic(j.at("b2"), join(path, "b2"), named);
    return a;
}

inline std::array<AffineSymbol, 2> one_form(const ojson& j, const std::string& path, const OperatorTable& named)
{
    if (!j.is_array() || j.size() != 2) throw ScenarioError(path + ": expected two components [theta(d/db1), theta(d/db2)]");
    return {affine(j[0], join(path, 0), named), affine(j[1], join(path, 1), named)};
}

inline FamilySpec family_literal(const std::string& name, const ojson& j, const std::string& path, const OperatorTable& named)
{
    allow_keys(j, {"L_plus", "theta", "theta_plus", "theta_minus", "fd_step", "principal"}, path);
    FamilySpec f;
    f.name = name;
    f.L_plus = affine(need(j, "L_plus", path), join(path, "L_plus"), named);
    if (!f.L_plus.c0) throw ScenarioError(join(path, "L_plus.const") + ": missing required key");
    if (has(j, "theta") && (has(j, "theta_plus") || has(j, "theta_minus")))
        throw ScenarioError(join(path, "theta") + ": give either theta or theta_plus/theta_minus");
    if (has(j, "theta")) f.theta_plus = f.theta_minus = one_form(j.at("theta"), join(path, "theta"), named);
    if (has(j, "theta_plus")) f.theta_plus = one_form(j.at("theta_plus"), join(path, "theta_plus"), named);
    if (has(j, "theta_minus")) f.theta_minus = one_form(j.at("theta_minus"), join(path, "theta_minus"), named);
    f.fd_step = positive_or(j, "fd_step", 1e-3, path);
    if (has(j, "principal")) {
        const auto& p = j.at("principal");
        allow_keys(p, {"coeffs", "power"}, join(path, "principal"));
        f.principal = multiplier_body(p, join(path, "principal"));
    } else {
        // default: L_plus.const itself, when it is a plain multiplier
        const Symbol& s = *f.L_plus.c0;
        if (s.terms.size() != 1 || s.terms[0].mode != 0 || s.terms[0].factors.size() != 1 || s.terms[0].factors[0].shift != 0 ||
            s.terms[0].coeff != cplx(1.0))
            throw ScenarioError(join(path, "principal") + ": required when L_plus.const is not a plain multiplier");
        f.principal = s.terms[0].factors[0].m;
    }
    constexpr int probe = 64;
    auto rn = [](const std::optional<Symbol>& s) { return s ? row_norm(quantize(*s, probe).entries) : 0.0; };
    f.row_norm = {rn(f.L_plus.c1), rn(f.L_plus.c2)};
    return f;
}

inline EpsGrid grid_literal(const ojson& j, const std::string& path, EpsGrid def = {})
{
    allow_keys(j, {"min", "max", "points_per_decade"}, path);
    def.min = number_or(j, "min", def.min, path);
    def.max = number_or(j, "max", def.max, path);
    def.points_per_decade = integer_or(j, "points_per_decade", def.points_per_decade, path);
    if (!(def.min > 0) || !(def.max > def.min)) throw ScenarioError(path + ": need 0 < min < max");
    if (def.points_per_decade < 2) throw ScenarioError(join(path, "points_per_decade") + ": must be >= 2");
    return def;
}

}  // namespace lit

struct Scenario {
    std::string name;
    ojson doc;
    lit::OperatorTable operators;
    lit::WeightTable weights;
    std::map<std::string, FamilySpec> families;
    EpsGrid grid;
    double mu = 0;
    std::optional<int> cutoff_N;
    double tail_tolerance = 1e-12;
    std::uint64_t seed = 1;
    std::vector<ojson> tasks;
    std::string out_format = "json";
    std::string out_path;
};

inline Scenario parse_scenario(const ojson& doc)
{
    using namespace lit;
    allow_keys(doc, {"name", "description", "seed", "eps_grid", "mu", "cutoff", "operators", "weights", "families", "tasks", "output"}, "");
    Scenario s;
    s.doc = doc;
    s.name = string_or(doc, "name", "unnamed", "");
    if (has(doc, "seed")) {
        if (!doc.at("seed").is_number_unsigned()) throw ScenarioError("seed: expected a nonnegative integer");
        s.seed = doc.at("seed").get<std::uint64_t>();
    }
    if (has(doc, "eps_grid")) s.grid = grid_literal(doc.at("eps_grid"), "eps_grid");
    s.mu = number_or(doc, "mu", 0.0, "");
    if (has(doc, "cutoff")) {
        const auto& c = doc.at("cutoff");
        allow_keys(c, {"N", "tail_tolerance"}, "cutoff");
        if (has(c, "N")) {
            s.cutoff_N = integer(c.at("N"), "cutoff.N");
            if (*s.cutoff_N < 1) throw ScenarioError("cutoff.N: must be positive");
        }
        s.tail_tolerance = positive_or(c, "tail_tolerance", s.tail_tolerance, "cutoff");
    }
    if (has(doc, "operators")) {
        const auto& ops = doc.at("operators");
        if (!ops.is_object()) throw ScenarioError("operators: expected an object");
        for (auto& [k, v] : ops.items()) s.operators[k] = operator_literal(v, join("operators", k), s.operators);
    }
    if (has(doc, "weights")) {
        const auto& ws = doc.at("weights");
        if (!ws.is_object()) throw ScenarioError("weights: expected an object");
        for (auto& [k, v] : ws.items()) s.weights[k] = weight_literal(v, join("weights", k), s.weights);
    }
    if (has(doc, "families")) {
        const auto& fs = doc.at("families");
        if (!fs.is_object()) throw ScenarioError("families: expected an object");
        for (auto& [k, v] : fs.items()) s.families[k] = family_literal(k, v, join("families", k), s.operators);
    }
    const auto& tasks = need(doc, "tasks", "");
    if (!tasks.is_array() || tasks.empty()) throw ScenarioError("tasks: expected a nonempty array");
    std::set<std::string> ids;
    for (size_t i = 0; i < tasks.size(); ++i) {
        auto p = join("tasks", i);
        const auto& t = tasks[i];
        if (!t.is_object()) throw ScenarioError(p + ": expected an object");
        if (!need(t, "id", p).is_string()) throw ScenarioError(join(p, "id") + ": expected a string");
        if (!need(t, "task", p).is_string()) throw ScenarioError(join(p, "task") + ": expected a string");
        if (!ids.insert(t.at("id").get<std::string>()).second) throw ScenarioError(join(p, "id") + ": duplicate task id");
        s.tasks.push_back(t);
    }
    if (has(doc, "output")) {
        const auto& o = doc.at("output");
        allow_keys(o, {"format", "path"}, "output");
        s.out_format = string_or(o, "format", "json", "output");
        s.out_path = string_or(o, "path", "", "output");
        if (s.out_format != "json" && s.out_format != "csv") throw ScenarioError("output.format: expected json or csv");
    }
    return s;
}

inline ojson parse_json_text(const std::string& text, const std::string& source)
{
    try {
        return ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        size_t line = 1, col = 1;
        for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string what = e.what();
        auto pos = what.find("syntax error");
        throw ScenarioError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                            (pos == std::string::npos ? std::string("JSON parse error") : what.substr(pos)));
    }
}

inline ojson read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ScenarioError(path + ": cannot open scenario file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json_text(ss.str(), path);
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(read_json_file(path)); }

}  // namespace rt
