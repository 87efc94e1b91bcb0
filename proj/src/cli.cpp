#include "descartes/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "descartes/errors.hpp"
#include "descartes/parallel.hpp"

namespace descartes::cli {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------- error collection

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

std::string nearest(const std::string& key, const std::vector<std::string>& names) {
    std::vector<std::pair<std::size_t, std::string>> d;
    // substring matches first (sleigh -> chaplygin_sleigh), then edit distance
    for (const auto& n : names)
        d.emplace_back(!key.empty() && n.find(key) != std::string::npos ? 0 : 1 + edit_distance(key, n), n);
    std::stable_sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::string out;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, d.size()); ++i) out += (i ? ", " : "") + d[i].second;
    return out;
}

struct Errors {
    std::vector<std::string> list;
    void add(const std::string& path, const std::string& msg) { list.push_back(path + ": " + msg); }
};

const char* type_name(const json& j) {
    if (j.is_object()) return "object";
    if (j.is_array()) return "array";
    if (j.is_string()) return "string";
    if (j.is_boolean()) return "boolean";
    if (j.is_number()) return "number";
    return "null";
}

void check_keys(const json& obj, const std::string& path, const std::vector<std::string>& allowed, Errors& err) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            err.add(path + "." + it.key(), "unknown key; nearest: " + nearest(it.key(), allowed));
}

std::optional<double> number(const json& obj, const std::string& key, const std::string& path, Errors& err) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj[key];
    if (!v.is_number()) {
        err.add(path + "." + key, std::string("expected a number, got ") + type_name(v));
        return std::nullopt;
    }
    return v.get<double>();
}

std::optional<std::uint64_t> count(const json& obj, const std::string& key, const std::string& path, Errors& err) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj[key];
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        err.add(path + "." + key, "expected a non-negative integer");
        return std::nullopt;
    }
    return v.get<std::uint64_t>();
}

std::optional<std::string> string(const json& obj, const std::string& key, const std::string& path, Errors& err) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj[key];
    if (!v.is_string()) {
        err.add(path + "." + key, std::string("expected a string, got ") + type_name(v));
        return std::nullopt;
    }
    return v.get<std::string>();
}

std::optional<bool> boolean(const json& obj, const std::string& key, const std::string& path, Errors& err) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj[key];
    if (!v.is_boolean()) {
        err.add(path + "." + key, std::string("expected true or false, got ") + type_name(v));
        return std::nullopt;
    }
    return v.get<bool>();
}

/// Expression with identifier checks: x1..x_dim, v1..v_dim when allowed, and the listed parameters.
std::optional<Expr> expression(const json& v, const std::string& path, int dim, bool velocity,
                               const std::vector<std::string>& params, Errors& err) {
    std::string src;
    if (v.is_string()) {
        src = v.get<std::string>();
    } else if (v.is_number()) {
        src = format_double(v.get<double>());
    } else {
        err.add(path, std::string("expected an expression string, got ") + type_name(v));
        return std::nullopt;
    }
    try {
        expr::ParseOptions opt;
        opt.dimension = dim;
        opt.allow_velocity = velocity;
        Expr e = expr::parse(src, opt);
        bool ok = true;
        for (const auto& name : expr::parameters(e))
            if (std::find(params.begin(), params.end(), name) == params.end()) {
                err.add(path, "unknown identifier '" + name + "'" +
                                  (params.empty() ? std::string() : "; nearest: " + nearest(name, params)));
                ok = false;
            }
        if (!ok) return std::nullopt;
        return e;
    } catch (const ParseError& e) {
        err.add(path, std::string("expression error at ") + e.what() + " in \"" + src + "\"");
    }
    return std::nullopt;
}

std::optional<Expr> expression_at(const json& obj, const std::string& key, const std::string& path, int dim,
                                  bool velocity, const std::vector<std::string>& params, Errors& err) {
    if (!obj.contains(key)) return std::nullopt;
    return expression(obj[key], path + "." + key, dim, velocity, params, err);
}

std::vector<Expr> expression_list(const json& v, const std::string& path, int dim, bool velocity,
                                  const std::vector<std::string>& params, Errors& err) {
    std::vector<Expr> out;
    if (!v.is_array()) {
        err.add(path, std::string("expected an array of expressions, got ") + type_name(v));
        return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        auto e = expression(v[i], path + "[" + std::to_string(i) + "]", dim, velocity, params, err);
        out.push_back(e.value_or(Expr()));
    }
    return out;
}

std::optional<Vec> vector_at(const json& v, const std::string& path, int dim, Errors& err) {
    if (!v.is_array()) {
        err.add(path, std::string("expected an array of numbers, got ") + type_name(v));
        return std::nullopt;
    }
    if (dim >= 0 && static_cast<int>(v.size()) != dim) {
        err.add(path, "expected " + std::to_string(dim) + " components, got " + std::to_string(v.size()));
        return std::nullopt;
    }
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) {
            err.add(path + "[" + std::to_string(i) + "]", "expected a number");
            return std::nullopt;
        }
        out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
}

std::vector<Vec> point_list(const json& v, const std::string& path, int dim, Errors& err) {
    std::vector<Vec> out;
    if (!v.is_array()) {
        err.add(path, "expected an array of points");
        return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i)
        if (auto p = vector_at(v[i], path + "[" + std::to_string(i) + "]", dim, err)) out.push_back(*p);
    return out;
}

std::vector<std::string> keys_of(const catalog::Params& p) {
    std::vector<std::string> out;
    for (const auto& [k, v] : p) out.push_back(k);
    return out;
}

const std::vector<std::string> kChecks = {"constraint_drift",   "classical_constraint_drift",
                                          "equivalence",        "lagrange_residual",
                                          "consistency_residual", "dual_route_lambda",
                                          "structure_antisymmetry", "frame_identity",
                                          "field_identity",     "literal_pde",
                                          "runs_completed",     "closedness",
                                          "gradient_match",     "orbit_invariance",
                                          "plane_reduction",    "rot_form",
                                          "structure_route",    "bracket_sum",
                                          "ode_residual",       "reconciliation",
                                          "angular_momentum",   "radius"};

// ---------------------------------------------------------------- sections

int system_dim(const RunPlan& plan) {
    if (plan.system.inline_def) return plan.system.inline_def->dim;
    return catalog::descriptor(plan.system.catalog).dim;
}

int system_constraints(const RunPlan& plan) {
    if (plan.system.inline_def) return static_cast<int>(plan.system.inline_def->given.size());
    return catalog::descriptor(plan.system.catalog).constraints;
}

std::vector<std::string> system_param_names(const RunPlan& plan) {
    if (plan.system.inline_def) return keys_of(plan.system.inline_def->params);
    std::vector<std::string> out;
    for (const auto& s : catalog::descriptor(plan.system.catalog).params) out.push_back(s.name);
    return out;
}

std::vector<OneFormField> form_rows(const json& v, const std::string& path, int dim,
                                    const std::vector<std::string>& params, Errors& err) {
    std::vector<OneFormField> out;
    if (!v.is_array()) {
        err.add(path, "expected an array of coefficient rows");
        return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        auto row = expression_list(v[i], p, dim, false, params, err);
        if (v[i].is_array() && static_cast<int>(row.size()) != dim)
            err.add(p, "expected " + std::to_string(dim) + " coefficients, got " + std::to_string(row.size()));
        out.push_back(OneFormField{row});
    }
    return out;
}

void parse_system(const json& doc, RunPlan& plan, Errors& err) {
    if (!doc.contains("system")) {
        err.add("system", "missing section");
        return;
    }
    const json& s = doc["system"];
    if (!s.is_object()) {
        err.add("system", "expected an object");
        return;
    }
    check_keys(s, "system", {"catalog", "params", "inline"}, err);
    if (s.contains("catalog") == s.contains("inline")) {
        err.add("system", "give exactly one of 'catalog' or 'inline'");
        return;
    }
    if (s.contains("catalog")) {
        auto name = string(s, "catalog", "system", err);
        if (!name) return;
        std::vector<std::string> names;
        for (const auto& d : catalog::list_systems()) names.push_back(d.name);
        if (std::find(names.begin(), names.end(), *name) == names.end()) {
            err.add("system.catalog", "unknown catalog system '" + *name + "'; nearest: " + nearest(*name, names));
            return;
        }
        plan.system.catalog = *name;
        const auto& d = catalog::descriptor(*name);
        if (s.contains("params")) {
            const json& p = s["params"];
            if (!p.is_object()) {
                err.add("system.params", "expected an object");
            } else {
                std::vector<std::string> known;
                for (const auto& spec : d.params) known.push_back(spec.name);
                for (auto it = p.begin(); it != p.end(); ++it) {
                    const std::string path = "system.params." + it.key();
                    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
                        err.add(path, "unknown parameter of " + *name + "; nearest: " + nearest(it.key(), known));
                    } else if (!it.value().is_number()) {
                        err.add(path, "expected a number");
                    } else {
                        for (const auto& spec : d.params)
                            if (spec.name == it.key() && (it.value().get<double>() < spec.lo || it.value().get<double>() > spec.hi))
                                err.add(path, "outside [" + format_double(spec.lo) + ", " + format_double(spec.hi) + "]");
                        plan.system.params[it.key()] = it.value().get<double>();
                    }
                }
            }
        }
        return;
    }
    if (s.contains("params")) err.add("system.params", "inline systems declare params inside 'inline'");
    const json& in = s["inline"];
    const std::string base = "system.inline";
    if (!in.is_object()) {
        err.add(base, "expected an object");
        return;
    }
    check_keys(in, base, {"name", "dim", "metric", "metric_upper", "given", "auxiliary", "params", "chart_guard", "domain"},
               err);
    SystemDefinition def;
    def.name = string(in, "name", base, err).value_or("inline");
    auto dim = count(in, "dim", base, err);
    if (!dim || *dim < 1) {
        err.add(base + ".dim", "required positive integer");
        return;
    }
    def.dim = static_cast<int>(*dim);
    const int n = def.dim;
    if (in.contains("params")) {
        const json& p = in["params"];
        if (!p.is_object()) {
            err.add(base + ".params", "expected an object");
        } else {
            for (auto it = p.begin(); it != p.end(); ++it) {
                if (!it.value().is_number())
                    err.add(base + ".params." + it.key(), "expected a number");
                else
                    def.params[it.key()] = it.value().get<double>();
            }
        }
    }
    const std::vector<std::string> pn = keys_of(def.params);
    if (in.contains("metric") && in.contains("metric_upper")) err.add(base, "give 'metric' or 'metric_upper', not both");
    if (in.contains("metric_upper")) {
        def.metric_upper = expression_list(in["metric_upper"], base + ".metric_upper", n, false, pn, err);
        if (in["metric_upper"].is_array() && static_cast<int>(def.metric_upper.size()) != n * (n + 1) / 2)
            err.add(base + ".metric_upper", "expected " + std::to_string(n * (n + 1) / 2) + " entries (upper triangle, row major)");
    } else {
        auto m = string(in, "metric", base, err).value_or("identity");
        if (m != "identity") err.add(base + ".metric", "only \"identity\" is a named metric; use metric_upper");
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) def.metric_upper.push_back(Expr::constant(i == j ? 1.0 : 0.0));
    }
    if (in.contains("given")) def.given = form_rows(in["given"], base + ".given", n, pn, err);
    if (!in.contains("auxiliary")) {
        err.add(base + ".auxiliary", "missing (N - M completing forms)");
    } else {
        def.auxiliary = form_rows(in["auxiliary"], base + ".auxiliary", n, pn, err);
    }
    if (static_cast<int>(def.given.size() + def.auxiliary.size()) != n)
        err.add(base, "given + auxiliary must hold " + std::to_string(n) + " forms, got " +
                          std::to_string(def.given.size() + def.auxiliary.size()));
    if (auto g = expression_at(in, "chart_guard", base, n, false, pn, err)) def.chart_guard = *g;
    if (in.contains("domain")) {
        const json& d = in["domain"];
        if (!d.is_object()) {
            err.add(base + ".domain", "expected an object with lo and hi");
        } else {
            check_keys(d, base + ".domain", {"lo", "hi"}, err);
            auto lo = d.contains("lo") ? vector_at(d["lo"], base + ".domain.lo", n, err) : std::nullopt;
            auto hi = d.contains("hi") ? vector_at(d["hi"], base + ".domain.hi", n, err) : std::nullopt;
            if (!lo || !hi) {
                err.add(base + ".domain", "needs both lo and hi");
            } else {
                plan.system.domain_lo.assign(lo->data(), lo->data() + n);
                plan.system.domain_hi.assign(hi->data(), hi->data() + n);
            }
        }
    }
    plan.system.inline_def = def;
}

void parse_lambda(const json& doc, RunPlan& plan, Errors& err) {
    const bool inl = plan.system.inline_def.has_value();
    if (!doc.contains("lambda")) {
        if (inl) err.add("lambda", "missing section (inline systems need lambda.expressions)");
        return;
    }
    const json& l = doc["lambda"];
    if (!l.is_object()) {
        err.add("lambda", "expected an object");
        return;
    }
    check_keys(l, "lambda", {"preset", "expressions", "potential"}, err);
    const int n = system_dim(plan), m = system_constraints(plan);
    const auto pn = system_param_names(plan);
    if (auto p = string(l, "preset", "lambda", err)) {
        if (inl) {
            err.add("lambda.preset", "inline systems have no presets");
        } else {
            const auto& d = catalog::descriptor(plan.system.catalog);
            std::vector<std::string> names;
            for (const auto& pr : d.presets) names.push_back(pr.name);
            if (std::find(names.begin(), names.end(), *p) == names.end())
                err.add("lambda.preset", "unknown preset '" + *p + "' of " + d.name + "; nearest: " + nearest(*p, names));
            else
                plan.lambda.preset = *p;
        }
    }
    if (l.contains("expressions")) {
        if (l.contains("preset")) err.add("lambda", "give 'preset' or 'expressions', not both");
        plan.lambda.expressions = expression_list(l["expressions"], "lambda.expressions", n, false, pn, err);
        if (l["expressions"].is_array() && static_cast<int>(plan.lambda.expressions.size()) != n - m)
            err.add("lambda.expressions", "expected " + std::to_string(n - m) + " expressions (one per auxiliary form), got " +
                                              std::to_string(plan.lambda.expressions.size()));
    } else if (inl) {
        err.add("lambda.expressions", "required for inline systems");
    }
    if (l.contains("potential")) {
        plan.lambda.potential_given = true;
        if (!l["potential"].is_null()) plan.lambda.potential = expression(l["potential"], "lambda.potential", n, false, pn, err);
        if (l.contains("preset")) err.add("lambda.potential", "the preset fixes the potential; use expressions to override");
    }
}

void parse_integrator(const json& doc, RunPlan& plan, Errors& err) {
    auto& c = plan.integrator;
    c.method = Method::RK45;
    c.step = 1e-3;
    if (!plan.system.catalog.empty()) c.t1 = catalog::descriptor(plan.system.catalog).horizon;
    if (!doc.contains("integrator")) return;
    const json& s = doc["integrator"];
    if (!s.is_object()) {
        err.add("integrator", "expected an object");
        return;
    }
    check_keys(s, "integrator",
               {"method", "t0", "t1", "step", "rtol", "atol", "min_step", "max_step", "stride", "project_velocity",
                "formulation"},
               err);
    if (auto m = string(s, "method", "integrator", err)) {
        if (*m == "rk4")
            c.method = Method::RK4;
        else if (*m == "rk45")
            c.method = Method::RK45;
        else
            err.add("integrator.method", "unknown method '" + *m + "'; nearest: " + nearest(*m, {"rk4", "rk45"}));
    }
    if (auto v = number(s, "t0", "integrator", err)) c.t0 = *v;
    if (auto v = number(s, "t1", "integrator", err)) {
        c.t1 = *v;
        plan.integrator_t1_given = true;
    }
    if (auto v = number(s, "step", "integrator", err)) c.step = *v;
    if (auto v = number(s, "rtol", "integrator", err)) c.rtol = *v;
    if (auto v = number(s, "atol", "integrator", err)) c.atol = *v;
    if (auto v = number(s, "min_step", "integrator", err)) c.min_step = *v;
    if (auto v = number(s, "max_step", "integrator", err)) c.max_step = *v;
    if (auto v = count(s, "stride", "integrator", err)) c.stride = static_cast<int>(*v);
    if (auto v = boolean(s, "project_velocity", "integrator", err)) c.project_velocity = *v;
    if (auto f = string(s, "formulation", "integrator", err)) {
        if (*f == "cartesian")
            plan.formulation = Formulation::Cartesian;
        else if (*f == "classical")
            plan.formulation = Formulation::Classical;
        else if (*f == "both")
            plan.formulation = Formulation::Both;
        else
            err.add("integrator.formulation",
                    "unknown formulation '" + *f + "'; nearest: " + nearest(*f, {"cartesian", "classical", "both"}));
    }
    try {
        c.validate();
    } catch (const IntegrationError& e) {
        err.add("integrator", e.what());
    }
}

void parse_initial(const json& doc, RunPlan& plan, Errors& err) {
    const int n = system_dim(plan);
    if (!doc.contains("initial")) {
        if (plan.system.inline_def) err.add("initial", "missing section (inline systems need initial.points)");
        return;
    }
    const json& s = doc["initial"];
    if (!s.is_object()) {
        err.add("initial", "expected an object");
        return;
    }
    check_keys(s, "initial", {"points", "velocities", "grid", "seed"}, err);
    if (s.contains("points")) plan.initial.points = point_list(s["points"], "initial.points", n, err);
    if (s.contains("velocities")) {
        plan.initial.velocities = point_list(s["velocities"], "initial.velocities", n, err);
        if (plan.initial.velocities.size() != plan.initial.points.size())
            err.add("initial.velocities", "needs one velocity per point");
    }
    if (auto g = count(s, "grid", "initial", err)) plan.initial.grid = *g;
    if (auto v = count(s, "seed", "initial", err)) plan.initial.seed = *v;
    if (s.contains("points") && plan.initial.grid) err.add("initial", "give 'points' or 'grid', not both");
    if (plan.initial.grid && plan.system.inline_def && plan.system.domain_lo.empty())
        err.add("initial.grid", "inline systems need system.inline.domain for grid initial conditions");
    if (plan.system.inline_def && !s.contains("points") && !plan.initial.grid)
        err.add("initial.points", "required for inline systems");
}

void parse_monitors(const json& doc, RunPlan& plan, Errors& err) {
    if (!doc.contains("monitors")) return;
    plan.monitors_given = true;
    const json& s = doc["monitors"];
    if (!s.is_object()) {
        err.add("monitors", "expected an object of name: expression");
        return;
    }
    const int n = system_dim(plan);
    const auto pn = system_param_names(plan);
    for (auto it = s.begin(); it != s.end(); ++it) {
        const std::string path = "monitors." + it.key();
        MonitorSpec m;
        m.name = it.key();
        const json* src = &it.value();
        if (it.value().is_object()) {
            check_keys(it.value(), path, {"expr", "tolerance"}, err);
            if (!it.value().contains("expr")) {
                err.add(path + ".expr", "missing");
                continue;
            }
            src = &it.value()["expr"];
            if (auto t = number(it.value(), "tolerance", path, err)) m.tolerance = *t;
        }
        if (auto e = expression(*src, path, n, true, pn, err)) {
            m.field = *e;
            plan.monitors.push_back(m);
        }
    }
}

void parse_output(const json& doc, RunPlan& plan, Errors& err) {
    if (!doc.contains("output")) return;
    const json& s = doc["output"];
    if (!s.is_object()) {
        err.add("output", "expected an object");
        return;
    }
    check_keys(s, "output", {"dir", "prefix", "csv", "report", "plot_data"}, err);
    if (auto v = string(s, "dir", "output", err)) plan.output.dir = *v;
    if (auto v = string(s, "prefix", "output", err)) plan.output.prefix = *v;
    if (auto v = boolean(s, "csv", "output", err)) plan.output.csv = *v;
    if (auto v = boolean(s, "report", "output", err)) plan.output.report = *v;
    if (auto v = boolean(s, "plot_data", "output", err)) plan.output.plot_data = *v;
}

void parse_checks(const json& doc, RunPlan& plan, Errors& err) {
    if (doc.contains("checks")) {
        const json& s = doc["checks"];
        if (!s.is_object()) {
            err.add("checks", "expected an object of check: tolerance");
        } else {
            for (auto it = s.begin(); it != s.end(); ++it) {
                const std::string path = "checks." + it.key();
                const bool monitor = it.key().rfind("monitor:", 0) == 0;
                if (!monitor && std::find(kChecks.begin(), kChecks.end(), it.key()) == kChecks.end())
                    err.add(path, "unknown check; nearest: " + nearest(it.key(), kChecks));
                else if (!it.value().is_number() || it.value().get<double>() <= 0)
                    err.add(path, "expected a positive tolerance");
                else
                    plan.tolerances[it.key()] = it.value().get<double>();
            }
        }
    }
    if (doc.contains("verify")) {
        const json& s = doc["verify"];
        if (!s.is_object()) {
            err.add("verify", "expected an object");
            return;
        }
        check_keys(s, "verify", {"grid", "seed", "workers"}, err);
        if (auto g = count(s, "grid", "verify", err)) plan.verify_grid = *g;
        if (auto v = count(s, "seed", "verify", err)) plan.seed = *v;
        if (auto w = count(s, "workers", "verify", err)) plan.workers = static_cast<unsigned>(*w);
    }
}

std::vector<std::string> f_names(int n) {
    std::vector<std::string> out;
    for (int j = 1; j < n; ++j) out.push_back("f" + std::to_string(j));
    return out;
}

void parse_inverse(const json& doc, RunPlan& plan, Errors& err) {
    const json& s = doc["inverse"];
    const std::string base = "inverse";
    if (!s.is_object()) {
        err.add(base, "expected an object");
        return;
    }
    check_keys(s, base,
               {"route", "dim", "f", "f_aux", "lambda", "metric_upper", "h", "S", "nu", "Phi", "mode", "h0",
                "metric_diagonal", "g", "base", "phi", "Psi", "alpha", "probe", "b", "Psi_tau", "h_r", "r_ref", "terms",
                "taus", "points", "lo", "hi", "count", "seed", "orbit"},
               err);
    InverseSpec in;
    const std::vector<std::string> routes = {"dainelli", "suslov", "joukovski", "stackel", "bertrand"};
    if (auto r = string(s, "route", base, err)) {
        if (std::find(routes.begin(), routes.end(), *r) == routes.end())
            err.add(base + ".route", "unknown route '" + *r + "'; nearest: " + nearest(*r, routes));
        in.route = *r;
    }
    if (auto m = string(s, "mode", base, err)) {
        const std::vector<std::string> modes = {"general", "exact-nu", "orthogonal"};
        if (std::find(modes.begin(), modes.end(), *m) == modes.end())
            err.add(base + ".mode", "unknown mode '" + *m + "'; nearest: " + nearest(*m, modes));
        in.mode = *m;
    }
    if (in.route == "bertrand") {
        in.dim = 2;
    } else if (in.route == "stackel") {
        if (s.contains("phi") && s["phi"].is_array()) in.dim = static_cast<int>(s["phi"].size());
    } else if (in.mode == "orthogonal") {
        if (s.contains("metric_diagonal") && s["metric_diagonal"].is_array())
            in.dim = static_cast<int>(s["metric_diagonal"].size());
    } else if (auto d = count(s, "dim", base, err)) {
        in.dim = static_cast<int>(*d);
    }
    const int n = in.dim;
    if (n < 1) {
        err.add(base + ".dim", "required (or implied by phi / metric_diagonal)");
        return;
    }
    if (s.contains("f")) in.f = expression_list(s["f"], base + ".f", n, false, {}, err);
    if (auto e = expression_at(s, "f_aux", base, n, false, {}, err)) in.f_aux = *e;
    if (auto e = expression_at(s, "lambda", base, n, false, {}, err)) in.lambda = *e;
    if (s.contains("metric_upper")) {
        in.metric_upper = expression_list(s["metric_upper"], base + ".metric_upper", n, false, {}, err);
        if (static_cast<int>(in.metric_upper.size()) != n * (n + 1) / 2)
            err.add(base + ".metric_upper", "expected " + std::to_string(n * (n + 1) / 2) + " entries");
    }
    if (auto e = expression_at(s, "h", base, n, false, in.mode == "orthogonal" ? std::vector<std::string>{} : f_names(n), err))
        in.h = *e;
    if (auto e = expression_at(s, "S", base, n, false, {}, err)) in.S = *e;
    if (auto e = expression_at(s, "nu", base, n, false, {"S"}, err)) in.nu = *e;
    if (auto e = expression_at(s, "Phi", base, n, false, {"S"}, err)) in.Phi = *e;
    if (auto v = number(s, "h0", base, err)) in.h0 = *v;
    if (s.contains("metric_diagonal"))
        in.metric_diagonal = expression_list(s["metric_diagonal"], base + ".metric_diagonal", n, false, {}, err);
    if (auto e = expression_at(s, "g", base, n, false, {}, err)) in.g = *e;
    if (s.contains("base"))
        if (auto v = vector_at(s["base"], base + ".base", n, err)) in.base = *v;
    if (s.contains("phi")) {
        const json& p = s["phi"];
        for (std::size_t k = 0; k < p.size(); ++k) {
            auto row = expression_list(p[k], base + ".phi[" + std::to_string(k) + "]", n, false, {}, err);
            if (static_cast<int>(row.size()) != n) err.add(base + ".phi[" + std::to_string(k) + "]", "expected " + std::to_string(n) + " entries");
            in.phi.push_back(row);
        }
    }
    if (s.contains("Psi") && in.route != "bertrand") in.Psi = expression_list(s["Psi"], base + ".Psi", n, false, {}, err);
    if (s.contains("alpha"))
        if (auto v = vector_at(s["alpha"], base + ".alpha", n, err)) in.alpha.assign(v->data(), v->data() + n);
    if (s.contains("probe"))
        if (auto v = vector_at(s["probe"], base + ".probe", n, err)) in.probe = *v;
    if (auto v = number(s, "b", base, err)) in.b = *v;
    if (auto e = expression_at(s, "Psi_tau", base, 1, false, {}, err)) in.Psi_tau = *e;
    if (auto e = expression_at(s, "h_r", base, 1, false, {}, err)) in.h_r = *e;
    if (auto v = number(s, "r_ref", base, err)) in.r_ref = *v;
    if (s.contains("terms")) {
        const json& t = s["terms"];
        for (std::size_t i = 0; i < t.size(); ++i) {
            const std::string p = base + ".terms[" + std::to_string(i) + "]";
            if (!t[i].is_object()) {
                err.add(p, "expected {j, K, C}");
                continue;
            }
            check_keys(t[i], p, {"j", "K", "C"}, err);
            BertrandTerm bt;
            if (!t[i].contains("j") || !t[i]["j"].is_number_integer())
                err.add(p + ".j", "required integer");
            else
                bt.j = t[i]["j"].get<int>();
            bt.K = number(t[i], "K", p, err).value_or(0.0);
            bt.C = number(t[i], "C", p, err).value_or(0.0);
            in.terms.push_back(bt);
        }
    }
    if (s.contains("taus"))
        if (auto v = vector_at(s["taus"], base + ".taus", -1, err)) in.taus.assign(v->data(), v->data() + v->size());
    if (s.contains("points")) in.points = point_list(s["points"], base + ".points", n, err);
    if (s.contains("lo"))
        if (auto v = vector_at(s["lo"], base + ".lo", n, err)) in.lo.assign(v->data(), v->data() + n);
    if (s.contains("hi"))
        if (auto v = vector_at(s["hi"], base + ".hi", n, err)) in.hi.assign(v->data(), v->data() + n);
    if (auto c = count(s, "count", base, err)) in.count = *c;
    if (auto v = count(s, "seed", base, err)) in.seed = *v;
    if (s.contains("orbit")) {
        const json& o = s["orbit"];
        check_keys(o, base + ".orbit", {"x0", "t1"}, err);
        if (o.contains("x0"))
            if (auto v = vector_at(o["x0"], base + ".orbit.x0", n, err)) in.orbit_x0 = *v;
        if (auto t = number(o, "t1", base + ".orbit", err)) in.orbit_t1 = *t;
    }
    if (in.count && (in.lo.empty() || in.hi.empty())) err.add(base, "count needs lo and hi");

    // route requirements
    if (in.route == "dainelli" || in.route == "suslov" || (in.route == "joukovski" && in.mode != "orthogonal"))
        if (static_cast<int>(in.f.size()) != n - 1) err.add(base + ".f", "expected " + std::to_string(n - 1) + " orbit functions");
    if (in.route == "joukovski" && in.mode != "orthogonal" && !s.contains("S")) err.add(base + ".S", "required");
    if (s.contains("h0") && !(in.route == "stackel" || (in.route == "joukovski" && in.mode == "exact-nu")))
        err.add(base + ".h0", "only used by stackel and joukovski exact-nu; fold the constant into h");
    if (in.route == "joukovski" && in.mode == "exact-nu" && !s.contains("Phi")) err.add(base + ".Phi", "required in exact-nu mode");
    if (in.route == "joukovski" && in.mode == "orthogonal") {
        if (!s.contains("g")) err.add(base + ".g", "required in orthogonal mode");
        if (!s.contains("h")) err.add(base + ".h", "required in orthogonal mode");
        if (in.base.size() != n) err.add(base + ".base", "required in orthogonal mode");
    }
    if (in.route == "stackel") {
        if (static_cast<int>(in.Psi.size()) != n) err.add(base + ".Psi", "expected " + std::to_string(n) + " entries");
        if (static_cast<int>(in.alpha.size()) != n) err.add(base + ".alpha", "expected " + std::to_string(n) + " entries");
        if (in.probe.size() != n) err.add(base + ".probe", "required");
    }
    if (in.route == "bertrand" && in.b != 0.0 && in.terms.empty()) err.add(base + ".terms", "required for b != 0");
    plan.inverse = in;
}

// ---------------------------------------------------------------- printing

json expr_json(const Expr& e) { return expr::print(e); }

json exprs_json(const std::vector<Expr>& es) {
    json a = json::array();
    for (const auto& e : es) a.push_back(expr::print(e));
    return a;
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string method_name(Method m) { return m == Method::RK4 ? "rk4" : "rk45"; }

std::string formulation_name(Formulation f) {
    switch (f) {
        case Formulation::Cartesian: return "cartesian";
        case Formulation::Classical: return "classical";
        default: return "both";
    }
}

// ---------------------------------------------------------------- runs

double tolerance(const RunPlan& plan, const std::string& check, double fallback) {
    auto it = plan.tolerances.find(check);
    return it == plan.tolerances.end() ? fallback : it->second;
}

std::vector<std::pair<std::string, Expr>> monitor_fields(const RunPlan& plan, const SystemDefinition& def,
                                                         std::vector<double>* tols = nullptr) {
    std::vector<std::pair<std::string, Expr>> out;
    if (plan.monitors_given || plan.system.inline_def) {
        for (const auto& m : plan.monitors) {
            out.emplace_back(m.name, expr::bind(m.field, def.params));
            if (tols) tols->push_back(tolerance(plan, "monitor:" + m.name, m.tolerance));
        }
        return out;
    }
    if (!plan.lambda.expressions.empty()) return out;
    out = catalog::monitors(plan.system.catalog, plan.system.params, plan.lambda.preset);
    if (tols)
        for (const auto& [name, e] : out) tols->push_back(tolerance(plan, "monitor:" + name, 1e-8));
    return out;
}

struct RunPair {
    Trajectory cartesian;
    Trajectory classical;
    bool has_cartesian = false;
    bool has_classical = false;
};

Vec initial_velocity(const RunPlan& plan, const ConstraintSystem& sys, std::size_t i, const Vec& x0) {
    if (i < plan.initial.velocities.size()) return plan.initial.velocities[i];
    return cartesian_velocity(sys, x0);
}

std::string run_error(const Trajectory& t) { return t.error.value_or(""); }

std::vector<Vec> box_points(const std::vector<double>& lo, const std::vector<double>& hi, std::size_t count,
                            std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Vec> out;
    const int n = static_cast<int>(lo.size());
    for (std::size_t i = 0; i < count; ++i) {
        Vec x(n);
        for (int k = 0; k < n; ++k) x(k) = lo[k] + (hi[k] - lo[k]) * uniform53(rng);
        out.push_back(x);
    }
    return out;
}

std::vector<Vec> verify_grid_points(const RunPlan& plan, std::size_t count, std::uint64_t seed) {
    if (plan.system.inline_def) {
        if (plan.system.domain_lo.empty()) return initial_points(plan);
        return box_points(plan.system.domain_lo, plan.system.domain_hi, count, seed);
    }
    std::mt19937_64 rng(seed);
    return catalog::domain_random(catalog::descriptor(plan.system.catalog), plan.system.params, count, rng);
}

void write_if(RunResult& r, const RunPlan& plan, const std::string& name, const std::string& content) {
    if (!plan.output.dir.empty()) r.files.emplace_back(name, content);
}

}  // namespace

// ---------------------------------------------------------------- parse

RunPlan parse_spec(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SpecError({origin + ": not valid JSON (byte " + std::to_string(e.byte) + "): " + e.what()});
    }
    if (!doc.is_object()) throw SpecError({origin + ": top level must be an object"});
    Errors err;
    check_keys(doc, "spec", {"system", "lambda", "integrator", "initial", "monitors", "output", "checks", "verify", "inverse"},
               err);
    RunPlan plan;
    plan.origin = origin;
    if (doc.contains("inverse")) {
        parse_inverse(doc, plan, err);
        parse_output(doc, plan, err);
        parse_checks(doc, plan, err);
        if (doc.contains("system")) err.add("system", "inverse specs take no system section");
    } else {
        parse_system(doc, plan, err);
        const bool ok = plan.system.inline_def || !plan.system.catalog.empty();
        if (ok) {
            parse_lambda(doc, plan, err);
            parse_integrator(doc, plan, err);
            parse_initial(doc, plan, err);
            parse_monitors(doc, plan, err);
        }
        parse_output(doc, plan, err);
        parse_checks(doc, plan, err);
        if (ok && err.list.empty()) {
            // building the system surfaces remaining semantic errors (bounds, singular probe)
            try {
                ConstraintSystem sys(plan_definition(plan));
                (void)sys;
            } catch (const Error& e) {
                err.add("system", e.what());
            }
        }
    }
    if (!err.list.empty()) {
        for (auto& m : err.list) m = origin + ": " + m;
        throw SpecError(err.list);
    }
    return plan;
}

RunPlan load_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError({path + ": cannot open"});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_spec(ss.str(), path);
}

json plan_to_json(const RunPlan& plan) {
    json doc;
    if (plan.inverse) {
        const InverseSpec& in = *plan.inverse;
        json s;
        s["route"] = in.route;
        s["mode"] = in.mode;
        if (in.route != "bertrand" && in.route != "stackel" && in.mode != "orthogonal") s["dim"] = in.dim;
        if (!in.f.empty()) s["f"] = exprs_json(in.f);
        if (in.f_aux) s["f_aux"] = expr_json(*in.f_aux);
        s["lambda"] = expr_json(in.lambda);
        if (!in.metric_upper.empty()) s["metric_upper"] = exprs_json(in.metric_upper);
        if (in.h) s["h"] = expr_json(*in.h);
        s["S"] = expr_json(in.S);
        s["nu"] = expr_json(in.nu);
        s["Phi"] = expr_json(in.Phi);
        if (in.route == "stackel" || (in.route == "joukovski" && in.mode == "exact-nu")) s["h0"] = in.h0;
        if (!in.metric_diagonal.empty()) s["metric_diagonal"] = exprs_json(in.metric_diagonal);
        s["g"] = expr_json(in.g);
        if (in.base.size()) s["base"] = vec_json(in.base);
        if (!in.phi.empty()) {
            json p = json::array();
            for (const auto& row : in.phi) p.push_back(exprs_json(row));
            s["phi"] = p;
        }
        if (!in.Psi.empty()) s["Psi"] = exprs_json(in.Psi);
        if (!in.alpha.empty()) s["alpha"] = in.alpha;
        if (in.probe.size()) s["probe"] = vec_json(in.probe);
        s["b"] = in.b;
        s["Psi_tau"] = expr_json(in.Psi_tau);
        s["h_r"] = expr_json(in.h_r);
        s["r_ref"] = in.r_ref;
        if (!in.terms.empty()) {
            json t = json::array();
            for (const auto& bt : in.terms) t.push_back({{"j", bt.j}, {"K", bt.K}, {"C", bt.C}});
            s["terms"] = t;
        }
        if (!in.taus.empty()) s["taus"] = in.taus;
        if (!in.points.empty()) {
            json p = json::array();
            for (const auto& x : in.points) p.push_back(vec_json(x));
            s["points"] = p;
        }
        if (!in.lo.empty()) s["lo"] = in.lo;
        if (!in.hi.empty()) s["hi"] = in.hi;
        if (in.count) s["count"] = in.count;
        s["seed"] = in.seed;
        if (in.orbit_x0) s["orbit"] = {{"x0", vec_json(*in.orbit_x0)}, {"t1", in.orbit_t1}};
        doc["inverse"] = s;
    } else {
        json sys;
        if (plan.system.inline_def) {
            const SystemDefinition& d = *plan.system.inline_def;
            json in;
            in["name"] = d.name;
            in["dim"] = d.dim;
            in["metric_upper"] = exprs_json(d.metric_upper);
            json g = json::array(), a = json::array();
            for (const auto& f : d.given) g.push_back(exprs_json(f.coeffs));
            for (const auto& f : d.auxiliary) a.push_back(exprs_json(f.coeffs));
            in["given"] = g;
            in["auxiliary"] = a;
            json p = json::object();
            for (const auto& [k, v] : d.params) p[k] = v;
            in["params"] = p;
            if (d.chart_guard) in["chart_guard"] = expr_json(*d.chart_guard);
            if (!plan.system.domain_lo.empty()) in["domain"] = {{"lo", plan.system.domain_lo}, {"hi", plan.system.domain_hi}};
            sys["inline"] = in;
        } else {
            sys["catalog"] = plan.system.catalog;
            json p = json::object();
            for (const auto& [k, v] : plan.system.params) p[k] = v;
            sys["params"] = p;
        }
        doc["system"] = sys;
        json l = json::object();
        if (!plan.lambda.preset.empty()) l["preset"] = plan.lambda.preset;
        if (!plan.lambda.expressions.empty()) l["expressions"] = exprs_json(plan.lambda.expressions);
        if (plan.lambda.potential_given) l["potential"] = plan.lambda.potential ? expr_json(*plan.lambda.potential) : json(nullptr);
        doc["lambda"] = l;
        const auto& c = plan.integrator;
        json ig;
        ig["method"] = method_name(c.method);
        ig["t0"] = c.t0;
        if (plan.integrator_t1_given) ig["t1"] = c.t1;
        ig["step"] = c.step;
        ig["rtol"] = c.rtol;
        ig["atol"] = c.atol;
        ig["min_step"] = c.min_step;
        ig["max_step"] = c.max_step;
        ig["stride"] = c.stride;
        ig["project_velocity"] = c.project_velocity;
        ig["formulation"] = formulation_name(plan.formulation);
        doc["integrator"] = ig;
        json init = json::object();
        if (!plan.initial.points.empty()) {
            json p = json::array();
            for (const auto& x : plan.initial.points) p.push_back(vec_json(x));
            init["points"] = p;
        }
        if (!plan.initial.velocities.empty()) {
            json p = json::array();
            for (const auto& x : plan.initial.velocities) p.push_back(vec_json(x));
            init["velocities"] = p;
        }
        if (plan.initial.grid) init["grid"] = plan.initial.grid;
        init["seed"] = plan.initial.seed;
        doc["initial"] = init;
        if (plan.monitors_given) {
            json m = json::object();
            for (const auto& mon : plan.monitors) m[mon.name] = {{"expr", expr::print(mon.field)}, {"tolerance", mon.tolerance}};
            doc["monitors"] = m;
        }
    }
    doc["output"] = {{"dir", plan.output.dir},
                     {"prefix", plan.output.prefix},
                     {"csv", plan.output.csv},
                     {"report", plan.output.report},
                     {"plot_data", plan.output.plot_data}};
    json checks = json::object();
    for (const auto& [k, v] : plan.tolerances) checks[k] = v;
    doc["checks"] = checks;
    doc["verify"] = {{"grid", plan.verify_grid}, {"seed", plan.seed}, {"workers", plan.workers}};
    return doc;
}

SystemDefinition plan_definition(const RunPlan& plan) {
    if (plan.system.inline_def) {
        SystemDefinition d = *plan.system.inline_def;
        d.lambdas = plan.lambda.expressions;
        d.potential = plan.lambda.potential;
        return d;
    }
    if (!plan.lambda.expressions.empty())
        return catalog::definition(plan.system.catalog, plan.system.params, plan.lambda.expressions, plan.lambda.potential);
    return catalog::definition(plan.system.catalog, plan.system.params, plan.lambda.preset);
}

std::vector<Vec> initial_points(const RunPlan& plan) {
    if (!plan.initial.points.empty()) return plan.initial.points;
    if (plan.initial.grid) {
        if (plan.system.inline_def)
            return box_points(plan.system.domain_lo, plan.system.domain_hi, plan.initial.grid, plan.initial.seed);
        std::mt19937_64 rng(plan.initial.seed);
        return catalog::domain_random(catalog::descriptor(plan.system.catalog), plan.system.params, plan.initial.grid, rng);
    }
    const auto& d = catalog::descriptor(plan.system.catalog);
    return {d.probe(catalog::resolve_params(d, d.preset(plan.lambda.preset), plan.system.params))};
}

// ---------------------------------------------------------------- export

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string trajectory_csv(const Trajectory& traj) {
    std::string out = "t";
    for (int k = 1; k <= traj.dim; ++k) out += ",x" + std::to_string(k);
    for (int k = 1; k <= traj.dim; ++k) out += ",v" + std::to_string(k);
    const bool mu = !traj.mu.empty();
    const int m = mu ? static_cast<int>(traj.mu.front().size()) : 0;
    for (int j = 1; j <= m; ++j) out += ",mu" + std::to_string(j);
    for (const auto& [name, series] : traj.monitors) out += ",monitor:" + name;
    out += "\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        out += format_double(traj.t[i]);
        for (int k = 0; k < traj.dim; ++k) out += "," + format_double(traj.x[i](k));
        for (int k = 0; k < traj.dim; ++k) out += "," + format_double(traj.v[i](k));
        for (int j = 0; j < m; ++j) out += "," + format_double(traj.mu[i](j));
        for (const auto& [name, series] : traj.monitors) out += "," + format_double(series[i]);
        out += "\n";
    }
    return out;
}

std::string plot_data_csv(const Trajectory& traj) {
    std::string out = "t,series,value\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const std::string t = format_double(traj.t[i]);
        for (int k = 0; k < traj.dim; ++k) out += t + ",x" + std::to_string(k + 1) + "," + format_double(traj.x[i](k)) + "\n";
        for (int k = 0; k < traj.dim; ++k) out += t + ",v" + std::to_string(k + 1) + "," + format_double(traj.v[i](k)) + "\n";
        for (const auto& [name, series] : traj.monitors) out += t + ",monitor:" + name + "," + format_double(series[i]) + "\n";
    }
    return out;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s) {
            if (c == ',') {
                out.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        out.push_back(cur);
        return out;
    };
    if (!std::getline(in, line)) return t;
    t.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        for (const auto& cell : split(line)) {
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc()) throw Error("csv: bad number '" + cell + "'");
            row.push_back(v);
        }
        t.rows.push_back(row);
    }
    return t;
}

json report_to_json(const VerificationReport& report) {
    json j = json::object();
    for (const auto& c : report.checks)
        j[c.name] = {{"max_residual", number_json(c.max_residual)},
                     {"tolerance", c.tolerance},
                     {"samples", c.samples},
                     {"pass", c.pass}};
    return j;
}

json error_record(const std::exception& e) {
    std::string type = "Error";
    json messages = json::array();
    if (auto s = dynamic_cast<const SpecError*>(&e)) {
        type = "SpecError";
        for (const auto& m : s->messages) messages.push_back(m);
    } else {
        messages.push_back(e.what());
        if (dynamic_cast<const ParseError*>(&e)) type = "ParseError";
        else if (dynamic_cast<const CatalogError*>(&e)) type = "CatalogError";
        else if (dynamic_cast<const InverseError*>(&e)) type = "InverseError";
        else if (dynamic_cast<const FrameSingular*>(&e)) type = "FrameSingular";
        else if (dynamic_cast<const IntegrationError*>(&e)) type = "IntegrationError";
        else if (dynamic_cast<const QuadratureError*>(&e)) type = "QuadratureError";
        else if (dynamic_cast<const DimensionError*>(&e)) type = "DimensionError";
        else if (dynamic_cast<const DomainError*>(&e)) type = "DomainError";
        else if (!dynamic_cast<const Error*>(&e)) type = "InternalError";
    }
    return {{"error", {{"type", type}, {"messages", messages}}}};
}

// ---------------------------------------------------------------- simulate

RunResult simulate(const RunPlan& plan) {
    if (plan.inverse) throw SpecError({plan.origin + ": simulate needs a system spec, not an inverse spec"});
    SystemDefinition def = plan_definition(plan);
    ConstraintSystem sys(def);
    MechanicalSystem mech = MechanicalSystem::from(sys);
    auto fields = monitor_fields(plan, def);
    std::vector<Vec> x0s = initial_points(plan);
    std::vector<RunPair> runs(x0s.size());
    const bool cart = plan.formulation != Formulation::Classical, cls = plan.formulation != Formulation::Cartesian;
    parallel_for(
        x0s.size(),
        [&](std::size_t i) {
            if (cart) {
                runs[i].cartesian = integrate_first_order(sys, x0s[i], plan.integrator);
                attach_monitors(runs[i].cartesian, fields);
                runs[i].has_cartesian = true;
            }
            if (cls) {
                Vec v0;
                try {
                    v0 = initial_velocity(plan, sys, i, x0s[i]);
                    runs[i].classical = integrate_classical(mech, x0s[i], v0, plan.integrator);
                } catch (const Error& e) {
                    runs[i].classical.dim = sys.dim();
                    runs[i].classical.error = e.what();
                }
                attach_monitors(runs[i].classical, fields);
                runs[i].has_classical = true;
            }
        },
        plan.workers);

    RunResult r;
    json doc;
    doc["command"] = "simulate";
    doc["system"] = def.name;
    json list = json::array();
    std::size_t truncated = 0, total = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        for (int which = 0; which < 2; ++which) {
            const bool is_cart = which == 0;
            if (is_cart ? !runs[i].has_cartesian : !runs[i].has_classical) continue;
            const Trajectory& t = is_cart ? runs[i].cartesian : runs[i].classical;
            const std::string kind = is_cart ? "cartesian" : "classical";
            const std::string file = plan.output.prefix + "_" + std::to_string(i) + "_" + kind + ".csv";
            json e;
            e["index"] = i;
            e["formulation"] = kind;
            e["x0"] = vec_json(x0s[i]);
            e["samples"] = t.size();
            e["truncated"] = t.truncated();
            if (t.truncated()) e["error"] = run_error(t);
            json mons = json::object();
            for (const auto& st : monitor(t, fields))
                mons[st.name] = {{"initial", number_json(st.initial)}, {"max_deviation", number_json(st.max_deviation)}};
            e["monitors"] = mons;
            if (plan.output.csv) {
                e["file"] = file;
                write_if(r, plan, file, trajectory_csv(t));
            }
            if (plan.output.plot_data)
                write_if(r, plan, plan.output.prefix + "_" + std::to_string(i) + "_" + kind + "_plot.csv", plot_data_csv(t));
            list.push_back(e);
            ++total;
            if (t.truncated()) ++truncated;
        }
    }
    doc["runs"] = list;
    r.report.add("runs_completed", "every requested trajectory reaches t1", static_cast<double>(truncated),
                 tolerance(plan, "runs_completed", 0.5), total);
    doc["report"] = report_to_json(r.report);
    doc["pass"] = r.report.all_pass();
    if (plan.output.report) write_if(r, plan, plan.output.prefix + "_report.json", report_to_json(r.report).dump(2) + "\n");
    r.document = doc;
    return r;
}

// ---------------------------------------------------------------- verify

RunResult verify(const RunPlan& plan) {
    if (plan.inverse) throw SpecError({plan.origin + ": verify needs a system spec, not an inverse spec"});
    SystemDefinition def = plan_definition(plan);
    ConstraintSystem sys(def);
    MechanicalSystem mech = MechanicalSystem::from(sys);
    std::vector<double> mon_tol;
    auto fields = monitor_fields(plan, def, &mon_tol);
    std::vector<Vec> x0s = initial_points(plan);

    IntegratorConfig cls_cfg = plan.integrator;
    cls_cfg.project_velocity = true;
    std::vector<RunPair> runs(x0s.size());
    parallel_for(
        x0s.size(),
        [&](std::size_t i) {
            runs[i].cartesian = integrate_first_order(sys, x0s[i], plan.integrator);
            runs[i].has_cartesian = true;
            try {
                runs[i].classical = integrate_classical(mech, x0s[i], initial_velocity(plan, sys, i, x0s[i]), cls_cfg);
            } catch (const Error& e) {
                runs[i].classical.dim = sys.dim();
                runs[i].classical.error = e.what();
            }
            runs[i].has_classical = true;
        },
        plan.workers);

    std::size_t truncated = 0;
    double drift = 0, cdrift = 0, gap = 0, lag = 0;
    std::size_t samples = 0, csamples = 0, lsamples = 0;
    std::vector<double> mon_dev(fields.size(), 0.0);
    for (auto& run : runs) {
        const Trajectory& a = run.cartesian;
        const Trajectory& b = run.classical;
        if (a.truncated()) ++truncated;
        if (b.truncated()) ++truncated;
        if (a.size()) {
            ConstraintDrift d = constraint_drift(sys, a);
            if (d.scaled.size()) drift = std::max(drift, d.scaled.maxCoeff());
            samples += a.size();
            if (a.size() >= 3) {
                auto res = lagrange_residual(sys, a);
                for (double v : res) lag = std::max(lag, std::isfinite(v) ? v : kInf);
                lsamples += res.size();
            }
            auto st = monitor(a, fields);
            for (std::size_t k = 0; k < st.size(); ++k)
                mon_dev[k] = std::max(mon_dev[k], st[k].domain_errors ? kInf : st[k].max_deviation);
        }
        if (b.size()) {
            ConstraintDrift d = constraint_drift(sys, b);
            if (d.scaled.size()) cdrift = std::max(cdrift, d.scaled.maxCoeff());
            csamples += b.size();
        }
        const std::size_t common = std::min(a.size(), b.size());
        for (std::size_t i = 0; i < common; ++i) gap = std::max(gap, (a.x[i] - b.x[i]).cwiseAbs().maxCoeff());
        if (a.size() != b.size()) gap = kInf;
    }

    // pointwise identities on the seeded grid
    std::vector<Vec> grid = verify_grid_points(plan, plan.verify_grid, plan.seed);
    struct Point {
        double consistency = 0, dual = 0, antisym = 0, frame = 0, field = 0, pde = 0;
    };
    std::vector<Point> pts(grid.size());
    const bool pde = !plan.system.catalog.empty() && plan.lambda.expressions.empty() &&
                     catalog::descriptor(plan.system.catalog).has_paper_pde;
    parallel_for(
        grid.size(),
        [&](std::size_t i) {
            Point& p = pts[i];
            const Vec& x = grid[i];
            try {
                LambdaEval le = lambda_vector(sys, x);
                FrameEval fe = frame_matrix(sys, x);
                p.consistency = consistency_residual(sys, x).cwiseAbs().maxCoeff();
                p.dual = (le.Lambda - le.Lambda2).norm() / std::max(1.0, le.Lambda.norm());
                p.antisym = (le.A + le.A.transpose()).cwiseAbs().maxCoeff();
                Mat H = sys.H_at(x);
                p.frame = (fe.M.transpose() * le.A * fe.M - H).cwiseAbs().maxCoeff() / std::max(1.0, H.cwiseAbs().maxCoeff());
                Vec ve = sys.velocity_expr_at(x);
                p.field = (fe.v - ve).norm() / std::max(1.0, fe.v.norm());
                if (pde)
                    p.pde = std::fabs(catalog::paper_pde_residual(plan.system.catalog, plan.system.params, plan.lambda.preset, x));
            } catch (const Error&) {
                p.consistency = p.dual = p.antisym = p.frame = p.field = p.pde = kInf;
            }
            auto fix = [](double& v) { if (!std::isfinite(v)) v = kInf; };
            fix(p.consistency), fix(p.dual), fix(p.antisym), fix(p.frame), fix(p.field), fix(p.pde);
        },
        plan.workers);
    Point worst;
    for (const auto& p : pts) {
        worst.consistency = std::max(worst.consistency, p.consistency);
        worst.dual = std::max(worst.dual, p.dual);
        worst.antisym = std::max(worst.antisym, p.antisym);
        worst.frame = std::max(worst.frame, p.frame);
        worst.field = std::max(worst.field, p.field);
        worst.pde = std::max(worst.pde, p.pde);
    }

    RunResult r;
    VerificationReport& rep = r.report;
    rep.add("runs_completed", "every trajectory reaches t1", static_cast<double>(truncated),
            tolerance(plan, "runs_completed", 0.5), 2 * runs.size());
    rep.add("constraint_drift", "Omega_j(xdot) = 0 along Cartesian runs", drift, tolerance(plan, "constraint_drift", 1e-11),
            samples);
    rep.add("classical_constraint_drift", "Omega_j(xdot) = 0 along projected classical runs", cdrift,
            tolerance(plan, "classical_constraint_drift", 1e-10), csamples);
    rep.add("equivalence", "Cartesian and classical trajectories from (x0, v(x0)) coincide", gap,
            tolerance(plan, "equivalence", 1e-6), samples);
    rep.add("lagrange_residual", "d/dt(Gv) - dT/dx = grad |v|^2/2 + reaction along Cartesian runs", lag,
            tolerance(plan, "lagrange_residual", 1e-4), lsamples);
    rep.add("consistency_residual", "Lambda_k = 0 for k > M on the grid", worst.consistency,
            tolerance(plan, "consistency_residual", 1e-8), grid.size());
    rep.add("dual_route_lambda", "A^T lambda = M^-T tau on the grid", worst.dual, tolerance(plan, "dual_route_lambda", 1e-8),
            grid.size());
    rep.add("structure_antisymmetry", "A + A^T = 0 on the grid", worst.antisym,
            tolerance(plan, "structure_antisymmetry", 1e-10), grid.size());
    rep.add("frame_identity", "M^T A M = H on the grid", worst.frame, tolerance(plan, "frame_identity", 1e-10), grid.size());
    rep.add("field_identity", "cofactor field equals linear-solve field on the grid", worst.field,
            tolerance(plan, "field_identity", 1e-10), grid.size());
    if (pde)
        rep.add("literal_pde", "literal first-order PDE of the system on the grid", worst.pde, tolerance(plan, "literal_pde", 1e-8),
                grid.size());
    for (std::size_t k = 0; k < fields.size(); ++k)
        rep.add("monitor:" + fields[k].first, "monitored quantity constant along Cartesian runs", mon_dev[k], mon_tol[k],
                samples);

    json doc;
    doc["command"] = "verify";
    doc["system"] = def.name;
    doc["preset"] = plan.lambda.preset.empty() && plan.lambda.expressions.empty() && plan.system.inline_def == std::nullopt
                        ? catalog::descriptor(plan.system.catalog).default_preset
                        : plan.lambda.preset;
    doc["seed"] = plan.seed;
    doc["grid"] = grid.size();
    doc["runs"] = runs.size();
    doc["report"] = report_to_json(rep);
    doc["pass"] = rep.all_pass();
    if (plan.output.report) write_if(r, plan, plan.output.prefix + "_report.json", report_to_json(rep).dump(2) + "\n");
    if (plan.output.csv)
        for (std::size_t i = 0; i < runs.size(); ++i) {
            Trajectory t = runs[i].cartesian;
            attach_monitors(t, fields);
            write_if(r, plan, plan.output.prefix + "_" + std::to_string(i) + "_cartesian.csv", trajectory_csv(t));
        }
    r.document = doc;
    return r;
}

// ---------------------------------------------------------------- inverse

namespace {

std::vector<Vec> inverse_points(const InverseSpec& in) {
    std::vector<Vec> pts = in.points;
    if (in.count) {
        auto more = box_points(in.lo, in.hi, in.count, in.seed);
        pts.insert(pts.end(), more.begin(), more.end());
    }
    return pts;
}

MetricField inverse_metric(const InverseSpec& in) {
    if (in.metric_upper.empty()) return MetricField::identity(in.dim);
    return MetricField::from_upper(in.dim, in.metric_upper);
}

Vec eval(const std::vector<Expr>& es, const Vec& x) { return evaluate_all(es, x); }

/// Classical run under `force` from (x0, v(x0)): max drift of the orbit functions and the trajectory gap to the field.
std::pair<double, std::size_t> orbit_drift(const MetricField& G, const std::vector<Expr>& force,
                                           const std::function<Vec(const Vec&)>& v, const Vec& x0, double t1,
                                           const std::function<Vec(const Vec&)>& fvals) {
    MechanicalSystem mech(G, {}, force);
    IntegratorConfig cfg;
    cfg.method = Method::RK45;
    cfg.t1 = t1;
    cfg.step = 1e-2;
    cfg.rtol = 1e-11;
    cfg.atol = 1e-13;
    cfg.project_velocity = false;
    Trajectory t = integrate_classical(mech, x0, v(x0), cfg);
    if (t.truncated()) return {kInf, t.size()};
    Vec f0 = fvals(x0);
    double d = 0;
    for (const Vec& x : t.x) d = std::max(d, (fvals(x) - f0).cwiseAbs().maxCoeff());
    return {d, t.size()};
}

json certificate_json(const inverse::Certificate& c) {
    json j;
    j["samples"] = c.samples;
    j["closedness"] = number_json(c.closedness);
    j["gradient_match"] = number_json(c.gradient_match);
    j["tolerance"] = c.tolerance;
    j["pass"] = c.pass;
    if (!c.h_values.empty()) {
        json pts = json::array();
        for (std::size_t i = 0; i < c.h_points.size(); ++i) {
            json row = vec_json(c.h_points[i]);
            row.push_back(c.h_values[i]);
            pts.push_back(row);
        }
        j["h_table"] = pts;
    }
    return j;
}

}  // namespace

RunResult inverse(const RunPlan& plan, const std::string& route) {
    if (!plan.inverse) throw SpecError({plan.origin + ": inverse needs an 'inverse' section"});
    InverseSpec in = *plan.inverse;
    if (!in.route.empty() && in.route != route)
        throw SpecError({plan.origin + ": inverse.route is '" + in.route + "' but --route is '" + route + "'"});
    in.route = route;
    const int n = in.dim;
    RunResult r;
    VerificationReport& rep = r.report;
    json doc;
    doc["command"] = "inverse";
    doc["route"] = route;
    std::vector<Vec> pts = inverse_points(in);
    const double tol = tolerance(plan, "closedness", 1e-8);
    const double orbit_tol = tolerance(plan, "orbit_invariance", 1e-6);

    auto add_orbit = [&](const MetricField& G, const std::vector<Expr>& force, const std::function<Vec(const Vec&)>& v,
                         const std::function<Vec(const Vec&)>& fvals) {
        if (!in.orbit_x0) return;
        auto [d, count] = orbit_drift(G, force, v, *in.orbit_x0, in.orbit_t1, fvals);
        rep.add("orbit_invariance", "orbit functions constant under xddot = F from (x0, v(x0))", d, orbit_tol, count);
    };
    auto potential_json = [&](const inverse::PotentialResult& p) {
        doc["potential_route"] = p.route;
        doc["U"] = p.U ? json(expr::print(*p.U)) : json(nullptr);
        doc["velocity"] = exprs_json(p.velocity);
        json inputs = json::object();
        for (const auto& [k, v] : p.inputs) inputs[k] = v;
        doc["inputs"] = inputs;
        doc["certificate"] = certificate_json(p.certificate);
        if (!pts.empty()) {
            json vals = json::array();
            for (const Vec& x : pts) {
                json row = vec_json(x);
                row.push_back(number_json(p.value(x)));
                vals.push_back(row);
            }
            doc["U_samples"] = vals;
        }
    };
    auto gradient_force = [&](const inverse::PotentialResult& p) {
        std::vector<Expr> F;
        if (p.U)
            for (int k = 0; k < n; ++k) F.push_back(expr::differentiate(*p.U, k));
        return F;
    };

    if (route == "dainelli" || route == "suslov") {
        inverse::OrbitFamily fam;
        fam.dim = n;
        fam.f = in.f;
        fam.f_aux = in.f_aux;
        fam.lambda = in.lambda;
        if (!in.metric_upper.empty()) fam.metric = inverse_metric(in);
        inverse::ForceField F = inverse::dainelli_force(fam);
        doc["velocity"] = exprs_json(F.velocity);
        doc["force"] = exprs_json(F.force);
        doc["reaction"] = exprs_json(F.reaction);
        auto fvals = [&](const Vec& x) { return eval(fam.f, x); };
        if (route == "dainelli") {
            double red = 0, rot = 0, frame = 0;
            std::size_t frames = 0;
            json samples = json::array();
            for (const Vec& x : pts) {
                Vec a = F.at(x);
                samples.push_back({{"x", vec_json(x)}, {"F", vec_json(a)}});
                if (n == 2 && in.metric_upper.empty())
                    red = std::max(red, (a - inverse::dainelli_force_2d(fam.f[0], fam.lambda, x)).norm() / std::max(1.0, a.norm()));
                if (n == 3) rot = std::max(rot, (a - inverse::dainelli_rot_form(fam, x)).norm() / std::max(1.0, a.norm()));
                try {
                    auto e = inverse::dainelli_force_at(fam, F, x);
                    frame = std::max(frame, (e.reaction_frame - e.reaction).norm() / std::max(1.0, e.reaction.norm()));
                    ++frames;
                } catch (const InverseError&) {
                }
            }
            doc["samples"] = samples;
            if (n == 2 && in.metric_upper.empty())
                rep.add("plane_reduction", "general route equals the plane bracket formula", red,
                        tolerance(plan, "plane_reduction", 1e-10), pts.size());
            if (n == 3)
                rep.add("rot_form", "general route equals the rot form", rot, tolerance(plan, "rot_form", 1e-9), pts.size());
            rep.add("structure_route", "sum Lambda_j df_j equals the reaction", frame, tolerance(plan, "structure_route", 1e-9),
                    frames);
            add_orbit(fam.G(), F.force, [&](const Vec& x) { return F.velocity.empty() ? x : eval(F.velocity, x); }, fvals);
        } else {
            auto p = inverse::suslov_potential(fam, pts, in.h, tol);
            potential_json(p);
            rep.add("closedness", "reaction 1-form closed on the grid", p.certificate.closedness, tol, p.certificate.samples);
            if (p.U)
                rep.add("gradient_match", "F = grad U on the grid", p.certificate.gradient_match,
                        tolerance(plan, "gradient_match", 1e-8), p.certificate.samples);
            add_orbit(fam.G(), p.U ? gradient_force(p) : F.force, [&](const Vec& x) { return eval(F.velocity, x); }, fvals);
        }
    } else if (route == "joukovski") {
        if (in.mode == "orthogonal") {
            MetricField G = MetricField::diagonal(in.metric_diagonal);
            auto p = inverse::joukovski_orthogonal_coords(G, in.h.value_or(Expr()), in.g, in.base, pts, true, tol);
            potential_json(p);
            rep.add("closedness", "h dG_NN closed on the grid", p.certificate.closedness, tol, p.certificate.samples);
            if (p.U) {
                rep.add("gradient_match", "F = grad U on the grid", p.certificate.gradient_match,
                        tolerance(plan, "gradient_match", 1e-8), p.certificate.samples);
                add_orbit(G, gradient_force(p), [&](const Vec& x) { return eval(p.velocity, x); },
                          [&](const Vec& x) { return Vec(x.head(n - 1)); });
            }
        } else {
            inverse::JoukovskiInput ji;
            ji.dim = n;
            ji.f = in.f;
            if (!in.metric_upper.empty()) ji.metric = inverse_metric(in);
            ji.S = in.S;
            ji.nu = in.nu;
            ji.Phi = in.Phi;
            ji.h = in.h;
            ji.h0 = in.h0;
            auto p = inverse::joukovski_potential(ji, in.mode == "exact-nu" ? inverse::JoukovskiMode::ExactNu
                                                                              : inverse::JoukovskiMode::General,
                                                  pts, tol);
            potential_json(p);
            rep.add("closedness", "reaction 1-form closed on the grid", p.certificate.closedness, tol, p.certificate.samples);
            if (p.U)
                rep.add("gradient_match", "F = grad U on the grid", p.certificate.gradient_match,
                        tolerance(plan, "gradient_match", 1e-8), p.certificate.samples);
            std::vector<Expr> force = gradient_force(p);
            if (force.empty()) force = inverse::force_from_velocity(p.velocity, ji.G()).force;
            add_orbit(ji.G(), force, [&](const Vec& x) { return eval(p.velocity, x); },
                      [&](const Vec& x) { return eval(ji.f, x); });
        }
    } else if (route == "stackel") {
        inverse::StackelInput si;
        si.phi = in.phi;
        si.Psi = in.Psi;
        si.alpha = in.alpha;
        si.nu = in.nu;
        si.h0 = in.h0;
        auto p = inverse::stackel_potential(si, in.probe, pts, tol);
        potential_json(p);
        rep.add("closedness", "reaction 1-form closed where K_k > 0", p.certificate.closedness, tol, p.certificate.samples);
        rep.add("gradient_match", "F = grad U where K_k > 0", p.certificate.gradient_match,
                tolerance(plan, "gradient_match", 1e-8), p.certificate.samples);
        // U against the independently solved coefficients: Φ^T A = e_N
        double sum = 0;
        for (const Vec& x : pts) {
            Mat Phi(n, n);
            for (int k = 0; k < n; ++k)
                for (int j = 0; j < n; ++j) Phi(k, j) = eval({in.phi[k][j]}, x)(0);
            Vec e = Vec::Zero(n);
            e(n - 1) = 1;
            Vec A = Phi.transpose().fullPivLu().solve(e);
            const double nu2 = std::pow(eval({in.nu}, x)(0), 2);
            const double expect = nu2 * (A.dot(eval(in.Psi, x)) + in.alpha[n - 1]) - in.h0;
            sum = std::max(sum, std::fabs(p.value(x) - expect) / std::max(1.0, std::fabs(expect)));
        }
        rep.add("bracket_sum", "U = nu^2 (sum A^k Psi_k + alpha_N) - h0 with A solved numerically", sum,
                tolerance(plan, "bracket_sum", 1e-10), pts.size());
        MetricField G = inverse::stackel_metric(in.phi);
        if (in.orbit_x0) {
            Vec base = *in.orbit_x0;
            add_orbit(G, gradient_force(p), [&](const Vec& x) { return eval(p.velocity, x); },
                      [&](const Vec& x) {
                          Vec f(n - 1);
                          for (int j = 0; j < n - 1; ++j) f(j) = inverse::stackel_first_integral(si, j, base, x);
                          return f;
                      });
        }
    } else if (route == "bertrand") {
        doc["b"] = in.b;
        if (in.b == 0.0) {
            auto p = inverse::bertrand_b0(in.Psi_tau, in.h_r, in.r_ref);
            potential_json(p);
            if (in.orbit_x0 && p.U) {
                MechanicalSystem mech(MetricField::identity(2), {}, gradient_force(p));
                IntegratorConfig cfg;
                cfg.method = Method::RK45;
                cfg.t1 = in.orbit_t1;
                cfg.step = 1e-2;
                cfg.rtol = 1e-11;
                cfg.atol = 1e-13;
                cfg.project_velocity = false;
                const Vec x0 = *in.orbit_x0;
                Trajectory t = integrate_classical(mech, x0, eval(p.velocity, x0), cfg);
                double dl = t.truncated() ? kInf : 0, dr = dl;
                const double L0 = x0(0) * t.v[0](1) - x0(1) * t.v[0](0);
                for (std::size_t i = 0; i < t.size(); ++i) {
                    dl = std::max(dl, std::fabs(t.x[i](0) * t.v[i](1) - t.x[i](1) * t.v[i](0) - L0));
                    dr = std::max(dr, std::fabs(t.x[i].norm() - x0.norm()));
                }
                rep.add("angular_momentum", "|x x xdot| constant in the central field", dl,
                        tolerance(plan, "angular_momentum", 1e-8), t.size());
                rep.add("radius", "circular initial data keeps r constant", dr, tolerance(plan, "radius", 1e-8), t.size());
            }
        } else {
            json terms = json::array();
            double ode = 0, rec = 0;
            std::size_t nrec = 0;
            for (const auto& bt : in.terms) {
                json rows = json::array();
                for (double tau : in.taus) {
                    const double H = inverse::bertrand_H(bt.j, in.b, bt.K, bt.C, tau);
                    const double res = inverse::bertrand_ode_residual(bt.j, in.b, bt.K, bt.C, tau);
                    ode = std::max(ode, res);
                    json row = {{"tau", tau}, {"H", H}, {"ode_residual", res}};
                    if (bt.j == -2 && in.b != 1.0) {
                        const double Cp = inverse::bertrand_Hm2_constant(in.b, bt.K, bt.C);
                        const double c = inverse::bertrand_Hm2_closed(in.b, bt.K, Cp, tau);
                        row["closed_form"] = c;
                        rec = std::max(rec, std::fabs(c - H) / std::max(1.0, std::fabs(H)));
                        ++nrec;
                    }
                    rows.push_back(row);
                }
                terms.push_back({{"j", bt.j}, {"K", bt.K}, {"C", bt.C}, {"values", rows}});
            }
            doc["terms"] = terms;
            rep.add("ode_residual", "H_j solves its linear ODE (5-point differences)", ode, tolerance(plan, "ode_residual", 1e-6),
                    in.terms.size() * in.taus.size());
            if (nrec)
                rep.add("reconciliation", "j = -2 quadrature equals the closed form with C' = C + 2K/(1-b^2)", rec,
                        tolerance(plan, "reconciliation", 1e-10), nrec);
            if (!pts.empty()) {
                json vals = json::array();
                for (const Vec& x : pts) {
                    const double rr = x.norm();
                    double U = 0;
                    for (const auto& bt : in.terms) U += inverse::bertrand_U_term(bt.j, in.b, bt.K, bt.C, rr, x(0) / rr);
                    json row = vec_json(x);
                    row.push_back(U);
                    vals.push_back(row);
                }
                doc["U_samples"] = vals;
            }
        }
    } else {
        throw SpecError({plan.origin + ": unknown route '" + route + "'"});
    }
    doc["report"] = report_to_json(rep);
    doc["pass"] = rep.all_pass();
    if (plan.output.report) write_if(r, plan, plan.output.prefix + "_inverse_" + route + ".json", doc.dump(2) + "\n");
    r.document = doc;
    return r;
}

// ---------------------------------------------------------------- catalog

std::string catalog_list() {
    std::string out;
    for (const auto& d : catalog::list_systems()) {
        out += d.name + "  N=" + std::to_string(d.dim) + " M=" + std::to_string(d.constraints) + "  " + d.summary + "\n";
        for (const auto& p : d.presets)
            out += "    " + p.name + (p.name == d.default_preset ? " (default)" : "") + (p.paper ? "" : " [reference-only]") + "  " +
                   p.summary + "\n";
    }
    return out;
}

json catalog_show(const std::string& name) {
    const auto& d = catalog::descriptor(name);
    json j;
    j["name"] = d.name;
    j["summary"] = d.summary;
    j["dim"] = d.dim;
    j["constraints"] = d.constraints;
    j["coordinates"] = d.letters;
    j["domain"] = d.domain;
    j["horizon"] = d.horizon;
    json params = json::array();
    for (const auto& p : d.params)
        params.push_back({{"name", p.name}, {"value", p.value}, {"lo", number_json(p.lo)}, {"hi", number_json(p.hi)}, {"doc", p.doc}});
    j["params"] = params;
    json presets = json::array();
    for (const auto& p : d.presets) {
        json pj = {{"name", p.name}, {"summary", p.summary}, {"lambdas", p.lambdas}, {"paper", p.paper}};
        pj["potential"] = p.potential == catalog::PotentialKind::None       ? json(nullptr)
                          : p.potential == catalog::PotentialKind::HalfNorm ? json("half-norm")
                                                                            : json(p.potential_expr);
        presets.push_back(pj);
    }
    j["presets"] = presets;
    j["default_preset"] = d.default_preset;
    json refs = json::array();
    for (const auto& ref : catalog::reference_solutions())
        if (ref.system == d.name)
            refs.push_back({{"name", ref.name}, {"preset", ref.preset}, {"verbatim", ref.verbatim}, {"admitted", ref.admitted}});
    j["references"] = refs;
    SystemDefinition def = catalog::definition(name);
    j["metric_upper"] = exprs_json(def.metric_upper);
    json given = json::array(), aux = json::array();
    for (const auto& f : def.given) given.push_back(exprs_json(f.coeffs));
    for (const auto& f : def.auxiliary) aux.push_back(exprs_json(f.coeffs));
    j["given"] = given;
    j["auxiliary"] = aux;
    return j;
}

}  // namespace descartes::cli
