#include "descartes/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "descartes/parallel.hpp"

namespace descartes::inverse {

namespace {

using boost::math::quadrature::gauss_kronrod;

Expr X(int k) { return Expr::variable(k); }

std::vector<Expr> gradient_expr(const Expr& e, int n) {
    std::vector<Expr> g(n);
    for (int k = 0; k < n; ++k) g[k] = expr::differentiate(e, k);
    return g;
}

/// Symbolic G⁻¹ (adjugate over determinant); identity short-cut.
std::vector<std::vector<Expr>> inverse_metric(const MetricField& G) {
    const int n = G.dim();
    std::vector<std::vector<Expr>> inv(n, std::vector<Expr>(n));
    if (G.is_identity()) {
        for (int i = 0; i < n; ++i) inv[i][i] = Expr::constant(1.0);
        return inv;
    }
    std::vector<std::vector<Expr>> m(n, std::vector<Expr>(n));
    bool diagonal = true;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            m[i][j] = G.entry(i, j);
            if (i != j && !m[i][j].is_constant(0.0)) diagonal = false;
        }
    if (diagonal) {
        for (int i = 0; i < n; ++i) inv[i][i] = 1.0 / m[i][i];
        return inv;
    }
    Expr det = det_expr(m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) inv[i][j] = cofactor_expr(m, j, i) / det;
    return inv;
}

std::vector<Expr> raise(const std::vector<std::vector<Expr>>& inv, const std::vector<Expr>& w) {
    const int n = static_cast<int>(w.size());
    std::vector<Expr> out(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out[i] = out[i] + inv[i][j] * w[j];
    return out;
}

Expr dot(const std::vector<Expr>& a, const std::vector<Expr>& b) {
    Expr s;
    for (std::size_t i = 0; i < a.size(); ++i) s = s + a[i] * b[i];
    return s;
}

/// Replace parameters f1, f2, ... by the family functions.
Expr compose_family(Expr h, const std::vector<Expr>& f) {
    for (std::size_t j = 0; j < f.size(); ++j) h = expr::substitute_parameter(h, "f" + std::to_string(j + 1), f[j]);
    return h;
}

void check_dim(const std::vector<Expr>& es, int n, const std::string& what) {
    for (const auto& e : es)
        if (expr::max_variable(e) >= n)
            throw DimensionError(what + " references x" + std::to_string(expr::max_variable(e) + 1) + " in dimension " +
                                 std::to_string(n));
}

/// Compiled 1-form with a thread-safe evaluator.
struct FormTape {
    explicit FormTape(const std::vector<Expr>& rho) : n(static_cast<int>(rho.size())), prog(rho) {}
    Vec at(const Vec& x) const {
        Vec out(n);
        prog.run(x.data(), nullptr, out.data());
        return out;
    }
    int n;
    expr::Program prog;
};

/// Gauss–Kronrod 31 with a relative tolerance, after a single-panel pass
/// accepted on an absolute floor (Boost has no absolute tolerance, so an
/// integrand that is zero up to rounding would otherwise recurse to max depth).
template <class F>
double gk(F&& f, double a, double b, unsigned depth, double* err) {
    double L1 = 0.0;
    double v = gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0, err, &L1);
    if (*err <= 1e-14 * std::max(1.0, L1)) return v;
    return gauss_kronrod<double, 31>::integrate(f, a, b, depth, 1e-10, err);
}

double integrate_line(const FormTape& rho, const Vec& base, const Vec& x) {
    const int n = rho.n;
    Vec y = base;
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
        if (x(k) != base(k)) {
            auto f = [&](double s) {
                Vec p = y;
                p(k) = s;
                return rho.at(p)(k);
            };
            double err = 0.0;
            double v = gk(f, base(k), x(k), 15, &err);
            if (!std::isfinite(v)) throw QuadratureError("line integral: non-finite value on leg " + std::to_string(k + 1));
            total += v;
        }
        y(k) = x(k);
    }
    return total;
}

double quad(const std::function<double(double)>& f, double a, double b, const std::string& what) {
    if (a == b) return 0.0;
    double err = 0.0;
    double v = gk(f, a, b, 20, &err);
    if (!std::isfinite(v) || err > 1e-9 * std::max(1.0, std::fabs(v)))
        throw QuadratureError(what + ": quadrature did not converge (error estimate " + std::to_string(err) + ")");
    return v;
}

double scaled(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

/// max |F − ∂U| / max(1, |F|) over the points.
double gradient_gap(const ForceField& F, const std::function<Vec(const Vec&)>& dU, const std::vector<Vec>& pts) {
    std::vector<double> gap(pts.size(), 0.0);
    expr::Program prog(F.force);
    parallel_for(pts.size(), [&](std::size_t i) {
        Vec f(F.dim);
        prog.run(pts[i].data(), nullptr, f.data());
        gap[i] = scaled(dU(pts[i]), f);
    });
    double m = 0.0;
    for (double g : gap) m = std::max(m, g);
    return m;
}

struct ExprFunction {
    explicit ExprFunction(const Expr& U, int n) : n(n), prog(std::vector<Expr>{U}), grad(gradient_expr(U, n)) {}
    int n;
    expr::Program prog;
    expr::Program grad;
    double value(const Vec& x) const {
        double out = 0.0;
        prog.run(x.data(), nullptr, &out);
        return out;
    }
    Vec gradient(const Vec& x) const {
        Vec out(n);
        grad.run(x.data(), nullptr, out.data());
        return out;
    }
};

void attach_expr(PotentialResult& r, const Expr& U, int n) {
    auto fn = std::make_shared<ExprFunction>(U, n);
    r.U = U;
    r.value = [fn](const Vec& x) { return fn->value(x); };
    r.gradient = [fn](const Vec& x) { return fn->gradient(x); };
}

}  // namespace

// ---------------------------------------------------------------- forces

void OrbitFamily::validate() const {
    if (dim < 2) throw DimensionError("orbit family needs N >= 2");
    if (static_cast<int>(f.size()) != dim - 1)
        throw DimensionError("orbit family in dimension " + std::to_string(dim) + " needs " + std::to_string(dim - 1) +
                             " functions (got " + std::to_string(f.size()) + ")");
    if (metric.dim() && metric.dim() != dim) throw DimensionError("orbit family metric has the wrong dimension");
    check_dim(f, dim, "orbit function");
    check_dim({lambda}, dim, "lambda");
    if (f_aux) check_dim({*f_aux}, dim, "auxiliary function");
}

Vec ForceField::at(const Vec& x) const { return evaluate_all(force, x); }
Vec ForceField::gradient_at(const Vec& x) const { return evaluate_all(gradient, x); }
Vec ForceField::reaction_at(const Vec& x) const { return evaluate_all(reaction, x); }

ForceField force_from_velocity(const std::vector<Expr>& v, const MetricField& G) {
    const int n = static_cast<int>(v.size());
    if (G.dim() != n) throw DimensionError("force_from_velocity: metric and field dimensions differ");
    ForceField F;
    F.dim = n;
    F.velocity = v;
    std::vector<Expr> p = G.lower(v);
    Expr half = 0.5 * G.inner(v, v);
    F.gradient = gradient_expr(half, n);
    std::vector<std::vector<Expr>> dp(n);
    for (int k = 0; k < n; ++k) dp[k] = gradient_expr(p[k], n);  // dp[k][j] = ∂_j p_k
    F.reaction.assign(n, Expr());
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            if (j != k) F.reaction[k] = F.reaction[k] + v[j] * (dp[k][j] - dp[j][k]);
    for (int k = 0; k < n; ++k) F.force.push_back(F.gradient[k] + F.reaction[k]);
    return F;
}

Vec dainelli_force_2d(const Expr& f, const Expr& lambda, const Vec& x) {
    if (x.size() != 2) throw DimensionError("dainelli_force_2d needs a point in the plane");
    check_dim({f, lambda}, 2, "dainelli_force_2d");
    Expr fx = expr::differentiate(f, 0), fy = expr::differentiate(f, 1);
    auto bracket = [&](const Expr& g) { return fx * expr::differentiate(g, 1) - fy * expr::differentiate(g, 0); };
    Expr l2 = lambda * lambda;
    Expr fl = bracket(lambda);
    std::vector<Expr> F = {-(l2 * bracket(fy)) - lambda * fl * fy, l2 * bracket(fx) + lambda * fl * fx};
    return evaluate_all(F, x);
}

Vec dainelli_force_2d_rewritten(const Expr& f, const Expr& lambda, const Vec& x) {
    if (x.size() != 2) throw DimensionError("dainelli_force_2d_rewritten needs a point in the plane");
    check_dim({f, lambda}, 2, "dainelli_force_2d_rewritten");
    Expr fx = expr::differentiate(f, 0), fy = expr::differentiate(f, 1);
    Expr half = 0.5 * lambda * lambda * (fx * fx + fy * fy);
    Expr mu = expr::differentiate(lambda * fx, 0) + expr::differentiate(lambda * fy, 1);
    std::vector<Expr> F = {expr::differentiate(half, 0) - lambda * mu * fx,
                           expr::differentiate(half, 1) - lambda * mu * fy};
    return evaluate_all(F, x);
}

ForceField dainelli_force(const OrbitFamily& family) {
    family.validate();
    std::vector<Expr> v = nambu_bracket_expr(family.f, family.dim);
    for (auto& c : v) c = family.lambda * c;
    return force_from_velocity(v, family.G());
}

ForceEval dainelli_force_at(const OrbitFamily& family, const ForceField& F, const Vec& x) {
    family.validate();
    const int n = family.dim;
    if (x.size() != n) throw DimensionError("dainelli_force_at: point has the wrong dimension");
    std::vector<Expr> br = nambu_bracket_expr(family.f, n);
    Vec bx = evaluate_all(br, x);
    Expr fN;
    if (family.f_aux) {
        fN = *family.f_aux;
    } else {
        Eigen::Index k = 0;
        bx.cwiseAbs().maxCoeff(&k);
        fN = X(static_cast<int>(k));
    }
    std::vector<Expr> dfN = gradient_expr(fN, n);
    Expr jac = dot(br, dfN);
    ForceEval out;
    out.jacobian = expr::evaluate(jac, {std::vector<double>(x.data(), x.data() + n), {}, {}});
    double scale = 1.0;
    for (const auto& fj : family.f) scale *= std::max(1.0, OneFormField::exact(fj, n).at(x).norm());
    scale *= std::max(1.0, evaluate_all(dfN, x).norm());
    if (std::fabs(out.jacobian) < 1e-12 * scale)
        throw InverseError("orbit family Jacobian {f_1, ..., f_N} vanishes at the evaluation point");

    out.F = F.at(x);
    out.gradient = F.gradient_at(x);
    out.reaction = F.reaction_at(x);

    // exact coframe df_1..df_{N-1}, df_N with λ_N = λ {f_1, ..., f_N}
    SystemDefinition def;
    def.name = "orbit_family";
    def.dim = n;
    MetricField G = family.G();
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) def.metric_upper.push_back(G.entry(i, j));
    for (const auto& fj : family.f) def.given.push_back(OneFormField::exact(fj, n));
    def.auxiliary.push_back(OneFormField::exact(fN, n));
    def.lambdas = {family.lambda * jac};
    ConstraintSystem sys(def);
    LambdaEval le = lambda_vector(sys, x);
    const double lN = le.lambda_tilde(n - 1);
    out.reaction_frame = Vec::Zero(n);
    out.a_last_row = Vec::Zero(n - 1);
    for (int j = 0; j < n; ++j) {
        out.reaction_frame += le.Lambda(j) * (j < n - 1 ? OneFormField::exact(family.f[j], n) : OneFormField::exact(fN, n)).at(x);
        if (j < n - 1) out.a_last_row(j) = lN != 0.0 ? le.Lambda(j) / lN : 0.0;
    }
    return out;
}

Vec dainelli_rot_form(const OrbitFamily& family, const Vec& x) {
    family.validate();
    if (family.dim != 3) throw DimensionError("dainelli_rot_form is defined for N = 3");
    MetricField G = family.G();
    std::vector<Expr> v = nambu_bracket_expr(family.f, 3);
    for (auto& c : v) c = family.lambda * c;
    Vec rot = rot3(VectorFieldDef{v}, G, x);
    Vec df1 = OneFormField::exact(family.f[0], 3).at(x), df2 = OneFormField::exact(family.f[1], 3).at(x);
    Vec grad = evaluate_all(gradient_expr(0.5 * G.inner(v, v), 3), x);
    const double lam = expr::evaluate(family.lambda, {std::vector<double>(x.data(), x.data() + 3), {}, {}});
    const double vol = std::sqrt(G.at(x).determinant());
    return grad + lam * vol * (df1.dot(rot) * df2 - df2.dot(rot) * df1);
}

// ---------------------------------------------------------------- certificates

Certificate exactness_check(const std::vector<Expr>& rho, const std::vector<Vec>& grid, double tol, unsigned workers) {
    const int n = static_cast<int>(rho.size());
    std::vector<Expr> curl;
    for (int p = 0; p < n; ++p)
        for (int q = p + 1; q < n; ++q) curl.push_back(expr::differentiate(rho[q], p) - expr::differentiate(rho[p], q));
    Certificate c;
    c.tolerance = tol;
    c.samples = grid.size();
    if (!curl.empty()) {
        expr::Program prog(curl);
        std::vector<double> worst(grid.size(), 0.0);
        parallel_for(
            grid.size(),
            [&](std::size_t i) {
                std::vector<double> out(curl.size());
                prog.run(grid[i].data(), nullptr, out.data());
                double m = 0.0;
                for (double o : out) m = std::max(m, std::fabs(o));
                worst[i] = std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
            },
            workers);
        for (double w : worst) c.closedness = std::max(c.closedness, w);
    }
    c.pass = c.closedness < tol;
    return c;
}

Certificate exactness_check(const OrbitFamily& family, const std::vector<Vec>& grid, double tol, unsigned workers) {
    ForceField F = dainelli_force(family);
    Certificate c = exactness_check(F.reaction, grid, tol, workers);
    if (c.pass && !grid.empty()) {
        FormTape tape(F.reaction);
        c.h_points = grid;
        c.h_values.assign(grid.size(), 0.0);
        parallel_for(
            grid.size(), [&](std::size_t i) { c.h_values[i] = integrate_line(tape, grid[0], grid[i]); }, workers);
    }
    return c;
}

double line_integral(const std::vector<Expr>& rho, const Vec& base, const Vec& x) {
    if (base.size() != static_cast<Eigen::Index>(rho.size()) || x.size() != base.size())
        throw DimensionError("line_integral: dimensions differ");
    return integrate_line(FormTape(rho), base, x);
}

// ---------------------------------------------------------------- potentials

std::optional<Expr> polynomial_antiderivative(const Expr& e, int k, int max_degree) {
    std::vector<Expr> zero_at;  // x^k -> 0, everything else kept
    const int n = std::max(expr::max_variable(e), k) + 1;
    for (int i = 0; i < n; ++i) zero_at.push_back(i == k ? Expr::constant(0.0) : X(i));
    Expr d = e;
    Expr out;
    double fact = 1.0;
    for (int m = 0; m <= max_degree + 1; ++m) {
        if (d.is_constant(0.0)) return out;
        if (m == max_degree + 1) break;
        if (m > 0) fact *= m;
        Expr c = expr::substitute(d, zero_at);
        if (!c.is_constant(0.0)) out = out + (c / (fact * (m + 1))) * expr::pow(X(k), static_cast<double>(m + 1));
        d = expr::differentiate(d, k);
    }
    return std::nullopt;
}

PotentialResult suslov_potential(const OrbitFamily& family, const std::vector<Vec>& grid, const std::optional<Expr>& h,
                                 double tol) {
    ForceField F = dainelli_force(family);
    PotentialResult r;
    r.route = "suslov";
    r.velocity = F.velocity;
    r.certificate = exactness_check(F.reaction, grid, tol);
    const int n = family.dim;
    MetricField G = family.G();
    Expr half = 0.5 * G.inner(F.velocity, F.velocity);
    if (h) {
        Expr hx = compose_family(*h, family.f);
        check_dim({hx}, n, "h");
        r.inputs.emplace_back("h", expr::print(*h));
        attach_expr(r, half + hx, n);
        r.certificate.gradient_match = gradient_gap(F, r.gradient, grid);
        r.certificate.pass = r.certificate.pass && r.certificate.gradient_match < tol;
    } else {
        if (grid.empty()) throw InverseError("suslov_potential: a grid is needed to tabulate h");
        auto tape = std::make_shared<FormTape>(F.reaction);
        auto hf = std::make_shared<ExprFunction>(half, n);
        Vec base = grid[0];
        auto force = std::make_shared<expr::Program>(F.force);
        r.value = [tape, hf, base](const Vec& x) { return hf->value(x) + integrate_line(*tape, base, x); };
        r.gradient = [force, n](const Vec& x) {
            Vec out(n);
            force->run(x.data(), nullptr, out.data());
            return out;
        };
        if (r.certificate.pass) {
            r.certificate.h_points = grid;
            r.certificate.h_values.assign(grid.size(), 0.0);
            parallel_for(grid.size(),
                         [&](std::size_t i) { r.certificate.h_values[i] = integrate_line(*tape, base, grid[i]); });
        }
    }
    r.inputs.emplace_back("lambda", expr::print(family.lambda));
    return r;
}

std::vector<Expr> joukovski_condition_form(const Expr& S, const Expr& nu, const MetricField& G) {
    const int n = G.dim();
    auto inv = inverse_metric(G);
    std::vector<Expr> dS = gradient_expr(S, n), dn2 = gradient_expr(nu * nu, n);
    std::vector<Expr> dS_up = raise(inv, dS);
    Expr a = dot(dn2, dS_up), b = dot(dS, dS_up);
    std::vector<Expr> out(n);
    for (int k = 0; k < n; ++k) out[k] = a * dS[k] - b * dn2[k];
    return out;
}

PotentialResult joukovski_potential(const JoukovskiInput& in, JoukovskiMode mode, const std::vector<Vec>& grid,
                                    double tol) {
    const int n = in.dim;
    if (static_cast<int>(in.f.size()) != n - 1) throw DimensionError("joukovski_potential needs N-1 orbit functions");
    MetricField G = in.G();
    auto inv = inverse_metric(G);
    std::vector<Expr> dS = gradient_expr(in.S, n);
    std::vector<Expr> dS_up = raise(inv, dS);

    // orthogonality (∂S, ∂f_j)_G = 0
    std::vector<Expr> orth;
    for (const auto& fj : in.f) orth.push_back(dot(gradient_expr(fj, n), dS_up));
    for (const Vec& x : grid) {
        Vec o = evaluate_all(orth, x);
        for (int j = 0; j < static_cast<int>(in.f.size()); ++j) {
            double s = std::max(1.0, evaluate_all(dS, x).norm() * OneFormField::exact(in.f[j], n).at(x).norm());
            if (std::fabs(o(j)) > 1e-8 * s)
                throw InverseError("S is not orthogonal to f" + std::to_string(j + 1) + " (inner product " +
                                   std::to_string(o(j)) + ")");
        }
    }

    PotentialResult r;
    r.inputs.emplace_back("S", expr::print(in.S));
    if (mode == JoukovskiMode::ExactNu) {
        r.route = "joukovski";
        Expr phiS = expr::substitute_parameter(in.Phi, "S", in.S);
        std::vector<Expr> w = gradient_expr(phiS, n);
        std::vector<Expr> v = raise(inv, w);
        ForceField F = force_from_velocity(v, G);
        r.velocity = v;
        r.inputs.emplace_back("Phi", expr::print(in.Phi));
        attach_expr(r, 0.5 * dot(w, v) - in.h0, n);
        r.certificate = exactness_check(F.reaction, grid, tol);
        r.certificate.gradient_match = gradient_gap(F, r.gradient, grid);
        r.certificate.pass = r.certificate.pass && r.certificate.gradient_match < tol;
        return r;
    }

    r.route = "joukovski";
    Expr nu = expr::substitute_parameter(in.nu, "S", in.S);
    r.inputs.emplace_back("nu", expr::print(in.nu));
    std::vector<Expr> v;
    for (const auto& c : dS_up) v.push_back(nu * c);
    ForceField F = force_from_velocity(v, G);
    r.velocity = v;
    r.certificate = exactness_check(F.reaction, grid, tol);
    if (!r.certificate.pass)
        throw InverseError("closedness condition fails for this nu: residual " +
                           std::to_string(r.certificate.closedness));
    Expr half = 0.5 * nu * nu * dot(dS, dS_up);
    if (in.h) {
        r.inputs.emplace_back("h", expr::print(*in.h));
        attach_expr(r, half + compose_family(*in.h, in.f), n);
        r.certificate.gradient_match = gradient_gap(F, r.gradient, grid);
        r.certificate.pass = r.certificate.gradient_match < tol;
    } else {
        if (grid.empty()) throw InverseError("joukovski_potential: a grid is needed to tabulate h");
        auto tape = std::make_shared<FormTape>(F.reaction);
        auto hf = std::make_shared<ExprFunction>(half, n);
        auto force = std::make_shared<expr::Program>(F.force);
        Vec base = grid[0];
        r.value = [tape, hf, base](const Vec& x) { return hf->value(x) + integrate_line(*tape, base, x); };
        r.gradient = [force, n](const Vec& x) {
            Vec out(n);
            force->run(x.data(), nullptr, out.data());
            return out;
        };
        r.certificate.h_points = grid;
        r.certificate.h_values.assign(grid.size(), 0.0);
        parallel_for(grid.size(),
                     [&](std::size_t i) { r.certificate.h_values[i] = integrate_line(*tape, base, grid[i]); });
    }
    return r;
}

PotentialResult joukovski_orthogonal_coords(const MetricField& G, const Expr& h, const Expr& g, const Vec& base,
                                            const std::vector<Vec>& grid, bool allow_quadrature, double tol) {
    const int n = G.dim();
    if (n < 2) throw DimensionError("joukovski_orthogonal_coords needs N >= 2");
    if (base.size() != n) throw DimensionError("joukovski_orthogonal_coords: base point has the wrong dimension");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && !G.entry(i, j).is_constant(0.0))
                throw InverseError("joukovski_orthogonal_coords needs a diagonal metric");
    if (expr::depends_on(h, n - 1)) throw InverseError("h must not depend on x" + std::to_string(n));
    for (int k = 0; k < n - 1; ++k)
        if (expr::depends_on(g, k)) throw InverseError("g must depend on x" + std::to_string(n) + " only");
    const Expr& GNN = G.entry(n - 1, n - 1);

    // leg j: x^i final for i < j, base for j < i < N, x^N kept
    struct Leg {
        Expr integrand;  // over the leg variable x^j and the kept coordinates
        std::optional<Expr> anti;
    };
    std::vector<Leg> legs;
    Expr W;
    bool symbolic = true;
    for (int j = 0; j < n - 1; ++j) {
        std::vector<Expr> repl;
        for (int i = 0; i < n; ++i) repl.push_back(i > j && i < n - 1 ? Expr::constant(base(i)) : X(i));
        Leg leg{expr::substitute(h * expr::differentiate(GNN, j), repl), std::nullopt};
        leg.anti = polynomial_antiderivative(leg.integrand, j);
        if (leg.anti) {
            std::vector<Expr> at_base;
            for (int i = 0; i < n; ++i) at_base.push_back(i == j ? Expr::constant(base(j)) : X(i));
            W = W + (*leg.anti - expr::substitute(*leg.anti, at_base));
        } else {
            symbolic = false;
        }
        legs.push_back(std::move(leg));
    }
    if (!symbolic && !allow_quadrature)
        throw InverseError("h dG_NN has no polynomial antiderivative and quadrature is disabled");

    PotentialResult r;
    r.route = "joukovski-orthogonal";
    r.inputs = {{"G_NN", expr::print(GNN)}, {"h", expr::print(h)}, {"g", expr::print(g)}};
    std::vector<Expr> pts = {};
    if (symbolic) {
        Expr U = (g + W) / GNN;
        attach_expr(r, U, n);
        Expr nu2 = 2.0 * g - 2.0 * GNN * h + 2.0 * W;
        r.velocity.assign(n, Expr());
        r.velocity[n - 1] = expr::sqrt(nu2) / GNN;
    } else {
        auto legs_ptr = std::make_shared<std::vector<Leg>>(legs);
        auto num = std::make_shared<expr::Program>(std::vector<Expr>{g, GNN});
        Vec b = base;
        auto value = [legs_ptr, num, b, n](const Vec& x) {
            double w = 0.0;
            for (int j = 0; j < n - 1; ++j) {
                const Leg& leg = (*legs_ptr)[j];
                if (leg.anti) {
                    Vec hi = x, lo = x;
                    lo(j) = b(j);
                    w += expr::evaluate(*leg.anti, {std::vector<double>(hi.data(), hi.data() + n), {}, {}}) -
                         expr::evaluate(*leg.anti, {std::vector<double>(lo.data(), lo.data() + n), {}, {}});
                } else {
                    expr::Program p(std::vector<Expr>{leg.integrand});
                    w += quad(
                        [&](double s) {
                            Vec y = x;
                            y(j) = s;
                            double out = 0.0;
                            p.run(y.data(), nullptr, &out);
                            return out;
                        },
                        b(j), x(j), "joukovski_orthogonal_coords");
                }
            }
            double gv[2];
            num->run(x.data(), nullptr, gv);
            return (gv[0] + w) / gv[1];
        };
        r.value = value;
        // central differences; the quadrature path has no symbolic gradient
        r.gradient = [value, n](const Vec& x) {
            Vec out(n);
            for (int k = 0; k < n; ++k) {
                const double s = 1e-5 * std::max(1.0, std::fabs(x(k)));
                Vec p = x, m = x;
                p(k) += s;
                m(k) -= s;
                out(k) = (value(p) - value(m)) / (2 * s);
            }
            return out;
        };
    }

    // h dG_NN closed in x^1..x^{N-1}
    std::vector<Expr> form(n);
    for (int j = 0; j < n - 1; ++j) form[j] = h * expr::differentiate(GNN, j);
    std::vector<Vec> where = grid.empty() ? std::vector<Vec>{base} : grid;
    r.certificate = exactness_check(form, where, tol);
    if (symbolic) {
        ForceField F = force_from_velocity(r.velocity, G);
        std::vector<Vec> live;
        expr::Program nu2(std::vector<Expr>{2.0 * g - 2.0 * GNN * h + 2.0 * W});
        for (const Vec& x : where) {
            double v = 0.0;
            nu2.run(x.data(), nullptr, &v);
            if (v > 1e-12) live.push_back(x);
        }
        r.certificate.gradient_match = gradient_gap(F, r.gradient, live);
        r.certificate.pass = r.certificate.pass && r.certificate.gradient_match < tol;
    }
    return r;
}

std::vector<Expr> stackel_coefficients(const std::vector<std::vector<Expr>>& phi) {
    const int n = static_cast<int>(phi.size());
    std::vector<std::vector<Expr>> m(n, std::vector<Expr>(n));
    for (int a = 0; a < n; ++a)
        for (int k = 0; k < n; ++k) {
            if (static_cast<int>(phi[k].size()) != n) throw DimensionError("phi must be N x N");
            m[a][k] = phi[k][a];
        }
    Expr det = det_expr(m);
    std::vector<Expr> A(n);
    for (int k = 0; k < n; ++k) A[k] = cofactor_expr(m, n - 1, k) / det;
    return A;
}

MetricField stackel_metric(const std::vector<std::vector<Expr>>& phi) {
    std::vector<Expr> d;
    for (const auto& a : stackel_coefficients(phi)) d.push_back(1.0 / a);
    return MetricField::diagonal(d);
}

Expr stackel_sum(const std::vector<Expr>& A, const std::vector<Expr>& Psi) { return dot(A, Psi); }

PotentialResult stackel_potential(const StackelInput& in, const Vec& probe, const std::vector<Vec>& grid, double tol) {
    const int n = static_cast<int>(in.phi.size());
    if (n < 2) throw DimensionError("stackel_potential needs N >= 2");
    if (static_cast<int>(in.Psi.size()) != n || static_cast<int>(in.alpha.size()) != n)
        throw DimensionError("stackel_potential: Psi and alpha need N entries");
    for (int k = 0; k < n; ++k) {
        if (static_cast<int>(in.phi[k].size()) != n) throw DimensionError("phi must be N x N");
        for (int i = 0; i < n; ++i) {
            if (i == k) continue;
            for (int a = 0; a < n; ++a)
                if (expr::depends_on(in.phi[k][a], i))
                    throw InverseError("phi_" + std::to_string(k + 1) + std::to_string(a + 1) + " must depend on x" +
                                       std::to_string(k + 1) + " only");
            if (expr::depends_on(in.Psi[k], i))
                throw InverseError("Psi_" + std::to_string(k + 1) + " must depend on x" + std::to_string(k + 1) + " only");
        }
    }
    std::vector<std::vector<Expr>> m(n, std::vector<Expr>(n)), mpsi;
    for (int a = 0; a < n; ++a)
        for (int k = 0; k < n; ++k) m[a][k] = in.phi[k][a];
    mpsi = m;
    mpsi[n - 1] = in.Psi;
    Expr det = det_expr(m);
    double dv = expr::evaluate(det, {std::vector<double>(probe.data(), probe.data() + probe.size()), {}, {}});
    if (std::fabs(dv) < 1e-12) throw InverseError("stackel bracket {phi_1, ..., phi_N} vanishes at the probe");

    std::vector<Expr> A(n);
    for (int k = 0; k < n; ++k) A[k] = cofactor_expr(m, n - 1, k) / det;
    Expr ratio = det_expr(mpsi) / det;
    Expr nu2 = in.nu * in.nu;

    PotentialResult r;
    r.route = "stackel";
    attach_expr(r, nu2 * (ratio + in.alpha[n - 1]) - in.h0, n);
    std::vector<Expr> K(n);
    for (int k = 0; k < n; ++k) {
        Expr s;
        for (int j = 0; j < n; ++j) s = s + in.alpha[j] * in.phi[k][j];
        K[k] = 2.0 * in.Psi[k] + 2.0 * s;
        r.velocity.push_back(in.nu * A[k] * expr::sqrt(K[k]));
    }
    std::vector<Expr> d;
    for (const auto& a : A) d.push_back(1.0 / a);
    MetricField G = MetricField::diagonal(d);
    ForceField F = force_from_velocity(r.velocity, G);

    std::vector<Vec> live;
    expr::Program kp(K);
    for (const Vec& x : grid) {
        Vec kv(n);
        kp.run(x.data(), nullptr, kv.data());
        if (kv.minCoeff() > 1e-9) live.push_back(x);
    }
    r.certificate = exactness_check(F.reaction, live, tol);
    r.certificate.gradient_match = gradient_gap(F, r.gradient, live);
    r.certificate.pass = r.certificate.pass && r.certificate.gradient_match < tol && !live.empty();
    for (int k = 0; k < n; ++k) {
        r.inputs.emplace_back("Psi" + std::to_string(k + 1), expr::print(in.Psi[k]));
        for (int a = 0; a < n; ++a)
            r.inputs.emplace_back("phi" + std::to_string(k + 1) + std::to_string(a + 1), expr::print(in.phi[k][a]));
    }
    r.inputs.emplace_back("nu", expr::print(in.nu));
    return r;
}

double stackel_first_integral(const StackelInput& in, int j, const Vec& base, const Vec& x) {
    const int n = static_cast<int>(in.phi.size());
    if (j < 0 || j >= n - 1) throw DimensionError("stackel_first_integral: index must be below N");
    if (base.size() != n || x.size() != n) throw DimensionError("stackel_first_integral: point has the wrong dimension");
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
        Expr s;
        for (int a = 0; a < n; ++a) s = s + in.alpha[a] * in.phi[k][a];
        expr::Program prog(std::vector<Expr>{in.phi[k][j] / expr::sqrt(2.0 * in.Psi[k] + 2.0 * s)});
        Vec y = base;
        total += quad(
            [&](double t) {
                y(k) = t;
                double out = 0.0;
                prog.run(y.data(), nullptr, &out);
                return out;
            },
            base(k), x(k), "stackel first integral");
    }
    return total;
}

// ---------------------------------------------------------------- Bertrand

namespace {

void check_tau(double tau) {
    if (!(tau > -1.0 + kBertrandDelta && tau < 1.0 - kBertrandDelta))
        throw InverseError("tau = " + std::to_string(tau) + " outside (-1 + delta, 1 - delta)");
}

void check_b(double b) {
    if (b == 0.0) throw InverseError("H_j needs b != 0 (use the b = 0 branch)");
}

}  // namespace

double bertrand_xi(int j, double b, double tau) {
    check_b(b);
    const double p = (j + 1) / 2.0 + (j + 3) / (2.0 * b), q = (j + 1) / 2.0 - (j + 3) / (2.0 * b);
    return std::pow(1.0 - tau, p) * std::pow(1.0 + tau, q);
}

double bertrand_H(int j, double b, double K, double C, double tau) {
    check_b(b);
    check_tau(tau);
    double I = 0.0;
    if (K != 0.0)
        I = quad([&](double s) { return std::pow(1.0 + b * s, j) / ((1.0 - s * s) * bertrand_xi(j, b, s)); }, 0.0, tau,
                 "H_" + std::to_string(j));
    return bertrand_xi(j, b, tau) * (C - (2.0 * K / b) * I);
}

double bertrand_H_prime(int j, double b, double K, double H, double tau) {
    check_b(b);
    return -(((j + 1) * b * tau + j + 3) * H + 2.0 * K * std::pow(1.0 + b * tau, j)) / (b * (1.0 - tau * tau));
}

double bertrand_ode_residual(int j, double b, double K, double C, double tau, double step) {
    check_tau(tau - 2 * step);
    check_tau(tau + 2 * step);
    auto H = [&](double t) { return bertrand_H(j, b, K, C, t); };
    const double d = (H(tau - 2 * step) - 8 * H(tau - step) + 8 * H(tau + step) - H(tau + 2 * step)) / (12 * step);
    const double h = H(tau);
    return std::fabs(b * (1 - tau * tau) * d + ((j + 1) * b * tau + j + 3) * h + 2 * K * std::pow(1 + b * tau, j));
}

double bertrand_Hm2_closed(double b, double K, double Cprime, double tau) {
    check_b(b);
    if (b == 1.0) throw InverseError("the j = -2 closed form needs b != 1");
    check_tau(tau);
    return std::pow(1 - tau, (1 - b) / (2 * b)) / std::pow(1 + tau, (1 + b) / (2 * b)) * Cprime -
           2 * K / ((b * tau + 1) * (1 - b * b));
}

double bertrand_Hm2_constant(double b, double K, double C) {
    check_b(b);
    if (b == 1.0) throw InverseError("the j = -2 closed form needs b != 1");
    // both forms at τ = 0, where ξ = 1
    return C + 2 * K / (1 - b * b);
}

double bertrand_U_term(int j, double b, double K, double C, double r, double tau) {
    if (!(r > 0)) throw InverseError("U_j needs r > 0");
    const double H = bertrand_H(j, b, K, C, tau);
    const double Q = 1 + b * b + 2 * b * tau, f = r * (1 + b * tau);
    if (j == -1) return 0.5 * H * Q + K * std::log(std::fabs(f));
    return 0.5 * std::pow(r, j + 1) * H * Q + K * std::pow(f, j + 1) / (j + 1);
}

Vec bertrand_U_term_gradient(int j, double b, double K, double C, const Vec& xy) {
    const double r = std::hypot(xy(0), xy(1));
    if (!(r > 0)) throw InverseError("U_j needs r > 0");
    const double tau = xy(0) / r;
    const double H = bertrand_H(j, b, K, C, tau), Hp = bertrand_H_prime(j, b, K, H, tau);
    const double Q = 1 + b * b + 2 * b * tau, f = r * (1 + b * tau);
    double Ur, Ut;
    if (j == -1) {
        Ur = K / r;
        Ut = 0.5 * (Hp * Q + 2 * b * H) + K * b / (1 + b * tau);
    } else {
        Ur = 0.5 * (j + 1) * std::pow(r, j) * H * Q + K * std::pow(f, j) * (1 + b * tau);
        Ut = 0.5 * std::pow(r, j + 1) * (Hp * Q + 2 * b * H) + K * std::pow(f, j) * r * b;
    }
    const double x = xy(0), y = xy(1), r3 = r * r * r;
    Vec g(2);
    g << Ur * x / r + Ut * y * y / r3, Ur * y / r - Ut * x * y / r3;
    return g;
}

PotentialResult bertrand_b0(const Expr& Psi, const Expr& h, double r_ref) {
    check_dim({Psi, h}, 1, "bertrand_b0 (functions of one variable x1)");
    if (!(r_ref > 0)) throw InverseError("bertrand_b0 needs r_ref > 0");
    PotentialResult res;
    res.route = "bertrand";
    res.inputs = {{"b", "0"}, {"Psi", expr::print(Psi)}, {"h", expr::print(h)}};
    const Expr r = expr::sqrt(X(0) * X(0) + X(1) * X(1));
    const Expr tau = X(0) / r;
    Expr Psi_xy = expr::substitute(Psi, {tau});
    Expr h_r = expr::substitute(h, {r});
    auto anti = polynomial_antiderivative(h * X(0), 0);
    if (anti) {
        // I(r) = ∫_{r_ref}^r h(s) s ds
        Expr I = expr::substitute(*anti, {r}) - expr::substitute(*anti, {Expr::constant(r_ref)});
        Expr r2 = X(0) * X(0) + X(1) * X(1);
        Expr U;
        if (!Psi.is_constant(0.0)) U = U + Psi_xy / r2;
        if (!I.is_constant(0.0)) U = U - 2.0 * I / r2;
        attach_expr(res, U, 2);
        Expr lam2 = 2.0 * h_r - 4.0 * I / r2 + 2.0 * Psi_xy / r2;
        Expr lam = expr::sqrt(lam2);
        res.velocity = {-(lam * X(1) / r), lam * X(0) / r};
        return res;
    }
    auto hp = std::make_shared<expr::Program>(std::vector<Expr>{h});
    auto pp = std::make_shared<expr::Program>(std::vector<Expr>{Psi, expr::differentiate(Psi, 0)});
    auto I = [hp, r_ref](double rr) {
        return quad(
            [&](double s) {
                double v = 0.0;
                hp->run(&s, nullptr, &v);
                return v * s;
            },
            r_ref, rr, "bertrand b = 0 potential");
    };
    res.value = [pp, I](const Vec& x) {
        const double rr = std::hypot(x(0), x(1));
        const double t = x(0) / rr;
        double ps[2];
        pp->run(&t, nullptr, ps);
        return ps[0] / (rr * rr) - 2.0 * I(rr) / (rr * rr);
    };
    res.gradient = [pp, hp, I](const Vec& x) {
        const double rr = std::hypot(x(0), x(1)), t = x(0) / rr, r3 = rr * rr * rr;
        double ps[2], hv = 0.0;
        pp->run(&t, nullptr, ps);
        hp->run(&rr, nullptr, &hv);
        const double Ur = -2 * ps[0] / r3 + 4 * I(rr) / r3 - 2 * hv / rr;
        const double Ut = ps[1] / (rr * rr);
        Vec g(2);
        g << Ur * x(0) / rr + Ut * x(1) * x(1) / r3, Ur * x(1) / rr - Ut * x(0) * x(1) / r3;
        return g;
    };
    return res;
}

}  // namespace descartes::inverse
