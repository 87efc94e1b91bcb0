#include "descartes/catalog.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "descartes/dynamics.hpp"
#include "descartes/errors.hpp"

namespace descartes::catalog {

namespace {

constexpr double kPi = std::numbers::pi;

Expr P(const std::string& s) { return expr::parse(s); }

// Geometry of a catalog system, as expression sources.
struct Shape {
    std::vector<std::string> metric;  // packed upper triangle
    std::vector<std::vector<std::string>> given;
    std::vector<std::vector<std::string>> aux;
    std::string guard;
};

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

template <class Range, class Name>
std::string nearest(const std::string& key, const Range& items, Name name) {
    std::vector<std::pair<std::size_t, std::string>> scored;
    for (const auto& it : items) scored.emplace_back(edit_distance(key, name(it)), name(it));
    std::stable_sort(scored.begin(), scored.end(), [](auto& a, auto& b) { return a.first < b.first; });
    std::string out;
    for (std::size_t i = 0; i < scored.size() && i < 3; ++i) out += (i ? ", " : "") + scored[i].second;
    return out;
}

double eval(const Expr& e, const Vec& x) {
    expr::Env env;
    env.x.assign(x.data(), x.data() + x.size());
    return expr::evaluate(e, env);
}

double deval(const Expr& e, int k, const Vec& x) { return eval(expr::differentiate(e, k), x); }

Vec cube_box(const Vec& u, const std::vector<std::pair<double, double>>& box) {
    Vec x(u.size());
    for (int i = 0; i < u.size(); ++i) x(i) = box[i].first + u(i) * (box[i].second - box[i].first);
    return x;
}

// ---------------------------------------------------------------- suslov expressions

// γ over the Euler chart
const std::vector<Expr>& euler_gamma() {
    static const std::vector<Expr> g = {P("sin(x3)*sin(x1)"), P("sin(x3)*cos(x1)"), P("cos(x3)")};
    return g;
}

const std::string kOmega1 = "(v2*sin(x3)*sin(x1) + v3*cos(x1))";
const std::string kOmega2 = "(v2*sin(x3)*cos(x1) - v3*sin(x1))";

struct SuslovMuSource {
    std::string name;
    std::string summary;
    std::string mu1;
    std::string mu2;
    std::string k4;  // over (x, v); empty when none
    bool paper;
};

const std::vector<SuslovMuSource>& suslov_sources() {
    const std::string w1 = kOmega1, w2 = kOmega2;
    static const std::vector<SuslovMuSource> s = {
        {"uniform", "free body, constant mu: uniform rotation, K4 = (Iw, Iw)", "k1", "k2",
         "I1^2*" + w1 + "^2 + I2^2*" + w2 + "^2", true},
        {"kharlamova", "U = (b, gamma) with b orthogonal to the constraint axis, K4 = (Iw, b)",
         "sqrt(I2*(2*b1*x1 + h))", "sqrt(I1*(2*b2*x2 + h))", "b1*I1*" + w1 + " + b2*I2*" + w2, true},
        {"clebsch-tisseran",
         "U = eps/2 (I gamma, gamma), K4 = (Iw, Iw)/2 + eps/2 det I (I^-1 gamma, gamma)",
         "sqrt(-eps*I2*(I3 - I1))*x1", "sqrt(-eps*I1*(I3 - I2))*x2",
         "0.5*(I1^2*" + w1 + "^2 + I2^2*" + w2 +
             "^2) + 0.5*eps*(I2*I3*(sin(x3)*sin(x1))^2 + I1*I3*(sin(x3)*cos(x1))^2 + I1*I2*cos(x3)^2)",
         true},
        {"bad", "mu1 = gamma2, mu2 = -gamma1: violates the Suslov PDE", "x2", "-x1", "", false},
    };
    return s;
}

const SuslovMuSource& suslov_source(const std::string& name) {
    for (const auto& s : suslov_sources())
        if (s.name == name) return s;
    throw CatalogError("suslov has no preset '" + name + "'; nearest: " +
                       nearest(name, suslov_sources(), [](const SuslovMuSource& s) { return s.name; }));
}

struct SuslovChart {
    Expr l2, l3, U, mu1, mu2;
};

// λ2, λ3 and U over the Euler chart for μ over γ.
SuslovChart suslov_chart(const Expr& m1, const Expr& m2) {
    Expr mu1 = expr::substitute(m1, euler_gamma());
    Expr mu2 = expr::substitute(m2, euler_gamma());
    Expr w1 = mu2 / P("I1");
    Expr w2 = -mu1 / P("I2");
    return {(w1 * P("sin(x1)") + w2 * P("cos(x1)")) / P("sin(x3)"), w1 * P("cos(x1)") - w2 * P("sin(x1)"),
            (P("I1") * mu1 * mu1 + P("I2") * mu2 * mu2) / (2.0 * P("I1") * P("I2")) - P("h"), mu1, mu2};
}

Preset suslov_preset(const SuslovMuSource& src) {
    SuslovChart ch = suslov_chart(P(src.mu1), P(src.mu2));
    const Expr &mu1 = ch.mu1, &mu2 = ch.mu2;
    Preset p;
    p.name = src.name;
    p.summary = src.summary;
    p.lambdas = {expr::print(ch.l2), expr::print(ch.l3)};
    p.pde_inputs = {src.mu1, src.mu2};
    p.potential = PotentialKind::Explicit;
    p.potential_expr = expr::print(ch.U);
    p.paper = src.paper;
    p.monitors = {{"I1w1-mu2", "I1*" + kOmega1 + " - (" + expr::print(mu2) + ")"},
                  {"I2w2+mu1", "I2*" + kOmega2 + " + (" + expr::print(mu1) + ")"},
                  {"omega3", "v1 + cos(x3)*v2"}};
    if (!src.k4.empty()) p.monitors.push_back({"K4", src.k4});
    return p;
}

// ---------------------------------------------------------------- the registry

struct Entry {
    SystemDescriptor desc;
    Shape shape;
};

std::vector<Entry> make_entries() {
    std::vector<Entry> out;
    const std::string lin_q = "sqrt(m/(Ic + eps^2*m))";

    {  // ---------------------------------------------------------------- sleigh
        Entry e;
        auto& d = e.desc;
        d.name = "chaplygin_sleigh";
        d.summary = "knife-edge sleigh on the plane, T = Ic/2 xd^2 + m/2 (yd^2 + zd^2), eps xd + sin x yd - cos x zd = 0";
        d.dim = 3;
        d.constraints = 1;
        d.params = {{"m", 2.0, 1e-9, 1e300, "mass"},
                    {"Ic", 3.0, 1e-9, 1e300, "moment of inertia about C"},
                    {"eps", 0.5, -1e300, 1e300, "distance |AC|"},
                    {"C", 1.0, -1e300, 1e300, "amplitude of the inertial preset"},
                    {"C0", 0.3, -1e300, 1e300, "phase of the inertial preset"}};
        d.letters = {"x1 = x (heading angle)", "x2 = y", "x3 = z"};
        d.probe = [](const Params&) { return Vec(0.3 * Vec::Unit(3, 0)); };
        d.domain = "x in [-pi, pi], y, z in [-2, 2]";
        d.domain_map = [](const Vec& u, const Params&) { return cube_box(u, {{-kPi, kPi}, {-2, 2}, {-2, 2}}); };
        d.has_paper_pde = true;
        const std::string th = "(" + lin_q + "*eps*x1 + C0)";
        Preset inertial;
        inertial.name = "inertial";
        inertial.summary = "lambda2 = C sin(theta), lambda3 = C q cos(theta), theta = q eps x + C0, q = sqrt(m/J)";
        inertial.lambdas = {"C*sin" + th, "C*" + lin_q + "*cos" + th};
        inertial.pde_inputs = inertial.lambdas;
        inertial.monitors = {{"half_norm", "0.5*(Ic*v1^2 + m*v2^2 + m*v3^2)"}};
        Preset bad;
        bad.name = "bad";
        bad.summary = "lambda2 = lambda3 = 1 with eps = 1: not Cartesian";
        bad.lambdas = {"1", "1"};
        bad.pde_inputs = bad.lambdas;
        bad.overrides = {{"eps", 1.0}};
        bad.paper = false;
        d.presets = {inertial, bad};
        d.default_preset = "inertial";
        e.shape = {{"Ic", "0", "0", "m", "0", "m"},
                   {{"eps", "sin(x1)", "-cos(x1)"}},
                   {{"0", "cos(x1)", "sin(x1)"}, {"1", "0", "0"}},
                   ""};
        out.push_back(e);
    }
    {  // ---------------------------------------------------------------- skate
        Entry e;
        auto& d = e.desc;
        d.name = "skate";
        d.summary = "sleigh with eps = 0 in the field of the force function U = m g y";
        d.dim = 3;
        d.constraints = 1;
        d.params = {{"m", 1.5, 1e-9, 1e300, "mass"},
                    {"Ic", 2.0, 1e-9, 1e300, "moment of inertia (J = Ic at eps = 0)"},
                    {"g", 0.5, -1e300, 1e300, "field strength"},
                    {"C0", 1.0, -1e300, 1e300, "initial xd, nonzero"},
                    {"C1", 1.0, -1e300, 1e300, "integration constant"}};
        d.letters = {"x1 = x (heading angle)", "x2 = y", "x3 = z"};
        d.probe = [](const Params&) { return Vec(0.3 * Vec::Unit(3, 0)); };
        d.domain = "x in [-pi, pi], y, z in [-2, 2]; paper-equivalent needs |C0 C1| > |g|";
        d.domain_map = [](const Vec& u, const Params&) { return cube_box(u, {{-kPi, kPi}, {-2, 2}, {-2, 2}}); };
        d.has_paper_pde = true;
        Preset equiv;
        equiv.name = "paper-equivalent";
        equiv.summary = "lambda2 = C0, lambda3 = C0^3/(g sin x + C0 C1): the classical field rescaled by C0/s";
        equiv.lambdas = {"C0", "C0^3/(g*sin(x1) + C1*C0)"};
        equiv.pde_inputs = equiv.lambdas;
        equiv.potential = PotentialKind::HalfNorm;
        Preset inertial;
        inertial.name = "paper-inertial";
        inertial.summary = "lambda2 = C1, lambda3 = C0, no force";
        inertial.lambdas = {"C1", "C0"};
        inertial.pde_inputs = inertial.lambdas;
        Preset classical;
        classical.name = "classical-field";
        classical.summary = "the classical field b under U = m g y; Cartesian only after rescaling";
        classical.lambdas = {"g*sin(x1)/C0 + C1", "C0"};
        classical.pde_inputs = classical.lambdas;
        classical.potential = PotentialKind::Explicit;
        classical.potential_expr = "m*g*x2";
        classical.paper = false;
        d.presets = {equiv, inertial, classical};
        d.default_preset = "paper-equivalent";
        e.shape = {{"Ic", "0", "0", "m", "0", "m"},
                   {{"0", "sin(x1)", "-cos(x1)"}},
                   {{"0", "cos(x1)", "sin(x1)"}, {"1", "0", "0"}},
                   ""};
        out.push_back(e);
    }
    {  // ---------------------------------------------------------------- suslov
        Entry e;
        auto& d = e.desc;
        d.name = "suslov";
        d.summary = "rigid body about a fixed point with omega3 = 0, Euler-angle chart";
        d.dim = 3;
        d.constraints = 1;
        d.params = {{"I1", 2.0, 1e-9, 1e300, "principal moment"},
                    {"I2", 3.0, 1e-9, 1e300, "principal moment"},
                    {"I3", 4.0, 1e-9, 1e300, "principal moment (constraint axis)"},
                    {"h", 2.0, -1e300, 1e300, "energy constant in U"},
                    {"k1", 0.7, -1e300, 1e300, "uniform: mu1"},
                    {"k2", -0.4, -1e300, 1e300, "uniform: mu2"},
                    {"b1", 0.3, -1e300, 1e300, "kharlamova: b1"},
                    {"b2", 0.2, -1e300, 1e300, "kharlamova: b2"},
                    {"eps", -0.5, -1e300, 1e300, "clebsch-tisseran: eps"}};
        d.letters = {"x1 = x (proper rotation)", "x2 = y (precession)", "x3 = z (nutation)"};
        d.probe = [](const Params&) {
            Vec x(3);
            x << 0.4, 0.2, kPi / 3;
            return x;
        };
        d.domain = "x, y in [-pi, pi], z in [0.3, pi - 0.3]";
        d.domain_map = [](const Vec& u, const Params&) {
            return cube_box(u, {{-kPi, kPi}, {-kPi, kPi}, {0.3, kPi - 0.3}});
        };
        d.has_paper_pde = true;
        for (const auto& s : suslov_sources()) d.presets.push_back(suslov_preset(s));
        d.default_preset = "clebsch-tisseran";
        e.shape = {{"I3", "I3*cos(x3)", "0", "(I1*sin(x1)^2 + I2*cos(x1)^2)*sin(x3)^2 + I3*cos(x3)^2",
                    "(I1 - I2)*sin(x1)*cos(x1)*sin(x3)", "I1*cos(x1)^2 + I2*sin(x1)^2"},
                   {{"1", "cos(x3)", "0"}},
                   {{"0", "1", "0"}, {"0", "0", "1"}},
                   "sin(x3)"};
        out.push_back(e);
    }
    {  // ---------------------------------------------------------------- gantmacher
        Entry e;
        auto& d = e.desc;
        d.name = "gantmacher";
        d.summary = "two particles linked by a rod, flat R^4 with two constraints, U = -g u3";
        d.dim = 4;
        d.constraints = 2;
        d.params = {{"g", 9.81, -1e300, 1e300, "gravity"},
                    {"w", 3.0, -1e300, 1e300, "nu3 = g3 (taken constant)"},
                    {"h", 40.0, -1e300, 1e300, "energy constant"}};
        d.letters = {"x1 = u1", "x2 = u2", "x3 = u3", "x4 = u4"};
        d.probe = [](const Params&) { return Vec(Vec::Unit(4, 0)); };
        d.domain = "u1, u2 on the annulus 0.6 <= r <= 1.4, u3, u4 in [-1, 1]";
        d.domain_map = [](const Vec& u, const Params&) {
            double r = 0.6 + 0.8 * u(0), a = 2 * kPi * u(1);
            Vec x(4);
            x << r * std::cos(a), r * std::sin(a), -1 + 2 * u(2), -1 + 2 * u(3);
            return x;
        };
        d.has_paper_pde = true;
        const std::string rho = "(x1^2 + x2^2)";
        const std::string nu4 = "sqrt(2*(h - g*x3)/" + rho + " - w^2)";
        Preset g30;
        g30.name = "G30";
        g30.summary = "nu3 = w, nu4 = sqrt(2(h - g u3)/rho - w^2), lambda = nu rho";
        g30.lambdas = {"w*" + rho, nu4 + "*" + rho};
        g30.pde_inputs = {"w", nu4};
        g30.potential = PotentialKind::Explicit;
        g30.potential_expr = "-g*x3";
        g30.monitors = {{"rho", rho}, {"half_norm+g*u3", "0.5*(v1^2 + v2^2 + v3^2 + v4^2) + g*x3"}};
        d.presets = {g30};
        d.default_preset = "G30";
        std::vector<std::string> flat;
        for (int i = 0; i < 4; ++i)
            for (int j = i; j < 4; ++j) flat.push_back(i == j ? "1" : "0");
        e.shape = {flat,
                   {{"x1", "x2", "0", "0"}, {"0", "0", "x1", "-x2"}},
                   {{"-x2", "x1", "0", "0"}, {"0", "0", "x2", "x1"}},
                   rho};
        out.push_back(e);
    }
    const std::string r = "sqrt(x1^2 + x2^2 + x3^2)";
    {  // ---------------------------------------------------------------- kepler
        Entry e;
        auto& d = e.desc;
        d.name = "kepler_kummer";
        d.summary = "flat R^3, a = grad f with f = r + (b, x), v = [a x c]/c^2 with c = (0, 0, c)";
        d.dim = 3;
        d.constraints = 1;
        d.params = {{"b1", 0.3, -0.95, 0.95, "b = (b1, b2, 0)"},
                    {"b2", 0.0, -0.95, 0.95, "b = (b1, b2, 0)"},
                    {"c", 1.0, 1e-9, 1e300, "|c|, c along x3"}};
        d.letters = {"x1", "x2", "x3 (along c)"};
        d.probe = [](const Params& p) {
            Vec x = Vec::Zero(3);
            x(0) = p.at("c") * p.at("c") / (1 + p.at("b1"));  // on f = c^2
            return x;
        };
        d.horizon = 10.0;
        d.domain = "plane x3 = 0, 0.5 <= r <= 2";
        d.domain_map = [](const Vec& u, const Params&) {
            double rr = 0.5 + 1.5 * u(0), a = 2 * kPi * u(1);
            Vec x(3);
            x << rr * std::cos(a), rr * std::sin(a), 0.0;
            return x;
        };
        const std::string a1 = "(x1/" + r + " + b1)", a2 = "(x2/" + r + " + b2)";
        Preset kep;
        kep.name = "kepler";
        kep.summary = "lambda2 = 0 on dx3, lambda3 = (a1^2 + a2^2)/c on (a2, -a1, 0)";
        kep.lambdas = {"0", "(" + a1 + "^2 + " + a2 + "^2)/c"};
        kep.potential = PotentialKind::HalfNorm;
        kep.monitors = {{"zeta", "x3"}, {"f", r + " + b1*x1 + b2*x2"}};
        d.presets = {kep};
        d.default_preset = "kepler";
        e.shape = {{"1", "0", "0", "1", "0", "1"},
                   {{a1, a2, "x3/" + r}},
                   {{"0", "0", "1"}, {a2, "-" + a1, "0"}},
                   ""};
        out.push_back(e);
    }
    {  // ---------------------------------------------------------------- axis particle
        Entry e;
        auto& d = e.desc;
        d.name = "axis_particle";
        d.summary = "unit-mass particle in R^3 with sin x yd - cos x zd = 0 (rot a = a)";
        d.dim = 3;
        d.constraints = 1;
        d.params = {{"C1", 0.8, -1e300, 1e300, "constant: xd"},
                    {"C2", 0.6, -1e300, 1e300, "constant: rho"},
                    {"alpha", 0.4, -1e300, 1e300, "beltrami: rho = alpha y + beta z"},
                    {"beta", 0.7, -1e300, 1e300, "beltrami: rho = alpha y + beta z"}};
        d.letters = {"x1 = x", "x2 = y", "x3 = z"};
        d.probe = [](const Params&) {
            Vec x(3);
            x << 0.3, 0.2, -0.1;
            return x;
        };
        d.domain = "x in [-pi, pi], y, z in [-2, 2]";
        d.domain_map = [](const Vec& u, const Params&) { return cube_box(u, {{-kPi, kPi}, {-2, 2}, {-2, 2}}); };
        d.has_paper_pde = true;
        Preset k33;
        k33.name = "k33";
        k33.summary = "lambda = lambda(x), rho = rho(y, z): lambda = C1 + 0.3 sin x, rho = C2 + 0.2 y z";
        k33.lambdas = {"C1 + 0.3*sin(x1)", "C2 + 0.2*x2*x3"};
        k33.pde_inputs = k33.lambdas;
        k33.potential = PotentialKind::HalfNorm;
        Preset constant;
        constant.name = "constant";
        constant.summary = "lambda = C1, rho = C2: free motion xd = C1, yd = C2 cos x, zd = C2 sin x";
        constant.lambdas = {"C1", "C2"};
        constant.pde_inputs = constant.lambdas;
        Preset beltrami;
        beltrami.name = "beltrami";
        beltrami.summary = "lambda = beta cos x - alpha sin x, rho = alpha y + beta z: rot v = v";
        beltrami.lambdas = {"beta*cos(x1) - alpha*sin(x1)", "alpha*x2 + beta*x3"};
        beltrami.pde_inputs = beltrami.lambdas;
        beltrami.potential = PotentialKind::HalfNorm;
        d.presets = {k33, constant, beltrami};
        d.default_preset = "k33";
        e.shape = {{"1", "0", "0", "1", "0", "1"},
                   {{"0", "sin(x1)", "-cos(x1)"}},
                   {{"1", "0", "0"}, {"0", "cos(x1)", "sin(x1)"}},
                   ""};
        out.push_back(e);
    }
    {  // ---------------------------------------------------------------- geodesic
        Entry e;
        auto& d = e.desc;
        d.name = "geodesic_homogeneous";
        d.summary = "geodesic flow on the degree-one surface f = r + (b, x) = c, |xd|^2 = 2 h0";
        d.dim = 3;
        d.constraints = 1;
        d.params = {{"b1", 0.2, -0.5, 0.5, "b"}, {"b2", 0.1, -0.5, 0.5, "b"}, {"b3", 0.0, -0.5, 0.5, "b"},
                    {"h0", 0.5, 1e-9, 1e300, "h(f), constant"}};
        d.letters = {"x1", "x2", "x3"};
        d.probe = [](const Params&) {
            Vec x(3);
            x << 1.0, 0.5, 0.3;
            return x;
        };
        d.horizon = 10.0;
        d.domain = "shell 0.5 <= r <= 2 (away from the line through b)";
        d.domain_map = [](const Vec& u, const Params&) {
            double rr = 0.5 + 1.5 * u(0), ct = 1 - 2 * u(1), st = std::sqrt(std::max(0.0, 1 - ct * ct)),
                   ph = 2 * kPi * u(2);
            Vec x(3);
            x << rr * st * std::cos(ph), rr * st * std::sin(ph), rr * ct;
            return x;
        };
        const std::string a1 = "(x1/" + r + " + b1)", a2 = "(x2/" + r + " + b2)", a3 = "(x3/" + r + " + b3)";
        const std::string n1 = "(x2*b3 - x3*b2)", n2 = "(x3*b1 - x1*b3)", n3 = "(x1*b2 - x2*b1)";
        Preset geo;
        geo.name = "degree-one";
        geo.summary = "v = G_f (x - f a/g) with G_f^2 = 2 h g/(g r^2 - f^2): lambda2 = (x, v), lambda3 = 0";
        geo.lambdas = {"sqrt(2*h0*(" + n1 + "^2 + " + n2 + "^2 + " + n3 + "^2)/(" + a1 + "^2 + " + a2 + "^2 + " + a3 +
                           "^2))",
                       "0"};
        const std::string f = "(" + r + " + b1*x1 + b2*x2 + b3*x3)";
        const std::string L = "((x2*v3 - x3*v2)^2 + (x3*v1 - x1*v3)^2 + (x1*v2 - x2*v1)^2)";
        geo.monitors = {{"F", "(2*" + f + "/" + r + " + b1^2 + b2^2 + b3^2 - 1)*" + L + " - 2*" + f + "^2*h0"},
                        {"f", f},
                        {"speed2", "v1^2 + v2^2 + v3^2"}};
        d.presets = {geo};
        d.default_preset = "degree-one";
        e.shape = {{"1", "0", "0", "1", "0", "1"}, {{a1, a2, a3}}, {{"x1", "x2", "x3"}, {n1, n2, n3}}, ""};
        out.push_back(e);
    }
    return out;
}

const std::vector<Entry>& entries() {
    static const std::vector<Entry> e = make_entries();
    return e;
}

const Entry& entry(const std::string& name) {
    for (const auto& e : entries())
        if (e.desc.name == name) return e;
    throw CatalogError("unknown catalog system '" + name + "'; nearest: " +
                       nearest(name, entries(), [](const Entry& e) { return e.desc.name; }));
}

OneFormField row_form(const std::vector<std::string>& cs) {
    OneFormField f;
    for (const auto& c : cs) f.coeffs.push_back(P(c));
    return f;
}

SystemDefinition base_definition(const Entry& e, const Params& params) {
    SystemDefinition def;
    def.name = e.desc.name;
    def.dim = e.desc.dim;
    for (const auto& m : e.shape.metric) def.metric_upper.push_back(P(m));
    for (const auto& g : e.shape.given) def.given.push_back(row_form(g));
    for (const auto& a : e.shape.aux) def.auxiliary.push_back(row_form(a));
    if (!e.shape.guard.empty()) def.chart_guard = P(e.shape.guard);
    def.params = params;
    if (e.desc.name == "geodesic_homogeneous" &&
        std::hypot(params.at("b1"), params.at("b2"), params.at("b3")) < 1e-6)
        throw CatalogError("geodesic_homogeneous: b must be nonzero (b = 0 is the sphere, where v vanishes)");
    return def;
}

Params bound_free_params(const SystemDescriptor& d, const Params& params) {
    Params out = d.defaults();
    for (const auto& [k, v] : params) out[k] = v;
    return out;
}

}  // namespace

// ---------------------------------------------------------------- descriptors

const Preset& SystemDescriptor::preset(const std::string& pname) const {
    const std::string key = pname.empty() ? default_preset : pname;
    for (const auto& p : presets)
        if (p.name == key) return p;
    throw CatalogError(name + " has no preset '" + key + "'; nearest: " +
                       nearest(key, presets, [](const Preset& p) { return p.name; }));
}

Params SystemDescriptor::defaults() const {
    Params p;
    for (const auto& s : params) p[s.name] = s.value;
    return p;
}

const std::vector<SystemDescriptor>& list_systems() {
    static const std::vector<SystemDescriptor> all = [] {
        std::vector<SystemDescriptor> v;
        for (const auto& e : entries()) v.push_back(e.desc);
        return v;
    }();
    return all;
}

const SystemDescriptor& descriptor(const std::string& name) { return entry(name).desc; }

Params resolve_params(const SystemDescriptor& d, const Preset& preset, const Params& params) {
    Params out = d.defaults();
    for (const auto& [k, v] : preset.overrides) out[k] = v;
    for (const auto& [k, v] : params) {
        if (!out.count(k))
            throw CatalogError(d.name + " has no parameter '" + k + "'; nearest: " +
                               nearest(k, d.params, [](const ParamSpec& s) { return s.name; }));
        out[k] = v;
    }
    for (const auto& s : d.params) {
        double v = out.at(s.name);
        if (!std::isfinite(v) || v < s.lo || v > s.hi)
            throw CatalogError(d.name + ": parameter " + s.name + " = " + std::to_string(v) + " outside [" +
                               std::to_string(s.lo) + ", " + std::to_string(s.hi) + "]");
    }
    return out;
}

SystemDefinition definition(const std::string& name, const Params& params, const std::string& preset) {
    const Entry& e = entry(name);
    const Preset& pr = e.desc.preset(preset);
    Params p = resolve_params(e.desc, pr, params);
    SystemDefinition def = base_definition(e, p);
    for (const auto& l : pr.lambdas) def.lambdas.push_back(P(l));
    switch (pr.potential) {
        case PotentialKind::None: break;
        case PotentialKind::Explicit: def.potential = P(pr.potential_expr); break;
        case PotentialKind::HalfNorm: def.potential = ConstraintSystem(def).half_norm_expr(); break;
    }
    return def;
}

SystemDefinition definition(const std::string& name, const Params& params, const std::vector<Expr>& lambdas,
                            std::optional<Expr> potential) {
    const Entry& e = entry(name);
    Params p = resolve_params(e.desc, e.desc.preset(""), params);
    SystemDefinition def = base_definition(e, p);
    def.lambdas = lambdas;
    def.potential = std::move(potential);
    return def;
}

ConstraintSystem build_system(const std::string& name, const Params& params, const std::string& preset) {
    ConstraintSystem sys(definition(name, params, preset));
    const auto& d = descriptor(name);
    frame_matrix(sys, d.probe(sys.definition().params));
    return sys;
}

ConstraintSystem build_system(const std::string& name, const Params& params, const std::vector<Expr>& lambdas,
                              std::optional<Expr> potential) {
    ConstraintSystem sys(definition(name, params, lambdas, std::move(potential)));
    frame_matrix(sys, descriptor(name).probe(sys.definition().params));
    return sys;
}

std::vector<Vec> domain_grid(const SystemDescriptor& d, const Params& p, std::size_t count) {
    Params full = bound_free_params(d, p);
    int k = 1;
    while (std::pow(k, d.dim) < static_cast<double>(count)) ++k;
    std::vector<Vec> pts;
    std::vector<int> idx(d.dim, 0);
    while (true) {
        Vec u(d.dim);
        for (int i = 0; i < d.dim; ++i) u(i) = (idx[i] + 0.5) / k;
        pts.push_back(d.domain_map(u, full));
        int i = 0;
        while (i < d.dim && ++idx[i] == k) idx[i++] = 0;
        if (i == d.dim) break;
    }
    return pts;
}

std::vector<Vec> domain_random(const SystemDescriptor& d, const Params& p, std::size_t count, std::mt19937_64& rng) {
    Params full = bound_free_params(d, p);
    std::vector<Vec> pts;
    for (std::size_t n = 0; n < count; ++n) {
        Vec u(d.dim);
        // top 53 bits: uniform_real_distribution is implementation defined
        for (int i = 0; i < d.dim; ++i) u(i) = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        pts.push_back(d.domain_map(u, full));
    }
    return pts;
}

// ---------------------------------------------------------------- literal PDEs

double paper_pde_residual(const std::string& name, const Params& params, const std::vector<Expr>& inputs, const Vec& x) {
    const auto& d = descriptor(name);
    if (!d.has_paper_pde) throw CatalogError(name + " has no literal PDE");
    Params p = bound_free_params(d, params);
    std::vector<Expr> in;
    for (const auto& e : inputs) in.push_back(expr::bind(e, p));
    auto need = [&](std::size_t n) {
        if (in.size() != n)
            throw CatalogError(name + ": literal PDE takes " + std::to_string(n) + " functions, got " +
                               std::to_string(in.size()));
    };
    const double s = std::sin(x(0)), c = std::cos(x(0));
    if (name == "chaplygin_sleigh") {
        need(2);
        const double m = p.at("m"), eps = p.at("eps"), J = p.at("Ic") + eps * eps * m;
        const Expr &l2 = in[0], &l3 = in[1];
        return s * (J * deval(l3, 2, x) + eps * m * deval(l2, 1, x)) +
               c * (J * deval(l3, 1, x) - eps * m * deval(l2, 2, x)) - m * (deval(l2, 0, x) - eps * eval(l3, x));
    }
    if (name == "skate") {
        need(2);
        const double m = p.at("m"), J = p.at("Ic");
        return J * (s * deval(in[1], 2, x) + c * deval(in[1], 1, x)) - m * deval(in[0], 0, x);
    }
    if (name == "suslov") {
        need(2);
        return suslov_eq4({in[0], in[1]}, suslov_gamma(x));
    }
    if (name == "gantmacher") {
        need(2);
        const Expr &n3 = in[0], &n4 = in[1];
        return x(1) * deval(n3, 2, x) + x(0) * deval(n3, 3, x) + x(1) * deval(n4, 0, x) - x(0) * deval(n4, 1, x);
    }
    // axis_particle
    need(2);
    return deval(in[0], 2, x) * s + deval(in[0], 1, x) * c - deval(in[1], 0, x);
}

double paper_pde_residual(const std::string& name, const Params& params, const std::string& preset, const Vec& x) {
    const auto& d = descriptor(name);
    const auto& pr = d.preset(preset);
    std::vector<Expr> in;
    for (const auto& s : pr.pde_inputs) in.push_back(P(s));
    return paper_pde_residual(name, resolve_params(d, pr, params), in, x);
}

// ---------------------------------------------------------------- Suslov helpers

Vec suslov_gamma(const Vec& e) {
    Vec g(3);
    g << std::sin(e(2)) * std::sin(e(0)), std::sin(e(2)) * std::cos(e(0)), std::cos(e(2));
    return g;
}

Vec suslov_euler(const Vec& g, double y) {
    Vec e(3);
    e << std::atan2(g(0), g(1)), y, std::acos(std::clamp(g(2) / g.norm(), -1.0, 1.0));
    return e;
}

Vec suslov_omega(const Params&, const Vec& x, const Vec& xd) {
    Vec w(3);
    w << xd(1) * std::sin(x(2)) * std::sin(x(0)) + xd(2) * std::cos(x(0)),
        xd(1) * std::sin(x(2)) * std::cos(x(0)) - xd(2) * std::sin(x(0)), xd(0) + std::cos(x(2)) * xd(1);
    return w;
}

SuslovPair suslov_mu(const Params& params, const std::string& preset) {
    const auto& d = descriptor("suslov");
    const SuslovMuSource& src = suslov_source(preset.empty() ? d.default_preset : preset);
    Params p = resolve_params(d, d.preset(src.name), params);
    return {expr::bind(P(src.mu1), p), expr::bind(P(src.mu2), p)};
}

double suslov_eq4(const SuslovPair& mu, const Vec& g) {
    return g(2) * (deval(mu.mu1, 1, g) - deval(mu.mu2, 0, g)) - g(1) * deval(mu.mu1, 2, g) +
           g(0) * deval(mu.mu2, 2, g);
}

std::vector<Expr> suslov_reduced_field(const Params& params, const SuslovPair& mu) {
    Params p = bound_free_params(descriptor("suslov"), params);
    Expr I1 = Expr::constant(p.at("I1")), I2 = Expr::constant(p.at("I2"));
    Expr g1 = Expr::variable(0), g2 = Expr::variable(1), g3 = Expr::variable(2);
    return {g3 * mu.mu1 / I2, g3 * mu.mu2 / I1, -(g1 * mu.mu1 / I2) - g2 * mu.mu2 / I1};
}

Expr suslov_potential_gamma(const Params& params, const SuslovPair& mu) {
    Params p = bound_free_params(descriptor("suslov"), params);
    const double I1 = p.at("I1"), I2 = p.at("I2");
    return (I1 * mu.mu1 * mu.mu1 + I2 * mu.mu2 * mu.mu2) / (2 * I1 * I2) - p.at("h");
}

double suslov_mu_closed_form(const Params& params, const SuslovPair& mu, const Vec& x, const Vec& xd) {
    Params p = bound_free_params(descriptor("suslov"), params);
    Vec w = suslov_omega(p, x, xd), g = suslov_gamma(x);
    Expr U = suslov_potential_gamma(p, mu);
    return -(p.at("I1") - p.at("I2")) * w(0) * w(1) + g(0) * deval(U, 1, g) - g(1) * deval(U, 0, g);
}

SuslovPair suslov_family(const Expr& S, const Expr& Psi1, const Expr& Psi2, const Expr& Omega, bool uncorrected) {
    Expr g1 = Expr::variable(0), g2 = Expr::variable(1), g3 = Expr::variable(2);
    Expr K2 = g1 * g1 + g2 * g2 + g3 * g3;
    // S is differentiated with K2 held fixed, then K2 = |γ|² is substituted.
    std::vector<Expr> s_args = {g1, g2, K2};
    Expr dS1 = expr::substitute(expr::differentiate(S, 0), s_args);
    Expr dS2 = expr::substitute(expr::differentiate(S, 1), s_args);
    Expr psi1 = expr::substitute(Psi1, {uncorrected ? g1 * g1 + g3 * g3 : g2 * g2 + g3 * g3, K2, g1});
    Expr psi2 = expr::substitute(Psi2, {g1 * g1 + g3 * g3, K2, g2});
    Expr om = expr::substitute(Omega, {g1 * g1 + g2 * g2, K2, g3});
    if (uncorrected) return {dS1 + psi1 + g2 * om, dS2 + psi2 + g1 * om};
    return {dS1 + psi1 + g1 * om, dS2 + psi2 + g2 * om};
}

SystemDefinition suslov_definition(const Params& params, const SuslovPair& mu) {
    SuslovChart ch = suslov_chart(mu.mu1, mu.mu2);
    return definition("suslov", params, {ch.l2, ch.l3}, ch.U);
}

std::optional<Expr> suslov_k4(const Params& params, const std::string& preset) {
    const auto& d = descriptor("suslov");
    const SuslovMuSource& src = suslov_source(preset.empty() ? d.default_preset : preset);
    if (src.k4.empty()) return std::nullopt;
    return expr::bind(P(src.k4), resolve_params(d, d.preset(src.name), params));
}

std::vector<std::pair<std::string, Expr>> monitors(const std::string& name, const Params& params,
                                                   const std::string& preset) {
    const auto& d = descriptor(name);
    const auto& pr = d.preset(preset);
    Params p = resolve_params(d, pr, params);
    std::vector<std::pair<std::string, Expr>> out;
    for (const auto& [n, src] : pr.monitors) out.emplace_back(n, expr::bind(P(src), p));
    // T - U along the run
    SystemDefinition def = definition(name, params, pr.name);
    Expr T;
    for (int i = 0, k = 0; i < d.dim; ++i)
        for (int j = i; j < d.dim; ++j, ++k)
            T = T + (i == j ? 0.5 : 1.0) * def.metric_upper[k] * Expr::velocity(i) * Expr::velocity(j);
    if (def.potential) T = T - *def.potential;
    out.emplace_back("energy", expr::bind(T, p));
    return out;
}

// ---------------------------------------------------------------- reference solutions

namespace {

using boost::math::quadrature::gauss_kronrod;

double quad(const std::function<double(double)>& f, double a, double b) {
    if (a == b) return 0.0;
    double err = 0.0;
    double v = gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-14, &err);
    if (!std::isfinite(v)) throw QuadratureError("reference quadrature failed");
    return v;
}

ReferenceState sleigh_inertial(const Params& p, double t) {
    const double m = p.at("m"), Ic = p.at("Ic"), eps = p.at("eps"), C = p.at("C"), C0 = p.at("C0");
    const double J = Ic + eps * eps * m, q = std::sqrt(m / J);
    const double x0 = p.at("x0"), y0 = p.at("y0"), z0 = p.at("z0");
    auto theta_of = [&](double x) { return q * eps * x + C0; };
    const double th0 = theta_of(x0);
    if (std::fabs(std::cos(th0)) < 1e-12) throw CatalogError("sleigh_inertial: cos(theta0) = 0");
    double x;
    if (eps == 0.0) {
        x = x0 + C * q * std::cos(C0) * t;
    } else {
        // θ' = k cos θ: the Gudermannian of θ grows linearly
        const double k = q * q * eps * C;
        const double n = std::round(th0 / kPi);
        const double phi0 = th0 - n * kPi;
        const double sgn = (static_cast<long long>(n) % 2 == 0) ? 1.0 : -1.0;
        const double th = n * kPi + std::atan(std::sinh(std::asinh(std::tan(phi0)) + sgn * k * t));
        x = x0 + (th - th0) / (q * eps);
    }
    const double th = theta_of(x);
    auto tn = [&](double s) { return std::tan(theta_of(s)) / q; };
    double y = y0 + quad([&](double s) { return tn(s) * std::cos(s); }, x0, x) + eps * (std::cos(x) - std::cos(x0));
    double z = z0 + quad([&](double s) { return tn(s) * std::sin(s); }, x0, x) + eps * (std::sin(x) - std::sin(x0));
    ReferenceState st{Vec(3), Vec(3)};
    st.x << x, y, z;
    st.v << C * q * std::cos(th), C * (std::sin(th) * std::cos(x) - q * eps * std::cos(th) * std::sin(x)),
        C * (std::sin(th) * std::sin(x) + q * eps * std::cos(th) * std::cos(x));
    return st;
}

ReferenceState skate_closed(const Params& p, double t) {
    const double g = p.at("g"), C0 = p.at("C0"), C1 = p.at("C1");
    if (C0 == 0.0) throw CatalogError("skate: C0 must be nonzero");
    const double x0 = p.at("x0");
    const double x = x0 + C0 * t;
    auto Y = [&](double s) { return g * std::sin(s) * std::sin(s) / (2 * C0) + C1 * std::sin(s); };
    auto Z = [&](double s) { return (g / C0) * (s / 2 - std::sin(2 * s) / 4) - C1 * std::cos(s); };
    const double sp = g * std::sin(x) / C0 + C1;
    ReferenceState st{Vec(3), Vec(3)};
    st.x << x, p.at("y0") + (Y(x) - Y(x0)) / C0, p.at("z0") + (Z(x) - Z(x0)) / C0;
    st.v << C0, sp * std::cos(x), sp * std::sin(x);
    return st;
}

double gantmacher_h(const Params& p) {
    const double g = p.at("g"), w = p.at("w"), r = p.at("r"), K = p.at("K");
    return g * p.at("u30") + g * g / (4 * w * w) + 0.5 * K * K + 0.5 * r * r * w * w;
}

void gantmacher_check(const Params& p) {
    if (!(p.at("r") > 0)) throw CatalogError("gantmacher: r must be positive");
    if (p.at("w") == 0.0) throw CatalogError("gantmacher: w must be nonzero");
    if (!(p.at("K") > std::fabs(p.at("g") / p.at("w"))))
        throw CatalogError("gantmacher: need K > |g/w| so that nu4 keeps its sign");
}

ReferenceState gantmacher_closed(const Params& p, double t) {
    gantmacher_check(p);
    const double g = p.at("g"), w = p.at("w"), r = p.at("r"), K = p.at("K");
    const double a = p.at("alpha0") + w * t;
    const double s = (g / w) * std::cos(a) + K;  // r ν4
    ReferenceState st{Vec(4), Vec(4)};
    st.x << r * std::cos(a), r * std::sin(a),
        p.at("u30") - g / (4 * w * w) * std::cos(2 * a) - (K / w) * std::cos(a),
        p.at("u40") + g / (2 * w) * t + g / (4 * w * w) * std::sin(2 * a) + (K / w) * std::sin(a);
    st.v << -w * r * std::sin(a), w * r * std::cos(a), s * std::sin(a), s * std::cos(a);
    return st;
}

ReferenceState gantmacher_printed(const Params& p, double t) {
    gantmacher_check(p);
    const double g = p.at("g"), w = p.at("w"), r = p.at("r"), C = p.at("K"), h = gantmacher_h(p);
    const double a = p.at("alpha0") + w * t;
    const double A = std::sqrt(g) / (std::sqrt(2.0) * w);
    ReferenceState st{Vec(4), Vec(4)};
    st.x << r * std::cos(a), r * std::sin(a),
        p.at("u30") + g / (2 * w) * t - g / (4 * w * w) * std::sin(2 * a) - std::sqrt(2 * g) * C / w * std::cos(a),
        -h + r * r * w * w / (2 * g) + std::pow(A * std::sin(a) + C, 2);
    st.v << -w * r * std::sin(a), w * r * std::cos(a),
        g / (2 * w) - g / (2 * w) * std::cos(2 * a) + std::sqrt(2 * g) * C * std::sin(a),
        2 * (A * std::sin(a) + C) * A * w * std::cos(a);
    return st;
}

ReferenceState axis_constant(const Params& p, double t) {
    const double C1 = p.at("C1"), C2 = p.at("C2"), x0 = p.at("x0");
    if (C1 == 0.0) throw CatalogError("axis_constant: C1 must be nonzero");
    const double x = x0 + C1 * t;
    ReferenceState st{Vec(3), Vec(3)};
    st.x << x, p.at("y0") + C2 / C1 * (std::sin(x) - std::sin(x0)), p.at("z0") - C2 / C1 * (std::cos(x) - std::cos(x0));
    st.v << C1, C2 * std::cos(x), C2 * std::sin(x);
    return st;
}

Params identity_params(const Params& p) { return p; }

Params gantmacher_params(const Params& p) {
    return {{"g", p.at("g")}, {"w", p.at("w")}, {"h", gantmacher_h(p)}};
}

std::vector<ReferenceSolution> make_references() {
    std::vector<ParamSpec> xyz0 = {{"x0", 0.3, -1e300, 1e300, ""}, {"y0", 0.0, -1e300, 1e300, ""},
                                   {"z0", 0.0, -1e300, 1e300, ""}};
    std::vector<ReferenceSolution> r;
    r.push_back({"sleigh_inertial", "chaplygin_sleigh", "inertial", xyz0,
                 "x(t) in closed form through the Gudermannian of theta; y(x), z(x) by quadrature. "
                 "The uncorrected z quadrature has the signs of both terms flipped; the form used is the one that "
                 "satisfies zd = lambda2 sin x + eps lambda3 cos x.",
                 false, true, identity_params, sleigh_inertial});
    r.push_back({"skate", "skate", "classical-field", xyz0,
                 "xd = C0, yd = (g sin x/C0 + C1) cos x, zd = (g sin x/C0 + C1) sin x integrated in closed form", true,
                 true, identity_params, skate_closed});
    std::vector<ParamSpec> gc = {{"r", 1.0, 1e-12, 1e300, ""}, {"alpha0", 0.0, -1e300, 1e300, ""},
                                 {"u30", 0.0, -1e300, 1e300, ""}, {"u40", 0.0, -1e300, 1e300, ""},
                                 {"K", 5.0, -1e300, 1e300, "r nu4 = (g/w) cos(alpha) + K"}};
    r.push_back({"gantmacher", "gantmacher", "G30", gc,
                 "corrected closed form: u3 = u30 - g/(4w^2) cos 2a - (K/w) cos a, "
                 "u4 = u40 + g t/(2w) + g/(4w^2) sin 2a + (K/w) sin a, h = g u30 + g^2/(4w^2) + K^2/2 + r^2 w^2/2",
                 false, true, gantmacher_params, gantmacher_closed});
    r.push_back({"gantmacher_printed", "gantmacher", "G30", gc,
                 "uncorrected closed form, fails substitution (u3 carries the secular term, u4 is not a solution)",
                 true, false, gantmacher_params, gantmacher_printed});
    r.push_back({"axis_constant", "axis_particle", "constant", xyz0,
                 "xd = C1, yd = C2 cos x, zd = C2 sin x integrated in closed form", true, true, identity_params,
                 axis_constant});
    return r;
}

}  // namespace

const std::vector<ReferenceSolution>& reference_solutions() {
    static const std::vector<ReferenceSolution> r = make_references();
    return r;
}

const ReferenceSolution& reference(const std::string& name) {
    for (const auto& r : reference_solutions())
        if (r.name == name) return r;
    throw CatalogError("unknown reference solution '" + name + "'; nearest: " +
                       nearest(name, reference_solutions(), [](const ReferenceSolution& r) { return r.name; }));
}

namespace {

Params reference_constants(const ReferenceSolution& ref, const Params& constants) {
    const auto& d = descriptor(ref.system);
    Params p = d.defaults();
    for (const auto& [k, v] : d.preset(ref.preset).overrides) p[k] = v;
    for (const auto& c : ref.constants) p[c.name] = c.value;
    for (const auto& [k, v] : constants) {
        if (!p.count(k)) throw CatalogError(ref.name + " has no constant '" + k + "'");
        p[k] = v;
    }
    return p;
}

}  // namespace

ReferenceState reference_solution(const std::string& name, const Params& constants, double t) {
    const auto& ref = reference(name);
    return ref.state(reference_constants(ref, constants), t);
}

GateResult substitution_gate(const std::string& name, const Params& constants, double horizon, std::size_t samples,
                             double tol) {
    const auto& ref = reference(name);
    Params all = reference_constants(ref, constants);
    const auto& d = descriptor(ref.system);
    Params sp;
    for (const auto& [k, v] : ref.system_params(all))
        if (std::any_of(d.params.begin(), d.params.end(), [&](const ParamSpec& s) { return s.name == k; })) sp[k] = v;
    ConstraintSystem sys = build_system(ref.system, sp, ref.preset);
    MechanicalSystem mech = MechanicalSystem::from(sys);
    const double h = 1e-3;
    auto X = [&](double t) { return ref.state(all, t).x; };
    GateResult g;
    for (std::size_t i = 0; i < samples; ++i) {
        double t = samples > 1 ? horizon * static_cast<double>(i) / static_cast<double>(samples - 1) : 0.0;
        ReferenceState st;
        Vec xm2, xm1, xp1, xp2, field, acc;
        try {
            st = ref.state(all, t);
            xm2 = X(t - 2 * h), xm1 = X(t - h), xp1 = X(t + h), xp2 = X(t + 2 * h);
            field = cartesian_velocity(sys, st.x);
            acc = mech.acceleration(st.x, st.v).a;
        } catch (const Error&) {
            // the closed form left the domain of the system
            g.pass = false;
            g.max_residual = std::numeric_limits<double>::infinity();
            g.samples = i + 1;
            return g;
        }
        Vec d1 = (xm2 - 8 * xm1 + 8 * xp1 - xp2) / (12 * h);
        Vec d2 = (-xm2 + 16 * xm1 - 30 * st.x + 16 * xp1 - xp2) / (12 * h * h);
        g.velocity = std::max(g.velocity, (d1 - st.v).norm() / std::max(1.0, st.v.norm()));
        g.field = std::max(g.field, (st.v - field).norm() / std::max(1.0, st.v.norm()));
        g.acceleration = std::max(g.acceleration, (d2 - acc).norm() / std::max(1.0, acc.norm()));
        ++g.samples;
    }
    g.max_residual = std::max({g.velocity, g.field, g.acceleration});
    g.pass = g.max_residual < tol;
    return g;
}

}  // namespace descartes::catalog
