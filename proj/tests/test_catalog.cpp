#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "descartes/catalog.hpp"
#include "descartes/dynamics.hpp"
#include "descartes/errors.hpp"
#include "oracles.hpp"

using namespace descartes;
namespace cat = descartes::catalog;

namespace {

constexpr double kPi = std::numbers::pi;

Expr P(const std::string& s) { return expr::parse(s); }

Vec point(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    int i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

IntegratorConfig rk45(double t1) {
    IntegratorConfig c;
    c.method = Method::RK45;
    c.t1 = t1;
    c.step = 1e-2;
    c.rtol = 1e-10;
    c.atol = 1e-12;
    return c;
}

double max_gap(const Trajectory& a, const Trajectory& b) {
    double g = 0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) g = std::max(g, (a.x[i] - b.x[i]).cwiseAbs().maxCoeff());
    return g;
}

}  // namespace

TEST(Catalog, ListsEverySystemInFixedOrder) {
    std::vector<std::string> names;
    for (const auto& d : cat::list_systems()) names.push_back(d.name);
    std::vector<std::string> expect = {"chaplygin_sleigh", "skate", "suslov", "gantmacher",
                                       "kepler_kummer", "axis_particle", "geodesic_homogeneous"};
    EXPECT_EQ(names, expect);
    std::vector<std::string> again;
    for (const auto& d : cat::list_systems()) again.push_back(d.name);
    EXPECT_EQ(names, again);
}

TEST(Catalog, EveryPresetBuildsANonsingularFrameAtItsProbe) {
    for (const auto& d : cat::list_systems()) {
        ASSERT_FALSE(d.letters.empty()) << d.name;
        ASSERT_EQ(static_cast<int>(d.letters.size()), d.dim) << d.name;
        for (const auto& p : d.presets) {
            ConstraintSystem sys = cat::build_system(d.name, {}, p.name);
            EXPECT_EQ(sys.dim(), d.dim);
            EXPECT_EQ(sys.constraints(), d.constraints);
            Vec x0 = d.probe(sys.definition().params);
            EXPECT_NO_THROW(frame_matrix(sys, x0)) << d.name << "/" << p.name;
            EXPECT_TRUE(cartesian_velocity(sys, x0).allFinite()) << d.name << "/" << p.name;
        }
    }
}

TEST(Catalog, SleighExample) {
    auto sys = cat::build_system("chaplygin_sleigh", {{"m", 2}, {"Ic", 3}, {"eps", 0.5}});
    EXPECT_EQ(sys.dim(), 3);
    EXPECT_EQ(sys.constraints(), 1);
    EXPECT_NEAR(frame_matrix(sys, point({0.3, 0, 0})).upsilon, 1.0, 1e-14);
}

TEST(Catalog, GantmacherExample) {
    auto sys = cat::build_system("gantmacher", {{"g", 9.81}});
    EXPECT_EQ(sys.dim(), 4);
    EXPECT_EQ(sys.constraints(), 2);
    // Υ = -(u1² + u2²)² for this ordering of the four forms
    Vec x = point({0.7, -0.4, 0.2, 0.1});
    EXPECT_NEAR(frame_matrix(sys, x).upsilon, -std::pow(0.49 + 0.16, 2), 1e-12);
}

TEST(Catalog, SuslovMetricDeterminant) {
    auto sys = cat::build_system("suslov", {{"I1", 2}, {"I2", 3}, {"I3", 4}});
    for (double x : {0.0, 0.4, 2.0})
        for (double y : {0.0, 1.1}) {
            Vec q = point({x, y, kPi / 3});
            EXPECT_NEAR(sys.metric().at(q).determinant(), 24 * std::pow(std::sin(kPi / 3), 2), 1e-10);
        }
}

TEST(Catalog, Errors) {
    try {
        cat::build_system("chaplygin_sleih");
        FAIL();
    } catch (const CatalogError& e) {
        EXPECT_NE(std::string(e.what()).find("chaplygin_sleigh"), std::string::npos);
    }
    EXPECT_THROW(cat::build_system("chaplygin_sleigh", {{"m", -1}}), CatalogError);
    EXPECT_THROW(cat::build_system("chaplygin_sleigh", {{"mass", 1}}), CatalogError);
    EXPECT_THROW(cat::build_system("chaplygin_sleigh", {}, "inertal"), CatalogError);
    EXPECT_THROW(cat::build_system("geodesic_homogeneous", {{"b1", 0}, {"b2", 0}, {"b3", 0}}), CatalogError);
    EXPECT_THROW(cat::paper_pde_residual("kepler_kummer", {}, std::vector<Expr>{}, point({1, 0, 0})), CatalogError);
    EXPECT_THROW(cat::reference_solution("skate", {{"C0", 0.0}}, 1.0), CatalogError);
    EXPECT_THROW(cat::reference_solution("gantmacher", {{"r", -1.0}}, 1.0), CatalogError);
}

TEST(Catalog, PresetOverridesAndDefinitionEquality) {
    auto bad = cat::definition("chaplygin_sleigh", {}, "bad");
    EXPECT_DOUBLE_EQ(bad.params.at("eps"), 1.0);
    auto a = cat::definition("gantmacher", {{"g", 9.81}});
    auto b = cat::definition("gantmacher", {{"g", 9.81}}, "G30");
    EXPECT_TRUE(structurally_equal(a, b));
    auto c = cat::definition("gantmacher", {{"g", 9.0}});
    EXPECT_FALSE(structurally_equal(a, c));
}

TEST(Catalog, DomainGridIsDeterministic) {
    const auto& d = cat::descriptor("gantmacher");
    auto g1 = cat::domain_grid(d, {}, 1000);
    auto g2 = cat::domain_grid(d, {}, 1000);
    ASSERT_EQ(g1.size(), 1296u);
    for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g1[i], g2[i]);
    EXPECT_EQ(cat::domain_grid(cat::descriptor("skate"), {}, 1000).size(), 1000u);
}

// generic Cartesian condition and the literal PDE of every system vanish together
TEST(LiteralPde, PresetsVanishWithTheGenericResidual) {
    for (const auto& d : cat::list_systems()) {
        for (const auto& p : d.presets) {
            if (!p.paper) continue;
            ConstraintSystem sys = cat::build_system(d.name, {}, p.name);
            double generic = 0, literal = 0;
            for (const Vec& x : cat::domain_grid(d, sys.definition().params, 1000)) {
                generic = std::max(generic, consistency_residual(sys, x).cwiseAbs().maxCoeff());
                if (d.has_paper_pde) literal = std::max(literal, std::fabs(cat::paper_pde_residual(d.name, {}, p.name, x)));
            }
            EXPECT_LT(generic, 1e-8) << d.name << "/" << p.name;
            EXPECT_LT(literal, 1e-8) << d.name << "/" << p.name;
        }
    }
}

TEST(LiteralPde, BadPresetsFailBoth) {
    for (const auto& [sysname, preset] : std::vector<std::pair<std::string, std::string>>{
             {"chaplygin_sleigh", "bad"}, {"suslov", "bad"}, {"skate", "classical-field"}}) {
        const auto& d = cat::descriptor(sysname);
        ConstraintSystem sys = cat::build_system(sysname, {}, preset);
        double generic = 0, literal = 0;
        for (const Vec& x : cat::domain_grid(d, sys.definition().params, 1000)) {
            generic = std::max(generic, consistency_residual(sys, x).cwiseAbs().maxCoeff());
            literal = std::max(literal, std::fabs(cat::paper_pde_residual(sysname, {}, preset, x)));
        }
        EXPECT_GT(generic, 1e-3) << sysname;
        EXPECT_GT(literal, 1e-3) << sysname;
    }
}

// pointwise: the literal PDE is a fixed nonzero multiple of the generic residual
TEST(LiteralPde, ProportionalToGenericResidualForArbitraryLambda) {
    struct Case {
        std::string name;
        std::vector<std::string> lambdas;  // auxiliary λ
        std::vector<std::string> inputs;   // PDE functions
    };
    std::vector<Case> cases = {
        {"chaplygin_sleigh", {"sin(x2) + x1*x3", "1 + 0.3*cos(x3)*x1"}, {"sin(x2) + x1*x3", "1 + 0.3*cos(x3)*x1"}},
        {"skate", {"x2 + sin(x1)", "2 + 0.5*x3*x2"}, {"x2 + sin(x1)", "2 + 0.5*x3*x2"}},
        {"axis_particle", {"1 + x2*x3", "x1 + 0.2*x2^2"}, {"1 + x2*x3", "x1 + 0.2*x2^2"}},
        {"gantmacher", {"(1 + x3*x1)*(x1^2+x2^2)", "(2 + x4*x2)*(x1^2+x2^2)"}, {"1 + x3*x1", "2 + x4*x2"}},
    };
    std::mt19937_64 rng(101);
    for (const auto& c : cases) {
        std::vector<Expr> ls, in;
        for (const auto& s : c.lambdas) ls.push_back(P(s));
        for (const auto& s : c.inputs) in.push_back(P(s));
        ConstraintSystem sys = cat::build_system(c.name, {}, ls);
        const auto& d = cat::descriptor(c.name);
        for (const Vec& x : cat::domain_random(d, sys.definition().params, 30, rng)) {
            double lit = cat::paper_pde_residual(c.name, {}, in, x);
            Vec gen = consistency_residual(sys, x);
            // the generic residual is nonzero exactly where the literal one is
            if (std::fabs(lit) > 1e-6) EXPECT_GT(gen.norm(), 1e-10) << c.name;
            else EXPECT_LT(gen.norm(), 1e-6) << c.name;
        }
    }
}

TEST(LiteralPde, SleighReducesToTheXOnlyEquation) {
    // λ = λ(x): cch2 becomes -m(∂xλ2 - ελ3)
    auto p = cat::descriptor("chaplygin_sleigh").defaults();
    std::vector<Expr> in = {P("sin(x1)"), P("x1^2")};
    Vec x = point({0.7, 1.0, -0.5});
    double expect = -p.at("m") * (std::cos(0.7) - p.at("eps") * 0.49);
    EXPECT_NEAR(cat::paper_pde_residual("chaplygin_sleigh", {}, in, x), expect, 1e-12);
}

TEST(LiteralPde, SuslovHandSubstitution) {
    // μ1 = γ2, μ2 = -γ1: γ3(1 - (-1)) = 2γ3
    cat::SuslovPair mu{P("x2"), P("-x1")};
    Vec g = point({0.3, -0.5, 0.8});
    EXPECT_NEAR(cat::suslov_eq4(mu, g), 1.6, 1e-12);
    Vec e = point({0.4, 0.0, 1.1});
    EXPECT_NEAR(cat::paper_pde_residual("suslov", {}, {P("x2"), P("-x1")}, e), 2 * std::cos(1.1), 1e-12);
}

// ---------------------------------------------------------------- reference solutions

TEST(Reference, AdmittedEntriesPassTheSubstitutionGate) {
    for (const auto& r : cat::reference_solutions()) {
        auto g = cat::substitution_gate(r.name);
        if (r.admitted) {
            EXPECT_TRUE(g.pass) << r.name << " residual " << g.max_residual;
            EXPECT_LT(g.max_residual, 1e-8) << r.name;
        } else {
            EXPECT_FALSE(g.pass) << r.name;
            EXPECT_GT(g.max_residual, 1e-3) << r.name;
        }
    }
}

TEST(Reference, SkateExample) {
    for (double t : {0.0, 0.7, 2.5}) {
        auto s = cat::reference_solution("skate", {{"C0", 1}, {"C1", 1}, {"g", 0}, {"x0", 0}}, t);
        EXPECT_NEAR(s.x(0), t, 1e-14);
        EXPECT_NEAR(s.v(0), 1.0, 1e-14);
        EXPECT_NEAR(s.v(1), std::cos(t), 1e-14);
        EXPECT_NEAR(s.v(2), std::sin(t), 1e-14);
    }
}

TEST(Reference, SleighWithoutOffsetKeepsTheta) {
    // ε = 0: λ2, λ3 stay constant and the closed form degenerates to uniform x
    ConstraintSystem sys = cat::build_system("chaplygin_sleigh", {{"eps", 0.0}});
    auto p = sys.definition().params;
    auto tr = integrate_first_order(sys, point({0.3, 0, 0}), rk45(3.0));
    const double th = p.at("C0"), q = std::sqrt(p.at("m") / p.at("Ic"));
    for (std::size_t i = 0; i < tr.size(); i += 50) {
        Vec l = sys.frame_at(tr.x[i]) * tr.v[i];
        EXPECT_NEAR(l(1), p.at("C") * std::sin(th), 1e-12);
        EXPECT_NEAR(l(2), p.at("C") * q * std::cos(th), 1e-12);
        auto s = cat::reference_solution("sleigh_inertial", {{"eps", 0.0}}, tr.t[i]);
        EXPECT_LE((s.x - tr.x[i]).norm(), 1e-8);
    }
}

TEST(Reference, SleighClosedFormMatchesIntegration) {
    ConstraintSystem sys = cat::build_system("chaplygin_sleigh");
    auto tr = integrate_first_order(sys, point({0.3, 0, 0}), rk45(5.0));
    for (std::size_t i = 0; i < tr.size(); i += 100) {
        auto s = cat::reference_solution("sleigh_inertial", {}, tr.t[i]);
        EXPECT_LE((s.x - tr.x[i]).norm(), 1e-8);
    }
}

TEST(Reference, GantmacherCircleAndEnergy) {
    auto p = cat::reference("gantmacher").system_params(
        {{"g", 9.81}, {"w", 3.0}, {"r", 1.0}, {"alpha0", 0.0}, {"u30", 0.0}, {"u40", 0.0}, {"K", 5.0}});
    for (double t : {0.0, 1.3, 4.9}) {
        auto s = cat::reference_solution("gantmacher", {}, t);
        EXPECT_NEAR(s.x(0) * s.x(0) + s.x(1) * s.x(1), 1.0, 1e-12);
        EXPECT_NEAR(0.5 * s.v.squaredNorm() + 9.81 * s.x(2), p.at("h"), 1e-10);
    }
}

TEST(Reference, AxisConstantMatchesIntegration) {
    ConstraintSystem sys = cat::build_system("axis_particle", {}, "constant");
    Vec x0 = point({0.3, 0, 0});
    auto tr = integrate_first_order(sys, x0, rk45(5.0));
    auto s = cat::reference_solution("axis_constant", {}, 5.0);
    EXPECT_LE((s.x - tr.x.back()).norm(), 1e-8);
}

// ---------------------------------------------------------------- sleigh and skate

TEST(Sleigh, InertialHalfNormIsConstant) {
    auto p = cat::descriptor("chaplygin_sleigh").defaults();
    ConstraintSystem sys = cat::build_system("chaplygin_sleigh");
    auto tr = integrate_first_order(sys, point({0.3, 0, 0}), rk45(5.0));
    auto stats = monitor(tr, cat::monitors("chaplygin_sleigh", {}, "inertial"));
    ASSERT_EQ(stats[0].name, "half_norm");
    for (double v : stats[0].values) EXPECT_NEAR(v, 0.5 * p.at("m") * p.at("C") * p.at("C"), 1e-12);
}

TEST(Skate, RescaledClassicalFieldIsCartesian) {
    // b = (C0, s cos x, s sin x), s = g sin x/C0 + C1; κ = C0/(g sin x + C1 C0)
    const double g = 0.5, C0 = 1.3, C1 = 0.9;
    VectorFieldDef b{{Expr::constant(C0), P("(0.5*sin(x1)/1.3 + 0.9)*cos(x1)"), P("(0.5*sin(x1)/1.3 + 0.9)*sin(x1)")}};
    Expr kappa = P("1.3/(0.5*sin(x1) + 0.9*1.3)");
    VectorFieldDef kb;
    for (const auto& c : b.comps) kb.comps.push_back(kappa * c);
    auto G = MetricField::identity(3);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 100; ++i) {
        Vec x = point({u(rng), u(rng), u(rng)});
        Vec a = point({0, std::sin(x(0)), -std::cos(x(0))});
        EXPECT_NEAR(a.dot(rot3(b, G, x)), g * std::cos(x(0)) / C0, 1e-9);
        EXPECT_LE(std::fabs(a.dot(rot3(kb, G, x))), 1e-8);
    }
}

TEST(Skate, EquivalentPresetTracesTheClassicalOrbit) {
    // the κ-rescaled field follows the same curve as the classical field
    ConstraintSystem eq = cat::build_system("skate", {}, "paper-equivalent");
    ConstraintSystem cl = cat::build_system("skate", {}, "classical-field");
    Vec x = point({0.2, 0.1, -0.3});
    for (int i = 0; i < 20; ++i, x(0) += 0.3) {
        Vec ve = cartesian_velocity(eq, x), vc = cartesian_velocity(cl, x);
        EXPECT_NEAR(ve(0) * vc(1) - ve(1) * vc(0), 0.0, 1e-12);
        EXPECT_NEAR(ve(0) * vc(2) - ve(2) * vc(0), 0.0, 1e-12);
    }
}

TEST(Skate, ClassicalFieldIsTheClassicalMotion) {
    ConstraintSystem cl = cat::build_system("skate", {}, "classical-field");
    Vec x0 = point({0.3, 0, 0});
    auto a = integrate_first_order(cl, x0, rk45(5.0));
    auto b = integrate_classical(cl, x0, cartesian_velocity(cl, x0), rk45(5.0));
    EXPECT_LE(max_gap(a, b), 1e-6);
}

// ---------------------------------------------------------------- Theorem 1 equivalence

TEST(Equivalence, CartesianAndClassicalAgree) {
    for (const auto& name : {"chaplygin_sleigh", "skate", "gantmacher", "suslov", "axis_particle", "kepler_kummer",
                             "geodesic_homogeneous"}) {
        const auto& d = cat::descriptor(name);
        ConstraintSystem sys = cat::build_system(name);
        Vec x0 = d.probe(sys.definition().params);
        // the geodesic field reaches the axis of revolution near t = 4.3
        auto cfg = rk45(std::string(name) == "geodesic_homogeneous" ? 4.0 : 5.0);
        auto a = integrate_first_order(sys, x0, cfg);
        auto b = integrate_classical(sys, x0, cartesian_velocity(sys, x0), cfg);
        ASSERT_FALSE(a.truncated()) << name << ": " << a.error.value_or("");
        ASSERT_FALSE(b.truncated()) << name << ": " << b.error.value_or("");
        EXPECT_LE(max_gap(a, b), 1e-6) << name;
    }
}

// ---------------------------------------------------------------- gantmacher

TEST(Gantmacher, EnergyAlongTheCartesianRun) {
    ConstraintSystem sys = cat::build_system("gantmacher");
    auto tr = integrate_first_order(sys, point({1, 0, 0, 0}), rk45(5.0));
    auto stats = monitor(tr, cat::monitors("gantmacher", {}, "G30"));
    for (const auto& s : stats) {
        if (s.name == "half_norm+g*u3") EXPECT_LE(s.max_deviation, 1e-8);
        if (s.name == "rho") EXPECT_LE(s.max_deviation, 1e-8);
    }
}

TEST(Gantmacher, ClosedFormMatchesIntegration) {
    cat::Params c = {{"r", 1.0}, {"alpha0", 0.3}, {"u30", 0.1}, {"u40", -0.2}, {"K", 5.0}};
    auto sp = cat::reference("gantmacher").system_params({{"g", 9.81}, {"w", 3.0}, {"r", 1.0}, {"alpha0", 0.3},
                                                          {"u30", 0.1}, {"u40", -0.2}, {"K", 5.0}});
    ConstraintSystem sys = cat::build_system("gantmacher", sp);
    auto s0 = cat::reference_solution("gantmacher", c, 0.0);
    EXPECT_LE((cartesian_velocity(sys, s0.x) - s0.v).norm(), 1e-12);
    auto tr = integrate_first_order(sys, s0.x, rk45(5.0));
    EXPECT_LE((cat::reference_solution("gantmacher", c, 5.0).x - tr.x.back()).norm(), 1e-7);
}

// ---------------------------------------------------------------- suslov

TEST(Suslov, GammaMapRoundTrip) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ux(-3.1, 3.1), uz(0.05, kPi - 0.05);
    for (int i = 0; i < 50; ++i) {
        Vec e = point({ux(rng), ux(rng), uz(rng)});
        Vec g = cat::suslov_gamma(e);
        EXPECT_NEAR(g.norm(), 1.0, 1e-15);
        Vec back = cat::suslov_euler(g, e(1));
        EXPECT_LE((back - e).norm(), 1e-12);
        EXPECT_LE((cat::suslov_gamma(back) - g).norm(), 1e-14);
    }
}

TEST(Suslov, ReducedPoissonFlowKeepsTheSphere) {
    for (const auto& preset : {"uniform", "kharlamova", "clebsch-tisseran"}) {
        auto mu = cat::suslov_mu({}, preset);
        auto f = cat::suslov_reduced_field({}, mu);
        expr::Program prog(f);
        auto v = [&](const Vec& g) {
            Vec out(3);
            prog.run(g.data(), nullptr, out.data());
            return out;
        };
        auto tr = integrate_field(v, cat::suslov_gamma(point({0.4, 0.2, kPi / 3})), rk45(5.0));
        double dev = 0;
        for (const auto& g : tr.x) dev = std::max(dev, std::fabs(g.squaredNorm() - 1.0));
        EXPECT_LE(dev, 1e-9) << preset;
    }
}

TEST(Suslov, ReducedFieldMatchesTheEulerChart) {
    // γ̇ = γ × ω along the chart field equals the reduced Poisson field
    for (const auto& preset : {"uniform", "kharlamova", "clebsch-tisseran"}) {
        ConstraintSystem sys = cat::build_system("suslov", {}, preset);
        auto mu = cat::suslov_mu({}, preset);
        expr::Program prog(cat::suslov_reduced_field({}, mu));
        auto p = sys.definition().params;
        for (const Vec& x : cat::domain_grid(cat::descriptor("suslov"), p, 27)) {
            Vec xd = cartesian_velocity(sys, x);
            Vec w = cat::suslov_omega(p, x, xd), g = cat::suslov_gamma(x);
            Vec gd = Eigen::Vector3d(g).cross(Eigen::Vector3d(w));
            Vec red(3);
            prog.run(g.data(), nullptr, red.data());
            EXPECT_LE((gd - red).norm(), 1e-12) << preset;
            EXPECT_NEAR(w(2), 0.0, 1e-12);
        }
    }
}

TEST(Suslov, FirstIntegralsAlongCartesianRuns) {
    for (const auto& preset : {"uniform", "kharlamova", "clebsch-tisseran"}) {
        ConstraintSystem sys = cat::build_system("suslov", {}, preset);
        auto tr = integrate_first_order(sys, point({0.4, 0.2, kPi / 3}), rk45(5.0));
        ASSERT_FALSE(tr.truncated()) << preset;
        for (const auto& s : monitor(tr, cat::monitors("suslov", {}, preset))) {
            if (s.name == "I1w1-mu2" || s.name == "I2w2+mu1" || s.name == "omega3")
                EXPECT_LE(std::fabs(s.initial) + s.max_deviation, 1e-7) << preset << " " << s.name;
            else
                EXPECT_LE(s.max_deviation, 1e-7) << preset << " " << s.name;
        }
    }
}

TEST(Suslov, K4ConservedAlongClassicalRuns) {
    // K4 holds for every motion of the potential, not only the Cartesian family
    for (const auto& preset : {"kharlamova", "clebsch-tisseran"}) {
        ConstraintSystem sys = cat::build_system("suslov", {}, preset);
        Vec x0 = point({0.4, 0.2, kPi / 3}), v0 = point({-0.5 * std::cos(kPi / 3), 0.5, -0.3});
        auto tr = integrate_classical(sys, x0, v0, rk45(5.0));
        ASSERT_FALSE(tr.truncated());
        auto k4 = cat::suslov_k4({}, preset);
        ASSERT_TRUE(k4.has_value());
        auto st = monitor(tr, {{"K4", *k4}});
        EXPECT_LE(st[0].max_deviation, 1e-8) << preset;
    }
}

TEST(Suslov, UncorrectedClebschTisserandPairingDrifts) {
    // U = eps det I (I^-1 γ, γ) with K4 = (Iω, Iω)/2 - eps/2 det I (I^-1 γ, γ)
    const double I1 = 2, I2 = 3, I3 = 4, eps = 0.5;
    cat::SuslovPair mu{P("sqrt(2*0.5*9*(4 - 2))*x1"), P("sqrt(2*0.5*4*(4 - 3))*x2")};
    ConstraintSystem sys(cat::suslov_definition({}, mu));
    auto tr = integrate_first_order(sys, point({0.4, 0.2, kPi / 3}), rk45(5.0));
    const double D = I1 * I2 * I3;
    Expr k4 = expr::bind(P("0.5*(I1^2*(v2*sin(x3)*sin(x1) + v3*cos(x1))^2 + I2^2*(v2*sin(x3)*cos(x1) - v3*sin(x1))^2)"
                           " - 0.5*eps*D*((sin(x3)*sin(x1))^2/I1 + (sin(x3)*cos(x1))^2/I2 + cos(x3)^2/I3)"),
                         {{"I1", I1}, {"I2", I2}, {"I3", I3}, {"eps", eps}, {"D", D}});
    auto st = monitor(tr, {{"K4", k4}});
    EXPECT_GT(st[0].max_deviation, 1e-2);
}

TEST(Suslov, MultiplierMatchesClosedForm) {
    for (const auto& preset : {"uniform", "kharlamova", "clebsch-tisseran"}) {
        ConstraintSystem sys = cat::build_system("suslov", {}, preset);
        Vec x0 = point({0.4, 0.2, kPi / 3});
        auto tr = integrate_classical(sys, x0, cartesian_velocity(sys, x0), rk45(5.0));
        auto mu = cat::suslov_mu({}, preset);
        double err = 0;
        for (std::size_t i = 0; i < tr.size(); ++i)
            err = std::max(err, std::fabs(tr.mu[i](0) - cat::suslov_mu_closed_form({}, mu, tr.x[i], tr.v[i])));
        EXPECT_LE(err, 1e-8) << preset;
    }
}

TEST(Suslov, QuadratureFamilySatisfiesThePde) {
    Expr S = P("x1^2*x2 + sin(x2)*x3");
    Expr psi1 = P("x1*x3 + x2^2");
    Expr psi2 = P("cos(x1) + x3*x2");
    Expr om = P("x1 + x2*x3^2");
    auto good = cat::suslov_family(S, psi1, psi2, om);
    auto printed = cat::suslov_family(S, psi1, psi2, om, true);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1, 1);
    double bad = 0;
    for (int i = 0; i < 50; ++i) {
        Vec g = point({u(rng), u(rng), u(rng)});
        EXPECT_LE(std::fabs(cat::suslov_eq4(good, g)), 1e-12);
        bad = std::max(bad, std::fabs(cat::suslov_eq4(printed, g)));
    }
    EXPECT_GT(bad, 1e-2);
}

TEST(Suslov, FamilyBuildsACartesianSystem) {
    auto mu = cat::suslov_family(P("0.3*x1*x2"), P("0.2*x1"), P("0"), P("0.1"));
    ConstraintSystem sys(cat::suslov_definition({}, mu));
    for (const Vec& x : cat::domain_grid(cat::descriptor("suslov"), sys.definition().params, 64))
        EXPECT_LE(consistency_residual(sys, x).norm(), 1e-9);
}

// ---------------------------------------------------------------- kepler / kummer

TEST(Kepler, RotOfTheCrossField) {
    // on the orbit plane (x, c) = 0: rot[f_x × c] = c/r, hence rot v = c/(c² r) for v = [f_x × c]/c²
    const double c = 1.5;
    std::vector<Expr> fx = {P("x1/sqrt(x1^2+x2^2+x3^2) + 0.3"), P("x2/sqrt(x1^2+x2^2+x3^2) - 0.2"),
                            P("x3/sqrt(x1^2+x2^2+x3^2)")};
    VectorFieldDef w, v;
    for (const auto& e : cross_expr(fx, {Expr::constant(0), Expr::constant(0), Expr::constant(c)})) {
        w.comps.push_back(e);
        v.comps.push_back(e / (c * c));
    }
    auto G = MetricField::identity(3);
    std::mt19937_64 rng(9);
    auto pts = cat::domain_random(cat::descriptor("kepler_kummer"), {}, 100, rng);
    ASSERT_EQ(pts.size(), 100u);
    for (const Vec& x : pts) {
        ASSERT_EQ(x(2), 0.0);
        Vec cr = point({0, 0, c / x.norm()});
        EXPECT_LE((rot3(w, G, x) - cr).norm(), 1e-8);
        EXPECT_LE((rot3(v, G, x) - cr / (c * c)).norm(), 1e-8);
    }
}

TEST(Kepler, OrbitsAreKeplerConics) {
    ConstraintSystem sys = cat::build_system("kepler_kummer");
    const auto& d = cat::descriptor("kepler_kummer");
    auto tr = integrate_first_order(sys, d.probe(sys.definition().params), rk45(10.0));
    ASSERT_FALSE(tr.truncated());
    double err = 0;
    const double h = tr.t[1] - tr.t[0];
    for (std::size_t i = 2; i + 2 < tr.size(); ++i) {
        Vec acc = (-tr.v[i + 2] + 8 * tr.v[i + 1] - 8 * tr.v[i - 1] + tr.v[i - 2]) / (12 * h);
        Vec x = tr.x[i];
        err = std::max(err, (acc + x / std::pow(x.norm(), 3)).norm());
    }
    EXPECT_LE(err, 1e-5);
    for (const auto& s : monitor(tr, cat::monitors("kepler_kummer", {}, "kepler")))
        if (s.name == "zeta" || s.name == "f") EXPECT_LE(s.max_deviation, 1e-7) << s.name;
}

// ---------------------------------------------------------------- axis particle

TEST(Axis, BeltramiPresetIsAnEigenfieldOfRot) {
    ConstraintSystem sys = cat::build_system("axis_particle", {}, "beltrami");
    VectorFieldDef v{sys.velocity_expr()};
    std::mt19937_64 rng(4);
    for (const Vec& x : cat::domain_random(cat::descriptor("axis_particle"), {}, 50, rng))
        EXPECT_LE((rot3(v, sys.metric(), x) - cartesian_velocity(sys, x)).norm(), 1e-10);
    EXPECT_LE(kummer_residual(v, sys.metric(), point({0.2, 0.4, 0.6})), 1e-10);
}

// ---------------------------------------------------------------- geodesic

Vec geodesic_initial_velocity(const ConstraintSystem& sys, const Vec& x0) {
    // mix of the meridian field and the parallel direction x × a, tangent to f = c
    Vec a = sys.forms()[0].at(x0);
    Vec u = Eigen::Vector3d(x0).cross(Eigen::Vector3d(a));
    Vec v = cartesian_velocity(sys, x0) + 0.8 * u.normalized();
    return v.normalized() * std::sqrt(2 * sys.definition().params.at("h0"));
}

TEST(Geodesic, MeridianFieldRunsUntilTheAxis) {
    // the Cartesian field follows meridians, on which [x × xd] is parallel to b and F vanishes
    ConstraintSystem sys = cat::build_system("geodesic_homogeneous");
    auto tr = integrate_first_order(sys, cat::descriptor("geodesic_homogeneous").probe({}), rk45(4.0));
    ASSERT_FALSE(tr.truncated());
    for (const auto& s : monitor(tr, cat::monitors("geodesic_homogeneous", {}, "degree-one")))
        EXPECT_LE(s.max_deviation, 1e-9) << s.name;
}

TEST(Geodesic, DegreeOneIntegralIsConserved) {
    ConstraintSystem sys = cat::build_system("geodesic_homogeneous");
    Vec x0 = cat::descriptor("geodesic_homogeneous").probe({});
    auto tr = integrate_classical(sys, x0, geodesic_initial_velocity(sys, x0), rk45(10.0));
    ASSERT_FALSE(tr.truncated()) << tr.error.value_or("");
    auto fields = cat::monitors("geodesic_homogeneous", {}, "degree-one");
    fields.emplace_back("L", P("(x2*v3 - x3*v2)^2 + (x3*v1 - x1*v3)^2 + (x1*v2 - x2*v1)^2"));
    for (const auto& s : monitor(tr, fields)) {
        if (s.name == "F") EXPECT_LE(s.max_deviation, 1e-6);
        if (s.name == "L") EXPECT_GT(s.max_deviation, 0.1);  // not conserved by itself
        if (s.name == "f") EXPECT_LE(s.max_deviation, 1e-9);
        if (s.name == "speed2") EXPECT_NEAR(s.initial, 1.0, 1e-12);
    }
}
