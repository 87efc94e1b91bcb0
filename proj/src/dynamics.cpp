#include "descartes/dynamics.hpp"

#include <algorithm>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>

#include "descartes/errors.hpp"

namespace descartes {

namespace odeint = boost::numeric::odeint;

void IntegratorConfig::validate() const {
    if (!(t1 > t0)) throw IntegrationError("integrator: t1 must exceed t0");
    if (!(step > 0.0)) throw IntegrationError("integrator: step must be positive");
    if (!(rtol > 0.0) || !(atol > 0.0)) throw IntegrationError("integrator: rtol and atol must be positive");
    if (!(min_step > 0.0) || !(max_step >= min_step)) throw IntegrationError("integrator: need 0 < min_step <= max_step");
    if (stride < 1) throw IntegrationError("integrator: stride must be at least 1");
}

std::size_t IntegratorConfig::sample_count() const {
    return static_cast<std::size_t>(std::llround((t1 - t0) / (step * stride))) + 1;
}

namespace {

bool finite(const State& y) {
    return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

State hermite(double ta, const State& ya, const State& da, double tb, const State& yb, const State& db, double t) {
    const double H = tb - ta, s = (t - ta) / H;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    State y(ya.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = h00 * ya[i] + h10 * H * da[i] + h01 * yb[i] + h11 * H * db[i];
    return y;
}

Vec to_vec(const State& y, int offset, int n) { return Eigen::Map<const Vec>(y.data() + offset, n); }

}  // namespace

OdeSolution solve_ode(const OdeRhs& f, State y0, const IntegratorConfig& cfg, const PostStep& post) {
    cfg.validate();
    OdeSolution out;
    const std::size_t n_out = cfg.sample_count();
    const double dt_out = cfg.step * cfg.stride;
    auto grid = [&](std::size_t i) { return cfg.t0 + static_cast<double>(i) * dt_out; };
    auto sys = [&f](const State& y, State& dy, double t) { f(y, dy, t); };

    State y = std::move(y0);
    out.t.push_back(cfg.t0);
    out.y.push_back(y);
    try {
        if (cfg.method == Method::RK4) {
            odeint::runge_kutta4<State> st;
            for (std::size_t i = 1; i < n_out; ++i) {
                for (int s = 0; s < cfg.stride; ++s) {
                    const double t = cfg.t0 + static_cast<double>((i - 1) * cfg.stride + s) * cfg.step;
                    st.do_step(sys, y, t, cfg.step);
                    if (post) post(y);
                    ++out.steps;
                }
                if (!finite(y)) throw IntegrationError("non-finite state at t = " + std::to_string(grid(i)));
                out.t.push_back(grid(i));
                out.y.push_back(y);
            }
        } else {
            auto ctrl = odeint::make_controlled(cfg.atol, cfg.rtol, cfg.max_step, odeint::runge_kutta_dopri5<State>());
            const double tend = grid(n_out - 1);
            State dy(y.size());
            f(y, dy, cfg.t0);
            double t = cfg.t0;
            double h = std::min({cfg.max_step, dt_out, std::max(10 * cfg.min_step, 1e-4 * (tend - cfg.t0))});
            std::size_t next = 1;
            while (next < n_out) {
                const double taken = std::min(h, tend - t);
                State y_prev = y, dy_prev = dy;
                const double t_prev = t;
                double tt = t, hh = taken;
                if (ctrl.try_step(sys, y, dy, tt, hh) == odeint::fail) {
                    if (hh < cfg.min_step)
                        throw IntegrationError("step-size underflow at t = " + std::to_string(t));
                    h = hh;
                    continue;
                }
                t = (taken == tend - t_prev) ? tend : tt;
                ++out.steps;
                if (post) {
                    post(y);
                    f(y, dy, t);
                }
                if (!finite(y)) throw IntegrationError("non-finite state at t = " + std::to_string(t));
                while (next < n_out && grid(next) <= t + 1e-12 * dt_out) {
                    const double tg = std::min(grid(next), t);
                    out.t.push_back(grid(next));
                    if (tg >= t) {
                        out.y.push_back(y);
                    } else {
                        State yi = hermite(t_prev, y_prev, dy_prev, t, y, dy, tg);
                        if (post) post(yi);
                        out.y.push_back(std::move(yi));
                    }
                    ++next;
                }
                h = hh;
            }
        }
    } catch (const Error& e) {
        out.error = e.what();
    }
    return out;
}

// ---------------------------------------------------------------- first order

namespace {

Trajectory first_order_trajectory(const OdeSolution& sol, int n, const std::function<Vec(const Vec&)>& v) {
    Trajectory tr;
    tr.dim = n;
    tr.error = sol.error;
    tr.steps = sol.steps;
    for (std::size_t i = 0; i < sol.t.size(); ++i) {
        Vec x = to_vec(sol.y[i], 0, n);
        Vec vi;
        try {
            vi = v(x);
        } catch (const Error& e) {
            if (!tr.error) tr.error = e.what();
            break;
        }
        tr.t.push_back(sol.t[i]);
        tr.x.push_back(x);
        tr.v.push_back(vi);
    }
    return tr;
}

}  // namespace

Trajectory integrate_field(const std::function<Vec(const Vec&)>& v, const Vec& x0, const IntegratorConfig& cfg) {
    const int n = static_cast<int>(x0.size());
    auto rhs = [&](const State& y, State& dy, double) {
        Vec d = v(to_vec(y, 0, n));
        if (d.size() != n) throw DimensionError("vector field dimension differs from state dimension");
        std::copy(d.data(), d.data() + n, dy.begin());
    };
    auto sol = solve_ode(rhs, State(x0.data(), x0.data() + n), cfg);
    return first_order_trajectory(sol, n, v);
}

Trajectory integrate_first_order(const ConstraintSystem& sys, const Vec& x0, const IntegratorConfig& cfg) {
    if (x0.size() != sys.dim()) throw DimensionError("initial point dimension differs from system dimension");
    auto field = [&sys](const Vec& x) {
        sys.check_chart(x);
        return cartesian_velocity(sys, x);
    };
    Trajectory tr = integrate_field(field, x0, cfg);
    tr.constraints = sys.constraints();
    for (std::size_t i = 0; i < tr.size(); ++i) {
        Mat M = sys.frame_at(tr.x[i]);
        tr.constraint_values.push_back(M.topRows(sys.constraints()) * tr.v[i]);
    }
    return tr;
}

// ---------------------------------------------------------------- classical

MechanicalSystem::MechanicalSystem(MetricField metric, std::vector<OneFormField> constraints, std::vector<Expr> force,
                                   std::optional<Expr> chart_guard)
    : metric_(std::move(metric)), alpha_(std::move(constraints)), force_(std::move(force)), guard_(std::move(chart_guard)) {
    const int n = metric_.dim();
    if (force_.empty()) force_.assign(n, Expr::constant(0.0));
    if (static_cast<int>(force_.size()) != n) throw DimensionError("force covector needs N components");
    std::vector<Expr> a, da;
    for (const auto& f : alpha_) {
        if (f.dim() != n) throw DimensionError("constraint form dimension differs from metric dimension");
        for (const auto& c : f.coeffs) {
            a.push_back(c);
            for (int m = 0; m < n; ++m) da.push_back(expr::differentiate(c, m));
        }
    }
    alpha_prog_ = expr::Program(a);
    dalpha_prog_ = expr::Program(da);
    force_prog_ = expr::Program(force_);
    if (guard_) guard_prog_ = expr::Program({*guard_});
}

MechanicalSystem MechanicalSystem::from(const ConstraintSystem& sys) {
    std::vector<OneFormField> given(sys.forms().begin(), sys.forms().begin() + sys.constraints());
    std::vector<Expr> force;
    if (sys.potential())
        for (int k = 0; k < sys.dim(); ++k) force.push_back(expr::differentiate(*sys.potential(), k));
    return MechanicalSystem(sys.metric(), given, force, sys.chart_guard());
}

MechanicalSystem MechanicalSystem::with_potential(MetricField metric, const Expr& potential) {
    std::vector<Expr> force;
    for (int k = 0; k < metric.dim(); ++k) force.push_back(expr::differentiate(potential, k));
    return MechanicalSystem(std::move(metric), {}, force);
}

Mat MechanicalSystem::alpha_at(const Vec& x) const {
    const int n = dim(), m = constraints();
    std::vector<double> vals(static_cast<std::size_t>(n * m));
    if (m > 0) alpha_prog_.run(x.data(), nullptr, vals.data());
    Mat A(m, n);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < n; ++k) A(j, k) = vals[j * n + k];
    return A;
}

Vec MechanicalSystem::force_at(const Vec& x) const {
    Vec F(dim());
    force_prog_.run(x.data(), nullptr, F.data());
    return F;
}

void MechanicalSystem::check_chart(const Vec& x) const {
    if (!guard_) return;
    double g = 0.0;
    guard_prog_.run(x.data(), nullptr, &g);
    if (std::fabs(g) < 1e-6) throw ChartSingular("trajectory reached the chart singularity");
}

MechanicalSystem::Accel MechanicalSystem::acceleration(const Vec& x, const Vec& xd) const {
    const int n = dim(), m = constraints();
    Mat G = metric_.at(x);
    std::vector<Mat> dG = metric_.derivatives(x);
    Mat Gdot = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k) Gdot += dG[k] * xd(k);
    Vec rhs = force_at(x) - Gdot * xd;
    for (int k = 0; k < n; ++k) rhs(k) += 0.5 * xd.dot(dG[k] * xd);

    Accel out;
    if (m == 0) {
        Eigen::LLT<Mat> llt(G);
        if (llt.info() != Eigen::Success) throw MetricNotPositive("metric is not positive definite along the trajectory");
        out.a = llt.solve(rhs);
        out.mu = Vec(0);
        return out;
    }
    Mat A = alpha_at(x);
    std::vector<double> da(static_cast<std::size_t>(m * n * n));
    dalpha_prog_.run(x.data(), nullptr, da.data());
    Vec crhs(m);
    for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k)
            for (int q = 0; q < n; ++q) s += da[(j * n + k) * n + q] * xd(q) * xd(k);
        crhs(j) = -s;
    }
    Mat K = Mat::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = G;
    K.topRightCorner(n, m) = -A.transpose();
    K.bottomLeftCorner(m, n) = A;
    Vec b(n + m);
    b << rhs, crhs;
    Eigen::FullPivLU<Mat> lu(K);
    if (lu.rank() < n + m) throw SingularConstraints("augmented system is singular (dependent constraint rows)");
    Vec sol = lu.solve(b);
    out.a = sol.head(n);
    out.mu = sol.tail(m);
    return out;
}

Vec MechanicalSystem::project(const Vec& x, const Vec& xd) const {
    if (constraints() == 0) return xd;
    Mat A = alpha_at(x);
    Eigen::LLT<Mat> llt(metric_.at(x));
    Mat W = llt.solve(A.transpose());
    Mat S = A * W;
    return xd - W * S.ldlt().solve(A * xd);
}

Trajectory integrate_classical(const MechanicalSystem& sys, const Vec& x0, const Vec& v0, const IntegratorConfig& cfg) {
    const int n = sys.dim(), m = sys.constraints();
    if (x0.size() != n || v0.size() != n) throw DimensionError("initial state dimension differs from system dimension");
    Mat A0 = sys.alpha_at(x0);
    for (int j = 0; j < m; ++j) {
        double viol = std::fabs(A0.row(j).dot(v0));
        if (viol > 1e-10 * std::max(1.0, A0.row(j).norm() * v0.norm()))
            throw IntegrationError("initial velocity violates constraint " + std::to_string(j + 1) + " by " +
                                   std::to_string(viol));
    }
    auto rhs = [&](const State& y, State& dy, double) {
        Vec x = to_vec(y, 0, n), xd = to_vec(y, n, n);
        sys.check_chart(x);
        auto acc = sys.acceleration(x, xd);
        std::copy(xd.data(), xd.data() + n, dy.begin());
        std::copy(acc.a.data(), acc.a.data() + n, dy.begin() + n);
    };
    PostStep post;
    if (cfg.project_velocity && m > 0)
        post = [&](State& y) {
            Vec x = to_vec(y, 0, n);
            Vec p = sys.project(x, to_vec(y, n, n));
            std::copy(p.data(), p.data() + n, y.begin() + n);
        };
    State y0(2 * n);
    std::copy(x0.data(), x0.data() + n, y0.begin());
    std::copy(v0.data(), v0.data() + n, y0.begin() + n);
    auto sol = solve_ode(rhs, y0, cfg, post);

    Trajectory tr;
    tr.dim = n;
    tr.constraints = m;
    tr.error = sol.error;
    tr.steps = sol.steps;
    for (std::size_t i = 0; i < sol.t.size(); ++i) {
        Vec x = to_vec(sol.y[i], 0, n), xd = to_vec(sol.y[i], n, n);
        Vec mu;
        try {
            mu = sys.acceleration(x, xd).mu;
        } catch (const Error& e) {
            if (!tr.error) tr.error = e.what();
            break;
        }
        tr.t.push_back(sol.t[i]);
        tr.x.push_back(x);
        tr.v.push_back(xd);
        tr.mu.push_back(mu);
        tr.constraint_values.push_back(sys.alpha_at(x) * xd);
    }
    return tr;
}

Trajectory integrate_classical(const ConstraintSystem& sys, const Vec& x0, const Vec& v0, const IntegratorConfig& cfg) {
    return integrate_classical(MechanicalSystem::from(sys), x0, v0, cfg);
}

// ---------------------------------------------------------------- verifiers

std::vector<double> lagrange_residual(const ConstraintSystem& sys, const Trajectory& traj) {
    if (traj.size() < 3) throw IntegrationError("lagrange_residual needs at least 3 samples");
    const int n = sys.dim();
    std::vector<Vec> p(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) p[i] = sys.metric().at(traj.x[i]) * traj.v[i];
    std::vector<double> out;
    for (std::size_t i = 1; i + 1 < traj.size(); ++i) {
        const Vec& x = traj.x[i];
        const Vec& v = traj.v[i];
        Vec lhs = (p[i + 1] - p[i - 1]) / (traj.t[i + 1] - traj.t[i - 1]);
        auto dG = sys.metric().derivatives(x);
        for (int k = 0; k < n; ++k) lhs(k) -= 0.5 * v.dot(dG[k] * v);
        Vec rhs = sys.grad_half_norm_at(x) + reaction_covector(sys, x);
        out.push_back((lhs - rhs).cwiseAbs().maxCoeff());
    }
    return out;
}

ConstraintDrift constraint_drift(const std::vector<OneFormField>& forms, const Trajectory& traj) {
    const int m = static_cast<int>(forms.size());
    ConstraintDrift d{Vec::Zero(m), Vec::Zero(m)};
    for (std::size_t i = 0; i < traj.size(); ++i)
        for (int j = 0; j < m; ++j) {
            Vec a = forms[j].at(traj.x[i]);
            double val = std::fabs(a.dot(traj.v[i]));
            d.absolute(j) = std::max(d.absolute(j), val);
            d.scaled(j) = std::max(d.scaled(j), val / std::max(1.0, a.norm() * traj.v[i].norm()));
        }
    return d;
}

ConstraintDrift constraint_drift(const ConstraintSystem& sys, const Trajectory& traj) {
    std::vector<OneFormField> given(sys.forms().begin(), sys.forms().begin() + sys.constraints());
    return constraint_drift(given, traj);
}

std::vector<MonitorStats> monitor(const Trajectory& traj, const std::vector<std::pair<std::string, Expr>>& fields) {
    std::vector<MonitorStats> out;
    for (const auto& [name, e] : fields) {
        expr::Program prog({e});
        if (prog.dimension() > traj.dim || prog.velocity_dimension() > traj.dim)
            throw DimensionError("monitor '" + name + "' references variables beyond the trajectory dimension");
        MonitorStats s;
        s.name = name;
        bool have_initial = false;
        for (std::size_t i = 0; i < traj.size(); ++i) {
            double val = std::numeric_limits<double>::quiet_NaN();
            try {
                prog.run(traj.x[i].data(), traj.v[i].data(), &val);
            } catch (const DomainError&) {
                ++s.domain_errors;
                val = std::numeric_limits<double>::quiet_NaN();
            }
            s.values.push_back(val);
            if (!std::isfinite(val)) continue;
            if (!have_initial) {
                s.initial = val;
                have_initial = true;
            }
            s.max_deviation = std::max(s.max_deviation, std::fabs(val - s.initial));
        }
        s.relative_drift = s.max_deviation / std::max(1.0, std::fabs(s.initial));
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<MonitorStats> attach_monitors(Trajectory& traj, const std::vector<std::pair<std::string, Expr>>& fields) {
    auto stats = monitor(traj, fields);
    for (const auto& s : stats) traj.monitors[s.name] = s.values;
    return stats;
}

double energy(const MetricField& G, const std::optional<Expr>& U, const Vec& x, const Vec& v) {
    double e = 0.5 * v.dot(G.at(x) * v);
    if (U) e -= evaluate_all({*U}, x)(0);
    return e;
}

// ---------------------------------------------------------------- reports

void VerificationReport::add(std::string name, std::string anchor, double max_residual, double tolerance,
                             std::size_t samples) {
    Check c;
    c.name = std::move(name);
    c.anchor = std::move(anchor);
    c.max_residual = max_residual;
    c.tolerance = tolerance;
    c.samples = samples;
    c.pass = std::isfinite(max_residual) && max_residual <= tolerance;
    checks.push_back(std::move(c));
}

bool VerificationReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* VerificationReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

}  // namespace descartes
