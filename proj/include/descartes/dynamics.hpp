#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "descartes/cartesian.hpp"

namespace descartes {

enum class Method { RK4, RK45 };

/**
 * @brief Integration settings shared by every integrator in this module.
 *
 * Output samples are taken at t0 + i*step*stride. RK4 advances with the
 * fixed `step`; RK45 adapts its internal step under (rtol, atol) and the
 * samples are resampled onto the same grid by cubic Hermite interpolation
 * (the post-step hook is applied to resampled states as well).
 */
struct IntegratorConfig {
    Method method = Method::RK4;
    double t0 = 0.0;
    double t1 = 1.0;
    double step = 1e-3;
    double rtol = 1e-10;
    double atol = 1e-12;
    double min_step = 1e-12;
    double max_step = 0.01;  ///< RK45; also bounds the Hermite resampling error
    int stride = 1;
    bool project_velocity = true;  ///< classical runs only

    /// Throws IntegrationError on inconsistent settings.
    void validate() const;
    std::size_t sample_count() const;
};

struct Trajectory {
    int dim = 0;
    int constraints = 0;
    std::vector<double> t;
    std::vector<Vec> x;
    std::vector<Vec> v;
    std::vector<Vec> mu;                ///< multipliers, classical runs only
    std::vector<Vec> constraint_values; ///< Ω_j(ẋ), j ≤ M
    std::map<std::string, std::vector<double>> monitors;
    std::optional<std::string> error;   ///< set when the run was truncated
    std::size_t steps = 0;              ///< accepted integrator steps

    std::size_t size() const { return t.size(); }
    bool truncated() const { return error.has_value(); }
};

// ---------------------------------------------------------------- raw ODE layer

using State = std::vector<double>;
using OdeRhs = std::function<void(const State& y, State& dy, double t)>;
/// Hook applied after every accepted step (e.g. velocity projection).
using PostStep = std::function<void(State& y)>;

struct OdeSolution {
    std::vector<double> t;
    std::vector<State> y;
    std::optional<std::string> error;
    std::size_t steps = 0;
};

/// Integrate y' = f(y, t) on the configured grid. Library errors raised by
/// the right-hand side truncate the solution and set `error`.
OdeSolution solve_ode(const OdeRhs& f, State y0, const IntegratorConfig& cfg, const PostStep& post = {});

// ---------------------------------------------------------------- first-order (Cartesian) flow

/// ẋ = v(x) for an arbitrary field; v is stored at every sample.
Trajectory integrate_field(const std::function<Vec(const Vec&)>& v, const Vec& x0, const IntegratorConfig& cfg);

/// ẋ = cartesian_velocity(sys, x); chart guards are honoured.
Trajectory integrate_first_order(const ConstraintSystem& sys, const Vec& x0, const IntegratorConfig& cfg);

// ---------------------------------------------------------------- classical (multiplier) system

/**
 * @brief Second-order Lagrangian system T = ½ ẋᵀ G ẋ with linear velocity
 * constraints α ẋ = 0 (possibly none) and a position-dependent force covector.
 */
struct MechanicalSystem {
    MechanicalSystem(MetricField metric, std::vector<OneFormField> constraints, std::vector<Expr> force,
                     std::optional<Expr> chart_guard = std::nullopt);
    /// Constraints Ω_1..Ω_M of `sys`, force ∂U (zero when U is absent).
    static MechanicalSystem from(const ConstraintSystem& sys);
    /// Unconstrained motion under F = ∂U.
    static MechanicalSystem with_potential(MetricField metric, const Expr& potential);

    int dim() const { return metric_.dim(); }
    int constraints() const { return static_cast<int>(alpha_.size()); }
    const MetricField& metric() const { return metric_; }
    Mat alpha_at(const Vec& x) const;
    Vec force_at(const Vec& x) const;
    void check_chart(const Vec& x) const;

    struct Accel {
        Vec a;
        Vec mu;
    };
    /// Solve the augmented system for (ẍ, μ). Throws SingularConstraints.
    Accel acceleration(const Vec& x, const Vec& xd) const;
    /// G-orthogonal projection of xd onto ker α(x).
    Vec project(const Vec& x, const Vec& xd) const;

private:
    MetricField metric_;
    std::vector<OneFormField> alpha_;
    std::vector<Expr> force_;
    std::optional<Expr> guard_;
    expr::Program alpha_prog_;
    expr::Program dalpha_prog_;
    expr::Program force_prog_;
    expr::Program guard_prog_;
};

/// Integrate the multiplier equations from (x0, v0). Throws IntegrationError
/// when v0 violates a constraint by more than 1e-10 (scaled).
Trajectory integrate_classical(const MechanicalSystem& sys, const Vec& x0, const Vec& v0, const IntegratorConfig& cfg);
Trajectory integrate_classical(const ConstraintSystem& sys, const Vec& x0, const Vec& v0, const IntegratorConfig& cfg);

// ---------------------------------------------------------------- verifiers

/// Per interior sample: max_k |d/dt(G v)_k − ½ vᵀ ∂_k G v − ∂_k(½|v|²) − reaction_k|,
/// with the time derivative by central differences over neighbouring samples.
std::vector<double> lagrange_residual(const ConstraintSystem& sys, const Trajectory& traj);

struct ConstraintDrift {
    Vec absolute;  ///< max over samples of |Ω_j(ẋ)|
    Vec scaled;    ///< |Ω_j(ẋ)| / max(1, |Ω_j| |ẋ|)
};
ConstraintDrift constraint_drift(const std::vector<OneFormField>& forms, const Trajectory& traj);
ConstraintDrift constraint_drift(const ConstraintSystem& sys, const Trajectory& traj);

struct MonitorStats {
    std::string name;
    double initial = 0.0;
    double max_deviation = 0.0;
    double relative_drift = 0.0;  ///< max_deviation / max(1, |initial|)
    std::size_t domain_errors = 0;
    std::vector<double> values;
};

/// Evaluate named fields over x1..xN and v1..vN along a trajectory.
std::vector<MonitorStats> monitor(const Trajectory& traj, const std::vector<std::pair<std::string, Expr>>& fields);

/// Same, and store each series in traj.monitors for export.
std::vector<MonitorStats> attach_monitors(Trajectory& traj, const std::vector<std::pair<std::string, Expr>>& fields);

/// ½ vᵀ G v − U (U a force function); conserved by conservative classical runs.
double energy(const MetricField& G, const std::optional<Expr>& U, const Vec& x, const Vec& v);

// ---------------------------------------------------------------- reports

struct Check {
    std::string name;
    std::string anchor;  ///< the relation being checked
    double max_residual = 0.0;
    double tolerance = 0.0;
    std::size_t samples = 0;
    bool pass = false;
};

struct VerificationReport {
    std::vector<Check> checks;

    void add(std::string name, std::string anchor, double max_residual, double tolerance, std::size_t samples);
    bool all_pass() const;
    const Check* find(const std::string& name) const;
};

}  // namespace descartes
