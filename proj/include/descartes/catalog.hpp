#pragma once

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "descartes/cartesian.hpp"

namespace descartes::catalog {

using Params = std::map<std::string, double>;

struct ParamSpec {
    std::string name;
    double value = 0.0;
    double lo = -1e300;
    double hi = 1e300;
    std::string doc;
};

/// How a preset chooses the force function U of its system.
enum class PotentialKind {
    None,      ///< no applied force
    HalfNorm,  ///< U = ½|v|² (any Cartesian field is then a classical motion)
    Explicit,  ///< a physical force function given as an expression
};

struct Preset {
    std::string name;
    std::string summary;
    /// λ for the auxiliary forms, in order. May reference system parameters.
    std::vector<std::string> lambdas;
    /// The functions the literal PDE of the system is written in (λ, ν, μ or (λ, ϱ)).
    std::vector<std::string> pde_inputs;
    PotentialKind potential = PotentialKind::None;
    std::string potential_expr;  ///< Explicit only
    Params overrides;            ///< parameter values forced by the preset
    bool paper = true;           ///< false for deliberately failing or reference-only presets
    /// Named monitor fields over x1..xN and v1..vN.
    std::vector<std::pair<std::string, std::string>> monitors;
};

struct SystemDescriptor {
    std::string name;
    std::string summary;
    int dim = 0;
    int constraints = 0;
    std::vector<ParamSpec> params;
    std::vector<Preset> presets;
    std::string default_preset;
    std::vector<std::string> letters;  ///< "x1 = ..." entries
    /// Non-singular point, also the default initial position.
    std::function<Vec(const Params&)> probe;
    double horizon = 5.0;              ///< documented integration horizon
    std::string domain;                ///< human-readable domain description
    /// Map the unit cube [0,1]^dim onto the documented domain.
    std::function<Vec(const Vec& u, const Params& p)> domain_map;
    bool has_paper_pde = false;

    const Preset& preset(const std::string& name) const;
    Params defaults() const;
};

/// All descriptors in deterministic order.
const std::vector<SystemDescriptor>& list_systems();

/// Throws CatalogError (with the nearest names) for an unknown name.
const SystemDescriptor& descriptor(const std::string& name);

/// Defaults, then preset overrides, then `params`. Bounds are checked.
Params resolve_params(const SystemDescriptor& d, const Preset& preset, const Params& params);

/// The plain definition behind build_system (used for structural comparison).
SystemDefinition definition(const std::string& name, const Params& params = {}, const std::string& preset = "");

/// Same system with user λ and an optional force function.
SystemDefinition definition(const std::string& name, const Params& params, const std::vector<Expr>& lambdas,
                            std::optional<Expr> potential);

ConstraintSystem build_system(const std::string& name, const Params& params = {}, const std::string& preset = "");
ConstraintSystem build_system(const std::string& name, const Params& params, const std::vector<Expr>& lambdas,
                              std::optional<Expr> potential = std::nullopt);

/// Domain points: a regular grid with ceil(count^(1/dim)) cell centres per
/// axis, or `count` uniform random points.
std::vector<Vec> domain_grid(const SystemDescriptor& d, const Params& p, std::size_t count);
std::vector<Vec> domain_random(const SystemDescriptor& d, const Params& p, std::size_t count, std::mt19937_64& rng);

// ---------------------------------------------------------------- literal PDEs

/**
 * @brief The system's own first-order PDE on its λ functions, evaluated verbatim.
 *
 * `inputs` are the functions named by Preset::pde_inputs (for suslov μ1, μ2
 * over γ1..γ3 as x1..x3; `x` is still an Euler-chart point).
 * Throws CatalogError for systems without a literal PDE.
 */
double paper_pde_residual(const std::string& name, const Params& params, const std::vector<Expr>& inputs, const Vec& x);
double paper_pde_residual(const std::string& name, const Params& params, const std::string& preset, const Vec& x);

// ---------------------------------------------------------------- reference solutions

struct ReferenceState {
    Vec x;
    Vec v;
};

struct ReferenceSolution {
    std::string name;
    std::string system;
    std::string preset;
    std::vector<ParamSpec> constants;  ///< beyond the system parameters
    std::string notes;
    bool verbatim = true;   ///< false when the closed form needed a correction
    bool admitted = true;   ///< false for uncorrected forms kept only to show they fail
    /// System parameters implied by (params ∪ constants), e.g. a derived energy.
    std::function<Params(const Params&)> system_params;
    std::function<ReferenceState(const Params&, double t)> state;
};

const std::vector<ReferenceSolution>& reference_solutions();
const ReferenceSolution& reference(const std::string& name);

/// Evaluate with defaults filled in; throws CatalogError on invalid constants.
ReferenceState reference_solution(const std::string& name, const Params& constants, double t);

struct GateResult {
    double max_residual = 0.0;
    double velocity = 0.0;      ///< |d/dt x_ref − v_ref|
    double field = 0.0;         ///< |v_ref − v(x_ref)|
    double acceleration = 0.0;  ///< |d²/dt² x_ref − classical ẍ|
    std::size_t samples = 0;
    bool pass = false;
};

/// Substitute the closed form into its system's equations at `samples`
/// times in [0, horizon]; pass iff every scaled residual is below `tol`.
GateResult substitution_gate(const std::string& name, const Params& constants = {}, double horizon = 5.0,
                             std::size_t samples = 41, double tol = 1e-8);

// ---------------------------------------------------------------- Suslov helpers

/// γ = (sin z sin x, sin z cos x, cos z) for Euler angles (x, y, z).
Vec suslov_gamma(const Vec& euler);
/// Inverse map onto z ∈ (0, π); y is not determined by γ and is passed through.
Vec suslov_euler(const Vec& gamma, double y);
/// Body angular velocity (ω1, ω2, ω3) from chart position and velocity.
Vec suslov_omega(const Params& p, const Vec& x, const Vec& xd);

struct SuslovPair {
    Expr mu1;  ///< over γ1..γ3 as x1..x3
    Expr mu2;
};

/// μ of a Suslov preset (parameters bound).
SuslovPair suslov_mu(const Params& params, const std::string& preset);

/// γ·curl(μ1, μ2, 0) up to sign: γ3(∂2μ1 − ∂1μ2) − γ2∂3μ1 + γ1∂3μ2.
double suslov_eq4(const SuslovPair& mu, const Vec& gamma);

/// Reduced Poisson field γ̇ over γ1..γ3.
std::vector<Expr> suslov_reduced_field(const Params& params, const SuslovPair& mu);

/// Force function ½(μ1²/I2 + μ2²/I1) − h over γ.
Expr suslov_potential_gamma(const Params& params, const SuslovPair& mu);

/// Closed-form multiplier −(I1 − I2)ω1ω2 + γ1∂2U − γ2∂1U, U over γ.
double suslov_mu_closed_form(const Params& params, const SuslovPair& mu, const Vec& x, const Vec& xd);

/**
 * @brief The quadrature family: μ from arbitrary S(γ1, γ2, K2), Ψ1, Ψ2, Ω.
 *
 * The arguments are expressions over x1, x2, x3:
 * S(γ1, γ2, K2), Ψ1(γ2² + γ3², K2, γ1), Ψ2(γ1² + γ3², K2, γ2),
 * Ω(γ1² + γ2², K2, γ3). μ1 = ∂1S + Ψ1 + γ1Ω and μ2 = ∂2S + Ψ2 + γ2Ω.
 * With `uncorrected` the Ψ1 argument and the Ω factors follow the uncorrected
 * formula instead (γ1² + γ3² and γ2Ω, γ1Ω), which in general violates
 * the Suslov PDE.
 */
SuslovPair suslov_family(const Expr& S, const Expr& Psi1, const Expr& Psi2, const Expr& Omega, bool uncorrected = false);

/// The Euler-chart system (λ and U = ½(μ1²/I2 + μ2²/I1) − h) for arbitrary μ.
SystemDefinition suslov_definition(const Params& params, const SuslovPair& mu);

/// Named first integral "K4" of a Suslov preset over (x, v), or nullopt.
std::optional<Expr> suslov_k4(const Params& params, const std::string& preset);

/// Monitors of a preset with parameters bound.
std::vector<std::pair<std::string, Expr>> monitors(const std::string& name, const Params& params, const std::string& preset);

}  // namespace descartes::catalog
