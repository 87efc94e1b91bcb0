#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "descartes/cartesian.hpp"

namespace descartes::inverse {

/**
 * @brief An (N-1)-parameter family of orbits f_j(x) = c_j.
 *
 * The generating field is v = λ {f_1, ..., f_{N-1}, *}. `f_aux` completes the
 * coframe for the structure-matrix route; when absent the coordinate x^k
 * with the largest bracket component at the evaluation point is used.
 */
struct OrbitFamily {
    int dim = 0;
    std::vector<Expr> f;
    std::optional<Expr> f_aux;
    MetricField metric;  ///< identity when left default
    Expr lambda = Expr::constant(1.0);

    MetricField G() const { return metric.dim() ? metric : MetricField::identity(dim); }
    /// Throws DimensionError on inconsistent sizes.
    void validate() const;
};

// ---------------------------------------------------------------- forces

/// Force F_k = ∂_k(½|v|²) + Σ_j v^j (∂_j p_k − ∂_k p_j), p = G v, split in its two parts.
struct ForceField {
    int dim = 0;
    std::vector<Expr> velocity;
    std::vector<Expr> gradient;  ///< ∂(½|v|²)
    std::vector<Expr> reaction;  ///< ι_v dσ
    std::vector<Expr> force;

    Vec at(const Vec& x) const;
    Vec gradient_at(const Vec& x) const;
    Vec reaction_at(const Vec& x) const;
};

/// The covector force under which every integral curve of `v` is a trajectory.
ForceField force_from_velocity(const std::vector<Expr>& v, const MetricField& G);

/// Plane force from the bracket form {f, g} = f_x g_y − f_y g_x. Throws DimensionError unless f, λ live in 2D.
Vec dainelli_force_2d(const Expr& f, const Expr& lambda, const Vec& x);

/// The same force written as ∂(½|v|²) − λ(∂_x(λ f_x) + ∂_y(λ f_y)) ∂f, v = λ(−f_y, f_x).
Vec dainelli_force_2d_rewritten(const Expr& f, const Expr& lambda, const Vec& x);

/// Symbolic force for the family (v = λ times the Nambu bracket).
ForceField dainelli_force(const OrbitFamily& family);

struct ForceEval {
    Vec F;
    Vec gradient;
    Vec reaction;
    /// Σ_{j<N} Λ_j ∂f_j from the structure matrix of the exact coframe.
    Vec reaction_frame;
    /// Λ_j / λ_N, i.e. the last row of A (j < N).
    Vec a_last_row;
    double jacobian = 0.0;  ///< {f_1, ..., f_N} at x
};

/// Evaluate at x with both routes. Throws InverseError when the Jacobian is degenerate.
ForceEval dainelli_force_at(const OrbitFamily& family, const ForceField& F, const Vec& x);

/// N = 3: ∂(½|v|²) + λ√det G (df1(rot v) df2 − df2(rot v) df1); the root is 1 for the Euclidean metric.
Vec dainelli_rot_form(const OrbitFamily& family, const Vec& x);

// ---------------------------------------------------------------- certificates

struct Certificate {
    std::size_t samples = 0;
    double closedness = 0.0;      ///< max |∂_p ρ_q − ∂_q ρ_p|
    double gradient_match = 0.0;  ///< max |F − ∂U| when a U is emitted
    double tolerance = 1e-8;
    bool pass = false;
    /// Tabulated primitive of ρ (first point is the base, value 0).
    std::vector<Vec> h_points;
    std::vector<double> h_values;
};

/// Closedness of the 1-form ρ on the grid (evaluated concurrently).
Certificate exactness_check(const std::vector<Expr>& rho, const std::vector<Vec>& grid, double tol = 1e-8,
                            unsigned workers = 0);

/// Closedness of the family's reaction form; h tabulated from grid[0] when it passes.
Certificate exactness_check(const OrbitFamily& family, const std::vector<Vec>& grid, double tol = 1e-8,
                            unsigned workers = 0);

/// ∫ ρ along the coordinate-aligned path base → x (x^1 leg first), Gauss–Kronrod per leg.
double line_integral(const std::vector<Expr>& rho, const Vec& base, const Vec& x);

// ---------------------------------------------------------------- potentials

/// Antiderivative in x^k when e is a polynomial in x^k of degree ≤ max_degree
/// (coefficients may depend on the other coordinates); nullopt otherwise.
std::optional<Expr> polynomial_antiderivative(const Expr& e, int k, int max_degree = 12);

struct PotentialResult {
    std::string route;
    std::optional<Expr> U;                     ///< force function, F = ∂U
    std::function<double(const Vec&)> value;   ///< always set
    std::function<Vec(const Vec&)> gradient;   ///< always set
    std::vector<Expr> velocity;                ///< field tracing the orbits, when known
    std::vector<std::pair<std::string, std::string>> inputs;
    Certificate certificate;
};

/**
 * @brief Potential route for a family: F = ∂U iff the reaction ρ is closed.
 *
 * `h` may reference parameters f1, f2, ... standing for the family functions.
 * With `h`, U = ½|v|² + h(f) is emitted and the certificate also demands
 * ρ = dh. Without it, h is tabulated by line integration from grid[0].
 */
PotentialResult suslov_potential(const OrbitFamily& family, const std::vector<Vec>& grid,
                                 const std::optional<Expr>& h = std::nullopt, double tol = 1e-8);

enum class JoukovskiMode { General, ExactNu };

struct JoukovskiInput {
    int dim = 0;
    std::vector<Expr> f;
    MetricField metric;      ///< identity when left default
    Expr S;                  ///< orthogonal hypersurfaces S = c
    Expr nu;                 ///< General: ν over x (parameter "S" allowed)
    Expr Phi;                ///< ExactNu: Φ with parameter "S"
    std::optional<Expr> h;   ///< General: h over f1, f2, ... (its differential must equal ρ)
    double h0 = 0.0;

    MetricField G() const { return metric.dim() ? metric : MetricField::identity(dim); }
};

/// (∂ν², ∂S) dS − |∂S|² dν², the left side of the closedness condition; the reaction is half of it.
std::vector<Expr> joukovski_condition_form(const Expr& S, const Expr& nu, const MetricField& G);

/**
 * @brief Potential for orbits with orthogonal hypersurfaces.
 *
 * General: v = ν G⁻¹∂S and U = ½ν²|∂S|² + h(f). ExactNu (ν = Φ'(S)):
 * U = ½|∂Φ(S)|² − h0 with no condition. Throws InverseError when
 * (∂S, ∂f_j)_G exceeds 1e-8 on the grid, and in General mode when the
 * closedness certificate fails.
 */
PotentialResult joukovski_potential(const JoukovskiInput& in, JoukovskiMode mode, const std::vector<Vec>& grid,
                                    double tol = 1e-8);

/**
 * @brief Orbits x^j = C_j (j < N) with x^N = const orthogonal, diagonal metric.
 *
 * U = (g(x^N) + Σ_j ∫ h ∂_j G_NN dx^j) / G_NN with the sum integrated along the
 * coordinate-aligned path from `base`. Each leg is antidifferentiated
 * symbolically when its integrand is polynomial in the leg variable, else by
 * quadrature (then U is not emitted as an expression). The certificate checks
 * that h dG_NN is closed in x^1..x^{N-1} and that F = ∂U on `grid` (base
 * alone when empty). Throws InverseError for
 * a non-diagonal metric, h depending on x^N, g depending on other
 * coordinates, or when quadrature is needed but disabled.
 */
PotentialResult joukovski_orthogonal_coords(const MetricField& G, const Expr& h, const Expr& g, const Vec& base,
                                            const std::vector<Vec>& grid = {}, bool allow_quadrature = true,
                                            double tol = 1e-8);

struct StackelInput {
    /// phi[k][a] = φ_{k a}(x^k), k the coordinate, a the family index.
    std::vector<std::vector<Expr>> phi;
    std::vector<Expr> Psi;      ///< Ψ_k(x^k)
    std::vector<double> alpha;  ///< N constants
    Expr nu = Expr::constant(1.0);
    double h0 = 0.0;
};

/// A^k = cofactor of the last row / det: {φ_1..φ_{N-1}, *}/{φ_1..φ_N} = Σ A^k ∂_k.
std::vector<Expr> stackel_coefficients(const std::vector<std::vector<Expr>>& phi);
/// T = ½ Σ (ẋ^k)²/A^k.
MetricField stackel_metric(const std::vector<std::vector<Expr>>& phi);
/// Σ A^k Ψ_k.
Expr stackel_sum(const std::vector<Expr>& A, const std::vector<Expr>& Psi);

/**
 * @brief U = ν²({φ_1..φ_{N-1}, Ψ}/{φ_1..φ_N} + α_N) − h0, with v^k = ν A^k √K_k,
 * K_k = 2Ψ_k + 2 Σ_j α_j φ_kj.
 *
 * Throws InverseError when φ_{k a} or Ψ_k depend on other coordinates or the
 * bracket vanishes at `probe`. The certificate (on `grid`) checks closedness
 * of the reaction and F = ∂U where K_k > 0.
 */
PotentialResult stackel_potential(const StackelInput& in, const Vec& probe, const std::vector<Vec>& grid,
                                  double tol = 1e-8);

/// f_j(x) − f_j(base) = Σ_k ∫ φ_kj(s) / √K_k(s) ds over [base_k, x_k], j < N (constant along the field).
double stackel_first_integral(const StackelInput& in, int j, const Vec& base, const Vec& x);

// ---------------------------------------------------------------- Bertrand conics f = r + b x

/// ξ_j(τ) = (1−τ)^{(j+1)/2+(j+3)/(2b)} (1+τ)^{(j+1)/2−(j+3)/(2b)}.
double bertrand_xi(int j, double b, double tau);

/// Endpoint margin: τ must lie in (−1 + δ, 1 − δ).
inline constexpr double kBertrandDelta = 1e-6;

/**
 * @brief H_j(τ) = ξ_j (C − (2K/b) ∫_0^τ (1+bs)^j / ((1−s²) ξ_j(s)) ds).
 *
 * Throws InverseError for b = 0 or τ outside the open interval and
 * QuadratureError on non-convergence.
 */
double bertrand_H(int j, double b, double K, double C, double tau);

/// H_j' from its linear ODE.
double bertrand_H_prime(int j, double b, double K, double H, double tau);

/// |b(1−τ²)H' + ((j+1)bτ + j + 3)H + 2K(1+bτ)^j| with H' by 5-point differences of bertrand_H.
double bertrand_ode_residual(int j, double b, double K, double C, double tau, double step = 1e-4);

/// Closed form for j = −2, b ≠ 0, 1: ξ_{-2} C' − 2K/((bτ+1)(1−b²)).
double bertrand_Hm2_closed(double b, double K, double Cprime, double tau);

/// C' such that the closed form equals the quadrature solution with constant C.
double bertrand_Hm2_constant(double b, double K, double C);

/// U_j(r, τ): ½ r^{j+1} H_j (1+b²+2bτ) + K f^{j+1}/(j+1), or the logarithmic j = −1 term.
double bertrand_U_term(int j, double b, double K, double C, double r, double tau);

/// Cartesian gradient of U_j at (x, y).
Vec bertrand_U_term_gradient(int j, double b, double K, double C, const Vec& xy);

/**
 * @brief b = 0: U = Ψ(τ)/r² − (2/r²) ∫_{r_ref}^r h(s) s ds on the plane.
 *
 * Ψ is given over x1 standing for τ = cos θ, h over x1 standing for r. The
 * inner integral is symbolic for polynomial h, else by quadrature. The
 * velocity is λ(−f_y, f_x) with λ² = 2h − (4/r²)∫ h s ds + 2Ψ/r².
 */
PotentialResult bertrand_b0(const Expr& Psi, const Expr& h, double r_ref = 1.0);

}  // namespace descartes::inverse
