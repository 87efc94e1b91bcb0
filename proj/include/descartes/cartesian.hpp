#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "descartes/geometry.hpp"

namespace descartes {

/**
 * @brief Plain description of a constrained system, before compilation.
 *
 * `given` holds the M constraint forms, `auxiliary` the N-M completing
 * forms and `lambdas` the prescribed values Ω_j(v) for the auxiliary forms.
 * Expressions may reference the named parameters in `params`; they are
 * bound when the ConstraintSystem is built.
 */
struct SystemDefinition {
    std::string name;
    int dim = 0;
    std::vector<Expr> metric_upper;  ///< packed upper triangle, row major
    std::vector<OneFormField> given;
    std::vector<OneFormField> auxiliary;
    std::vector<Expr> lambdas;
    std::optional<Expr> potential;  ///< force function U (F = ∂U/∂x)
    std::map<std::string, double> params;
    /// Integration stops when |guard(x)| < 1e-6 (chart singular locus).
    std::optional<Expr> chart_guard;
};

/// Structural comparison of two definitions after parameter binding.
bool structurally_equal(const SystemDefinition& a, const SystemDefinition& b);

/// Complete `given` with coordinate forms dx^k, added one at a time so as
/// to maximize the volume spanned at `probe`.
std::vector<OneFormField> default_auxiliary_forms(const std::vector<OneFormField>& given, const Vec& probe);

/**
 * @brief Compiled constrained system (immutable).
 *
 * Builds the symbolic Cartesian field v = adj(M) λ~ / Υ, the momentum
 * p = G v, dσ and ∂(½|v|²) once, and compiles them into evaluation tapes.
 */
class ConstraintSystem {
public:
    explicit ConstraintSystem(SystemDefinition def);

    const SystemDefinition& definition() const { return def_; }
    const std::string& name() const { return def_.name; }
    int dim() const { return n_; }
    int constraints() const { return m_; }
    const MetricField& metric() const { return metric_; }
    /// All N forms: given first.
    const std::vector<OneFormField>& forms() const { return forms_; }
    const std::vector<Expr>& lambdas() const { return def_.lambdas; }
    const std::optional<Expr>& potential() const { return def_.potential; }
    const std::optional<Expr>& chart_guard() const { return def_.chart_guard; }

    const Expr& upsilon_expr() const { return upsilon_; }
    const std::vector<Expr>& velocity_expr() const { return v_; }
    const std::vector<Expr>& momentum_expr() const { return p_; }
    /// ½ vᵀ G v as an expression in x.
    const Expr& half_norm_expr() const { return half_norm_; }

    Mat frame_at(const Vec& x) const;
    Vec lambda_tilde_at(const Vec& x) const;
    /// Symbolic field evaluated at x (used by the dual-route checks).
    Vec velocity_expr_at(const Vec& x) const;
    Mat H_at(const Vec& x) const;
    Vec grad_half_norm_at(const Vec& x) const;
    /// Throws ChartSingular when the guard is within 1e-6 of zero.
    void check_chart(const Vec& x) const;

private:
    SystemDefinition def_;
    int n_ = 0;
    int m_ = 0;
    MetricField metric_;
    std::vector<OneFormField> forms_;
    Expr upsilon_;
    std::vector<Expr> v_;
    std::vector<Expr> p_;
    Expr half_norm_;
    expr::Program frame_prog_;
    expr::Program lambda_prog_;
    expr::Program v_prog_;
    expr::Program H_prog_;
    expr::Program gradk_prog_;
    expr::Program guard_prog_;
};

struct FrameEval {
    Vec x;
    Mat M;
    double upsilon = 0.0;
    double scale = 0.0;  ///< product of row norms
    Vec v;               ///< linear-solve field
    Vec p;               ///< G v
};

struct LambdaEval {
    Vec x;
    Vec lambda_tilde;
    Mat A;
    Vec Lambda;    ///< route 1: Λ_k = Σ_j a_jk λ_j
    Vec Lambda2;   ///< route 2: Mᵀ Λ = τ
    Vec tau;       ///< τ_q = Σ_p v^p H[p][q]
};

inline constexpr double kFrameSingularTol = 1e-10;
inline constexpr double kDualRouteTol = 1e-8;

FrameEval frame_matrix(const ConstraintSystem& sys, const Vec& x);
Vec cartesian_velocity(const ConstraintSystem& sys, const Vec& x);
Mat structure_matrix(const ConstraintSystem& sys, const Vec& x);
LambdaEval lambda_vector(const ConstraintSystem& sys, const Vec& x);
Vec consistency_residual(const ConstraintSystem& sys, const Vec& x);
Vec reaction_covector(const ConstraintSystem& sys, const Vec& x);

struct CrossField {
    Vec v;
    double residual = 0.0;  ///< (a, rot3 v)
};

/// v = [a × w] (rows a; w; basis) and the condition (a, rot3 v).
CrossField cross_field_3d(const OneFormField& a, const std::vector<Expr>& w, const MetricField& G, const Vec& x);

/// Symbolic [a × w].
std::vector<Expr> cross_expr(const std::vector<Expr>& a, const std::vector<Expr>& w);

/// |v × rot3 v|.
double kummer_residual(const VectorFieldDef& v, const MetricField& G, const Vec& x);

}  // namespace descartes
