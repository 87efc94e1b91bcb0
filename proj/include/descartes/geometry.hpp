#pragma once

#include <Eigen/Dense>
#include <vector>

#include "descartes/expr.hpp"

namespace descartes {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using expr::Expr;

/// Evaluate a list of expressions at a point (parameters must be bound).
Vec evaluate_all(const std::vector<Expr>& es, const Vec& x);

/// Symbolic determinant by Laplace expansion (memoized over column subsets).
Expr det_expr(const std::vector<std::vector<Expr>>& m);

/// Symbolic cofactor C_jk = (-1)^{j+k} det(minor without row j, column k).
Expr cofactor_expr(const std::vector<std::vector<Expr>>& m, int j, int k);

/**
 * @brief Riemannian metric on a chart, stored as its upper triangle.
 *
 * Entries and their first partial derivatives are compiled once at
 * construction; evaluation is cheap and thread safe.
 */
class MetricField {
public:
    MetricField() = default;
    static MetricField identity(int n);
    static MetricField diagonal(const std::vector<Expr>& d);
    /// Row-major upper triangle: (0,0),(0,1),..,(0,n-1),(1,1),...
    static MetricField from_upper(int n, const std::vector<Expr>& upper);
    /// Full matrix; must be structurally symmetric.
    static MetricField from_matrix(const std::vector<std::vector<Expr>>& m);

    int dim() const { return n_; }
    const Expr& entry(int i, int j) const;
    bool is_identity() const { return identity_; }

    Mat at(const Vec& x) const;
    /// dG/dx^k at x, one matrix per k.
    std::vector<Mat> derivatives(const Vec& x) const;
    /// LLT factorization; throws MetricNotPositive.
    Eigen::LLT<Mat> cholesky(const Vec& x) const;

    /// Symbolic G u.
    std::vector<Expr> lower(const std::vector<Expr>& u) const;
    /// Symbolic u^T G w.
    Expr inner(const std::vector<Expr>& u, const std::vector<Expr>& w) const;

private:
    void compile();
    int n_ = 0;
    bool identity_ = false;
    std::vector<Expr> upper_;
    expr::Program prog_;
    expr::Program dprog_;
};

struct OneFormField {
    std::vector<Expr> coeffs;

    int dim() const { return static_cast<int>(coeffs.size()); }
    /// df as a 1-form in dimension n.
    static OneFormField exact(const Expr& f, int n);
    static OneFormField coordinate(int k, int n);
    Vec at(const Vec& x) const { return evaluate_all(coeffs, x); }
};

struct VectorFieldDef {
    std::vector<Expr> comps;
    int dim() const { return static_cast<int>(comps.size()); }
    Vec at(const Vec& x) const { return evaluate_all(comps, x); }
};

/// dσ(∂_j, ∂_k) at a point; antisymmetric by construction.
struct TwoFormMatrix {
    Mat H;
};

enum class IndexMode { Lower, Raise };
enum class GradMode { Covector, Vector };

Vec metric_apply(const MetricField& G, const Vec& x, const Vec& u, IndexMode mode);

TwoFormMatrix d_one_form(const OneFormField& sigma, const Vec& x);

/// Symbolic H[j][k] = ∂_j σ_k − ∂_k σ_j for j < k (lower triangle negated on evaluation).
std::vector<std::vector<Expr>> d_one_form_expr(const std::vector<Expr>& sigma);

Vec grad(const Expr& f, const MetricField& G, const Vec& x, GradMode mode);

/**
 * @brief Metric rot of a 3D field.
 *
 * rot v = -(1/sqrt det G) (∂2 p3 − ∂3 p2, ∂3 p1 − ∂1 p3, ∂1 p2 − ∂2 p1), p = G v.
 * The leading minus fixes the orientation under which rot a = a for
 * a = (0, sin x1, −cos x1) and rot([∇r × c]) = c/r; it is the negative of the
 * textbook curl. kummer_residual does not depend on the choice.
 */
Vec rot3(const VectorFieldDef& v, const MetricField& G, const Vec& x);

/// Components of the Nambu bracket {f_1,...,f_{N-1}, *}; k-th entry is
/// (-1)^{N+k} times the minor of the Jacobian omitting column k (1-based k).
Vec nambu_bracket(const std::vector<Expr>& f, const Vec& x);
std::vector<Expr> nambu_bracket_expr(const std::vector<Expr>& f, int n);

}  // namespace descartes
