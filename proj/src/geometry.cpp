#include "descartes/geometry.hpp"

#include <cmath>
#include <map>

namespace descartes {

using expr::differentiate;

Vec evaluate_all(const std::vector<Expr>& es, const Vec& x) {
    expr::Env env{std::vector<double>(x.data(), x.data() + x.size()), {}, {}};
    Vec out(static_cast<Eigen::Index>(es.size()));
    for (std::size_t i = 0; i < es.size(); ++i) out(static_cast<Eigen::Index>(i)) = expr::evaluate(es[i], env);
    return out;
}

// ---------------------------------------------------------------- symbolic determinants

namespace {

// det of rows [row0, n) restricted to the columns in `cols` (bitmask).
Expr det_rec(const std::vector<std::vector<Expr>>& m, int row, unsigned cols, std::map<unsigned, Expr>& memo) {
    auto it = memo.find(cols);
    if (it != memo.end()) return it->second;
    const int n = static_cast<int>(m[0].size());
    Expr acc = Expr::constant(0.0);
    if (cols == 0) {
        acc = Expr::constant(1.0);
    } else {
        int sign_pos = 0;
        for (int c = 0; c < n; ++c) {
            if (!(cols & (1u << c))) continue;
            const Expr& a = m[row][c];
            if (!a.is_constant(0.0)) {
                Expr term = a * det_rec(m, row + 1, cols & ~(1u << c), memo);
                acc = (sign_pos % 2) ? acc - term : acc + term;
            }
            ++sign_pos;
        }
    }
    memo.emplace(cols, acc);
    return acc;
}

}  // namespace

Expr det_expr(const std::vector<std::vector<Expr>>& m) {
    if (m.empty()) return Expr::constant(1.0);
    const int n = static_cast<int>(m.size());
    for (const auto& r : m)
        if (static_cast<int>(r.size()) != n) throw DimensionError("det_expr: matrix is not square");
    if (n > 16) throw DimensionError("det_expr: dimension too large");
    std::map<unsigned, Expr> memo;
    return det_rec(m, 0, (1u << n) - 1u, memo);
}

Expr cofactor_expr(const std::vector<std::vector<Expr>>& m, int j, int k) {
    const int n = static_cast<int>(m.size());
    std::vector<std::vector<Expr>> minor;
    for (int r = 0; r < n; ++r) {
        if (r == j) continue;
        std::vector<Expr> row;
        for (int c = 0; c < n; ++c)
            if (c != k) row.push_back(m[r][c]);
        minor.push_back(std::move(row));
    }
    Expr d = det_expr(minor);
    return ((j + k) % 2) ? -d : d;
}

// ---------------------------------------------------------------- MetricField

MetricField MetricField::identity(int n) {
    std::vector<Expr> up;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) up.push_back(Expr::constant(i == j ? 1.0 : 0.0));
    MetricField g = from_upper(n, up);
    g.identity_ = true;
    return g;
}

MetricField MetricField::diagonal(const std::vector<Expr>& d) {
    const int n = static_cast<int>(d.size());
    std::vector<Expr> up;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) up.push_back(i == j ? d[i] : Expr::constant(0.0));
    return from_upper(n, up);
}

MetricField MetricField::from_upper(int n, const std::vector<Expr>& upper) {
    if (n <= 0 || static_cast<int>(upper.size()) != n * (n + 1) / 2)
        throw DimensionError("metric needs N(N+1)/2 upper-triangle entries");
    MetricField g;
    g.n_ = n;
    g.upper_ = upper;
    bool ident = true;
    for (int i = 0, p = 0; i < n; ++i)
        for (int j = i; j < n; ++j, ++p) ident = ident && upper[p].is_constant(i == j ? 1.0 : 0.0);
    g.identity_ = ident;
    g.compile();
    return g;
}

MetricField MetricField::from_matrix(const std::vector<std::vector<Expr>>& m) {
    const int n = static_cast<int>(m.size());
    std::vector<Expr> up;
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(m[i].size()) != n) throw DimensionError("metric matrix is not square");
        for (int j = i; j < n; ++j) {
            if (!expr::structurally_equal(m[i][j], m[j][i]))
                throw DimensionError("metric matrix is not symmetric at (" + std::to_string(i + 1) + "," +
                                     std::to_string(j + 1) + ")");
            up.push_back(m[i][j]);
        }
    }
    return from_upper(n, up);
}

const Expr& MetricField::entry(int i, int j) const {
    if (i > j) std::swap(i, j);
    // offset of row i in the packed upper triangle
    int p = i * n_ - i * (i - 1) / 2 + (j - i);
    return upper_[p];
}

void MetricField::compile() {
    prog_ = expr::Program(upper_);
    std::vector<Expr> d;
    for (int k = 0; k < n_; ++k)
        for (const auto& e : upper_) d.push_back(differentiate(e, k));
    dprog_ = expr::Program(d);
}

Mat MetricField::at(const Vec& x) const {
    if (x.size() < n_) throw DimensionError("metric evaluated at a point of wrong dimension");
    std::vector<double> vals(upper_.size());
    prog_.run(x.data(), nullptr, vals.data());
    Mat g(n_, n_);
    for (int i = 0, p = 0; i < n_; ++i)
        for (int j = i; j < n_; ++j, ++p) g(i, j) = g(j, i) = vals[p];
    return g;
}

std::vector<Mat> MetricField::derivatives(const Vec& x) const {
    std::vector<double> vals(upper_.size() * n_);
    dprog_.run(x.data(), nullptr, vals.data());
    std::vector<Mat> out;
    std::size_t q = 0;
    for (int k = 0; k < n_; ++k) {
        Mat d(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j, ++q) d(i, j) = d(j, i) = vals[q];
        out.push_back(std::move(d));
    }
    return out;
}

Eigen::LLT<Mat> MetricField::cholesky(const Vec& x) const {
    Eigen::LLT<Mat> llt(at(x));
    if (llt.info() != Eigen::Success) throw MetricNotPositive("metric is not positive definite at the requested point");
    return llt;
}

std::vector<Expr> MetricField::lower(const std::vector<Expr>& u) const {
    if (static_cast<int>(u.size()) != n_) throw DimensionError("lower: component count differs from metric dimension");
    std::vector<Expr> p(n_);
    for (int k = 0; k < n_; ++k) {
        Expr acc = Expr::constant(0.0);
        for (int j = 0; j < n_; ++j) acc = acc + entry(k, j) * u[j];
        p[k] = acc;
    }
    return p;
}

Expr MetricField::inner(const std::vector<Expr>& u, const std::vector<Expr>& w) const {
    std::vector<Expr> gw = lower(w);
    Expr acc = Expr::constant(0.0);
    for (int k = 0; k < n_; ++k) acc = acc + u[k] * gw[k];
    return acc;
}

// ---------------------------------------------------------------- forms

OneFormField OneFormField::exact(const Expr& f, int n) {
    OneFormField w;
    for (int k = 0; k < n; ++k) w.coeffs.push_back(differentiate(f, k));
    return w;
}

OneFormField OneFormField::coordinate(int k, int n) {
    OneFormField w;
    for (int j = 0; j < n; ++j) w.coeffs.push_back(Expr::constant(j == k ? 1.0 : 0.0));
    return w;
}

Vec metric_apply(const MetricField& G, const Vec& x, const Vec& u, IndexMode mode) {
    if (u.size() != G.dim()) throw DimensionError("metric_apply: component count differs from metric dimension");
    auto llt = G.cholesky(x);
    if (mode == IndexMode::Lower) return G.at(x) * u;
    return llt.solve(u);
}

std::vector<std::vector<Expr>> d_one_form_expr(const std::vector<Expr>& sigma) {
    const int n = static_cast<int>(sigma.size());
    std::vector<std::vector<Expr>> H(n, std::vector<Expr>(n));
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
            H[j][k] = differentiate(sigma[k], j) - differentiate(sigma[j], k);
            H[k][j] = -H[j][k];
        }
    return H;
}

TwoFormMatrix d_one_form(const OneFormField& sigma, const Vec& x) {
    const int n = sigma.dim();
    if (x.size() != n) throw DimensionError("d_one_form: point dimension differs from form dimension");
    expr::Env env{std::vector<double>(x.data(), x.data() + n), {}, {}};
    TwoFormMatrix out{Mat::Zero(n, n)};
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
            double h = expr::evaluate(differentiate(sigma.coeffs[k], j), env) -
                       expr::evaluate(differentiate(sigma.coeffs[j], k), env);
            out.H(j, k) = h;
            out.H(k, j) = -h;
        }
    return out;
}

Vec grad(const Expr& f, const MetricField& G, const Vec& x, GradMode mode) {
    const int n = G.dim();
    Vec df = evaluate_all(OneFormField::exact(f, n).coeffs, x);
    if (mode == GradMode::Covector) return df;
    return G.cholesky(x).solve(df);
}

Vec rot3(const VectorFieldDef& v, const MetricField& G, const Vec& x) {
    if (v.dim() != 3 || G.dim() != 3) throw DimensionError("rot3 requires dimension 3");
    Mat g = G.at(x);
    double det = g.determinant();
    if (!(det > 0.0)) throw MetricNotPositive("rot3: degenerate metric");
    std::vector<Expr> p = G.lower(v.comps);
    auto d = [&](int i, int j) { return expr::differentiate(p[i], j); };
    std::vector<Expr> c = {d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)};
    return -evaluate_all(c, x) / std::sqrt(det);
}

std::vector<Expr> nambu_bracket_expr(const std::vector<Expr>& f, int n) {
    if (static_cast<int>(f.size()) != n - 1)
        throw DimensionError("nambu_bracket needs exactly N-1 fields (got " + std::to_string(f.size()) + ", N = " +
                             std::to_string(n) + ")");
    std::vector<std::vector<Expr>> jac;
    for (const auto& fj : f) jac.push_back(OneFormField::exact(fj, n).coeffs);
    std::vector<Expr> out(n);
    for (int k = 0; k < n; ++k) {
        std::vector<std::vector<Expr>> minor;
        for (const auto& row : jac) {
            std::vector<Expr> r;
            for (int c = 0; c < n; ++c)
                if (c != k) r.push_back(row[c]);
            minor.push_back(std::move(r));
        }
        Expr d = det_expr(minor);
        // (-1)^{N+k} with 1-based k
        out[k] = ((n + k + 1) % 2) ? -d : d;
    }
    return out;
}

Vec nambu_bracket(const std::vector<Expr>& f, const Vec& x) {
    const int n = static_cast<int>(x.size());
    return evaluate_all(nambu_bracket_expr(f, n), x);
}

}  // namespace descartes
