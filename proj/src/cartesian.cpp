#include "descartes/cartesian.hpp"

#include <cmath>
#include <set>

namespace descartes {

using expr::bind;

namespace {

std::vector<Expr> bind_all(const std::vector<Expr>& es, const std::map<std::string, double>& p) {
    std::vector<Expr> out;
    out.reserve(es.size());
    for (const auto& e : es) out.push_back(bind(e, p));
    return out;
}

void collect_unbound(const Expr& e, std::set<std::string>& out) {
    for (const auto& s : expr::parameters(e)) out.insert(s);
}

bool equal_lists(const std::vector<Expr>& a, const std::vector<Expr>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!expr::structurally_equal(a[i], b[i])) return false;
    return true;
}

bool equal_opt(const std::optional<Expr>& a, const std::optional<Expr>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || expr::structurally_equal(*a, *b);
}

SystemDefinition bound_copy(const SystemDefinition& d) {
    SystemDefinition out = d;
    out.metric_upper = bind_all(d.metric_upper, d.params);
    for (auto& f : out.given) f.coeffs = bind_all(f.coeffs, d.params);
    for (auto& f : out.auxiliary) f.coeffs = bind_all(f.coeffs, d.params);
    out.lambdas = bind_all(d.lambdas, d.params);
    if (d.potential) out.potential = bind(*d.potential, d.params);
    if (d.chart_guard) out.chart_guard = bind(*d.chart_guard, d.params);
    return out;
}

}  // namespace

bool structurally_equal(const SystemDefinition& a0, const SystemDefinition& b0) {
    SystemDefinition a = bound_copy(a0), b = bound_copy(b0);
    if (a.dim != b.dim || a.given.size() != b.given.size() || a.auxiliary.size() != b.auxiliary.size()) return false;
    if (!equal_lists(a.metric_upper, b.metric_upper) || !equal_lists(a.lambdas, b.lambdas)) return false;
    for (std::size_t i = 0; i < a.given.size(); ++i)
        if (!equal_lists(a.given[i].coeffs, b.given[i].coeffs)) return false;
    for (std::size_t i = 0; i < a.auxiliary.size(); ++i)
        if (!equal_lists(a.auxiliary[i].coeffs, b.auxiliary[i].coeffs)) return false;
    return equal_opt(a.potential, b.potential) && equal_opt(a.chart_guard, b.chart_guard);
}

std::vector<OneFormField> default_auxiliary_forms(const std::vector<OneFormField>& given, const Vec& probe) {
    const int n = static_cast<int>(probe.size());
    std::vector<Vec> rows;
    for (const auto& g : given) rows.push_back(g.at(probe));
    std::vector<bool> used(n, false);
    std::vector<OneFormField> out;
    while (static_cast<int>(rows.size()) < n) {
        int best = -1;
        double best_vol = -1.0;
        for (int k = 0; k < n; ++k) {
            if (used[k]) continue;
            Mat R(rows.size() + 1, n);
            for (std::size_t i = 0; i < rows.size(); ++i) R.row(i) = rows[i].transpose();
            R.row(rows.size()) = Vec::Unit(n, k).transpose();
            double vol = (R * R.transpose()).determinant();
            if (vol > best_vol) {
                best_vol = vol;
                best = k;
            }
        }
        used[best] = true;
        rows.push_back(Vec::Unit(n, best));
        out.push_back(OneFormField::coordinate(best, n));
    }
    return out;
}

// ---------------------------------------------------------------- ConstraintSystem

ConstraintSystem::ConstraintSystem(SystemDefinition def) : def_(bound_copy(def)) {
    n_ = def_.dim;
    m_ = static_cast<int>(def_.given.size());
    if (n_ < 2) throw DimensionError("system dimension must be at least 2");
    if (m_ < 1 || m_ >= n_) throw DimensionError("constraint count M must satisfy 1 <= M < N");
    if (static_cast<int>(def_.auxiliary.size()) != n_ - m_)
        throw DimensionError("expected " + std::to_string(n_ - m_) + " auxiliary forms, got " +
                             std::to_string(def_.auxiliary.size()));
    if (static_cast<int>(def_.lambdas.size()) != n_ - m_)
        throw DimensionError("expected " + std::to_string(n_ - m_) + " lambda functions, got " +
                             std::to_string(def_.lambdas.size()));

    std::set<std::string> unbound;
    for (const auto& e : def_.metric_upper) collect_unbound(e, unbound);
    forms_ = def_.given;
    forms_.insert(forms_.end(), def_.auxiliary.begin(), def_.auxiliary.end());
    for (const auto& f : forms_) {
        if (f.dim() != n_) throw DimensionError("every 1-form needs exactly N coefficients");
        for (const auto& c : f.coeffs) collect_unbound(c, unbound);
    }
    for (const auto& e : def_.lambdas) collect_unbound(e, unbound);
    if (def_.potential) collect_unbound(*def_.potential, unbound);
    if (def_.chart_guard) collect_unbound(*def_.chart_guard, unbound);
    if (!unbound.empty()) {
        std::string names;
        for (const auto& s : unbound) names += (names.empty() ? "" : ", ") + s;
        throw UnboundSymbol("system '" + def_.name + "' has unbound parameters: " + names);
    }
    auto check_dim = [&](const Expr& e) {
        if (expr::max_variable(e) >= n_) throw DimensionError("expression references a coordinate beyond x" + std::to_string(n_));
        if (expr::uses_velocity(e)) throw DimensionError("system expressions may not reference velocities");
    };
    for (const auto& e : def_.metric_upper) check_dim(e);
    for (const auto& f : forms_)
        for (const auto& c : f.coeffs) check_dim(c);
    for (const auto& e : def_.lambdas) check_dim(e);
    if (def_.potential) check_dim(*def_.potential);

    metric_ = MetricField::from_upper(n_, def_.metric_upper);

    std::vector<std::vector<Expr>> Mx(n_);
    for (int j = 0; j < n_; ++j) Mx[j] = forms_[j].coeffs;
    upsilon_ = det_expr(Mx);

    // v^k = Σ_{j>M} C_jk λ_j / Υ  (adj(M) = Cᵀ)
    v_.assign(n_, Expr::constant(0.0));
    for (int j = m_; j < n_; ++j) {
        const Expr& lam = def_.lambdas[j - m_];
        if (lam.is_constant(0.0)) continue;
        for (int k = 0; k < n_; ++k) v_[k] = v_[k] + cofactor_expr(Mx, j, k) * lam;
    }
    for (int k = 0; k < n_; ++k) v_[k] = v_[k] / upsilon_;
    p_ = metric_.lower(v_);
    half_norm_ = 0.5 * metric_.inner(v_, v_);

    std::vector<Expr> flat;
    for (int j = 0; j < n_; ++j) flat.insert(flat.end(), forms_[j].coeffs.begin(), forms_[j].coeffs.end());
    frame_prog_ = expr::Program(flat);
    lambda_prog_ = expr::Program(def_.lambdas);
    v_prog_ = expr::Program(v_);
    auto H = d_one_form_expr(p_);
    std::vector<Expr> hup;
    for (int j = 0; j < n_; ++j)
        for (int k = j + 1; k < n_; ++k) hup.push_back(H[j][k]);
    H_prog_ = expr::Program(hup);
    std::vector<Expr> gk;
    for (int k = 0; k < n_; ++k) gk.push_back(expr::differentiate(half_norm_, k));
    gradk_prog_ = expr::Program(gk);
    if (def_.chart_guard) guard_prog_ = expr::Program({*def_.chart_guard});
}

Mat ConstraintSystem::frame_at(const Vec& x) const {
    if (x.size() != n_) throw DimensionError("point dimension differs from system dimension");
    std::vector<double> vals(static_cast<std::size_t>(n_ * n_));
    frame_prog_.run(x.data(), nullptr, vals.data());
    Mat M(n_, n_);
    for (int j = 0; j < n_; ++j)
        for (int k = 0; k < n_; ++k) M(j, k) = vals[j * n_ + k];
    return M;
}

Vec ConstraintSystem::lambda_tilde_at(const Vec& x) const {
    Vec lt = Vec::Zero(n_);
    std::vector<double> vals(def_.lambdas.size());
    lambda_prog_.run(x.data(), nullptr, vals.data());
    for (int j = m_; j < n_; ++j) lt(j) = vals[j - m_];
    return lt;
}

Vec ConstraintSystem::velocity_expr_at(const Vec& x) const {
    Vec v(n_);
    v_prog_.run(x.data(), nullptr, v.data());
    return v;
}

Mat ConstraintSystem::H_at(const Vec& x) const {
    std::vector<double> vals(static_cast<std::size_t>(n_ * (n_ - 1) / 2));
    H_prog_.run(x.data(), nullptr, vals.data());
    Mat H = Mat::Zero(n_, n_);
    std::size_t q = 0;
    for (int j = 0; j < n_; ++j)
        for (int k = j + 1; k < n_; ++k, ++q) {
            H(j, k) = vals[q];
            H(k, j) = -vals[q];
        }
    return H;
}

Vec ConstraintSystem::grad_half_norm_at(const Vec& x) const {
    Vec g(n_);
    gradk_prog_.run(x.data(), nullptr, g.data());
    return g;
}

void ConstraintSystem::check_chart(const Vec& x) const {
    if (!def_.chart_guard) return;
    double g = 0.0;
    guard_prog_.run(x.data(), nullptr, &g);
    if (std::fabs(g) < 1e-6) throw ChartSingular("system '" + def_.name + "': point within 1e-6 of the chart singularity");
}

// ---------------------------------------------------------------- evaluations

FrameEval frame_matrix(const ConstraintSystem& sys, const Vec& x) {
    FrameEval fe;
    fe.x = x;
    fe.M = sys.frame_at(x);
    Eigen::PartialPivLU<Mat> lu(fe.M);
    fe.upsilon = lu.determinant();
    fe.scale = 1.0;
    for (int j = 0; j < fe.M.rows(); ++j) fe.scale *= fe.M.row(j).norm();
    if (!(std::fabs(fe.upsilon) > kFrameSingularTol * fe.scale))
        throw FrameSingular("frame determinant vanishes (|Υ| = " + std::to_string(std::fabs(fe.upsilon)) + ")",
                            fe.upsilon, fe.scale);
    fe.v = lu.solve(sys.lambda_tilde_at(x));
    fe.p = sys.metric().at(x) * fe.v;
    return fe;
}

Vec cartesian_velocity(const ConstraintSystem& sys, const Vec& x) { return frame_matrix(sys, x).v; }

namespace {

struct Structure {
    FrameEval fe;
    Mat H;
    Mat A;
    Eigen::PartialPivLU<Mat> lu;
};

Structure structure(const ConstraintSystem& sys, const Vec& x) {
    Structure s;
    s.fe = frame_matrix(sys, x);
    s.lu.compute(s.fe.M);
    s.H = sys.H_at(x);
    Mat Minv = s.lu.inverse();
    s.A = Minv.transpose() * s.H * Minv;
    return s;
}

}  // namespace

Mat structure_matrix(const ConstraintSystem& sys, const Vec& x) { return structure(sys, x).A; }

LambdaEval lambda_vector(const ConstraintSystem& sys, const Vec& x) {
    Structure s = structure(sys, x);
    LambdaEval le;
    le.x = x;
    le.lambda_tilde = sys.lambda_tilde_at(x);
    le.A = s.A;
    le.Lambda = s.A.transpose() * le.lambda_tilde;
    Vec v = sys.velocity_expr_at(x);
    le.tau = s.H.transpose() * v;
    le.Lambda2 = s.lu.transpose().solve(le.tau);
    double scale = std::max(1.0, s.A.cwiseAbs().maxCoeff() * le.lambda_tilde.cwiseAbs().maxCoeff());
    double gap = (le.Lambda - le.Lambda2).cwiseAbs().maxCoeff();
    if (!(gap <= kDualRouteTol * scale))
        throw InternalInconsistency("reaction coefficients disagree between the two routes (gap " + std::to_string(gap) +
                                    ")");
    return le;
}

Vec consistency_residual(const ConstraintSystem& sys, const Vec& x) {
    LambdaEval le = lambda_vector(sys, x);
    return le.Lambda.tail(sys.dim() - sys.constraints());
}

Vec reaction_covector(const ConstraintSystem& sys, const Vec& x) {
    LambdaEval le = lambda_vector(sys, x);
    Mat M = sys.frame_at(x);
    Vec r = Vec::Zero(sys.dim());
    for (int j = 0; j < sys.constraints(); ++j) r += le.Lambda(j) * M.row(j).transpose();
    return r;
}

std::vector<Expr> cross_expr(const std::vector<Expr>& a, const std::vector<Expr>& w) {
    if (a.size() != 3 || w.size() != 3) throw DimensionError("cross product requires dimension 3");
    return {a[1] * w[2] - a[2] * w[1], a[2] * w[0] - a[0] * w[2], a[0] * w[1] - a[1] * w[0]};
}

CrossField cross_field_3d(const OneFormField& a, const std::vector<Expr>& w, const MetricField& G, const Vec& x) {
    if (a.dim() != 3 || G.dim() != 3 || x.size() != 3) throw DimensionError("cross_field_3d requires dimension 3");
    VectorFieldDef v{cross_expr(a.coeffs, w)};
    CrossField out;
    out.v = v.at(x);
    out.residual = a.at(x).dot(rot3(v, G, x));
    return out;
}

double kummer_residual(const VectorFieldDef& v, const MetricField& G, const Vec& x) {
    if (v.dim() != 3) throw DimensionError("kummer_residual requires dimension 3");
    Eigen::Vector3d a = v.at(x);
    Eigen::Vector3d r = rot3(v, G, x);
    return a.cross(r).norm();
}

}  // namespace descartes
