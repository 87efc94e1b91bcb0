#pragma once
// Independent numeric oracles used by the test suites. Nothing here is used by
// the library itself.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

// Central difference in coordinate k, step h = 1e-5 (1 + |x_k|).
inline double central_diff(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x, int k,
                           double scale = 1e-5) {
    double h = scale * (1.0 + std::fabs(x[k]));
    double x0 = x[k];
    x[k] = x0 + h;
    double fp = f(x);
    x[k] = x0 - h;
    double fm = f(x);
    return (fp - fm) / (2.0 * h);
}

// Five-point first derivative of a scalar function of one variable.
inline double five_point(const std::function<double(double)>& f, double t, double h) {
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12.0 * h);
}

// Laplace expansion along the first row; independent of any LU path.
inline double laplace_det(const Eigen::MatrixXd& m) {
    const int n = static_cast<int>(m.rows());
    if (n == 1) return m(0, 0);
    if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    double s = 0.0;
    for (int c = 0; c < n; ++c) {
        Eigen::MatrixXd minor(n - 1, n - 1);
        for (int i = 1; i < n; ++i) {
            int cc = 0;
            for (int j = 0; j < n; ++j) {
                if (j == c) continue;
                minor(i - 1, cc++) = m(i, j);
            }
        }
        s += ((c % 2) ? -1.0 : 1.0) * m(0, c) * laplace_det(minor);
    }
    return s;
}

// The (N+1)x(N+1) determinant with rows (basis ; M ; lambda row) expanded
// component-wise: component k replaces the basis row by e_k.
inline Eigen::VectorXd basis_row_determinant(const Eigen::MatrixXd& M, const Eigen::VectorXd& lambda) {
    const int n = static_cast<int>(M.rows());
    Eigen::VectorXd out(n);
    for (int k = 0; k < n; ++k) {
        Eigen::MatrixXd big(n + 1, n + 1);
        big.setZero();
        big(0, k + 1) = 1.0;
        for (int j = 0; j < n; ++j) {
            big(j + 1, 0) = lambda(j);
            for (int c = 0; c < n; ++c) big(j + 1, c + 1) = M(j, c);
        }
        out(k) = laplace_det(big);
    }
    return out;
}

inline double rel_err(double a, double b) { return std::fabs(a - b) / (1.0 + std::max(std::fabs(a), std::fabs(b))); }

// Random expression source over x1..x{dim}, depth-limited, built from
// operations that stay finite on [-1, 1]^dim.
class ExprGen {
public:
    ExprGen(unsigned seed, int dim) : rng_(seed), dim_(dim) {}

    std::string make(int depth) {
        if (depth <= 0 || pick(5) == 0) return leaf();
        switch (pick(11)) {
            case 0: return "(" + make(depth - 1) + " + " + make(depth - 1) + ")";
            case 1: return "(" + make(depth - 1) + " - " + make(depth - 1) + ")";
            case 2: return "(" + make(depth - 1) + " * " + make(depth - 1) + ")";
            case 3: return "(" + make(depth - 1) + ") / (1.5 + (" + make(depth - 1) + ")^2)";
            case 4: return "sin(" + make(depth - 1) + ")";
            case 5: return "cos(" + make(depth - 1) + ")";
            case 6: return "exp(sin(" + make(depth - 1) + "))";
            case 7: return "sqrt(1 + (" + make(depth - 1) + ")^2)";
            case 8: return "log(2 + cos(" + make(depth - 1) + "))";
            case 9: return "(" + make(depth - 1) + ")^3";
            default: return "-" + make(depth - 1);
        }
    }

private:
    std::mt19937 rng_;
    int dim_;
    int pick(int n) { return static_cast<int>(rng_() % static_cast<unsigned>(n)); }
    std::string leaf() {
        if (pick(3) == 0) {
            const char* c[] = {"0.5", "2", "1.25", "3", "0.75"};
            return c[pick(5)];
        }
        return "x" + std::to_string(1 + pick(dim_));
    }
};

// Parser corpus: hand-written edge cases plus 80 generated expressions.
inline std::vector<std::string> expr_corpus() {
    std::vector<std::string> c = {
        "sin(x1)*cos(x1)",
        "x1^2 + b*x1",
        "sqrt(x1*x1+x2*x2)+b*x1",
        "-x1^2",
        "(-x1)^2",
        "a - (b - c)",
        "a - b - c",
        "a / (b * c)",
        "a / b * c",
        "2^3^2",
        "(2^3)^2",
        "x1^-2",
        "x1 * -x2",
        "-(x1 + x2)",
        "--x1",
        "atan2(x2, x1) + sign(x1) - tanh(x3)",
        "exp(log(x1))",
        "1e-5*x1 + 2.5E3 - .5",
        "pi*x1",
        "x1^(a+1)",
        "v1*x2 - v2*x1",
        "abs(sin(x1) - cos(x2))/(1 + x3^2)",
    };
    ExprGen gen(1234u, 3);
    for (int i = 0; i < 80; ++i) c.push_back(gen.make(6));
    return c;
}

}  // namespace oracle
