#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "descartes/errors.hpp"

namespace descartes::expr {

enum class Kind { Constant, Variable, Velocity, Parameter, Unary, Binary, Call };
enum class UnaryOp { Neg, Sin, Cos, Tan, Exp, Log, Sqrt, Abs };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };
enum class Func { Atan, Asin, Acos, Sinh, Cosh, Tanh, Sign, Atan2 };

class Expr;
struct Node;

/**
 * @brief Immutable handle to a scalar expression tree.
 *
 * Nodes are shared, so derived expressions (derivatives, compositions) form
 * DAGs. Copying an Expr is cheap.
 *
 * Variables come in two flavours: `xK` (position coordinate K-1) and `vK`
 * (velocity component K-1, used by trajectory monitors). Every other
 * identifier is a named parameter.
 */
class Expr {
public:
    Expr();  // constant 0

    static Expr constant(double c);
    static Expr variable(int index);
    static Expr velocity(int index);
    static Expr parameter(std::string name);

    // Raw constructors: build exactly the node requested, no folding.
    static Expr make_unary(UnaryOp op, Expr a, int offset = -1);
    static Expr make_binary(BinaryOp op, Expr a, Expr b, int offset = -1);
    static Expr make_call(Func f, std::vector<Expr> args, int offset = -1);
    static Expr make_constant(double c, int offset);
    static Expr make_variable(int index, int offset);
    static Expr make_velocity(int index, int offset);
    static Expr make_parameter(std::string name, int offset);

    const Node& node() const { return *node_; }
    const Node* id() const { return node_.get(); }
    Kind kind() const;

    bool is_constant() const;
    bool is_constant(double c) const;
    double constant_value() const;

private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

struct Node {
    Kind kind = Kind::Constant;
    double value = 0.0;
    int index = -1;
    std::string name;
    UnaryOp uop = UnaryOp::Neg;
    BinaryOp bop = BinaryOp::Add;
    Func fn = Func::Atan;
    std::vector<Expr> args;
    int offset = -1;
};

// Folding arithmetic. Trivial identities (x+0, x*1, x*0, constant
// subtrees) collapse on construction; nothing else is simplified.
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr operator+(const Expr& a, double b);
Expr operator+(double a, const Expr& b);
Expr operator-(const Expr& a, double b);
Expr operator-(double a, const Expr& b);
Expr operator*(const Expr& a, double b);
Expr operator*(double a, const Expr& b);
Expr operator/(const Expr& a, double b);
Expr operator/(double a, const Expr& b);

Expr pow(const Expr& base, const Expr& exponent);
Expr pow(const Expr& base, double exponent);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr tan(const Expr& a);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sqrt(const Expr& a);
Expr abs(const Expr& a);
Expr call(Func f, std::vector<Expr> args);

struct ParseOptions {
    int dimension = -1;         ///< reject xK with K > dimension when >= 0
    bool allow_velocity = true; ///< accept vK identifiers
};

/// Parse one expression. Throws ParseError.
Expr parse(std::string_view source, const ParseOptions& opt = {});

/// Serialize back to the grammar; parse(print(e)) is structurally equal to e
/// for every e produced by parse.
std::string print(const Expr& e);

/// Evaluation environment.
struct Env {
    std::vector<double> x;
    std::vector<double> v;
    std::map<std::string, double> params;
};

double evaluate(const Expr& e, const Env& env);

/// d e / d x^k (position coordinate k, zero based). Velocity variables are
/// treated as independent of positions.
Expr differentiate(const Expr& e, int k);

/// d e / d v^k (velocity component k, zero based).
Expr differentiate_velocity(const Expr& e, int k);

/// Replace named parameters by constants. Unlisted parameters are kept.
Expr bind(const Expr& e, const std::map<std::string, double>& params);

/// Replace position variable xK (K-1 = index in `repl`) by repl[K-1].
/// Variables beyond repl.size() are kept.
Expr substitute(const Expr& e, const std::vector<Expr>& repl);

/// Replace parameter `name` by an expression.
Expr substitute_parameter(const Expr& e, const std::string& name, const Expr& repl);

bool structurally_equal(const Expr& a, const Expr& b);
bool depends_on(const Expr& e, int k);
bool uses_velocity(const Expr& e);
std::set<std::string> parameters(const Expr& e);
/// Largest position index referenced, or -1.
int max_variable(const Expr& e);
/// Number of distinct nodes reachable from e.
std::size_t node_count(const Expr& e);

std::string_view name(UnaryOp op);
std::string_view name(BinaryOp op);
std::string_view name(Func f);
int arity(Func f);

/**
 * @brief Compiled evaluation tape for a batch of expressions.
 *
 * Shared subtrees are evaluated once. Parameters must be bound before
 * compilation; any remaining parameter raises UnboundSymbol. A Program is
 * immutable and can be run concurrently from several threads.
 */
class Program {
public:
    Program() = default;
    explicit Program(const std::vector<Expr>& outputs);

    std::size_t size() const { return outputs_.size(); }
    /// Number of position variables required (max index + 1).
    int dimension() const { return dim_; }
    int velocity_dimension() const { return vdim_; }

    /// x and v must hold at least dimension() / velocity_dimension() values.
    void run(const double* x, const double* v, double* out) const;
    std::vector<double> run(const std::vector<double>& x,
                            const std::vector<double>& v = {}) const;

private:
    struct Ins {
        int op;
        int a;
        int b;
        double c;
        int offset;
    };
    std::vector<Ins> code_;
    std::vector<int> outputs_;
    int dim_ = 0;
    int vdim_ = 0;
};

}  // namespace descartes::expr
