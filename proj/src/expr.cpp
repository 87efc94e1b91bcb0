#include "descartes/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <functional>
#include <numbers>
#include <unordered_map>

namespace descartes::expr {

namespace {

std::shared_ptr<Node> fresh(Kind k, int offset) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->offset = offset;
    return n;
}

struct FuncInfo {
    const char* name;
    bool unary;
    UnaryOp uop;
    Func fn;
    int arity;
};

constexpr std::array<FuncInfo, 15> kFuncs = {{
    {"sin", true, UnaryOp::Sin, Func::Atan, 1},
    {"cos", true, UnaryOp::Cos, Func::Atan, 1},
    {"tan", true, UnaryOp::Tan, Func::Atan, 1},
    {"exp", true, UnaryOp::Exp, Func::Atan, 1},
    {"log", true, UnaryOp::Log, Func::Atan, 1},
    {"sqrt", true, UnaryOp::Sqrt, Func::Atan, 1},
    {"abs", true, UnaryOp::Abs, Func::Atan, 1},
    {"atan", false, UnaryOp::Neg, Func::Atan, 1},
    {"asin", false, UnaryOp::Neg, Func::Asin, 1},
    {"acos", false, UnaryOp::Neg, Func::Acos, 1},
    {"sinh", false, UnaryOp::Neg, Func::Sinh, 1},
    {"cosh", false, UnaryOp::Neg, Func::Cosh, 1},
    {"tanh", false, UnaryOp::Neg, Func::Tanh, 1},
    {"sign", false, UnaryOp::Neg, Func::Sign, 1},
    {"atan2", false, UnaryOp::Neg, Func::Atan2, 2},
}};

const FuncInfo* find_func(std::string_view s) {
    for (const auto& f : kFuncs)
        if (s == f.name) return &f;
    return nullptr;
}

}  // namespace

// ---------------------------------------------------------------- Expr

Expr::Expr() : node_(fresh(Kind::Constant, -1)) {}

Expr Expr::constant(double c) { return make_constant(c, -1); }
Expr Expr::variable(int i) { return make_variable(i, -1); }
Expr Expr::velocity(int i) { return make_velocity(i, -1); }
Expr Expr::parameter(std::string n) { return make_parameter(std::move(n), -1); }

Expr Expr::make_constant(double c, int offset) {
    auto n = fresh(Kind::Constant, offset);
    n->value = c;
    return Expr(std::move(n));
}

Expr Expr::make_variable(int i, int offset) {
    if (i < 0) throw DimensionError("negative coordinate index");
    auto n = fresh(Kind::Variable, offset);
    n->index = i;
    return Expr(std::move(n));
}

Expr Expr::make_velocity(int i, int offset) {
    if (i < 0) throw DimensionError("negative velocity index");
    auto n = fresh(Kind::Velocity, offset);
    n->index = i;
    return Expr(std::move(n));
}

Expr Expr::make_parameter(std::string name, int offset) {
    auto n = fresh(Kind::Parameter, offset);
    n->name = std::move(name);
    return Expr(std::move(n));
}

Expr Expr::make_unary(UnaryOp op, Expr a, int offset) {
    auto n = fresh(Kind::Unary, offset);
    n->uop = op;
    n->args.push_back(std::move(a));
    return Expr(std::move(n));
}

Expr Expr::make_binary(BinaryOp op, Expr a, Expr b, int offset) {
    auto n = fresh(Kind::Binary, offset);
    n->bop = op;
    n->args.push_back(std::move(a));
    n->args.push_back(std::move(b));
    return Expr(std::move(n));
}

Expr Expr::make_call(Func f, std::vector<Expr> args, int offset) {
    if (static_cast<int>(args.size()) != arity(f))
        throw Error(std::string("arity mismatch for ") + std::string(name(f)));
    auto n = fresh(Kind::Call, offset);
    n->fn = f;
    n->args = std::move(args);
    return Expr(std::move(n));
}

Kind Expr::kind() const { return node_->kind; }
bool Expr::is_constant() const { return node_->kind == Kind::Constant; }
bool Expr::is_constant(double c) const { return is_constant() && node_->value == c; }
double Expr::constant_value() const { return node_->value; }

std::string_view name(UnaryOp op) {
    switch (op) {
        case UnaryOp::Neg: return "neg";
        case UnaryOp::Sin: return "sin";
        case UnaryOp::Cos: return "cos";
        case UnaryOp::Tan: return "tan";
        case UnaryOp::Exp: return "exp";
        case UnaryOp::Log: return "log";
        case UnaryOp::Sqrt: return "sqrt";
        case UnaryOp::Abs: return "abs";
    }
    return "?";
}

std::string_view name(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
        case BinaryOp::Pow: return "^";
    }
    return "?";
}

std::string_view name(Func f) {
    switch (f) {
        case Func::Atan: return "atan";
        case Func::Asin: return "asin";
        case Func::Acos: return "acos";
        case Func::Sinh: return "sinh";
        case Func::Cosh: return "cosh";
        case Func::Tanh: return "tanh";
        case Func::Sign: return "sign";
        case Func::Atan2: return "atan2";
    }
    return "?";
}

int arity(Func f) { return f == Func::Atan2 ? 2 : 1; }

// ---------------------------------------------------------------- scalar kernels

namespace {

double apply_unary(UnaryOp op, double a, int offset) {
    switch (op) {
        case UnaryOp::Neg: return -a;
        case UnaryOp::Sin: return std::sin(a);
        case UnaryOp::Cos: return std::cos(a);
        case UnaryOp::Tan: return std::tan(a);
        case UnaryOp::Exp: return std::exp(a);
        case UnaryOp::Log:
            if (!(a > 0.0)) throw DomainError("log of non-positive value", offset);
            return std::log(a);
        case UnaryOp::Sqrt:
            if (a < 0.0 || std::isnan(a)) throw DomainError("sqrt of negative value", offset);
            return std::sqrt(a);
        case UnaryOp::Abs: return std::fabs(a);
    }
    return 0.0;
}

double apply_binary(BinaryOp op, double a, double b, int offset) {
    switch (op) {
        case BinaryOp::Add: return a + b;
        case BinaryOp::Sub: return a - b;
        case BinaryOp::Mul: return a * b;
        case BinaryOp::Div:
            if (b == 0.0) throw DomainError("division by zero", offset);
            return a / b;
        case BinaryOp::Pow: {
            if (b == 2.0) return a * a;
            if (b == 1.0) return a;
            if (a == 0.0 && b < 0.0) throw DomainError("division by zero in pow", offset);
            if (a < 0.0 && std::floor(b) != b)
                throw DomainError("negative base with fractional exponent", offset);
            return std::pow(a, b);
        }
    }
    return 0.0;
}

double sgn(double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); }

double apply_call(Func f, double a, double b, int offset) {
    switch (f) {
        case Func::Atan: return std::atan(a);
        case Func::Asin:
            if (a < -1.0 || a > 1.0) throw DomainError("asin argument outside [-1,1]", offset);
            return std::asin(a);
        case Func::Acos:
            if (a < -1.0 || a > 1.0) throw DomainError("acos argument outside [-1,1]", offset);
            return std::acos(a);
        case Func::Sinh: return std::sinh(a);
        case Func::Cosh: return std::cosh(a);
        case Func::Tanh: return std::tanh(a);
        case Func::Sign: return sgn(a);
        case Func::Atan2: return std::atan2(a, b);
    }
    return 0.0;
}

Expr fold_constant(double v) { return Expr::constant(v); }

}  // namespace

// ---------------------------------------------------------------- folding builders

Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_constant(0.0)) return b;
    if (b.is_constant(0.0)) return a;
    if (a.is_constant() && b.is_constant()) return fold_constant(a.constant_value() + b.constant_value());
    if (b.kind() == Kind::Unary && b.node().uop == UnaryOp::Neg) return a - b.node().args[0];
    return Expr::make_binary(BinaryOp::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
    if (b.is_constant(0.0)) return a;
    if (a.is_constant(0.0)) return -b;
    if (a.is_constant() && b.is_constant()) return fold_constant(a.constant_value() - b.constant_value());
    if (b.kind() == Kind::Unary && b.node().uop == UnaryOp::Neg) return a + b.node().args[0];
    return Expr::make_binary(BinaryOp::Sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
    if (a.is_constant(1.0)) return b;
    if (b.is_constant(1.0)) return a;
    if (a.is_constant(-1.0)) return -b;
    if (b.is_constant(-1.0)) return -a;
    if (a.is_constant() && b.is_constant()) return fold_constant(a.constant_value() * b.constant_value());
    return Expr::make_binary(BinaryOp::Mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
    if (b.is_constant(1.0)) return a;
    if (a.is_constant(0.0) && !b.is_constant(0.0)) return Expr::constant(0.0);
    if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0)
        return fold_constant(a.constant_value() / b.constant_value());
    return Expr::make_binary(BinaryOp::Div, a, b);
}

Expr operator-(const Expr& a) {
    if (a.is_constant()) return fold_constant(-a.constant_value());
    if (a.kind() == Kind::Unary && a.node().uop == UnaryOp::Neg) return a.node().args[0];
    return Expr::make_unary(UnaryOp::Neg, a);
}

Expr operator+(const Expr& a, double b) { return a + Expr::constant(b); }
Expr operator+(double a, const Expr& b) { return Expr::constant(a) + b; }
Expr operator-(const Expr& a, double b) { return a - Expr::constant(b); }
Expr operator-(double a, const Expr& b) { return Expr::constant(a) - b; }
Expr operator*(const Expr& a, double b) { return a * Expr::constant(b); }
Expr operator*(double a, const Expr& b) { return Expr::constant(a) * b; }
Expr operator/(const Expr& a, double b) { return a / Expr::constant(b); }
Expr operator/(double a, const Expr& b) { return Expr::constant(a) / b; }

Expr pow(const Expr& base, const Expr& e) {
    if (uses_velocity(e) || max_variable(e) >= 0)
        throw Error("pow exponent must not depend on coordinates");
    if (e.is_constant(1.0)) return base;
    if (e.is_constant(0.0)) return Expr::constant(1.0);
    if (base.is_constant() && e.is_constant()) {
        double b = base.constant_value(), x = e.constant_value();
        if (!(b < 0.0 && std::floor(x) != x) && !(b == 0.0 && x < 0.0)) return fold_constant(std::pow(b, x));
    }
    return Expr::make_binary(BinaryOp::Pow, base, e);
}

Expr pow(const Expr& base, double e) { return pow(base, Expr::constant(e)); }

namespace {
Expr unary_fold(UnaryOp op, const Expr& a) {
    if (a.is_constant()) {
        double v = a.constant_value();
        bool ok = !(op == UnaryOp::Log && !(v > 0.0)) && !(op == UnaryOp::Sqrt && v < 0.0);
        if (ok) return fold_constant(apply_unary(op, v, -1));
    }
    return Expr::make_unary(op, a);
}
}  // namespace

Expr sin(const Expr& a) { return unary_fold(UnaryOp::Sin, a); }
Expr cos(const Expr& a) { return unary_fold(UnaryOp::Cos, a); }
Expr tan(const Expr& a) { return unary_fold(UnaryOp::Tan, a); }
Expr exp(const Expr& a) { return unary_fold(UnaryOp::Exp, a); }
Expr log(const Expr& a) { return unary_fold(UnaryOp::Log, a); }
Expr sqrt(const Expr& a) { return unary_fold(UnaryOp::Sqrt, a); }
Expr abs(const Expr& a) { return unary_fold(UnaryOp::Abs, a); }

Expr call(Func f, std::vector<Expr> args) {
    bool all_const = true;
    for (const auto& a : args) all_const = all_const && a.is_constant();
    if (all_const && f != Func::Asin && f != Func::Acos) {
        double a = args[0].constant_value();
        double b = args.size() > 1 ? args[1].constant_value() : 0.0;
        return fold_constant(apply_call(f, a, b, -1));
    }
    return Expr::make_call(f, std::move(args));
}

// ---------------------------------------------------------------- parser

namespace {

class Parser {
public:
    Parser(std::string_view s, const ParseOptions& o) : src_(s), opt_(o) {}

    Expr parse_all() {
        skip();
        if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
        Expr e = parse_sum();
        skip();
        if (pos_ < src_.size()) throw ParseError(std::string("unexpected character '") + src_[pos_] + "'", pos_);
        return e;
    }

private:
    std::string_view src_;
    ParseOptions opt_;
    std::size_t pos_ = 0;

    void skip() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
            ++pos_;
    }

    bool peek(char c) {
        skip();
        return pos_ < src_.size() && src_[pos_] == c;
    }

    Expr parse_sum() {
        Expr lhs = parse_product();
        for (;;) {
            skip();
            if (pos_ >= src_.size()) return lhs;
            char c = src_[pos_];
            if (c != '+' && c != '-') return lhs;
            int at = static_cast<int>(pos_++);
            Expr rhs = parse_product();
            lhs = Expr::make_binary(c == '+' ? BinaryOp::Add : BinaryOp::Sub, lhs, rhs, at);
        }
    }

    Expr parse_product() {
        Expr lhs = parse_unary();
        for (;;) {
            skip();
            if (pos_ >= src_.size()) return lhs;
            char c = src_[pos_];
            if (c != '*' && c != '/') return lhs;
            int at = static_cast<int>(pos_++);
            Expr rhs = parse_unary();
            lhs = Expr::make_binary(c == '*' ? BinaryOp::Mul : BinaryOp::Div, lhs, rhs, at);
        }
    }

    Expr parse_unary() {
        skip();
        if (pos_ < src_.size() && src_[pos_] == '-') {
            int at = static_cast<int>(pos_++);
            return Expr::make_unary(UnaryOp::Neg, parse_unary(), at);
        }
        if (pos_ < src_.size() && src_[pos_] == '+') {
            ++pos_;
            return parse_unary();
        }
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_primary();
        skip();
        if (pos_ < src_.size() && src_[pos_] == '^') {
            int at = static_cast<int>(pos_++);
            std::size_t exp_start = pos_;
            Expr e = parse_unary();
            if (uses_velocity(e) || max_variable(e) >= 0)
                throw ParseError("pow exponent must be constant", exp_start);
            return Expr::make_binary(BinaryOp::Pow, base, e, at);
        }
        return base;
    }

    Expr parse_number() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t save = pos_++;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            } else {
                pos_ = save;
            }
        }
        double value = 0.0;
        auto res = std::from_chars(src_.data() + start, src_.data() + pos_, value);
        if (res.ec != std::errc() || res.ptr != src_.data() + pos_)
            throw ParseError("malformed number", start);
        return Expr::make_constant(value, static_cast<int>(start));
    }

    static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
    static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

    Expr parse_primary() {
        skip();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (c == '(') {
            ++pos_;
            Expr e = parse_sum();
            if (!peek(')')) throw ParseError("expected ')'", pos_);
            ++pos_;
            return e;
        }
        if (ident_start(c)) {
            std::size_t start = pos_;
            while (pos_ < src_.size() && ident_char(src_[pos_])) ++pos_;
            std::string_view id = src_.substr(start, pos_ - start);
            int at = static_cast<int>(start);
            if (peek('(')) {
                const FuncInfo* f = find_func(id);
                if (!f) throw ParseError("unknown function '" + std::string(id) + "'", start);
                ++pos_;
                std::vector<Expr> args;
                if (!peek(')')) {
                    args.push_back(parse_sum());
                    while (peek(',')) {
                        ++pos_;
                        args.push_back(parse_sum());
                    }
                }
                if (!peek(')')) throw ParseError("expected ')' or ','", pos_);
                ++pos_;
                if (static_cast<int>(args.size()) != f->arity)
                    throw ParseError("arity mismatch: " + std::string(id) + " takes " + std::to_string(f->arity) +
                                         " argument(s), got " + std::to_string(args.size()),
                                     start);
                if (f->unary) return Expr::make_unary(f->uop, args[0], at);
                return Expr::make_call(f->fn, std::move(args), at);
            }
            if (find_func(id)) throw ParseError("function '" + std::string(id) + "' used without arguments", start);
            if (id == "pi") return Expr::make_constant(std::numbers::pi, at);
            if (id.size() >= 2 && (id[0] == 'x' || id[0] == 'v')) {
                bool digits = id[1] != '0';
                for (std::size_t i = 1; i < id.size(); ++i) digits = digits && std::isdigit(static_cast<unsigned char>(id[i]));
                if (digits) {
                    int k = 0;
                    std::from_chars(id.data() + 1, id.data() + id.size(), k);
                    if (opt_.dimension >= 0 && k > opt_.dimension)
                        throw ParseError("coordinate " + std::string(id) + " outside chart dimension " +
                                             std::to_string(opt_.dimension),
                                         start);
                    if (id[0] == 'x') return Expr::make_variable(k - 1, at);
                    if (!opt_.allow_velocity) throw ParseError("velocity variable not allowed here", start);
                    return Expr::make_velocity(k - 1, at);
                }
            }
            return Expr::make_parameter(std::string(id), at);
        }
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }
};

}  // namespace

Expr parse(std::string_view source, const ParseOptions& opt) { return Parser(source, opt).parse_all(); }

// ---------------------------------------------------------------- printer

namespace {

int precedence(const Expr& e) {
    switch (e.kind()) {
        case Kind::Binary:
            switch (e.node().bop) {
                case BinaryOp::Add:
                case BinaryOp::Sub: return 1;
                case BinaryOp::Mul:
                case BinaryOp::Div: return 2;
                case BinaryOp::Pow: return 4;
            }
            return 0;
        case Kind::Unary: return e.node().uop == UnaryOp::Neg ? 3 : 5;
        default: return 5;
    }
}

std::string number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (std::signbit(v)) return "(" + s + ")";
    return s;
}

void emit(const Expr& e, std::string& out);

void emit_wrapped(const Expr& e, bool wrap, std::string& out) {
    if (wrap) out += '(';
    emit(e, out);
    if (wrap) out += ')';
}

void emit(const Expr& e, std::string& out) {
    const Node& n = e.node();
    switch (n.kind) {
        case Kind::Constant: out += number(n.value); return;
        case Kind::Variable: out += "x" + std::to_string(n.index + 1); return;
        case Kind::Velocity: out += "v" + std::to_string(n.index + 1); return;
        case Kind::Parameter: out += n.name; return;
        case Kind::Unary:
            if (n.uop == UnaryOp::Neg) {
                out += '-';
                emit_wrapped(n.args[0], precedence(n.args[0]) < 4, out);
            } else {
                out += name(n.uop);
                out += '(';
                emit(n.args[0], out);
                out += ')';
            }
            return;
        case Kind::Call:
            out += name(n.fn);
            out += '(';
            for (std::size_t i = 0; i < n.args.size(); ++i) {
                if (i) out += ", ";
                emit(n.args[i], out);
            }
            out += ')';
            return;
        case Kind::Binary: {
            int p = precedence(e);
            const Expr& l = n.args[0];
            const Expr& r = n.args[1];
            if (n.bop == BinaryOp::Pow) {
                emit_wrapped(l, precedence(l) <= 4, out);
                out += "^";
                emit_wrapped(r, precedence(r) < 5, out);
                return;
            }
            emit_wrapped(l, precedence(l) < p, out);
            out += ' ';
            out += name(n.bop);
            out += ' ';
            emit_wrapped(r, precedence(r) <= p && precedence(r) != 3, out);
            return;
        }
    }
}

}  // namespace

std::string print(const Expr& e) {
    std::string out;
    emit(e, out);
    return out;
}

// ---------------------------------------------------------------- evaluation

double evaluate(const Expr& e, const Env& env) {
    const Node& n = e.node();
    switch (n.kind) {
        case Kind::Constant: return n.value;
        case Kind::Variable:
            if (n.index >= static_cast<int>(env.x.size()))
                throw UnboundSymbol("coordinate x" + std::to_string(n.index + 1) + " is not bound");
            return env.x[n.index];
        case Kind::Velocity:
            if (n.index >= static_cast<int>(env.v.size()))
                throw UnboundSymbol("velocity v" + std::to_string(n.index + 1) + " is not bound");
            return env.v[n.index];
        case Kind::Parameter: {
            auto it = env.params.find(n.name);
            if (it == env.params.end()) throw UnboundSymbol("parameter '" + n.name + "' is not bound");
            return it->second;
        }
        case Kind::Unary: return apply_unary(n.uop, evaluate(n.args[0], env), n.offset);
        case Kind::Binary:
            return apply_binary(n.bop, evaluate(n.args[0], env), evaluate(n.args[1], env), n.offset);
        case Kind::Call:
            return apply_call(n.fn, evaluate(n.args[0], env), n.args.size() > 1 ? evaluate(n.args[1], env) : 0.0,
                              n.offset);
    }
    return 0.0;
}

// ---------------------------------------------------------------- structure queries

namespace {

template <class F>
void visit_unique(const Expr& e, F&& f) {
    std::unordered_map<const Node*, bool> seen;
    std::vector<const Expr*> stack{&e};
    while (!stack.empty()) {
        const Expr* cur = stack.back();
        stack.pop_back();
        if (!seen.emplace(cur->id(), true).second) continue;
        f(*cur);
        for (const auto& a : cur->node().args) stack.push_back(&a);
    }
}

}  // namespace

bool depends_on(const Expr& e, int k) {
    bool found = false;
    visit_unique(e, [&](const Expr& s) {
        if (s.kind() == Kind::Variable && s.node().index == k) found = true;
    });
    return found;
}

bool uses_velocity(const Expr& e) {
    bool found = false;
    visit_unique(e, [&](const Expr& s) {
        if (s.kind() == Kind::Velocity) found = true;
    });
    return found;
}

std::set<std::string> parameters(const Expr& e) {
    std::set<std::string> out;
    visit_unique(e, [&](const Expr& s) {
        if (s.kind() == Kind::Parameter) out.insert(s.node().name);
    });
    return out;
}

int max_variable(const Expr& e) {
    int m = -1;
    visit_unique(e, [&](const Expr& s) {
        if (s.kind() == Kind::Variable) m = std::max(m, s.node().index);
    });
    return m;
}

std::size_t node_count(const Expr& e) {
    std::size_t c = 0;
    visit_unique(e, [&](const Expr&) { ++c; });
    return c;
}

bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.id() == b.id()) return true;
    const Node& x = a.node();
    const Node& y = b.node();
    if (x.kind != y.kind || x.args.size() != y.args.size()) return false;
    switch (x.kind) {
        case Kind::Constant:
            if (std::memcmp(&x.value, &y.value, sizeof(double)) != 0) return false;
            break;
        case Kind::Variable:
        case Kind::Velocity:
            if (x.index != y.index) return false;
            break;
        case Kind::Parameter:
            if (x.name != y.name) return false;
            break;
        case Kind::Unary:
            if (x.uop != y.uop) return false;
            break;
        case Kind::Binary:
            if (x.bop != y.bop) return false;
            break;
        case Kind::Call:
            if (x.fn != y.fn) return false;
            break;
    }
    for (std::size_t i = 0; i < x.args.size(); ++i)
        if (!structurally_equal(x.args[i], y.args[i])) return false;
    return true;
}

// ---------------------------------------------------------------- rewriting

namespace {

// Generic memoized bottom-up rewrite. `leaf` returns a replacement for a leaf
// node or the node itself; interior nodes are rebuilt with folding builders
// only when a child changed.
class Rewriter {
public:
    explicit Rewriter(std::function<Expr(const Expr&)> leaf) : leaf_(std::move(leaf)) {}

    Expr operator()(const Expr& e) {
        auto it = memo_.find(e.id());
        if (it != memo_.end()) return it->second;
        Expr out = rewrite(e);
        memo_.emplace(e.id(), out);
        return out;
    }

private:
    std::function<Expr(const Expr&)> leaf_;
    std::unordered_map<const Node*, Expr> memo_;

    Expr rewrite(const Expr& e) {
        const Node& n = e.node();
        if (n.args.empty()) return leaf_(e);
        std::vector<Expr> kids;
        bool changed = false;
        for (const auto& a : n.args) {
            kids.push_back((*this)(a));
            changed = changed || kids.back().id() != a.id();
        }
        if (!changed) return e;
        switch (n.kind) {
            case Kind::Unary:
                if (n.uop == UnaryOp::Neg) return -kids[0];
                return unary_fold(n.uop, kids[0]);
            case Kind::Binary:
                switch (n.bop) {
                    case BinaryOp::Add: return kids[0] + kids[1];
                    case BinaryOp::Sub: return kids[0] - kids[1];
                    case BinaryOp::Mul: return kids[0] * kids[1];
                    case BinaryOp::Div: return kids[0] / kids[1];
                    case BinaryOp::Pow: return pow(kids[0], kids[1]);
                }
                break;
            case Kind::Call: return call(n.fn, kids);
            default: break;
        }
        return e;
    }
};

}  // namespace

Expr bind(const Expr& e, const std::map<std::string, double>& params) {
    Rewriter rw([&](const Expr& leaf) {
        if (leaf.kind() == Kind::Parameter) {
            auto it = params.find(leaf.node().name);
            if (it != params.end()) return Expr::constant(it->second);
        }
        return leaf;
    });
    return rw(e);
}

Expr substitute(const Expr& e, const std::vector<Expr>& repl) {
    Rewriter rw([&](const Expr& leaf) {
        if (leaf.kind() == Kind::Variable && leaf.node().index < static_cast<int>(repl.size()))
            return repl[leaf.node().index];
        return leaf;
    });
    return rw(e);
}

Expr substitute_parameter(const Expr& e, const std::string& pname, const Expr& repl) {
    Rewriter rw([&](const Expr& leaf) {
        if (leaf.kind() == Kind::Parameter && leaf.node().name == pname) return repl;
        return leaf;
    });
    return rw(e);
}

// ---------------------------------------------------------------- differentiation

namespace {

class Differentiator {
public:
    Differentiator(int k, Kind wrt) : k_(k), wrt_(wrt) {}

    Expr operator()(const Expr& e) {
        auto it = memo_.find(e.id());
        if (it != memo_.end()) return it->second;
        Expr d = derive(e);
        memo_.emplace(e.id(), d);
        return d;
    }

private:
    int k_;
    Kind wrt_;
    std::unordered_map<const Node*, Expr> memo_;

    Expr derive(const Expr& e) {
        const Node& n = e.node();
        switch (n.kind) {
            case Kind::Constant:
            case Kind::Parameter: return Expr::constant(0.0);
            case Kind::Variable:
            case Kind::Velocity: return Expr::constant(n.kind == wrt_ && n.index == k_ ? 1.0 : 0.0);
            case Kind::Unary: {
                const Expr& u = n.args[0];
                Expr du = (*this)(u);
                if (du.is_constant(0.0)) return du;
                switch (n.uop) {
                    case UnaryOp::Neg: return -du;
                    case UnaryOp::Sin: return cos(u) * du;
                    case UnaryOp::Cos: return -(sin(u) * du);
                    case UnaryOp::Tan: return du / pow(cos(u), 2.0);
                    case UnaryOp::Exp: return e * du;
                    case UnaryOp::Log: return du / u;
                    case UnaryOp::Sqrt: return du / (2.0 * e);
                    case UnaryOp::Abs: return call(Func::Sign, {u}) * du;
                }
                break;
            }
            case Kind::Binary: {
                const Expr& a = n.args[0];
                const Expr& b = n.args[1];
                if (n.bop == BinaryOp::Pow) {
                    Expr da = (*this)(a);
                    if (da.is_constant(0.0)) return da;
                    return b * pow(a, b - 1.0) * da;
                }
                Expr da = (*this)(a);
                Expr db = (*this)(b);
                switch (n.bop) {
                    case BinaryOp::Add: return da + db;
                    case BinaryOp::Sub: return da - db;
                    case BinaryOp::Mul: return da * b + a * db;
                    case BinaryOp::Div:
                        if (db.is_constant(0.0)) return da / b;
                        return (da * b - a * db) / pow(b, 2.0);
                    default: break;
                }
                break;
            }
            case Kind::Call: {
                const Expr& u = n.args[0];
                Expr du = (*this)(u);
                switch (n.fn) {
                    case Func::Atan2: {
                        const Expr& x = n.args[1];
                        Expr dx = (*this)(x);
                        if (du.is_constant(0.0) && dx.is_constant(0.0)) return du;
                        return (x * du - u * dx) / (pow(x, 2.0) + pow(u, 2.0));
                    }
                    default: break;
                }
                if (du.is_constant(0.0)) return du;
                switch (n.fn) {
                    case Func::Atan: return du / (1.0 + pow(u, 2.0));
                    case Func::Asin: return du / sqrt(1.0 - pow(u, 2.0));
                    case Func::Acos: return -(du / sqrt(1.0 - pow(u, 2.0)));
                    case Func::Sinh: return call(Func::Cosh, {u}) * du;
                    case Func::Cosh: return call(Func::Sinh, {u}) * du;
                    case Func::Tanh: return (1.0 - pow(e, 2.0)) * du;
                    case Func::Sign: return Expr::constant(0.0);
                    default: break;
                }
                break;
            }
        }
        return Expr::constant(0.0);
    }
};

}  // namespace

Expr differentiate(const Expr& e, int k) {
    if (k < 0) throw DimensionError("negative coordinate index");
    return Differentiator(k, Kind::Variable)(e);
}

Expr differentiate_velocity(const Expr& e, int k) {
    if (k < 0) throw DimensionError("negative velocity index");
    return Differentiator(k, Kind::Velocity)(e);
}

// ---------------------------------------------------------------- compiled tape

namespace {

enum Op : int {
    OpConst,
    OpVar,
    OpVel,
    OpUnary0,                          // + UnaryOp
    OpBinary0 = OpUnary0 + 8,          // + BinaryOp
    OpCall0 = OpBinary0 + 5,           // + Func
};

}  // namespace

Program::Program(const std::vector<Expr>& outputs) {
    std::unordered_map<const Node*, int> slot;
    // Iterative post-order so deep trees do not exhaust the stack.
    for (const auto& root : outputs) {
        std::vector<std::pair<const Expr*, bool>> stack{{&root, false}};
        while (!stack.empty()) {
            auto [e, expanded] = stack.back();
            stack.pop_back();
            if (slot.count(e->id())) continue;
            const Node& n = e->node();
            if (!expanded && !n.args.empty()) {
                stack.push_back({e, true});
                for (auto it = n.args.rbegin(); it != n.args.rend(); ++it)
                    if (!slot.count(it->id())) stack.push_back({&*it, false});
                continue;
            }
            Ins ins{OpConst, -1, -1, 0.0, n.offset};
            switch (n.kind) {
                case Kind::Constant: ins.c = n.value; break;
                case Kind::Variable:
                    ins.op = OpVar;
                    ins.a = n.index;
                    dim_ = std::max(dim_, n.index + 1);
                    break;
                case Kind::Velocity:
                    ins.op = OpVel;
                    ins.a = n.index;
                    vdim_ = std::max(vdim_, n.index + 1);
                    break;
                case Kind::Parameter: throw UnboundSymbol("parameter '" + n.name + "' is not bound");
                case Kind::Unary:
                    ins.op = OpUnary0 + static_cast<int>(n.uop);
                    ins.a = slot.at(n.args[0].id());
                    break;
                case Kind::Binary:
                    ins.op = OpBinary0 + static_cast<int>(n.bop);
                    ins.a = slot.at(n.args[0].id());
                    ins.b = slot.at(n.args[1].id());
                    break;
                case Kind::Call:
                    ins.op = OpCall0 + static_cast<int>(n.fn);
                    ins.a = slot.at(n.args[0].id());
                    if (n.args.size() > 1) ins.b = slot.at(n.args[1].id());
                    break;
            }
            slot.emplace(e->id(), static_cast<int>(code_.size()));
            code_.push_back(ins);
        }
        outputs_.push_back(slot.at(root.id()));
    }
}

void Program::run(const double* x, const double* v, double* out) const {
    thread_local std::vector<double> reg;
    if (reg.size() < code_.size()) reg.resize(code_.size());
    double* r = reg.data();
    const std::size_t n = code_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Ins& c = code_[i];
        switch (c.op) {
            case OpConst: r[i] = c.c; break;
            case OpVar: r[i] = x[c.a]; break;
            case OpVel: r[i] = v[c.a]; break;
            case OpBinary0 + static_cast<int>(BinaryOp::Add): r[i] = r[c.a] + r[c.b]; break;
            case OpBinary0 + static_cast<int>(BinaryOp::Sub): r[i] = r[c.a] - r[c.b]; break;
            case OpBinary0 + static_cast<int>(BinaryOp::Mul): r[i] = r[c.a] * r[c.b]; break;
            default:
                if (c.op >= OpCall0)
                    r[i] = apply_call(static_cast<Func>(c.op - OpCall0), r[c.a], c.b >= 0 ? r[c.b] : 0.0, c.offset);
                else if (c.op >= OpBinary0)
                    r[i] = apply_binary(static_cast<BinaryOp>(c.op - OpBinary0), r[c.a], r[c.b], c.offset);
                else
                    r[i] = apply_unary(static_cast<UnaryOp>(c.op - OpUnary0), r[c.a], c.offset);
        }
    }
    for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = r[outputs_[k]];
}

std::vector<double> Program::run(const std::vector<double>& x, const std::vector<double>& v) const {
    if (static_cast<int>(x.size()) < dim_) throw UnboundSymbol("too few coordinates for compiled expression");
    if (static_cast<int>(v.size()) < vdim_) throw UnboundSymbol("too few velocities for compiled expression");
    std::vector<double> out(outputs_.size());
    run(x.data(), v.data(), out.data());
    return out;
}

}  // namespace descartes::expr
