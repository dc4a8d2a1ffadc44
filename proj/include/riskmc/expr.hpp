// Boolean/integer expressions shared by the risk-model DSL and the
// compiled guarded-command programs.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskmc {

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExprOp {
    BoolLit, IntLit, Var,
    Not, Neg,
    And, Or,
    Eq, Ne, Lt, Le, Gt, Ge,
    Add, Sub,
};

// Immutable expression tree. Shared_ptr children keep copies cheap; trees
// are never mutated after construction.
struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    ExprOp op;
    bool bval = false;
    long ival = 0;
    std::string name;     // Var
    ExprPtr lhs, rhs;     // unary ops use lhs only

    static ExprPtr lit(bool b) {
        auto e = std::make_shared<Expr>();
        e->op = ExprOp::BoolLit;
        e->bval = b;
        return e;
    }
    static ExprPtr lit(long v) {
        auto e = std::make_shared<Expr>();
        e->op = ExprOp::IntLit;
        e->ival = v;
        return e;
    }
    static ExprPtr var(std::string n) {
        auto e = std::make_shared<Expr>();
        e->op = ExprOp::Var;
        e->name = std::move(n);
        return e;
    }
    static ExprPtr unary(ExprOp o, ExprPtr a) {
        auto e = std::make_shared<Expr>();
        e->op = o;
        e->lhs = std::move(a);
        return e;
    }
    static ExprPtr binary(ExprOp o, ExprPtr a, ExprPtr b) {
        auto e = std::make_shared<Expr>();
        e->op = o;
        e->lhs = std::move(a);
        e->rhs = std::move(b);
        return e;
    }
};

inline ExprPtr expr_true() { return Expr::lit(true); }
inline ExprPtr expr_false() { return Expr::lit(false); }

inline bool is_true_lit(const ExprPtr& e) {
    return e && e->op == ExprOp::BoolLit && e->bval;
}

// Conjunction that drops literal-true operands.
inline ExprPtr expr_and(ExprPtr a, ExprPtr b) {
    if (is_true_lit(a)) return b;
    if (is_true_lit(b)) return a;
    return Expr::binary(ExprOp::And, std::move(a), std::move(b));
}

inline ExprPtr expr_not(ExprPtr a) { return Expr::unary(ExprOp::Not, std::move(a)); }

// Runtime values are plain longs; booleans are 0/1.
using Value = long;

// Variable lookup interface used by eval. Implementations: program
// valuations, test fixtures.
struct VarEnv {
    virtual ~VarEnv() = default;
    virtual Value get(const std::string& name) const = 0;
};

inline Value eval_value(const Expr& e, const VarEnv& env);

inline bool eval_bool(const Expr& e, const VarEnv& env) {
    switch (e.op) {
    case ExprOp::BoolLit: return e.bval;
    case ExprOp::Var: return env.get(e.name) != 0;
    case ExprOp::Not: return !eval_bool(*e.lhs, env);
    case ExprOp::And: return eval_bool(*e.lhs, env) && eval_bool(*e.rhs, env);
    case ExprOp::Or: return eval_bool(*e.lhs, env) || eval_bool(*e.rhs, env);
    case ExprOp::Eq: return eval_value(*e.lhs, env) == eval_value(*e.rhs, env);
    case ExprOp::Ne: return eval_value(*e.lhs, env) != eval_value(*e.rhs, env);
    case ExprOp::Lt: return eval_value(*e.lhs, env) < eval_value(*e.rhs, env);
    case ExprOp::Le: return eval_value(*e.lhs, env) <= eval_value(*e.rhs, env);
    case ExprOp::Gt: return eval_value(*e.lhs, env) > eval_value(*e.rhs, env);
    case ExprOp::Ge: return eval_value(*e.lhs, env) >= eval_value(*e.rhs, env);
    default:
        throw EvalError("expression is not boolean");
    }
}

inline Value eval_value(const Expr& e, const VarEnv& env) {
    switch (e.op) {
    case ExprOp::IntLit: return e.ival;
    case ExprOp::BoolLit: return e.bval ? 1 : 0;
    case ExprOp::Var: return env.get(e.name);
    case ExprOp::Add: return eval_value(*e.lhs, env) + eval_value(*e.rhs, env);
    case ExprOp::Sub: return eval_value(*e.lhs, env) - eval_value(*e.rhs, env);
    case ExprOp::Neg: return -eval_value(*e.lhs, env);
    default:
        return eval_bool(e, env) ? 1 : 0;
    }
}

// Canonical fully-parenthesised rendering; parsing it back yields a
// structurally identical tree, which the round-trip tests rely on.
inline std::string to_string(const Expr& e) {
    auto bin = [&](const char* sym) {
        return "(" + to_string(*e.lhs) + " " + sym + " " + to_string(*e.rhs) + ")";
    };
    switch (e.op) {
    case ExprOp::BoolLit: return e.bval ? "true" : "false";
    case ExprOp::IntLit: return std::to_string(e.ival);
    case ExprOp::Var: return e.name;
    case ExprOp::Not: return "!" + to_string(*e.lhs);
    case ExprOp::Neg: return "-" + to_string(*e.lhs);
    case ExprOp::And: return bin("&");
    case ExprOp::Or: return bin("|");
    case ExprOp::Eq: return bin("=");
    case ExprOp::Ne: return bin("!=");
    case ExprOp::Lt: return bin("<");
    case ExprOp::Le: return bin("<=");
    case ExprOp::Gt: return bin(">");
    case ExprOp::Ge: return bin(">=");
    case ExprOp::Add: return bin("+");
    case ExprOp::Sub: return bin("-");
    }
    return "?";
}

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return a == b;
    if (a->op != b->op) return false;
    switch (a->op) {
    case ExprOp::BoolLit: return a->bval == b->bval;
    case ExprOp::IntLit: return a->ival == b->ival;
    case ExprOp::Var: return a->name == b->name;
    default:
        if (!expr_equal(a->lhs, b->lhs)) return false;
        return (a->rhs || b->rhs) ? expr_equal(a->rhs, b->rhs) : true;
    }
}

// Collects variable names referenced by an expression.
inline void collect_vars(const ExprPtr& e, std::vector<std::string>& out) {
    if (!e) return;
    if (e->op == ExprOp::Var) out.push_back(e->name);
    collect_vars(e->lhs, out);
    collect_vars(e->rhs, out);
}

namespace detail {

// Shortest decimal rendering that parses back to the same double; integers
// print without a fraction.
inline std::string fmt_num(double v) {
    char buf[64];
    if (v == static_cast<long long>(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
        return buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v);
    double back = std::strtod(buf, nullptr);
    for (int prec = 1; prec <= 16; ++prec) {
        char c[64];
        std::snprintf(c, sizeof c, "%.*g", prec, v);
        if (std::strtod(c, nullptr) == back) {
            std::snprintf(buf, sizeof buf, "%s", c);
            break;
        }
    }
    return buf;
}

} // namespace detail

} // namespace riskmc
