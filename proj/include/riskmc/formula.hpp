// Property formulas: qualitative CTL over atomic propositions plus the
// quantitative P / R / S heads, and the textual property-file parser.
//
//   v: E [ F ("active_HC" & !"final") ]
//   P>=0.99 [ G !"mishap" ]
//   Rmax{"pot"} [ C ]
//   S<0.01 [ "mishap" ]
#pragma once

#include <optional>

#include "riskmc/parser.hpp"

namespace riskmc {

enum class Cmp { Lt, Le, Gt, Ge, Query };

inline const char* to_string(Cmp c) {
    switch (c) {
    case Cmp::Lt: return "<";
    case Cmp::Le: return "<=";
    case Cmp::Gt: return ">";
    case Cmp::Ge: return ">=";
    case Cmp::Query: return "=?";
    }
    return "?";
}

inline bool cmp_holds(Cmp c, double value, double bound) {
    switch (c) {
    case Cmp::Lt: return value < bound;
    case Cmp::Le: return value <= bound;
    case Cmp::Gt: return value > bound;
    case Cmp::Ge: return value >= bound;
    case Cmp::Query: return true;
    }
    return false;
}

enum class Opt { Unspecified, Min, Max };

// Step bound on U / F / G; Kind::None means unbounded.
struct Bound {
    enum class Kind { None, Lt, Le, Eq, Ge } kind = Kind::None;
    long steps = -1;
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct PathFormula {
    enum class Kind { Next, Until, WeakUntil } kind = Kind::Until;
    FormulaPtr lhs, rhs;   // Next uses rhs only
    Bound bound;
};
using PathPtr = std::shared_ptr<const PathFormula>;

struct Formula {
    enum class Kind {
        Top, Atom, Not, And, Or, Implies,
        Exists, Forall,        // qualitative path quantifiers
        Prob, Reward, Steady,  // quantitative heads, top level only
    } kind = Kind::Top;

    std::string atom;
    FormulaPtr lhs, rhs;
    PathPtr path;

    // quantitative heads
    Opt opt = Opt::Unspecified;
    Cmp cmp = Cmp::Query;
    double threshold = 0;
    std::string reward_name;
    bool cumulative = false;   // Reward: C (possibly bounded) vs F rhs
    Bound reward_bound;
};

inline FormulaPtr f_atom(std::string a) {
    auto f = std::make_shared<Formula>();
    f->kind = Formula::Kind::Atom;
    f->atom = std::move(a);
    return f;
}
inline FormulaPtr f_top() {
    auto f = std::make_shared<Formula>();
    f->kind = Formula::Kind::Top;
    return f;
}
inline FormulaPtr f_not(FormulaPtr x) {
    auto f = std::make_shared<Formula>();
    f->kind = Formula::Kind::Not;
    f->lhs = std::move(x);
    return f;
}
inline FormulaPtr f_bin(Formula::Kind k, FormulaPtr a, FormulaPtr b) {
    auto f = std::make_shared<Formula>();
    f->kind = k;
    f->lhs = std::move(a);
    f->rhs = std::move(b);
    return f;
}
inline PathPtr p_until(FormulaPtr a, FormulaPtr b, Bound bd = {}) {
    auto p = std::make_shared<PathFormula>();
    p->kind = PathFormula::Kind::Until;
    p->lhs = std::move(a);
    p->rhs = std::move(b);
    p->bound = bd;
    return p;
}
inline PathPtr p_weak(FormulaPtr a, FormulaPtr b) {
    auto p = std::make_shared<PathFormula>();
    p->kind = PathFormula::Kind::WeakUntil;
    p->lhs = std::move(a);
    p->rhs = std::move(b);
    return p;
}
inline PathPtr p_next(FormulaPtr a) {
    auto p = std::make_shared<PathFormula>();
    p->kind = PathFormula::Kind::Next;
    p->rhs = std::move(a);
    return p;
}
inline PathPtr p_eventually(FormulaPtr a, Bound bd = {}) {
    return p_until(f_top(), std::move(a), bd);
}
inline FormulaPtr f_quant(Formula::Kind k, PathPtr p) {
    auto f = std::make_shared<Formula>();
    f->kind = k;
    f->path = std::move(p);
    return f;
}

// Annotated property: `v:` expects the formula to hold, `f:` expects it to
// be falsified.
struct Property {
    enum class Mark { None, Verify, Falsify } mark = Mark::None;
    FormulaPtr formula;
    std::string text;   // source line, for reports
};

namespace detail {

class FormulaParser {
public:
    explicit FormulaParser(const std::string& src) : lex_(src) {}

    FormulaPtr parse_toplevel() {
        FormulaPtr f = parse_formula();
        if (lex_.peek().kind != Tok::End)
            fail("trailing input after formula");
        return f;
    }

private:
    FormulaPtr parse_formula() { return parse_implies(); }

    FormulaPtr parse_implies() {
        FormulaPtr e = parse_or();
        if (is_punct("=>")) {
            lex_.next();
            return f_bin(Formula::Kind::Implies, e, parse_implies());
        }
        return e;
    }
    FormulaPtr parse_or() {
        FormulaPtr e = parse_and();
        while (is_punct("|")) {
            lex_.next();
            e = f_bin(Formula::Kind::Or, e, parse_and());
        }
        return e;
    }
    FormulaPtr parse_and() {
        FormulaPtr e = parse_unary();
        while (is_punct("&")) {
            lex_.next();
            e = f_bin(Formula::Kind::And, e, parse_unary());
        }
        return e;
    }
    FormulaPtr parse_unary() {
        if (is_punct("!")) {
            lex_.next();
            return f_not(parse_unary());
        }
        return parse_primary();
    }

    FormulaPtr parse_primary() {
        const Token& t = lex_.peek();
        if (t.kind == Tok::String) return f_atom(lex_.next().text);
        if (is_punct("(")) {
            lex_.next();
            FormulaPtr f = parse_formula();
            expect(")");
            return f;
        }
        if (t.kind != Tok::Ident) fail("expected a formula");
        std::string id = lex_.next().text;
        if (id == "true") return f_top();
        if (id == "false") return f_not(f_top());
        if (id == "E" || id == "A") {
            expect("[");
            PathPtr p = parse_path();
            expect("]");
            return f_quant(id == "E" ? Formula::Kind::Exists : Formula::Kind::Forall, p);
        }
        if (id == "P" || id == "Pmin" || id == "Pmax") return parse_prob(id);
        if (id == "R" || id == "Rmin" || id == "Rmax") return parse_reward(id);
        if (id == "S") return parse_steady();
        fail("unknown formula head '" + id + "'");
        return nullptr;
    }

    FormulaPtr parse_prob(const std::string& id) {
        auto f = std::make_shared<Formula>();
        f->kind = Formula::Kind::Prob;
        f->opt = id == "Pmin" ? Opt::Min : id == "Pmax" ? Opt::Max : Opt::Unspecified;
        parse_cmp(*f);
        expect("[");
        f->path = parse_path();
        expect("]");
        return f;
    }

    FormulaPtr parse_reward(const std::string& id) {
        auto f = std::make_shared<Formula>();
        f->kind = Formula::Kind::Reward;
        f->opt = id == "Rmin" ? Opt::Min : id == "Rmax" ? Opt::Max : Opt::Unspecified;
        expect("{");
        if (lex_.peek().kind != Tok::String) fail("expected reward structure name");
        f->reward_name = lex_.next().text;
        expect("}");
        parse_cmp(*f);
        expect("[");
        if (is_ident("C")) {
            lex_.next();
            f->cumulative = true;
            if (is_punct("<=")) {
                lex_.next();
                f->reward_bound = Bound{Bound::Kind::Le, parse_int()};
            }
        } else if (is_ident("F")) {
            lex_.next();
            f->cumulative = false;
            f->rhs = parse_formula();
        } else {
            fail("expected C or F horizon in reward formula");
        }
        expect("]");
        return f;
    }

    FormulaPtr parse_steady() {
        auto f = std::make_shared<Formula>();
        f->kind = Formula::Kind::Steady;
        parse_cmp(*f);
        expect("[");
        f->rhs = parse_formula();
        expect("]");
        return f;
    }

    // the comparison is optional: a bare head such as Rmax{"pot"} [ C ]
    // queries the value
    void parse_cmp(Formula& f) {
        if (is_punct("=")) {
            lex_.next();
            if (!is_punct("?")) fail("expected '?' after '='");
            lex_.next();
            f.cmp = Cmp::Query;
            return;
        }
        if (is_punct("<")) f.cmp = Cmp::Lt;
        else if (is_punct("<=")) f.cmp = Cmp::Le;
        else if (is_punct(">")) f.cmp = Cmp::Gt;
        else if (is_punct(">=")) f.cmp = Cmp::Ge;
        else {
            f.cmp = Cmp::Query;
            return;
        }
        lex_.next();
        if (lex_.peek().kind != Tok::Number) fail("expected a probability bound");
        f.threshold = lex_.next().num;
    }

    PathPtr parse_path() {
        if (is_ident("X")) {
            lex_.next();
            return p_next(parse_formula_nontemporal());
        }
        if (is_ident("F")) {
            lex_.next();
            Bound b = parse_bound();
            return p_eventually(parse_formula_nontemporal(), b);
        }
        if (is_ident("G")) {
            lex_.next();
            Bound b = parse_bound();
            if (b.kind != Bound::Kind::None) fail("bounded G is not supported");
            // G phi == phi W false
            return p_weak(parse_formula_nontemporal(), f_not(f_top()));
        }
        FormulaPtr lhs = parse_formula_nontemporal();
        if (is_ident("U")) {
            lex_.next();
            Bound b = parse_bound();
            return p_until(lhs, parse_formula_nontemporal(), b);
        }
        if (is_ident("W")) {
            lex_.next();
            return p_weak(lhs, parse_formula_nontemporal());
        }
        fail("expected a temporal operator");
        return nullptr;
    }

    // Inside path operators only state formulas may appear; nested E/A are
    // allowed, nested quantitative heads are rejected by the checker.
    FormulaPtr parse_formula_nontemporal() { return parse_implies(); }

    Bound parse_bound() {
        Bound b;
        if (is_punct("<=")) b.kind = Bound::Kind::Le;
        else if (is_punct("<")) b.kind = Bound::Kind::Lt;
        else if (is_punct("=")) b.kind = Bound::Kind::Eq;
        else if (is_punct(">=")) b.kind = Bound::Kind::Ge;
        else return b;
        lex_.next();
        b.steps = parse_int();
        return b;
    }

    long parse_int() {
        if (lex_.peek().kind != Tok::Number) fail("expected an integer");
        return static_cast<long>(lex_.next().num);
    }

    bool is_ident(const char* s) const {
        return lex_.peek().kind == Tok::Ident && lex_.peek().text == s;
    }
    bool is_punct(const char* s) const {
        return lex_.peek().kind == Tok::Punct && lex_.peek().text == s;
    }
    void expect(const char* p) {
        if (!is_punct(p)) fail(std::string("expected '") + p + "'");
        lex_.next();
    }
    [[noreturn]] void fail(const std::string& msg) {
        throw ParseError(lex_.peek().line, lex_.peek().col, msg);
    }

    Lexer lex_;
};

} // namespace detail

inline FormulaPtr parse_formula(const std::string& text) {
    detail::FormulaParser p(text);
    return p.parse_toplevel();
}

// One property per line; `//` comments; optional `v:` / `f:` verdict marks.
inline std::vector<Property> parse_properties(const std::string& text) {
    std::vector<Property> out;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string body = line;
        auto comment = body.find("//");
        if (comment != std::string::npos) body = body.substr(0, comment);
        size_t a = body.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        size_t z = body.find_last_not_of(" \t\r");
        body = body.substr(a, z - a + 1);

        Property p;
        p.text = body;
        if (body.rfind("v:", 0) == 0) {
            p.mark = Property::Mark::Verify;
            body = body.substr(2);
        } else if (body.rfind("f:", 0) == 0) {
            p.mark = Property::Mark::Falsify;
            body = body.substr(2);
        }
        try {
            p.formula = parse_formula(body);
        } catch (const ParseError& e) {
            throw ParseError(lineno, e.col, e.what());
        }
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace riskmc
