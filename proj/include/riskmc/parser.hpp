// Lexer and recursive-descent parser for .riskm risk-model files, plus the
// inverse pretty-printer. parse_syntax only enforces grammar; semantic rules
// live in validate.hpp.
#pragma once

#include <charconv>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "riskmc/model.hpp"

namespace riskmc {

struct ParseError : std::runtime_error {
    int line = 0, col = 0;
    ParseError(int l, int c, const std::string& msg)
        : std::runtime_error("line " + std::to_string(l) + ":" + std::to_string(c) +
                             ": " + msg),
          line(l), col(c) {}
};

namespace detail {

enum class Tok { Ident, Number, String, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double num = 0;
    int line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { advance(); }

    const Token& peek() const { return cur_; }
    Token next() {
        Token t = cur_;
        advance();
        return t;
    }

private:
    void advance() {
        skip_ws();
        cur_ = Token{};
        cur_.line = line_;
        cur_.col = col_;
        if (pos_ >= src_.size()) {
            cur_.kind = Tok::End;
            return;
        }
        char c = src_[pos_];
        if (isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t s = pos_;
            while (pos_ < src_.size() &&
                   (isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                bump();
            cur_.kind = Tok::Ident;
            cur_.text = src_.substr(s, pos_ - s);
            return;
        }
        if (isdigit(static_cast<unsigned char>(c))) {
            size_t s = pos_;
            while (pos_ < src_.size() && isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
            // ".." is the range punctuation, a single '.' starts a fraction
            if (pos_ + 1 < src_.size() && src_[pos_] == '.' && src_[pos_ + 1] != '.') {
                bump();
                while (pos_ < src_.size() && isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
            }
            if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                bump();
                if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) bump();
                while (pos_ < src_.size() && isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
            }
            cur_.kind = Tok::Number;
            cur_.text = src_.substr(s, pos_ - s);
            cur_.num = std::strtod(cur_.text.c_str(), nullptr);
            return;
        }
        if (c == '"') {
            bump();
            size_t s = pos_;
            while (pos_ < src_.size() && src_[pos_] != '"') bump();
            if (pos_ >= src_.size())
                throw ParseError(cur_.line, cur_.col, "unterminated string");
            cur_.kind = Tok::String;
            cur_.text = src_.substr(s, pos_ - s);
            bump();
            return;
        }
        // multi-char punctuation first
        static const char* two[] = {":=", "!=", "<=", ">=", "..", "=>"};
        for (auto* p : two) {
            if (src_.compare(pos_, 2, p) == 0) {
                cur_.kind = Tok::Punct;
                cur_.text = p;
                bump();
                bump();
                return;
            }
        }
        cur_.kind = Tok::Punct;
        cur_.text = std::string(1, c);
        bump();
    }

    void skip_ws() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') bump();
            } else if (isspace(static_cast<unsigned char>(c))) {
                bump();
            } else {
                break;
            }
        }
    }

    void bump() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    const std::string& src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token cur_;
};

class Parser {
public:
    explicit Parser(const std::string& src) : lex_(src) {}

    RiskModel parse_model() {
        RiskModel m;
        if (is_ident("model")) {
            lex_.next();
            m.name = expect_ident("model name");
            expect_punct(";");
        }
        while (lex_.peek().kind != Tok::End) {
            const Token& t = lex_.peek();
            if (t.kind != Tok::Ident)
                fail(t, "expected a declaration block");
            if (t.text == "Mode") parse_mode(m);
            else if (t.text == "Var") parse_var(m);
            else if (t.text == "Label") parse_label(m);
            else if (t.text == "Activity") parse_activity(m);
            else if (t.text == "Factor") parse_factor(m);
            else if (t.text == "Action") parse_action(m);
            else if (t.text == "constraint") parse_constraint(m);
            else if (t.text == "Gradients") parse_gradients(m);
            else if (t.text == "Init") parse_init(m);
            else fail(t, "unknown block '" + t.text + "'");
        }
        return m;
    }

    ExprPtr parse_expression() { return parse_or(); }

private:
    // ---- blocks ----

    void parse_mode(RiskModel& m) {
        lex_.next();
        m.safety_modes.push_back(expect_ident("mode name"));
        expect_punct(";");
    }

    void parse_var(RiskModel& m) {
        lex_.next();
        VarDecl v;
        v.name = expect_ident("variable name");
        expect_punct(":");
        if (is_ident("bool")) {
            lex_.next();
            v.is_bool = true;
            v.lo = 0;
            v.hi = 1;
        } else {
            expect_punct("[");
            v.is_bool = false;
            v.lo = expect_int();
            expect_punct("..");
            v.hi = expect_int();
            expect_punct("]");
        }
        v.init = v.lo;
        if (is_ident("init")) {
            lex_.next();
            v.init = expect_value();
        }
        expect_punct(";");
        m.variables.push_back(v);
    }

    void parse_label(RiskModel& m) {
        lex_.next();
        LabelDecl l;
        l.name = expect_ident("label name");
        expect_punct("=");
        l.expr = parse_expression();
        expect_punct(";");
        m.labels.push_back(l);
    }

    void parse_activity(RiskModel& m) {
        lex_.next();
        ActivityDecl a;
        a.name = expect_ident("activity name");
        expect_punct("{");
        while (!is_punct("}")) {
            if (is_ident("includes")) {
                lex_.next();
                a.includes.push_back(expect_ident("activity name"));
                expect_punct(";");
            } else if (is_ident("successor")) {
                lex_.next();
                SuccessorDecl s;
                s.target = expect_ident("activity name");
                s.when = expr_true();
                if (is_ident("when")) {
                    lex_.next();
                    s.when = parse_expression();
                }
                if (is_ident("in")) {
                    lex_.next();
                    while (lex_.peek().kind == Tok::Ident && !is_punct(";"))
                        s.modes.push_back(lex_.next().text);
                }
                expect_punct(";");
                a.successors.push_back(s);
            } else if (is_ident("actions")) {
                lex_.next();
                while (lex_.peek().kind == Tok::Ident)
                    a.action_refs.push_back(lex_.next().text);
                expect_punct(";");
            } else if (is_ident("action")) {
                a.actions.push_back(parse_nominal());
            } else {
                fail(lex_.peek(), "expected activity clause");
            }
        }
        expect_punct("}");
        m.activities.push_back(a);
    }

    NominalAction parse_nominal() {
        lex_.next();  // action
        NominalAction n;
        n.name = expect_ident("action name");
        expect_keyword("by");
        n.owner = expect_ident("module name");
        n.guard = expr_true();
        expect_punct("{");
        while (!is_punct("}")) {
            if (is_ident("guard")) {
                lex_.next();
                n.guard = parse_expression();
                expect_punct(";");
            } else if (is_ident("update")) {
                lex_.next();
                n.updates = parse_updates();
                expect_punct(";");
            } else if (is_ident("event")) {
                lex_.next();
                n.event = expect_ident("event name");
                expect_punct(";");
            } else if (is_ident("modes")) {
                lex_.next();
                n.all_modes = false;
                if (is_ident("all")) {
                    lex_.next();
                    n.all_modes = true;
                } else {
                    while (lex_.peek().kind == Tok::Ident)
                        n.modes.push_back(lex_.next().text);
                }
                expect_punct(";");
            } else if (is_ident("activities")) {
                lex_.next();
                if (is_ident("all")) {
                    lex_.next();
                    n.all_activities = true;
                } else {
                    while (lex_.peek().kind == Tok::Ident)
                        n.activities.push_back(lex_.next().text);
                }
                expect_punct(";");
            } else if (is_ident("cost")) {
                parse_costs(n.costs);
            } else {
                fail(lex_.peek(), "expected action clause");
            }
        }
        expect_punct("}");
        if (n.updates.empty()) n.updates.push_back(UpdateBranch{1.0, {}});
        return n;
    }

    void parse_factor(RiskModel& m) {
        lex_.next();
        FactorDecl f;
        f.name = expect_ident("factor name");
        f.guard = expr_false();
        f.detected_by = expr_false();
        expect_punct("{");
        while (!is_punct("}")) {
            if (is_ident("desc")) {
                lex_.next();
                if (lex_.peek().kind != Tok::String) fail(lex_.peek(), "expected string");
                f.description = lex_.next().text;
                expect_punct(";");
            } else if (is_ident("guard")) {
                lex_.next();
                f.guard = parse_expression();
                expect_punct(";");
            } else if (is_ident("detectedBy")) {
                lex_.next();
                f.detected_by = parse_expression();
                expect_punct(";");
            } else if (is_ident("faultProb")) {
                lex_.next();
                f.detection_fault_prob = expect_number();
                expect_punct(";");
            } else if (is_ident("mishap")) {
                lex_.next();
                f.mishap_action = expect_ident("action name");
                expect_keyword("prob");
                f.mishap_prob = expect_number();
                expect_keyword("sev");
                f.severity = expect_number();
                expect_punct(";");
            } else if (is_ident("severity")) {
                lex_.next();
                f.severity = expect_number();
                expect_punct(";");
            } else if (is_ident("in")) {
                lex_.next();
                while (lex_.peek().kind == Tok::Ident)
                    f.in_activities.push_back(lex_.next().text);
                expect_punct(";");
            } else if (is_ident("mitigatedBy")) {
                lex_.next();
                while (lex_.peek().kind == Tok::Ident)
                    f.mitigations.push_back(lex_.next().text);
                expect_punct(";");
            } else if (is_ident("resumedBy")) {
                lex_.next();
                while (lex_.peek().kind == Tok::Ident)
                    f.resumptions.push_back(lex_.next().text);
                expect_punct(";");
            } else {
                fail(lex_.peek(), "expected factor clause");
            }
        }
        expect_punct("}");
        m.factors.push_back(f);
    }

    void parse_action(RiskModel& m) {
        lex_.next();
        ActionDecl a;
        a.name = expect_ident("action name");
        expect_punct(":");
        std::string kind = expect_ident("action kind");
        if (kind == "SHUTDOWN") a.kind = ActionKind::Shutdown;
        else if (kind == "MODE_SWITCH") a.kind = ActionKind::ModeSwitch;
        else if (kind == "ACTIVITY_SWITCH") a.kind = ActionKind::ActivitySwitch;
        else if (kind == "SAFETY_FUNCTION") a.kind = ActionKind::SafetyFunction;
        else if (kind == "RESUME") a.kind = ActionKind::Resume;
        else fail(lex_.peek(), "unknown action kind '" + kind + "'");
        expect_punct("{");
        while (!is_punct("}")) {
            if (is_ident("event")) {
                lex_.next();
                a.sync_event = expect_ident("event name");
                expect_punct(";");
            } else if (is_ident("update")) {
                lex_.next();
                a.update = parse_assigns();
                expect_punct(";");
            } else if (is_ident("target")) {
                lex_.next();
                bool any = false;
                if (is_ident("activity")) {
                    lex_.next();
                    a.target_activity = expect_ident("activity name");
                    any = true;
                    if (is_punct(",")) lex_.next();
                }
                if (is_ident("mode")) {
                    lex_.next();
                    a.target_mode = expect_ident("mode name");
                    any = true;
                }
                if (!any) fail(lex_.peek(), "target needs an activity or a mode");
                expect_punct(";");
            } else if (is_ident("when")) {
                lex_.next();
                a.when = parse_expression();
                expect_punct(";");
            } else if (is_ident("cost")) {
                parse_costs(a.costs);
            } else {
                fail(lex_.peek(), "expected action clause");
            }
        }
        expect_punct("}");
        m.actions.push_back(a);
    }

    void parse_constraint(RiskModel& m) {
        lex_.next();
        Constraint c;
        c.subject = expect_ident("factor name");
        expect_keyword("requiresNOf");
        expect_punct("(");
        c.lower = expect_int();
        expect_punct("|");
        c.over.push_back(expect_ident("factor name"));
        while (is_punct(",")) {
            lex_.next();
            c.over.push_back(expect_ident("factor name"));
        }
        expect_punct("|");
        c.upper = expect_int();
        expect_punct(")");
        expect_punct(";");
        m.constraints.push_back(c);
    }

    void parse_gradients(RiskModel& m) {
        lex_.next();
        bool mode;
        if (is_ident("mode")) mode = true;
        else if (is_ident("activity")) mode = false;
        else { fail(lex_.peek(), "expected 'activity' or 'mode'"); return; }
        lex_.next();
        GradientMatrix g;
        expect_punct("{");
        while (!is_punct("}")) {
            g.labels.push_back(expect_ident("row label"));
            expect_punct(":");
            std::vector<double> row;
            while (lex_.peek().kind == Tok::Number || is_punct("-")) {
                double sign = 1;
                if (is_punct("-")) {
                    lex_.next();
                    sign = -1;
                }
                row.push_back(sign * expect_number());
            }
            expect_punct(";");
            g.entries.push_back(row);
        }
        expect_punct("}");
        (mode ? m.mode_gradients : m.activity_gradients) = g;
    }

    void parse_init(RiskModel& m) {
        lex_.next();
        expect_punct("{");
        while (!is_punct("}")) {
            std::string n = expect_ident("variable name");
            expect_punct("=");
            m.initial[n] = expect_init_value(m);
            expect_punct(";");
        }
        expect_punct("}");
    }

    // Init values may name an activity or a safety mode.
    Value expect_init_value(RiskModel& m) {
        const Token& t = lex_.peek();
        if (t.kind == Tok::Ident && t.text != "true" && t.text != "false") {
            std::string n = lex_.next().text;
            int i = m.activity_index(n);
            if (i < 0) i = m.mode_index(n);
            if (i < 0) fail(t, "unknown name '" + n + "' in Init");
            return i;
        }
        return expect_value();
    }

    // ---- shared pieces ----

    void parse_costs(std::map<std::string, double>& out) {
        lex_.next();  // cost
        while (true) {
            std::string q = expect_ident("quantity name");
            expect_punct("=");
            out[q] = expect_number();
            if (is_punct(",")) {
                lex_.next();
                continue;
            }
            break;
        }
        expect_punct(";");
    }

    std::vector<UpdateBranch> parse_updates() {
        std::vector<UpdateBranch> out;
        if (lex_.peek().kind == Tok::Number) {
            while (true) {
                UpdateBranch b;
                b.prob = expect_number();
                expect_punct(":");
                if (is_ident("skip")) {
                    lex_.next();
                } else {
                    expect_punct("{");
                    if (!is_punct("}")) b.assigns = parse_assigns();
                    expect_punct("}");
                }
                out.push_back(std::move(b));
                if (is_punct("+")) {
                    lex_.next();
                    continue;
                }
                break;
            }
        } else if (is_ident("skip")) {
            lex_.next();
            out.push_back(UpdateBranch{1.0, {}});
        } else {
            out.push_back(UpdateBranch{1.0, parse_assigns()});
        }
        return out;
    }

    std::vector<Assign> parse_assigns() {
        std::vector<Assign> out;
        while (true) {
            Assign a;
            a.var = expect_ident("variable name");
            expect_punct(":=");
            a.value = parse_expression();
            out.push_back(std::move(a));
            if (is_punct(",")) {
                lex_.next();
                continue;
            }
            break;
        }
        return out;
    }

    // ---- expressions ----

    ExprPtr parse_or() {
        ExprPtr e = parse_and();
        while (is_punct("|")) {
            lex_.next();
            e = Expr::binary(ExprOp::Or, e, parse_and());
        }
        return e;
    }
    ExprPtr parse_and() {
        ExprPtr e = parse_cmp();
        while (is_punct("&")) {
            lex_.next();
            e = Expr::binary(ExprOp::And, e, parse_cmp());
        }
        return e;
    }
    ExprPtr parse_cmp() {
        ExprPtr e = parse_add();
        ExprOp op;
        if (is_punct("=")) op = ExprOp::Eq;
        else if (is_punct("!=")) op = ExprOp::Ne;
        else if (is_punct("<")) op = ExprOp::Lt;
        else if (is_punct("<=")) op = ExprOp::Le;
        else if (is_punct(">")) op = ExprOp::Gt;
        else if (is_punct(">=")) op = ExprOp::Ge;
        else return e;
        lex_.next();
        return Expr::binary(op, e, parse_add());
    }
    ExprPtr parse_add() {
        ExprPtr e = parse_unary();
        while (is_punct("+") || is_punct("-")) {
            ExprOp op = is_punct("+") ? ExprOp::Add : ExprOp::Sub;
            lex_.next();
            e = Expr::binary(op, e, parse_unary());
        }
        return e;
    }
    ExprPtr parse_unary() {
        if (is_punct("!")) {
            lex_.next();
            return Expr::unary(ExprOp::Not, parse_unary());
        }
        if (is_punct("-")) {
            lex_.next();
            return Expr::unary(ExprOp::Neg, parse_unary());
        }
        return parse_atom();
    }
    ExprPtr parse_atom() {
        const Token& t = lex_.peek();
        if (t.kind == Tok::Number) {
            Token n = lex_.next();
            if (n.text.find('.') != std::string::npos ||
                n.text.find('e') != std::string::npos)
                fail(n, "only integer literals are allowed in expressions");
            return Expr::lit(static_cast<long>(n.num));
        }
        if (t.kind == Tok::Ident) {
            Token n = lex_.next();
            if (n.text == "true") return Expr::lit(true);
            if (n.text == "false") return Expr::lit(false);
            return Expr::var(n.text);
        }
        if (is_punct("(")) {
            lex_.next();
            ExprPtr e = parse_or();
            expect_punct(")");
            return e;
        }
        fail(t, "expected an expression");
        return nullptr;
    }

    // ---- token helpers ----

    bool is_ident(const char* s) const {
        return lex_.peek().kind == Tok::Ident && lex_.peek().text == s;
    }
    bool is_punct(const char* s) const {
        return lex_.peek().kind == Tok::Punct && lex_.peek().text == s;
    }
    std::string expect_ident(const char* what) {
        const Token& t = lex_.peek();
        if (t.kind != Tok::Ident) fail(t, std::string("expected ") + what);
        return lex_.next().text;
    }
    void expect_keyword(const char* kw) {
        if (!is_ident(kw)) fail(lex_.peek(), std::string("expected '") + kw + "'");
        lex_.next();
    }
    void expect_punct(const char* p) {
        if (!is_punct(p)) fail(lex_.peek(), std::string("expected '") + p + "'");
        lex_.next();
    }
    double expect_number() {
        const Token& t = lex_.peek();
        if (t.kind != Tok::Number) fail(t, "expected a number");
        return lex_.next().num;
    }
    long expect_int() {
        const Token& t = lex_.peek();
        if (t.kind != Tok::Number || t.text.find('.') != std::string::npos)
            fail(t, "expected an integer");
        return static_cast<long>(lex_.next().num);
    }
    Value expect_value() {
        const Token& t = lex_.peek();
        if (t.kind == Tok::Ident && t.text == "true") { lex_.next(); return 1; }
        if (t.kind == Tok::Ident && t.text == "false") { lex_.next(); return 0; }
        return expect_int();
    }
    [[noreturn]] void fail(const Token& t, const std::string& msg) {
        throw ParseError(t.line, t.col, msg);
    }

    Lexer lex_;
};

} // namespace detail

// Grammar-only parse; throws ParseError. Semantic validation is separate so
// that diagnostics can be collected in bulk.
inline RiskModel parse_syntax(const std::string& source) {
    detail::Parser p(source);
    return p.parse_model();
}

inline ExprPtr parse_expr_text(const std::string& text) {
    detail::Parser p(text);
    return p.parse_expression();
}

// ---- pretty printer (inverse of the parser up to layout) ----

namespace detail {

inline void print_costs(std::ostringstream& os, const std::map<std::string, double>& costs,
                        const char* indent) {
    if (costs.empty()) return;
    os << indent << "cost ";
    bool first = true;
    for (auto& [k, v] : costs) {
        if (!first) os << ", ";
        os << k << " = " << fmt_num(v);
        first = false;
    }
    os << ";\n";
}

inline void print_assigns(std::ostringstream& os, const std::vector<Assign>& as) {
    for (size_t i = 0; i < as.size(); ++i) {
        if (i) os << ", ";
        os << as[i].var << " := " << to_string(*as[i].value);
    }
}

} // namespace detail

inline std::string pretty_print(const RiskModel& m) {
    using detail::fmt_num;
    std::ostringstream os;
    if (!m.name.empty()) os << "model " << m.name << ";\n\n";
    for (auto& md : m.safety_modes) os << "Mode " << md << ";\n";
    if (!m.safety_modes.empty()) os << "\n";
    for (auto& v : m.variables) {
        os << "Var " << v.name << " : ";
        if (v.is_bool) os << "bool";
        else os << "[" << v.lo << ".." << v.hi << "]";
        os << " init " << (v.is_bool ? (v.init ? "true" : "false") : std::to_string(v.init));
        os << ";\n";
    }
    if (!m.variables.empty()) os << "\n";
    for (auto& l : m.labels)
        os << "Label " << l.name << " = " << to_string(*l.expr) << ";\n";
    if (!m.labels.empty()) os << "\n";

    for (auto& a : m.activities) {
        os << "Activity " << a.name << " {\n";
        for (auto& i : a.includes) os << "  includes " << i << ";\n";
        for (auto& s : a.successors) {
            os << "  successor " << s.target;
            if (!is_true_lit(s.when)) os << " when " << to_string(*s.when);
            if (!s.modes.empty()) {
                os << " in";
                for (auto& md : s.modes) os << " " << md;
            }
            os << ";\n";
        }
        if (!a.action_refs.empty()) {
            os << "  actions";
            for (auto& r : a.action_refs) os << " " << r;
            os << ";\n";
        }
        for (auto& n : a.actions) {
            os << "  action " << n.name << " by " << n.owner << " {\n";
            if (!n.event.empty()) os << "    event " << n.event << ";\n";
            if (!is_true_lit(n.guard))
                os << "    guard " << to_string(*n.guard) << ";\n";
            bool dirac_noop = n.updates.size() == 1 && n.updates[0].assigns.empty();
            if (!dirac_noop) {
                os << "    update ";
                if (n.updates.size() == 1) {
                    detail::print_assigns(os, n.updates[0].assigns);
                } else {
                    for (size_t i = 0; i < n.updates.size(); ++i) {
                        if (i) os << " + ";
                        os << fmt_num(n.updates[i].prob) << ": ";
                        if (n.updates[i].assigns.empty()) {
                            os << "skip";
                        } else {
                            os << "{ ";
                            detail::print_assigns(os, n.updates[i].assigns);
                            os << " }";
                        }
                    }
                }
                os << ";\n";
            }
            if (!n.all_modes) {
                os << "    modes";
                for (auto& md : n.modes) os << " " << md;
                os << ";\n";
            }
            if (n.all_activities) os << "    activities all;\n";
            else if (!n.activities.empty()) {
                os << "    activities";
                for (auto& x : n.activities) os << " " << x;
                os << ";\n";
            }
            detail::print_costs(os, n.costs, "    ");
            os << "  }\n";
        }
        os << "}\n\n";
    }

    for (auto& f : m.factors) {
        os << "Factor " << f.name << " {\n";
        os << "  desc \"" << f.description << "\";\n";
        if (!f.in_activities.empty()) {
            os << "  in";
            for (auto& a : f.in_activities) os << " " << a;
            os << ";\n";
        }
        os << "  guard " << to_string(*f.guard) << ";\n";
        os << "  detectedBy " << to_string(*f.detected_by) << ";\n";
        os << "  faultProb " << fmt_num(f.detection_fault_prob) << ";\n";
        if (!f.mishap_action.empty()) {
            os << "  mishap " << f.mishap_action << " prob " << fmt_num(f.mishap_prob)
               << " sev " << fmt_num(f.severity) << ";\n";
        } else if (f.severity != 0) {
            os << "  severity " << fmt_num(f.severity) << ";\n";
        }
        if (!f.mitigations.empty()) {
            os << "  mitigatedBy";
            for (auto& n : f.mitigations) os << " " << n;
            os << ";\n";
        }
        if (!f.resumptions.empty()) {
            os << "  resumedBy";
            for (auto& n : f.resumptions) os << " " << n;
            os << ";\n";
        }
        os << "}\n\n";
    }

    for (auto& a : m.actions) {
        os << "Action " << a.name << " : " << to_string(a.kind) << " {\n";
        if (!a.sync_event.empty()) os << "  event " << a.sync_event << ";\n";
        if (a.when && !is_true_lit(a.when))
            os << "  when " << to_string(*a.when) << ";\n";
        if (!a.update.empty()) {
            os << "  update ";
            detail::print_assigns(os, a.update);
            os << ";\n";
        }
        if (a.target_activity || a.target_mode) {
            os << "  target";
            if (a.target_activity) os << " activity " << *a.target_activity;
            if (a.target_activity && a.target_mode) os << ",";
            if (a.target_mode) os << " mode " << *a.target_mode;
            os << ";\n";
        }
        detail::print_costs(os, a.costs, "  ");
        os << "}\n\n";
    }

    for (auto& c : m.constraints) {
        os << "constraint " << c.subject << " requiresNOf (" << c.lower << "|";
        for (size_t i = 0; i < c.over.size(); ++i)
            os << (i ? "," : "") << c.over[i];
        os << "|" << c.upper << ");\n";
    }
    if (!m.constraints.empty()) os << "\n";

    auto print_grad = [&](const GradientMatrix& g, const char* kind) {
        if (g.empty()) return;
        os << "Gradients " << kind << " {\n";
        for (size_t i = 0; i < g.labels.size(); ++i) {
            os << "  " << g.labels[i] << " :";
            for (double v : g.entries[i]) os << " " << fmt_num(v);
            os << ";\n";
        }
        os << "}\n\n";
    };
    print_grad(m.activity_gradients, "activity");
    print_grad(m.mode_gradients, "mode");

    if (!m.initial.empty()) {
        os << "Init {\n";
        for (auto& [k, v] : m.initial) {
            os << "  " << k << " = ";
            const VarDecl* vd = m.find_var(k);
            if (vd && vd->is_bool) os << (v ? "true" : "false");
            else os << v;
            os << ";\n";
        }
        os << "}\n";
    }
    return os.str();
}

} // namespace riskmc
