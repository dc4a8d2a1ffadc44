// Semantic validation of parsed risk models. All rule violations are
// collected as diagnostics; parse_risk_model turns the first error into a
// ParseError so that only well-formed models reach the compiler.
#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "riskmc/model.hpp"
#include "riskmc/parser.hpp"

namespace riskmc {

enum class Severity { Error, Warning };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::string rule;      // short identifier of the violated rule
    std::string message;

    bool operator<(const Diagnostic& o) const {
        return std::tie(rule, message) < std::tie(o.rule, o.message);
    }
    bool operator==(const Diagnostic&) const = default;
};

namespace detail {

enum class Ty { Bool, Int, Unknown };

// Expression typing scope: declared variables plus the compiler-provided
// `act`/`mode` pseudo-variables whose enum constants are the declared
// activity and mode names.
struct Scope {
    const RiskModel& m;

    Ty type_of_name(const std::string& n) const {
        if (n == "act" || n == "mode") return Ty::Int;
        if (const VarDecl* v = m.find_var(n)) return v->is_bool ? Ty::Bool : Ty::Int;
        if (m.activity_index(n) >= 0 || m.mode_index(n) >= 0) return Ty::Int;
        return Ty::Unknown;
    }
};

class Checker {
public:
    explicit Checker(const RiskModel& m) : m_(m), scope_{m} {}

    std::vector<Diagnostic> run() {
        check_duplicates();
        check_basic_presence();
        check_variables();
        check_activities();
        check_factors();
        check_actions();
        check_constraints();
        check_gradients();
        check_initial();
        check_labels();
        std::sort(out_.begin(), out_.end());
        out_.erase(std::unique(out_.begin(), out_.end()), out_.end());
        return std::move(out_);
    }

private:
    void err(const std::string& rule, const std::string& msg) {
        out_.push_back({Severity::Error, rule, msg});
    }
    void warn(const std::string& rule, const std::string& msg) {
        out_.push_back({Severity::Warning, rule, msg});
    }

    template <class T, class Name>
    void dup_check(const std::vector<T>& xs, Name name, const char* what) {
        std::set<std::string> seen;
        for (auto& x : xs)
            if (!seen.insert(name(x)).second)
                err("duplicate-declaration",
                    std::string(what) + " '" + name(x) + "' declared more than once");
    }

    void check_duplicates() {
        dup_check(m_.activities, [](auto& a) { return a.name; }, "activity");
        dup_check(m_.factors, [](auto& f) { return f.name; }, "factor");
        dup_check(m_.actions, [](auto& a) { return a.name; }, "action");
        dup_check(m_.variables, [](auto& v) { return v.name; }, "variable");
        dup_check(m_.labels, [](auto& l) { return l.name; }, "label");
        std::set<std::string> modes(m_.safety_modes.begin(), m_.safety_modes.end());
        if (modes.size() != m_.safety_modes.size())
            err("duplicate-declaration", "duplicate safety mode");
        std::set<std::string> nominal;
        for (auto& a : m_.activities)
            for (auto& n : a.actions)
                if (!nominal.insert(n.name).second)
                    err("duplicate-declaration",
                        "nominal action '" + n.name + "' declared more than once");
    }

    void check_basic_presence() {
        if (m_.activities.empty()) err("empty-model", "no activity declared");
        if (m_.safety_modes.empty()) err("empty-model", "no safety mode declared");
    }

    void check_variables() {
        for (auto& v : m_.variables) {
            if (v.name == "act" || v.name == "mode" || v.name.rfind("ph_", 0) == 0)
                err("reserved-name", "variable name '" + v.name + "' is reserved");
            if (!v.is_bool && v.lo > v.hi)
                err("bad-bounds", "variable '" + v.name + "' has empty range");
            if (v.init < v.lo || v.init > v.hi)
                err("bad-bounds", "initial value of '" + v.name + "' outside bounds");
        }
    }

    void expr_check(const ExprPtr& e, const std::string& where, Ty want) {
        if (!e) {
            err("missing-expression", where + ": missing expression");
            return;
        }
        Ty got = type_expr(e, where);
        if (want != Ty::Unknown && got != Ty::Unknown && got != want)
            err("type-error", where + ": expected " +
                                  (want == Ty::Bool ? "boolean" : "integer") +
                                  " expression");
    }

    Ty type_expr(const ExprPtr& e, const std::string& where) {
        switch (e->op) {
        case ExprOp::BoolLit: return Ty::Bool;
        case ExprOp::IntLit: return Ty::Int;
        case ExprOp::Var: {
            Ty t = scope_.type_of_name(e->name);
            if (t == Ty::Unknown)
                err("unresolved-reference", where + ": unknown name '" + e->name + "'");
            return t;
        }
        case ExprOp::Not: {
            Ty t = type_expr(e->lhs, where);
            if (t == Ty::Int) err("type-error", where + ": '!' applied to integer");
            return Ty::Bool;
        }
        case ExprOp::Neg: {
            Ty t = type_expr(e->lhs, where);
            if (t == Ty::Bool) err("type-error", where + ": '-' applied to boolean");
            return Ty::Int;
        }
        case ExprOp::And:
        case ExprOp::Or: {
            Ty a = type_expr(e->lhs, where), b = type_expr(e->rhs, where);
            if (a == Ty::Int || b == Ty::Int)
                err("type-error", where + ": boolean connective over integers");
            return Ty::Bool;
        }
        case ExprOp::Eq:
        case ExprOp::Ne: {
            Ty a = type_expr(e->lhs, where), b = type_expr(e->rhs, where);
            if (a != Ty::Unknown && b != Ty::Unknown && a != b)
                err("type-error", where + ": comparison of boolean with integer");
            return Ty::Bool;
        }
        case ExprOp::Lt:
        case ExprOp::Le:
        case ExprOp::Gt:
        case ExprOp::Ge: {
            Ty a = type_expr(e->lhs, where), b = type_expr(e->rhs, where);
            if (a == Ty::Bool || b == Ty::Bool)
                err("type-error", where + ": ordered comparison of booleans");
            return Ty::Bool;
        }
        case ExprOp::Add:
        case ExprOp::Sub: {
            Ty a = type_expr(e->lhs, where), b = type_expr(e->rhs, where);
            if (a == Ty::Bool || b == Ty::Bool)
                err("type-error", where + ": arithmetic over booleans");
            return Ty::Int;
        }
        }
        return Ty::Unknown;
    }

    void check_prob(double p, const std::string& where) {
        if (!(p >= 0.0 && p <= 1.0))
            err("probability-range", where + ": probability " +
                                         detail::fmt_num(p) + " out of range [0,1]");
    }

    void check_assigns(const std::vector<Assign>& as, const std::string& where) {
        for (auto& a : as) {
            const VarDecl* v = m_.find_var(a.var);
            if (!v) {
                err("unresolved-reference",
                    where + ": assignment to unknown variable '" + a.var + "'");
                continue;
            }
            expr_check(a.value, where, v->is_bool ? Ty::Bool : Ty::Int);
        }
    }

    void check_activities() {
        for (auto& a : m_.activities) {
            for (auto& i : a.includes)
                if (!m_.find_activity(i))
                    err("unresolved-reference",
                        "activity '" + a.name + "' includes unknown activity '" + i + "'");
            for (auto& s : a.successors) {
                if (!m_.find_activity(s.target))
                    err("unresolved-reference",
                        "activity '" + a.name + "' has unknown successor '" + s.target + "'");
                expr_check(s.when, "successor of " + a.name, Ty::Bool);
                for (auto& md : s.modes)
                    if (m_.mode_index(md) < 0)
                        err("unresolved-reference",
                            "successor of '" + a.name + "' names unknown mode '" + md + "'");
            }
            for (auto& r : a.action_refs)
                if (!find_nominal(r))
                    err("unresolved-reference",
                        "activity '" + a.name + "' references unknown action '" + r + "'");
            for (auto& n : a.actions) check_nominal(n, a.name);
        }
        check_includes_acyclic();
    }

    void check_includes_acyclic() {
        // colour DFS over the includes relation
        std::set<std::string> done, path;
        bool cyclic = false;
        auto dfs = [&](auto&& self, const std::string& a) -> void {
            if (done.count(a) || cyclic) return;
            if (!path.insert(a).second) {
                cyclic = true;
                return;
            }
            if (const ActivityDecl* d = m_.find_activity(a))
                for (auto& i : d->includes) self(self, i);
            path.erase(a);
            done.insert(a);
        };
        for (auto& a : m_.activities) dfs(dfs, a.name);
        if (cyclic) err("cyclic-includes", "activity 'includes' relation has a cycle");
    }

    void check_nominal(const NominalAction& n, const std::string& act) {
        std::string where = "action " + n.name + " in " + act;
        expr_check(n.guard, where, Ty::Bool);
        double sum = 0;
        for (auto& b : n.updates) {
            check_prob(b.prob, where);
            sum += b.prob;
            check_assigns(b.assigns, where);
        }
        if (std::abs(sum - 1.0) > 1e-9)
            err("distribution-sum", where + ": update probabilities sum to " +
                                        detail::fmt_num(sum));
        for (auto& md : n.modes)
            if (m_.mode_index(md) < 0)
                err("unresolved-reference", where + ": unknown mode '" + md + "'");
        for (auto& x : n.activities)
            if (!m_.find_activity(x))
                err("unresolved-reference", where + ": unknown activity '" + x + "'");
        for (auto& [q, v] : n.costs)
            if (v < 0) err("negative-cost", where + ": cost '" + q + "' is negative");
    }

    const NominalAction* find_nominal(const std::string& name) const {
        for (auto& a : m_.activities)
            for (auto& n : a.actions)
                if (n.name == name) return &n;
        return nullptr;
    }

    bool nominal_label_exists(const std::string& label) const {
        for (auto& a : m_.activities)
            for (auto& n : a.actions)
                if (n.label() == label) return true;
        return false;
    }

    void check_factors() {
        for (auto& f : m_.factors) {
            std::string where = "factor " + f.name;
            expr_check(f.guard, where + " guard", Ty::Bool);
            expr_check(f.detected_by, where + " detectedBy", Ty::Bool);
            check_prob(f.detection_fault_prob, where + " faultProb");
            if (!f.mishap_action.empty()) {
                check_prob(f.mishap_prob, where + " mishap");
                if (!nominal_label_exists(f.mishap_action))
                    err("unresolved-reference",
                        where + ": mishap action '" + f.mishap_action +
                            "' is not a nominal action label");
            }
            if (f.severity < 0) err("negative-severity", where + ": severity < 0");
            for (auto& a : f.in_activities)
                if (!m_.find_activity(a))
                    err("unresolved-reference", where + ": unknown activity '" + a + "'");
            for (auto& n : f.mitigations) {
                const ActionDecl* d = m_.find_action(n);
                if (!d)
                    err("unresolved-reference", where + ": unresolved reference to "
                                                        "mitigation '" + n + "'");
                else if (d->kind == ActionKind::Resume)
                    err("kind-mismatch", where + ": RESUME action '" + n +
                                             "' used as a mitigation");
            }
            for (auto& n : f.resumptions) {
                const ActionDecl* d = m_.find_action(n);
                if (!d)
                    err("unresolved-reference", where + ": unresolved reference to "
                                                        "resumption '" + n + "'");
                else if (d->kind != ActionKind::Resume)
                    err("kind-mismatch", where + ": resumption '" + n +
                                             "' must have kind RESUME");
            }
            check_inverse_updates(f);
        }
    }

    // RESUME actions must explicitly invert the safety functions applied by
    // the factor's mitigations: every variable some mitigation assigns has
    // to be reassigned by each resumption.
    void check_inverse_updates(const FactorDecl& f) {
        std::set<std::string> sf_vars;
        for (auto& n : f.mitigations)
            if (const ActionDecl* d = m_.find_action(n))
                for (auto& a : d->update) sf_vars.insert(a.var);
        for (auto& n : f.resumptions) {
            const ActionDecl* d = m_.find_action(n);
            if (!d) continue;
            std::set<std::string> inv;
            for (auto& a : d->update) inv.insert(a.var);
            for (auto& v : sf_vars)
                if (!inv.count(v))
                    err("missing-inverse",
                        "resumption '" + n + "' of factor " + f.name +
                            " does not invert safety-function variable '" + v + "'");
        }
    }

    void check_actions() {
        std::set<std::string> events;
        for (auto& a : m_.actions) {
            std::string where = "action " + a.name;
            for (auto& u : a.update) {
                const VarDecl* v = m_.find_var(u.var);
                if (!v) {
                    err("unresolved-reference",
                        where + ": assignment to unknown variable '" + u.var + "'");
                    continue;
                }
                if (u.value->op != ExprOp::IntLit && u.value->op != ExprOp::BoolLit)
                    err("non-constant-update",
                        where + ": safety-function update of '" + u.var +
                            "' must assign a literal");
                else
                    expr_check(u.value, where, v->is_bool ? Ty::Bool : Ty::Int);
            }
            if (a.target_activity && m_.activity_index(*a.target_activity) < 0)
                err("unresolved-reference",
                    where + ": unknown target activity '" + *a.target_activity + "'");
            if (a.target_mode && m_.mode_index(*a.target_mode) < 0)
                err("unresolved-reference",
                    where + ": unknown target mode '" + *a.target_mode + "'");
            if (a.when) expr_check(a.when, where + " when", Ty::Bool);
            for (auto& [q, v] : a.costs)
                if (v < 0) err("negative-cost", where + ": cost '" + q + "' is negative");
            if (!a.sync_event.empty() && !events.insert(a.sync_event).second)
                warn("shared-event", "event '" + a.sync_event +
                                         "' is shared by several safety actions; "
                                         "action rewards will not distinguish them");
        }
    }

    void check_constraints() {
        for (auto& c : m_.constraints) {
            std::string where = "constraint on " + c.subject;
            if (!m_.find_factor(c.subject))
                err("unresolved-reference", where + ": unknown factor '" + c.subject + "'");
            for (auto& o : c.over) {
                if (!m_.find_factor(o))
                    err("unresolved-reference", where + ": unknown factor '" + o + "'");
                if (o == c.subject)
                    err("constraint-shape", where + ": subject occurs in its own scope");
            }
            if (c.lower < 0 || c.lower > c.upper ||
                c.upper > static_cast<long>(c.over.size()))
                err("constraint-shape",
                    where + ": bounds must satisfy 0 <= n <= m <= |over|");
        }
    }

    void check_gradient(const GradientMatrix& g, bool mode, const char* what) {
        if (g.empty()) return;
        if (g.entries.size() != g.labels.size())
            err("matrix-shape", std::string(what) + ": row count differs from label count");
        for (size_t i = 0; i < g.entries.size(); ++i)
            if (g.entries[i].size() != g.labels.size())
                err("matrix-shape", std::string(what) + ": row '" + g.labels[i] +
                                        "' has wrong width");
        for (auto& l : g.labels) {
            bool known = mode ? m_.mode_index(l) >= 0 : m_.activity_index(l) >= 0;
            if (!known)
                err("unresolved-reference",
                    std::string(what) + ": unknown label '" + l + "'");
        }
        if (g.entries.size() == g.labels.size()) {
            for (size_t i = 0; i < g.labels.size(); ++i) {
                if (g.entries[i].size() != g.labels.size()) continue;
                if (g.entries[i][i] != 0)
                    err("matrix-diagonal", std::string(what) + ": diagonal entry of '" +
                                               g.labels[i] + "' is not zero");
                for (size_t j = 0; j < i; ++j) {
                    if (g.entries[j].size() != g.labels.size()) continue;
                    if (g.entries[i][j] != -g.entries[j][i])
                        err("matrix-skew", std::string(what) + ": matrix not "
                                               "skew-symmetric at (" + g.labels[i] +
                                               "," + g.labels[j] + ")");
                }
            }
        }
    }

    void check_gradients() {
        check_gradient(m_.activity_gradients, false, "activity gradients");
        check_gradient(m_.mode_gradients, true, "mode gradients");
    }

    void check_initial() {
        for (auto& [n, v] : m_.initial) {
            if (n == "act") {
                if (v < 0 || v >= static_cast<long>(m_.activities.size()))
                    err("bad-bounds", "initial activity index out of range");
                continue;
            }
            if (n == "mode") {
                if (v < 0 || v >= static_cast<long>(m_.safety_modes.size()))
                    err("bad-bounds", "initial mode index out of range");
                continue;
            }
            const VarDecl* d = m_.find_var(n);
            if (!d) {
                err("unresolved-reference", "Init names unknown variable '" + n + "'");
                continue;
            }
            if (v < d->lo || v > d->hi)
                err("bad-bounds", "initial value of '" + n + "' outside bounds");
        }
    }

    void check_labels() {
        static const char* reserved[] = {"hazard", "unsafe", "safe", "mishap",
                                         "init", "deadlock"};
        for (auto& l : m_.labels) {
            for (auto* r : reserved)
                if (l.name == r)
                    err("reserved-name", "label '" + l.name + "' is reserved");
            if (l.name.rfind("active_", 0) == 0 || l.name.rfind("mitigated_", 0) == 0 ||
                l.name.rfind("mishap_", 0) == 0)
                err("reserved-name", "label '" + l.name + "' uses a reserved prefix");
            expr_check(l.expr, "label " + l.name, Ty::Bool);
        }
    }

    const RiskModel& m_;
    Scope scope_;
    std::vector<Diagnostic> out_;
};

} // namespace detail

inline std::vector<Diagnostic> validate(const RiskModel& m) {
    return detail::Checker(m).run();
}

inline bool has_errors(const std::vector<Diagnostic>& ds) {
    for (auto& d : ds)
        if (d.severity == Severity::Error) return true;
    return false;
}

// Parse and gate on validation: returns a model satisfying every invariant
// or throws ParseError carrying the first violated rule.
inline RiskModel parse_risk_model(const std::string& source) {
    RiskModel m = parse_syntax(source);
    auto diags = validate(m);
    for (auto& d : diags)
        if (d.severity == Severity::Error)
            throw ParseError(0, 0, d.rule + ": " + d.message);
    return m;
}

} // namespace riskmc
