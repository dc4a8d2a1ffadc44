// Compilation of a validated risk model into a guarded-command program:
// actor modules with mode/activity filters, monitor modules carrying the
// factor phase machines, the controller module with staged mitigations and
// resumptions, labels, and action-reward structures.
#pragma once

#include <algorithm>
#include <set>

#include "riskmc/mdp.hpp"
#include "riskmc/risk.hpp"
#include "riskmc/validate.hpp"

namespace riskmc {

struct TranslateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MonitorPredicates {
    ExprPtr actual;   // the real hazard condition
    ExprPtr sensed;   // the monitored condition, strengthened by constraints
};

namespace detail {

inline ExprPtr phase_var(const std::string& factor) {
    return Expr::var("ph_" + factor);
}
inline ExprPtr phase_is(const std::string& factor, Phase p) {
    return Expr::binary(ExprOp::Eq, phase_var(factor),
                        Expr::lit(static_cast<long>(p)));
}
inline ExprPtr phase_in_active(const std::string& factor) {
    return Expr::binary(ExprOp::Or, phase_is(factor, Phase::Active),
                        phase_is(factor, Phase::ActiveUndetected));
}
inline ExprPtr occurred_expr(const std::string& factor) {
    return Expr::binary(ExprOp::Ne, phase_var(factor), Expr::lit(0L));
}

inline ExprPtr disjunction(std::vector<ExprPtr> xs) {
    if (xs.empty()) return expr_false();
    ExprPtr e = xs[0];
    for (size_t i = 1; i < xs.size(); ++i) e = Expr::binary(ExprOp::Or, e, xs[i]);
    return e;
}

// "exactly j of terms[0..i) hold" as a shared-subtree DP, used to express
// requiresNOf counts without arithmetic over booleans.
inline ExprPtr count_in_range(const std::vector<ExprPtr>& terms, long lo, long hi) {
    size_t k = terms.size();
    std::vector<std::vector<ExprPtr>> dp(k + 1);
    dp[0] = {expr_true()};
    for (size_t i = 1; i <= k; ++i) {
        dp[i].resize(i + 1);
        for (size_t j = 0; j <= i; ++j) {
            ExprPtr take = j > 0 && j - 1 < dp[i - 1].size()
                               ? Expr::binary(ExprOp::And, terms[i - 1], dp[i - 1][j - 1])
                               : nullptr;
            ExprPtr skip = j < dp[i - 1].size()
                               ? Expr::binary(ExprOp::And, expr_not(terms[i - 1]),
                                              dp[i - 1][j])
                               : nullptr;
            if (take && skip) dp[i][j] = Expr::binary(ExprOp::Or, take, skip);
            else dp[i][j] = take ? take : skip;
        }
    }
    std::vector<ExprPtr> range;
    for (long j = std::max(0L, lo); j <= hi && j <= static_cast<long>(k); ++j)
        range.push_back(dp[k][j]);
    return disjunction(std::move(range));
}

} // namespace detail

// Gradient gate: mitigations may only switch towards non-negative gradients,
// resumptions towards non-positive ones; otherwise the current value is kept.
enum class SwitchKind { Mitigation, Resumption };

inline std::string resolve_target(const GradientMatrix& g, const std::string& current,
                                  const std::string& target, SwitchKind kind) {
    if (g.empty()) return target;  // no gradient information, switch permitted
    int ci = g.index_of(current), ti = g.index_of(target);
    if (ci < 0) throw TranslateError("gradient matrix has no label '" + current + "'");
    if (ti < 0) throw TranslateError("gradient matrix has no label '" + target + "'");
    double grad = g.entries[ci][ti];
    bool ok = kind == SwitchKind::Mitigation ? grad >= 0 : grad <= 0;
    return ok ? target : current;
}

namespace detail {

// Shared tables of one compilation run.
class Translation {
public:
    explicit Translation(const RiskModel& m) : m_(m) {
        for (size_t i = 0; i < m.activities.size(); ++i)
            activity_index_[m.activities[i].name] = static_cast<long>(i);
        for (size_t i = 0; i < m.safety_modes.size(); ++i)
            mode_index_[m.safety_modes[i]] = static_cast<long>(i);
        compute_action_sets();
        final_ = expr_false();
        for (auto& l : m.labels)
            if (l.name == "final") final_ = resolve(l.expr);
        pending_ = expr_false();
        for (auto& f : m.factors) {
            ExprPtr p = pending_of(f);
            pending_ = expr_equal(pending_, expr_false()) ? p
                       : Expr::binary(ExprOp::Or, pending_, p);
        }
    }

    const RiskModel& model() const { return m_; }

    // DSL expressions may compare the act/mode pseudo-variables against
    // declared names; compilation replaces those names by indices.
    ExprPtr resolve(const ExprPtr& e) const {
        if (!e) return e;
        if (e->op == ExprOp::Var) {
            auto a = activity_index_.find(e->name);
            if (a != activity_index_.end()) return Expr::lit(a->second);
            auto md = mode_index_.find(e->name);
            if (md != mode_index_.end()) return Expr::lit(md->second);
            return e;
        }
        if (!e->lhs && !e->rhs) return e;
        auto c = std::make_shared<Expr>(*e);
        c->lhs = resolve(e->lhs);
        c->rhs = resolve(e->rhs);
        return c;
    }

    ExprPtr not_final() const { return expr_not(final_); }
    ExprPtr final_expr() const { return final_; }
    ExprPtr pending_any() const { return pending_; }

    long activity_id(const std::string& n) const {
        auto it = activity_index_.find(n);
        if (it == activity_index_.end())
            throw TranslateError("unknown activity '" + n + "'");
        return it->second;
    }
    long mode_id(const std::string& n) const {
        auto it = mode_index_.find(n);
        if (it == mode_index_.end()) throw TranslateError("unknown mode '" + n + "'");
        return it->second;
    }

    ExprPtr mode_filter(const std::vector<std::string>& modes, bool all) const {
        if (all || modes.empty()) return expr_true();
        std::vector<ExprPtr> xs;
        for (auto& md : modes)
            xs.push_back(Expr::binary(ExprOp::Eq, Expr::var("mode"),
                                      Expr::lit(mode_id(md))));
        return disjunction(std::move(xs));
    }

    ExprPtr activity_filter_for(const NominalAction& n) const {
        if (n.all_activities) return expr_true();
        auto it = action_activities_.find(n.name);
        std::vector<ExprPtr> xs;
        for (long a : it->second)
            xs.push_back(Expr::binary(ExprOp::Eq, Expr::var("act"), Expr::lit(a)));
        return disjunction(std::move(xs));
    }

    ExprPtr factor_activity_filter(const FactorDecl& f) const {
        if (f.in_activities.empty()) return expr_true();
        std::vector<ExprPtr> xs;
        for (auto& a : f.in_activities)
            xs.push_back(Expr::binary(ExprOp::Eq, Expr::var("act"),
                                      Expr::lit(activity_id(a))));
        return disjunction(std::move(xs));
    }

    // Conjunction of the factor's requiresNOf constraints over phases; gates
    // both activation and detection, mirroring the risk-space pruning.
    ExprPtr constraint_terms(const FactorDecl& f) const {
        ExprPtr e = expr_true();
        for (auto& c : m_.constraints) {
            if (c.subject != f.name) continue;
            std::vector<ExprPtr> terms;
            for (auto& o : c.over) terms.push_back(occurred_expr(o));
            e = expr_and(e, count_in_range(terms, c.lower, c.upper));
        }
        return e;
    }

    // Sensor predicate strengthened by the factor's own constraints.
    ExprPtr sensed_of(const FactorDecl& f) const {
        return expr_and(resolve(f.detected_by), constraint_terms(f));
    }

    ExprPtr actual_of(const FactorDecl& f) const {
        return expr_and(resolve(f.guard), constraint_terms(f));
    }

    ExprPtr pending_of(const FactorDecl& f) const {
        return Expr::binary(
            ExprOp::And, factor_activity_filter(f),
            Expr::binary(ExprOp::And, sensed_of(f), phase_is(f.name, Phase::Inactive)));
    }

    const std::set<long>& activities_of(const std::string& nominal_name) const {
        return action_activities_.at(nominal_name);
    }

private:
    // Availability closure: an action declared in A is available in A, in
    // activities listing it under `actions`, and in activities that include
    // its hosts (transitively).
    void compute_action_sets() {
        std::map<std::string, std::set<std::string>> host;  // action -> activities
        for (auto& a : m_.activities) {
            for (auto& n : a.actions) host[n.name].insert(a.name);
            for (auto& r : a.action_refs) host[r].insert(a.name);
        }
        // include closure per activity
        std::map<std::string, std::set<std::string>> closure;
        auto expand = [&](auto&& self, const std::string& act) -> std::set<std::string>& {
            auto it = closure.find(act);
            if (it != closure.end()) return it->second;
            auto& set = closure[act];
            set.insert(act);
            if (const ActivityDecl* d = m_.find_activity(act))
                for (auto& i : d->includes) {
                    auto& inner = self(self, i);
                    set.insert(inner.begin(), inner.end());
                }
            return set;
        };
        for (auto& a : m_.activities) expand(expand, a.name);
        for (auto& [name, hosts] : host) {
            auto& out = action_activities_[name];
            for (auto& a : m_.activities)
                for (auto& h : hosts)
                    if (closure[a.name].count(h)) out.insert(activity_id(a.name));
        }
    }

    const RiskModel& m_;
    std::map<std::string, long> activity_index_;
    std::map<std::string, long> mode_index_;
    std::map<std::string, std::set<long>> action_activities_;
    ExprPtr final_, pending_;
};

inline Command make_command(std::string label, std::string owner,
                            std::vector<ExprPtr> parts,
                            std::vector<UpdateBranch> updates) {
    Command c;
    c.label = std::move(label);
    c.owner = std::move(owner);
    c.guard_parts = parts;
    ExprPtr g = parts.empty() ? expr_true() : parts[0];
    for (size_t i = 1; i < parts.size(); ++i) g = expr_and(g, parts[i]);
    if (is_true_lit(g)) g = expr_true();
    c.guard = g;
    c.updates = std::move(updates);
    return c;
}

inline UpdateBranch dirac(std::vector<Assign> as) { return UpdateBranch{1.0, std::move(as)}; }

inline Assign set_phase(const std::string& factor, Phase p) {
    return Assign{"ph_" + factor, Expr::lit(static_cast<long>(p))};
}

} // namespace detail

inline MonitorPredicates monitor_predicates(const RiskModel& m, const FactorDecl& f) {
    detail::Translation t(m);
    return MonitorPredicates{t.resolve(f.guard), t.sensed_of(f)};
}

// Endangerment commands: an undetected activation guarded by the actual
// hazard condition arising outside the sensed predicate, and the sensed
// activation whose detection fails with the declared fault probability.
inline std::vector<Command> gen_endangerments(const RiskModel& m, const FactorDecl& f) {
    detail::Translation t(m);
    using namespace detail;
    std::vector<Command> out;
    std::string mon = "monitor_" + f.name;
    ExprPtr inact = phase_is(f.name, Phase::Inactive);

    out.push_back(make_command(
        "e_" + f.name + "_u", mon,
        {t.not_final(), t.factor_activity_filter(f),
         expr_and(expr_and(t.actual_of(f), expr_not(t.sensed_of(f))), inact)},
        {dirac({set_phase(f.name, Phase::ActiveUndetected)})}));

    double p = f.detection_fault_prob;
    std::vector<UpdateBranch> branches;
    if (p <= 0) {
        branches.push_back(dirac({set_phase(f.name, Phase::Active)}));
    } else if (p >= 1) {
        branches.push_back(dirac({set_phase(f.name, Phase::ActiveUndetected)}));
    } else {
        branches.push_back(UpdateBranch{1.0 - p, {set_phase(f.name, Phase::Active)}});
        branches.push_back(UpdateBranch{p, {set_phase(f.name, Phase::ActiveUndetected)}});
    }
    out.push_back(make_command("e_" + f.name, mon,
                               {t.not_final(), t.factor_activity_filter(f),
                                expr_and(t.sensed_of(f), inact)},
                               std::move(branches)));
    return out;
}

// Mishap commands synchronise with the declared environment action: while
// the factor is in an active phase and its hazard condition holds, taking
// that action reaches the mishap phase with the declared probability. The
// complementary command keeps the label enabled elsewhere.
inline std::vector<Command> gen_mishap(const RiskModel& m, const FactorDecl& f) {
    detail::Translation t(m);
    using namespace detail;
    std::vector<Command> out;
    if (f.mishap_action.empty() || f.mishap_prob <= 0) return out;
    std::string mon = "monitor_" + f.name;
    ExprPtr risky = expr_and(t.resolve(f.guard), phase_in_active(f.name));

    std::vector<UpdateBranch> branches;
    if (f.mishap_prob >= 1) {
        branches.push_back(dirac({set_phase(f.name, Phase::Mishap)}));
    } else {
        branches.push_back(UpdateBranch{f.mishap_prob, {set_phase(f.name, Phase::Mishap)}});
        branches.push_back(UpdateBranch{1.0 - f.mishap_prob, {}});
    }
    out.push_back(make_command(f.mishap_action, mon, {risky}, std::move(branches)));
    out.push_back(make_command(f.mishap_action, mon, {expr_not(risky)},
                               {dirac({})}));
    return out;
}

namespace detail {

// Modes (or activities) from which the gradient permits switching to
// `target`; the complementary set keeps the current value.
struct SwitchPlan {
    std::vector<long> movable;    // indices with a permitted switch
    std::vector<long> blocked;    // indices where the gradient refuses
    long target = -1;
};

inline SwitchPlan plan_switch(const GradientMatrix& g,
                              const std::vector<std::string>& domain,
                              const std::string& target, SwitchKind kind,
                              const Translation& t, bool mode_domain) {
    SwitchPlan plan;
    plan.target = mode_domain ? t.mode_id(target) : t.activity_id(target);
    if (!g.empty() && g.index_of(target) < 0)
        throw TranslateError("gradient matrix has no label '" + target + "'");
    for (size_t i = 0; i < domain.size(); ++i) {
        if (domain[i] == target) continue;
        // values outside the matrix (e.g. activity groups) never switch
        if (!g.empty() && g.index_of(domain[i]) < 0) {
            plan.blocked.push_back(static_cast<long>(i));
            continue;
        }
        std::string res = resolve_target(g, domain[i], target, kind);
        (res == target ? plan.movable : plan.blocked).push_back(static_cast<long>(i));
    }
    return plan;
}

inline ExprPtr var_in(const std::string& var, const std::vector<long>& vals) {
    std::vector<ExprPtr> xs;
    for (long v : vals)
        xs.push_back(Expr::binary(ExprOp::Eq, Expr::var(var), Expr::lit(v)));
    return disjunction(std::move(xs));
}

// Post-state check of a staged switch: either the target was reached or the
// gradient blocked the move and the current value legitimately remains.
inline ExprPtr switch_done(const std::string& var, const SwitchPlan& plan) {
    ExprPtr done = Expr::binary(ExprOp::Eq, Expr::var(var), Expr::lit(plan.target));
    if (plan.blocked.empty()) return done;
    return Expr::binary(ExprOp::Or, done, var_in(var, plan.blocked));
}

inline ExprPtr applied_expr(const std::vector<Assign>& sf) {
    ExprPtr e = expr_true();
    for (auto& a : sf)
        e = expr_and(e, Expr::binary(ExprOp::Eq, Expr::var(a.var), a.value));
    return e;
}

// Staged commands for one mitigation or resumption: separately guarded
// mode / activity / safety-function steps plus the closing command that
// commits the phase change once every post-condition holds.
inline std::vector<Command> gen_handler(const Translation& t, const FactorDecl& f,
                                        const ActionDecl& a, SwitchKind kind) {
    const RiskModel& m = t.model();
    std::vector<Command> out;
    Phase from = kind == SwitchKind::Mitigation ? Phase::Active : Phase::Mitigated;
    Phase to = kind == SwitchKind::Mitigation ? Phase::Mitigated : Phase::Inactive;
    ExprPtr in_phase = phase_is(f.name, from);
    ExprPtr restrict = a.when ? t.resolve(a.when) : expr_true();
    ExprPtr rho = expr_and(in_phase, restrict);

    ExprPtr post_sm = expr_true(), post_a = expr_true(), post_sf = expr_true();

    if (a.target_mode) {
        SwitchPlan plan = plan_switch(m.mode_gradients, m.safety_modes, *a.target_mode,
                                      kind, t, true);
        if (!plan.movable.empty())
            out.push_back(make_command(
                a.name + ".sm", "asc",
                {t.not_final(), var_in("mode", plan.movable), rho},
                {dirac({Assign{"mode", Expr::lit(plan.target)}})}));
        post_sm = switch_done("mode", plan);
    }
    if (a.target_activity) {
        std::vector<std::string> names;
        for (auto& act : m.activities) names.push_back(act.name);
        SwitchPlan plan = plan_switch(m.activity_gradients, names, *a.target_activity,
                                      kind, t, false);
        if (!plan.movable.empty())
            out.push_back(make_command(
                a.name + ".a", "asc",
                {t.not_final(), var_in("act", plan.movable), rho},
                {dirac({Assign{"act", Expr::lit(plan.target)}})}));
        post_a = switch_done("act", plan);
    }
    if (!a.update.empty()) {
        std::vector<Assign> sf;
        for (auto& u : a.update) sf.push_back(Assign{u.var, t.resolve(u.value)});
        out.push_back(make_command(a.name + ".sf", "asc",
                                   {t.not_final(), expr_not(applied_expr(sf)), rho},
                                   {dirac(sf)}));
        post_sf = applied_expr(sf);
    }

    std::string closing = a.sync_event.empty() ? a.name : a.sync_event;
    ExprPtr posts = expr_and(expr_and(post_sm, post_a), post_sf);
    out.push_back(make_command(closing, "asc", {t.not_final(), posts, rho},
                               {dirac({set_phase(f.name, to)})}));
    return out;
}

} // namespace detail

inline std::vector<Command> gen_mitigations(const RiskModel& m, const FactorDecl& f) {
    detail::Translation t(m);
    std::vector<Command> out;
    for (auto& name : f.mitigations) {
        const ActionDecl* a = m.find_action(name);
        if (!a) throw TranslateError("unresolved mitigation '" + name + "'");
        auto cs = detail::gen_handler(t, f, *a, SwitchKind::Mitigation);
        out.insert(out.end(), cs.begin(), cs.end());
    }
    return out;
}

inline std::vector<Command> gen_resumptions(const RiskModel& m, const FactorDecl& f) {
    detail::Translation t(m);
    std::vector<Command> out;
    for (auto& name : f.resumptions) {
        const ActionDecl* a = m.find_action(name);
        if (!a) throw TranslateError("unresolved resumption '" + name + "'");
        auto cs = detail::gen_handler(t, f, *a, SwitchKind::Resumption);
        out.insert(out.end(), cs.begin(), cs.end());
    }
    return out;
}

// Action-reward structures: production value and processing time of nominal
// actions, severity-weighted hazard presence on environment actions, risk
// reduction potential, and the declared nuisance / effort / disruption
// quantities of the controller actions; severity on mishap-capable actions.
inline std::vector<RewardStructure> gen_rewards(const RiskModel& m) {
    detail::Translation t(m);
    using namespace detail;

    auto closing_label = [](const ActionDecl& a) {
        return a.sync_event.empty() ? a.name : a.sync_event;
    };

    RewardStructure prod{"prod", {}}, time{"time", {}}, risk{"risk", {}},
        pot{"pot", {}}, nuis{"nuis", {}}, eff{"eff", {}}, disr{"disr", {}},
        sev{"sev", {}};

    std::set<std::string> env_labels;
    for (auto& act : m.activities) {
        for (auto& n : act.actions) {
            env_labels.insert(n.label());
            auto it = n.costs.find("value");
            if (it != n.costs.end() && it->second > 0)
                prod.entries.push_back({nullptr, n.label(), it->second});
            it = n.costs.find("time");
            if (it != n.costs.end() && it->second > 0)
                time.entries.push_back({nullptr, n.label(), it->second});
        }
        for (auto& s : act.successors)
            env_labels.insert("adv_" + act.name + "_" + s.target);
    }

    for (auto& f : m.factors) {
        if (f.severity > 0)
            for (auto& l : env_labels)
                risk.entries.push_back({phase_in_active(f.name), l, f.severity});
        for (auto& name : f.mitigations) {
            const ActionDecl* a = m.find_action(name);
            if (!a) continue;
            double v = f.severity;
            auto it = a->costs.find("pot");
            if (it != a->costs.end()) v = it->second;
            if (v > 0)
                pot.entries.push_back({phase_is(f.name, Phase::Active),
                                       closing_label(*a), v});
        }
        if (!f.mishap_action.empty() && f.mishap_prob > 0 && f.severity > 0)
            sev.entries.push_back(
                {expr_and(t.resolve(f.guard), phase_in_active(f.name)),
                 f.mishap_action, f.severity});
    }

    for (auto& a : m.actions) {
        auto add = [&](RewardStructure& r, const char* q) {
            auto it = a.costs.find(q);
            if (it != a.costs.end() && it->second > 0)
                r.entries.push_back({nullptr, closing_label(a), it->second});
        };
        add(nuis, "nuisance");
        add(eff, "effort");
        add(disr, "disruption");
    }

    return {prod, time, risk, pot, nuis, eff, disr, sev};
}

// Full compilation. Module order fixes the deterministic tie-break of the
// builder: process and actor modules first, then the controller, then the
// per-factor monitors.
inline GuardedProgram compile(const RiskModel& m) {
    auto diags = validate(m);
    if (has_errors(diags)) {
        std::string msg = "model does not validate:";
        for (auto& d : diags)
            if (d.severity == Severity::Error) msg += "\n  " + d.message;
        throw TranslateError(msg);
    }

    detail::Translation t(m);
    using namespace detail;
    GuardedProgram p;

    // ---- variables ----
    auto init_of = [&](const std::string& name, Value dflt) {
        auto it = m.initial.find(name);
        return it == m.initial.end() ? dflt : it->second;
    };
    p.variables.push_back(VarDecl{"act", false, 0,
                                  static_cast<long>(m.activities.size()) - 1,
                                  init_of("act", 0)});
    p.variables.push_back(VarDecl{"mode", false, 0,
                                  static_cast<long>(m.safety_modes.size()) - 1,
                                  init_of("mode", 0)});
    for (auto& v : m.variables) {
        VarDecl d = v;
        d.init = init_of(v.name, v.init);
        p.variables.push_back(d);
    }
    for (auto& f : m.factors)
        p.variables.push_back(VarDecl{"ph_" + f.name, false, 0, 5, 0});

    ExprPtr guard_rest_filter = expr_not(t.pending_any());

    // ---- process module: activity automaton ----
    Module cell{"cell", {}};
    for (auto& a : m.activities) {
        for (auto& s : a.successors) {
            ExprPtr phi_a = Expr::binary(ExprOp::Eq, Expr::var("act"),
                                         Expr::lit(t.activity_id(a.name)));
            cell.commands.push_back(make_command(
                "adv_" + a.name + "_" + s.target, "cell",
                {t.not_final(), t.mode_filter(s.modes, s.modes.empty()), phi_a,
                 expr_and(guard_rest_filter, t.resolve(s.when))},
                {dirac({Assign{"act", Expr::lit(t.activity_id(s.target))}})}));
        }
    }

    // ---- actor modules, in first-appearance order of owners ----
    std::vector<std::string> owner_order;
    for (auto& a : m.activities)
        for (auto& n : a.actions)
            if (std::find(owner_order.begin(), owner_order.end(), n.owner) ==
                owner_order.end())
                owner_order.push_back(n.owner);
    std::map<std::string, Module> actor;
    for (auto& o : owner_order) actor[o] = Module{o, {}};
    for (auto& a : m.activities) {
        for (auto& n : a.actions) {
            std::vector<UpdateBranch> ups;
            for (auto& b : n.updates) {
                UpdateBranch nb;
                nb.prob = b.prob;
                for (auto& as : b.assigns)
                    nb.assigns.push_back(Assign{as.var, t.resolve(as.value)});
                ups.push_back(std::move(nb));
            }
            actor[n.owner].commands.push_back(make_command(
                n.label(), n.owner,
                {t.not_final(), t.mode_filter(n.modes, n.all_modes),
                 t.activity_filter_for(n),
                 expr_and(guard_rest_filter, t.resolve(n.guard))},
                std::move(ups)));
        }
    }

    // ---- controller and monitors ----
    Module asc{"asc", {}};
    std::vector<Module> monitors;
    for (auto& f : m.factors) {
        for (auto& name : f.mitigations) {
            auto cs = gen_handler(t, f, *m.find_action(name), SwitchKind::Mitigation);
            asc.commands.insert(asc.commands.end(), cs.begin(), cs.end());
        }
        for (auto& name : f.resumptions) {
            auto cs = gen_handler(t, f, *m.find_action(name), SwitchKind::Resumption);
            asc.commands.insert(asc.commands.end(), cs.begin(), cs.end());
        }
        Module mon{"monitor_" + f.name, {}};
        auto es = gen_endangerments(m, f);
        mon.commands.insert(mon.commands.end(), es.begin(), es.end());
        auto ms = gen_mishap(m, f);
        mon.commands.insert(mon.commands.end(), ms.begin(), ms.end());
        if (!f.mishap_action.empty() && f.mishap_prob > 0)
            mon.commands.push_back(make_command(
                "alleviate_" + f.name, mon.name,
                {t.not_final(), phase_is(f.name, Phase::Mishap)}, {dirac({})}));
        monitors.push_back(std::move(mon));
    }

    p.modules.push_back(std::move(cell));
    for (auto& o : owner_order) p.modules.push_back(std::move(actor[o]));
    p.modules.push_back(std::move(asc));
    for (auto& mon : monitors) p.modules.push_back(std::move(mon));

    // ---- labels ----
    bool has_final = false;
    for (auto& l : m.labels) {
        p.labels.push_back(LabelDecl{l.name, t.resolve(l.expr)});
        has_final = has_final || l.name == "final";
    }
    if (!has_final) p.labels.push_back(LabelDecl{"final", expr_false()});

    std::vector<ExprPtr> all_active, all_mishap, all_unsafe;
    for (auto& f : m.factors) {
        p.labels.push_back(LabelDecl{"active_" + f.name, phase_in_active(f.name)});
        p.labels.push_back(LabelDecl{
            "mitigated_" + f.name,
            Expr::binary(ExprOp::Or, phase_is(f.name, Phase::Mitigated),
                         phase_is(f.name, Phase::MitigatedPartial))});
        p.labels.push_back(LabelDecl{"mishap_" + f.name, phase_is(f.name, Phase::Mishap)});
        all_active.push_back(phase_in_active(f.name));
        all_mishap.push_back(phase_is(f.name, Phase::Mishap));
        all_unsafe.push_back(
            Expr::binary(ExprOp::Or, phase_is(f.name, Phase::Active), t.pending_of(f)));
    }
    ExprPtr hazard = disjunction(all_active);
    ExprPtr mishap = disjunction(all_mishap);
    ExprPtr unsafe = disjunction(all_unsafe);
    p.labels.push_back(LabelDecl{"hazard", hazard});
    p.labels.push_back(LabelDecl{"mishap", mishap});
    p.labels.push_back(LabelDecl{"unsafe", unsafe});
    p.labels.push_back(LabelDecl{
        "safe", expr_and(expr_not(unsafe), expr_not(mishap))});

    auto errs = check_program(p);
    if (!errs.empty())
        throw TranslateError("compiled program is inconsistent: " + errs.front());
    return p;
}

} // namespace riskmc
