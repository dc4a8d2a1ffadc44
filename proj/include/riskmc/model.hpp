// Abstract syntax of the risk-model DSL: activities with nominal actions,
// safety modes, risk factors, safety actions, constraints, gradient
// matrices, labels and variables.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "riskmc/expr.hpp"

namespace riskmc {

struct VarDecl {
    std::string name;
    bool is_bool = true;
    long lo = 0, hi = 1;       // bounds for integer variables
    Value init = 0;
    bool operator==(const VarDecl&) const = default;
};

struct Assign {
    std::string var;
    ExprPtr value;
    bool operator==(const Assign& o) const {
        return var == o.var && expr_equal(value, o.value);
    }
};

struct UpdateBranch {
    double prob = 1.0;
    std::vector<Assign> assigns;   // empty list = skip
    bool operator==(const UpdateBranch&) const = default;
};

// A nominal process command declared inline inside an Activity block.
struct NominalAction {
    std::string name;
    std::string owner;                   // actor module, e.g. robotArm
    std::string event;                   // optional shared label
    ExprPtr guard;                       // defaults to true
    std::vector<UpdateBranch> updates;   // one Dirac branch if unspecified
    std::vector<std::string> modes;      // permitted safety modes
    bool all_modes = true;
    std::vector<std::string> activities; // extra activities, "all" flag below
    bool all_activities = false;
    std::map<std::string, double> costs;

    const std::string& label() const { return event.empty() ? name : event; }
    bool operator==(const NominalAction& o) const {
        return name == o.name && owner == o.owner && event == o.event &&
               expr_equal(guard, o.guard) && updates == o.updates &&
               modes == o.modes && all_modes == o.all_modes &&
               activities == o.activities && all_activities == o.all_activities &&
               costs == o.costs;
    }
};

struct SuccessorDecl {
    std::string target;
    ExprPtr when;                      // defaults to true
    std::vector<std::string> modes;    // permitted safety modes, empty = all
    bool operator==(const SuccessorDecl& o) const {
        return target == o.target && expr_equal(when, o.when) && modes == o.modes;
    }
};

struct ActivityDecl {
    std::string name;
    std::vector<std::string> includes;
    std::vector<SuccessorDecl> successors;
    std::vector<std::string> action_refs;  // nominal actions declared elsewhere
    std::vector<NominalAction> actions;
    bool operator==(const ActivityDecl&) const = default;
};

enum class ActionKind { Shutdown, ModeSwitch, ActivitySwitch, SafetyFunction, Resume };

inline const char* to_string(ActionKind k) {
    switch (k) {
    case ActionKind::Shutdown: return "SHUTDOWN";
    case ActionKind::ModeSwitch: return "MODE_SWITCH";
    case ActionKind::ActivitySwitch: return "ACTIVITY_SWITCH";
    case ActionKind::SafetyFunction: return "SAFETY_FUNCTION";
    case ActionKind::Resume: return "RESUME";
    }
    return "?";
}

// A safety (controller) action: mitigation or resumption building block.
struct ActionDecl {
    std::string name;
    ActionKind kind = ActionKind::SafetyFunction;
    std::string sync_event;            // optional label shared with actors
    std::vector<Assign> update;        // the safety function sf (sf^-1 for RESUME)
    std::optional<std::string> target_activity;
    std::optional<std::string> target_mode;
    ExprPtr when;                      // optional extra risk-state restriction
    std::map<std::string, double> costs;
    bool operator==(const ActionDecl& o) const {
        return name == o.name && kind == o.kind && sync_event == o.sync_event &&
               update == o.update && target_activity == o.target_activity &&
               target_mode == o.target_mode && expr_equal(when, o.when) &&
               costs == o.costs;
    }
};

struct FactorDecl {
    std::string name;
    std::string description;
    ExprPtr guard;                     // activation condition (actual hazard)
    ExprPtr detected_by;               // sensor predicate
    double detection_fault_prob = 0.0;
    std::string mishap_action;         // empty = none
    double mishap_prob = 0.0;
    double severity = 0.0;
    std::vector<std::string> mitigations;
    std::vector<std::string> resumptions;
    std::vector<std::string> in_activities;  // empty = relevant everywhere
    bool operator==(const FactorDecl& o) const {
        return name == o.name && description == o.description &&
               expr_equal(guard, o.guard) && expr_equal(detected_by, o.detected_by) &&
               detection_fault_prob == o.detection_fault_prob &&
               mishap_action == o.mishap_action && mishap_prob == o.mishap_prob &&
               severity == o.severity && mitigations == o.mitigations &&
               resumptions == o.resumptions && in_activities == o.in_activities;
    }
};

// subject requiresNOf (n | over... | m)
struct Constraint {
    std::string subject;
    long lower = 0, upper = 0;
    std::vector<std::string> over;
    bool operator==(const Constraint&) const = default;
};

struct GradientMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> entries;

    bool empty() const { return labels.empty(); }
    int index_of(const std::string& l) const {
        for (size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == l) return static_cast<int>(i);
        return -1;
    }
    bool operator==(const GradientMatrix&) const = default;
};

struct LabelDecl {
    std::string name;
    ExprPtr expr;
    bool operator==(const LabelDecl& o) const {
        return name == o.name && expr_equal(expr, o.expr);
    }
};

struct RiskModel {
    std::string name;
    std::vector<ActivityDecl> activities;
    std::vector<std::string> safety_modes;   // declaration order matters
    std::vector<FactorDecl> factors;
    std::vector<ActionDecl> actions;
    std::vector<Constraint> constraints;
    GradientMatrix activity_gradients;
    GradientMatrix mode_gradients;
    std::vector<VarDecl> variables;
    std::map<std::string, Value> initial;    // overrides per-variable init
    std::vector<LabelDecl> labels;

    const ActivityDecl* find_activity(const std::string& n) const {
        for (auto& a : activities) if (a.name == n) return &a;
        return nullptr;
    }
    const ActionDecl* find_action(const std::string& n) const {
        for (auto& a : actions) if (a.name == n) return &a;
        return nullptr;
    }
    const FactorDecl* find_factor(const std::string& n) const {
        for (auto& f : factors) if (f.name == n) return &f;
        return nullptr;
    }
    const VarDecl* find_var(const std::string& n) const {
        for (auto& v : variables) if (v.name == n) return &v;
        return nullptr;
    }
    int mode_index(const std::string& n) const {
        for (size_t i = 0; i < safety_modes.size(); ++i)
            if (safety_modes[i] == n) return static_cast<int>(i);
        return -1;
    }
    int activity_index(const std::string& n) const {
        for (size_t i = 0; i < activities.size(); ++i)
            if (activities[i].name == n) return static_cast<int>(i);
        return -1;
    }
    bool operator==(const RiskModel&) const = default;
};

// Drops all factors outside `keep`, together with constraints that mention a
// dropped factor and safety actions no kept factor references. Used to build
// the incremental case-study models.
inline RiskModel restricted_to_factors(const RiskModel& m,
                                       const std::vector<std::string>& keep) {
    auto kept = [&](const std::string& n) {
        for (auto& k : keep) if (k == n) return true;
        return false;
    };
    RiskModel r = m;
    r.factors.clear();
    for (auto& f : m.factors)
        if (kept(f.name)) r.factors.push_back(f);
    r.constraints.clear();
    for (auto& c : m.constraints) {
        bool ok = kept(c.subject);
        for (auto& o : c.over) ok = ok && kept(o);
        if (ok) r.constraints.push_back(c);
    }
    r.actions.clear();
    for (auto& a : m.actions) {
        bool used = false;
        for (auto& f : r.factors) {
            for (auto& n : f.mitigations) used = used || n == a.name;
            for (auto& n : f.resumptions) used = used || n == a.name;
        }
        if (used) r.actions.push_back(a);
    }
    // actor commands answering a dropped controller event would become
    // free-running no-ops; drop them with their controller
    std::set<std::string> kept_events, all_events;
    for (auto& a : m.actions)
        if (!a.sync_event.empty()) all_events.insert(a.sync_event);
    for (auto& a : r.actions)
        if (!a.sync_event.empty()) kept_events.insert(a.sync_event);
    for (auto& act : r.activities) {
        std::vector<NominalAction> keep_actions;
        for (auto& n : act.actions) {
            bool orphan = !n.event.empty() && all_events.count(n.event) &&
                          !kept_events.count(n.event);
            if (!orphan) keep_actions.push_back(n);
        }
        act.actions = std::move(keep_actions);
    }
    return r;
}

} // namespace riskmc
