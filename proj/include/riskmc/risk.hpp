// Risk-factor semantics: the phase transition system of a factor, the risk
// space spanned by a factor set, and requiresNOf constraint evaluation.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "riskmc/model.hpp"

namespace riskmc {

// Runtime phases of a factor. The first three are the core phases that span
// the risk space; the extended set appears in compiled programs.
enum class Phase : int {
    Inactive = 0,
    Active = 1,
    ActiveUndetected = 2,
    Mitigated = 3,
    MitigatedPartial = 4,
    Mishap = 5,
};

inline const char* to_string(Phase p) {
    switch (p) {
    case Phase::Inactive: return "inactive";
    case Phase::Active: return "active";
    case Phase::ActiveUndetected: return "active_undetected";
    case Phase::Mitigated: return "mitigated";
    case Phase::MitigatedPartial: return "mitigated_partial";
    case Phase::Mishap: return "mishap";
    }
    return "?";
}

inline bool occurred(Phase p) { return p != Phase::Inactive; }

struct PhaseTransition {
    Phase from, to;
    std::string label;
    bool operator==(const PhaseTransition&) const = default;
};

struct LabelledTransitionSystem {
    std::vector<Phase> phases;
    std::vector<PhaseTransition> transitions;

    bool has_edge(Phase a, Phase b) const {
        for (auto& t : transitions)
            if (t.from == a && t.to == b) return true;
        return false;
    }
};

// Phase graph of one factor: endangerments from inactive (detected and
// undetected variants) and re-activation from mitigated, one mitigation edge
// per declared option, partial-mitigation chaining when two or more options
// exist, resumptions back to inactive, mishap from the active phases and a
// consequence-handling self-loop on mishap.
inline LabelledTransitionSystem factor_lts(const FactorDecl& f) {
    LabelledTransitionSystem lts;
    bool mishap = !f.mishap_action.empty() && f.mishap_prob > 0;
    lts.phases = {Phase::Inactive, Phase::Active, Phase::ActiveUndetected,
                  Phase::Mitigated, Phase::MitigatedPartial};
    if (mishap) lts.phases.push_back(Phase::Mishap);

    auto add = [&](Phase a, Phase b, const std::string& l) {
        lts.transitions.push_back({a, b, l});
    };
    add(Phase::Inactive, Phase::Active, "e_" + f.name);
    add(Phase::Inactive, Phase::ActiveUndetected, "e_" + f.name + "'");
    add(Phase::Mitigated, Phase::Active, "e_" + f.name);  // re-activation
    for (auto& mname : f.mitigations) add(Phase::Active, Phase::Mitigated, mname);
    if (f.mitigations.size() >= 2) {
        for (auto& m1 : f.mitigations) {
            add(Phase::Active, Phase::MitigatedPartial, m1);
            for (auto& m2 : f.mitigations)
                if (m2 != m1) add(Phase::MitigatedPartial, Phase::Mitigated, m2);
        }
    }
    for (auto& rname : f.resumptions) add(Phase::Mitigated, Phase::Inactive, rname);
    if (mishap) {
        add(Phase::Active, Phase::Mishap, f.mishap_action);
        add(Phase::ActiveUndetected, Phase::Mishap, f.mishap_action);
        add(Phase::Mishap, Phase::Mishap, "alleviate_" + f.name);
    }
    return lts;
}

// One point of the risk space: a core-phase assignment per factor.
struct RiskState {
    std::vector<std::string> factor_names;   // shared ordering
    std::vector<Phase> assignment;

    Phase phase_of(const std::string& f) const {
        for (size_t i = 0; i < factor_names.size(); ++i)
            if (factor_names[i] == f) return assignment[i];
        throw std::out_of_range("unknown factor '" + f + "' in risk state");
    }
    bool operator==(const RiskState&) const = default;
};

// subject occurred implies the number of occurred factors in `over` lies in
// [lower, upper]; trivially satisfied while the subject has not occurred.
inline bool constraint_satisfied(const RiskState& s, const Constraint& c) {
    if (!occurred(s.phase_of(c.subject))) return true;
    long n = 0;
    for (auto& f : c.over)
        if (occurred(s.phase_of(f))) ++n;
    return n >= c.lower && n <= c.upper;
}

// Exhaustive enumeration of core-phase assignments, pruned by constraints.
inline std::vector<RiskState> risk_space(const std::vector<FactorDecl>& factors,
                                         const std::vector<Constraint>& constraints) {
    if (factors.size() > 20)
        throw std::runtime_error("risk space enumeration over " +
                                 std::to_string(factors.size()) + " factors refused");
    std::vector<std::string> names;
    for (auto& f : factors) names.push_back(f.name);

    static const Phase core[3] = {Phase::Inactive, Phase::Active, Phase::Mitigated};
    std::vector<RiskState> out;
    std::vector<size_t> odo(factors.size(), 0);
    while (true) {
        RiskState s;
        s.factor_names = names;
        for (size_t i = 0; i < factors.size(); ++i)
            s.assignment.push_back(core[odo[i]]);
        bool ok = true;
        for (auto& c : constraints)
            if (!constraint_satisfied(s, c)) {
                ok = false;
                break;
            }
        if (ok) out.push_back(std::move(s));
        // advance odometer
        size_t i = 0;
        for (; i < odo.size(); ++i) {
            if (++odo[i] < 3) break;
            odo[i] = 0;
        }
        if (i == odo.size()) break;
        if (odo.empty()) break;
    }
    return out;
}

} // namespace riskmc
