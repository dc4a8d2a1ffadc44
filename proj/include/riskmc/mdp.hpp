// Explicit-state MDP construction from guarded-command programs, policies,
// induced chains, reward structures, and the JSON exports.
#pragma once

#include <cstdint>
#include <deque>
#include <queue>
#include <unordered_map>

#include "riskmc/pgcl.hpp"

namespace riskmc {

struct BuildError : std::runtime_error {
    bool cap_exceeded = false;
    explicit BuildError(const std::string& msg, bool cap = false)
        : std::runtime_error(msg), cap_exceeded(cap) {}
};

using StateIndex = uint32_t;

struct Choice {
    int32_t action = -1;   // index into action_names
    int32_t owner = -1;    // index into module_names
    std::vector<std::pair<StateIndex, double>> dist;  // sorted by target
};

struct Mdp {
    std::vector<std::string> var_names;
    std::vector<std::vector<Value>> states;
    StateIndex initial = 0;
    std::vector<std::vector<Choice>> choices;
    std::vector<std::string> action_names;
    std::vector<std::string> module_names;
    std::vector<std::string> label_names;
    std::vector<std::vector<uint64_t>> state_labels;  // bit mask words per state

    size_t num_states() const { return states.size(); }
    size_t num_transitions() const {
        size_t n = 0;
        for (auto& cs : choices)
            for (auto& c : cs) n += c.dist.size();
        return n;
    }
    int label_index(const std::string& name) const {
        for (size_t i = 0; i < label_names.size(); ++i)
            if (label_names[i] == name) return static_cast<int>(i);
        return -1;
    }
    bool has_label(StateIndex s, int label) const {
        if (label < 0) return false;
        return (state_labels[s][label / 64] >> (label % 64)) & 1u;
    }
    int action_index(const std::string& name) const {
        for (size_t i = 0; i < action_names.size(); ++i)
            if (action_names[i] == name) return static_cast<int>(i);
        return -1;
    }
    std::vector<StateIndex> deadlocks() const {
        std::vector<StateIndex> out;
        for (StateIndex s = 0; s < choices.size(); ++s)
            if (choices[s].empty()) out.push_back(s);
        return out;
    }
};

// Deterministic memoryless policy: one enabled choice per state that has any.
struct Policy {
    std::vector<int32_t> choice;   // index into mdp.choices[s]; -1 on deadlocks

    bool operator==(const Policy&) const = default;
};

struct Dtmc {
    std::vector<std::string> var_names;
    std::vector<std::vector<Value>> states;
    StateIndex initial = 0;
    std::vector<std::vector<std::pair<StateIndex, double>>> rows;
    std::vector<int32_t> chosen_action;  // per state, index into action_names
    std::vector<int32_t> chosen_owner;
    std::vector<std::string> action_names;
    std::vector<std::string> module_names;
    std::vector<std::string> label_names;
    std::vector<std::vector<uint64_t>> state_labels;
    std::vector<StateIndex> mdp_state_of;  // mapping back to the source MDP

    size_t num_states() const { return states.size(); }
    int label_index(const std::string& name) const {
        for (size_t i = 0; i < label_names.size(); ++i)
            if (label_names[i] == name) return static_cast<int>(i);
        return -1;
    }
    bool has_label(StateIndex s, int label) const {
        if (label < 0) return false;
        return (state_labels[s][label / 64] >> (label % 64)) & 1u;
    }
};

// Named action-reward map. Entries pair a state predicate with an action
// label; the reward of taking `action` in s is the sum of matching entries.
struct RewardEntry {
    ExprPtr state_pred;     // may be null for "any state"
    std::string action;
    double value = 0;
};

struct RewardStructure {
    std::string name;
    std::vector<RewardEntry> entries;
};

namespace detail {

struct Valuation final : VarEnv {
    const std::vector<std::string>* names = nullptr;
    const std::vector<Value>* vals = nullptr;
    Valuation(const std::vector<std::string>* n, const std::vector<Value>* v)
        : names(n), vals(v) {}
    Value get(const std::string& n) const override {
        for (size_t i = 0; i < names->size(); ++i)
            if ((*names)[i] == n) return (*vals)[i];
        throw EvalError("unbound variable '" + n + "'");
    }
};

struct VecEnv final : VarEnv {
    const std::unordered_map<std::string, size_t>* index;
    const std::vector<Value>* vals;
    VecEnv(const std::unordered_map<std::string, size_t>* i,
           const std::vector<Value>* v)
        : index(i), vals(v) {}
    Value get(const std::string& n) const override {
        auto it = index->find(n);
        if (it == index->end()) throw EvalError("unbound variable '" + n + "'");
        return (*vals)[it->second];
    }
};

struct StateHash {
    size_t operator()(const std::vector<Value>& v) const {
        size_t h = 1469598103934665603ull;
        for (Value x : v) {
            h ^= static_cast<size_t>(x) + 0x9e3779b97f4a7c15ull;
            h *= 1099511628211ull;
        }
        return h;
    }
};

} // namespace detail

// Evaluates an expression against a state valuation. Total on well-typed
// expressions; type errors surface as EvalError.
inline Value eval_expr(const std::vector<std::string>& names,
                       const std::vector<Value>& vals, const Expr& e) {
    detail::Valuation env(&names, &vals);
    return eval_value(e, env);
}

struct BuildOptions {
    uint64_t max_transitions = 5'000'000;
};

class MdpBuilder {
public:
    MdpBuilder(const GuardedProgram& p, BuildOptions opt = {}) : p_(p), opt_(opt) {
        auto errs = check_program(p);
        if (!errs.empty()) throw BuildError("invalid program: " + errs.front());
        for (size_t i = 0; i < p.variables.size(); ++i)
            var_index_[p.variables[i].name] = i;
        for (size_t i = 0; i < p.modules.size(); ++i) mdp_.module_names.push_back(p.modules[i].name);
        shared_ = p.shared_labels();
        // a shared label is expanded once, at its first appearance
        std::set<std::string> seen;
        for (size_t mi = 0; mi < p.modules.size(); ++mi)
            for (size_t ci = 0; ci < p.modules[mi].commands.size(); ++ci) {
                const std::string& l = p.modules[mi].commands[ci].label;
                if (shared_.count(l) && seen.insert(l).second)
                    primary_[{mi, ci}] = l;
            }
    }

    Mdp build() {
        for (auto& v : p_.variables) mdp_.var_names.push_back(v.name);
        std::vector<Value> s0;
        for (auto& v : p_.variables) s0.push_back(v.init);
        intern(s0);
        mdp_.initial = 0;

        uint64_t transitions = 0;
        for (StateIndex s = 0; s < mdp_.states.size(); ++s) {
            auto cs = enabled_choices(s);
            for (auto& c : cs) transitions += c.dist.size();
            if (transitions > opt_.max_transitions)
                throw BuildError("state-space cap exceeded after " +
                                     std::to_string(mdp_.states.size()) + " states / " +
                                     std::to_string(transitions) + " transitions",
                                 true);
            mdp_.choices.push_back(std::move(cs));
        }
        apply_labels();
        return std::move(mdp_);
    }

    // The enabled relation for one state. Choices appear in (module order,
    // declaration order); a synchronised label contributes its joint actions
    // at the position of its first declaring command.
    std::vector<Choice> enabled_choices(StateIndex s) {
        std::vector<Choice> out;
        // interning new successors may reallocate the state table
        const std::vector<Value> vals = mdp_.states[s];
        detail::VecEnv env(&var_index_, &vals);

        for (size_t mi = 0; mi < p_.modules.size(); ++mi) {
            const auto& cmds = p_.modules[mi].commands;
            for (size_t ci = 0; ci < cmds.size(); ++ci) {
                const Command& c = cmds[ci];
                if (!shared_.count(c.label)) {
                    if (eval_bool(*c.guard, env))
                        out.push_back(resolve(c, static_cast<int>(mi), vals));
                    continue;
                }
                auto it = primary_.find({mi, ci});
                if (it == primary_.end()) continue;  // expanded at primary site
                expand_shared(c.label, vals, env, out);
            }
        }
        return out;
    }

private:
    void expand_shared(const std::string& label, const std::vector<Value>& vals,
                       detail::VecEnv& env, std::vector<Choice>& out) {
        // participating modules in order, each contributing its enabled
        // commands with this label; one disabled participant blocks the label
        std::vector<std::vector<const Command*>> parts;
        std::vector<int> part_module;
        for (size_t mi = 0; mi < p_.modules.size(); ++mi) {
            bool in_alphabet = false;
            std::vector<const Command*> en;
            for (auto& c : p_.modules[mi].commands) {
                if (c.label != label) continue;
                in_alphabet = true;
                if (eval_bool(*c.guard, env)) en.push_back(&c);
            }
            if (!in_alphabet) continue;
            if (en.empty()) return;  // blocked
            parts.push_back(std::move(en));
            part_module.push_back(static_cast<int>(mi));
        }
        if (!parts.empty()) emit_joint(label, parts, part_module, vals, out);
    }

    StateIndex intern(const std::vector<Value>& v) {
        auto it = index_.find(v);
        if (it != index_.end()) return it->second;
        StateIndex id = static_cast<StateIndex>(mdp_.states.size());
        mdp_.states.push_back(v);
        index_.emplace(v, id);
        return id;
    }

    int action_id(const std::string& name) {
        auto it = action_index_.find(name);
        if (it != action_index_.end()) return it->second;
        int id = static_cast<int>(mdp_.action_names.size());
        mdp_.action_names.push_back(name);
        action_index_.emplace(name, id);
        return id;
    }

    std::vector<Value> apply(const std::vector<Value>& base,
                             const std::vector<Assign>& assigns,
                             const std::string& label,
                             std::vector<size_t>* touched) {
        detail::VecEnv env{&var_index_, &base};
        std::vector<Value> next = base;
        for (auto& a : assigns) {
            size_t vi = var_index_.at(a.var);
            if (touched) {
                for (size_t t : *touched)
                    if (t == vi)
                        throw BuildError("joint action '" + label +
                                         "' writes variable '" + a.var +
                                         "' from two modules");
                touched->push_back(vi);
            }
            Value nv = eval_value(*a.value, env);
            const VarDecl& d = p_.variables[vi];
            if (nv < d.lo || nv > d.hi)
                throw BuildError("command [" + label + "] drives variable '" + a.var +
                                 "' to " + std::to_string(nv) + ", outside [" +
                                 std::to_string(d.lo) + ".." + std::to_string(d.hi) + "]");
            next[vi] = nv;
        }
        return next;
    }

    Choice resolve(const Command& c, int module, const std::vector<Value>& vals) {
        Choice ch;
        ch.action = action_id(c.label);
        ch.owner = module;
        std::map<StateIndex, double> acc;
        for (auto& b : c.updates) {
            auto next = apply(vals, b.assigns, c.label, nullptr);
            acc[intern(next)] += b.prob;
        }
        for (auto& [t, pr] : acc) ch.dist.emplace_back(t, pr);
        check_normalised(ch, c.label);
        return ch;
    }

    void emit_joint(const std::string& label,
                    const std::vector<std::vector<const Command*>>& parts,
                    const std::vector<int>& part_module,
                    const std::vector<Value>& vals, std::vector<Choice>& out) {
        // one joint action per combination of enabled participant commands
        std::vector<size_t> pick(parts.size(), 0);
        while (true) {
            int prob_count = 0;
            for (size_t i = 0; i < parts.size(); ++i)
                if (parts[i][pick[i]]->updates.size() > 1) ++prob_count;
            if (prob_count > 1)
                throw BuildError("synchronised label '" + label +
                                 "' fires with probabilistic updates in two modules");

            Choice ch;
            ch.action = action_id(label);
            // controller-committed joints belong to the controller; anything
            // else to the first participating module
            ch.owner = part_module.front();
            for (int pm : part_module)
                if (p_.modules[pm].name == "asc") ch.owner = pm;
            std::map<StateIndex, double> acc;
            // product distribution over participant branches
            std::vector<size_t> bpick(parts.size(), 0);
            while (true) {
                double pr = 1;
                std::vector<Value> next = vals;
                std::vector<size_t> touched;
                for (size_t i = 0; i < parts.size(); ++i) {
                    const UpdateBranch& b = parts[i][pick[i]]->updates[bpick[i]];
                    pr *= b.prob;
                    next = apply(next, b.assigns, label, &touched);
                }
                acc[intern(next)] += pr;
                size_t i = 0;
                for (; i < parts.size(); ++i) {
                    if (++bpick[i] < parts[i][pick[i]]->updates.size()) break;
                    bpick[i] = 0;
                }
                if (i == parts.size()) break;
            }
            for (auto& [t, pr] : acc) ch.dist.emplace_back(t, pr);
            check_normalised(ch, label);
            out.push_back(std::move(ch));

            size_t i = 0;
            for (; i < parts.size(); ++i) {
                if (++pick[i] < parts[i].size()) break;
                pick[i] = 0;
            }
            if (i == parts.size()) break;
        }
    }

    void check_normalised(const Choice& ch, const std::string& label) {
        double s = 0;
        for (auto& [t, pr] : ch.dist) s += pr;
        if (std::abs(s - 1.0) > 1e-9)
            throw BuildError("distribution of '" + label + "' sums to " +
                             std::to_string(s));
    }

    void apply_labels() {
        for (auto& l : p_.labels) mdp_.label_names.push_back(l.name);
        size_t words = (mdp_.label_names.size() + 63) / 64;
        mdp_.state_labels.assign(mdp_.states.size(), std::vector<uint64_t>(words, 0));
        for (StateIndex s = 0; s < mdp_.states.size(); ++s) {
            detail::VecEnv env{&var_index_, &mdp_.states[s]};
            for (size_t li = 0; li < p_.labels.size(); ++li)
                if (eval_bool(*p_.labels[li].expr, env))
                    mdp_.state_labels[s][li / 64] |= uint64_t(1) << (li % 64);
        }
    }

    const GuardedProgram& p_;
    BuildOptions opt_;
    Mdp mdp_;
    std::unordered_map<std::vector<Value>, StateIndex, detail::StateHash> index_;
    std::unordered_map<std::string, size_t> var_index_;
    std::unordered_map<std::string, int> action_index_;
    std::set<std::string> shared_;
    std::map<std::pair<size_t, size_t>, std::string> primary_;
};

inline Mdp build_mdp(const GuardedProgram& p, BuildOptions opt = {}) {
    return MdpBuilder(p, opt).build();
}

// Keeps exactly the distribution of the policy's chosen action per reachable
// state; unreachable states are pruned and the MDP index mapping retained.
inline Dtmc induce_dtmc(const Mdp& mdp, const Policy& policy) {
    if (policy.choice.size() != mdp.num_states())
        throw ProgramError("policy domain does not match the MDP");
    for (StateIndex s = 0; s < mdp.num_states(); ++s) {
        if (mdp.choices[s].empty()) continue;
        int32_t c = policy.choice[s];
        if (c < 0 || c >= static_cast<int32_t>(mdp.choices[s].size()))
            throw ProgramError("policy selects a disabled action at state " +
                               std::to_string(s));
    }
    Dtmc d;
    d.var_names = mdp.var_names;
    d.action_names = mdp.action_names;
    d.module_names = mdp.module_names;
    d.label_names = mdp.label_names;

    std::vector<int64_t> remap(mdp.num_states(), -1);
    std::deque<StateIndex> queue;
    auto visit = [&](StateIndex ms) {
        if (remap[ms] >= 0) return static_cast<StateIndex>(remap[ms]);
        StateIndex id = static_cast<StateIndex>(d.states.size());
        remap[ms] = id;
        d.states.push_back(mdp.states[ms]);
        d.state_labels.push_back(mdp.state_labels[ms]);
        d.mdp_state_of.push_back(ms);
        d.rows.emplace_back();
        d.chosen_action.push_back(-1);
        d.chosen_owner.push_back(-1);
        queue.push_back(ms);
        return id;
    };
    visit(mdp.initial);
    d.initial = 0;
    while (!queue.empty()) {
        StateIndex ms = queue.front();
        queue.pop_front();
        StateIndex id = static_cast<StateIndex>(remap[ms]);
        if (mdp.choices[ms].empty()) continue;  // deadlock stays a deadlock
        const Choice& ch = mdp.choices[ms][policy.choice[ms]];
        d.chosen_action[id] = ch.action;
        d.chosen_owner[id] = ch.owner;
        for (auto& [t, pr] : ch.dist) {
            StateIndex tid = visit(t);  // may grow the row table
            d.rows[id].emplace_back(tid, pr);
        }
    }
    return d;
}

// Reward of taking choice `c` in state `s`: sum of entries whose action
// matches and whose predicate holds.
inline double reward_of(const Mdp& mdp, const RewardStructure& r, StateIndex s,
                        const Choice& c) {
    double v = 0;
    for (auto& e : r.entries) {
        if (mdp.action_names[c.action] != e.action) continue;
        if (e.state_pred &&
            !eval_expr(mdp.var_names, mdp.states[s], *e.state_pred))
            continue;
        v += e.value;
    }
    return v;
}

// ---- JSON export ----
// {states:[{id,vars,labels}], choices:[{state,action,dist:[{to,p}]}], initial}

namespace detail {

inline std::string fmt_prob(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline void json_state_row(std::ostringstream& os, size_t id,
                           const std::vector<std::string>& var_names,
                           const std::vector<Value>& vals,
                           const std::vector<std::string>& label_names,
                           const std::vector<uint64_t>& mask) {
    os << "{\"id\":" << id << ",\"vars\":{";
    for (size_t v = 0; v < var_names.size(); ++v) {
        if (v) os << ",";
        os << "\"" << var_names[v] << "\":" << vals[v];
    }
    os << "},\"labels\":[";
    bool first = true;
    for (size_t l = 0; l < label_names.size(); ++l) {
        if ((mask[l / 64] >> (l % 64)) & 1u) {
            if (!first) os << ",";
            os << "\"" << label_names[l] << "\"";
            first = false;
        }
    }
    os << "]}";
}

} // namespace detail

inline std::string to_json(const Mdp& m) {
    std::ostringstream os;
    os << "{\"states\":[";
    for (size_t s = 0; s < m.num_states(); ++s) {
        if (s) os << ",";
        detail::json_state_row(os, s, m.var_names, m.states[s], m.label_names,
                               m.state_labels[s]);
    }
    os << "],\"choices\":[";
    bool first = true;
    for (size_t s = 0; s < m.num_states(); ++s) {
        for (auto& c : m.choices[s]) {
            if (!first) os << ",";
            os << "{\"state\":" << s << ",\"action\":\"" << m.action_names[c.action]
               << "\",\"dist\":[";
            for (size_t i = 0; i < c.dist.size(); ++i) {
                if (i) os << ",";
                os << "{\"to\":" << c.dist[i].first
                   << ",\"p\":" << detail::fmt_prob(c.dist[i].second) << "}";
            }
            os << "]}";
            first = false;
        }
    }
    os << "],\"initial\":" << m.initial << "}";
    return os.str();
}

inline std::string to_json(const Dtmc& d) {
    std::ostringstream os;
    os << "{\"states\":[";
    for (size_t s = 0; s < d.num_states(); ++s) {
        if (s) os << ",";
        detail::json_state_row(os, s, d.var_names, d.states[s], d.label_names,
                               d.state_labels[s]);
    }
    os << "],\"choices\":[";
    bool first = true;
    for (size_t s = 0; s < d.num_states(); ++s) {
        if (d.rows[s].empty()) continue;
        if (!first) os << ",";
        os << "{\"state\":" << s << ",\"action\":\""
           << (d.chosen_action[s] >= 0 ? d.action_names[d.chosen_action[s]] : "")
           << "\",\"dist\":[";
        for (size_t i = 0; i < d.rows[s].size(); ++i) {
            if (i) os << ",";
            os << "{\"to\":" << d.rows[s][i].first
               << ",\"p\":" << detail::fmt_prob(d.rows[s][i].second) << "}";
        }
        os << "]}";
        first = false;
    }
    os << "],\"initial\":" << d.initial << "}";
    return os.str();
}

} // namespace riskmc
