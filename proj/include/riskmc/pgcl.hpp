// Probabilistic guarded-command programs: the compilation target and input
// of the explicit-state builder.
#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "riskmc/expr.hpp"
#include "riskmc/model.hpp"

namespace riskmc {

struct ProgramError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// [label] guard -> p1: upd1 + ... + pn: updn
// Guard conjunct structure is kept so compiled commands can be inspected for
// the not-final / mode-filter / activity-filter shape.
struct Command {
    std::string label;
    std::string owner;                  // module name
    ExprPtr guard;                      // full conjunction, ready to evaluate
    std::vector<ExprPtr> guard_parts;   // [not-final, mode filter, activity filter, rest...]
    std::vector<UpdateBranch> updates;

    double prob_sum() const {
        double s = 0;
        for (auto& b : updates) s += b.prob;
        return s;
    }
};

struct Module {
    std::string name;
    std::vector<Command> commands;
};

struct GuardedProgram {
    std::vector<VarDecl> variables;          // program-level state, s0 from inits
    std::vector<Module> modules;
    std::vector<LabelDecl> labels;           // atomic propositions

    const VarDecl* find_var(const std::string& n) const {
        for (auto& v : variables)
            if (v.name == n) return &v;
        return nullptr;
    }

    // Labels appearing in more than one module synchronise.
    std::set<std::string> shared_labels() const {
        std::map<std::string, std::set<std::string>> owners;
        for (auto& m : modules)
            for (auto& c : m.commands) owners[c.label].insert(m.name);
        std::set<std::string> out;
        for (auto& [l, os] : owners)
            if (os.size() > 1) out.insert(l);
        return out;
    }

    size_t command_count() const {
        size_t n = 0;
        for (auto& m : modules) n += m.commands.size();
        return n;
    }
};

// Structural sanity independent of state exploration: distribution sums,
// assignment targets, and the one-probabilistic-participant rule for
// synchronised labels.
inline std::vector<std::string> check_program(const GuardedProgram& p) {
    std::vector<std::string> errors;
    std::set<std::string> vars;
    for (auto& v : p.variables) {
        if (!vars.insert(v.name).second)
            errors.push_back("duplicate variable '" + v.name + "'");
        if (v.init < v.lo || v.init > v.hi)
            errors.push_back("initial value of '" + v.name + "' outside bounds");
    }
    std::map<std::string, std::set<std::string>> prob_owner;  // label -> modules with non-Dirac cmd
    for (auto& m : p.modules) {
        for (auto& c : m.commands) {
            if (std::abs(c.prob_sum() - 1.0) > 1e-9)
                errors.push_back("command [" + c.label + "] of " + m.name +
                                 " has branch probabilities summing to " +
                                 std::to_string(c.prob_sum()));
            for (auto& b : c.updates)
                for (auto& a : b.assigns)
                    if (!p.find_var(a.var))
                        errors.push_back("command [" + c.label + "] of " + m.name +
                                         " assigns unknown variable '" + a.var + "'");
            if (c.updates.size() > 1) prob_owner[c.label].insert(m.name);
        }
    }
    for (auto shared : p.shared_labels()) {
        auto it = prob_owner.find(shared);
        if (it != prob_owner.end() && it->second.size() > 1)
            errors.push_back("synchronised label '" + shared +
                             "' has probabilistic updates in more than one module");
    }
    return errors;
}

// One command per line: [label] guard -> p1: upd1 + p2: upd2;
inline std::string program_text(const GuardedProgram& p) {
    std::ostringstream os;
    for (auto& v : p.variables) {
        os << "var " << v.name;
        if (v.is_bool) os << " : bool";
        else os << " : [" << v.lo << ".." << v.hi << "]";
        os << " init " << v.init << ";\n";
    }
    for (auto& m : p.modules) {
        os << "module " << m.name << "\n";
        for (auto& c : m.commands) {
            os << "  [" << c.label << "] " << to_string(*c.guard) << " -> ";
            for (size_t i = 0; i < c.updates.size(); ++i) {
                if (i) os << " + ";
                auto& b = c.updates[i];
                os << detail::fmt_num(b.prob) << ": ";
                if (b.assigns.empty()) {
                    os << "skip";
                } else {
                    for (size_t j = 0; j < b.assigns.size(); ++j) {
                        if (j) os << ", ";
                        os << b.assigns[j].var << ":=" << to_string(*b.assigns[j].value);
                    }
                }
            }
            os << ";\n";
        }
        os << "endmodule\n";
    }
    for (auto& l : p.labels)
        os << "label \"" << l.name << "\" = " << to_string(*l.expr) << ";\n";
    return os.str();
}

} // namespace riskmc
