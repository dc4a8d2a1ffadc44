// Graphviz export of an induced policy chain: node fill by safety labelling,
// edge colour by actor class.
#pragma once

#include "riskmc/mdp.hpp"

namespace riskmc {

namespace detail {

inline const char* node_fill(const Dtmc& d, StateIndex s, int mishap, int unsafe) {
    if (d.has_label(s, mishap)) return "red";
    if (d.has_label(s, unsafe)) return "orange";
    return "green";
}

// environment machines red, operator and monitors black, controller green,
// process/cycle progression blue
inline const char* edge_color(const Dtmc& d, StateIndex s) {
    int32_t owner = d.chosen_owner[s];
    if (owner < 0) return "black";
    const std::string& name = d.module_names[owner];
    if (name == "asc") return "green";
    if (name == "cell") return "blue";
    if (name == "operator" || name.rfind("monitor_", 0) == 0) return "black";
    return "red";
}

} // namespace detail

inline std::string export_dot(const Dtmc& d) {
    int mishap = d.label_index("mishap");
    int unsafe = d.label_index("unsafe");
    std::ostringstream os;
    os << "digraph policy {\n";
    os << "  node [shape=circle style=filled fontsize=10];\n";
    for (StateIndex s = 0; s < d.num_states(); ++s) {
        os << "  s" << s << " [fillcolor=" << detail::node_fill(d, s, mishap, unsafe);
        if (s == d.initial) os << " penwidth=3";
        os << "];\n";
    }
    for (StateIndex s = 0; s < d.num_states(); ++s) {
        for (auto& [t, p] : d.rows[s]) {
            os << "  s" << s << " -> s" << t << " [color=" << detail::edge_color(d, s)
               << " label=\"";
            if (d.chosen_action[s] >= 0) os << d.action_names[d.chosen_action[s]];
            if (p < 1.0) os << ":" << detail::fmt_prob(p);
            os << "\"];\n";
        }
    }
    os << "}\n";
    return os.str();
}

} // namespace riskmc
