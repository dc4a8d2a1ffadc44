// Command-line front end: validate and compile risk models, build and check
// the MDP, synthesise safety-controller policies, export artefacts.
//
// Exit codes: 0 ok, 1 validation or property failure, 2 I/O failure,
// 3 state-space cap exceeded, 4 positive-reward end component.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "riskmc/dot.hpp"
#include "riskmc/synth.hpp"
#include "riskmc/translate.hpp"
#include "riskmc/validate.hpp"

using namespace riskmc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitIo = 2;
constexpr int kExitCap = 3;
constexpr int kExitEndComponent = 4;

struct Io {
    static bool read(const std::string& path, std::string& out) {
        std::ifstream in(path);
        if (!in) return false;
        out.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        return true;
    }
    static bool write(const std::string& path, const std::string& data) {
        std::ofstream out(path);
        if (!out) return false;
        out << data;
        return out.good();
    }
};

std::string fmt(double v) { return detail::fmt_prob(v); }

std::string triple_text(const Triple& t) {
    return "[" + fmt(t.min) + "," + fmt(t.mean) + "," + fmt(t.max) + "]";
}

struct Pipeline {
    RiskModel model;
    GuardedProgram program;
    Mdp mdp;
    std::vector<RewardStructure> rewards;
};

int load_model(const std::string& path, RiskModel& out) {
    std::string src;
    if (!Io::read(path, src)) {
        std::cerr << "cannot read '" << path << "'\n";
        return kExitIo;
    }
    try {
        out = parse_syntax(src);
    } catch (const ParseError& e) {
        std::cerr << path << ": " << e.what() << "\n";
        return kExitFail;
    }
    return kExitOk;
}

int build_pipeline(const std::string& path, uint64_t cap, Pipeline& out) {
    int rc = load_model(path, out.model);
    if (rc != kExitOk) return rc;
    auto diags = validate(out.model);
    if (has_errors(diags)) {
        for (auto& d : diags)
            if (d.severity == Severity::Error)
                std::cerr << "error [" << d.rule << "] " << d.message << "\n";
        return kExitFail;
    }
    try {
        out.program = compile(out.model);
        out.mdp = build_mdp(out.program, BuildOptions{cap});
    } catch (const BuildError& e) {
        std::cerr << e.what() << "\n";
        return e.cap_exceeded ? kExitCap : kExitFail;
    } catch (const TranslateError& e) {
        std::cerr << e.what() << "\n";
        return kExitFail;
    }
    out.rewards = gen_rewards(out.model);
    return kExitOk;
}

std::vector<StateIndex> unsafe_states(const Mdp& m) {
    std::vector<StateIndex> xi;
    int ui = m.label_index("unsafe");
    for (StateIndex s = 0; s < m.num_states(); ++s)
        if (m.has_label(s, ui)) xi.push_back(s);
    return xi;
}

void print_policy_summary(const Mdp& mdp, const Policy& pol, double value,
                          const std::string& objective, VerifyOptions vopt) {
    Dtmc chain = induce_dtmc(mdp, pol);
    std::cout << "objective=" << objective << " value=" << fmt(value)
              << " policy_states=" << chain.num_states();
    Mdp cm = as_mdp(chain);
    auto xi = unsafe_states(cm);
    if (xi.empty()) {
        std::cout << " accident_freedom=n/a (no unsafe states reachable)\n";
        return;
    }
    Triple t = accident_freedom(cm, xi, true, vopt);
    std::cout << " accident_freedom=" << triple_text(t) << "\n";
}

// ---- subcommands ----

int cmd_validate(const std::string& path) {
    RiskModel m;
    int rc = load_model(path, m);
    if (rc != kExitOk) return rc;
    auto diags = validate(m);
    for (auto& d : diags)
        std::cout << (d.severity == Severity::Error ? "error" : "warning") << " ["
                  << d.rule << "] " << d.message << "\n";
    if (has_errors(diags)) return kExitFail;
    std::cout << "ok: " << m.factors.size() << " factors, " << m.actions.size()
              << " actions, " << m.constraints.size() << " constraints\n";
    return kExitOk;
}

int cmd_build(const std::string& path, uint64_t cap, const std::string& emit_mdp,
              const std::string& emit_pgcl) {
    Pipeline pl;
    int rc = build_pipeline(path, cap, pl);
    if (rc != kExitOk) return rc;
    auto space = risk_space(pl.model.factors, pl.model.constraints);
    std::cout << "states=" << pl.mdp.num_states()
              << " transitions=" << pl.mdp.num_transitions()
              << " risk_space=" << space.size() << "\n";
    if (!emit_mdp.empty() && !Io::write(emit_mdp, to_json(pl.mdp))) {
        std::cerr << "cannot write '" << emit_mdp << "'\n";
        return kExitIo;
    }
    if (!emit_pgcl.empty() && !Io::write(emit_pgcl, program_text(pl.program))) {
        std::cerr << "cannot write '" << emit_pgcl << "'\n";
        return kExitIo;
    }
    return kExitOk;
}

int cmd_check(const std::string& path, const std::string& props_path, uint64_t cap,
              double tol) {
    Pipeline pl;
    int rc = build_pipeline(path, cap, pl);
    if (rc != kExitOk) return rc;
    std::string props_src;
    if (!Io::read(props_path, props_src)) {
        std::cerr << "cannot read '" << props_path << "'\n";
        return kExitIo;
    }
    std::vector<Property> props;
    try {
        props = parse_properties(props_src);
    } catch (const ParseError& e) {
        std::cerr << props_path << ": " << e.what() << "\n";
        return kExitFail;
    }
    if (props.empty()) {
        std::cout << "warning: no properties in '" << props_path << "'\n";
        return kExitOk;
    }
    VerifyOptions vopt;
    vopt.tol = tol;
    bool all_ok = true;
    for (auto& p : props) {
        PropertyResult r;
        try {
            r = evaluate_formula(pl.mdp, pl.rewards, p.formula, nullptr, vopt);
        } catch (const VerifyError& e) {
            std::cerr << "error: " << p.text << ": " << e.what() << "\n";
            return kExitFail;
        }
        bool expect = p.mark != Property::Mark::Falsify;
        bool pass = r.holds == expect;
        all_ok = all_ok && pass;
        std::cout << (pass ? "pass " : "FAIL ") << p.text;
        if (r.is_numeric) std::cout << "  value=" << fmt(r.value);
        std::cout << "\n";
    }
    return all_ok ? kExitOk : kExitFail;
}

int cmd_synth(const std::string& path, const std::string& objective,
              const std::string& query, int pareto, double bound_b,
              const std::string& out_policy, const std::string& out_csv,
              const std::string& out_dot, uint64_t cap, double tol) {
    Pipeline pl;
    int rc = build_pipeline(path, cap, pl);
    if (rc != kExitOk) return rc;
    VerifyOptions vopt;
    vopt.tol = tol;

    auto table_of = [&](const std::string& name) {
        for (auto& r : pl.rewards)
            if (r.name == name) return RewardTable::build(pl.mdp, r);
        throw VerifyError("unknown reward structure '" + name + "'");
    };
    auto write_policy = [&](const Policy& pol, double value, const std::string& obj,
                            const std::string& file) {
        if (file.empty()) return true;
        if (!Io::write(file, policy_json(pl.mdp, pol, value, obj))) {
            std::cerr << "cannot write '" << file << "'\n";
            return false;
        }
        return true;
    };
    auto write_dot = [&](const Policy& pol, const std::string& file) {
        if (file.empty()) return true;
        Dtmc chain = induce_dtmc(pl.mdp, pol);
        if (!Io::write(file, export_dot(chain))) {
            std::cerr << "cannot write '" << file << "'\n";
            return false;
        }
        return true;
    };

    try {
        if (pareto > 0) {
            // two-objective sweep; defaults to the effort/nuisance query
            std::string a = "eff", b = "nuis";
            if (query == "a") { a = "pot"; b = "__final"; }
            if (query == "b") { a = "prod"; b = "__final"; }
            std::vector<FrontierPoint> pts;
            if (b == "__final") {
                pts = pareto_sweep_reach(pl.mdp, pl.rewards, a,
                                         parse_formula("Pmax=? [ F \"final\" ]"),
                                         pareto, vopt);
            } else {
                pts = pareto_sweep(pl.mdp, pl.rewards, a, b, pareto, vopt);
            }
            // constrained queries: drop frontier points beyond the bound on
            // the second objective
            if (bound_b >= 0) {
                std::vector<FrontierPoint> kept;
                for (auto& pt : pts)
                    if (pt.value_b <= bound_b) kept.push_back(std::move(pt));
                pts = std::move(kept);
            }
            std::string prefix = out_policy.empty() ? "policy_w" : out_policy;
            std::string b_name = b == "__final" ? "Pmax[F final]" : b;
            std::cout << "frontier_points=" << pts.size() << "\n";
            for (size_t i = 0; i < pts.size(); ++i) {
                auto& pt = pts[i];
                std::cout << "w=" << fmt(pt.weight) << " valueA=" << fmt(pt.value_a)
                          << " valueB=" << fmt(pt.value_b) << "\n";
                print_policy_summary(pl.mdp, pt.policy, pt.value_a,
                                     a + "/" + b_name + "@w=" + fmt(pt.weight), vopt);
                if (!write_policy(pt.policy, pt.value_a, a + "/" + b_name,
                                  prefix + std::to_string(i) + ".json"))
                    return kExitIo;
            }
            if (!out_csv.empty() && !Io::write(out_csv, frontier_csv(pts, prefix)))
                return kExitIo;
            if (!pts.empty() && !write_dot(pts.front().policy, out_dot)) return kExitIo;
            return kExitOk;
        }

        Policy pol;
        double value = 0;
        std::string obj_text;
        if (!query.empty()) {
            // the three standard queries, scalarised with equal weights
            RewardTable combined;
            if (query == "c") {
                combined = RewardTable::combine(table_of("eff"), table_of("nuis"), 0.5, 0.5);
                obj_text = "Rmax{eff}+Rmax{nuis} [ C ]";
            } else {
                StateSet finals = states_with_label(pl.mdp, "final");
                RewardTable bonus = reach_bonus_table(pl.mdp, finals, 1.0);
                combined = RewardTable::combine(
                    table_of(query == "a" ? "pot" : "prod"), bonus, 0.5, 0.5);
                obj_text = query == "a" ? "Rmax{pot}+Pmax[F final]"
                                        : "Rmax{prod}+Pmax[F final]";
            }
            auto res = expected_total_reward(pl.mdp, combined, {}, vopt);
            pol.choice.assign(pl.mdp.num_states(), -1);
            for (StateIndex s = 0; s < pl.mdp.num_states(); ++s)
                if (!pl.mdp.choices[s].empty()) pol.choice[s] = res.greedy[s];
            value = res.values[pl.mdp.initial];
        } else {
            FormulaPtr f;
            try {
                f = parse_formula(objective);
            } catch (const ParseError& e) {
                std::cerr << "objective: " << e.what() << "\n";
                return kExitFail;
            }
            auto res = synthesize(pl.mdp, pl.rewards, f, vopt);
            pol = res.policy;
            value = res.value;
            obj_text = objective;
        }
        print_policy_summary(pl.mdp, pol, value, obj_text, vopt);
        if (!write_policy(pol, value, obj_text, out_policy)) return kExitIo;
        if (!write_dot(pol, out_dot)) return kExitIo;
        return kExitOk;
    } catch (const EndComponentError& e) {
        std::cerr << "end-component error: " << e.what() << "\n  states:";
        size_t shown = 0;
        for (StateIndex s : e.component) {
            if (shown++ >= 12) {
                std::cerr << " ...";
                break;
            }
            std::cerr << " " << s;
        }
        std::cerr << "\n";
        return kExitEndComponent;
    } catch (const VerifyError& e) {
        std::cerr << e.what() << "\n";
        return kExitFail;
    }
}

int cmd_export(const std::string& path, const std::string& policy_path,
               const std::string& out_dot, const std::string& emit_mdp,
               const std::string& emit_pgcl, uint64_t cap) {
    Pipeline pl;
    int rc = build_pipeline(path, cap, pl);
    if (rc != kExitOk) return rc;
    if (!emit_mdp.empty() && !Io::write(emit_mdp, to_json(pl.mdp))) return kExitIo;
    if (!emit_pgcl.empty() && !Io::write(emit_pgcl, program_text(pl.program)))
        return kExitIo;
    if (!policy_path.empty()) {
        std::string src;
        if (!Io::read(policy_path, src)) {
            std::cerr << "cannot read '" << policy_path << "'\n";
            return kExitIo;
        }
        Policy pol;
        pol.choice.assign(pl.mdp.num_states(), -1);
        try {
            auto j = nlohmann::json::parse(src);
            for (auto& row : j.at("policy")) {
                StateIndex s = row.at("state").get<StateIndex>();
                std::string action = row.at("action").get<std::string>();
                if (s >= pl.mdp.num_states()) throw std::runtime_error("state out of range");
                bool found = false;
                for (size_t ci = 0; ci < pl.mdp.choices[s].size() && !found; ++ci)
                    if (pl.mdp.action_names[pl.mdp.choices[s][ci].action] == action) {
                        pol.choice[s] = static_cast<int32_t>(ci);
                        found = true;
                    }
                if (!found)
                    throw std::runtime_error("state " + std::to_string(s) +
                                             " has no action '" + action + "'");
            }
        } catch (const std::exception& e) {
            std::cerr << "policy file: " << e.what() << "\n";
            return kExitFail;
        }
        for (StateIndex s = 0; s < pl.mdp.num_states(); ++s)
            if (pol.choice[s] < 0 && !pl.mdp.choices[s].empty()) pol.choice[s] = 0;
        if (!out_dot.empty()) {
            Dtmc chain = induce_dtmc(pl.mdp, pol);
            if (!Io::write(out_dot, export_dot(chain))) return kExitIo;
        }
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"risk-model compiler, model checker and controller synthesiser"};
    app.require_subcommand(1);

    uint64_t cap = 5'000'000;
    double tol = 1e-8;
    uint64_t seed = 0;
    app.add_option("--cap", cap, "state-space cap (transitions)");
    app.add_option("--tol", tol, "value-iteration convergence threshold");
    app.add_option("--seed", seed,
                   "seed for randomised test-model generators (never affects "
                   "the pipeline)");

    std::string model_path, props_path, objective, query, out_policy, out_csv,
        out_dot, emit_mdp, emit_pgcl, policy_path;
    int pareto = 0;
    double bound_b = -1;

    auto* validate_cmd = app.add_subcommand("validate", "parse and validate a model");
    validate_cmd->add_option("model", model_path)->required();

    auto* build_cmd = app.add_subcommand("build", "compile and build the MDP");
    build_cmd->add_option("model", model_path)->required();
    build_cmd->add_option("--emit-mdp", emit_mdp, "write the MDP as JSON");
    build_cmd->add_option("--emit-pgcl", emit_pgcl, "write the guarded-command program");

    auto* check_cmd = app.add_subcommand("check", "check a property file on the MDP");
    check_cmd->add_option("model", model_path)->required();
    check_cmd->add_option("props", props_path)->required();

    auto* synth_cmd = app.add_subcommand("synth", "synthesise an optimal policy");
    synth_cmd->add_option("model", model_path)->required();
    synth_cmd->add_option("--objective", objective, "P or R head, e.g. Rmax{\"pot\"} [ C ]");
    synth_cmd->add_option("--query", query, "standard query: a, b or c")
        ->check(CLI::IsMember({"a", "b", "c"}));
    synth_cmd->add_option("--pareto", pareto, "sweep with this many weights");
    synth_cmd->add_option("--bound-b", bound_b,
                          "drop frontier points whose second objective exceeds "
                          "this bound");
    synth_cmd->add_option("--out-policy", out_policy, "policy JSON output");
    synth_cmd->add_option("--out-csv", out_csv, "frontier CSV output");
    synth_cmd->add_option("--dot", out_dot, "policy graph DOT output");

    auto* export_cmd = app.add_subcommand("export", "export MDP, program or policy graph");
    export_cmd->add_option("model", model_path)->required();
    export_cmd->add_option("--policy", policy_path, "policy JSON to re-import");
    export_cmd->add_option("--dot", out_dot, "policy graph DOT output");
    export_cmd->add_option("--emit-mdp", emit_mdp, "write the MDP as JSON");
    export_cmd->add_option("--emit-pgcl", emit_pgcl, "write the guarded-command program");

    CLI11_PARSE(app, argc, argv);
    (void)seed;

    try {
        if (validate_cmd->parsed()) return cmd_validate(model_path);
        if (build_cmd->parsed()) return cmd_build(model_path, cap, emit_mdp, emit_pgcl);
        if (check_cmd->parsed()) return cmd_check(model_path, props_path, cap, tol);
        if (synth_cmd->parsed())
            return cmd_synth(model_path, objective, query, pareto, bound_b,
                             out_policy, out_csv, out_dot, cap, tol);
        if (export_cmd->parsed())
            return cmd_export(model_path, policy_path, out_dot, emit_mdp, emit_pgcl, cap);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitFail;
    }
    return kExitOk;
}
