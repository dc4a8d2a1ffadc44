#include <doctest.h>

#include "helpers.hpp"
#include "riskmc/translate.hpp"
#include "riskmc/verify.hpp"

using namespace riskmc;
using testutil::load_cell;

namespace {

const FactorDecl& factor_of(const RiskModel& m, const std::string& name) {
    const FactorDecl* f = m.find_factor(name);
    REQUIRE(f != nullptr);
    return *f;
}

const Command* find_command(const std::vector<Command>& cs, const std::string& label) {
    for (auto& c : cs)
        if (c.label == label) return &c;
    return nullptr;
}

// full-variable environment with overridable fields, for guard evaluation
struct CellEnv final : VarEnv {
    std::map<std::string, Value> v;
    CellEnv() {
        for (auto* n : {"mode", "oloc", "ointr", "oack", "onotif", "wpdone", "rwp",
                        "rbench", "warc", "mdone", "ph_HC", "ph_HS", "ph_WS",
                        "ph_HRW", "ph_HW", "ph_RT", "ph_RC"})
            v[n] = 0;
        v["act"] = 1;  // welding, so the final label stays false
    }
    CellEnv& set(const std::string& n, Value val) {
        v[n] = val;
        return *this;
    }
    Value get(const std::string& n) const override {
        auto it = v.find(n);
        if (it == v.end()) throw EvalError("unbound variable '" + n + "'");
        return it->second;
    }
};

} // namespace

TEST_CASE("endangerment generation") {
    RiskModel m = load_cell();
    SUBCASE("detection fault splits 0.95/0.05") {
        auto cs = gen_endangerments(m, factor_of(m, "HC"));
        const Command* e = find_command(cs, "e_HC");
        REQUIRE(e != nullptr);
        REQUIRE(e->updates.size() == 2);
        CHECK(e->updates[0].prob == 0.95);
        CHECK(e->updates[1].prob == 0.05);
    }
    SUBCASE("zero fault probability degenerates to a Dirac activation") {
        auto cs = gen_endangerments(m, factor_of(m, "HS"));
        const Command* e = find_command(cs, "e_HS");
        REQUIRE(e != nullptr);
        CHECK(e->updates.size() == 1);
        CHECK(e->updates[0].prob == 1.0);
    }
    SUBCASE("constraints strengthen the sensed predicate") {
        // HC requiresNOf (1|HS|1): the generated guard must imply that HS
        // occurred; checked by evaluating over phase assignments
        auto preds = monitor_predicates(m, factor_of(m, "HC"));
        std::vector<std::string> names = {"oloc", "warc", "ph_HS"};
        for (long hs_phase : {0L, 1L, 3L}) {
            Value v = eval_expr(names, {3, 1, hs_phase}, *preds.sensed);
            CHECK(v == (hs_phase != 0 ? 1 : 0));
        }
        // the actual hazard condition refers only to world state
        CHECK(eval_expr({"oloc", "warc"}, {3, 1}, *preds.actual) == 1);
        CHECK(eval_expr({"oloc", "warc"}, {2, 1}, *preds.actual) == 0);
    }
}

TEST_CASE("mishap generation") {
    RiskModel m = load_cell();
    SUBCASE("declared probability splits 0.2/0.8 from the active phases") {
        auto cs = gen_mishap(m, factor_of(m, "HC"));
        REQUIRE(cs.size() == 2);   // risky command plus its complement
        const Command& risky = cs[0];
        CHECK(risky.label == "w_weldPiece");
        REQUIRE(risky.updates.size() == 2);
        CHECK(risky.updates[0].prob == 0.2);
        CHECK(risky.updates[1].prob == 0.8);
        // enabled from both active phases when the hazard condition holds
        std::vector<std::string> names = {"oloc", "warc", "ph_HC"};
        CHECK(eval_expr(names, {3, 1, 1}, *risky.guard) == 1);
        CHECK(eval_expr(names, {3, 1, 2}, *risky.guard) == 1);
        CHECK(eval_expr(names, {3, 1, 3}, *risky.guard) == 0);
        // the complement covers everything else, so the label never blocks
        const Command& other = cs[1];
        for (long ph : {0L, 1L, 2L, 3L, 5L})
            for (long loc : {0L, 3L})
                CHECK((eval_expr(names, {loc, 1, ph}, *risky.guard) ^
                       eval_expr(names, {loc, 1, ph}, *other.guard)) == 1);
    }
    SUBCASE("probability zero emits no command") {
        RiskModel n = m;
        for (auto& f : n.factors)
            if (f.name == "HC") f.mishap_prob = 0;
        CHECK(gen_mishap(n, factor_of(n, "HC")).empty());
    }
    SUBCASE("probability one is a Dirac mishap") {
        RiskModel n = m;
        for (auto& f : n.factors)
            if (f.name == "HC") f.mishap_prob = 1;
        auto cs = gen_mishap(n, factor_of(n, "HC"));
        REQUIRE(!cs.empty());
        CHECK(cs[0].updates.size() == 1);
    }
}

TEST_CASE("gradient-resolved switch targets") {
    GradientMatrix g;
    g.labels = {"normal", "ssm", "stopped"};
    g.entries = {{0, 1, 2}, {-1, 0, 1}, {-2, -1, 0}};

    // positive gradient permits the mitigation switch
    CHECK(resolve_target(g, "normal", "stopped", SwitchKind::Mitigation) == "stopped");
    // identity: the zero diagonal satisfies both directions
    CHECK(resolve_target(g, "ssm", "ssm", SwitchKind::Mitigation) == "ssm");
    CHECK(resolve_target(g, "ssm", "ssm", SwitchKind::Resumption) == "ssm");
    // negative gradient refuses a mitigation towards higher risk
    CHECK(resolve_target(g, "ssm", "normal", SwitchKind::Mitigation) == "ssm");
    // resumption runs on non-positive gradients
    CHECK(resolve_target(g, "stopped", "normal", SwitchKind::Resumption) == "normal");
    CHECK(resolve_target(g, "normal", "stopped", SwitchKind::Resumption) == "normal");
    CHECK_THROWS_AS(resolve_target(g, "normal", "unknown", SwitchKind::Mitigation),
                    TranslateError);
}

TEST_CASE("mitigation generation") {
    RiskModel m = load_cell();
    SUBCASE("shutdown action: stages plus a closing phase change") {
        auto cs = gen_mitigations(m, factor_of(m, "HC"));
        // HCmitStop: mode, activity and safety-function stages, then closing
        CHECK(find_command(cs, "HCmitStop.sm") != nullptr);
        CHECK(find_command(cs, "HCmitStop.a") != nullptr);
        CHECK(find_command(cs, "HCmitStop.sf") != nullptr);
        const Command* closing = find_command(cs, "stop");  // synchronised commit
        REQUIRE(closing != nullptr);
        REQUIRE(closing->updates.size() == 1);
        REQUIRE(closing->updates[0].assigns.size() == 1);
        CHECK(closing->updates[0].assigns[0].var == "ph_HC");
        CHECK(closing->updates[0].assigns[0].value->ival ==
              static_cast<long>(Phase::Mitigated));
    }
    SUBCASE("no safety function: the sf stage is omitted") {
        auto cs = gen_mitigations(m, factor_of(m, "HRW"));
        CHECK(find_command(cs, "HRWmitSrmst.sm") != nullptr);
        CHECK(find_command(cs, "HRWmitSrmst.sf") == nullptr);
        const Command* closing = find_command(cs, "HRWmitSrmst");
        REQUIRE(closing != nullptr);
    }
    SUBCASE("gradient-blocked modes keep the current value in the closing guard") {
        // from `stopped` no mitigation may relax to `srmst`; the stage skips
        // it and the closing guard accepts `stopped` as a legitimate remain
        auto cs = gen_mitigations(m, factor_of(m, "HC"));
        const Command* stage = find_command(cs, "HCmitSrmst.sm");
        REQUIRE(stage != nullptr);
        long stopped = m.mode_index("stopped");
        long srmst = m.mode_index("srmst");
        CellEnv env;
        env.set("ph_HC", 1);
        CHECK(eval_bool(*stage->guard, env.set("mode", 0)));           // normal moves
        CHECK(!eval_bool(*stage->guard, env.set("mode", stopped)));    // stopped stays
        const Command* closing = find_command(cs, "wstop1");
        REQUIRE(closing != nullptr);
        CHECK(eval_bool(*closing->guard, env.set("mode", srmst)));
        CHECK(eval_bool(*closing->guard, env.set("mode", stopped)));   // blocked remain
        CHECK(!eval_bool(*closing->guard, env.set("mode", 0)));        // not yet staged
    }
}

TEST_CASE("resumption generation") {
    RiskModel m = load_cell();
    SUBCASE("closing moves the phase back to inactive under the restriction") {
        auto cs = gen_resumptions(m, factor_of(m, "HC"));
        const Command* closing = find_command(cs, "HCresNormal");
        REQUIRE(closing != nullptr);
        CHECK(closing->updates[0].assigns[0].var == "ph_HC");
        CHECK(closing->updates[0].assigns[0].value->ival == 0);
        // guarded by the mitigated phase and the declared restriction oloc=0
        CellEnv env;
        CHECK(eval_bool(*closing->guard, env.set("ph_HC", 3)));
        CHECK(!eval_bool(*closing->guard, env.set("oloc", 2)));   // operator inside
        env.set("oloc", 0);
        CHECK(!eval_bool(*closing->guard, env.set("ph_HC", 1)));  // still active
        // mode stage relaxes stopped -> normal (non-positive gradient)
        const Command* stage = find_command(cs, "HCresNormal.sm");
        REQUIRE(stage != nullptr);
        env.set("ph_HC", 3);
        CHECK(eval_bool(*stage->guard, env.set("mode", m.mode_index("stopped"))));
    }
    SUBCASE("two resumption options yield two distinct closings") {
        auto cs = gen_resumptions(m, factor_of(m, "HS"));
        CHECK(find_command(cs, "HSresume") != nullptr);
        CHECK(find_command(cs, "HSresCautious") != nullptr);
    }
    SUBCASE("both options enabled in a mitigated state of the built MDP") {
        auto mdp = build_mdp(compile(m));
        int mg = mdp.label_index("mitigated_HS");
        bool both = false;
        for (StateIndex s = 0; s < mdp.num_states() && !both; ++s) {
            if (!mdp.has_label(s, mg)) continue;
            bool a = false, b = false;
            for (auto& c : mdp.choices[s]) {
                a = a || mdp.action_names[c.action] == "HSresume";
                b = b || mdp.action_names[c.action] == "HSresCautious";
            }
            both = a && b;
        }
        CHECK(both);
    }
}

TEST_CASE("reward structure generation") {
    RiskModel m = load_cell();
    auto rs = gen_rewards(m);
    auto find = [&](const std::string& n) -> const RewardStructure* {
        for (auto& r : rs)
            if (r.name == n) return &r;
        return nullptr;
    };
    SUBCASE("severity-weighted risk and declared nuisance entries") {
        const RewardStructure* risk = find("risk");
        REQUIRE(risk != nullptr);
        bool hc_on_env = false;
        for (auto& e : risk->entries)
            hc_on_env = hc_on_env || (e.value == 10 && e.action == "w_weldPiece");
        CHECK(hc_on_env);
        const RewardStructure* nuis = find("nuis");
        REQUIRE(nuis != nullptr);
        bool hcmit = false;
        for (auto& e : nuis->entries)
            hcmit = hcmit || (e.action == "stop" && e.value == 4);
        CHECK(hcmit);
    }
    SUBCASE("omitted costs leave the structures empty") {
        RiskModel n = m;
        for (auto& a : n.actions) a.costs.clear();
        auto rs2 = gen_rewards(n);
        for (auto& r : rs2)
            if (r.name == "nuis" || r.name == "eff") CHECK(r.entries.empty());
    }
    SUBCASE("potential entries exist exactly for mitigation labels") {
        const RewardStructure* pot = find("pot");
        REQUIRE(pot != nullptr);
        std::set<std::string> expected;
        for (auto& f : m.factors)
            for (auto& name : f.mitigations) {
                const ActionDecl* a = m.find_action(name);
                expected.insert(a->sync_event.empty() ? a->name : a->sync_event);
            }
        std::set<std::string> got;
        for (auto& e : pot->entries) got.insert(e.action);
        CHECK(got == expected);
    }
}

TEST_CASE("compilation of whole models") {
    RiskModel m = load_cell();
    SUBCASE("a one-factor model reaches its active phase") {
        RiskModel one = restricted_to_factors(m, {"HC"});
        auto mdp = build_mdp(compile(one));
        auto res = check_qualitative(mdp, parse_formula("E [ F \"active_HC\" ]"));
        CHECK(res.holds);
        CHECK(!res.witness.empty());
    }
    SUBCASE("the bundled model carries at least 15 controller commands") {
        auto prog = compile(m);
        size_t asc_cmds = 0;
        for (auto& mod : prog.modules)
            if (mod.name == "asc") asc_cmds = mod.commands.size();
        CHECK(asc_cmds >= 15);
    }
    SUBCASE("no factors compile to the nominal process only") {
        RiskModel none = restricted_to_factors(m, {});
        auto prog = compile(none);
        for (auto& mod : prog.modules) {
            CHECK(mod.name.rfind("monitor_", 0) != 0);
            if (mod.name == "asc") CHECK(mod.commands.empty());
        }
        auto mdp = build_mdp(compile(none));
        CHECK(mdp.num_states() > 1);
    }
    SUBCASE("action availability follows includes and actions references") {
        RiskModel t = parse_risk_model(R"(
Mode normal;
Var x : [0..3] init 0;
Activity prep {
  action step by robot { guard x = 0; update x := 1; }
}
Activity mid { includes prep; }
Activity top { includes mid; successor done when x = 1; }
Activity done { actions step; }
Init { act = top; }
)");
        auto prog = compile(t);
        const Command* step = nullptr;
        for (auto& mod : prog.modules)
            if (mod.name == "robot") step = &mod.commands.front();
        REQUIRE(step != nullptr);
        // the activity filter accepts the host, both includers, and the
        // referencing activity
        for (long act = 0; act < 4; ++act)
            CHECK(eval_expr({"act"}, {act}, *step->guard_parts[2]) == 1);
    }
    SUBCASE("nominal guards conjoin the not-final, mode and activity filters") {
        auto prog = compile(m);
        ExprPtr final_expr;
        for (auto& l : prog.labels)
            if (l.name == "final") final_expr = l.expr;
        REQUIRE(final_expr != nullptr);
        for (auto& mod : prog.modules) {
            if (mod.name == "asc" || mod.name.rfind("monitor_", 0) == 0) continue;
            for (auto& c : mod.commands) {
                REQUIRE(c.guard_parts.size() == 4);
                // part 0 is the negated final label
                CHECK(c.guard_parts[0]->op == ExprOp::Not);
                CHECK(expr_equal(c.guard_parts[0]->lhs, final_expr));
                // parts 1 and 2 only constrain mode respectively act
                std::vector<std::string> vars;
                collect_vars(c.guard_parts[1], vars);
                for (auto& v : vars) CHECK(v == "mode");
                vars.clear();
                collect_vars(c.guard_parts[2], vars);
                for (auto& v : vars) CHECK(v == "act");
            }
        }
    }
    SUBCASE("gradient monotonicity over all controller transitions") {
        auto prog = compile(m);
        auto mdp = build_mdp(prog);
        long mode_idx = 1;  // var order: act, mode, ...
        auto grad = [&](long from, long to) {
            return m.mode_gradients.entries[from][to];
        };
        for (StateIndex s = 0; s < mdp.num_states(); ++s)
            for (auto& c : mdp.choices[s]) {
                const std::string& a = mdp.action_names[c.action];
                bool mit_stage = a.find("mit") != std::string::npos &&
                                 a.rfind(".sm") == a.size() - 3;
                bool res_stage = a.find("res") != std::string::npos &&
                                 a.rfind(".sm") == a.size() - 3;
                if (!mit_stage && !res_stage) continue;
                for (auto& [t, p] : c.dist) {
                    long pre = mdp.states[s][mode_idx];
                    long post = mdp.states[t][mode_idx];
                    if (pre == post) continue;
                    if (mit_stage) CHECK(grad(pre, post) >= 0);
                    if (res_stage) CHECK(grad(pre, post) <= 0);
                }
            }
    }
    SUBCASE("phase trajectories follow the factor transition systems") {
        auto mdp = build_mdp(compile(m));
        std::map<std::string, LabelledTransitionSystem> lts;
        std::map<std::string, size_t> phase_var;
        for (auto& f : m.factors) {
            lts[f.name] = factor_lts(f);
            for (size_t v = 0; v < mdp.var_names.size(); ++v)
                if (mdp.var_names[v] == "ph_" + f.name) phase_var[f.name] = v;
        }
        for (StateIndex s = 0; s < mdp.num_states(); ++s)
            for (auto& c : mdp.choices[s])
                for (auto& [t, p] : c.dist)
                    for (auto& f : m.factors) {
                        Phase from = static_cast<Phase>(mdp.states[s][phase_var[f.name]]);
                        Phase to = static_cast<Phase>(mdp.states[t][phase_var[f.name]]);
                        if (from == to) continue;
                        CHECK(lts[f.name].has_edge(from, to));
                    }
    }
    SUBCASE("endangerment probabilities appear exactly as declared") {
        auto mdp = build_mdp(compile(m));
        bool seen = false;
        for (StateIndex s = 0; s < mdp.num_states(); ++s)
            for (auto& c : mdp.choices[s]) {
                if (mdp.action_names[c.action] != "e_HC") continue;
                REQUIRE(c.dist.size() == 2);
                double lo = std::min(c.dist[0].second, c.dist[1].second);
                double hi = std::max(c.dist[0].second, c.dist[1].second);
                CHECK(lo == 0.05);
                CHECK(hi == 0.95);
                seen = true;
            }
        CHECK(seen);
    }
}
