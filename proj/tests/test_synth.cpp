#include <doctest.h>

#include "helpers.hpp"
#include "riskmc/synth.hpp"
#include "riskmc/translate.hpp"

using namespace riskmc;
using namespace testutil;

TEST_CASE("single-objective synthesis") {
    SUBCASE("picks the higher-reward action") {
        MdpSketch sk(2);
        sk.choice(0, "cheap", {{1, 1.0}});
        sk.choice(0, "rich", {{1, 1.0}});
        std::vector<RewardStructure> rs = {
            {"r", {{nullptr, "cheap", 1}, {nullptr, "rich", 3}}}};
        auto res = synthesize(sk.m, rs, parse_formula("Rmax{\"r\"} [ C ]"));
        CHECK(res.value == doctest::Approx(3.0));
        CHECK(sk.m.action_names[sk.m.choices[0][res.policy.choice[0]].action] == "rich");
    }
    SUBCASE("probability objective agrees with the checker") {
        RiskModel m = restricted_to_factors(load_cell(), {"HC"});
        auto mdp = build_mdp(compile(m));
        auto rewards = gen_rewards(m);
        auto res = synthesize(mdp, rewards, parse_formula("Pmax=? [ F \"final\" ]"));
        StateSet top(mdp.num_states(), 1);
        auto direct = prob_until(mdp, top, states_with_label(mdp, "final"), true);
        CHECK(res.value == doctest::Approx(direct[mdp.initial]).epsilon(1e-9));
    }
    SUBCASE("synthesised value equals the enumerated optimum") {
        std::mt19937_64 rng(77);
        for (int round = 0; round < 80; ++round) {
            Mdp m = random_mdp(rng);
            auto goal = label_set(m, "goal");
            auto res = synthesize(m, {}, parse_formula("Pmax=? [ F \"goal\" ]"));
            auto resmin = synthesize(m, {}, parse_formula("Pmin=? [ F \"goal\" ]"));
            auto oracle = enumerate_policies(m, [&](const std::vector<int>& pol) {
                return chain_until(m, pol, std::vector<char>(m.num_states(), 1), goal);
            });
            CHECK(res.value == doctest::Approx(oracle.vmax[m.initial]).epsilon(1e-6));
            CHECK(resmin.value == doctest::Approx(oracle.vmin[m.initial]).epsilon(1e-6));
        }
    }
    SUBCASE("a policy is deterministic wherever choice exists") {
        std::mt19937_64 rng(78);
        for (int round = 0; round < 50; ++round) {
            Mdp m = random_mdp(rng);
            auto res = synthesize(m, {}, parse_formula("Pmax=? [ F \"goal\" ]"));
            REQUIRE(res.policy.choice.size() == m.num_states());
            for (StateIndex s = 0; s < m.num_states(); ++s) {
                if (m.choices[s].empty()) {
                    CHECK(res.policy.choice[s] == -1);
                } else {
                    CHECK(res.policy.choice[s] >= 0);
                    CHECK(res.policy.choice[s] <
                          static_cast<int32_t>(m.choices[s].size()));
                }
            }
        }
    }
}

TEST_CASE("pareto sweep") {
    SUBCASE("identical objectives collapse to one point") {
        MdpSketch sk(2);
        sk.choice(0, "a", {{1, 1.0}});
        std::vector<RewardStructure> rs = {{"x", {{nullptr, "a", 2}}},
                                           {"y", {{nullptr, "a", 2}}}};
        auto pts = pareto_sweep(sk.m, rs, "x", "y", 5);
        CHECK(pts.size() == 1);
    }
    SUBCASE("antagonistic objectives keep both extremes") {
        MdpSketch sk(2);
        sk.choice(0, "left", {{1, 1.0}});
        sk.choice(0, "right", {{1, 1.0}});
        std::vector<RewardStructure> rs = {{"x", {{nullptr, "left", 1}}},
                                           {"y", {{nullptr, "right", 1}}}};
        auto pts = pareto_sweep(sk.m, rs, "x", "y", 5);
        REQUIRE(pts.size() == 2);
        CHECK(pts[0].value_a == doctest::Approx(0.0));
        CHECK(pts[0].value_b == doctest::Approx(1.0));
        CHECK(pts[1].value_a == doctest::Approx(1.0));
        CHECK(pts[1].value_b == doctest::Approx(0.0));
    }
    SUBCASE("bundled effort/nuisance frontier") {
        RiskModel m = load_cell();
        auto mdp = build_mdp(compile(m));
        auto rewards = gen_rewards(m);
        auto pts = pareto_sweep(mdp, rewards, "eff", "nuis", 9);
        CHECK(pts.size() >= 2);
        // pairwise nondominated
        for (auto& p : pts)
            for (auto& q : pts) {
                if (&p == &q) continue;
                bool dominates = q.value_a >= p.value_a + 1e-9 &&
                                 q.value_b >= p.value_b - 1e-12;
                bool dominates2 = q.value_b >= p.value_b + 1e-9 &&
                                  q.value_a >= p.value_a - 1e-12;
                CHECK(!(dominates && dominates2));
            }
        // each frontier policy induces a well-formed chain
        for (auto& p : pts) {
            Dtmc chain = induce_dtmc(mdp, p.policy);
            CHECK(chain.num_states() > 0);
            for (StateIndex s = 0; s < chain.num_states(); ++s) {
                if (chain.rows[s].empty()) continue;
                double sum = 0;
                for (auto& [t, pr] : chain.rows[s]) sum += pr;
                CHECK(std::abs(sum - 1.0) <= 1e-9);
            }
        }
    }
    SUBCASE("mixed sweep with a reachability head") {
        RiskModel m = restricted_to_factors(load_cell(), {"HC"});
        auto mdp = build_mdp(compile(m));
        auto rewards = gen_rewards(m);
        auto pts = pareto_sweep_reach(mdp, rewards, "pot",
                                      parse_formula("Pmax=? [ F \"final\" ]"), 5);
        CHECK(!pts.empty());
        for (auto& p : pts) {
            CHECK(p.value_b >= 0.0);
            CHECK(p.value_b <= 1.0 + 1e-9);
        }
    }
}

TEST_CASE("policy verification on induced chains") {
    SUBCASE("unreachable mishap keeps total safety") {
        MdpSketch sk(2, {"mishap"});
        sk.choice(0, "go", {{1, 1.0}});
        Policy pol;
        pol.choice = {0, -1};
        Dtmc chain = induce_dtmc(sk.m, pol);
        auto props = parse_properties("P>0.9 [ G !\"mishap\" ]\nP=? [ G !\"mishap\" ]");
        auto rep = verify_policy(chain, props);
        REQUIRE(rep.size() == 2);
        CHECK(rep[0].pass);
        CHECK(rep[1].value == doctest::Approx(1.0));
    }
    SUBCASE("hand-computed mishap chain") {
        MdpSketch sk(3, {"mishap"});
        sk.choice(0, "go", {{1, 0.2}, {2, 0.8}});
        sk.label(1, "mishap");
        Policy pol;
        pol.choice = {0, -1, -1};
        Dtmc chain = induce_dtmc(sk.m, pol);
        auto rep = verify_policy(chain, parse_properties("P=? [ G !\"mishap\" ]"));
        CHECK(rep[0].value == doctest::Approx(0.8).epsilon(1e-9));
    }
    SUBCASE("steady-state and reach-reward heads in property reports") {
        MdpSketch sk(3, {"mishap", "goal"});
        sk.choice(0, "go", {{1, 0.2}, {2, 0.8}});
        sk.label(1, "mishap");
        sk.label(2, "goal");
        Policy pol;
        pol.choice = {0, -1, -1};
        Dtmc chain = induce_dtmc(sk.m, pol);
        std::vector<RewardStructure> rs = {{"steps", {{nullptr, "go", 1}}}};
        auto rep = verify_policy(chain,
                                 parse_properties("S<0.5 [ \"mishap\" ]\n"
                                                  "S=? [ \"mishap\" ]\n"
                                                  "R{\"steps\"} [ C ]"),
                                 rs);
        REQUIRE(rep.size() == 3);
        CHECK(rep[0].pass);
        CHECK(rep[1].value == doctest::Approx(0.2).epsilon(1e-9));
        CHECK(rep[2].value == doctest::Approx(1.0).epsilon(1e-9));
        // reach-reward evaluated directly
        Mdp cm = as_mdp(chain);
        auto rr = evaluate_formula(cm, rs, parse_formula("R{\"steps\"} [ F (\"goal\" | \"mishap\") ]"),
                                   &chain);
        CHECK(rr.value == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("chains never undercut the worst-case policy bound") {
        // the policy space contains every chain: weak-until values of any
        // induced chain dominate the MDP minimum pointwise
        RiskModel m = restricted_to_factors(load_cell(), {"HC"});
        auto mdp = build_mdp(compile(m));
        auto rewards = gen_rewards(m);
        StateSet mishap = states_with_label(mdp, "mishap");
        StateSet safe = states_with_label(mdp, "safe");
        StateSet not_mishap(mdp.num_states());
        for (size_t s = 0; s < mdp.num_states(); ++s) not_mishap[s] = !mishap[s];
        auto vmin = prob_until(mdp, not_mishap, safe, false, UntilMode::WeakUntil);

        for (const char* qname : {"prod", "eff", "pot"}) {
            RewardTable rt;
            for (auto& r : rewards)
                if (r.name == qname) rt = RewardTable::build(mdp, r);
            auto res = expected_total_reward(mdp, rt);
            Policy pol;
            pol.choice.assign(mdp.num_states(), -1);
            for (StateIndex s = 0; s < mdp.num_states(); ++s)
                if (!mdp.choices[s].empty()) pol.choice[s] = res.greedy[s];
            Dtmc chain = induce_dtmc(mdp, pol);
            Mdp cm = as_mdp(chain);
            StateSet c_mishap = states_with_label(cm, "mishap");
            StateSet c_safe = states_with_label(cm, "safe");
            StateSet c_not(cm.num_states());
            for (size_t s = 0; s < cm.num_states(); ++s) c_not[s] = !c_mishap[s];
            auto cv = prob_until(cm, c_not, c_safe, false, UntilMode::WeakUntil);
            for (StateIndex cs = 0; cs < cm.num_states(); ++cs)
                CHECK(cv[cs] >= vmin[chain.mdp_state_of[cs]] - 1e-9);
        }
    }
    SUBCASE("bundled query (c) achieves full conditional accident freedom") {
        RiskModel m = load_cell();
        auto mdp = build_mdp(compile(m));
        auto rewards = gen_rewards(m);
        RewardTable eff, nuis;
        for (auto& r : rewards) {
            if (r.name == "eff") eff = RewardTable::build(mdp, r);
            if (r.name == "nuis") nuis = RewardTable::build(mdp, r);
        }
        auto res = expected_total_reward(mdp, RewardTable::combine(eff, nuis, 0.5, 0.5));
        Policy pol;
        pol.choice.assign(mdp.num_states(), -1);
        for (StateIndex s = 0; s < mdp.num_states(); ++s)
            if (!mdp.choices[s].empty()) pol.choice[s] = res.greedy[s];
        Dtmc chain = induce_dtmc(mdp, pol);
        Mdp cm = as_mdp(chain);
        std::vector<StateIndex> xi;
        int ui = cm.label_index("unsafe");
        for (StateIndex s = 0; s < cm.num_states(); ++s)
            if (cm.has_label(s, ui)) xi.push_back(s);
        REQUIRE(!xi.empty());
        Triple t = accident_freedom(cm, xi);
        CHECK(t.min == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(t.max == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("steady state") {
    SUBCASE("single absorbing state") {
        MdpSketch sk(2, {"a"});
        sk.choice(0, "go", {{1, 1.0}});
        sk.label(1, "a");
        Policy pol;
        pol.choice = {0, -1};
        Dtmc chain = induce_dtmc(sk.m, pol);
        CHECK(steady_state(chain, std::string("a")) == doctest::Approx(1.0));
    }
    SUBCASE("two absorbing states weighted by reachability") {
        MdpSketch sk(3, {"a"});
        sk.choice(0, "go", {{1, 0.3}, {2, 0.7}});
        sk.label(1, "a");
        Policy pol;
        pol.choice = {0, -1, -1};
        Dtmc chain = induce_dtmc(sk.m, pol);
        CHECK(steady_state(chain, std::string("a")) ==
              doctest::Approx(0.3).epsilon(1e-9));
    }
    SUBCASE("period-two cycle splits evenly") {
        MdpSketch sk(2, {"a"});
        sk.choice(0, "swap", {{1, 1.0}});
        sk.choice(1, "swap", {{0, 1.0}});
        sk.label(0, "a");
        Policy pol;
        pol.choice = {0, 0};
        Dtmc chain = induce_dtmc(sk.m, pol);
        CHECK(steady_state(chain, std::string("a")) ==
              doctest::Approx(0.5).epsilon(1e-10));
    }
    SUBCASE("steady-state measure partitions to one") {
        std::mt19937_64 rng(79);
        for (int round = 0; round < 60; ++round) {
            Mdp m = random_mdp(rng);
            // fixed policy: always the first choice
            Policy pol;
            pol.choice.assign(m.num_states(), -1);
            for (StateIndex s = 0; s < m.num_states(); ++s)
                if (!m.choices[s].empty()) pol.choice[s] = 0;
            Dtmc chain = induce_dtmc(m, pol);
            auto goal = label_set(as_mdp(chain), "goal");
            StateSet atom(goal.begin(), goal.end());
            StateSet rest(atom.size());
            for (size_t i = 0; i < atom.size(); ++i) rest[i] = !atom[i];
            double p1 = steady_state(chain, atom);
            double p2 = steady_state(chain, rest);
            CHECK(p1 + p2 == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("frontier export formats") {
    MdpSketch sk(2);
    sk.choice(0, "left", {{1, 1.0}});
    sk.choice(0, "right", {{1, 1.0}});
    std::vector<RewardStructure> rs = {{"x", {{nullptr, "left", 1}}},
                                       {"y", {{nullptr, "right", 1}}}};
    auto pts = pareto_sweep(sk.m, rs, "x", "y", 3);
    std::string csv = frontier_csv(pts, "p");
    CHECK(csv.rfind("w,valueA,valueB,policyFile\n", 0) == 0);
    auto res = synthesize(sk.m, rs, parse_formula("Rmax{\"x\"} [ C ]"));
    std::string js = policy_json(sk.m, res.policy, res.value, "Rmax{x}[C]");
    CHECK(js.find("\"policy\":[") != std::string::npos);
    CHECK(js.find("\"value\":1") != std::string::npos);
    CHECK(js.find("\"objective\":") != std::string::npos);
}
