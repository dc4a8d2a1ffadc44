// Policy synthesis: optimal deterministic memoryless policies for reward and
// probability objectives, scalarisation sweeps for two-objective queries,
// induced-chain verification and steady-state analysis.
#pragma once

#include "riskmc/verify.hpp"

namespace riskmc {

struct SynthesisResult {
    double value = 0;        // optimal value at the initial state
    Policy policy;
    std::string objective;   // textual form, for reports and exports
};

namespace detail {

inline Policy complete_policy(const Mdp& m, const std::vector<int32_t>& greedy) {
    Policy p;
    p.choice.assign(m.num_states(), -1);
    for (StateIndex s = 0; s < m.num_states(); ++s) {
        if (m.choices[s].empty()) continue;
        int32_t g = s < greedy.size() ? greedy[s] : 0;
        if (g < 0 || g >= static_cast<int32_t>(m.choices[s].size())) g = 0;
        p.choice[s] = g;
    }
    return p;
}

inline const RewardStructure& find_reward(const std::vector<RewardStructure>& rs,
                                          const std::string& name) {
    for (auto& r : rs)
        if (r.name == name) return r;
    throw VerifyError("unknown reward structure '" + name + "'");
}

} // namespace detail

// Optimal policy for a single objective: a quantitative P head (min or max
// reachability style path) or an R{...}=? head. The policy is the greedy
// choice map of the final value-iteration step, ties to the lowest index.
inline SynthesisResult synthesize(const Mdp& m,
                                  const std::vector<RewardStructure>& rewards,
                                  const FormulaPtr& objective,
                                  VerifyOptions opt = {}) {
    SynthesisResult out;
    if (objective->kind == Formula::Kind::Prob) {
        bool maximize = objective->opt != Opt::Min;
        const PathFormula& p = *objective->path;
        detail::Engine e(m);
        if (p.kind == PathFormula::Kind::Next)
            throw VerifyError("next-step objectives are not supported for synthesis");
        StateSet phi = satisfying_states(m, p.lhs);
        StateSet psi = satisfying_states(m, p.rhs);
        if (p.kind == PathFormula::Kind::WeakUntil) {
            // optimal policy of the weak form is the opposite-optimal policy
            // of the complemented strong form
            StateSet alpha = detail::set_and(phi, detail::set_not(psi));
            StateSet beta = detail::set_and(detail::set_not(phi), detail::set_not(psi));
            auto inner = detail::until_values(e, alpha, beta, !maximize, opt);
            out.value = 1.0 - inner.values[m.initial];
            out.policy = detail::complete_policy(m, inner.greedy);
        } else {
            auto res = p.bound.kind == Bound::Kind::None
                           ? detail::until_values(e, phi, psi, maximize, opt)
                           : detail::ValueResult{};
            if (p.bound.kind != Bound::Kind::None)
                throw VerifyError("bounded objectives are not supported for synthesis");
            out.value = res.values[m.initial];
            out.policy = detail::complete_policy(m, res.greedy);
        }
        out.objective = std::string(maximize ? "Pmax" : "Pmin") + "=?[...]";
        return out;
    }
    if (objective->kind == Formula::Kind::Reward) {
        if (objective->opt == Opt::Min)
            throw VerifyError("the synthesis engine maximises; encode costs as "
                              "negated preferences");
        const RewardStructure& rs = detail::find_reward(rewards, objective->reward_name);
        RewardTable rt = RewardTable::build(m, rs);
        RewardResult res;
        if (objective->cumulative) {
            res = expected_total_reward(m, rt, objective->reward_bound, opt);
        } else {
            StateSet target = satisfying_states(m, objective->rhs);
            res = expected_reach_reward(m, rt, target, opt);
        }
        out.value = res.values[m.initial];
        out.policy = detail::complete_policy(m, res.greedy);
        out.objective = "Rmax{\"" + objective->reward_name + "\"}[...]";
        return out;
    }
    throw VerifyError("objective must be a P or R head");
}

// Exact evaluation of both reward objectives under a fixed policy, on its
// induced chain (value iteration on the single-choice system).
namespace detail {

inline double chain_total_reward(const Dtmc& d, const RewardStructure& rs,
                                 VerifyOptions opt) {
    Mdp cm = as_mdp(d);
    RewardTable rt = RewardTable::build(cm, rs);
    auto res = expected_total_reward(cm, rt, {}, opt);
    return res.values[cm.initial];
}

} // namespace detail

struct FrontierPoint {
    double weight = 0;
    double value_a = 0, value_b = 0;
    Policy policy;
};

// Reachability expressed as action reward: entering `target` pays w once,
// target states are treated as absorbing by the surrounding queries. Lets a
// probability objective join a reward scalarisation.
inline RewardTable reach_bonus_table(const Mdp& m, const StateSet& target, double w) {
    RewardTable t;
    t.r.resize(m.num_states());
    for (StateIndex s = 0; s < m.num_states(); ++s) {
        t.r[s].resize(m.choices[s].size(), 0.0);
        if (target[s]) continue;
        for (size_t ci = 0; ci < m.choices[s].size(); ++ci)
            for (auto& [to, p] : m.choices[s][ci].dist)
                if (target[to]) t.r[s][ci] += w * p;
    }
    return t;
}

// Scalarisation sweep for two maximisable reward objectives: synthesise for
// k evenly spaced weightings, evaluate both objectives of each policy on its
// induced chain, and keep the nondominated points (ordered by weight).
inline std::vector<FrontierPoint> pareto_sweep(const Mdp& m,
                                               const std::vector<RewardStructure>& rewards,
                                               const std::string& obj_a,
                                               const std::string& obj_b, int k,
                                               VerifyOptions opt = {}) {
    if (k < 2) throw VerifyError("a sweep needs at least two points");
    const RewardStructure& ra = detail::find_reward(rewards, obj_a);
    const RewardStructure& rb = detail::find_reward(rewards, obj_b);
    RewardTable ta = RewardTable::build(m, ra);
    RewardTable tb = RewardTable::build(m, rb);

    std::vector<FrontierPoint> points;
    for (int i = 0; i < k; ++i) {
        double w = static_cast<double>(i) / static_cast<double>(k - 1);
        RewardTable combined = RewardTable::combine(ta, tb, w, 1.0 - w);
        auto res = expected_total_reward(m, combined, {}, opt);
        FrontierPoint pt;
        pt.weight = w;
        pt.policy = detail::complete_policy(m, res.greedy);
        Dtmc chain = induce_dtmc(m, pt.policy);
        pt.value_a = detail::chain_total_reward(chain, ra, opt);
        pt.value_b = detail::chain_total_reward(chain, rb, opt);
        points.push_back(std::move(pt));
    }
    // drop dominated and duplicate points
    std::vector<FrontierPoint> frontier;
    for (auto& p : points) {
        bool dominated = false;
        for (auto& q : points) {
            if (&p == &q) continue;
            bool geq = q.value_a >= p.value_a - 1e-12 && q.value_b >= p.value_b - 1e-12;
            bool strict = q.value_a > p.value_a + 1e-9 || q.value_b > p.value_b + 1e-9;
            if (geq && strict) {
                dominated = true;
                break;
            }
        }
        if (dominated) continue;
        bool dup = false;
        for (auto& q : frontier)
            dup = dup || (std::abs(q.value_a - p.value_a) < 1e-9 &&
                          std::abs(q.value_b - p.value_b) < 1e-9);
        if (!dup) frontier.push_back(p);
    }
    return frontier;
}

// Sweep variant whose second objective is a reachability-probability head:
// the target is made absorbing and its entry pays the (1-w)-scaled bonus.
inline std::vector<FrontierPoint> pareto_sweep_reach(const Mdp& m,
                                                     const std::vector<RewardStructure>& rewards,
                                                     const std::string& obj_a,
                                                     const FormulaPtr& obj_b, int k,
                                                     VerifyOptions opt = {}) {
    if (k < 2) throw VerifyError("a sweep needs at least two points");
    if (obj_b->kind != Formula::Kind::Prob ||
        obj_b->path->kind != PathFormula::Kind::Until ||
        obj_b->path->lhs->kind != Formula::Kind::Top)
        throw VerifyError("the mixed sweep supports reachability heads only");

    const RewardStructure& ra = detail::find_reward(rewards, obj_a);
    StateSet target = satisfying_states(m, obj_b->path->rhs);
    Mdp absorbed = m;
    for (StateIndex s = 0; s < m.num_states(); ++s)
        if (target[s]) absorbed.choices[s].clear();
    RewardTable ta = RewardTable::build(absorbed, ra);
    RewardTable bonus = reach_bonus_table(absorbed, target, 1.0);

    std::vector<FrontierPoint> points;
    for (int i = 0; i < k; ++i) {
        double w = static_cast<double>(i) / static_cast<double>(k - 1);
        RewardTable combined = RewardTable::combine(ta, bonus, w, 1.0 - w);
        auto res = expected_total_reward(absorbed, combined, {}, opt);
        FrontierPoint pt;
        pt.weight = w;
        pt.policy = detail::complete_policy(absorbed, res.greedy);
        Dtmc chain = induce_dtmc(absorbed, pt.policy);
        pt.value_a = detail::chain_total_reward(chain, ra, opt);
        Mdp cm = as_mdp(chain);
        StateSet chain_target(cm.num_states(), 0);
        for (StateIndex cs = 0; cs < cm.num_states(); ++cs)
            chain_target[cs] = target[chain.mdp_state_of[cs]];
        StateSet all(cm.num_states(), 1);
        pt.value_b = prob_until(cm, all, chain_target, true, UntilMode::Until, {}, opt)
                         [cm.initial];
        points.push_back(std::move(pt));
    }
    std::vector<FrontierPoint> frontier;
    for (auto& p : points) {
        bool dominated = false;
        for (auto& q : points) {
            if (&p == &q) continue;
            bool geq = q.value_a >= p.value_a - 1e-12 && q.value_b >= p.value_b - 1e-12;
            bool strict = q.value_a > p.value_a + 1e-9 || q.value_b > p.value_b + 1e-9;
            if (geq && strict) {
                dominated = true;
                break;
            }
        }
        if (dominated) continue;
        bool dup = false;
        for (auto& q : frontier)
            dup = dup || (std::abs(q.value_a - p.value_a) < 1e-9 &&
                          std::abs(q.value_b - p.value_b) < 1e-9);
        if (!dup) frontier.push_back(p);
    }
    return frontier;
}

// ---- steady state ----

namespace detail {

// bottom strongly connected components of a chain (deadlocks count as
// absorbing self-loops)
inline std::vector<std::vector<StateIndex>> bsccs(const Dtmc& d) {
    size_t n = d.num_states();
    std::vector<std::vector<StateIndex>> adj(n);
    for (StateIndex s = 0; s < n; ++s) {
        if (d.rows[s].empty()) adj[s].push_back(s);
        for (auto& [t, p] : d.rows[s]) adj[s].push_back(t);
    }
    // iterative Tarjan
    std::vector<int> comp(n, -1), low(n), idx(n, -1);
    std::vector<StateIndex> stk;
    std::vector<char> on(n, 0);
    int counter = 0, ncomp = 0;
    for (StateIndex root = 0; root < n; ++root) {
        if (idx[root] >= 0) continue;
        std::vector<std::pair<StateIndex, size_t>> frames{{root, 0}};
        while (!frames.empty()) {
            auto& [v, ei] = frames.back();
            if (ei == 0) {
                idx[v] = low[v] = counter++;
                stk.push_back(v);
                on[v] = 1;
            }
            bool descended = false;
            while (ei < adj[v].size()) {
                StateIndex w = adj[v][ei++];
                if (idx[w] < 0) {
                    frames.push_back({w, 0});
                    descended = true;
                    break;
                }
                if (on[w]) low[v] = std::min(low[v], idx[w]);
            }
            if (descended) continue;
            if (low[v] == idx[v]) {
                while (true) {
                    StateIndex w = stk.back();
                    stk.pop_back();
                    on[w] = 0;
                    comp[w] = ncomp;
                    if (w == v) break;
                }
                ++ncomp;
            }
            StateIndex vv = v;
            frames.pop_back();
            if (!frames.empty())
                low[frames.back().first] = std::min(low[frames.back().first], low[vv]);
        }
    }
    std::vector<std::vector<StateIndex>> sccs(ncomp);
    for (StateIndex s = 0; s < n; ++s) sccs[comp[s]].push_back(s);
    std::vector<std::vector<StateIndex>> out;
    for (auto& scc : sccs) {
        std::vector<char> in(n, 0);
        for (StateIndex s : scc) in[s] = 1;
        bool bottom = true;
        for (StateIndex s : scc)
            for (StateIndex t : adj[s]) bottom = bottom && in[t];
        if (bottom) {
            std::sort(scc.begin(), scc.end());
            out.push_back(scc);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// stationary distribution inside one BSCC: solve pi^T P = pi^T, sum pi = 1
// by Gaussian elimination with partial pivoting
inline std::vector<double> stationary(const Dtmc& d, const std::vector<StateIndex>& bscc) {
    size_t k = bscc.size();
    std::map<StateIndex, size_t> local;
    for (size_t i = 0; i < k; ++i) local[bscc[i]] = i;

    // A = P^T - I, last row replaced by ones; b = e_k
    std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
    for (size_t j = 0; j < k; ++j) {
        StateIndex s = bscc[j];
        if (d.rows[s].empty()) {
            a[j][j] += 1.0;  // absorbing self-loop
        } else {
            for (auto& [t, p] : d.rows[s]) a[local.at(t)][j] += p;
        }
    }
    for (size_t i = 0; i < k; ++i) a[i][i] -= 1.0;
    for (size_t j = 0; j < k; ++j) a[k - 1][j] = 1.0;
    a[k - 1][k] = 1.0;

    for (size_t col = 0; col < k; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < k; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-14)
            throw VerifyError("singular stationary system");
        std::swap(a[col], a[piv]);
        for (size_t r = 0; r < k; ++r) {
            if (r == col) continue;
            double f = a[r][col] / a[col][col];
            if (f == 0) continue;
            for (size_t cc = col; cc <= k; ++cc) a[r][cc] -= f * a[col][cc];
        }
    }
    std::vector<double> pi(k);
    for (size_t i = 0; i < k; ++i) pi[i] = a[i][k] / a[i][i];

    // residual check against the defining equations
    double res = 0;
    std::vector<double> chk(k, 0.0);
    for (size_t j = 0; j < k; ++j) {
        StateIndex s = bscc[j];
        if (d.rows[s].empty()) chk[j] += pi[j];
        else
            for (auto& [t, p] : d.rows[s]) chk[local.at(t)] += pi[j] * p;
    }
    double sum = 0;
    for (size_t i = 0; i < k; ++i) {
        res = std::max(res, std::abs(chk[i] - pi[i]));
        sum += pi[i];
    }
    res = std::max(res, std::abs(sum - 1.0));
    if (res > 1e-10)
        throw VerifyError("stationary distribution residual " + std::to_string(res),
                          res);
    return pi;
}

} // namespace detail

// Long-run probability of the given state set: BSCC stationary measures
// weighted by the reachability probability of each component.
inline double steady_state(const Dtmc& d, const StateSet& atom,
                           VerifyOptions opt = {}) {
    auto comps = detail::bsccs(d);
    Mdp cm = as_mdp(d);
    VerifyOptions tight = opt;
    tight.tol = std::min(opt.tol, 1e-12);

    double total = 0;
    StateSet all(d.num_states(), 1);
    for (auto& bscc : comps) {
        StateSet target(d.num_states(), 0);
        for (StateIndex s : bscc) target[s] = 1;
        double reach = prob_until(cm, all, target, true, UntilMode::Until, {}, tight)
                           [d.initial];
        if (reach <= 0) continue;
        auto pi = detail::stationary(d, bscc);
        double inside = 0;
        for (size_t i = 0; i < bscc.size(); ++i)
            if (atom[bscc[i]]) inside += pi[i];
        total += reach * inside;
    }
    return total;
}

inline double steady_state(const Dtmc& d, const std::string& label,
                           VerifyOptions opt = {}) {
    Mdp cm = as_mdp(d);
    return steady_state(d, states_with_label(cm, label), opt);
}

// ---- property evaluation and policy verification ----

struct PropertyResult {
    std::string text;
    bool is_numeric = false;
    double value = 0;
    bool holds = false;   // verdict after threshold comparison, or the CTL result
    bool pass = true;     // verdict matches the v:/f: mark
};

// Evaluates one formula on a model. The chain pointer enables S formulas and
// unquantified P/R heads; on an MDP, thresholds resolve to the conservative
// direction (lower bounds via min, upper bounds via max).
inline PropertyResult evaluate_formula(const Mdp& m,
                                       const std::vector<RewardStructure>& rewards,
                                       const FormulaPtr& f, const Dtmc* chain,
                                       VerifyOptions opt = {}) {
    PropertyResult out;
    using K = Formula::Kind;
    switch (f->kind) {
    case K::Prob: {
        bool maximize;
        if (f->opt == Opt::Min) maximize = false;
        else if (f->opt == Opt::Max) maximize = true;
        else if (chain) maximize = true;  // unique resolution on a chain
        else if (f->cmp == Cmp::Ge || f->cmp == Cmp::Gt) maximize = false;
        else if (f->cmp == Cmp::Le || f->cmp == Cmp::Lt) maximize = true;
        else throw VerifyError("P=? on an MDP needs Pmin or Pmax");

        const PathFormula& p = *f->path;
        std::vector<double> vals;
        if (p.kind == PathFormula::Kind::Next) {
            StateSet psi = satisfying_states(m, p.rhs);
            detail::Engine e(m);
            std::vector<double> ind(m.num_states(), 0.0);
            for (size_t s = 0; s < ind.size(); ++s) ind[s] = psi[s] ? 1 : 0;
            StateSet everywhere(m.num_states(), 1);
            vals = detail::step_once(e, everywhere, ind, maximize);
        } else {
            StateSet phi = satisfying_states(m, p.lhs);
            StateSet psi = satisfying_states(m, p.rhs);
            UntilMode mode = p.kind == PathFormula::Kind::WeakUntil
                                 ? UntilMode::WeakUntil
                                 : UntilMode::Until;
            vals = prob_until(m, phi, psi, maximize, mode, p.bound, opt);
        }
        out.is_numeric = true;
        out.value = vals[m.initial];
        out.holds = cmp_holds(f->cmp, out.value, f->threshold);
        return out;
    }
    case K::Reward: {
        if (f->opt == Opt::Min && !chain)
            throw VerifyError("the engine maximises rewards; encode costs as "
                              "negated preferences");
        const RewardStructure& rs = detail::find_reward(rewards, f->reward_name);
        RewardTable rt = RewardTable::build(m, rs);
        RewardResult res;
        if (f->cumulative) res = expected_total_reward(m, rt, f->reward_bound, opt);
        else res = expected_reach_reward(m, rt, satisfying_states(m, f->rhs), opt);
        out.is_numeric = true;
        out.value = res.values[m.initial];
        out.holds = cmp_holds(f->cmp, out.value, f->threshold);
        return out;
    }
    case K::Steady: {
        if (!chain) throw VerifyError("steady-state formulas need a chain");
        StateSet atom = satisfying_states(m, f->rhs);
        out.is_numeric = true;
        out.value = steady_state(*chain, atom, opt);
        out.holds = cmp_holds(f->cmp, out.value, f->threshold);
        return out;
    }
    default: {
        auto res = check_qualitative(m, f, opt);
        out.holds = res.holds;
        return out;
    }
    }
}

// Property report for an induced chain: every P=?, bounded/unbounded until,
// G-safety (via the weak-until dual) and threshold comparison, plus S heads.
inline std::vector<PropertyResult> verify_policy(const Dtmc& chain,
                                                 const std::vector<Property>& props,
                                                 const std::vector<RewardStructure>& rewards = {},
                                                 VerifyOptions opt = {}) {
    Mdp cm = as_mdp(chain);
    std::vector<PropertyResult> out;
    for (auto& p : props) {
        PropertyResult r = evaluate_formula(cm, rewards, p.formula, &chain, opt);
        r.text = p.text;
        bool expect = p.mark != Property::Mark::Falsify;
        r.pass = r.holds == expect;
        out.push_back(std::move(r));
    }
    return out;
}

// ---- exports ----

inline std::string policy_json(const Mdp& m, const Policy& p, double value,
                               const std::string& objective) {
    std::ostringstream os;
    os << "{\"policy\":[";
    bool first = true;
    for (StateIndex s = 0; s < m.num_states(); ++s) {
        if (p.choice[s] < 0) continue;
        if (!first) os << ",";
        os << "{\"state\":" << s << ",\"action\":\""
           << m.action_names[m.choices[s][p.choice[s]].action] << "\"}";
        first = false;
    }
    os << "],\"value\":" << detail::fmt_prob(value) << ",\"objective\":\""
       << objective << "\"}";
    return os.str();
}

inline std::string frontier_csv(const std::vector<FrontierPoint>& pts,
                                const std::string& file_prefix) {
    std::ostringstream os;
    os << "w,valueA,valueB,policyFile\n";
    for (size_t i = 0; i < pts.size(); ++i)
        os << detail::fmt_prob(pts[i].weight) << "," << detail::fmt_prob(pts[i].value_a)
           << "," << detail::fmt_prob(pts[i].value_b) << "," << file_prefix << i
           << ".json\n";
    return os.str();
}

} // namespace riskmc
