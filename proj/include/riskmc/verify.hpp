// Property checking on explicit-state models: CTL over the MDP graph,
// qualitative 0/1 precomputation, value iteration for until / weak-until
// probabilities, maximal end components, and expected total rewards.
#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "riskmc/formula.hpp"
#include "riskmc/mdp.hpp"

namespace riskmc {

struct VerifyOptions {
    double tol = 1e-8;          // sup-norm convergence threshold
    uint64_t max_iter = 1'000'000;
};

struct VerifyError : std::runtime_error {
    double residual = 0;
    explicit VerifyError(const std::string& msg, double res = 0)
        : std::runtime_error(msg), residual(res) {}
};

using StateSet = std::vector<char>;

namespace detail {

// Engine view of a model: the raw choice structure plus the absorbing
// self-loop convention at deadlock states, which path semantics require.
struct Engine {
    const Mdp* m;
    std::vector<std::vector<Choice>> ch;
    std::vector<std::vector<StateIndex>> preds;  // deduplicated

    explicit Engine(const Mdp& mdp) : m(&mdp), ch(mdp.choices) {
        for (StateIndex s = 0; s < ch.size(); ++s)
            if (ch[s].empty()) {
                Choice self;
                self.action = -1;
                self.owner = -1;
                self.dist = {{s, 1.0}};
                ch[s].push_back(self);
            }
        preds.resize(ch.size());
        for (StateIndex s = 0; s < ch.size(); ++s)
            for (auto& c : ch[s])
                for (auto& [t, p] : c.dist) preds[t].push_back(s);
        for (auto& v : preds) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
    }
    size_t n() const { return ch.size(); }
};

inline StateSet set_not(const StateSet& a) {
    StateSet r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = !a[i];
    return r;
}
inline StateSet set_and(const StateSet& a, const StateSet& b) {
    StateSet r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] && b[i];
    return r;
}
inline StateSet set_or(const StateSet& a, const StateSet& b) {
    StateSet r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] || b[i];
    return r;
}

// {s : some choice has a successor in X}
inline StateSet pre_exists(const Engine& e, const StateSet& x) {
    StateSet r(e.n(), 0);
    for (StateIndex s = 0; s < e.n(); ++s)
        for (auto& c : e.ch[s]) {
            for (auto& [t, p] : c.dist)
                if (x[t]) {
                    r[s] = 1;
                    break;
                }
            if (r[s]) break;
        }
    return r;
}

// least fixpoint of psi \/ (phi /\ EX .), i.e. E[phi U psi]
inline StateSet eu_set(const Engine& e, const StateSet& phi, const StateSet& psi) {
    StateSet r = psi;
    std::vector<StateIndex> work;
    for (StateIndex s = 0; s < e.n(); ++s)
        if (r[s]) work.push_back(s);
    while (!work.empty()) {
        StateIndex t = work.back();
        work.pop_back();
        for (StateIndex s : e.preds[t])
            if (!r[s] && phi[s]) {
                r[s] = 1;
                work.push_back(s);
            }
    }
    return r;
}

// greatest fixpoint of phi /\ EX ., i.e. EG phi
inline StateSet eg_set(const Engine& e, const StateSet& phi) {
    StateSet x = phi;
    bool changed = true;
    while (changed) {
        changed = false;
        for (StateIndex s = 0; s < e.n(); ++s) {
            if (!x[s]) continue;
            bool keep = false;
            for (auto& c : e.ch[s]) {
                for (auto& [t, p] : c.dist)
                    if (x[t]) {
                        keep = true;
                        break;
                    }
                if (keep) break;
            }
            if (!keep) {
                x[s] = 0;
                changed = true;
            }
        }
    }
    return x;
}

// ---- qualitative probability-0/1 sets ----

// states from which some scheduler and path satisfy phi U psi
inline StateSet reach_exists(const Engine& e, const StateSet& phi, const StateSet& psi) {
    return eu_set(e, phi, psi);
}

inline StateSet prob0_max(const Engine& e, const StateSet& phi, const StateSet& psi) {
    return set_not(reach_exists(e, phi, psi));
}

// Pmax[phi U psi] = 1, nested fixpoint
inline StateSet prob1_max(const Engine& e, const StateSet& phi, const StateSet& psi) {
    StateSet x(e.n(), 1);
    while (true) {
        StateSet y = psi;
        bool grown = true;
        while (grown) {
            grown = false;
            for (StateIndex s = 0; s < e.n(); ++s) {
                if (y[s] || !phi[s] || psi[s]) continue;
                for (auto& c : e.ch[s]) {
                    bool stays = true, progress = false;
                    for (auto& [t, p] : c.dist) {
                        if (!x[t]) stays = false;
                        if (y[t]) progress = true;
                    }
                    if (stays && progress) {
                        y[s] = 1;
                        grown = true;
                        break;
                    }
                }
            }
        }
        if (y == x) return x;
        x = std::move(y);
    }
}

// Pmin[phi U psi] = 0: some scheduler avoids psi entirely
inline StateSet prob0_min(const Engine& e, const StateSet& phi, const StateSet& psi) {
    StateSet x = set_not(psi);
    bool changed = true;
    while (changed) {
        changed = false;
        for (StateIndex s = 0; s < e.n(); ++s) {
            if (!x[s]) continue;
            if (!phi[s]) continue;  // cannot even start, stays prob 0
            bool can_avoid = false;
            for (auto& c : e.ch[s]) {
                bool inside = true;
                for (auto& [t, p] : c.dist)
                    if (!x[t]) {
                        inside = false;
                        break;
                    }
                if (inside) {
                    can_avoid = true;
                    break;
                }
            }
            if (!can_avoid) {
                x[s] = 0;
                changed = true;
            }
        }
    }
    return x;
}

// states where Pmax[G chi] > 0: can reach, within chi, a chi-closed core
inline StateSet positive_always(const Engine& e, const StateSet& chi) {
    StateSet core = chi;
    bool changed = true;
    while (changed) {
        changed = false;
        for (StateIndex s = 0; s < e.n(); ++s) {
            if (!core[s]) continue;
            bool keep = false;
            for (auto& c : e.ch[s]) {
                bool inside = true;
                for (auto& [t, p] : c.dist)
                    if (!core[t]) {
                        inside = false;
                        break;
                    }
                if (inside) {
                    keep = true;
                    break;
                }
            }
            if (!keep) {
                core[s] = 0;
                changed = true;
            }
        }
    }
    return eu_set(e, chi, core);
}

// Pmin[phi U psi] = 1 via the weak-until complement
inline StateSet prob1_min(const Engine& e, const StateSet& phi, const StateSet& psi) {
    StateSet alpha = set_and(phi, set_not(psi));
    StateSet beta = set_and(set_not(phi), set_not(psi));
    StateSet bad = set_or(reach_exists(e, alpha, beta), positive_always(e, alpha));
    return set_not(bad);
}

struct ValueResult {
    std::vector<double> values;
    std::vector<int32_t> greedy;   // argmax/argmin choice per state (VI view)
    uint64_t iterations = 0;
};

inline bool is_stutter(const Engine& e, StateIndex s, size_t ci) {
    const auto& d = e.ch[s][ci].dist;
    return d.size() == 1 && d[0].first == s;
}

// Greedy choice from converged values. Ties go to the lowest index, except
// that a pure self-loop never beats an equal-valued move: a chain following
// the stutter would forfeit the value the iteration converged to.
template <class Q>
inline int32_t greedy_choice(const Engine& e, StateIndex s, Q q, bool maximize) {
    double best = maximize ? -1.0 : std::numeric_limits<double>::infinity();
    int32_t arg = 0;
    bool best_stutter = true;
    for (size_t ci = 0; ci < e.ch[s].size(); ++ci) {
        double v = q(ci);
        bool stut = is_stutter(e, s, ci);
        bool strictly = maximize ? v > best + 1e-12 : v < best - 1e-12;
        bool tie = std::abs(v - best) <= 1e-12;
        if (strictly || (tie && best_stutter && !stut)) {
            best = strictly ? v : best;
            arg = static_cast<int32_t>(ci);
            best_stutter = stut;
        }
    }
    return arg;
}

// Value iteration for until probabilities after 0/1 precomputation.
inline ValueResult until_values(const Engine& e, const StateSet& phi,
                                const StateSet& psi, bool maximize,
                                const VerifyOptions& opt) {
    StateSet s0 = maximize ? prob0_max(e, phi, psi) : prob0_min(e, phi, psi);
    StateSet s1 = maximize ? prob1_max(e, phi, psi) : prob1_min(e, phi, psi);

    size_t n = e.n();
    std::vector<double> x(n, 0.0);
    std::vector<StateIndex> open;
    for (StateIndex s = 0; s < n; ++s) {
        if (s1[s]) x[s] = 1.0;
        else if (!s0[s]) open.push_back(s);
    }
    ValueResult res;
    res.greedy.assign(n, 0);
    double delta = 0;
    for (uint64_t it = 0;; ++it) {
        if (it >= opt.max_iter)
            throw VerifyError("value iteration did not converge (residual " +
                                  std::to_string(delta) + ")",
                              delta);
        delta = 0;
        for (StateIndex s : open) {
            double best = maximize ? -1.0 : 2.0;
            for (auto& c : e.ch[s]) {
                double v = 0;
                for (auto& [t, p] : c.dist) v += p * x[t];
                if (maximize ? v > best : v < best) best = v;
            }
            double d = std::abs(best - x[s]);
            if (d > delta) delta = d;
            x[s] = best;
        }
        res.iterations = it + 1;
        if (delta < opt.tol) break;
        if (open.empty()) break;
    }
    // greedy selection from the final iteration
    for (StateIndex s = 0; s < n; ++s) {
        res.greedy[s] = greedy_choice(
            e, s,
            [&](size_t ci) {
                double v = 0;
                for (auto& [t, p] : e.ch[s][ci].dist) v += p * x[t];
                return v;
            },
            maximize);
    }
    res.values = std::move(x);
    return res;
}

inline std::vector<double> step_once(const Engine& e, const StateSet& phi,
                                     const std::vector<double>& x, bool maximize) {
    std::vector<double> y(e.n(), 0.0);
    for (StateIndex s = 0; s < e.n(); ++s) {
        if (!phi[s]) continue;
        double best = maximize ? -1.0 : 2.0;
        for (auto& c : e.ch[s]) {
            double v = 0;
            for (auto& [t, p] : c.dist) v += p * x[t];
            if (maximize ? v > best : v < best) best = v;
        }
        y[s] = best;
    }
    return y;
}

inline std::vector<double> bounded_until_values(const Engine& e, const StateSet& phi,
                                                const StateSet& psi, bool maximize,
                                                Bound bound, const VerifyOptions& opt) {
    size_t n = e.n();
    auto indicator = [&](const StateSet& s) {
        std::vector<double> v(n, 0.0);
        for (size_t i = 0; i < n; ++i) v[i] = s[i] ? 1.0 : 0.0;
        return v;
    };
    switch (bound.kind) {
    case Bound::Kind::Le:
    case Bound::Kind::Lt: {
        long k = bound.kind == Bound::Kind::Le ? bound.steps : bound.steps - 1;
        if (k < 0) return std::vector<double>(n, 0.0);
        std::vector<double> x = indicator(psi);
        for (long i = 0; i < k; ++i) {
            std::vector<double> y = step_once(e, phi, x, maximize);
            for (size_t s = 0; s < n; ++s) x[s] = psi[s] ? 1.0 : y[s];
        }
        return x;
    }
    case Bound::Kind::Eq: {
        std::vector<double> x = indicator(psi);
        for (long i = 0; i < bound.steps; ++i) x = step_once(e, phi, x, maximize);
        return x;
    }
    case Bound::Kind::Ge: {
        std::vector<double> x = until_values(e, phi, psi, maximize, opt).values;
        for (long i = 0; i < bound.steps; ++i) x = step_once(e, phi, x, maximize);
        return x;
    }
    case Bound::Kind::None: break;
    }
    return until_values(e, phi, psi, maximize, opt).values;
}

} // namespace detail

enum class UntilMode { Until, WeakUntil };

// Per-state until / weak-until probabilities. The weak form is computed via
// the complement identity Popt[a W b] = 1 - P(1-opt)[(a & !b) U (!a & !b)].
inline std::vector<double> prob_until(const Mdp& m, const StateSet& phi,
                                      const StateSet& psi, bool maximize,
                                      UntilMode mode = UntilMode::Until,
                                      Bound bound = {}, VerifyOptions opt = {}) {
    detail::Engine e(m);
    if (mode == UntilMode::WeakUntil) {
        if (bound.kind != Bound::Kind::None)
            throw VerifyError("bounded weak-until is not supported");
        StateSet alpha = detail::set_and(phi, detail::set_not(psi));
        StateSet beta = detail::set_and(detail::set_not(phi), detail::set_not(psi));
        auto inner = detail::until_values(e, alpha, beta, !maximize, opt).values;
        for (auto& v : inner) v = 1.0 - v;
        return inner;
    }
    if (bound.kind != Bound::Kind::None)
        return detail::bounded_until_values(e, phi, psi, maximize, bound, opt);
    return detail::until_values(e, phi, psi, maximize, opt).values;
}

// ---- maximal end components ----

// Sub-MDPs closed under some resolution. Deadlock states are never part of
// an end component.
inline std::vector<std::vector<StateIndex>> maximal_end_components(const Mdp& m) {
    std::vector<std::vector<StateIndex>> result;
    std::vector<std::vector<StateIndex>> work;
    {
        std::vector<StateIndex> all(m.num_states());
        for (StateIndex s = 0; s < m.num_states(); ++s) all[s] = s;
        work.push_back(std::move(all));
    }
    while (!work.empty()) {
        std::vector<StateIndex> cand = std::move(work.back());
        work.pop_back();

        std::vector<char> in(m.num_states(), 0);
        for (StateIndex s : cand) in[s] = 1;

        // drop states without an internal choice until stable
        bool changed = true;
        while (changed) {
            changed = false;
            for (StateIndex s : cand) {
                if (!in[s]) continue;
                bool has_internal = false;
                for (auto& c : m.choices[s]) {
                    bool internal = true;
                    for (auto& [t, p] : c.dist)
                        if (!in[t]) {
                            internal = false;
                            break;
                        }
                    if (internal) {
                        has_internal = true;
                        break;
                    }
                }
                if (!has_internal) {
                    in[s] = 0;
                    changed = true;
                }
            }
        }
        std::vector<StateIndex> kept;
        for (StateIndex s : cand)
            if (in[s]) kept.push_back(s);
        if (kept.empty()) continue;

        // SCC decomposition of the internal-edge graph (iterative Tarjan)
        std::map<StateIndex, size_t> local;
        for (size_t i = 0; i < kept.size(); ++i) local[kept[i]] = i;
        std::vector<std::vector<size_t>> adj(kept.size());
        for (size_t i = 0; i < kept.size(); ++i)
            for (auto& c : m.choices[kept[i]]) {
                bool internal = true;
                for (auto& [t, p] : c.dist)
                    if (!in[t]) {
                        internal = false;
                        break;
                    }
                if (!internal) continue;
                for (auto& [t, p] : c.dist) adj[i].push_back(local[t]);
            }

        std::vector<int> comp(kept.size(), -1), low(kept.size()), idx(kept.size(), -1);
        std::vector<size_t> stk;
        std::vector<char> on(kept.size(), 0);
        int counter = 0, ncomp = 0;
        for (size_t root = 0; root < kept.size(); ++root) {
            if (idx[root] >= 0) continue;
            std::vector<std::pair<size_t, size_t>> frames{{root, 0}};
            while (!frames.empty()) {
                auto& [v, ei] = frames.back();
                if (ei == 0) {
                    idx[v] = low[v] = counter++;
                    stk.push_back(v);
                    on[v] = 1;
                }
                bool descended = false;
                while (ei < adj[v].size()) {
                    size_t w = adj[v][ei++];
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
                        size_t w = stk.back();
                        stk.pop_back();
                        on[w] = 0;
                        comp[w] = ncomp;
                        if (w == v) break;
                    }
                    ++ncomp;
                }
                size_t vv = v;
                frames.pop_back();
                if (!frames.empty())
                    low[frames.back().first] = std::min(low[frames.back().first], low[vv]);
            }
        }

        std::vector<std::vector<StateIndex>> groups(ncomp);
        for (size_t i = 0; i < kept.size(); ++i) groups[comp[i]].push_back(kept[i]);

        if (groups.size() == 1 && groups[0].size() == kept.size() &&
            kept.size() == cand.size()) {
            // stable: closed and strongly connected over internal edges
            std::sort(kept.begin(), kept.end());
            result.push_back(std::move(kept));
        } else {
            for (auto& g : groups)
                if (!g.empty()) work.push_back(std::move(g));
        }
    }
    std::sort(result.begin(), result.end());
    return result;
}

struct RewardTable {
    // reward per state and choice index, dense
    std::vector<std::vector<double>> r;

    static RewardTable build(const Mdp& m, const RewardStructure& rs) {
        RewardTable t;
        t.r.resize(m.num_states());
        for (StateIndex s = 0; s < m.num_states(); ++s) {
            t.r[s].resize(m.choices[s].size(), 0.0);
            for (size_t ci = 0; ci < m.choices[s].size(); ++ci)
                t.r[s][ci] = reward_of(m, rs, s, m.choices[s][ci]);
        }
        return t;
    }
    static RewardTable combine(const RewardTable& a, const RewardTable& b, double wa,
                               double wb) {
        RewardTable t = a;
        for (size_t s = 0; s < t.r.size(); ++s)
            for (size_t c = 0; c < t.r[s].size(); ++c)
                t.r[s][c] = wa * a.r[s][c] + wb * b.r[s][c];
        return t;
    }
};

struct EndComponentError : VerifyError {
    std::vector<StateIndex> component;
    EndComponentError(const std::string& msg, std::vector<StateIndex> comp)
        : VerifyError(msg), component(std::move(comp)) {}
};

namespace detail {

inline void check_no_positive_ec(const Mdp& m, const RewardTable& rt) {
    auto mecs = maximal_end_components(m);
    for (auto& mec : mecs) {
        std::vector<char> in(m.num_states(), 0);
        for (StateIndex s : mec) in[s] = 1;
        for (StateIndex s : mec) {
            for (size_t ci = 0; ci < m.choices[s].size(); ++ci) {
                bool internal = true;
                for (auto& [t, p] : m.choices[s][ci].dist)
                    if (!in[t]) {
                        internal = false;
                        break;
                    }
                if (internal && rt.r[s][ci] > 0) {
                    std::string msg =
                        "end component with positive reward (action '" +
                        m.action_names[m.choices[s][ci].action] + "' in state " +
                        std::to_string(s) + "; component of " +
                        std::to_string(mec.size()) + " states)";
                    throw EndComponentError(msg, mec);
                }
            }
        }
    }
}

} // namespace detail

struct RewardResult {
    std::vector<double> values;
    std::vector<int32_t> greedy;
};

// Maximal expected total reward, cumulative horizon. Detects positive-reward
// end components first: those would accumulate unbounded reward.
inline RewardResult expected_total_reward(const Mdp& m, const RewardTable& rt,
                                          Bound bound = {}, VerifyOptions opt = {}) {
    detail::Engine e(m);
    size_t n = e.n();
    if (bound.kind == Bound::Kind::None) detail::check_no_positive_ec(m, rt);

    auto reward_at = [&](StateIndex s, size_t ci) {
        return ci < rt.r[s].size() ? rt.r[s][ci] : 0.0;  // synthetic self-loop
    };

    std::vector<double> x(n, 0.0);
    RewardResult res;
    res.greedy.assign(n, 0);
    long budget = bound.kind == Bound::Kind::Le ? bound.steps : -1;
    double delta = 0;
    for (uint64_t it = 0;; ++it) {
        if (budget >= 0 && static_cast<long>(it) >= budget) break;
        if (it >= opt.max_iter)
            throw VerifyError("reward iteration did not converge (residual " +
                                  std::to_string(delta) + ")",
                              delta);
        delta = 0;
        for (StateIndex s = 0; s < n; ++s) {
            double best = -1.0;
            for (size_t ci = 0; ci < e.ch[s].size(); ++ci) {
                double v = reward_at(s, ci);
                for (auto& [t, p] : e.ch[s][ci].dist) v += p * x[t];
                if (v > best) best = v;
            }
            double d = std::abs(best - x[s]);
            if (d > delta) delta = d;
            x[s] = best;
        }
        if (budget < 0 && delta < opt.tol) break;
    }
    for (StateIndex s = 0; s < n; ++s) {
        res.greedy[s] = detail::greedy_choice(
            e, s,
            [&](size_t ci) {
                double v = reward_at(s, ci);
                for (auto& [t, p] : e.ch[s][ci].dist) v += p * x[t];
                return v;
            },
            true);
    }
    res.values = std::move(x);
    return res;
}

// Maximal expected reward to reach `target`; requires the target to be
// reached almost surely under every resolution, otherwise the expectation
// is unbounded.
inline RewardResult expected_reach_reward(const Mdp& m, const RewardTable& rt,
                                          const StateSet& target,
                                          VerifyOptions opt = {}) {
    detail::Engine e(m);
    size_t n = e.n();
    StateSet all(n, 1);
    StateSet sure = detail::prob1_min(e, all, target);
    std::vector<StateIndex> bad;
    for (StateIndex s = 0; s < n; ++s)
        if (!sure[s]) bad.push_back(s);
    if (!bad.empty()) {
        std::string msg = "expected reward to target is unbounded from " +
                          std::to_string(bad.size()) + " state(s), e.g. state " +
                          std::to_string(bad.front());
        throw EndComponentError(msg, bad);
    }

    auto reward_at = [&](StateIndex s, size_t ci) {
        return ci < rt.r[s].size() ? rt.r[s][ci] : 0.0;
    };
    std::vector<double> x(n, 0.0);
    double delta = 0;
    for (uint64_t it = 0;; ++it) {
        if (it >= opt.max_iter)
            throw VerifyError("reward iteration did not converge", delta);
        delta = 0;
        for (StateIndex s = 0; s < n; ++s) {
            if (target[s]) continue;
            double best = -1.0;
            for (size_t ci = 0; ci < e.ch[s].size(); ++ci) {
                double v = reward_at(s, ci);
                for (auto& [t, p] : e.ch[s][ci].dist) v += p * x[t];
                if (v > best) best = v;
            }
            double d = std::abs(best - x[s]);
            if (d > delta) delta = d;
            x[s] = best;
        }
        if (delta < opt.tol) break;
    }
    RewardResult res;
    res.greedy.assign(n, 0);
    for (StateIndex s = 0; s < n; ++s) {
        if (target[s]) continue;
        res.greedy[s] = detail::greedy_choice(
            e, s,
            [&](size_t ci) {
                double v = reward_at(s, ci);
                for (auto& [t, p] : e.ch[s][ci].dist) v += p * x[t];
                return v;
            },
            true);
    }
    res.values = std::move(x);
    return res;
}

// ---- qualitative CTL over the MDP graph ----

namespace detail {

struct LabelLookup {
    const Mdp* m;
    StateSet operator()(const std::string& atom) const {
        StateSet r(m->num_states(), 0);
        if (atom == "init") {
            r[m->initial] = 1;
            return r;
        }
        if (atom == "deadlock") {
            for (StateIndex s = 0; s < m->num_states(); ++s)
                if (m->choices[s].empty()) r[s] = 1;
            return r;
        }
        int li = m->label_index(atom);
        if (li < 0) throw VerifyError("unbound atom '" + atom + "'");
        for (StateIndex s = 0; s < m->num_states(); ++s)
            if (m->has_label(s, li)) r[s] = 1;
        return r;
    }
};

inline StateSet sat_states(const Engine& e, const FormulaPtr& f,
                           const LabelLookup& lookup);

inline StateSet sat_path_quant(const Engine& e, bool exists, const PathFormula& p,
                               const LabelLookup& lookup) {
    using K = PathFormula::Kind;
    auto ex = [&](const StateSet& x) { return pre_exists(e, x); };
    auto ax = [&](const StateSet& x) { return set_not(pre_exists(e, set_not(x))); };

    if (p.kind == K::Next) {
        StateSet x = sat_states(e, p.rhs, lookup);
        return exists ? ex(x) : ax(x);
    }
    StateSet phi = sat_states(e, p.lhs, lookup);
    StateSet psi = sat_states(e, p.rhs, lookup);

    if (p.bound.kind != Bound::Kind::None) {
        if (p.kind == K::WeakUntil)
            throw VerifyError("bounded weak-until is not supported");
        long cap;
        switch (p.bound.kind) {
        case Bound::Kind::Le: cap = p.bound.steps; break;
        case Bound::Kind::Lt: cap = p.bound.steps - 1; break;
        default: cap = -2; break;
        }
        auto step = [&](const StateSet& x) {
            StateSet nx = exists ? ex(x) : ax(x);
            return set_or(psi, set_and(phi, nx));
        };
        if (cap >= 0) {
            StateSet x = psi;
            for (long i = 0; i < cap; ++i) x = step(x);
            return x;
        }
        if (p.bound.kind == Bound::Kind::Eq) {
            StateSet x = psi;
            for (long i = 0; i < p.bound.steps; ++i)
                x = set_and(phi, exists ? ex(x) : ax(x));
            return x;
        }
        if (p.bound.kind == Bound::Kind::Ge) {
            StateSet x = sat_path_quant(
                e, exists, *p_until(p.lhs, p.rhs), lookup);
            for (long i = 0; i < p.bound.steps; ++i)
                x = set_and(phi, exists ? ex(x) : ax(x));
            return x;
        }
        return StateSet(e.n(), 0);
    }

    if (p.kind == K::Until) {
        if (exists) return eu_set(e, phi, psi);
        // A[phi U psi] = !(E[(phi&!psi) U (!phi&!psi)] | EG !psi)
        StateSet alpha = set_and(phi, set_not(psi));
        StateSet beta = set_and(set_not(phi), set_not(psi));
        StateSet bad = set_or(eu_set(e, alpha, beta), eg_set(e, set_not(psi)));
        return set_not(bad);
    }
    // weak until
    if (exists) return set_or(eu_set(e, phi, psi), eg_set(e, phi));
    StateSet alpha = set_and(phi, set_not(psi));
    StateSet beta = set_and(set_not(phi), set_not(psi));
    return set_not(eu_set(e, alpha, beta));
}

inline StateSet sat_states(const Engine& e, const FormulaPtr& f,
                           const LabelLookup& lookup) {
    using K = Formula::Kind;
    switch (f->kind) {
    case K::Top: return StateSet(e.n(), 1);
    case K::Atom: return lookup(f->atom);
    case K::Not: return set_not(sat_states(e, f->lhs, lookup));
    case K::And:
        return set_and(sat_states(e, f->lhs, lookup), sat_states(e, f->rhs, lookup));
    case K::Or:
        return set_or(sat_states(e, f->lhs, lookup), sat_states(e, f->rhs, lookup));
    case K::Implies:
        return set_or(set_not(sat_states(e, f->lhs, lookup)),
                      sat_states(e, f->rhs, lookup));
    case K::Exists: return sat_path_quant(e, true, *f->path, lookup);
    case K::Forall: return sat_path_quant(e, false, *f->path, lookup);
    default:
        throw VerifyError("nested quantitative operators are not supported");
    }
}

// Path to a state of `target` through `via` states, for E-witnesses.
inline std::vector<StateIndex> bfs_path(const Engine& e, StateIndex from,
                                        const StateSet& via, const StateSet& target) {
    std::vector<int64_t> parent(e.n(), -2);
    std::deque<StateIndex> q;
    if (!via[from] && !target[from]) return {};
    parent[from] = -1;
    q.push_back(from);
    while (!q.empty()) {
        StateIndex s = q.front();
        q.pop_front();
        if (target[s]) {
            std::vector<StateIndex> path;
            for (int64_t v = s; v >= 0; v = parent[v])
                path.push_back(static_cast<StateIndex>(v));
            std::reverse(path.begin(), path.end());
            return path;
        }
        if (!via[s] && s != from) continue;
        for (auto& c : e.ch[s])
            for (auto& [t, p] : c.dist)
                if (parent[t] == -2 && (via[t] || target[t])) {
                    parent[t] = s;
                    q.push_back(t);
                }
    }
    return {};
}

} // namespace detail

struct QualitativeResult {
    bool holds = false;                 // at the initial state
    std::vector<StateIndex> witness;    // E-witness or not-A counterexample
};

// CTL check over the MDP graph; E quantifies over some resolution and path,
// A over all of them. Returns a witness path when one is easily extracted.
inline QualitativeResult check_qualitative(const Mdp& m, const FormulaPtr& f,
                                           VerifyOptions = {}) {
    detail::Engine e(m);
    detail::LabelLookup lookup{&m};
    StateSet sat = detail::sat_states(e, f, lookup);
    QualitativeResult res;
    res.holds = sat[m.initial];

    // witness extraction for the common shapes
    if (f->kind == Formula::Kind::Exists && res.holds &&
        f->path->kind == PathFormula::Kind::Until &&
        f->path->bound.kind == Bound::Kind::None) {
        StateSet phi = detail::sat_states(e, f->path->lhs, lookup);
        StateSet psi = detail::sat_states(e, f->path->rhs, lookup);
        res.witness = detail::bfs_path(e, m.initial, phi, psi);
    }
    if (f->kind == Formula::Kind::Forall && !res.holds &&
        f->path->kind == PathFormula::Kind::Until &&
        f->path->bound.kind == Bound::Kind::None) {
        // a path into the EG region of !psi refutes A[phi U psi]
        StateSet npsi = detail::set_not(detail::sat_states(e, f->path->rhs, lookup));
        StateSet eg = detail::eg_set(e, npsi);
        if (eg[m.initial]) res.witness = detail::bfs_path(e, m.initial, npsi, eg);
    }
    return res;
}

inline std::vector<StateIndex> check_deadlocks(const Mdp& m) { return m.deadlocks(); }

// Label-set helper for engines and the CLI.
inline StateSet states_with_label(const Mdp& m, const std::string& label) {
    detail::LabelLookup lookup{&m};
    return lookup(label);
}

// States satisfying a qualitative state formula.
inline StateSet satisfying_states(const Mdp& m, const FormulaPtr& f) {
    detail::Engine e(m);
    detail::LabelLookup lookup{&m};
    return detail::sat_states(e, f, lookup);
}

// ---- accident freedom ----

struct Triple {
    double min = 0, mean = 0, max = 0;
};

// For every state of Xi, the (minimal) probability of staying mishap-free
// until a safe state is reached. A model-defined "safe" label takes
// precedence; otherwise safe is the complement of Xi and the mishap states.
inline Triple accident_freedom(const Mdp& m, const std::vector<StateIndex>& xi,
                               bool minimize = true, VerifyOptions opt = {}) {
    if (xi.empty()) throw VerifyError("accident freedom over an empty state set");
    StateSet mishap = states_with_label(m, "mishap");
    StateSet safe;
    if (m.label_index("safe") >= 0) {
        safe = states_with_label(m, "safe");
    } else {
        StateSet in_xi(m.num_states(), 0);
        for (StateIndex s : xi) in_xi[s] = 1;
        safe.assign(m.num_states(), 0);
        for (StateIndex s = 0; s < m.num_states(); ++s)
            safe[s] = !in_xi[s] && !mishap[s];
    }
    StateSet not_mishap = detail::set_not(mishap);

    auto vals = prob_until(m, not_mishap, safe, !minimize ? true : false,
                           UntilMode::WeakUntil, {}, opt);
    Triple t;
    t.min = 2;
    t.max = -1;
    double sum = 0;
    for (StateIndex s : xi) {
        t.min = std::min(t.min, vals[s]);
        t.max = std::max(t.max, vals[s]);
        sum += vals[s];
    }
    t.mean = sum / static_cast<double>(xi.size());
    return t;
}

// ---- well-formedness battery ----

struct WellFormednessItem {
    std::string name;
    std::string formula;
    bool expect_true = true;
    bool actual = false;
    bool pass = false;
    std::vector<StateIndex> witness;
};

struct WellFormednessReport {
    std::vector<WellFormednessItem> items;
    bool pass = true;
};

// The five-property battery: hazards can occur, no early deadlock, hazards
// are not inevitable, no state is both final and initial, a cycle can finish.
inline WellFormednessReport check_wellformed(const Mdp& m, VerifyOptions opt = {}) {
    struct Spec {
        const char* name;
        const char* text;
        bool expect;
    };
    static const Spec specs[] = {
        {"hazard occurrence", "E [ F (\"hazard\" & !\"final\") ]", true},
        {"early deadlock", "E [ F (\"deadlock\" & !\"final\") ]", false},
        {"hazard inevitability", "A [ F \"hazard\" ]", false},
        {"final initial state", "E [ F (\"final\" & \"init\") ]", false},
        {"cycle completion", "E [ F \"final\" ]", true},
    };
    WellFormednessReport rep;
    for (auto& sp : specs) {
        WellFormednessItem item;
        item.name = sp.name;
        item.formula = sp.text;
        item.expect_true = sp.expect;
        auto res = check_qualitative(m, parse_formula(sp.text), opt);
        item.actual = res.holds;
        item.pass = item.actual == item.expect_true;
        item.witness = std::move(res.witness);
        rep.pass = rep.pass && item.pass;
        rep.items.push_back(std::move(item));
    }
    return rep;
}

// Single-choice MDP view of a chain, so all engines apply to both.
inline Mdp as_mdp(const Dtmc& d) {
    Mdp m;
    m.var_names = d.var_names;
    m.states = d.states;
    m.initial = d.initial;
    m.action_names = d.action_names;
    m.module_names = d.module_names;
    m.label_names = d.label_names;
    m.state_labels = d.state_labels;
    m.choices.resize(d.num_states());
    for (StateIndex s = 0; s < d.num_states(); ++s) {
        if (d.rows[s].empty()) continue;
        Choice c;
        c.action = d.chosen_action[s];
        c.owner = d.chosen_owner[s];
        c.dist = d.rows[s];
        m.choices[s].push_back(std::move(c));
    }
    return m;
}

} // namespace riskmc
