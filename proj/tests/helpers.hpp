// Shared test fixtures: file loading, hand-built MDPs, a random-model
// generator, and the exact policy-enumeration oracle used to cross-check the
// value-iteration engines.
#pragma once

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "riskmc/mdp.hpp"
#include "riskmc/validate.hpp"

namespace testutil {

using namespace riskmc;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

inline std::string models_dir() {
#ifdef RISKMC_MODELS_DIR
    return RISKMC_MODELS_DIR;
#else
    return "models";
#endif
}

inline RiskModel load_cell() {
    return parse_risk_model(read_file(models_dir() + "/cell.riskm"));
}

// ---- hand-built MDPs ----

struct MdpSketch {
    Mdp m;

    explicit MdpSketch(size_t n, const std::vector<std::string>& labels = {}) {
        m.var_names = {"s"};
        for (size_t i = 0; i < n; ++i) m.states.push_back({static_cast<Value>(i)});
        m.choices.resize(n);
        m.label_names = labels;
        m.state_labels.assign(n, std::vector<uint64_t>(labels.empty() ? 0 : 1, 0));
        m.module_names = {"m"};
    }
    void label(StateIndex s, const std::string& name) {
        int li = m.label_index(name);
        m.state_labels[s][0] |= uint64_t(1) << li;
    }
    // adds a choice; dist pairs must sum to 1
    void choice(StateIndex s, const std::string& action,
                std::vector<std::pair<StateIndex, double>> dist) {
        Choice c;
        int ai = m.action_index(action);
        if (ai < 0) {
            ai = static_cast<int>(m.action_names.size());
            m.action_names.push_back(action);
        }
        c.action = ai;
        c.owner = 0;
        c.dist = std::move(dist);
        m.choices[s].push_back(std::move(c));
    }
};

// ---- random MDP corpus ----

struct RandomMdpParams {
    int min_states = 2, max_states = 7;
    int max_actions = 3;
    uint64_t max_policies = 30000;
};

// Random MDP with a "goal" label; distributions use one or two branches with
// coarse probabilities so the exact oracle stays well-conditioned.
inline Mdp random_mdp(std::mt19937_64& rng, const RandomMdpParams& prm = {}) {
    while (true) {
        std::uniform_int_distribution<int> nstates(prm.min_states, prm.max_states);
        int n = nstates(rng);
        MdpSketch sk(static_cast<size_t>(n), {"goal", "phi"});
        std::uniform_int_distribution<int> nact(1, prm.max_actions);
        std::uniform_int_distribution<int> state(0, n - 1);
        std::uniform_int_distribution<int> coin(0, 9);
        uint64_t policies = 1;
        for (int s = 0; s < n; ++s) {
            int k = nact(rng);
            policies *= static_cast<uint64_t>(k);
            for (int a = 0; a < k; ++a) {
                StateIndex t1 = static_cast<StateIndex>(state(rng));
                if (coin(rng) < 4) {
                    sk.choice(static_cast<StateIndex>(s), "a" + std::to_string(a),
                              {{t1, 1.0}});
                } else {
                    StateIndex t2 = static_cast<StateIndex>(state(rng));
                    double p = 0.1 * (1 + coin(rng) % 8);
                    if (t1 == t2) {
                        sk.choice(static_cast<StateIndex>(s), "a" + std::to_string(a),
                                  {{t1, 1.0}});
                    } else {
                        sk.choice(static_cast<StateIndex>(s), "a" + std::to_string(a),
                                  {{t1, p}, {t2, 1.0 - p}});
                    }
                }
            }
        }
        if (policies > prm.max_policies) continue;
        for (int s = 0; s < n; ++s) {
            if (coin(rng) < 3) sk.label(static_cast<StateIndex>(s), "goal");
            if (coin(rng) < 6) sk.label(static_cast<StateIndex>(s), "phi");
        }
        return sk.m;
    }
}

// ---- exact chain analysis (the oracle route) ----

// Gaussian elimination with partial pivoting; a is n x (n+1).
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a) {
    size_t n = a.size();
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        if (std::abs(a[col][col]) < 1e-13) throw std::runtime_error("singular");
        for (size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = a[r][col] / a[col][col];
            if (f == 0) continue;
            for (size_t cc = col; cc <= n; ++cc) a[r][cc] -= f * a[col][cc];
        }
    }
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i) x[i] = a[i][n] / a[i][i];
    return x;
}

// Exact P[phi U psi] per state of the chain induced by a fixed policy.
// Deadlocks follow the absorbing self-loop convention.
inline std::vector<double> chain_until(const Mdp& m, const std::vector<int>& policy,
                                       const std::vector<char>& phi,
                                       const std::vector<char>& psi) {
    size_t n = m.num_states();
    auto row = [&](StateIndex s) {
        static std::vector<std::pair<StateIndex, double>> self;
        if (m.choices[s].empty()) {
            self = {{s, 1.0}};
            return std::cref(self);
        }
        return std::cref(m.choices[s][policy[s]].dist);
    };
    // graph prob-0: no path to psi through phi
    std::vector<char> can(n, 0);
    for (size_t s = 0; s < n; ++s) can[s] = psi[s];
    bool grown = true;
    while (grown) {
        grown = false;
        for (size_t s = 0; s < n; ++s) {
            if (can[s] || !phi[s]) continue;
            for (auto& [t, p] : row(static_cast<StateIndex>(s)).get())
                if (can[t]) {
                    can[s] = 1;
                    grown = true;
                    break;
                }
        }
    }
    // unknowns: phi & !psi & can
    std::vector<int> id(n, -1);
    std::vector<StateIndex> open;
    for (size_t s = 0; s < n; ++s)
        if (phi[s] && !psi[s] && can[s]) {
            id[s] = static_cast<int>(open.size());
            open.push_back(static_cast<StateIndex>(s));
        }
    std::vector<double> x(n, 0.0);
    for (size_t s = 0; s < n; ++s)
        if (psi[s]) x[s] = 1.0;
    if (!open.empty()) {
        std::vector<std::vector<double>> a(open.size(),
                                           std::vector<double>(open.size() + 1, 0.0));
        for (size_t i = 0; i < open.size(); ++i) {
            a[i][i] = 1.0;
            for (auto& [t, p] : row(open[i]).get()) {
                if (psi[t]) a[i][open.size()] += p;
                else if (id[t] >= 0) a[i][id[t]] -= p;
            }
        }
        auto sol = solve_dense(std::move(a));
        for (size_t i = 0; i < open.size(); ++i) x[open[i]] = sol[i];
    }
    return x;
}

inline std::vector<double> chain_weak_until(const Mdp& m, const std::vector<int>& policy,
                                            const std::vector<char>& phi,
                                            const std::vector<char>& psi) {
    // phi W psi == 1 - [ (phi&!psi) U (!phi&!psi) ] on a chain
    size_t n = m.num_states();
    std::vector<char> alpha(n), beta(n);
    for (size_t s = 0; s < n; ++s) {
        alpha[s] = phi[s] && !psi[s];
        beta[s] = !phi[s] && !psi[s];
    }
    auto bad = chain_until(m, policy, alpha, beta);
    std::vector<double> x(n);
    for (size_t s = 0; s < n; ++s) x[s] = 1.0 - bad[s];
    return x;
}

// Enumerates every deterministic memoryless policy and keeps the best value
// at each state. Exact linear solves per policy.
struct EnumeratedOptimum {
    std::vector<double> vmax, vmin;
};

template <class ChainValue>
inline EnumeratedOptimum enumerate_policies(const Mdp& m, ChainValue value_of) {
    size_t n = m.num_states();
    EnumeratedOptimum out;
    out.vmax.assign(n, -1.0);
    out.vmin.assign(n, 2.0);
    std::vector<int> pol(n, 0);
    while (true) {
        auto vals = value_of(pol);
        for (size_t s = 0; s < n; ++s) {
            out.vmax[s] = std::max(out.vmax[s], vals[s]);
            out.vmin[s] = std::min(out.vmin[s], vals[s]);
        }
        size_t i = 0;
        for (; i < n; ++i) {
            size_t k = std::max<size_t>(1, m.choices[i].size());
            if (++pol[i] < static_cast<int>(k)) break;
            pol[i] = 0;
        }
        if (i == n) break;
    }
    return out;
}

inline std::vector<char> label_set(const Mdp& m, const std::string& name) {
    std::vector<char> r(m.num_states(), 0);
    int li = m.label_index(name);
    for (StateIndex s = 0; s < m.num_states(); ++s)
        if (m.has_label(s, li)) r[s] = 1;
    return r;
}

} // namespace testutil
