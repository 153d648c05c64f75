#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbandit/agent.hpp"
#include "gbandit/confidence.hpp"
#include "gbandit/gossip.hpp"
#include "gbandit/problem.hpp"
#include "gbandit/rng.hpp"

namespace gbandit {

/// A_j = round(j^(theta+1)), A_0 = 0. Phase j covers time steps (A_{j-1}, A_j].
inline std::uint64_t phase_boundary(std::uint64_t j, double theta) {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw std::invalid_argument("phase_boundary: theta must be > 0");
    if (j == 0) return 0;
    return static_cast<std::uint64_t>(std::llround(std::pow(static_cast<double>(j), theta + 1.0)));
}

class PhaseSchedule {
public:
    explicit PhaseSchedule(double theta = 2.0) : theta_(theta) { phase_boundary(1, theta_); }

    double theta() const noexcept { return theta_; }
    std::uint64_t boundary(std::uint64_t j) const { return phase_boundary(j, theta_); }
    std::uint64_t length(std::uint64_t j) const { return boundary(j) - boundary(j - 1); }

    /// Number of phases that contain at least one step of [1, horizon].
    std::uint64_t phases_within(std::uint64_t horizon) const {
        std::uint64_t j = 0;
        while (boundary(j) < horizon) ++j;
        return j;
    }

    /// Smallest C >= 1 with C^-1 j^theta <= A_j - A_{j-1} <= C j^theta for j in [1, j_max].
    double growth_constant(std::uint64_t j_max) const {
        double c = 1.0;
        for (std::uint64_t j = 1; j <= j_max; ++j) {
            const double len = static_cast<double>(length(j));
            const double ref = std::pow(static_cast<double>(j), theta_);
            if (!(len > 0.0)) return kInf;
            c = std::max({c, len / ref, ref / len});
        }
        return c;
    }

    bool satisfies_growth_condition(double c, std::uint64_t j_max) const {
        if (!(c >= 1.0)) return false;
        for (std::uint64_t j = 1; j <= j_max; ++j) {
            const double len = static_cast<double>(length(j));
            const double ref = std::pow(static_cast<double>(j), theta_);
            if (len < ref / c || len > c * ref) return false;
        }
        return true;
    }

private:
    double theta_;
};

/// Contiguous near-equal blocks; the first K mod N agents get one extra arm.
inline std::vector<ArmSet> partition_sticky_sets(std::size_t num_arms, std::size_t num_agents) {
    if (num_agents == 0) throw std::invalid_argument("partition_sticky_sets: N must be >= 1");
    if (num_arms < num_agents) throw std::invalid_argument("partition_sticky_sets: K must be >= N");
    const std::size_t base = num_arms / num_agents;
    const std::size_t extra = num_arms % num_agents;
    std::vector<ArmSet> sets(num_agents);
    for (std::size_t n = 0; n < num_agents; ++n) {
        const std::size_t first = n * base + std::min(n, extra);
        const std::size_t size = base + (n < extra ? 1 : 0);
        for (std::size_t k = first; k < first + size; ++k) sets[n].push_back(k);
    }
    return sets;
}

/// Every ceil(T/1000) steps (or `stride`), plus T itself.
inline std::vector<std::uint64_t> default_sample_grid(std::uint64_t horizon, std::uint64_t stride = 0) {
    if (horizon < 1) throw std::invalid_argument("sample grid: horizon must be >= 1");
    if (stride == 0) stride = (horizon + 999) / 1000;
    std::vector<std::uint64_t> grid;
    for (std::uint64_t t = stride; t < horizon; t += stride) grid.push_back(t);
    grid.push_back(horizon);
    return grid;
}

using PhaseLog = std::vector<std::vector<ArmSet>>;  // [phase - 1][agent]

struct RunTrace {
    Arm best_arm = 0;
    std::vector<ArmSet> sticky_sets;
    std::vector<std::uint64_t> grid;
    std::vector<std::vector<double>> regret_grid;  // [agent][grid point], cumulative pseudo-regret
    std::vector<double> pseudo_regret_final;
    std::vector<double> realized_regret_final;
    std::vector<std::vector<std::uint64_t>> final_pulls;  // [agent][arm], V_k(T)
    PhaseLog active_set_log;
    std::vector<std::vector<Arm>> most_played_log;  // [boundary - 1][agent]
    std::vector<std::vector<Arm>> received_log;     // [boundary - 1][agent]
    std::optional<std::size_t> stabilization_phase;
    std::vector<std::optional<std::size_t>> first_spread_phase;

    std::size_t num_agents() const noexcept { return regret_grid.size(); }

    std::vector<double> node_average_curve() const {
        std::vector<double> avg(grid.size(), 0.0);
        for (const auto& row : regret_grid)
            for (std::size_t g = 0; g < grid.size(); ++g) avg[g] += row[g];
        for (double& v : avg) v /= static_cast<double>(regret_grid.size());
        return avg;
    }

    friend bool operator==(const RunTrace&, const RunTrace&) = default;
};

inline bool is_settled(const ArmSet& active, const ArmSet& sticky, Arm best) {
    ArmSet target = sticky;
    set_insert(target, best);
    return active == target;
}

/// Smallest j0 such that in every logged phase j > j0 each agent's active set
/// is its sticky set plus the best arm; nullopt if the last logged phase is unsettled.
inline std::optional<std::size_t> detect_stabilization(const PhaseLog& log, const std::vector<ArmSet>& sticky_sets,
                                                       Arm best_arm) {
    const std::size_t phases = log.size();
    std::size_t last_unsettled = 0;
    for (std::size_t j = 1; j <= phases; ++j) {
        const auto& sets = log[j - 1];
        for (std::size_t n = 0; n < sets.size(); ++n)
            if (!is_settled(sets[n], sticky_sets.at(n), best_arm)) {
                last_unsettled = j;
                break;
            }
    }
    if (phases == 0 || last_unsettled == phases) return std::nullopt;
    return last_unsettled;
}

/// First phase whose active set holds the best arm, per agent; 0 when it is
/// already there in phase 1 (the owner of the best arm).
inline std::vector<std::optional<std::size_t>> detect_first_spread(const PhaseLog& log, Arm best_arm) {
    const std::size_t agents = log.empty() ? 0 : log.front().size();
    std::vector<std::optional<std::size_t>> out(agents);
    for (std::size_t n = 0; n < agents; ++n)
        for (std::size_t j = 1; j <= log.size(); ++j)
            if (set_contains(log[j - 1][n], best_arm)) {
                out[n] = j == 1 ? 0 : j;
                break;
            }
    return out;
}

/// Checks the absorbing behaviour on a trace:
///  (a) whenever phase j is settled for all agents and every M_j and O_j is
///      the best arm, phase j+1 is settled as well;
///  (b) from the first such phase on, every later logged phase stays settled.
inline bool absorption_holds(const RunTrace& tr) {
    const auto all_settled = [&](std::size_t j) {
        const auto& sets = tr.active_set_log[j - 1];
        for (std::size_t n = 0; n < sets.size(); ++n)
            if (!is_settled(sets[n], tr.sticky_sets[n], tr.best_arm)) return false;
        return true;
    };
    const auto all_best = [&](std::size_t j) {
        for (std::size_t n = 0; n < tr.most_played_log[j - 1].size(); ++n)
            if (tr.most_played_log[j - 1][n] != tr.best_arm || tr.received_log[j - 1][n] != tr.best_arm)
                return false;
        return true;
    };
    std::optional<std::size_t> absorbed;
    for (std::size_t j = 1; j < tr.active_set_log.size() && j <= tr.most_played_log.size(); ++j) {
        if (all_settled(j) && all_best(j)) {
            if (!all_settled(j + 1)) return false;
            if (!absorbed) absorbed = j;
        }
    }
    if (absorbed)
        for (std::size_t j = *absorbed; j <= tr.active_set_log.size(); ++j)
            if (!all_settled(j)) return false;
    return true;
}

struct RunOptions {
    // Select arms with the full bisection argmax instead of ArmSelector.
    bool reference_selection = false;
};

/// Synchronous rounds t = 1..T. Every agent plays and observes; at t = A_j all
/// most-played arms are computed first, then every agent samples a neighbour,
/// receives its M_j and updates. The new active set governs t = A_j + 1 on.
inline RunTrace run_single(const ProblemInstance& inst, const GossipMatrix& P, const PolicyKind& policy,
                           const PhaseSchedule& schedule, std::uint64_t horizon, std::uint64_t run,
                           const RewardStream& stream, std::vector<std::uint64_t> grid, RunOptions opts = {}) {
    const std::size_t N = inst.num_agents();
    const std::size_t K = inst.num_arms();
    if (horizon < 1) throw std::invalid_argument("run_single: horizon must be >= 1");
    if (P.size() != N) throw std::invalid_argument("run_single: gossip matrix size differs from agent count");
    if (!is_strongly_connected(P)) throw std::invalid_argument("run_single: gossip graph is not strongly connected");
    if (stream.means() != inst.means()) throw std::invalid_argument("run_single: reward stream means differ");
    if (grid.empty()) grid = default_sample_grid(horizon);
    if (!std::is_sorted(grid.begin(), grid.end()) || grid.front() < 1 || grid.back() > horizon ||
        std::adjacent_find(grid.begin(), grid.end()) != grid.end())
        throw std::invalid_argument("run_single: sample grid must be strictly increasing within [1, T]");

    RunTrace tr;
    tr.best_arm = inst.best_arm();
    tr.sticky_sets = partition_sticky_sets(K, N);
    tr.grid = grid;
    tr.regret_grid.assign(N, std::vector<double>(grid.size(), 0.0));

    std::vector<AgentState> agents;
    std::vector<ArmSelector> selectors(N);
    std::vector<std::vector<std::uint64_t>> keys(N, std::vector<std::uint64_t>(K));
    agents.reserve(N);
    for (std::size_t n = 0; n < N; ++n) {
        agents.emplace_back(n, tr.sticky_sets[n], K);
        for (Arm k = 0; k < K; ++k) keys[n][k] = stream.key(run, n, k);
    }
    SplitMix64 gossip_rng = make_run_engine(stream.master_seed(), run, kGossipTag);

    const auto& means = inst.means();
    const auto& gaps = inst.gaps();
    std::vector<double> pseudo(N, 0.0);
    std::vector<std::uint64_t> collected(N, 0);
    std::vector<Arm> most_played(N), received(N);

    const auto log_active_sets = [&] {
        auto& row = tr.active_set_log.emplace_back();
        row.reserve(N);
        for (const auto& a : agents) row.push_back(a.active_set);
    };
    log_active_sets();

    std::uint64_t phase = 1;
    std::uint64_t next_boundary = schedule.boundary(phase);
    std::size_t g = 0;
    const IndexVariant variant = policy.index.variant;
    const double alpha = policy.index.alpha;

    for (std::uint64_t t = 1; t <= horizon; ++t) {
        const double log_f = log_f_alpha(static_cast<double>(t), alpha);
        for (std::size_t n = 0; n < N; ++n) {
            AgentState& a = agents[n];
            const Arm k = opts.reference_selection ? select_arm_given_log_f(a, log_f, variant)
                                                   : selectors[n].select(a, log_f, variant);
            const int r = RewardStream::draw(keys[n][k], a.total_pulls[k] + 1, means[k]);
            observe(a, k, r);
            pseudo[n] += gaps[k];
            collected[n] += static_cast<std::uint64_t>(r);
        }
        if (g < grid.size() && grid[g] == t) {
            for (std::size_t n = 0; n < N; ++n) tr.regret_grid[n][g] = pseudo[n];
            ++g;
        }
        if (t == next_boundary) {
            for (std::size_t n = 0; n < N; ++n) most_played[n] = most_played_in_phase(agents[n]);
            for (std::size_t n = 0; n < N; ++n)
                received[n] = most_played[N > 1 ? sample_neighbor(P, n, gossip_rng) : n];
            for (std::size_t n = 0; n < N; ++n) end_phase_update(agents[n], received[n], policy);
            tr.most_played_log.push_back(most_played);
            tr.received_log.push_back(received);
            ++phase;
            next_boundary = schedule.boundary(phase);
            if (t < horizon) log_active_sets();
        }
    }

    tr.pseudo_regret_final = pseudo;
    tr.realized_regret_final.resize(N);
    for (const auto& a : agents) tr.final_pulls.push_back(a.total_pulls);
    for (std::size_t n = 0; n < N; ++n)
        tr.realized_regret_final[n] =
            static_cast<double>(horizon) * inst.best_mean() - static_cast<double>(collected[n]);
    tr.stabilization_phase = detect_stabilization(tr.active_set_log, tr.sticky_sets, tr.best_arm);
    tr.first_spread_phase = detect_first_spread(tr.active_set_log, tr.best_arm);
    return tr;
}

}  // namespace gbandit
