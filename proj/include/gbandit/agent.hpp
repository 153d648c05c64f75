#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gbandit/confidence.hpp"
#include "gbandit/problem.hpp"

namespace gbandit {

/// How the active set evolves at a phase boundary.
///   AOGB:   S_{j+1} = S_sticky U {O_j, M_j}
///   GosInE: insert O_j, then evict least-played non-sticky arms (never O_j)
///           until at most `gosine_cap` non-sticky arms remain.
enum class UpdateRule { AOGB, GosInE };

struct PolicyKind {
    UpdateRule rule = UpdateRule::AOGB;
    IndexKind index{};
    std::size_t gosine_cap = 2;

    friend bool operator==(const PolicyKind&, const PolicyKind&) = default;
};

inline bool set_contains(const ArmSet& s, Arm k) { return std::binary_search(s.begin(), s.end(), k); }

inline void set_insert(ArmSet& s, Arm k) {
    auto it = std::lower_bound(s.begin(), s.end(), k);
    if (it == s.end() || *it != k) s.insert(it, k);
}

struct AgentState {
    AgentId agent_id = 0;
    ArmSet sticky_set;
    ArmSet active_set;
    std::vector<std::uint64_t> total_pulls;
    std::vector<std::uint64_t> reward_sums;
    std::vector<std::uint64_t> phase_pulls;
    std::size_t phase_index = 1;

    AgentState() = default;

    AgentState(AgentId id, ArmSet sticky, std::size_t num_arms)
        : agent_id(id),
          sticky_set(std::move(sticky)),
          total_pulls(num_arms, 0),
          reward_sums(num_arms, 0),
          phase_pulls(num_arms, 0) {
        std::sort(sticky_set.begin(), sticky_set.end());
        sticky_set.erase(std::unique(sticky_set.begin(), sticky_set.end()), sticky_set.end());
        if (sticky_set.empty()) throw std::invalid_argument("AgentState: sticky set must be nonempty");
        if (sticky_set.back() >= num_arms) throw std::invalid_argument("AgentState: sticky arm out of range");
        active_set = sticky_set;
    }

    std::size_t num_arms() const noexcept { return total_pulls.size(); }

    double mean_estimate(Arm k) const {
        return total_pulls[k] == 0 ? 0.0
                                   : static_cast<double>(reward_sums[k]) / static_cast<double>(total_pulls[k]);
    }

    std::uint64_t steps() const {
        std::uint64_t s = 0;
        for (auto p : total_pulls) s += p;
        return s;
    }

    friend bool operator==(const AgentState&, const AgentState&) = default;
};

/// Argmax of the configured index over the active set given ln f_alpha(t).
/// Ties (including several unplayed arms at +inf) go to the lowest arm id.
inline Arm select_arm_given_log_f(const AgentState& s, double log_f, IndexVariant variant) {
    if (s.active_set.empty()) throw std::logic_error("select_arm: empty active set");
    Arm best = s.active_set.front();
    double best_val = -kInf;
    for (Arm k : s.active_set) {
        const auto pulls = s.total_pulls[k];
        double val = kInf;
        if (pulls > 0) {
            const double budget = log_f / static_cast<double>(pulls);
            val = variant == IndexVariant::KL ? kl_ucb_from_budget(s.mean_estimate(k), budget)
                                              : hoeffding_from_budget(s.mean_estimate(k), budget);
        }
        if (val > best_val) {
            best = k;
            best_val = val;
        }
    }
    return best;
}

/// Arm to play at time step t (indices use statistics up to t-1).
inline Arm select_arm(const AgentState& s, std::uint64_t t, const IndexKind& kind) {
    return select_arm_given_log_f(s, log_f_alpha(static_cast<double>(t), kind.alpha), kind.variant);
}

/// Returns the same arm as select_arm_given_log_f while usually skipping the
/// bisections. The previous winner a keeps a cached index value; a threshold v
/// is certified as v <= U_a with one KL evaluation, and every other arm b as
/// U_b < v - kSeparation. The separation is 10x the bisection tolerance, so
/// the bisection-based argmax picks a as well. When a check fails the arms are
/// compared exactly, bisecting only those that cannot be certified away.
class ArmSelector {
public:
    static constexpr double kSlack = 0.05;
    static constexpr double kSeparation = 1e-8;

    Arm select(const AgentState& s, double log_f, IndexVariant variant) {
        if (variant != IndexVariant::KL) return select_arm_given_log_f(s, log_f, variant);
        for (Arm k : s.active_set)
            if (s.total_pulls[k] == 0) return k;

        if (valid_ && set_contains(s.active_set, leader_) && certify(s, log_f)) return leader_;

        // Tournament: exact index for the incumbent, then only bisect arms that
        // cannot be certified strictly below the current best by kSeparation.
        Arm best = valid_ && set_contains(s.active_set, leader_) ? leader_ : s.active_set.front();
        double best_val = index_of(s, best, log_f);
        for (Arm b : s.active_set) {
            if (b == best) continue;
            if (below_by_margin(s, b, best_val, log_f)) continue;
            const double val = index_of(s, b, log_f);
            if (val > best_val || (val == best_val && b < best)) {
                best = b;
                best_val = val;
            }
        }
        leader_ = best;
        leader_index_ = best_val;
        leader_mean_ = s.mean_estimate(best);
        valid_ = true;
        return best;
    }

    void reset() noexcept { valid_ = false; }

private:
    bool certify(const AgentState& s, double log_f) const {
        const double v = leader_index_ - kSlack * (leader_index_ - leader_mean_);
        const double mu_a = s.mean_estimate(leader_);
        if (!(v <= mu_a || detail::kl_unchecked(mu_a, v) <= log_f / static_cast<double>(s.total_pulls[leader_])))
            return false;
        for (Arm b : s.active_set)
            if (b != leader_ && !below_by_margin(s, b, v, log_f)) return false;
        return true;
    }

    // True when U_b < v - kSeparation.
    static bool below_by_margin(const AgentState& s, Arm b, double v, double log_f) {
        const double w = v - kSeparation;
        const double mu_b = s.mean_estimate(b);
        return mu_b < w && detail::kl_unchecked(mu_b, w) > log_f / static_cast<double>(s.total_pulls[b]);
    }

    static double index_of(const AgentState& s, Arm k, double log_f) {
        return kl_ucb_from_budget(s.mean_estimate(k), log_f / static_cast<double>(s.total_pulls[k]));
    }

    Arm leader_ = 0;
    double leader_index_ = 0.0;
    double leader_mean_ = 0.0;
    bool valid_ = false;
};

inline void observe(AgentState& s, Arm arm, int reward) {
    ++s.total_pulls[arm];
    ++s.phase_pulls[arm];
    s.reward_sums[arm] += static_cast<std::uint64_t>(reward != 0);
}

/// M_j: most played arm of the current phase, lowest id on ties.
inline Arm most_played_in_phase(const AgentState& s) {
    Arm best = s.active_set.front();
    for (Arm k : s.active_set)
        if (s.phase_pulls[k] > s.phase_pulls[best]) best = k;
    return best;
}

/// Applies the end-of-phase rule with recommendation O, then opens the next phase.
/// Pull counts and reward sums of evicted arms are kept.
inline void end_phase_update(AgentState& s, Arm recommendation, const PolicyKind& policy) {
    if (recommendation >= s.num_arms()) throw std::invalid_argument("end_phase_update: recommendation out of range");

    if (policy.rule == UpdateRule::AOGB) {
        const Arm most_played = most_played_in_phase(s);
        ArmSet next = s.sticky_set;
        set_insert(next, recommendation);
        set_insert(next, most_played);
        s.active_set = std::move(next);
    } else {
        set_insert(s.active_set, recommendation);
        auto non_sticky = [&] {
            ArmSet out;
            for (Arm k : s.active_set)
                if (!set_contains(s.sticky_set, k)) out.push_back(k);
            return out;
        };
        for (ArmSet extra = non_sticky(); extra.size() > policy.gosine_cap; extra = non_sticky()) {
            Arm victim = s.num_arms();
            for (Arm k : extra) {
                if (k == recommendation) continue;
                if (victim == s.num_arms() || s.total_pulls[k] < s.total_pulls[victim]) victim = k;
            }
            if (victim == s.num_arms()) break;  // only O left and cap == 0
            s.active_set.erase(std::lower_bound(s.active_set.begin(), s.active_set.end(), victim));
        }
    }
    std::fill(s.phase_pulls.begin(), s.phase_pulls.end(), 0);
    ++s.phase_index;
}

}  // namespace gbandit
