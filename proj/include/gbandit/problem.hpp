#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gbandit/confidence.hpp"
#include "gbandit/rng.hpp"

namespace gbandit {

using Arm = std::size_t;
using AgentId = std::size_t;
using ArmSet = std::vector<Arm>;  // kept sorted, no duplicates

/// A K-armed Bernoulli bandit shared by N agents.
class ProblemInstance {
public:
    ProblemInstance(std::vector<double> means, std::size_t num_agents)
        : means_(std::move(means)), num_agents_(num_agents) {
        if (means_.size() < 2) throw std::invalid_argument("ProblemInstance: need at least 2 arms");
        if (num_agents_ < 1) throw std::invalid_argument("ProblemInstance: need at least 1 agent");
        if (means_.size() < num_agents_)
            throw std::invalid_argument("ProblemInstance: number of arms K must be >= number of agents N");
        for (double m : means_)
            if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("ProblemInstance: means must lie in [0,1]");

        best_arm_ = static_cast<Arm>(std::max_element(means_.begin(), means_.end()) - means_.begin());
        const double top = means_[best_arm_];
        if (std::count(means_.begin(), means_.end(), top) > 1)
            throw std::invalid_argument("ProblemInstance: best arm is not unique (tied maxima)");

        gaps_.reserve(means_.size());
        delta_min_ = std::numeric_limits<double>::infinity();
        for (Arm k = 0; k < means_.size(); ++k) {
            gaps_.push_back(top - means_[k]);
            if (k != best_arm_) delta_min_ = std::min(delta_min_, gaps_.back());
        }
    }

    std::size_t num_agents() const noexcept { return num_agents_; }
    std::size_t num_arms() const noexcept { return means_.size(); }
    const std::vector<double>& means() const noexcept { return means_; }
    const std::vector<double>& gaps() const noexcept { return gaps_; }
    double mean(Arm k) const { return means_.at(k); }
    double gap(Arm k) const { return gaps_.at(k); }
    Arm best_arm() const noexcept { return best_arm_; }
    double best_mean() const noexcept { return means_[best_arm_]; }
    double delta_min() const noexcept { return delta_min_; }

private:
    std::vector<double> means_;
    std::size_t num_agents_;
    Arm best_arm_ = 0;
    std::vector<double> gaps_;
    double delta_min_ = 0.0;
};

inline ProblemInstance build_instance(std::vector<double> means, std::size_t num_agents) {
    return ProblemInstance(std::move(means), num_agents);
}

/// [mu_star] followed by K-1 equally spaced means spanning the interval with
/// endpoints a and b (either order), sorted descending. With K-1 == 1 the only
/// suboptimal mean sits at the upper endpoint.
inline std::vector<double> uniform_grid_means(double mu_star, double a, double b, std::size_t num_arms) {
    if (num_arms < 2) throw std::invalid_argument("uniform_grid_means: K must be >= 2");
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    if (!(mu_star >= 0.0 && mu_star <= 1.0 && lo >= 0.0 && hi <= 1.0))
        throw std::invalid_argument("uniform_grid_means: values must lie in [0,1]");
    if (!(hi < mu_star)) throw std::invalid_argument("uniform_grid_means: interval top must be below mu_star");
    if (!(lo < hi) && num_arms > 2)
        throw std::invalid_argument("uniform_grid_means: interval endpoints must differ");

    std::vector<double> means{mu_star};
    const std::size_t m = num_arms - 1;
    if (m == 1) {
        means.push_back(hi);
        return means;
    }
    const double step = (hi - lo) / static_cast<double>(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) means.push_back(hi - static_cast<double>(i) * step);
    means.push_back(lo);
    return means;
}

/// Counter-based Bernoulli reward source. reward(run, n, k, s) is a pure
/// function of (seed, run, n, k, s), so every algorithm that pulls arm k for
/// the s-th time sees the same bit.
class RewardStream {
public:
    RewardStream(std::uint64_t master_seed, std::vector<double> means)
        : seed_(master_seed), means_(std::move(means)) {
        for (double m : means_)
            if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("RewardStream: means must lie in [0,1]");
    }

    std::uint64_t master_seed() const noexcept { return seed_; }
    const std::vector<double>& means() const noexcept { return means_; }

    /// Per-(run, agent, arm) key; draw(key, s, mu) finishes the evaluation.
    std::uint64_t key(std::uint64_t run, std::uint64_t agent, std::uint64_t arm) const noexcept {
        std::uint64_t h = hash_combine(mix64(seed_), kRewardTag);
        h = hash_combine(h, run);
        h = hash_combine(h, agent);
        return hash_combine(h, arm);
    }

    static double uniform(std::uint64_t key, std::uint64_t s) noexcept { return to_unit(hash_combine(key, s)); }

    static int draw(std::uint64_t key, std::uint64_t s, double mu) noexcept { return uniform(key, s) < mu ? 1 : 0; }

    /// s is the 1-based pull count of arm k by agent n.
    int reward(std::uint64_t run, AgentId n, Arm k, std::uint64_t s) const {
        if (s < 1) throw std::invalid_argument("RewardStream::reward: pull index s must be >= 1");
        return draw(key(run, n, k), s, means_.at(k));
    }

private:
    std::uint64_t seed_;
    std::vector<double> means_;
};

/// Sum over k != star of gap_k / KL(mu_k, mu_star) restricted to `arms`.
/// Arms with infinite KL contribute 0.
inline double agent_asymptotic_constant(const ProblemInstance& inst, std::span<const Arm> arms) {
    const double top = inst.best_mean();
    double total = 0.0;
    for (Arm k : arms) {
        if (k >= inst.num_arms()) throw std::invalid_argument("agent_asymptotic_constant: arm out of range");
        if (k == inst.best_arm()) continue;
        const double d = kl_bernoulli(inst.mean(k), top);
        if (std::isfinite(d)) total += inst.gap(k) / d;
    }
    return total;
}

/// Lai-Robbins constant over all suboptimal arms. Rejects instances where every
/// suboptimal arm has infinite KL (mu_star == 1), for which the bound is vacuous.
inline double lai_robbins_constant(const ProblemInstance& inst) {
    if (inst.best_mean() >= 1.0)
        throw std::invalid_argument("lai_robbins_constant: mu_star == 1 makes every KL term infinite");
    std::vector<Arm> all(inst.num_arms());
    for (Arm k = 0; k < all.size(); ++k) all[k] = k;
    return agent_asymptotic_constant(inst, all);
}

}  // namespace gbandit
