#pragma once
/*
Upper-confidence indices for Bernoulli arms.

  KL(p, q)        = p ln(p/q) + (1-p) ln((1-p)/(1-q)),   0 ln(0/x) = 0
  f_alpha(t)      = 1 + t^alpha (ln t)^2
  budget          = ln f_alpha(t) / pulls
  KL-UCB index    = max { u in [0,1] : KL(mu_hat, u) <= budget }
  Hoeffding index = mu_hat + sqrt(budget / 2)           (not clamped)

Both indices are +inf for an arm that has never been played.
Natural logarithms throughout.
*/

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace gbandit {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class IndexVariant { KL, Hoeffding };

struct IndexKind {
    IndexVariant variant = IndexVariant::KL;
    double alpha = 1.0;

    IndexKind() = default;
    IndexKind(IndexVariant v, double a) : variant(v), alpha(a) {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw std::invalid_argument("IndexKind: alpha must be a positive finite number");
    }
    friend bool operator==(const IndexKind&, const IndexKind&) = default;
};

namespace detail {
inline void require_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument(std::string(what) + " must lie in [0,1]");
}

// Caller guarantees p, q in [0,1].
inline double kl_unchecked(double p, double q) noexcept {
    if (p == q) return 0.0;
    if (q <= 0.0 || q >= 1.0) return kInf;
    double out = 0.0;
    if (p > 0.0) out += p * std::log(p / q);
    if (p < 1.0) out += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    // Rounding can leave a tiny negative value when p ~ q.
    return out > 0.0 ? out : 0.0;
}
}  // namespace detail

/// Bernoulli KL divergence KL(Ber(p) || Ber(q)); +inf when q in {0,1} and p != q.
inline double kl_bernoulli(double p, double q) {
    detail::require_probability(p, "kl_bernoulli: p");
    detail::require_probability(q, "kl_bernoulli: q");
    return detail::kl_unchecked(p, q);
}

inline double f_alpha(double t, double alpha) {
    if (!(t >= 1.0)) throw std::invalid_argument("f_alpha: t must be >= 1");
    const double lt = std::log(t);
    return 1.0 + std::pow(t, alpha) * lt * lt;
}

/// ln f_alpha(t), the shared exploration budget numerator.
inline double log_f_alpha(double t, double alpha) { return std::log(f_alpha(t, alpha)); }

inline constexpr double kBisectionTolerance = 1e-9;
inline constexpr int kBisectionMaxIter = 100;

/// KL-UCB index from a precomputed budget ln f / pulls (pulls >= 1).
inline double kl_ucb_from_budget(double mu_hat, double budget) {
    if (mu_hat >= 1.0) return 1.0;
    double lo = mu_hat;
    double hi = 1.0;
    for (int it = 0; it < kBisectionMaxIter && hi - lo > kBisectionTolerance; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (detail::kl_unchecked(mu_hat, mid) <= budget)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

inline double kl_ucb_index(double mu_hat, std::uint64_t pulls, double t, double alpha) {
    detail::require_probability(mu_hat, "kl_ucb_index: mu_hat");
    if (!(t >= 1.0)) throw std::invalid_argument("kl_ucb_index: t must be >= 1");
    if (pulls == 0) return kInf;
    return kl_ucb_from_budget(mu_hat, log_f_alpha(t, alpha) / static_cast<double>(pulls));
}

inline double hoeffding_from_budget(double mu_hat, double budget) noexcept {
    return mu_hat + std::sqrt(budget / 2.0);
}

inline double hoeffding_index(double mu_hat, std::uint64_t pulls, double t, double alpha) {
    detail::require_probability(mu_hat, "hoeffding_index: mu_hat");
    if (!(t >= 1.0)) throw std::invalid_argument("hoeffding_index: t must be >= 1");
    if (pulls == 0) return kInf;
    return hoeffding_from_budget(mu_hat, log_f_alpha(t, alpha) / static_cast<double>(pulls));
}

inline double ucb_index(const IndexKind& kind, double mu_hat, std::uint64_t pulls, double t) {
    return kind.variant == IndexVariant::KL ? kl_ucb_index(mu_hat, pulls, t, kind.alpha)
                                            : hoeffding_index(mu_hat, pulls, t, kind.alpha);
}

}  // namespace gbandit
