#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbandit/problem.hpp"
#include "gbandit/rng.hpp"

namespace gbandit {

inline constexpr double kRowSumTolerance = 1e-12;

/// Row-stochastic N x N matrix; P(n, q) is the probability that agent n
/// receives its end-of-phase recommendation from agent q.
/// Invariants: entries in [0,1], rows sum to 1, zero diagonal. The single-agent
/// matrix [[1]] is the one exception to the zero diagonal.
class GossipMatrix {
public:
    explicit GossipMatrix(std::vector<std::vector<double>> rows) : n_(rows.size()) {
        if (n_ == 0) throw std::invalid_argument("GossipMatrix: empty matrix");
        data_.reserve(n_ * n_);
        for (std::size_t i = 0; i < n_; ++i) {
            if (rows[i].size() != n_)
                throw std::invalid_argument("GossipMatrix: row " + std::to_string(i) + " has wrong length");
            double sum = 0.0;
            for (std::size_t j = 0; j < n_; ++j) {
                const double p = rows[i][j];
                if (!(p >= 0.0 && p <= 1.0))
                    throw std::invalid_argument("GossipMatrix: entry (" + std::to_string(i) + "," +
                                                std::to_string(j) + ") outside [0,1]");
                sum += p;
                data_.push_back(p);
            }
            if (std::abs(sum - 1.0) > kRowSumTolerance)
                throw std::invalid_argument("GossipMatrix: row " + std::to_string(i) + " does not sum to 1");
            if (n_ > 1 && rows[i][i] != 0.0)
                throw std::invalid_argument("GossipMatrix: diagonal entry " + std::to_string(i) + " must be 0");
        }
    }

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }

private:
    std::size_t n_;
    std::vector<double> data_;
};

inline GossipMatrix singleton_matrix() { return GossipMatrix(std::vector<std::vector<double>>{{1.0}}); }

inline GossipMatrix complete_graph(std::size_t n) {
    if (n < 2) throw std::invalid_argument("complete_graph: N must be >= 2");
    const double p = 1.0 / static_cast<double>(n - 1);
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, p));
    for (std::size_t i = 0; i < n; ++i) rows[i][i] = 0.0;
    return GossipMatrix(std::move(rows));
}

inline GossipMatrix cycle_graph(std::size_t n) {
    if (n < 3) throw std::invalid_argument("cycle_graph: N must be >= 3");
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        rows[i][(i + 1) % n] += 0.5;
        rows[i][(i + n - 1) % n] += 0.5;
    }
    return GossipMatrix(std::move(rows));
}

/// Leaves always ask the center; the center asks a uniformly random leaf.
inline GossipMatrix star_graph(std::size_t n, std::size_t center = 0) {
    if (n < 3) throw std::invalid_argument("star_graph: N must be >= 3");
    if (center >= n) throw std::invalid_argument("star_graph: center out of range");
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
    const double p = 1.0 / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        if (i == center) {
            for (std::size_t j = 0; j < n; ++j)
                if (j != center) rows[i][j] = p;
        } else {
            rows[i][center] = 1.0;
        }
    }
    return GossipMatrix(std::move(rows));
}

/// Dense CSV, one row per line, comma separated. Blank lines and lines
/// starting with '#' are skipped.
inline GossipMatrix parse_matrix_csv(std::istream& in, const std::string& origin = "<stream>") {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#')
            continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    try {
        return GossipMatrix(std::move(rows));
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(origin + ": " + e.what());
    }
}

inline GossipMatrix load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open gossip matrix file '" + path + "'");
    return parse_matrix_csv(in, path);
}

/// "complete" | "cycle" | "star", anything else is treated as a CSV path.
inline GossipMatrix make_topology(const std::string& name, std::size_t n, std::size_t star_center = 0) {
    if (n == 1) return singleton_matrix();
    if (name == "complete") return complete_graph(n);
    if (name == "cycle") return cycle_graph(n);
    if (name == "star") return star_graph(n, star_center);
    GossipMatrix m = load_matrix_csv(name);
    if (m.size() != n)
        throw std::invalid_argument("gossip matrix '" + name + "' has size " + std::to_string(m.size()) +
                                    ", expected " + std::to_string(n));
    return m;
}

/// Draws q ~ P(n, .) and advances rng by exactly one step.
inline AgentId sample_neighbor(const GossipMatrix& P, AgentId n, SplitMix64& rng) {
    const double u = rng.uniform();
    const auto row = P.row(n);
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t q = 0; q < row.size(); ++q) {
        if (row[q] <= 0.0) continue;
        acc += row[q];
        last_positive = q;
        if (u < acc) return q;
    }
    return last_positive;  // u landed in the rounding slack at the end of the row
}

namespace detail {
inline std::vector<std::size_t> bfs_distances(const GossipMatrix& P, std::size_t src, bool reversed) {
    constexpr auto unreached = std::numeric_limits<std::size_t>::max();
    const std::size_t n = P.size();
    std::vector<std::size_t> dist(n, unreached);
    std::queue<std::size_t> frontier;
    dist[src] = 0;
    frontier.push(src);
    while (!frontier.empty()) {
        const std::size_t u = frontier.front();
        frontier.pop();
        for (std::size_t v = 0; v < n; ++v) {
            const double w = reversed ? P(v, u) : P(u, v);
            if (w > 0.0 && dist[v] == unreached) {
                dist[v] = dist[u] + 1;
                frontier.push(v);
            }
        }
    }
    return dist;
}
}  // namespace detail

/// Edge n -> q whenever P(n, q) > 0.
inline bool is_strongly_connected(const GossipMatrix& P) {
    constexpr auto unreached = std::numeric_limits<std::size_t>::max();
    for (bool rev : {false, true})
        for (std::size_t d : detail::bfs_distances(P, 0, rev))
            if (d == unreached) return false;
    return true;
}

/// Largest shortest-path length over ordered pairs of distinct agents.
inline std::size_t diameter(const GossipMatrix& P) {
    constexpr auto unreached = std::numeric_limits<std::size_t>::max();
    std::size_t worst = 0;
    for (std::size_t s = 0; s < P.size(); ++s)
        for (std::size_t d : detail::bfs_distances(P, s, false)) {
            if (d == unreached) throw std::invalid_argument("diameter: gossip graph is not strongly connected");
            worst = std::max(worst, d);
        }
    return worst;
}

inline double p_min(const GossipMatrix& P) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < P.size(); ++i)
        for (double p : P.row(i))
            if (p > 0.0 && p < best) best = p;
    return best;
}

}  // namespace gbandit
