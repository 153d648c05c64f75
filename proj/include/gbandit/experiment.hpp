#pragma once
/*
Experiment harness.

A config is a flat `key = value` document ('#' starts a comment, lists are
comma separated). Unknown or repeated keys are errors. Each subcommand expands
the config into series (sweep point x algorithm), runs R Monte Carlo runs per
series over one shared RewardStream, and writes

  trace.csv     algorithm,alpha,sweep_value,run,t,node_avg_regret
  summary.csv   algorithm,alpha,sweep_value,t,mean_regret,ci_half_width
  constants.csv quantity,agent,value          (run / constants only)

Floating-point values use 17 significant digits so they round-trip exactly.
*/

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "gbandit/agent.hpp"
#include "gbandit/gossip.hpp"
#include "gbandit/problem.hpp"
#include "gbandit/simulator.hpp"

namespace gbandit {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class ExperimentMode { Run, SweepAlpha, SweepDelta, SweepTopology };

struct AlgorithmSpec {
    std::string label;  // e.g. "aogb-kl"
    UpdateRule rule = UpdateRule::AOGB;
    IndexVariant variant = IndexVariant::KL;
};

inline AlgorithmSpec parse_algorithm(const std::string& name) {
    static const std::map<std::string, std::pair<UpdateRule, IndexVariant>> known{
        {"aogb-kl", {UpdateRule::AOGB, IndexVariant::KL}},
        {"aogb-hoeffding", {UpdateRule::AOGB, IndexVariant::Hoeffding}},
        {"gosine-kl", {UpdateRule::GosInE, IndexVariant::KL}},
        {"gosine-hoeffding", {UpdateRule::GosInE, IndexVariant::Hoeffding}},
    };
    const auto it = known.find(name);
    if (it == known.end())
        throw ConfigError("unknown algorithm '" + name +
                          "' (expected aogb-kl, aogb-hoeffding, gosine-kl or gosine-hoeffding)");
    return {name, it->second.first, it->second.second};
}

/// Defaults are the synthetic benchmark setup: mu_star = 0.9, the other
/// arms spread over [0.2, 0.8], A_j = j^3, T = 1e5, R = 100.
struct ExperimentConfig {
    std::size_t num_agents = 20;
    std::size_t num_arms = 50;
    double mu_star = 0.9;
    double grid_lo = 0.2;
    double grid_hi = 0.8;
    std::vector<double> means;  // explicit means override the grid
    std::vector<double> delta_min_values{0.05, 0.1, 0.2};
    double alpha = 1.0;
    std::vector<double> alpha_values{0.5, 1.0, 2.0};
    std::vector<AlgorithmSpec> algorithms{parse_algorithm("aogb-kl"), parse_algorithm("gosine-kl"),
                                          parse_algorithm("aogb-hoeffding"), parse_algorithm("gosine-hoeffding")};
    std::string topology = "complete";
    std::vector<std::string> topologies{"complete", "cycle", "star"};
    std::size_t star_center = 0;
    double theta = 2.0;
    std::uint64_t horizon = 100000;
    std::size_t runs = 100;
    std::uint64_t seed = 1;
    std::string out = "out";
    std::uint64_t grid_stride = 0;  // 0: ceil(T/1000)
    std::size_t gosine_cap = 2;

    std::vector<double> base_means() const {
        if (!means.empty()) return means;
        return uniform_grid_means(mu_star, grid_lo, grid_hi, num_arms);
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_real(const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + v + "'");
    }
    if (used != v.size() || !std::isfinite(x)) throw ConfigError("expected a number, got '" + v + "'");
    return x;
}

inline std::uint64_t parse_uint(const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("expected a non-negative integer, got '" + v + "'");
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw ConfigError("integer out of range: '" + v + "'");
    }
}

inline std::vector<double> parse_reals(const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(parse_real(item));
    if (out.empty()) throw ConfigError("expected a non-empty list");
    return out;
}

}  // namespace detail

/// Parses `key = value` lines into a config on top of the defaults.
inline ExperimentConfig parse_config(std::istream& in, const std::string& origin = "<config>") {
    using namespace detail;
    ExperimentConfig cfg;
    std::set<std::string> seen;
    const std::map<std::string, std::function<void(const std::string&)>> setters{
        {"num_agents", [&](const std::string& v) { cfg.num_agents = parse_uint(v); }},
        {"num_arms", [&](const std::string& v) { cfg.num_arms = parse_uint(v); }},
        {"mu_star", [&](const std::string& v) { cfg.mu_star = parse_real(v); }},
        {"grid_lo", [&](const std::string& v) { cfg.grid_lo = parse_real(v); }},
        {"grid_hi", [&](const std::string& v) { cfg.grid_hi = parse_real(v); }},
        {"means", [&](const std::string& v) { cfg.means = parse_reals(v); }},
        {"delta_min_values", [&](const std::string& v) { cfg.delta_min_values = parse_reals(v); }},
        {"alpha", [&](const std::string& v) { cfg.alpha = parse_real(v); }},
        {"alpha_values", [&](const std::string& v) { cfg.alpha_values = parse_reals(v); }},
        {"algorithms",
         [&](const std::string& v) {
             cfg.algorithms.clear();
             for (const auto& a : split_list(v)) cfg.algorithms.push_back(parse_algorithm(a));
             if (cfg.algorithms.empty()) throw ConfigError("expected a non-empty list");
         }},
        {"topology", [&](const std::string& v) { cfg.topology = v; }},
        {"topologies",
         [&](const std::string& v) {
             cfg.topologies = split_list(v);
             if (cfg.topologies.empty()) throw ConfigError("expected a non-empty list");
         }},
        {"star_center", [&](const std::string& v) { cfg.star_center = parse_uint(v); }},
        {"theta", [&](const std::string& v) { cfg.theta = parse_real(v); }},
        {"horizon", [&](const std::string& v) { cfg.horizon = parse_uint(v); }},
        {"runs", [&](const std::string& v) { cfg.runs = parse_uint(v); }},
        {"seed", [&](const std::string& v) { cfg.seed = parse_uint(v); }},
        {"out", [&](const std::string& v) { cfg.out = v; }},
        {"grid_stride", [&](const std::string& v) { cfg.grid_stride = parse_uint(v); }},
        {"gosine_cap", [&](const std::string& v) { cfg.gosine_cap = parse_uint(v); }},
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto where = origin + ":" + std::to_string(line_no) + ": ";
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError(where + "unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
        try {
            it->second(value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(where + "field '" + key + "': " + e.what());
        }
    }
    if (seen.count("means") && !seen.count("num_arms")) cfg.num_arms = cfg.means.size();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in, path);
}

/// Field-level checks shared by every subcommand.
inline void validate_config(const ExperimentConfig& c, ExperimentMode mode) {
    const auto fail = [](const std::string& field, const std::string& msg) {
        throw ConfigError("field '" + field + "': " + msg);
    };
    if (c.num_agents < 1) fail("num_agents", "must be >= 1");
    if (c.num_arms < 2) fail("num_arms", "must be >= 2");
    if (c.num_arms < c.num_agents) fail("num_arms", "must be >= num_agents");
    if (!c.means.empty() && c.means.size() != c.num_arms) fail("means", "length differs from num_arms");
    if (!(c.mu_star >= 0.0 && c.mu_star <= 1.0)) fail("mu_star", "must lie in [0,1]");
    if (c.runs < 1) fail("runs", "must be >= 1");
    if (c.horizon < 1) fail("horizon", "must be >= 1");
    if (!(c.theta > 0.0)) fail("theta", "must be > 0");
    if (!(c.alpha > 0.0)) fail("alpha", "must be > 0");
    for (double a : c.alpha_values)
        if (!(a > 0.0)) fail("alpha_values", "all values must be > 0");
    if (c.algorithms.empty()) fail("algorithms", "must not be empty");
    if (c.star_center >= c.num_agents) fail("star_center", "must be < num_agents");
    if (mode == ExperimentMode::SweepDelta) {
        if (!c.means.empty()) fail("means", "cannot be combined with sweep-delta");
        for (double d : c.delta_min_values)
            if (!(d > 0.0 && c.mu_star - d > c.grid_lo)) fail("delta_min_values", "need 0 < d < mu_star - grid_lo");
    }
    try {
        if (mode != ExperimentMode::SweepDelta) build_instance(c.base_means(), c.num_agents);
        if (mode == ExperimentMode::SweepTopology) {
            for (const auto& t : c.topologies) make_topology(t, c.num_agents, c.star_center);
        } else {
            make_topology(c.topology, c.num_agents, c.star_center);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

inline std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct SeriesSpec {
    std::string algorithm;
    double alpha = 1.0;
    std::string sweep_value;
    PolicyKind policy;
    std::vector<double> means;
    std::string topology;
};

inline std::vector<SeriesSpec> plan_series(const ExperimentConfig& c, ExperimentMode mode) {
    std::vector<SeriesSpec> out;
    const auto add = [&](const AlgorithmSpec& a, double alpha, std::string sweep, std::vector<double> means,
                         const std::string& topo) {
        PolicyKind policy{a.rule, IndexKind(a.variant, alpha), c.gosine_cap};
        out.push_back({a.label, alpha, std::move(sweep), policy, std::move(means), topo});
    };
    switch (mode) {
        case ExperimentMode::Run:
            for (const auto& a : c.algorithms) add(a, c.alpha, "none", c.base_means(), c.topology);
            break;
        case ExperimentMode::SweepAlpha:
            for (double alpha : c.alpha_values)
                for (const auto& a : c.algorithms) add(a, alpha, format_real(alpha), c.base_means(), c.topology);
            break;
        case ExperimentMode::SweepDelta:
            for (double d : c.delta_min_values) {
                const auto means = uniform_grid_means(c.mu_star, c.mu_star - d, c.grid_lo, c.num_arms);
                for (const auto& a : c.algorithms) add(a, c.alpha, format_real(d), means, c.topology);
            }
            break;
        case ExperimentMode::SweepTopology:
            for (const auto& topo : c.topologies)
                for (const auto& a : c.algorithms) add(a, c.alpha, topo, c.base_means(), topo);
            break;
    }
    return out;
}

/// Runs fn(i) for i in [0, count) on `workers` threads. Results must be
/// written to slot i by fn, so the outcome does not depend on scheduling.
/// The exception of the lowest failing index is rethrown.
inline void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::optional<std::size_t> err_index;
    std::exception_ptr err;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!err_index || i < *err_index) {
                        err_index = i;
                        err = std::current_exception();
                    }
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

struct CurveSummary {
    std::vector<double> mean;
    std::vector<double> ci_half_width;
};

/// Mean over runs and 1.96 * sample sd / sqrt(R) at each grid point; R = 1 gives 0.
inline CurveSummary summarize(const std::vector<std::vector<double>>& curves) {
    if (curves.empty()) throw std::invalid_argument("summarize: need at least one run");
    const std::size_t g = curves.front().size();
    const double r = static_cast<double>(curves.size());
    CurveSummary s{std::vector<double>(g, 0.0), std::vector<double>(g, 0.0)};
    for (std::size_t i = 0; i < g; ++i) {
        double sum = 0.0;
        for (const auto& c : curves) sum += c.at(i);
        const double m = sum / r;
        double ss = 0.0;
        for (const auto& c : curves) ss += (c[i] - m) * (c[i] - m);
        s.mean[i] = m;
        s.ci_half_width[i] = curves.size() > 1 ? 1.96 * std::sqrt(ss / (r - 1.0)) / std::sqrt(r) : 0.0;
    }
    return s;
}

struct SummaryRecord {
    std::string algorithm;
    double alpha = 1.0;
    std::string sweep_value;
    std::uint64_t t = 0;
    double mean_regret = 0.0;
    double ci_half_width = 0.0;
};

struct SeriesResult {
    SeriesSpec spec;
    std::vector<std::uint64_t> grid;
    std::vector<RunTrace> traces;  // indexed by run id

    std::vector<std::vector<double>> curves() const {
        std::vector<std::vector<double>> out;
        out.reserve(traces.size());
        for (const auto& tr : traces) out.push_back(tr.node_average_curve());
        return out;
    }
};

/// All R runs of every series. Run r of every series uses run id r of the same
/// RewardStream, so algorithms see identical reward sequences.
inline std::vector<SeriesResult> simulate(const ExperimentConfig& c, ExperimentMode mode, std::size_t workers) {
    validate_config(c, mode);
    const auto specs = plan_series(c, mode);
    const auto grid = default_sample_grid(c.horizon, c.grid_stride);
    const PhaseSchedule schedule(c.theta);

    struct Prepared {
        ProblemInstance inst;
        GossipMatrix P;
        RewardStream stream;
    };
    std::vector<Prepared> prepared;
    std::vector<SeriesResult> results;
    for (const auto& s : specs) {
        prepared.push_back({build_instance(s.means, c.num_agents), make_topology(s.topology, c.num_agents, c.star_center),
                            RewardStream(c.seed, s.means)});
        results.push_back({s, grid, std::vector<RunTrace>(c.runs)});
    }
    parallel_for(specs.size() * c.runs, workers, [&](std::size_t i) {
        const std::size_t si = i / c.runs;
        const std::size_t run = i % c.runs;
        const auto& p = prepared[si];
        results[si].traces[run] =
            run_single(p.inst, p.P, specs[si].policy, schedule, c.horizon, run, p.stream, grid);
    });
    return results;
}

inline void write_trace_csv(std::ostream& os, const std::vector<SeriesResult>& results) {
    os << "algorithm,alpha,sweep_value,run,t,node_avg_regret\n";
    for (const auto& sr : results)
        for (std::size_t run = 0; run < sr.traces.size(); ++run) {
            const auto curve = sr.traces[run].node_average_curve();
            for (std::size_t g = 0; g < sr.grid.size(); ++g)
                os << sr.spec.algorithm << ',' << format_real(sr.spec.alpha) << ',' << sr.spec.sweep_value << ','
                   << run << ',' << sr.grid[g] << ',' << format_real(curve[g]) << '\n';
        }
}

inline std::vector<SummaryRecord> summary_records(const std::vector<SeriesResult>& results) {
    std::vector<SummaryRecord> out;
    for (const auto& sr : results) {
        const auto s = summarize(sr.curves());
        for (std::size_t g = 0; g < sr.grid.size(); ++g)
            out.push_back({sr.spec.algorithm, sr.spec.alpha, sr.spec.sweep_value, sr.grid[g], s.mean[g],
                           s.ci_half_width[g]});
    }
    return out;
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRecord>& records) {
    os << "algorithm,alpha,sweep_value,t,mean_regret,ci_half_width\n";
    for (const auto& r : records)
        os << r.algorithm << ',' << format_real(r.alpha) << ',' << r.sweep_value << ',' << r.t << ','
           << format_real(r.mean_regret) << ',' << format_real(r.ci_half_width) << '\n';
}

/// Lai-Robbins constant, per-agent asymptotic constants for the sticky
/// partition, and their sum.
inline void write_constants_csv(std::ostream& os, const ProblemInstance& inst) {
    const auto sticky = partition_sticky_sets(inst.num_arms(), inst.num_agents());
    os << "quantity,agent,value\n";
    os << "lai_robbins,all," << format_real(lai_robbins_constant(inst)) << '\n';
    double total = 0.0;
    for (std::size_t n = 0; n < sticky.size(); ++n) {
        const double v = agent_asymptotic_constant(inst, sticky[n]);
        total += v;
        os << "agent_constant," << n << ',' << format_real(v) << '\n';
    }
    os << "agent_constant_sum,all," << format_real(total) << '\n';
}

namespace detail {
/// Files are written under a temporary name and renamed on commit; anything
/// not committed is removed when the guard dies.
class OutputFiles {
public:
    explicit OutputFiles(std::filesystem::path dir) : dir_(std::move(dir)) {}
    OutputFiles(const OutputFiles&) = delete;
    OutputFiles& operator=(const OutputFiles&) = delete;
    ~OutputFiles() {
        std::error_code ec;
        for (const auto& p : pending_) std::filesystem::remove(p.first, ec);
    }

    void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
        std::filesystem::create_directories(dir_);
        const auto final_path = dir_ / name;
        auto tmp = final_path;
        tmp += ".partial";
        pending_.emplace_back(tmp, final_path);
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        body(os);
        os.flush();
        if (!os) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }

    void commit() {
        for (const auto& [tmp, dst] : pending_) std::filesystem::rename(tmp, dst);
        pending_.clear();
    }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pending_;
};
}  // namespace detail

/// Simulates every series and writes trace.csv and summary.csv (plus
/// constants.csv for a plain run) into c.out. Nothing is left behind on failure.
inline std::vector<SeriesResult> run_experiment(const ExperimentConfig& c, ExperimentMode mode, std::size_t workers) {
    auto results = simulate(c, mode, workers);
    detail::OutputFiles files(c.out);
    files.write("trace.csv", [&](std::ostream& os) { write_trace_csv(os, results); });
    files.write("summary.csv", [&](std::ostream& os) { write_summary_csv(os, summary_records(results)); });
    if (mode == ExperimentMode::Run)
        files.write("constants.csv", [&](std::ostream& os) {
            write_constants_csv(os, build_instance(c.base_means(), c.num_agents));
        });
    files.commit();
    return results;
}

inline void emit_reference_constants(const ExperimentConfig& c) {
    validate_config(c, ExperimentMode::Run);
    const auto inst = build_instance(c.base_means(), c.num_agents);
    detail::OutputFiles files(c.out);
    files.write("constants.csv", [&](std::ostream& os) { write_constants_csv(os, inst); });
    files.commit();
}

}  // namespace gbandit
