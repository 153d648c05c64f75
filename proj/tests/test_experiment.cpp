#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gbandit/experiment.hpp"

using namespace gbandit;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "test.cfg");
}

ExperimentConfig small_config(const fs::path& out) {
    auto c = parse(
        "num_agents = 3\n"
        "num_arms = 6\n"
        "horizon = 3000\n"
        "runs = 4\n"
        "seed = 11\n"
        "grid_stride = 100\n"
        "alpha_values = 0.5, 1\n"
        "delta_min_values = 0.1, 0.2\n");
    c.out = out.string();
    return c;
}

fs::path scratch_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("gbandit_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + GBANDIT_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("parse_config reads keys and keeps defaults", "[experiment]") {
    const auto c = parse(
        "# comment line\n"
        "num_agents = 4   # trailing comment\n"
        "\n"
        "algorithms = aogb-kl, gosine-hoeffding\n"
        "topologies = cycle\n"
        "alpha = 0.5\n");
    CHECK(c.num_agents == 4);
    CHECK(c.num_arms == 50);
    CHECK(c.alpha == 0.5);
    REQUIRE(c.algorithms.size() == 2);
    CHECK(c.algorithms[1].label == "gosine-hoeffding");
    CHECK(c.algorithms[1].rule == UpdateRule::GosInE);
    CHECK(c.algorithms[1].variant == IndexVariant::Hoeffding);
    CHECK(c.topologies == std::vector<std::string>{"cycle"});
    CHECK(c.horizon == 100000);
    CHECK(c.runs == 100);

    const auto m = parse("means = 0.9, 0.5, 0.3\nnum_agents = 1\n");
    CHECK(m.num_arms == 3);
    CHECK(m.base_means() == std::vector<double>{0.9, 0.5, 0.3});
}

TEST_CASE("parse_config errors name the line and field", "[experiment]") {
    CHECK_THROWS_WITH(parse("num_agents = 3\nbogus = 1\n"), Catch::Matchers::ContainsSubstring("test.cfg:2"));
    CHECK_THROWS_WITH(parse("runs = 3\nruns = 4\n"), Catch::Matchers::ContainsSubstring("duplicate"));
    CHECK_THROWS_WITH(parse("horizon = abc\n"), Catch::Matchers::ContainsSubstring("field 'horizon'"));
    CHECK_THROWS_WITH(parse("runs = -3\n"), Catch::Matchers::ContainsSubstring("field 'runs'"));
    CHECK_THROWS_WITH(parse("algorithms = aogb-kl, ucb\n"), Catch::Matchers::ContainsSubstring("unknown algorithm"));
    CHECK_THROWS_AS(parse("just a line\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/x.cfg"), ConfigError);
}

TEST_CASE("validate_config rejects impossible setups", "[experiment]") {
    ExperimentConfig c;
    CHECK_NOTHROW(validate_config(c, ExperimentMode::Run));
    auto bad = c;
    bad.num_arms = 10;
    CHECK_THROWS_WITH(validate_config(bad, ExperimentMode::Run), Catch::Matchers::ContainsSubstring("num_arms"));
    bad = c;
    bad.means = {0.9, 0.9, 0.1};
    bad.num_arms = 3;
    bad.num_agents = 2;
    CHECK_THROWS_AS(validate_config(bad, ExperimentMode::Run), ConfigError);
    bad = c;
    bad.alpha_values = {1.0, 0.0};
    CHECK_THROWS_WITH(validate_config(bad, ExperimentMode::SweepAlpha),
                      Catch::Matchers::ContainsSubstring("alpha_values"));
    bad = c;
    bad.delta_min_values = {0.75};
    CHECK_THROWS_AS(validate_config(bad, ExperimentMode::SweepDelta), ConfigError);
    bad = c;
    bad.topologies = {"complete", "no_such_file.csv"};
    CHECK_THROWS_AS(validate_config(bad, ExperimentMode::SweepTopology), ConfigError);
    bad = c;
    bad.star_center = 20;
    CHECK_THROWS_AS(validate_config(bad, ExperimentMode::Run), ConfigError);
}

TEST_CASE("plan_series expands sweeps", "[experiment]") {
    ExperimentConfig c;
    c.algorithms = {parse_algorithm("aogb-kl"), parse_algorithm("gosine-kl")};
    CHECK(plan_series(c, ExperimentMode::Run).size() == 2);
    CHECK(plan_series(c, ExperimentMode::Run)[0].sweep_value == "none");

    const auto alpha = plan_series(c, ExperimentMode::SweepAlpha);
    REQUIRE(alpha.size() == 6);
    CHECK(alpha[0].sweep_value == "0.5");
    CHECK(alpha[1].algorithm == "gosine-kl");
    CHECK(alpha[2].policy.index.alpha == 1.0);

    const auto delta = plan_series(c, ExperimentMode::SweepDelta);
    REQUIRE(delta.size() == 6);
    const ProblemInstance inst(delta[2].means, c.num_agents);
    CHECK(inst.delta_min() == Approx(0.1).margin(1e-12));
    CHECK(delta[2].sweep_value == "0.10000000000000001");

    const auto topo = plan_series(c, ExperimentMode::SweepTopology);
    REQUIRE(topo.size() == 6);
    CHECK(topo[4].topology == "star");
    CHECK(topo[4].sweep_value == "star");
}

TEST_CASE("summarize", "[experiment]") {
    const auto s = summarize({{10.0, 1.0}, {20.0, 1.0}});
    CHECK(s.mean[0] == 15.0);
    CHECK(s.ci_half_width[0] == Approx(9.8).epsilon(1e-12));
    CHECK(s.mean[1] == 1.0);
    CHECK(s.ci_half_width[1] == 0.0);
    CHECK(summarize({{3.0}}).ci_half_width[0] == 0.0);
    CHECK_THROWS_AS(summarize({}), std::invalid_argument);
}

TEST_CASE("parallel_for covers every index and rethrows the first failure", "[experiment]") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_WITH(parallel_for(50, 3,
                                   [](std::size_t i) {
                                       if (i == 7 || i == 30) throw std::runtime_error("bad " + std::to_string(i));
                                   }),
                      "bad 7");
}

TEST_CASE("simulate is independent of the worker count", "[experiment]") {
    const auto c = small_config(scratch_dir("unused"));
    const auto serial = simulate(c, ExperimentMode::SweepAlpha, 1);
    const auto threaded = simulate(c, ExperimentMode::SweepAlpha, 6);
    REQUIRE(serial.size() == threaded.size());
    for (std::size_t i = 0; i < serial.size(); ++i) CHECK(serial[i].traces == threaded[i].traces);
}

TEST_CASE("series share reward streams across algorithms", "[experiment]") {
    // Same run id, same instance: algorithms that make identical choices see
    // identical rewards. Two copies of one algorithm under different labels
    // must therefore produce the same traces.
    auto c = small_config(scratch_dir("unused"));
    c.algorithms = {parse_algorithm("aogb-kl"), parse_algorithm("aogb-kl")};
    c.algorithms[1].label = "copy";
    const auto res = simulate(c, ExperimentMode::Run, 2);
    CHECK(res[0].traces == res[1].traces);
    CHECK_FALSE(res[0].traces[0] == res[0].traces[1]);
}

TEST_CASE("run_experiment writes consistent CSV files", "[experiment]") {
    const auto dir = scratch_dir("csv");
    auto c = small_config(dir);
    run_experiment(c, ExperimentMode::SweepDelta, 2);

    const auto trace = read_csv(dir / "trace.csv");
    const auto summary = read_csv(dir / "summary.csv");
    REQUIRE(trace.front() ==
            std::vector<std::string>{"algorithm", "alpha", "sweep_value", "run", "t", "node_avg_regret"});
    REQUIRE(summary.front() ==
            std::vector<std::string>{"algorithm", "alpha", "sweep_value", "t", "mean_regret", "ci_half_width"});
    CHECK_FALSE(fs::exists(dir / "constants.csv"));

    // 2 deltas x 4 algorithms x 30 grid points, and 4 runs of each in the trace.
    CHECK(summary.size() == 1 + 2 * 4 * 30);
    CHECK(trace.size() == 1 + 2 * 4 * 4 * 30);

    // Recompute the summary from trace.csv alone.
    std::map<std::vector<std::string>, std::vector<double>> by_key;
    for (std::size_t i = 1; i < trace.size(); ++i) {
        const auto& r = trace[i];
        by_key[{r[0], r[1], r[2], r[4]}].push_back(std::stod(r[5]));
    }
    for (std::size_t i = 1; i < summary.size(); ++i) {
        const auto& r = summary[i];
        const auto& values = by_key.at({r[0], r[1], r[2], r[3]});
        REQUIRE(values.size() == 4);
        std::vector<std::vector<double>> curves;
        for (double v : values) curves.push_back({v});
        const auto s = summarize(curves);
        REQUIRE(format_real(s.mean[0]) == r[4]);
        REQUIRE(format_real(s.ci_half_width[0]) == r[5]);
    }
    for (const auto& entry : fs::directory_iterator(dir)) CHECK(entry.path().extension() != ".partial");
}

TEST_CASE("OutputFiles leaves nothing behind on failure", "[experiment]") {
    const auto dir = scratch_dir("partial");
    {
        detail::OutputFiles files(dir);
        files.write("a.csv", [](std::ostream& os) { os << "x\n"; });
        CHECK_THROWS(files.write("b.csv", [](std::ostream& os) {
            os << "half";
            throw std::runtime_error("simulated failure");
        }));
    }
    CHECK(fs::is_empty(dir));

    // A failing simulation writes no files at all.
    auto c = small_config(scratch_dir("failed_run"));
    c.topology = "/nonexistent/matrix.csv";
    CHECK_THROWS(run_experiment(c, ExperimentMode::Run, 1));
    CHECK_FALSE(fs::exists(c.out));
}

TEST_CASE("constants.csv", "[experiment]") {
    const auto dir = scratch_dir("constants");
    auto c = parse("means = 0.9, 0.8\nnum_agents = 1\n");
    c.out = dir.string();
    emit_reference_constants(c);
    const auto rows = read_csv(dir / "constants.csv");
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == std::vector<std::string>{"quantity", "agent", "value"});
    CHECK(rows[1][0] == "lai_robbins");
    CHECK(std::stod(rows[1][2]) == Approx(2.252099698524529049).epsilon(1e-14));
    CHECK(rows[2][0] == "agent_constant");
    CHECK(rows[2][1] == "0");
    CHECK(std::stod(rows[3][2]) == Approx(2.252099698524529049).epsilon(1e-14));
}

TEST_CASE("command-line driver", "[experiment][cli]") {
    const auto dir = scratch_dir("cli");
    fs::create_directories(dir);
    const auto cfg = dir / "exp.cfg";
    std::ofstream(cfg) << "num_agents = 2\nnum_arms = 4\nhorizon = 2000\nruns = 3\ngrid_stride = 200\n"
                          "algorithms = aogb-kl, gosine-hoeffding\n";

    CHECK(run_cli("run --config " + cfg.string() + " --out " + (dir / "a").string() + " --workers 1") == 0);
    CHECK(run_cli("run --config " + cfg.string() + " --out " + (dir / "b").string() + " --workers 3") == 0);
    for (const char* f : {"trace.csv", "summary.csv", "constants.csv"}) {
        REQUIRE(fs::exists(dir / "a" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    CHECK(run_cli("run --config " + cfg.string() + " --out " + (dir / "c").string() + " --seed 99") == 0);
    CHECK(slurp(dir / "a" / "trace.csv") != slurp(dir / "c" / "trace.csv"));

    CHECK(run_cli("sweep-topology --config " + cfg.string() + " --out " + (dir / "topo").string()) == 2);  // N=2 cycle
    CHECK(run_cli("constants --config " + cfg.string() + " --out " + (dir / "k").string()) == 0);
    CHECK(fs::exists(dir / "k" / "constants.csv"));

    const auto bad = dir / "bad.cfg";
    std::ofstream(bad) << "num_agents = 2\nfrobnicate = 1\n";
    CHECK(run_cli("run --config " + bad.string() + " --out " + (dir / "d").string()) == 2);
    CHECK(run_cli("run --config " + (dir / "missing.cfg").string()) == 2);
    CHECK(run_cli("no-such-command") != 0);
}
