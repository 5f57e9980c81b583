#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "odcbf/studies.hpp"

using namespace odcbf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("odcbf_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p)
{
    return json::parse(slurp(p));
}

std::string first_line(const fs::path& p)
{
    std::ifstream is(p);
    std::string line;
    std::getline(is, line);
    return line;
}

ExperimentConfig small_montecarlo(int seeds, double horizon)
{
    ExperimentConfig c = ExperimentConfig::defaults();
    c.study = Study::MonteCarlo;
    c.seed = 11;
    c.montecarlo.seeds = seeds;
    c.scenario.horizon = horizon;
    return c;
}

int run_cli(const std::string& args)
{
    const int rc = std::system((std::string(ODCBF_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST_CASE("parallel_for visits every index once")
{
    for (int jobs : {1, 2, 7, 64}) {
        std::vector<std::atomic<int>> hits(50);
        parallel_for(hits.size(), jobs, [&](std::size_t i) { ++hits[i]; });
        for (const auto& h : hits)
            CHECK(h.load() == 1);
    }
    int calls = 0;
    parallel_for(0, 4, [&](std::size_t) { ++calls; });
    CHECK(calls == 0);
}

TEST_CASE("Monte Carlo seeds derive from the experiment seed")
{
    const auto a = montecarlo_seeds(5, 20);
    CHECK(a.size() == 20);
    CHECK(a == montecarlo_seeds(5, 20));
    CHECK(a != montecarlo_seeds(6, 20));
    std::mt19937_64 gen(5);
    CHECK(a[0] == gen());
    const auto prefix = montecarlo_seeds(5, 3);
    CHECK(std::equal(prefix.begin(), prefix.end(), a.begin()));
}

TEST_CASE("artifacts do not depend on the worker count")
{
    ExperimentConfig c = small_montecarlo(4, 15.0);
    c.jobs = 1;
    const fs::path one = scratch_dir("mc_jobs1");
    CHECK(run_study(c, one));
    c.jobs = 4;
    const fs::path four = scratch_dir("mc_jobs4");
    CHECK(run_study(c, four));

    int files = 0;
    for (const auto& entry : fs::directory_iterator(one)) {
        const std::string name = entry.path().filename().string();
        REQUIRE(fs::exists(four / name));
        if (name == "timing.json")
            continue;
        CHECK_MESSAGE(slurp(entry.path()) == slurp(four / name), name);
        ++files;
    }
    CHECK(files == 5);
    CHECK(first_line(one / "mc_000.csv") == kTrajectoryCsvHeader);
}

TEST_CASE("non-converged runs are reported, not failed")
{
    const fs::path dir = scratch_dir("mc_short");
    const ExperimentConfig c = small_montecarlo(1, 1.0);
    CHECK(run_study(c, dir));
    const json j = read_json(dir / "montecarlo.json");
    CHECK(j["schema_version"] == kSchemaVersion);
    CHECK(j["study"] == "montecarlo");
    CHECK(j["seed"] == 11);
    CHECK(j["completed"] == true);
    CHECK(j["aggregate"]["runs"] == 1);
    CHECK(j["aggregate"]["converged"] == 0);
    CHECK(j["aggregate"]["convergence_rate"] == 0.0);
    CHECK(j["aggregate"]["t_final"].is_null());
    REQUIRE(j["runs"].size() == 1);
    CHECK(j["runs"][0]["converged"] == false);
    CHECK(j["runs"][0]["t_final"].is_null());
    CHECK(j["runs"][0]["energy_window"] == "horizon");
    CHECK(j["runs"][0]["seed"] == montecarlo_seeds(11, 1)[0]);
    CHECK(j["config"]["montecarlo"]["seeds"] == 1);
    CHECK_FALSE(j["config"].contains("out"));
    CHECK_FALSE(j["config"].contains("jobs"));
    CHECK(parse_config(j["config"]).scenario.horizon == 1.0);
}

TEST_CASE("Monte Carlo result aggregates")
{
    const MonteCarloResult r = run_montecarlo(small_montecarlo(3, 60.0));
    REQUIRE(r.runs.size() == 3);
    const auto seeds = montecarlo_seeds(11, 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(r.runs[static_cast<std::size_t>(i)].index == i);
        CHECK(r.runs[static_cast<std::size_t>(i)].seed == seeds[static_cast<std::size_t>(i)]);
        CHECK(r.runs[static_cast<std::size_t>(i)].x0.sigma.sigma
              == random_orientation(seeds[static_cast<std::size_t>(i)]).sigma);
    }
    CHECK(r.max_hw_violation <= 1e-9);
    CHECK(r.max_u <= 0.123 + 1e-9);
    CHECK(r.completed);
}

TEST_CASE("compare study artifacts")
{
    ExperimentConfig c = ExperimentConfig::defaults();
    c.scenario.horizon = 20.0;
    c.ocp.N = 20;
    c.jobs = 4;
    const fs::path dir = scratch_dir("compare");
    CHECK(run_study(c, dir));

    for (const char* f : {"pd-sat.csv", "res-clf-qp.csv", "od-clf-qp.csv", "od-clf-cbf-qp.csv", "ocp.csv"})
        CHECK(first_line(dir / f) == kTrajectoryCsvHeader);
    CHECK(first_line(dir / "decay.csv") == "controller,t,rho,delta");

    const json m = read_json(dir / "metrics.json");
    CHECK(m["schema_version"] == kSchemaVersion);
    CHECK(m["study"] == "compare");
    CHECK(m["config"]["controllers"].size() == 4);
    REQUIRE(m["controllers"].size() == 5);
    CHECK(m["controllers"][4]["name"] == "ocp");
    CHECK(m["controllers"][4]["t_final"] == 20.0);  // closed loop has not converged
    CHECK(m["controllers"][4]["status"] == "solved");
    for (const auto& e : m["controllers"])
        CHECK_FALSE(e.contains("wall_clock"));

    const json t = read_json(dir / "timing.json");
    for (const char* name : {"pd-sat", "res-clf-qp", "od-clf-qp", "od-clf-cbf-qp", "ocp"})
        CHECK(t["wall_clock"][name].get<double>() > 0.0);

    // solve_ms is zero unless measured times are requested
    std::ifstream is(dir / "od-clf-cbf-qp.csv");
    const Trajectory back = read_trajectory_csv(is);
    for (const auto& d : back.diagnostics)
        CHECK(d.solve_time == 0.0);
}

TEST_CASE("Pareto study artifacts")
{
    ExperimentConfig c = ExperimentConfig::defaults();
    c.study = Study::Pareto;
    c.sweep.nu = {10.0};
    c.sweep.alpha = {0.05, 0.2};
    c.sweep.t_grid = {4.0, 40.0, 80.0};
    c.ocp.N = 20;
    c.jobs = 2;
    const fs::path dir = scratch_dir("pareto");
    CHECK(run_study(c, dir));

    CHECK(first_line(dir / "pareto.csv") == "t_final,energy,status");
    CHECK(first_line(dir / "tunings.csv")
          == "nu,alpha,t_final,energy,converged,max_hw_violation,ocp_energy,ocp_status");
    const json j = read_json(dir / "pareto.json");
    REQUIRE(j["curve"].size() == 3);
    CHECK(j["curve"][0]["status"] == "no-solution");
    CHECK(j["curve"][1]["status"] == "solved");
    REQUIRE(j["tunings"].size() == 2);
    for (const auto& e : j["tunings"]) {
        REQUIRE(e["converged"] == true);
        CHECK(e["ocp_status"] == "solved");
        CHECK(e["energy"].get<double>() >= e["ocp_energy"].get<double>());
        CHECK(e["energy"].get<double>() <= e["max_effort"].get<double>());
    }
}

TEST_CASE("command-line front end")
{
    const fs::path dir = scratch_dir("cli");
    const std::string common = std::string("--config ") + ODCBF_DEFAULT_CONFIG + " --seed 21 ";
    CHECK(run_cli("--study montecarlo " + common + "--out " + (dir / "mc").string() + " --seeds 2 --horizon 2 --jobs 2")
          == 0);
    const json j = read_json(dir / "mc" / "montecarlo.json");
    CHECK(j["seed"] == 21);
    CHECK(j["runs"].size() == 2);

    CHECK(run_cli("--study montecarlo " + common + "--out " + (dir / "t").string()
                  + " --seeds 1 --horizon 1 --solve-times")
          == 0);
    std::ifstream is(dir / "t" / "mc_000.csv");
    const Trajectory t = read_trajectory_csv(is);
    double total = 0.0;
    for (const auto& d : t.diagnostics)
        total += d.solve_time;
    CHECK(total > 0.0);

    {
        std::ofstream bad(dir / "bad.json");
        bad << R"({ "ocp": { "N": 5 } })";
    }
    CHECK(run_cli("--study compare --config " + (dir / "bad.json").string() + " --seed 0 --out " + (dir / "x").string())
          == 2);
    CHECK(run_cli("--study lunar " + common + "--out " + (dir / "x").string()) != 0);
    CHECK_FALSE(fs::exists(dir / "x"));
}
