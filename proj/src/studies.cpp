#include "odcbf/studies.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

namespace odcbf {

using nlohmann::json;
namespace fs = std::filesystem;

ClosedLoopRun run_controller(const PlantModel& model, const ControllerConfig& config, const SpacecraftState& x0,
                             const SimOptions& options)
{
    ClosedLoopRun r;
    r.name = std::string(to_string(config.variant));
    try {
        auto controller = make_controller(model, config);
        r.trajectory = run_closed_loop(model, *controller, x0, options);
        r.error = r.trajectory.abort_reason;
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    r.metrics = compute_metrics(r.trajectory, model.h_w_max);
    return r;
}

namespace {

OcpOptions ocp_options(const ExperimentConfig& c)
{
    OcpOptions o;
    o.max_substep = c.ocp.max_substep;
    return o;
}

ControllerConfig cbf_base(const ExperimentConfig& c)
{
    if (const ControllerConfig* found = c.find(ControllerVariant::OdClfCbfQp))
        return *found;
    return ControllerConfig::defaults(ControllerVariant::OdClfCbfQp);
}

json run_json(const ClosedLoopRun& r)
{
    json j = to_json(r.metrics, false);
    j["name"] = r.name;
    j["status"] = r.error ? "failed" : "ok";
    if (r.error)
        j["error"] = *r.error;
    return j;
}

json ocp_json(const OcpResult& r, double h_w_max)
{
    const RunMetrics m = compute_metrics(r.trajectory, h_w_max);
    json j;
    j["name"] = "ocp";
    j["status"] = std::string(to_string(r.status));
    j["t_final"] = r.T_final;
    j["converged"] = r.status == OcpStatus::Solved;
    j["energy"] = r.energy;
    j["energy_window"] = "t_final";
    j["tv_chatter"] = m.tv_chatter;
    j["max_hw"] = m.max_hw;
    j["max_hw_violation"] = m.max_hw_violation;
    j["hw_violated"] = m.max_hw_violation > kMomentumTolerance;
    j["max_u"] = m.max_u;
    j["N"] = r.N;
    j["max_box_violation"] = r.max_box_violation;
    j["terminal_violation"] = r.terminal_violation;
    j["projected_gradient"] = r.projected_gradient;
    j["outer_iterations"] = r.outer_iterations;
    j["inner_iterations"] = r.inner_iterations;
    return j;
}

json header(const ExperimentConfig& config, Study study)
{
    json j;
    j["schema_version"] = kSchemaVersion;
    j["study"] = std::string(to_string(study));
    j["seed"] = config.seed;
    json resolved = to_json(config);
    resolved["study"] = std::string(to_string(study));
    j["config"] = resolved;
    return j;
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    os << j.dump(2) << '\n';
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return os;
}

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string opt_num(const std::optional<double>& v)
{
    return v ? num(*v) : std::string();
}

} // namespace

// ---------------------------------------------------------------------------

CompareResult run_compare(const ExperimentConfig& config)
{
    config.validate();
    const SpacecraftState x0 = config.initial_state();
    const SimOptions sim = config.sim_options();

    CompareResult res;
    res.runs.resize(config.controllers.size());
    parallel_for(config.controllers.size(), config.jobs, [&](std::size_t i) {
        res.runs[i] = run_controller(config.model, config.controllers[i], x0, sim);
    });

    res.ocp_T_final = config.scenario.horizon;
    for (const auto& r : res.runs)
        if (r.name == to_string(ControllerVariant::OdClfCbfQp) && r.metrics.t_final)
            res.ocp_T_final = *r.metrics.t_final;
    try {
        res.ocp = solve_ocp(config.model, x0, res.ocp_T_final, config.ocp.N, ocp_options(config));
    } catch (const std::exception& e) {
        res.ocp_error = e.what();
    }

    for (const auto& r : res.runs)
        res.completed = res.completed && !r.error;
    res.completed = res.completed && !res.ocp_error;
    return res;
}

ParetoResult run_pareto(const ExperimentConfig& config)
{
    config.validate();
    const SpacecraftState x0 = config.initial_state();
    const SimOptions sim = config.sim_options();
    const OcpOptions oopt = ocp_options(config);

    ParetoResult res;
    res.curve = pareto_sweep(config.model, x0, config.sweep.t_grid, config.ocp.N, oopt);

    const ControllerConfig base = cbf_base(config);
    for (double nu : config.sweep.nu)
        for (double alpha : config.sweep.alpha) {
            TuningPoint p;
            p.nu = nu;
            p.alpha = alpha;
            res.tunings.push_back(p);
        }

    parallel_for(res.tunings.size(), config.jobs, [&](std::size_t i) {
        TuningPoint& p = res.tunings[i];
        ControllerConfig c = base;
        c.nu = p.nu;
        c.alpha = p.alpha;
        p.run = run_controller(config.model, c, x0, sim);
        if (!p.run.metrics.t_final || p.run.error)
            return;

        // warm start from the nearest solved curve point
        const double T = *p.run.metrics.t_final;
        const ParetoPoint* nearest = nullptr;
        for (const auto& q : res.curve)
            if (q.status == OcpStatus::Solved
                && (!nearest || std::abs(std::log(q.T_final / T)) < std::abs(std::log(nearest->T_final / T))))
                nearest = &q;
        std::optional<Eigen::VectorXd> init;
        if (nearest)
            init = rescale_controls(nearest->controls, nearest->T_final, T, config.model.u_max);
        try {
            p.ocp = solve_ocp(config.model, x0, T, config.ocp.N, oopt, init);
        } catch (const std::exception& e) {
            p.run.error = std::string("ocp: ") + e.what();
        }
    });

    for (const auto& p : res.tunings)
        res.completed = res.completed && !p.run.error;
    return res;
}

std::vector<std::uint64_t> montecarlo_seeds(std::uint64_t seed, int count)
{
    std::mt19937_64 gen(seed);
    std::vector<std::uint64_t> out(static_cast<std::size_t>(std::max(0, count)));
    for (auto& s : out)
        s = gen();
    return out;
}

MonteCarloResult run_montecarlo(const ExperimentConfig& config)
{
    config.validate();
    const SimOptions sim = config.sim_options();
    ControllerConfig c = cbf_base(config);
    c.alpha = config.montecarlo.alpha;

    const auto seeds = montecarlo_seeds(config.seed, config.montecarlo.seeds);
    MonteCarloResult res;
    res.runs.resize(seeds.size());
    parallel_for(seeds.size(), config.jobs, [&](std::size_t i) {
        MonteCarloRun& r = res.runs[i];
        r.index = static_cast<int>(i);
        r.seed = seeds[i];
        r.x0.sigma = random_orientation(seeds[i]);
        r.run = run_controller(config.model, c, r.x0, sim);
    });

    for (const auto& r : res.runs) {
        res.converged += r.run.metrics.t_final ? 1 : 0;
        res.max_hw_violation = std::max(res.max_hw_violation, r.run.metrics.max_hw_violation);
        res.max_u = std::max(res.max_u, r.run.metrics.max_u);
        res.completed = res.completed && !r.run.error;
    }
    return res;
}

// ---------------------------------------------------------------------------

json compare_report(const ExperimentConfig& config, const CompareResult& r)
{
    json j = header(config, Study::Compare);
    const Vec3 s0 = config.initial_state().sigma.sigma;
    j["initial_sigma"] = {s0[0], s0[1], s0[2]};
    j["controllers"] = json::array();
    for (const auto& run : r.runs) {
        json e = run_json(run);
        e["csv"] = run.name + ".csv";
        j["controllers"].push_back(e);
    }
    if (r.ocp) {
        json e = ocp_json(*r.ocp, config.model.h_w_max);
        e["csv"] = "ocp.csv";
        j["controllers"].push_back(e);
    } else {
        j["controllers"].push_back({{"name", "ocp"}, {"status", "failed"}, {"error", r.ocp_error.value_or("")}});
    }
    j["completed"] = r.completed;
    return j;
}

json pareto_report(const ExperimentConfig& config, const ParetoResult& r)
{
    json j = header(config, Study::Pareto);
    const double u = config.model.u_max;
    j["curve"] = json::array();
    for (const auto& p : r.curve)
        j["curve"].push_back({{"t_final", p.T_final},
                              {"energy", p.energy},
                              {"status", std::string(to_string(p.status))},
                              {"max_violation", p.max_violation},
                              {"max_effort", 3.0 * u * u * p.T_final}});
    j["tunings"] = json::array();
    for (const auto& p : r.tunings) {
        json e = run_json(p.run);
        e["nu"] = p.nu;
        e["alpha"] = p.alpha;
        if (p.ocp) {
            e["ocp_energy"] = p.ocp->energy;
            e["ocp_status"] = std::string(to_string(p.ocp->status));
        }
        if (p.run.metrics.t_final)
            e["max_effort"] = 3.0 * u * u * *p.run.metrics.t_final;
        j["tunings"].push_back(e);
    }
    j["completed"] = r.completed;
    return j;
}

json montecarlo_report(const ExperimentConfig& config, const MonteCarloResult& r)
{
    json j = header(config, Study::MonteCarlo);
    j["runs"] = json::array();
    std::vector<double> energies, t_finals;
    for (const auto& run : r.runs) {
        json e = run_json(run.run);
        e["index"] = run.index;
        e["seed"] = run.seed;
        const Vec3& s = run.x0.sigma.sigma;
        e["initial_sigma"] = {s[0], s[1], s[2]};
        e["rotation_angle_deg"] = rotation_angle(run.x0.sigma) * 180.0 / std::numbers::pi;
        char name[32];
        std::snprintf(name, sizeof name, "mc_%03d.csv", run.index);
        e["csv"] = name;
        j["runs"].push_back(e);
        energies.push_back(run.run.metrics.energy);
        if (run.run.metrics.t_final)
            t_finals.push_back(*run.run.metrics.t_final);
    }

    auto stats = [](const std::vector<double>& v) {
        if (v.empty())
            return json(nullptr);
        double mean = 0.0;
        for (double x : v)
            mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v)
            var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size());
        return json{{"mean", mean},
                    {"std", std::sqrt(var)},
                    {"min", *std::min_element(v.begin(), v.end())},
                    {"max", *std::max_element(v.begin(), v.end())}};
    };

    const auto n = static_cast<int>(r.runs.size());
    j["aggregate"] = {{"runs", n},
                      {"converged", r.converged},
                      {"convergence_rate", n > 0 ? static_cast<double>(r.converged) / n : 0.0},
                      {"max_hw_violation", r.max_hw_violation},
                      {"hw_violated", r.max_hw_violation > kMomentumTolerance},
                      {"max_u", r.max_u},
                      {"energy", stats(energies)},
                      {"t_final", stats(t_finals)}};
    j["completed"] = r.completed;
    return j;
}

void write_compare(const fs::path& dir, const ExperimentConfig& config, const CompareResult& r, bool solve_times)
{
    fs::create_directories(dir);
    json timing = {{"schema_version", kSchemaVersion}, {"study", "compare"}, {"wall_clock", json::object()}};
    for (const auto& run : r.runs) {
        write_trajectory_csv((dir / (run.name + ".csv")).string(), run.trajectory, solve_times);
        timing["wall_clock"][run.name] = run.metrics.wall_clock;
    }
    if (r.ocp) {
        write_trajectory_csv((dir / "ocp.csv").string(), r.ocp->trajectory, false);
        timing["wall_clock"]["ocp"] = r.ocp->wall_clock;
    }

    std::ofstream decay = open_out(dir / "decay.csv");
    decay << "controller,t,rho,delta\n";
    for (const auto& run : r.runs) {
        const Trajectory& t = run.trajectory;
        for (std::size_t k = 0; k < t.diagnostics.size(); ++k) {
            const StepDiagnostics& d = t.diagnostics[k];
            if (!d.rho && !d.delta)
                continue;
            decay << run.name << ',' << num(t.times[k]) << ',' << opt_num(d.rho) << ',' << opt_num(d.delta) << '\n';
        }
    }

    write_json(dir / "metrics.json", compare_report(config, r));
    write_json(dir / "timing.json", timing);
}

void write_pareto(const fs::path& dir, const ExperimentConfig& config, const ParetoResult& r, bool)
{
    fs::create_directories(dir);
    std::ofstream curve = open_out(dir / "pareto.csv");
    curve << "t_final,energy,status\n";
    for (const auto& p : r.curve)
        curve << num(p.T_final) << ',' << num(p.energy) << ',' << to_string(p.status) << '\n';

    json timing = {{"schema_version", kSchemaVersion}, {"study", "pareto"}, {"wall_clock", json::array()}};
    std::ofstream tunings = open_out(dir / "tunings.csv");
    tunings << "nu,alpha,t_final,energy,converged,max_hw_violation,ocp_energy,ocp_status\n";
    for (const auto& p : r.tunings) {
        const RunMetrics& m = p.run.metrics;
        tunings << num(p.nu) << ',' << num(p.alpha) << ',' << opt_num(m.t_final) << ',' << num(m.energy) << ','
                << (m.t_final ? 1 : 0) << ',' << num(m.max_hw_violation) << ','
                << (p.ocp ? num(p.ocp->energy) : std::string()) << ','
                << (p.ocp ? std::string(to_string(p.ocp->status)) : std::string()) << '\n';
        timing["wall_clock"].push_back({{"nu", p.nu},
                                        {"alpha", p.alpha},
                                        {"closed_loop", m.wall_clock},
                                        {"ocp", p.ocp ? json(p.ocp->wall_clock) : json(nullptr)}});
    }

    write_json(dir / "pareto.json", pareto_report(config, r));
    write_json(dir / "timing.json", timing);
}

void write_montecarlo(const fs::path& dir, const ExperimentConfig& config, const MonteCarloResult& r,
                      bool solve_times)
{
    fs::create_directories(dir);
    json timing = {{"schema_version", kSchemaVersion}, {"study", "montecarlo"}, {"wall_clock", json::array()}};
    for (const auto& run : r.runs) {
        char name[32];
        std::snprintf(name, sizeof name, "mc_%03d.csv", run.index);
        write_trajectory_csv((dir / name).string(), run.run.trajectory, solve_times);
        timing["wall_clock"].push_back(run.run.metrics.wall_clock);
    }
    write_json(dir / "montecarlo.json", montecarlo_report(config, r));
    write_json(dir / "timing.json", timing);
}

bool run_study(const ExperimentConfig& config, const fs::path& dir, bool solve_times)
{
    switch (config.study) {
    case Study::Compare: {
        const CompareResult r = run_compare(config);
        write_compare(dir, config, r, solve_times);
        return r.completed;
    }
    case Study::Pareto: {
        const ParetoResult r = run_pareto(config);
        write_pareto(dir, config, r, solve_times);
        return r.completed;
    }
    case Study::MonteCarlo: {
        const MonteCarloResult r = run_montecarlo(config);
        write_montecarlo(dir, config, r, solve_times);
        return r.completed;
    }
    }
    return false;
}

} // namespace odcbf
