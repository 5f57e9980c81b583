#include "odcbf/sim.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace odcbf {

Trajectory run_closed_loop(const PlantModel& model, Controller& controller, const SpacecraftState& x0,
                           const SimOptions& opt, const DisturbanceModel& d)
{
    if (!(opt.horizon > 0.0) || !(opt.f_ctrl > 0.0) || !(opt.substep > 0.0))
        throw std::invalid_argument("run_closed_loop: horizon, rate and substep must be positive");
    const double period = 1.0 / opt.f_ctrl;
    const double ratio = period / opt.substep;
    const long substeps = std::lround(ratio);
    if (substeps < 1 || std::abs(ratio - static_cast<double>(substeps)) > 1e-9 * ratio)
        throw std::invalid_argument("run_closed_loop: substep must divide the control period");
    const long steps = std::lround(opt.horizon * opt.f_ctrl);
    const double dt = period / static_cast<double>(substeps);

    const auto start = std::chrono::steady_clock::now();
    Trajectory traj;
    traj.control_period = period;
    traj.times.reserve(static_cast<std::size_t>(steps + 1));
    traj.states.reserve(static_cast<std::size_t>(steps + 1));
    traj.inputs.reserve(static_cast<std::size_t>(steps));
    traj.diagnostics.reserve(static_cast<std::size_t>(steps));

    SpacecraftState x = x0;
    x.t = 0.0;
    traj.times.push_back(0.0);
    traj.states.push_back(x);
    if (opt.log_substeps)
        traj.substeps.push_back(x);

    try {
        for (long k = 0; k < steps; ++k) {
            const ControlOutput out = controller.compute(x);
            const Vec3 u = out.u;
            for (long j = 0; j < substeps; ++j) {
                x = rk4_step(model, x, u, d, dt);
                if (opt.log_substeps)
                    traj.substeps.push_back(x);
            }
            // control epochs on an exact grid; no accumulated drift in t
            x.t = static_cast<double>(k + 1) * period;
            traj.inputs.push_back(u);
            traj.diagnostics.push_back(StepDiagnostics{out.rho, out.delta, out.solve_time, out.fallback});
            traj.times.push_back(x.t);
            traj.states.push_back(x);
        }
    } catch (const std::exception& e) {
        traj.abort_reason = e.what();
    }

    traj.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return traj;
}

bool TerminalSet::contains(const SpacecraftState& s) const
{
    return s.sigma.sigma.cwiseAbs().maxCoeff() <= sigma_tol && s.omega.cwiseAbs().maxCoeff() <= omega_tol;
}

std::optional<double> detect_t_final(const Trajectory& traj, const TerminalSet& set)
{
    if (traj.states.empty() || !set.contains(traj.states.back()))
        return std::nullopt;
    std::size_t first = traj.states.size() - 1;
    while (first > 0 && set.contains(traj.states[first - 1]))
        --first;
    return traj.times[first];
}

RunMetrics compute_metrics(const Trajectory& traj, double h_w_max, const TerminalSet& set)
{
    RunMetrics m;
    m.t_final = detect_t_final(traj, set);
    m.wall_clock = traj.wall_clock;
    m.energy_window = m.t_final ? "t_final" : "horizon";

    for (std::size_t k = 0; k < traj.inputs.size(); ++k) {
        const Vec3& u = traj.inputs[k];
        if (!m.t_final || traj.times[k] < *m.t_final)
            m.energy += u.squaredNorm() * traj.control_period;
        m.max_u = std::max(m.max_u, u.cwiseAbs().maxCoeff());
        if (k + 1 < traj.inputs.size())
            m.tv_chatter += (traj.inputs[k + 1] - u).lpNorm<1>();
        if (k < traj.diagnostics.size() && traj.diagnostics[k].fallback)
            ++m.fallback_steps;
    }
    for (const auto& s : traj.states)
        m.max_hw = std::max(m.max_hw, s.h_w.cwiseAbs().maxCoeff());
    m.max_hw_violation = std::max(0.0, m.max_hw - h_w_max);
    return m;
}

// ---------------------------------------------------------------------------

namespace {

void put(std::ostream& os, double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    os << buf;
}

void put_opt(std::ostream& os, const std::optional<double>& v)
{
    if (v)
        put(os, *v);
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

} // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool include_timing)
{
    os << kTrajectoryCsvHeader << '\n';
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const SpacecraftState& s = traj.states[k];
        put(os, traj.times[k]);
        for (const Vec3* v : {&s.sigma.sigma, &s.omega, &s.h_w})
            for (int i = 0; i < 3; ++i) {
                os << ',';
                put(os, (*v)[i]);
            }
        if (k < traj.inputs.size()) {
            for (int i = 0; i < 3; ++i) {
                os << ',';
                put(os, traj.inputs[k][i]);
            }
            const StepDiagnostics& dg = traj.diagnostics[k];
            os << ',';
            put_opt(os, dg.rho);
            os << ',';
            put_opt(os, dg.delta);
            os << ',';
            put(os, include_timing ? dg.solve_time * 1e3 : 0.0);
        } else {
            os << ",,,,,,";
        }
        os << '\n';
    }
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj, bool include_timing)
{
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    write_trajectory_csv(os, traj, include_timing);
}

Trajectory read_trajectory_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != kTrajectoryCsvHeader)
        throw std::runtime_error("trajectory csv: unexpected header");

    Trajectory traj;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        const auto f = split(line);
        if (f.size() != 16)
            throw std::runtime_error("trajectory csv: expected 16 columns");
        auto num = [&](int i) { return std::stod(f[static_cast<std::size_t>(i)]); };
        SpacecraftState s;
        s.t = num(0);
        s.sigma = Mrp(Vec3(num(1), num(2), num(3)));
        s.omega = Vec3(num(4), num(5), num(6));
        s.h_w = Vec3(num(7), num(8), num(9));
        traj.times.push_back(s.t);
        traj.states.push_back(s);
        if (!f[10].empty()) {
            traj.inputs.emplace_back(num(10), num(11), num(12));
            StepDiagnostics dg;
            if (!f[13].empty())
                dg.rho = num(13);
            if (!f[14].empty())
                dg.delta = num(14);
            dg.solve_time = num(15) * 1e-3;
            traj.diagnostics.push_back(dg);
        }
    }
    if (traj.times.size() >= 2)
        traj.control_period = traj.times[1] - traj.times[0];
    return traj;
}

nlohmann::json to_json(const RunMetrics& m, bool include_timing)
{
    nlohmann::json j;
    j["t_final"] = m.t_final ? nlohmann::json(*m.t_final) : nlohmann::json(nullptr);
    j["converged"] = m.t_final.has_value();
    j["energy"] = m.energy;
    j["energy_window"] = m.energy_window;
    j["tv_chatter"] = m.tv_chatter;
    j["max_hw"] = m.max_hw;
    j["max_hw_violation"] = m.max_hw_violation;
    j["hw_violated"] = m.max_hw_violation > kMomentumTolerance;
    j["max_u"] = m.max_u;
    j["fallback_steps"] = m.fallback_steps;
    if (include_timing)
        j["wall_clock"] = m.wall_clock;
    return j;
}

} // namespace odcbf
