#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "odcbf/controllers.hpp"
#include "odcbf/dynamics.hpp"

namespace odcbf {

struct StepDiagnostics {
    std::optional<double> rho;
    std::optional<double> delta;
    double solve_time = 0.0;  // s
    bool fallback = false;
};

// Logged at control resolution: states[k] at times[k] for k = 0..N, inputs[k]
// and diagnostics[k] held over [times[k], times[k+1]).
struct Trajectory {
    std::vector<double> times;
    std::vector<SpacecraftState> states;
    std::vector<Vec3> inputs;
    std::vector<StepDiagnostics> diagnostics;
    double control_period = 0.1;

    std::vector<SpacecraftState> substeps;   // filled only when requested
    std::optional<std::string> abort_reason; // set when the run stopped early
    double wall_clock = 0.0;                 // s

    std::size_t num_steps() const { return inputs.size(); }
};

struct SimOptions {
    double horizon = 120.0;   // s
    double f_ctrl = 10.0;     // Hz
    double substep = 0.01;    // s, must divide the control period
    bool log_substeps = false;
};

/// Zero-order-hold loop: the controller runs once per control period and the
/// plant is integrated with RK4 substeps in between. Controller or integrator
/// errors stop the run; the partial log is returned with abort_reason set.
Trajectory run_closed_loop(const PlantModel& model, Controller& controller, const SpacecraftState& x0,
                           const SimOptions& options, const DisturbanceModel& d = {});

struct TerminalSet {
    double sigma_tol = 0.02;
    double omega_tol = 0.005;

    bool contains(const SpacecraftState& s) const;
};

/// Earliest logged epoch after which every sample stays in the terminal set;
/// nullopt when the final epoch is outside it.
std::optional<double> detect_t_final(const Trajectory& traj, const TerminalSet& set = {});

struct RunMetrics {
    std::optional<double> t_final;  // s
    double energy = 0.0;            // integral of |u|^2 up to t_final (or the horizon)
    double tv_chatter = 0.0;        // sum_k |u_{k+1} - u_k|_1
    double max_hw_violation = 0.0;  // max(0, |h_w|_inf - h_max)
    double max_hw = 0.0;            // max |h_w|_inf
    double max_u = 0.0;             // max |u|_inf
    double wall_clock = 0.0;        // s
    std::string energy_window = "t_final";
    std::size_t fallback_steps = 0;
};

/// Energy uses the rectangle rule over control steps, exact for held inputs.
RunMetrics compute_metrics(const Trajectory& traj, double h_w_max = 0.5, const TerminalSet& set = {});

inline constexpr const char* kTrajectoryCsvHeader =
    "t,sig1,sig2,sig3,om1,om2,om3,hw1,hw2,hw3,u1,u2,u3,rho,delta,solve_ms";

/// One row per logged epoch; the input columns of the final epoch are empty, as
/// are rho/delta for controllers that do not produce them. With
/// `include_timing` false the solve_ms column is written as 0.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool include_timing = true);
void write_trajectory_csv(const std::string& path, const Trajectory& traj, bool include_timing = true);

/// Reads the CSV format above back into a trajectory (timing only in
/// diagnostics); used for validation of written artifacts.
Trajectory read_trajectory_csv(std::istream& is);

nlohmann::json to_json(const RunMetrics& m, bool include_timing = true);

} // namespace odcbf
