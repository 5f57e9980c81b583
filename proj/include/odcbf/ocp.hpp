#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "odcbf/sim.hpp"

namespace odcbf {

// Energy-optimal rest-to-rest maneuver with fixed final time,
//   min int_0^T |u|^2 dt  s.t.  plant dynamics, |u|_inf <= u_max,
//   |h_w|_inf <= h_max at the segment nodes, x(T) in the terminal set,
// transcribed with N zero-order-hold control segments and RK4 shooting inside
// each segment (node states are eliminated).

enum class OcpStatus { Solved, NoSolution };

std::string_view to_string(OcpStatus status);

struct OcpOptions {
    double max_substep = 0.05;        // s, RK4 step inside a segment
    int max_outer = 40;
    int max_inner = 3000;
    double box_tolerance = 1e-8;      // N m s, momentum box at the nodes
    double terminal_tolerance = 1e-6; // on sigma and omega
    double optimality_tolerance = 1e-5;
    TerminalSet terminal;
};

struct OcpResult {
    OcpStatus status = OcpStatus::NoSolution;
    double T_final = 0.0;
    int N = 0;
    Eigen::VectorXd controls;         // 3N, segment-major
    Trajectory trajectory;            // node states and segment inputs
    double energy = 0.0;
    double max_box_violation = 0.0;
    double terminal_violation = 0.0;
    double projected_gradient = 0.0;  // of the scaled augmented Lagrangian
    int outer_iterations = 0;
    int inner_iterations = 0;
    double wall_clock = 0.0;
};

/// Shooting model of the transcription: node states and the exact gradient of
/// a terminal-state functional through a discrete adjoint.
class ShootingModel {
public:
    ShootingModel(const PlantModel& model, const SpacecraftState& x0, double T_final, int N, double max_substep);

    int segments() const { return N_; }
    int substeps_per_segment() const { return m_; }
    double segment_duration() const { return T_ / N_; }

    /// Node states x_0..x_N (as 9-vectors) for the controls U (3N).
    std::vector<Vec9> simulate(const Eigen::VectorXd& U) const;

    /// Gradient with respect to U of a functional of x_N whose gradient with
    /// respect to x_N is `terminal_weight`; `simulate` must have been run on U.
    Eigen::VectorXd terminal_gradient(const Eigen::VectorXd& U, const Vec9& terminal_weight) const;

private:
    PlantModel model_;
    Mat3 Jinv_;
    Eigen::Matrix<double, 9, 3> g_;
    Vec9 x0_;
    double T_;
    int N_;
    int m_;
    double h_;
    mutable std::vector<Vec9> substates_;
};

/// Solves the transcribed problem by an augmented-Lagrangian outer loop with a
/// box-projected L-BFGS inner solver. `initial_controls` (3N) warm-starts it.
OcpResult solve_ocp(const PlantModel& model, const SpacecraftState& x0, double T_final, int N,
                    const OcpOptions& options = {}, const std::optional<Eigen::VectorXd>& initial_controls = {});

struct ParetoPoint {
    double T_final = 0.0;
    double energy = 0.0;
    OcpStatus status = OcpStatus::NoSolution;
    double max_violation = 0.0;
    Eigen::VectorXd controls;
};

/// solve_ocp over an increasing grid, each point warm-started from the previous
/// solution rescaled in time; failed points are recorded and the sweep goes on.
std::vector<ParetoPoint> pareto_sweep(const PlantModel& model, const SpacecraftState& x0,
                                      const std::vector<double>& t_grid, int N, const OcpOptions& options = {});

/// Controls for horizon T_to obtained from a solution for T_from by stretching
/// time (u scales with (T_from/T_to)^2), clipped to the torque box.
Eigen::VectorXd rescale_controls(const Eigen::VectorXd& U, double T_from, double T_to, double u_max);

} // namespace odcbf
