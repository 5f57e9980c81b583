#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "odcbf/fblin.hpp"
#include "odcbf/safety.hpp"

namespace odcbf {

// minimize 0.5 z' Phi z + phi' z + offset  subject to  A z <= b
struct QpProblem {
    Eigen::MatrixXd Phi;
    Eigen::VectorXd phi;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    double offset = 0.0;

    Eigen::Index num_variables() const { return Phi.rows(); }
    Eigen::Index num_constraints() const { return A.rows(); }
    double objective(const Eigen::VectorXd& z) const;
};

enum class QpStatus { Optimal, Infeasible, IterationCap };

std::string_view to_string(QpStatus status);

struct QpSolution {
    Eigen::VectorXd z;
    std::vector<int> active_set;        // working set at termination, ascending
    Eigen::VectorXd multipliers;        // one per row, zero off the working set
    double objective = 0.0;
    int iterations = 0;
    QpStatus status = QpStatus::Optimal;
    Eigen::VectorXd farkas;             // y >= 0, A'y ~ 0, b'y < 0 when infeasible
};

struct KktResiduals {
    double stationarity = 0.0;
    double primal = 0.0;
    double complementarity = 0.0;
    double min_multiplier = 0.0;
};

KktResiduals kkt_residuals(const QpProblem& problem, const QpSolution& solution);

struct QpOptions {
    int max_iterations = 0;        // 0 selects 100 (n + k)
    double dual_tolerance = 1e-10;
    double feasibility_tolerance = 1e-9;
};

/// Primal active-set method for strictly convex dense QPs. Entering
/// constraints are chosen by the ratio test (lowest index on ties) and leaving
/// constraints by the most negative multiplier, switching to Bland's rule after
/// 3k iterations.
class ActiveSetSolver {
public:
    explicit ActiveSetSolver(QpOptions options = {}) : options_(options) {}

    /// Generic entry point: a phase-I problem supplies the starting point.
    QpSolution solve(const QpProblem& problem);

    /// Starts from a caller-supplied feasible point. The working set of the
    /// previous solve is reused as a hint when `warm_start` is set.
    QpSolution solve_from(const QpProblem& problem, const Eigen::VectorXd& feasible_start, bool warm_start = false);

private:
    QpSolution iterate(const QpProblem& problem, Eigen::VectorXd z, std::vector<int> working);

    QpOptions options_;
    std::vector<int> previous_active_;
};

QpSolution solve_qp(const QpProblem& problem);

// ---------------------------------------------------------------------------
// Controller subproblem: decision z = (u, [rho], delta).

struct ControllerQpWeights {
    Mat3 H = Mat3::Identity();
    double p_rho = 0.1;
    double p_delta = 100.0;
};

struct ControllerQpLayout {
    bool with_rho = true;   // false: fixed decay, rho = 1 and dropped
    bool with_cbf = true;

    int num_variables() const { return with_rho ? 5 : 4; }
    int num_constraints() const { return 1 + (with_cbf ? 6 : 0) + 6 + (with_rho ? 1 : 0); }
    int delta_index() const { return with_rho ? 4 : 3; }
};

/// Assembles
///   min |L_bar (u - u*)|_H^2 + p_rho (1 - rho)^2 + p_delta delta^2
///   s.t. LfV + LgV L_bar (u - u*) <= -rho W + delta
///        cbf.lower <= u <= cbf.upper, |u|_inf <= u_max, rho >= 0
/// Rows are ordered: CLF, CBF upper (3), CBF lower (3), input upper (3), input
/// lower (3), rho >= 0.
QpProblem assemble_controller_qp(const LinearizationData& lin, const ClfTerms& clf, double W,
                                 const std::optional<CbfBounds>& cbf, double u_max,
                                 const ControllerQpWeights& weights, ControllerQpLayout layout);

/// A point satisfying every row of the controller QP: u = 0, rho = 0 and the
/// smallest admissible delta >= 0.
Eigen::VectorXd controller_qp_witness(const LinearizationData& lin, const ClfTerms& clf, double W,
                                      ControllerQpLayout layout);

} // namespace odcbf
