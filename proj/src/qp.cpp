#include "odcbf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace odcbf {

double QpProblem::objective(const Eigen::VectorXd& z) const
{
    return 0.5 * z.dot(Phi * z) + phi.dot(z) + offset;
}

std::string_view to_string(QpStatus status)
{
    switch (status) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::IterationCap: return "iteration-cap";
    }
    return "unknown";
}

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s)
{
    KktResiduals r;
    const Eigen::VectorXd& y = s.multipliers;
    r.stationarity = (p.Phi * s.z + p.phi + p.A.transpose() * y).cwiseAbs().maxCoeff();
    if (p.num_constraints() > 0) {
        const Eigen::VectorXd slack = p.b - p.A * s.z;
        r.primal = std::max(0.0, -slack.minCoeff());
        r.complementarity = (y.array() * slack.array()).abs().maxCoeff();
        r.min_multiplier = y.minCoeff();
    }
    return r;
}

namespace {

void validate(const QpProblem& p)
{
    const auto n = p.Phi.rows();
    const auto k = p.A.rows();
    if (p.Phi.cols() != n || p.phi.size() != n || (k > 0 && p.A.cols() != n) || p.b.size() != k)
        throw std::invalid_argument("QpProblem: inconsistent dimensions");
    if (!p.Phi.allFinite() || !p.phi.allFinite() || !p.A.allFinite() || !p.b.allFinite())
        throw std::invalid_argument("QpProblem: non-finite data");
}

// Working-set rows of A.
Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& A, const std::vector<int>& rows)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), A.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = A.row(rows[i]);
    return out;
}

} // namespace

QpSolution ActiveSetSolver::iterate(const QpProblem& p, Eigen::VectorXd z, std::vector<int> working)
{
    const auto n = p.num_variables();
    const auto k = p.num_constraints();
    const int cap = options_.max_iterations > 0 ? options_.max_iterations : static_cast<int>(100 * (n + k));
    const int bland_after = static_cast<int>(3 * k);

    Eigen::LLT<Eigen::MatrixXd> chol(p.Phi);
    if (chol.info() != Eigen::Success)
        throw std::invalid_argument("QpProblem: Phi is not positive definite");

    std::vector<char> in_working(static_cast<std::size_t>(k), 0);
    for (int i : working)
        in_working[static_cast<std::size_t>(i)] = 1;

    QpSolution sol;
    sol.status = QpStatus::IterationCap;
    Eigen::VectorXd lambda;

    int iter = 0;
    for (; iter < cap; ++iter) {
        const Eigen::VectorXd g = p.Phi * z + p.phi;
        const Eigen::VectorXd PhiInv_g = chol.solve(g);
        Eigen::VectorXd step;
        if (working.empty()) {
            step = -PhiInv_g;
            lambda.resize(0);
        } else {
            // range-space solve of the equality-constrained subproblem
            const Eigen::MatrixXd Aw = gather_rows(p.A, working);
            const Eigen::MatrixXd PhiInv_AwT = chol.solve(Aw.transpose());
            const Eigen::MatrixXd schur = Aw * PhiInv_AwT;
            lambda = schur.ldlt().solve(-Aw * PhiInv_g);
            step = -PhiInv_g - PhiInv_AwT * lambda;
            if (static_cast<Eigen::Index>(working.size()) == n)
                step.setZero();  // vertex
        }

        const double step_tol =
            1e-12 * std::max({1.0, z.cwiseAbs().maxCoeff(), PhiInv_g.cwiseAbs().maxCoeff()});
        if (step.size() == 0 || step.cwiseAbs().maxCoeff() <= step_tol) {
            int leave = -1;
            const double dual_tol = options_.dual_tolerance * std::max(1.0, g.cwiseAbs().maxCoeff());
            double most_negative = -dual_tol;
            const bool bland = iter >= bland_after;
            for (std::size_t j = 0; j < working.size(); ++j) {
                const double lj = lambda[static_cast<Eigen::Index>(j)];
                if (bland) {
                    if (lj < -dual_tol && (leave < 0 || working[j] < working[static_cast<std::size_t>(leave)]))
                        leave = static_cast<int>(j);
                } else if (lj < most_negative) {
                    most_negative = lj;
                    leave = static_cast<int>(j);
                }
            }
            if (leave < 0) {
                sol.status = QpStatus::Optimal;
                break;
            }
            in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(leave)])] = 0;
            working.erase(working.begin() + leave);
            continue;
        }

        double alpha = 1.0;
        int blocking = -1;
        const Eigen::VectorXd Ap = p.A * step;
        const Eigen::VectorXd slack = p.b - p.A * z;
        for (Eigen::Index i = 0; i < k; ++i) {
            if (in_working[static_cast<std::size_t>(i)])
                continue;
            const double scale = 1e-14 * (p.A.row(i).cwiseAbs().maxCoeff() * step.cwiseAbs().maxCoeff());
            if (Ap[i] <= scale)
                continue;
            const double ratio = std::max(0.0, slack[i]) / Ap[i];
            if (ratio < alpha) {
                alpha = ratio;
                blocking = static_cast<int>(i);
            }
        }
        z += alpha * step;
        if (blocking >= 0) {
            working.insert(std::upper_bound(working.begin(), working.end(), blocking), blocking);
            in_working[static_cast<std::size_t>(blocking)] = 1;
        }
    }

    sol.z = z;
    sol.iterations = iter;
    sol.active_set = working;
    sol.multipliers = Eigen::VectorXd::Zero(k);
    if (sol.status == QpStatus::Optimal) {
        for (std::size_t j = 0; j < working.size(); ++j)
            sol.multipliers[working[j]] = lambda[static_cast<Eigen::Index>(j)];
    }
    sol.objective = p.objective(z);
    return sol;
}

QpSolution ActiveSetSolver::solve_from(const QpProblem& p, const Eigen::VectorXd& start, bool warm_start)
{
    validate(p);
    if (start.size() != p.num_variables())
        throw std::invalid_argument("solve_from: start point has the wrong size");

    std::vector<int> working;
    if (warm_start && p.num_constraints() > 0) {
        // keep hinted rows that are active at the start and stay linearly independent
        const Eigen::VectorXd slack = p.b - p.A * start;
        for (int i : previous_active_) {
            if (i >= p.num_constraints() || std::abs(slack[i]) > options_.feasibility_tolerance)
                continue;
            std::vector<int> trial = working;
            trial.push_back(i);
            const Eigen::MatrixXd Aw = gather_rows(p.A, trial);
            Eigen::FullPivLU<Eigen::MatrixXd> lu(Aw);
            if (lu.rank() == static_cast<Eigen::Index>(trial.size()))
                working = trial;
        }
        std::sort(working.begin(), working.end());
    }

    QpSolution sol = iterate(p, start, working);
    previous_active_ = sol.active_set;
    return sol;
}

QpSolution ActiveSetSolver::solve(const QpProblem& p)
{
    validate(p);
    const auto n = p.num_variables();
    const auto k = p.num_constraints();
    if (k == 0)
        return solve_from(p, Eigen::VectorXd::Zero(n));

    // Phase I: min 0.5|z|^2 + 0.5 t^2 + M t  s.t.  A z - t <= b, -t <= 0,
    // with M escalated until t vanishes.
    QpProblem aux;
    aux.Phi = Eigen::MatrixXd::Identity(n + 1, n + 1);
    aux.phi = Eigen::VectorXd::Zero(n + 1);
    aux.A = Eigen::MatrixXd::Zero(k + 1, n + 1);
    aux.A.topLeftCorner(k, n) = p.A;
    aux.A.block(0, n, k, 1).setConstant(-1.0);
    aux.A(k, n) = -1.0;
    aux.b = Eigen::VectorXd::Zero(k + 1);
    aux.b.head(k) = p.b;

    Eigen::VectorXd start = Eigen::VectorXd::Zero(n + 1);
    start[n] = std::max(0.0, (-p.b).maxCoeff());

    const double feas_tol = options_.feasibility_tolerance * (1.0 + p.b.cwiseAbs().maxCoeff());
    ActiveSetSolver phase1(options_);
    QpSolution aux_sol;
    int phase1_iterations = 0;
    for (double M = 1.0; M <= 1e12; M *= 1e3) {
        aux.phi[n] = M;
        aux_sol = phase1.iterate(aux, start, {});
        phase1_iterations += aux_sol.iterations;
        start = aux_sol.z;
        if (aux_sol.status == QpStatus::Optimal && aux_sol.z[n] <= feas_tol)
            break;
    }

    if (aux_sol.z[n] > feas_tol) {
        QpSolution sol;
        sol.status = aux_sol.status == QpStatus::Optimal ? QpStatus::Infeasible : QpStatus::IterationCap;
        sol.z = aux_sol.z.head(n);
        sol.objective = p.objective(sol.z);
        sol.iterations = phase1_iterations;
        sol.multipliers = Eigen::VectorXd::Zero(k);
        Eigen::VectorXd y = aux_sol.multipliers.head(k).cwiseMax(0.0);
        if (y.sum() > 0.0)
            y /= y.sum();
        sol.farkas = y;
        return sol;
    }

    QpSolution sol = solve_from(p, aux_sol.z.head(n));
    sol.iterations += phase1_iterations;
    return sol;
}

QpSolution solve_qp(const QpProblem& problem)
{
    ActiveSetSolver solver;
    return solver.solve(problem);
}

// ---------------------------------------------------------------------------

QpProblem assemble_controller_qp(const LinearizationData& lin, const ClfTerms& clf, double W,
                                 const std::optional<CbfBounds>& cbf, double u_max,
                                 const ControllerQpWeights& w, ControllerQpLayout layout)
{
    if (!(W >= 0.0))
        throw std::invalid_argument("assemble_controller_qp: W must be non-negative");
    layout.with_cbf = layout.with_cbf && cbf.has_value();

    const int n = layout.num_variables();
    const int k = layout.num_constraints();
    const int id = layout.delta_index();

    QpProblem qp;
    qp.Phi = Eigen::MatrixXd::Zero(n, n);
    qp.phi = Eigen::VectorXd::Zero(n);
    qp.A = Eigen::MatrixXd::Zero(k, n);
    qp.b = Eigen::VectorXd::Zero(k);

    const Mat3 Hu = lin.L_bar.transpose() * w.H * lin.L_bar;
    qp.Phi.topLeftCorner<3, 3>() = Hu + Hu.transpose();
    qp.phi.head<3>() = -(Hu + Hu.transpose()) * lin.u_star;
    qp.offset = lin.u_star.dot(Hu * lin.u_star);
    if (layout.with_rho) {
        qp.Phi(3, 3) = 2.0 * w.p_rho;
        qp.phi[3] = -2.0 * w.p_rho;
        qp.offset += w.p_rho;
    }
    qp.Phi(id, id) = 2.0 * w.p_delta;

    const Eigen::RowVector3d a_u = clf.LgV * lin.L_bar;
    int row = 0;
    qp.A.block<1, 3>(row, 0) = a_u;
    qp.A(row, id) = -1.0;
    if (layout.with_rho) {
        qp.A(row, 3) = W;
        qp.b[row] = -clf.LfV + a_u.dot(lin.u_star);
    } else {
        qp.b[row] = -clf.LfV - W + a_u.dot(lin.u_star);
    }
    ++row;

    if (layout.with_cbf) {
        for (int i = 0; i < 3; ++i, ++row) {
            qp.A(row, i) = 1.0;
            qp.b[row] = cbf->upper[i];
        }
        for (int i = 0; i < 3; ++i, ++row) {
            qp.A(row, i) = -1.0;
            qp.b[row] = -cbf->lower[i];
        }
    }
    for (int i = 0; i < 3; ++i, ++row) {
        qp.A(row, i) = 1.0;
        qp.b[row] = u_max;
    }
    for (int i = 0; i < 3; ++i, ++row) {
        qp.A(row, i) = -1.0;
        qp.b[row] = u_max;
    }
    if (layout.with_rho) {
        qp.A(row, 3) = -1.0;
        qp.b[row] = 0.0;
        ++row;
    }
    return qp;
}

Eigen::VectorXd controller_qp_witness(const LinearizationData& lin, const ClfTerms& clf, double W,
                                      ControllerQpLayout layout)
{
    Eigen::VectorXd z = Eigen::VectorXd::Zero(layout.num_variables());
    const double shifted = clf.LfV - (clf.LgV * lin.L_bar).dot(lin.u_star);
    z[layout.delta_index()] = std::max(0.0, layout.with_rho ? shifted : shifted + W);
    return z;
}

} // namespace odcbf
