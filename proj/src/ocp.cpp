#include "odcbf/ocp.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>

namespace odcbf {

std::string_view to_string(OcpStatus status)
{
    switch (status) {
    case OcpStatus::Solved: return "solved";
    case OcpStatus::NoSolution: return "no-solution";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------

ShootingModel::ShootingModel(const PlantModel& model, const SpacecraftState& x0, double T_final, int N,
                             double max_substep)
    : model_(model), Jinv_(model.inertia_inverse()), g_(input_matrix(model)), x0_(x0.to_vector()), T_(T_final),
      N_(N)
{
    if (!(T_final > 0.0) || N < 1 || !(max_substep > 0.0))
        throw std::invalid_argument("ShootingModel: T_final, N and max_substep must be positive");
    const double seg = T_final / N;
    m_ = std::max(1, static_cast<int>(std::ceil(seg / max_substep - 1e-12)));
    h_ = seg / m_;
}

namespace {

struct Rhs {
    const Mat3& J;
    const Mat3& Jinv;
    const Eigen::Matrix<double, 9, 3>& g;

    Vec9 operator()(const Vec9& x, const Vec3& u) const
    {
        const Mrp sigma(x.segment<3>(0));
        const Vec3 w = x.segment<3>(3);
        const Vec3 hw = x.segment<3>(6);
        Vec9 f;
        f.segment<3>(0) = mrp_kinematics_matrix(sigma) * w;
        f.segment<3>(3) = -Jinv * w.cross(J * w + hw);
        f.segment<3>(6).setZero();
        return f + g * u;
    }
};

} // namespace

std::vector<Vec9> ShootingModel::simulate(const Eigen::VectorXd& U) const
{
    if (U.size() != 3 * N_)
        throw std::invalid_argument("ShootingModel::simulate: expected 3N controls");
    const Rhs f{model_.J, Jinv_, g_};
    std::vector<Vec9> nodes;
    nodes.reserve(static_cast<std::size_t>(N_ + 1));
    substates_.clear();
    substates_.reserve(static_cast<std::size_t>(N_ * m_ + 1));

    Vec9 x = x0_;
    nodes.push_back(x);
    substates_.push_back(x);
    for (int k = 0; k < N_; ++k) {
        const Vec3 u = U.segment<3>(3 * k);
        for (int j = 0; j < m_; ++j) {
            const Vec9 k1 = f(x, u);
            const Vec9 k2 = f(x + 0.5 * h_ * k1, u);
            const Vec9 k3 = f(x + 0.5 * h_ * k2, u);
            const Vec9 k4 = f(x + h_ * k3, u);
            x += h_ / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            substates_.push_back(x);
        }
        nodes.push_back(x);
    }
    return nodes;
}

Eigen::VectorXd ShootingModel::terminal_gradient(const Eigen::VectorXd& U, const Vec9& terminal_weight) const
{
    if (substates_.size() != static_cast<std::size_t>(N_ * m_ + 1))
        throw std::logic_error("ShootingModel::terminal_gradient: simulate() first");
    const Rhs f{model_.J, Jinv_, g_};
    auto jac = [&](const Vec9& x) { return drift_jacobian(model_, SpacecraftState::from_vector(x)); };

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(3 * N_);
    Vec9 adj = terminal_weight;
    for (int k = N_ - 1; k >= 0; --k) {
        const Vec3 u = U.segment<3>(3 * k);
        Vec3 gu = Vec3::Zero();
        for (int j = m_ - 1; j >= 0; --j) {
            // reverse-mode pass through one RK4 step, stages recomputed
            const Vec9& x = substates_[static_cast<std::size_t>(k * m_ + j)];
            const Vec9 k1 = f(x, u);
            const Vec9 x2 = x + 0.5 * h_ * k1;
            const Vec9 k2 = f(x2, u);
            const Vec9 x3 = x + 0.5 * h_ * k2;
            const Vec9 k3 = f(x3, u);
            const Vec9 x4 = x + h_ * k3;

            Vec9 k1b = h_ / 6.0 * adj;
            Vec9 k2b = h_ / 3.0 * adj;
            Vec9 k3b = h_ / 3.0 * adj;
            const Vec9 k4b = h_ / 6.0 * adj;
            Vec9 xb = adj;

            const Vec9 x4b = jac(x4).transpose() * k4b;
            gu += g_.transpose() * k4b;
            xb += x4b;
            k3b += h_ * x4b;

            const Vec9 x3b = jac(x3).transpose() * k3b;
            gu += g_.transpose() * k3b;
            xb += x3b;
            k2b += 0.5 * h_ * x3b;

            const Vec9 x2b = jac(x2).transpose() * k2b;
            gu += g_.transpose() * k2b;
            xb += x2b;
            k1b += 0.5 * h_ * x2b;

            xb += jac(x).transpose() * k1b;
            gu += g_.transpose() * k1b;
            adj = xb;
        }
        grad.segment<3>(3 * k) = gu;
    }
    return grad;
}

// ---------------------------------------------------------------------------

namespace {

using ValueGrad = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct BoxMinResult {
    Eigen::VectorXd x;
    double f = 0.0;
    double projected_gradient = 0.0;
    int iterations = 0;
};

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g)
{
    return ((x - g).cwiseMax(-1.0).cwiseMin(1.0) - x).cwiseAbs().maxCoeff();
}

// Projected L-BFGS on the box [-1, 1]^n: quasi-Newton direction on the free
// variables, Armijo backtracking along the projection arc.
BoxMinResult minimize_box(const ValueGrad& fg, Eigen::VectorXd x, int max_iter, double tol)
{
    constexpr int memory = 10;
    constexpr double bound_eps = 1e-12;
    const auto n = x.size();

    std::deque<Eigen::VectorXd> S, Y;
    Eigen::VectorXd g(n), gn(n);
    double f = fg(x, g);

    BoxMinResult res;
    int it = 0;
    for (; it < max_iter; ++it) {
        if (projected_gradient_norm(x, g) <= tol)
            break;

        Eigen::VectorXd mask = Eigen::VectorXd::Ones(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if ((x[i] <= -1.0 + bound_eps && g[i] > 0.0) || (x[i] >= 1.0 - bound_eps && g[i] < 0.0))
                mask[i] = 0.0;
        }

        Eigen::VectorXd q = g.cwiseProduct(mask);
        std::vector<double> alphas(S.size());
        for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
            const Eigen::VectorXd s = S[i].cwiseProduct(mask);
            const Eigen::VectorXd y = Y[i].cwiseProduct(mask);
            const double sy = s.dot(y);
            if (sy <= 0.0)
                continue;
            alphas[i] = s.dot(q) / sy;
            q -= alphas[i] * y;
        }
        double gamma = 1.0;
        if (!S.empty()) {
            const Eigen::VectorXd s = S.back().cwiseProduct(mask);
            const Eigen::VectorXd y = Y.back().cwiseProduct(mask);
            if (y.squaredNorm() > 0.0 && s.dot(y) > 0.0)
                gamma = s.dot(y) / y.squaredNorm();
        } else {
            gamma = 0.1 / std::max(1e-12, g.cwiseAbs().maxCoeff());
        }
        q *= gamma;
        for (std::size_t i = 0; i < S.size(); ++i) {
            const Eigen::VectorXd s = S[i].cwiseProduct(mask);
            const Eigen::VectorXd y = Y[i].cwiseProduct(mask);
            const double sy = s.dot(y);
            if (sy <= 0.0)
                continue;
            const double beta = y.dot(q) / sy;
            q += (alphas[i] - beta) * s;
        }
        Eigen::VectorXd d = -q.cwiseProduct(mask);
        if (g.dot(d) >= 0.0) {
            S.clear();
            Y.clear();
            d = -gamma * g.cwiseProduct(mask);
        }

        double t = 1.0;
        bool accepted = false;
        Eigen::VectorXd xn;
        double fn = f;
        for (int ls = 0; ls < 40; ++ls) {
            xn = (x + t * d).cwiseMax(-1.0).cwiseMin(1.0);
            fn = fg(xn, gn);
            if (std::isfinite(fn) && fn <= f + 1e-4 * g.dot(xn - x)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            if (S.empty())
                break;
            S.clear();
            Y.clear();
            continue;
        }

        const Eigen::VectorXd s = xn - x;
        const Eigen::VectorXd y = gn - g;
        if (s.dot(y) > 1e-14 * s.norm() * y.norm()) {
            S.push_back(s);
            Y.push_back(y);
            if (static_cast<int>(S.size()) > memory) {
                S.pop_front();
                Y.pop_front();
            }
        }
        x = xn;
        f = fn;
        g = gn;
    }

    res.x = x;
    res.f = f;
    res.projected_gradient = projected_gradient_norm(x, g);
    res.iterations = it;
    return res;
}

} // namespace

OcpResult solve_ocp(const PlantModel& model, const SpacecraftState& x0, double T_final, int N,
                    const OcpOptions& opt, const std::optional<Eigen::VectorXd>& initial_controls)
{
    if (!(T_final > 0.0))
        throw std::invalid_argument("solve_ocp: T_final must be positive");
    if (N < 20)
        throw std::invalid_argument("solve_ocp: N must be at least 20");
    const auto start = std::chrono::steady_clock::now();

    const ShootingModel shoot(model, x0, T_final, N, opt.max_substep);
    const double dt = T_final / N;
    const double u_max = model.u_max;
    const double h_max = model.h_w_max;
    const double s_tol = opt.terminal.sigma_tol;
    const double w_tol = opt.terminal.omega_tol;
    // Decision x = U / u_max in [-1, 1]; objective scaled by the max-effort energy.
    const double e_ref = 3.0 * u_max * u_max * T_final;

    const int n_box = 6 * N;
    const int n_term = 12;
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n_box + n_term);
    double penalty = 10.0;

    // Scaled constraints c <= 0: box rows (node k = 1..N, +/- per axis), then
    // terminal rows (+/- sigma, +/- omega).
    auto constraints = [&](const std::vector<Vec9>& nodes) {
        Eigen::VectorXd c(n_box + n_term);
        for (int k = 1; k <= N; ++k)
            for (int i = 0; i < 3; ++i) {
                const double h = nodes[static_cast<std::size_t>(k)][6 + i];
                c[6 * (k - 1) + 2 * i] = (h - h_max) / h_max;
                c[6 * (k - 1) + 2 * i + 1] = (-h - h_max) / h_max;
            }
        const Vec9& xN = nodes.back();
        for (int i = 0; i < 3; ++i) {
            c[n_box + 2 * i] = (xN[i] - s_tol) / s_tol;
            c[n_box + 2 * i + 1] = (-xN[i] - s_tol) / s_tol;
            c[n_box + 6 + 2 * i] = (xN[3 + i] - w_tol) / w_tol;
            c[n_box + 6 + 2 * i + 1] = (-xN[3 + i] - w_tol) / w_tol;
        }
        return c;
    };

    ValueGrad augmented = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        const Eigen::VectorXd U = u_max * x;
        const std::vector<Vec9> nodes = shoot.simulate(U);
        const Eigen::VectorXd c = constraints(nodes);

        double value = dt * U.squaredNorm() / e_ref;
        Eigen::VectorXd gU = 2.0 * dt * U / e_ref;

        const Eigen::ArrayXd shifted = (lambda.array() + penalty * c.array()).max(0.0);
        value += ((shifted.square() - lambda.array().square()) / (2.0 * penalty)).sum();

        // momentum at node k depends linearly on u_0..u_{k-1}: dh_k/du_j = -dt I
        Vec3 suffix = Vec3::Zero();
        for (int k = N; k >= 1; --k) {
            for (int i = 0; i < 3; ++i)
                suffix[i] += (shifted[6 * (k - 1) + 2 * i] - shifted[6 * (k - 1) + 2 * i + 1]) / h_max;
            gU.segment<3>(3 * (k - 1)) += -dt * suffix;
        }

        Vec9 wN = Vec9::Zero();
        for (int i = 0; i < 3; ++i) {
            wN[i] = (shifted[n_box + 2 * i] - shifted[n_box + 2 * i + 1]) / s_tol;
            wN[3 + i] = (shifted[n_box + 6 + 2 * i] - shifted[n_box + 6 + 2 * i + 1]) / w_tol;
        }
        if (wN.squaredNorm() > 0.0)
            gU += shoot.terminal_gradient(U, wN);

        grad = u_max * gU;
        return value;
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(3 * N);
    if (initial_controls) {
        if (initial_controls->size() != 3 * N)
            throw std::invalid_argument("solve_ocp: initial controls must have 3N entries");
        x = (*initial_controls / u_max).cwiseMax(-1.0).cwiseMin(1.0);
    }

    OcpResult res;
    res.T_final = T_final;
    res.N = N;

    auto violations = [&](const Eigen::VectorXd& c, double& box, double& term) {
        box = std::max(0.0, c.head(n_box).maxCoeff()) * h_max;
        term = 0.0;
        for (int i = 0; i < 6; ++i)
            term = std::max(term, std::max(0.0, c[n_box + i]) * s_tol);
        for (int i = 6; i < 12; ++i)
            term = std::max(term, std::max(0.0, c[n_box + i]) * w_tol);
    };

    double previous = INFINITY;
    double best = INFINITY;
    int stalled = 0;
    for (int outer = 0; outer < opt.max_outer; ++outer) {
        const BoxMinResult inner = minimize_box(augmented, x, opt.max_inner, 0.1 * opt.optimality_tolerance);
        x = inner.x;
        res.inner_iterations += inner.iterations;
        res.outer_iterations = outer + 1;
        res.projected_gradient = inner.projected_gradient;

        const Eigen::VectorXd c = constraints(shoot.simulate(u_max * x));
        double box = 0.0, term = 0.0;
        violations(c, box, term);
        res.max_box_violation = box;
        res.terminal_violation = term;

        if (box <= opt.box_tolerance && term <= opt.terminal_tolerance
            && inner.projected_gradient <= opt.optimality_tolerance) {
            res.status = OcpStatus::Solved;
            break;
        }

        lambda = (lambda.array() + penalty * c.array()).max(0.0).matrix();
        const double scaled = std::max(box / h_max, std::max(term / s_tol, 0.0));
        if (scaled > 0.25 * previous)
            penalty = std::min(penalty * 10.0, 1e12);
        previous = scaled;
        // infeasible horizon: violation stagnates while the penalty grows
        if (scaled < 0.99 * best) {
            best = scaled;
            stalled = 0;
        } else if (++stalled >= 3) {
            break;
        }
    }

    res.controls = u_max * x;
    const std::vector<Vec9> nodes = shoot.simulate(res.controls);
    res.energy = dt * res.controls.squaredNorm();

    Trajectory& traj = res.trajectory;
    traj.control_period = dt;
    for (int k = 0; k <= N; ++k) {
        traj.times.push_back(k * dt);
        traj.states.push_back(SpacecraftState::from_vector(nodes[static_cast<std::size_t>(k)], k * dt));
        if (k < N) {
            traj.inputs.push_back(res.controls.segment<3>(3 * k));
            traj.diagnostics.push_back({});
        }
    }
    res.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    traj.wall_clock = res.wall_clock;
    if (res.status != OcpStatus::Solved)
        traj.abort_reason = "no-solution";
    return res;
}

Eigen::VectorXd rescale_controls(const Eigen::VectorXd& U, double T_from, double T_to, double u_max)
{
    const double r = T_from / T_to;
    return (U * r * r).cwiseMax(-u_max).cwiseMin(u_max);
}

std::vector<ParetoPoint> pareto_sweep(const PlantModel& model, const SpacecraftState& x0,
                                      const std::vector<double>& t_grid, int N, const OcpOptions& options)
{
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1]))
            throw std::invalid_argument("pareto_sweep: grid must be increasing");

    std::vector<ParetoPoint> out;
    std::optional<Eigen::VectorXd> warm;
    double warm_T = 0.0;
    for (double T : t_grid) {
        std::optional<Eigen::VectorXd> init;
        if (warm)
            init = rescale_controls(*warm, warm_T, T, model.u_max);
        const OcpResult r = solve_ocp(model, x0, T, N, options, init);
        out.push_back(ParetoPoint{T, r.energy, r.status, std::max(r.max_box_violation, r.terminal_violation), r.controls});
        if (r.status == OcpStatus::Solved) {
            warm = r.controls;
            warm_T = T;
        }
    }
    return out;
}

} // namespace odcbf
