// Acceptance run on the shipped scenario. Prints one PASS/FAIL line per
// criterion and exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "odcbf/studies.hpp"

using namespace odcbf;

namespace {

struct Outcome {
    std::string name;
    bool pass = false;
    std::string detail;
};

std::vector<Outcome> g_outcomes;

void report(const std::string& name, bool pass, const std::string& detail)
{
    g_outcomes.push_back({name, pass, detail});
    std::printf("%s  %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int worker_count()
{
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

const ClosedLoopRun& run_of(const CompareResult& r, ControllerVariant v)
{
    for (const auto& run : r.runs)
        if (run.name == to_string(v))
            return run;
    throw std::runtime_error("missing run");
}

// ---------------------------------------------------------------------------
// numerical kernels

bool kernel_care(std::string& detail)
{
    const double s3 = std::sqrt(3.0);
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(6, 6);
    for (int i = 0; i < 3; ++i) {
        expect(i, i) = s3;
        expect(i, i + 3) = expect(i + 3, i) = 1.0;
        expect(i + 3, i + 3) = s3;
    }
    const CareProblem p{brunovsky_f(3, 2), brunovsky_g(3, 2), Eigen::MatrixXd::Identity(6, 6),
                        Eigen::MatrixXd::Identity(3, 3)};
    const CareSolution s = solve_care(p);
    double worst = s.residual_norm;
    const double closed_form_err = (s.P - expect).cwiseAbs().maxCoeff();

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(6, 6, [&] { return u(rng); });
        const Eigen::MatrixXd B = Eigen::MatrixXd::NullaryExpr(3, 3, [&] { return u(rng); });
        const CareProblem q{brunovsky_f(3, 2), brunovsky_g(3, 2),
                            A * A.transpose() + 0.1 * Eigen::MatrixXd::Identity(6, 6),
                            B * B.transpose() + 0.1 * Eigen::MatrixXd::Identity(3, 3)};
        worst = std::max(worst, solve_care(q).residual_norm / (1.0 + q.Q.norm()));
    }
    detail += fmt("CARE residual %.1e, sqrt(3) form error %.1e; ", worst, closed_form_err);
    return worst <= 1e-9 && closed_form_err <= 1e-10;
}

bool kernel_qp(std::string& detail)
{
    std::mt19937_64 rng(42);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> dn(1, 6), dk(0, 12);
    auto rnd = [&](Eigen::Index r, Eigen::Index c) { return Eigen::MatrixXd::NullaryExpr(r, c, [&] { return g(rng); }); };
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = dn(rng), k = dk(rng);
        QpProblem p;
        const Eigen::MatrixXd B = rnd(n, n);
        p.Phi = B * B.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
        p.phi = 3.0 * rnd(n, 1);
        p.A = rnd(k, n);
        p.b = p.A * rnd(n, 1);
        for (int i = 0; i < k; ++i)
            p.b[i] += unit(rng) < 0.3 ? 0.0 : unit(rng);
        const QpSolution s = solve_qp(p);
        if (s.status != QpStatus::Optimal) {
            worst = INFINITY;
            continue;
        }
        // exhaustive enumeration of equality-constrained subproblems
        double best = INFINITY;
        for (unsigned mask = 0; mask < (1u << k); ++mask) {
            std::vector<int> rows;
            for (int i = 0; i < k; ++i)
                if (mask & (1u << i))
                    rows.push_back(i);
            const int m = static_cast<int>(rows.size());
            if (m > n)
                continue;
            Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
            Eigen::VectorXd rhs(n + m);
            K.topLeftCorner(n, n) = p.Phi;
            rhs.head(n) = -p.phi;
            for (int j = 0; j < m; ++j) {
                K.block(n + j, 0, 1, n) = p.A.row(rows[j]);
                K.block(0, n + j, n, 1) = p.A.row(rows[j]).transpose();
                rhs[n + j] = p.b[rows[j]];
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
            if (lu.rank() < n + m)
                continue;
            const Eigen::VectorXd z = lu.solve(rhs).head(n);
            if (k > 0 && (p.A * z - p.b).maxCoeff() > 1e-9)
                continue;
            best = std::min(best, p.objective(z));
        }
        worst = std::max(worst, std::abs(s.objective - best) / (1.0 + std::abs(best)));
    }
    detail += fmt("QP vs enumeration %.1e; ", worst);
    return worst <= 1e-6;
}

bool kernel_linearization(std::string& detail)
{
    const PlantModel m = PlantModel::reference();
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double h = 1e-4;
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        SpacecraftState s;
        Vec3 sig(u(rng), u(rng), u(rng));
        if (sig.norm() > 0.95)
            sig *= 0.95 / sig.norm();
        s.sigma = Mrp(sig);
        s.omega = 0.2 * Vec3(u(rng), u(rng), u(rng));
        s.h_w = 0.45 * Vec3(u(rng), u(rng), u(rng));
        const Vec3 tau = 0.123 * Vec3(u(rng), u(rng), u(rng));
        const LinearizationData lin = linearize(m, s);
        auto sigma_dot = [&](const SpacecraftState& x) { return Vec3(mrp_kinematics_matrix(x.sigma) * x.omega); };
        const Vec9 x = s.to_vector();
        auto f = [&](const Vec9& y) { return state_derivative(m, SpacecraftState::from_vector(y), tau); };
        const Vec9 fwd = rk4_step(m, s, tau, {}, h).to_vector();
        const Vec9 k1 = -f(x);
        const Vec9 k2 = -f(x + 0.5 * h * k1);
        const Vec9 k3 = -f(x + 0.5 * h * k2);
        const Vec9 k4 = -f(x + h * k3);
        const Vec9 bwd = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const Vec3 fd = (sigma_dot(SpacecraftState::from_vector(fwd)) - sigma_dot(SpacecraftState::from_vector(bwd)))
                        / (2.0 * h);
        const Vec3 model = lin.mu_bar + lin.L_bar * tau;
        worst = std::max(worst, (fd - model).norm() / std::max(1e-3, model.norm()));
    }
    detail += fmt("linearization vs FD %.1e rel; ", worst);
    return worst <= 1e-5;
}

bool kernel_kinematics(std::string& detail)
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double h = 1e-6;
    double worst_dot = 0.0, worst_id = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec3 s(u(rng), u(rng), u(rng));
        const Vec3 sd(u(rng), u(rng), u(rng));
        const Mat3 fd = (mrp_kinematics_matrix(Mrp(s + h * sd)) - mrp_kinematics_matrix(Mrp(s - h * sd))) / (2 * h);
        worst_dot = std::max(worst_dot, (mrp_kinematics_matrix_dot(Mrp(s), sd) - fd).cwiseAbs().maxCoeff());
        const Mrp big(2.0 * s);
        const Mat3 M = mrp_kinematics_matrix(big);
        const double c = (1.0 + big.sigma.squaredNorm()) / 4.0;
        worst_id = std::max(worst_id, (M * M.transpose() - c * c * Mat3::Identity()).cwiseAbs().maxCoeff());
    }
    detail += fmt("M_dot vs FD %.1e, M M' identity %.1e", worst_dot, worst_id);
    return worst_dot <= 1e-8 && worst_id <= 1e-10;
}

} // namespace

int main()
{
    std::setvbuf(stdout, nullptr, _IOLBF, 0);
    const ExperimentConfig base = ExperimentConfig::defaults();
    const double umax = base.model.u_max;
    const double hmax = base.model.h_w_max;
    const double tol = 1e-9;

    // comparative scenario and Monte Carlo
    auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg = base;
    cfg.jobs = worker_count();
    const CompareResult cmp = run_compare(cfg);
    ExperimentConfig mc_cfg = cfg;
    mc_cfg.study = Study::MonteCarlo;
    const MonteCarloResult mc = run_montecarlo(mc_cfg);
    const double safety_seconds = seconds_since(t0);

    const ClosedLoopRun& pd = run_of(cmp, ControllerVariant::PdSat);
    const ClosedLoopRun& res = run_of(cmp, ControllerVariant::ResClfQp);
    const ClosedLoopRun& od = run_of(cmp, ControllerVariant::OdClfQp);
    const ClosedLoopRun& cbf = run_of(cmp, ControllerVariant::OdClfCbfQp);

    {
        bool ok = !cbf.error && cbf.metrics.max_hw <= hmax + tol && cbf.metrics.max_u <= umax + tol;
        int mc_bad = 0;
        double mc_hw = 0.0, mc_u = 0.0;
        for (const auto& r : mc.runs) {
            mc_hw = std::max(mc_hw, r.run.metrics.max_hw);
            mc_u = std::max(mc_u, r.run.metrics.max_u);
            if (r.run.error || r.run.metrics.max_hw > hmax + tol || r.run.metrics.max_u > umax + tol)
                ++mc_bad;
        }
        ok = ok && mc_bad == 0 && mc.runs.size() == 20 && safety_seconds <= 120.0;
        report("safety invariance", ok,
               fmt("comparative max|h_w| %.6f max|u| %.6f; Monte Carlo %zu runs max|h_w| %.6f max|u| %.6f, %d "
                   "violating; %.1f s",
                   cbf.metrics.max_hw, cbf.metrics.max_u, mc.runs.size(), mc_hw, mc_u, mc_bad, safety_seconds));
    }

    {
        const bool ok = cbf.metrics.t_final && *cbf.metrics.t_final <= base.scenario.horizon && mc.converged == 20;
        report("convergence", ok,
               fmt("comparative T_final %s; Monte Carlo %d/%zu converged",
                   cbf.metrics.t_final ? fmt("%.1f s", *cbf.metrics.t_final).c_str() : "none", mc.converged,
                   mc.runs.size()));
    }

    {
        const double e_ocp = cmp.ocp && cmp.ocp->status == OcpStatus::Solved ? cmp.ocp->energy : INFINITY;
        const double e_cbf = cbf.metrics.energy, e_od = od.metrics.energy, e_res = res.metrics.energy;
        const bool order = e_ocp < e_cbf && e_cbf < e_od && e_od < e_res;
        const bool bands = e_cbf >= 0.015 && e_cbf <= 0.13 && e_od >= 0.06 && e_od <= 0.52;
        report("cost ordering", order && bands,
               fmt("OCP %.4f < OD-CLF-CBF-QP %.4f < OD-CLF-QP %.4f < RES-CLF-QP %.4f; bands %s", e_ocp, e_cbf, e_od,
                   e_res, bands ? "met" : "missed"));
    }

    {
        std::string who;
        for (const ClosedLoopRun* r : {&pd, &res, &od})
            if (r->metrics.max_hw_violation > tol)
                who += fmt("%s (%.3f) ", r->name.c_str(), r->metrics.max_hw);
        report("baseline violation", !who.empty(), who.empty() ? "no baseline exceeds the momentum bound"
                                                               : "exceeds 0.5 N m s: " + who);
    }

    {
        const double ratio = res.metrics.tv_chatter / std::max(od.metrics.tv_chatter, 1e-300);
        report("chatter mitigation", ratio >= 2.0,
               fmt("TV RES-CLF-QP %.3f vs OD-CLF-QP %.3f (ratio %.1f)", res.metrics.tv_chatter,
                   od.metrics.tv_chatter, ratio));
    }

    {
        const Trajectory& t = cbf.trajectory;
        double peak = 0.0, tail = 0.0;
        int tail_n = 0;
        const double t_end = t.times.empty() ? 0.0 : t.times.back();
        for (std::size_t k = 0; k < t.diagnostics.size(); ++k) {
            const double d = t.diagnostics[k].delta.value_or(0.0);
            peak = std::max(peak, d);
            if (t.times[k] >= t_end - 10.0 - 1e-9) {
                tail += d;
                ++tail_n;
            }
        }
        tail /= std::max(tail_n, 1);
        report("stability telemetry", tail_n > 0 && tail <= 1e-4 * peak,
               fmt("delta peak %.3e, final 10 s mean %.3e", peak, tail));
    }

    {
        t0 = std::chrono::steady_clock::now();
        ExperimentConfig pc = cfg;
        pc.study = Study::Pareto;
        const ParetoResult pr = run_pareto(pc);
        const double seconds = seconds_since(t0);
        std::set<double> nus, alphas;
        int dominated = 0, capped = 0, usable = 0;
        for (const auto& p : pr.tunings) {
            nus.insert(p.nu);
            alphas.insert(p.alpha);
            const auto& m = p.run.metrics;
            if (!m.t_final || !p.ocp || p.ocp->status != OcpStatus::Solved)
                continue;
            ++usable;
            dominated += m.energy >= 0.99 * p.ocp->energy ? 1 : 0;
            capped += m.energy <= 3.0 * umax * umax * *m.t_final ? 1 : 0;
        }
        int solved = 0;
        for (const auto& q : pr.curve)
            solved += q.status == OcpStatus::Solved ? 1 : 0;
        const int n = static_cast<int>(pr.tunings.size());
        const bool ok = nus.size() >= 3 && alphas.size() >= 3 && usable == n && dominated == n && capped == n
                        && seconds <= 900.0;
        report("Pareto dominance", ok,
               fmt("%zux%zu grid, %d/%d tunings above the OCP curve, %d/%d below max effort; curve %d/%zu solved; "
                   "%.1f s",
                   nus.size(), alphas.size(), dominated, n, capped, n, solved, pr.curve.size(), seconds));
    }

    {
        std::string detail;
        bool ok = kernel_care(detail);
        ok = kernel_qp(detail) && ok;
        ok = kernel_linearization(detail) && ok;
        ok = kernel_kinematics(detail) && ok;
        report("numerical kernels", ok, detail);
    }

    {
        // sequential timing, best of three
        const SpacecraftState x0 = base.initial_state();
        const SimOptions sim = base.sim_options();
        auto best_run = [&](const ControllerConfig& c) {
            double best = INFINITY;
            for (int i = 0; i < 3; ++i)
                best = std::min(best, run_controller(base.model, c, x0, sim).metrics.wall_clock);
            return best;
        };
        const double t_pd = best_run(*base.find(ControllerVariant::PdSat));
        double qp_min = INFINITY, qp_max = 0.0;
        for (ControllerVariant v : {ControllerVariant::ResClfQp, ControllerVariant::OdClfQp,
                                    ControllerVariant::OdClfCbfQp}) {
            const double t = best_run(*base.find(v));
            qp_min = std::min(qp_min, t);
            qp_max = std::max(qp_max, t);
        }
        double t_ocp = INFINITY;
        for (int i = 0; i < 3; ++i)
            t_ocp = std::min(t_ocp, solve_ocp(base.model, x0, cmp.ocp_T_final, base.ocp.N).wall_clock);
        const bool ok = t_ocp > 2.0 * qp_max && qp_min > t_pd;
        report("wall-clock ordering", ok,
               fmt("OCP %.3f s, QP controllers %.3f-%.3f s, PD %.4f s", t_ocp, qp_min, qp_max, t_pd));
    }

    int failed = 0;
    for (const auto& o : g_outcomes)
        failed += o.pass ? 0 : 1;
    std::printf("%d/%zu criteria passed\n", static_cast<int>(g_outcomes.size()) - failed, g_outcomes.size());
    return failed == 0 ? 0 : 1;
}
