#include "odcbf/controllers.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace odcbf {

std::string_view to_string(ControllerVariant v)
{
    switch (v) {
    case ControllerVariant::PdSat: return "pd-sat";
    case ControllerVariant::ResClfQp: return "res-clf-qp";
    case ControllerVariant::OdClfQp: return "od-clf-qp";
    case ControllerVariant::OdClfCbfQp: return "od-clf-cbf-qp";
    }
    return "unknown";
}

ControllerVariant parse_variant(std::string_view name)
{
    for (auto v : {ControllerVariant::PdSat, ControllerVariant::ResClfQp, ControllerVariant::OdClfQp,
                   ControllerVariant::OdClfCbfQp}) {
        if (to_string(v) == name)
            return v;
    }
    throw std::invalid_argument("unknown controller variant '" + std::string(name) + "'");
}

ControllerConfig ControllerConfig::defaults(ControllerVariant v)
{
    ControllerConfig c;
    c.variant = v;
    if (v == ControllerVariant::ResClfQp)
        c.clf_mode = ClfMode::FrozenP;
    return c;
}

void ControllerConfig::validate() const
{
    auto positive = [](double x, const char* name) {
        if (!(x > 0.0) || !std::isfinite(x))
            throw std::invalid_argument(std::string("controller gain '") + name + "' must be positive");
    };
    auto pd = [](const auto& m, const char* name) {
        using M = std::decay_t<decltype(m)>;
        Eigen::SelfAdjointEigenSolver<M> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
        if (!m.allFinite() || es.eigenvalues().minCoeff() <= 0.0)
            throw std::invalid_argument(std::string("controller weight '") + name + "' must be positive definite");
    };

    switch (variant) {
    case ControllerVariant::PdSat:
        positive(k_p, "k_p");
        positive(k_d, "k_d");
        break;
    case ControllerVariant::ResClfQp:
        pd(Q, "Q");
        pd(H, "H");
        positive(k1, "k1");
        positive(k2, "k2");
        positive(epsilon, "epsilon");
        positive(p_delta, "p_delta");
        break;
    case ControllerVariant::OdClfCbfQp:
        if (!(alpha >= 0.0) || !std::isfinite(alpha))
            throw std::invalid_argument("controller gain 'alpha' must be non-negative");
        [[fallthrough]];
    case ControllerVariant::OdClfQp:
        pd(Q, "Q");
        pd(H, "H");
        positive(nu, "nu");
        positive(p_delta, "p_delta");
        positive(p_rho, "p_rho");
        break;
    }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

class ZeroController final : public Controller {
public:
    ControlOutput compute(const SpacecraftState&) override { return {}; }
    ControllerVariant variant() const override { return ControllerVariant::PdSat; }
};

class PdController final : public Controller {
public:
    PdController(const PlantModel& model, const ControllerConfig& cfg) : model_(model), cfg_(cfg) {}

    ControlOutput compute(const SpacecraftState& s) override
    {
        const auto start = Clock::now();
        ControlOutput out;
        const Vec3 raw = -cfg_.k_p * s.sigma.sigma - cfg_.k_d * s.omega;
        out.u = raw.cwiseMax(-model_.u_max).cwiseMin(model_.u_max);
        out.solve_time = seconds_since(start);
        return out;
    }
    ControllerVariant variant() const override { return ControllerVariant::PdSat; }

private:
    PlantModel model_;
    ControllerConfig cfg_;
};

// Shared QP plumbing: solve from the analytic witness, fall back to zero torque.
ControlOutput finish_qp(ActiveSetSolver& solver, const QpProblem& qp, const Eigen::VectorXd& witness,
                        ControllerQpLayout layout)
{
    ControlOutput out;
    const QpSolution sol = solver.solve_from(qp, witness, true);
    out.qp_status = sol.status;
    out.qp_iterations = sol.iterations;
    if (sol.status != QpStatus::Optimal) {
        out.fallback = true;
        out.u.setZero();
        return out;
    }
    out.u = sol.z.head<3>();
    if (layout.with_rho)
        out.rho = sol.z[3];
    out.delta = sol.z[layout.delta_index()];
    return out;
}

class ResClfQpController final : public Controller {
public:
    ResClfQpController(const PlantModel& model, const ControllerConfig& cfg) : model_(model), cfg_(cfg)
    {
        Mat6 S = Mat6::Identity();
        if (cfg.res_scaled_coordinates) {
            S.topLeftCorner<3, 3>() = cfg.k1 * Mat3::Identity();
            S.bottomRightCorner<3, 3>() = cfg.k2 * Mat3::Identity();
        }
        clf_ = build_fixed_clf(cfg.Q, Mat3::Identity(), S);
    }

    ControlOutput compute(const SpacecraftState& s) override
    {
        const auto start = Clock::now();
        const LinearizationData lin = linearize(model_, s);
        const ClfTerms terms = clf_terms(clf_, lin.eta);
        const double W = decay_w_res(clf_, lin.eta, cfg_.epsilon);
        const ControllerQpLayout layout{false, false};
        const ControllerQpWeights weights{cfg_.H, cfg_.p_rho, cfg_.p_delta};
        const QpProblem qp = assemble_controller_qp(lin, terms, W, std::nullopt, model_.u_max, weights, layout);
        ControlOutput out = finish_qp(solver_, qp, controller_qp_witness(lin, terms, W, layout), layout);
        out.solve_time = seconds_since(start);
        return out;
    }
    ControllerVariant variant() const override { return ControllerVariant::ResClfQp; }

private:
    PlantModel model_;
    ControllerConfig cfg_;
    ClfData clf_;
    ActiveSetSolver solver_;
};

class OdClfQpController final : public Controller {
public:
    OdClfQpController(const PlantModel& model, const ControllerConfig& cfg, bool with_cbf)
        : model_(model), cfg_(cfg), with_cbf_(with_cbf), builder_(cfg.Q, cfg.nu, cfg.clf_mode)
    {
    }

    ControlOutput compute(const SpacecraftState& s) override
    {
        const auto start = Clock::now();
        std::optional<CbfBounds> cbf;
        if (with_cbf_)
            cbf = cbf_bounds(model_, s, cfg_.alpha);
        const LinearizationData lin = linearize(model_, s);
        const ClfData clf = builder_.build(lin);
        const ClfTerms terms = clf_terms(clf, lin.eta);
        const double W = decay_w(clf, lin.eta);
        const ControllerQpLayout layout{true, with_cbf_};
        const ControllerQpWeights weights{cfg_.H, cfg_.p_rho, cfg_.p_delta};
        const QpProblem qp = assemble_controller_qp(lin, terms, W, cbf, model_.u_max, weights, layout);
        ControlOutput out = finish_qp(solver_, qp, controller_qp_witness(lin, terms, W, layout), layout);
        out.solve_time = seconds_since(start);
        return out;
    }
    ControllerVariant variant() const override
    {
        return with_cbf_ ? ControllerVariant::OdClfCbfQp : ControllerVariant::OdClfQp;
    }

private:
    PlantModel model_;
    ControllerConfig cfg_;
    bool with_cbf_;
    ClfBuilder builder_;
    ActiveSetSolver solver_;
};

} // namespace

std::unique_ptr<Controller> make_controller(const PlantModel& model, const ControllerConfig& config)
{
    config.validate();
    switch (config.variant) {
    case ControllerVariant::PdSat: return std::make_unique<PdController>(model, config);
    case ControllerVariant::ResClfQp: return std::make_unique<ResClfQpController>(model, config);
    case ControllerVariant::OdClfQp: return std::make_unique<OdClfQpController>(model, config, false);
    case ControllerVariant::OdClfCbfQp: return std::make_unique<OdClfQpController>(model, config, true);
    }
    throw std::invalid_argument("make_controller: unknown variant");
}

std::unique_ptr<Controller> make_zero_controller()
{
    return std::make_unique<ZeroController>();
}

ControlOutput pd_saturated(const SpacecraftState& state, const PlantModel& model, double k_p, double k_d)
{
    ControllerConfig c = ControllerConfig::defaults(ControllerVariant::PdSat);
    c.k_p = k_p;
    c.k_d = k_d;
    return make_controller(model, c)->compute(state);
}

namespace {

ControlOutput single_shot(const SpacecraftState& state, const PlantModel& model, ControllerConfig config,
                          ControllerVariant v)
{
    config.variant = v;
    return make_controller(model, config)->compute(state);
}

} // namespace

ControlOutput res_clf_qp(const SpacecraftState& state, const PlantModel& model, const ControllerConfig& config)
{
    return single_shot(state, model, config, ControllerVariant::ResClfQp);
}

ControlOutput od_clf_qp(const SpacecraftState& state, const PlantModel& model, const ControllerConfig& config)
{
    return single_shot(state, model, config, ControllerVariant::OdClfQp);
}

ControlOutput od_clf_cbf_qp(const SpacecraftState& state, const PlantModel& model, const ControllerConfig& config)
{
    return single_shot(state, model, config, ControllerVariant::OdClfCbfQp);
}

} // namespace odcbf
