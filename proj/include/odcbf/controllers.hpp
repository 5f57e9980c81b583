#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "odcbf/qp.hpp"
#include "odcbf/safety.hpp"

namespace odcbf {

enum class ControllerVariant { PdSat, ResClfQp, OdClfQp, OdClfCbfQp };

std::string_view to_string(ControllerVariant v);
ControllerVariant parse_variant(std::string_view name);

struct ControlOutput {
    Vec3 u = Vec3::Zero();
    std::optional<double> rho;
    std::optional<double> delta;
    std::optional<int> qp_iterations;
    double solve_time = 0.0;  // s
    QpStatus qp_status = QpStatus::Optimal;
    bool fallback = false;    // QP did not reach optimality, zero torque applied
};

struct ControllerConfig {
    ControllerVariant variant = ControllerVariant::OdClfCbfQp;

    // saturated PD
    double k_p = 0.4;
    double k_d = 0.8;

    // CLF weights
    Mat6 Q = Mat6::Identity();
    double k1 = 0.01;       // RES-CLF scaling of sigma
    double k2 = 0.05;       // RES-CLF scaling of sigma_dot
    double epsilon = 0.2;   // RES-CLF decay
    bool res_scaled_coordinates = false;  // RES-CLF on [k1 sigma; k2 sigma_dot] instead of eta
    double nu = 10.0;       // input penalty shaping R(x)
    ClfMode clf_mode = ClfMode::PerStepR;

    // QP weights
    Mat3 H = Mat3::Identity();
    double p_delta = 100.0;
    double p_rho = 0.1;

    // CBF decay
    double alpha = 0.05;

    /// Tunings used for the comparative study.
    static ControllerConfig defaults(ControllerVariant v);

    void validate() const;
};

class Controller {
public:
    virtual ~Controller() = default;
    virtual ControlOutput compute(const SpacecraftState& state) = 0;
    virtual ControllerVariant variant() const = 0;
};

/// One instance per run: QP-based controllers keep the previous working set
/// and, in FrozenP mode, the Riccati solution of the first state.
std::unique_ptr<Controller> make_controller(const PlantModel& model, const ControllerConfig& config);

/// Always returns zero torque; used for open-loop checks.
std::unique_ptr<Controller> make_zero_controller();

// Single-shot evaluations with a fresh controller instance.
ControlOutput pd_saturated(const SpacecraftState& state, const PlantModel& model, double k_p, double k_d);
ControlOutput res_clf_qp(const SpacecraftState& state, const PlantModel& model, const ControllerConfig& config);
ControlOutput od_clf_qp(const SpacecraftState& state, const PlantModel& model, const ControllerConfig& config);
ControlOutput od_clf_cbf_qp(const SpacecraftState& state, const PlantModel& model, const ControllerConfig& config);

} // namespace odcbf
