#pragma once

#include <functional>
#include <stdexcept>

#include "odcbf/mathcore.hpp"

namespace odcbf {

struct SpacecraftState {
    Mrp sigma;
    Vec3 omega = Vec3::Zero();  // rad/s, body frame
    Vec3 h_w = Vec3::Zero();    // N m s, wheel momentum
    double t = 0.0;             // s

    Vec9 to_vector() const;
    static SpacecraftState from_vector(const Vec9& x, double t = 0.0);
    bool is_finite() const;
};

// Inertia plus symmetric box limits on wheel torque and wheel momentum.
struct PlantModel {
    Mat3 J = Mat3::Identity();
    double u_max = 0.123;
    double h_w_max = 0.5;

    // Reference spacecraft.
    static PlantModel reference();

    Mat3 inertia_inverse() const { return J.inverse(); }
    void validate() const;
};

// External torque d(t, x) in the body frame; empty means zero.
using DisturbanceModel = std::function<Vec3(double, const SpacecraftState&)>;

class IntegrationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// f(x) of the input-affine form xdot = f(x) + g(x) u.
Vec9 drift(const PlantModel& model, const SpacecraftState& state);

/// Constant g = [0; J^-1; -I].
Eigen::Matrix<double, 9, 3> input_matrix(const PlantModel& model);

/// df/dx, used by the trajectory optimizer's adjoint pass.
Mat9 drift_jacobian(const PlantModel& model, const SpacecraftState& state);

/// Full right-hand side including the disturbance torque.
Vec9 state_derivative(const PlantModel& model, const SpacecraftState& state, const Vec3& u,
                      const DisturbanceModel& d = {});

/// One classical RK4 step with u held constant. Throws IntegrationFailure on a
/// non-finite result.
SpacecraftState rk4_step(const PlantModel& model, const SpacecraftState& state, const Vec3& u,
                         const DisturbanceModel& d, double dt);

/// Total angular momentum expressed in the inertial frame, [NB](J omega + h_w).
Vec3 inertial_momentum(const PlantModel& model, const SpacecraftState& state);

} // namespace odcbf
