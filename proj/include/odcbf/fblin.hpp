#pragma once

#include "odcbf/dynamics.hpp"

namespace odcbf {

// Input-output linearization of the attitude channel with output y = sigma
// (relative degree 2):
//   sigma_ddot = mu_bar(x) + L_bar(x) u
struct LinearizationData {
    Vec6 eta = Vec6::Zero();        // [sigma; sigma_dot]
    Mat3 L_bar = Mat3::Identity();  // decoupling matrix M(sigma) J^-1
    Vec3 mu_bar = Vec3::Zero();     // drift term of sigma_ddot
    Vec3 u_star = Vec3::Zero();     // feedforward -L_bar^-1 mu_bar
};

LinearizationData linearize(const PlantModel& model, const SpacecraftState& state);

/// u = u* + L_bar^-1 mu, so that sigma_ddot = mu.
Vec3 realize_input(const LinearizationData& lin, const Vec3& mu);

} // namespace odcbf
