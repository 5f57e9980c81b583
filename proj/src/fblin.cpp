#include "odcbf/fblin.hpp"

namespace odcbf {

LinearizationData linearize(const PlantModel& model, const SpacecraftState& s)
{
    const Mat3 M = mrp_kinematics_matrix(s.sigma);
    const Mat3 Jinv = model.inertia_inverse();
    const Vec3 sigma_dot = M * s.omega;
    const Mat3 M_dot = mrp_kinematics_matrix_dot(s.sigma, sigma_dot);

    LinearizationData lin;
    lin.eta << s.sigma.sigma, sigma_dot;
    lin.L_bar = M * Jinv;
    lin.mu_bar = M_dot * s.omega - M * Jinv * s.omega.cross(model.J * s.omega + s.h_w);
    lin.u_star = -lin.L_bar.partialPivLu().solve(lin.mu_bar);
    return lin;
}

Vec3 realize_input(const LinearizationData& lin, const Vec3& mu)
{
    return lin.u_star + lin.L_bar.partialPivLu().solve(mu);
}

} // namespace odcbf
