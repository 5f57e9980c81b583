#include "odcbf/dynamics.hpp"

#include <cmath>

namespace odcbf {

Vec9 SpacecraftState::to_vector() const
{
    Vec9 x;
    x << sigma.sigma, omega, h_w;
    return x;
}

SpacecraftState SpacecraftState::from_vector(const Vec9& x, double t)
{
    SpacecraftState s;
    s.sigma = Mrp(x.segment<3>(0));
    s.omega = x.segment<3>(3);
    s.h_w = x.segment<3>(6);
    s.t = t;
    return s;
}

bool SpacecraftState::is_finite() const
{
    return sigma.sigma.allFinite() && omega.allFinite() && h_w.allFinite() && std::isfinite(t);
}

PlantModel PlantModel::reference()
{
    PlantModel m;
    m.J << 1.8140, -0.1185, 0.0275,
           -0.1185, 1.7350, 0.0169,
           0.0275, 0.0169, 3.4320;
    m.u_max = 0.123;
    m.h_w_max = 0.50;
    return m;
}

void PlantModel::validate() const
{
    if (!J.allFinite() || (J - J.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("inertia matrix must be finite and symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(J, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("inertia matrix must be positive definite");
    if (!(u_max > 0.0) || !(h_w_max > 0.0))
        throw std::invalid_argument("torque and momentum limits must be positive");
}

Vec9 drift(const PlantModel& model, const SpacecraftState& s)
{
    Vec9 f;
    f.segment<3>(0) = mrp_kinematics_matrix(s.sigma) * s.omega;
    f.segment<3>(3) = -model.J.ldlt().solve(s.omega.cross(model.J * s.omega + s.h_w));
    f.segment<3>(6).setZero();
    return f;
}

Eigen::Matrix<double, 9, 3> input_matrix(const PlantModel& model)
{
    Eigen::Matrix<double, 9, 3> g = Eigen::Matrix<double, 9, 3>::Zero();
    g.block<3, 3>(3, 0) = model.inertia_inverse();
    g.block<3, 3>(6, 0) = -Mat3::Identity();
    return g;
}

Mat9 drift_jacobian(const PlantModel& model, const SpacecraftState& s)
{
    const Vec3& sig = s.sigma.sigma;
    const Vec3& w = s.omega;
    const Mat3 Jinv = model.inertia_inverse();

    Mat9 A = Mat9::Zero();
    A.block<3, 3>(0, 0) = 0.25 * (-2.0 * w * sig.transpose() - 2.0 * skew(w) + 2.0 * sig.dot(w) * Mat3::Identity()
                                  + 2.0 * sig * w.transpose());
    A.block<3, 3>(0, 3) = mrp_kinematics_matrix(s.sigma);
    A.block<3, 3>(3, 3) = -Jinv * (skew(w) * model.J - skew(model.J * w + s.h_w));
    A.block<3, 3>(3, 6) = -Jinv * skew(w);
    return A;
}

Vec9 state_derivative(const PlantModel& model, const SpacecraftState& s, const Vec3& u, const DisturbanceModel& d)
{
    Vec9 xdot = drift(model, s);
    Vec3 torque = u;
    if (d)
        torque += d(s.t, s);
    xdot.segment<3>(3) += model.J.ldlt().solve(torque);
    xdot.segment<3>(6) -= u;
    return xdot;
}

SpacecraftState rk4_step(const PlantModel& model, const SpacecraftState& s, const Vec3& u,
                         const DisturbanceModel& d, double dt)
{
    if (!(dt > 0.0))
        throw std::invalid_argument("rk4_step: dt must be positive");

    const Vec9 x = s.to_vector();
    auto eval = [&](const Vec9& xi, double ti) {
        return state_derivative(model, SpacecraftState::from_vector(xi, ti), u, d);
    };
    const Vec9 k1 = eval(x, s.t);
    const Vec9 k2 = eval(x + 0.5 * dt * k1, s.t + 0.5 * dt);
    const Vec9 k3 = eval(x + 0.5 * dt * k2, s.t + 0.5 * dt);
    const Vec9 k4 = eval(x + dt * k3, s.t + dt);

    SpacecraftState next = SpacecraftState::from_vector(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), s.t + dt);
    if (!next.is_finite())
        throw IntegrationFailure("rk4_step: non-finite state");
    return next;
}

Vec3 inertial_momentum(const PlantModel& model, const SpacecraftState& s)
{
    return mrp_to_dcm(s.sigma).transpose() * (model.J * s.omega + s.h_w);
}

} // namespace odcbf
