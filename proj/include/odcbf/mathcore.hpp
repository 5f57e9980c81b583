#pragma once

#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

namespace odcbf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

// Modified Rodrigues parameters, sigma = e * tan(phi / 4).
struct Mrp {
    Vec3 sigma = Vec3::Zero();

    Mrp() = default;
    explicit Mrp(const Vec3& s) : sigma(s) {}

    double norm() const { return sigma.norm(); }

    // Switches to the shadow set when |sigma| > 1. Only applied when a state is
    // constructed or sampled; trajectories never switch mid-run.
    Mrp canonical() const;
};

Mat3 skew(const Vec3& v);

// M(sigma) with sigma_dot = M(sigma) * omega.
Mat3 mrp_kinematics_matrix(const Mrp& sigma);

// d/dt M(sigma(t)) along sigma_dot.
Mat3 mrp_kinematics_matrix_dot(const Mrp& sigma, const Vec3& sigma_dot);

// Passive direction cosine matrix [BN] for the attitude sigma.
Mat3 mrp_to_dcm(const Mrp& sigma);

Eigen::Quaterniond mrp_to_quaternion(const Mrp& sigma);
Mrp quaternion_to_mrp(const Eigen::Quaterniond& q);

/// 3-2-1 angles psi = [psi1, psi2, psi3] (rad). The attitude is reached by
/// rotating psi1 about the 3-axis, then psi2 about the 2-axis, then psi3 about
/// the 1-axis, each about the fixed reference axes; the rotation taking the
/// reference frame to the body frame is Rx(psi3) * Ry(psi2) * Rz(psi1). Output
/// is canonical (|sigma| <= 1).
Mrp euler321_to_mrp(const Vec3& psi);

/// Inverse of euler321_to_mrp; psi2 in [-pi/2, pi/2].
Vec3 mrp_to_euler321(const Mrp& sigma);

/// Uniformly distributed rotation (uniform unit quaternion), deterministic per
/// seed, returned as a canonical MRP.
Mrp random_orientation(std::uint64_t seed);

/// Principal rotation angle (rad) in [0, pi] of a canonical MRP.
double rotation_angle(const Mrp& sigma);

// ---------------------------------------------------------------------------
// Continuous-time algebraic Riccati equation
//   F'P + PF + Q - P G R^-1 G' P = 0

class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

struct CareProblem {
    Eigen::MatrixXd F;
    Eigen::MatrixXd G;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
};

struct CareSolution {
    Eigen::MatrixXd P;
    double residual_norm = 0.0;
};

/// Chain-of-integrators pair (F, G) with m channels and relative degree r:
/// F = shift(r) (x) I_m, G = e_r (x) I_m.
Eigen::MatrixXd brunovsky_f(int m, int r);
Eigen::MatrixXd brunovsky_g(int m, int r);

/// Solves A' X + X A = -C (Kronecker form, small dense problems only).
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C);

double care_residual(const CareProblem& problem, const Eigen::MatrixXd& P);

/// Stabilizing solution through the stable invariant subspace of the
/// Hamiltonian, followed by Newton-Kleinman refinement when the residual is
/// above tolerance. Throws SolverFailure if the tolerance cannot be reached.
CareSolution solve_care(const CareProblem& problem);

} // namespace odcbf
