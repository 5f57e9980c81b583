#include "odcbf/mathcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

namespace odcbf {

Mrp Mrp::canonical() const
{
    const double s2 = sigma.squaredNorm();
    if (s2 > 1.0)
        return Mrp(-sigma / s2);
    return *this;
}

Mat3 skew(const Vec3& v)
{
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

Mat3 mrp_kinematics_matrix(const Mrp& sigma)
{
    const Vec3& s = sigma.sigma;
    return 0.25 * ((1.0 - s.squaredNorm()) * Mat3::Identity() + 2.0 * skew(s) + 2.0 * s * s.transpose());
}

Mat3 mrp_kinematics_matrix_dot(const Mrp& sigma, const Vec3& sigma_dot)
{
    const Vec3& s = sigma.sigma;
    return 0.25 * (-2.0 * s.dot(sigma_dot) * Mat3::Identity() + 2.0 * skew(sigma_dot)
                   + 2.0 * (sigma_dot * s.transpose() + s * sigma_dot.transpose()));
}

Mat3 mrp_to_dcm(const Mrp& sigma)
{
    const Vec3& s = sigma.sigma;
    const double s2 = s.squaredNorm();
    const Mat3 S = skew(s);
    return Mat3::Identity() + (8.0 * S * S - 4.0 * (1.0 - s2) * S) / ((1.0 + s2) * (1.0 + s2));
}

Eigen::Quaterniond mrp_to_quaternion(const Mrp& sigma)
{
    const Vec3& s = sigma.sigma;
    const double s2 = s.squaredNorm();
    const Vec3 v = 2.0 * s / (1.0 + s2);
    return Eigen::Quaterniond((1.0 - s2) / (1.0 + s2), v.x(), v.y(), v.z());
}

Mrp quaternion_to_mrp(const Eigen::Quaterniond& q_in)
{
    Eigen::Quaterniond q = q_in.normalized();
    if (q.w() < 0.0)
        q.coeffs() = -q.coeffs();
    return Mrp(q.vec() / (1.0 + q.w())).canonical();
}

Mrp euler321_to_mrp(const Vec3& psi)
{
    const Eigen::Quaterniond q = Eigen::AngleAxisd(psi[2], Vec3::UnitX())
                                 * Eigen::AngleAxisd(psi[1], Vec3::UnitY())
                                 * Eigen::AngleAxisd(psi[0], Vec3::UnitZ());
    return quaternion_to_mrp(q);
}

Vec3 mrp_to_euler321(const Mrp& sigma)
{
    // R = Rx(c) Ry(b) Rz(a): R(0,2) = sin b, R(0,:2) ~ (cos a, -sin a), R(1:,2) ~ (-sin c, cos c)
    const Mat3 R = mrp_to_quaternion(sigma).toRotationMatrix();
    const double b = std::asin(std::clamp(R(0, 2), -1.0, 1.0));
    const double a = std::atan2(-R(0, 1), R(0, 0));
    const double c = std::atan2(-R(1, 2), R(2, 2));
    return Vec3(a, b, c);
}

Mrp random_orientation(std::uint64_t seed)
{
    // Shoemake's subgroup algorithm
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u1 = unit(rng);
    const double u2 = unit(rng);
    const double u3 = unit(rng);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double a = std::sqrt(1.0 - u1);
    const double b = std::sqrt(u1);
    const Eigen::Quaterniond q(b * std::cos(two_pi * u3), a * std::sin(two_pi * u2),
                               a * std::cos(two_pi * u2), b * std::sin(two_pi * u3));
    return quaternion_to_mrp(q);
}

double rotation_angle(const Mrp& sigma)
{
    return 4.0 * std::atan(sigma.norm());
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd brunovsky_f(int m, int r)
{
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(m * r, m * r);
    for (int i = 0; i + 1 < r; ++i)
        F.block(i * m, (i + 1) * m, m, m).setIdentity();
    return F;
}

Eigen::MatrixXd brunovsky_g(int m, int r)
{
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m * r, m);
    G.bottomRows(m).setIdentity();
    return G;
}

double care_residual(const CareProblem& p, const Eigen::MatrixXd& P)
{
    const Eigen::MatrixXd Rinv_Gt = p.R.llt().solve(p.G.transpose());
    const Eigen::MatrixXd res = p.F.transpose() * P + P * p.F + p.Q - P * p.G * Rinv_Gt * P;
    return res.norm();
}

namespace {

void check_care_problem(const CareProblem& p)
{
    const auto n = p.F.rows();
    if (p.F.cols() != n || p.G.rows() != n || p.Q.rows() != n || p.Q.cols() != n
        || p.R.rows() != p.G.cols() || p.R.cols() != p.G.cols())
        throw std::invalid_argument("solve_care: inconsistent dimensions");

    constexpr double tol = 1e-10;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qe(0.5 * (p.Q + p.Q.transpose()), Eigen::EigenvaluesOnly);
    if (qe.eigenvalues().minCoeff() < -tol)
        throw std::invalid_argument("solve_care: Q is not positive semidefinite");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> re(0.5 * (p.R + p.R.transpose()), Eigen::EigenvaluesOnly);
    if (re.eigenvalues().minCoeff() <= tol)
        throw std::invalid_argument("solve_care: R is not positive definite");
}

} // namespace

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C)
{
    const auto n = A.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd K(n * n, n * n);
    // vec(A'X) = (I (x) A') vec(X), vec(XA) = (A' (x) I) vec(X)
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            K.block(i * n, j * n, n, n) = I(i, j) * A.transpose() + A(j, i) * I;
    const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(C.data(), n * n);
    const Eigen::VectorXd x = K.partialPivLu().solve(rhs);
    Eigen::MatrixXd X = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
    return 0.5 * (X + X.transpose());
}

CareSolution solve_care(const CareProblem& p)
{
    check_care_problem(p);
    const auto n = p.F.rows();
    const double tol = 1e-9 * (1.0 + p.Q.norm());

    const Eigen::MatrixXd Rinv_Gt = p.R.llt().solve(p.G.transpose());
    const Eigen::MatrixXd S = p.G * Rinv_Gt;

    Eigen::MatrixXd Z(2 * n, 2 * n);
    Z << p.F, -S,
         -p.Q, -p.F.transpose();

    Eigen::ComplexEigenSolver<Eigen::MatrixXd> es(Z);
    if (es.info() != Eigen::Success)
        throw SolverFailure("solve_care: Hamiltonian eigendecomposition failed", INFINITY);

    Eigen::MatrixXcd U(2 * n, n);
    Eigen::Index cols = 0;
    for (Eigen::Index i = 0; i < 2 * n; ++i) {
        if (es.eigenvalues()[i].real() < 0.0 && cols < n)
            U.col(cols++) = es.eigenvectors().col(i);
    }
    if (cols != n)
        throw SolverFailure("solve_care: Hamiltonian has eigenvalues on the imaginary axis", INFINITY);

    const Eigen::MatrixXcd U1 = U.topRows(n);
    const Eigen::MatrixXcd U2 = U.bottomRows(n);
    Eigen::MatrixXd P = (U1.transpose().partialPivLu().solve(U2.transpose())).transpose().real();
    P = 0.5 * (P + P.transpose());

    double residual = care_residual(p, P);

    // Newton-Kleinman refinement
    for (int iter = 0; iter < 20 && residual > 0.01 * tol; ++iter) {
        const Eigen::MatrixXd K = Rinv_Gt * P;
        const Eigen::MatrixXd Ac = p.F - p.G * K;
        const Eigen::MatrixXd next = solve_lyapunov(Ac, p.Q + K.transpose() * p.R * K);
        const double next_residual = care_residual(p, next);
        if (!(next_residual < residual))
            break;
        P = next;
        residual = next_residual;
    }

    if (!(residual <= tol))
        throw SolverFailure("solve_care: residual above tolerance", residual);
    return CareSolution{P, residual};
}

} // namespace odcbf
