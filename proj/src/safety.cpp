#include "odcbf/safety.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace odcbf {

namespace {

const Mat6& brunovsky_F6()
{
    static const Mat6 F = brunovsky_f(3, 2);
    return F;
}

const Eigen::Matrix<double, 6, 3>& brunovsky_G6()
{
    static const Eigen::Matrix<double, 6, 3> G = brunovsky_g(3, 2);
    return G;
}

CareSolution solve_clf_care(const Mat6& Q, const Mat3& R)
{
    return solve_care(CareProblem{brunovsky_F6(), brunovsky_G6(), Q, R});
}

ClfData make_clf(const Mat6& P, const Mat6& Q, const Mat3& R, double nu, ClfMode mode, const Mat6& S,
                 double residual)
{
    ClfData clf;
    clf.P = P;
    clf.Q = Q;
    clf.R = R;
    clf.nu = nu;
    clf.mode = mode;
    clf.S = S;
    clf.F_s = S * brunovsky_F6() * S.inverse();
    clf.G_s = S * brunovsky_G6();
    clf.care_residual = residual;
    return clf;
}

} // namespace

Mat3 induced_input_weight(const LinearizationData& lin, double nu)
{
    const Mat3 R = nu * (lin.L_bar * lin.L_bar.transpose()).inverse();
    return 0.5 * (R + R.transpose());
}

ClfData build_clf(const LinearizationData& lin, const Mat6& q_weight, double nu)
{
    if (!(nu > 0.0))
        throw std::invalid_argument("build_clf: nu must be positive");
    const Mat3 R = induced_input_weight(lin, nu);
    const CareSolution sol = solve_clf_care(q_weight, R);
    return make_clf(sol.P, q_weight, R, nu, ClfMode::PerStepR, Mat6::Identity(), sol.residual_norm);
}

ClfData build_fixed_clf(const Mat6& q_weight, const Mat3& r_weight, const Mat6& scaling)
{
    const CareSolution sol = solve_clf_care(q_weight, r_weight);
    return make_clf(sol.P, q_weight, r_weight, 1.0, ClfMode::FrozenP, scaling, sol.residual_norm);
}

ClfBuilder::ClfBuilder(const Mat6& q_weight, double nu, ClfMode mode) : q_(q_weight), nu_(nu), mode_(mode)
{
    if (!(nu > 0.0))
        throw std::invalid_argument("ClfBuilder: nu must be positive");
}

ClfData ClfBuilder::build(const LinearizationData& lin)
{
    if (mode_ == ClfMode::PerStepR)
        return build_clf(lin, q_, nu_);

    const Mat3 R = induced_input_weight(lin, nu_);
    if (!frozen_P_) {
        const CareSolution sol = solve_clf_care(q_, R);
        frozen_P_ = sol.P;
        frozen_residual_ = sol.residual_norm;
    }
    return make_clf(*frozen_P_, q_, R, nu_, ClfMode::FrozenP, Mat6::Identity(), frozen_residual_);
}

ClfTerms clf_terms(const ClfData& clf, const Vec6& eta)
{
    const Vec6 es = clf.S * eta;
    const Vec6 P_es = clf.P * es;
    ClfTerms t;
    t.V = es.dot(P_es);
    t.LfV = 2.0 * P_es.dot(clf.F_s * es);
    t.LgV = 2.0 * P_es.transpose() * clf.G_s;
    return t;
}

double decay_w_minnorm(const ClfData& clf, const Vec6& eta)
{
    const Vec6 es = clf.S * eta;
    const Vec3 b = clf.G_s.transpose() * (clf.P * es);
    return es.dot(clf.Q * es) + b.dot(clf.R.llt().solve(b));
}

double decay_w_sqrt(const ClfData& clf, const Vec6& eta)
{
    const ClfTerms t = clf_terms(clf, eta);
    const Vec6 es = clf.S * eta;
    const Vec3 lg = t.LgV.transpose();
    const double radicand = t.LfV * t.LfV + es.dot(clf.Q * es) * lg.dot(clf.R.llt().solve(lg));
    return std::sqrt(std::max(0.0, radicand));
}

double decay_w(const ClfData& clf, const Vec6& eta)
{
    return clf.mode == ClfMode::PerStepR ? decay_w_minnorm(clf, eta) : decay_w_sqrt(clf, eta);
}

double decay_w_res(const ClfData& clf, const Vec6& eta, double epsilon)
{
    if (!(epsilon > 0.0))
        throw std::invalid_argument("decay_w_res: epsilon must be positive");
    Eigen::SelfAdjointEigenSolver<Mat6> qe(clf.Q, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Mat6> pe(clf.P, Eigen::EigenvaluesOnly);
    const double V = clf_terms(clf, eta).V;
    return (1.0 / epsilon) * (qe.eigenvalues().minCoeff() / pe.eigenvalues().maxCoeff()) * V;
}

CbfBounds cbf_bounds(const PlantModel& model, const SpacecraftState& state, double alpha)
{
    if (!(alpha >= 0.0))
        throw std::invalid_argument("cbf_bounds: alpha must be non-negative");
    const double h_max = model.h_w_max;
    if (state.h_w.cwiseAbs().maxCoeff() > h_max + kMomentumTolerance)
        throw SafetyViolation("cbf_bounds: wheel momentum outside its box");

    // B_lo = h_w - h_min, B_hi = h_max - h_w, clipped at zero inside the tolerance band
    const Vec3 B_lo = (state.h_w.array() + h_max).max(0.0).matrix();
    const Vec3 B_hi = (h_max - state.h_w.array()).max(0.0).matrix();
    return CbfBounds{-alpha * B_hi, alpha * B_lo};
}

} // namespace odcbf
