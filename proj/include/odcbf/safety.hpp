#pragma once

#include <optional>
#include <stdexcept>

#include "odcbf/fblin.hpp"

namespace odcbf {

enum class ClfMode {
    PerStepR,  // R(x) = nu (L_bar L_bar')^-1, CARE re-solved at every call
    FrozenP,   // P solved once at the first state and reused
};

// Quadratic CLF V = eta_s' P eta_s on (possibly scaled) transverse coordinates
// eta_s = S eta. With S = I the scaled pair (F_s, G_s) is the Brunovsky pair.
struct ClfData {
    Mat6 P = Mat6::Identity();
    Mat6 Q = Mat6::Identity();
    Mat3 R = Mat3::Identity();
    double nu = 1.0;
    ClfMode mode = ClfMode::PerStepR;

    Mat6 S = Mat6::Identity();
    Mat6 F_s;
    Eigen::Matrix<double, 6, 3> G_s;
    double care_residual = 0.0;
};

struct ClfTerms {
    double V = 0.0;
    double LfV = 0.0;
    Eigen::RowVector3d LgV = Eigen::RowVector3d::Zero();  // with respect to mu
};

/// Input weight on mu induced by a uniform weight nu on u.
Mat3 induced_input_weight(const LinearizationData& lin, double nu);

/// Per-step construction: R from the current L_bar, P from the CARE.
ClfData build_clf(const LinearizationData& lin, const Mat6& q_weight, double nu);

/// Fixed (Q, R) pair with optional coordinate scaling, for RES-CLF style designs.
ClfData build_fixed_clf(const Mat6& q_weight, const Mat3& r_weight, const Mat6& scaling = Mat6::Identity());

/// Holds the CLF weights across a run. In FrozenP mode the first build() solves
/// the CARE and later calls keep that P while R follows the state.
class ClfBuilder {
public:
    ClfBuilder(const Mat6& q_weight, double nu, ClfMode mode);

    ClfData build(const LinearizationData& lin);
    ClfMode mode() const { return mode_; }

private:
    Mat6 q_;
    double nu_;
    ClfMode mode_;
    std::optional<Mat6> frozen_P_;
    double frozen_residual_ = 0.0;
};

ClfTerms clf_terms(const ClfData& clf, const Vec6& eta);

/// eta' (Q + P G R^-1 G' P) eta.
double decay_w_minnorm(const ClfData& clf, const Vec6& eta);

/// sqrt(LfV^2 + (eta' Q eta) LgV R^-1 LgV'); equal to decay_w_minnorm when P
/// solves the CARE for the stored R.
double decay_w_sqrt(const ClfData& clf, const Vec6& eta);

/// Decay rate used by the optimal-decay controllers: the closed quadratic form
/// in PerStepR mode, the square-root form in FrozenP mode.
double decay_w(const ClfData& clf, const Vec6& eta);

/// (1/epsilon) (lambda_min(Q) / lambda_max(P)) V.
double decay_w_res(const ClfData& clf, const Vec6& eta, double epsilon);

// ---------------------------------------------------------------------------

class SafetyViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Componentwise torque interval lower <= u <= upper that keeps the wheel
// momentum box forward invariant.
struct CbfBounds {
    Vec3 lower = Vec3::Zero();
    Vec3 upper = Vec3::Zero();
};

inline constexpr double kMomentumTolerance = 1e-9;

/// lower = -alpha (h_max - h_w), upper = alpha (h_w - h_min). Throws
/// SafetyViolation when h_w is outside the box by more than kMomentumTolerance.
CbfBounds cbf_bounds(const PlantModel& model, const SpacecraftState& state, double alpha);

} // namespace odcbf
