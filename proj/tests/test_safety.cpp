#include <doctest.h>

#include <cmath>
#include <random>

#include "odcbf/safety.hpp"
#include "test_util.hpp"

using namespace odcbf;

namespace {

Mat6 sqrt3_kron_i3()
{
    Mat6 P = Mat6::Zero();
    P.block<3, 3>(0, 0) = std::sqrt(3.0) * Mat3::Identity();
    P.block<3, 3>(3, 3) = std::sqrt(3.0) * Mat3::Identity();
    P.block<3, 3>(0, 3) = Mat3::Identity();
    P.block<3, 3>(3, 0) = Mat3::Identity();
    return P;
}

Vec6 random_eta(std::mt19937_64& rng)
{
    Vec6 e;
    e << testutil::uniform3(rng, -1.0, 1.0), testutil::uniform3(rng, -0.3, 0.3);
    return e;
}

} // namespace

TEST_CASE("induced input weight at rest with unit inertia")
{
    PlantModel m;
    m.J.setIdentity();
    const LinearizationData lin = linearize(m, SpacecraftState{});
    CHECK((lin.L_bar - 0.25 * Mat3::Identity()).norm() < 1e-15);
    CHECK((induced_input_weight(lin, 1.0) - 16.0 * Mat3::Identity()).norm() < 1e-12);
    CHECK((build_clf(lin, Mat6::Identity(), 1.0).R - 16.0 * Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("unit weights give the closed-form Riccati solution")
{
    const ClfData clf = build_fixed_clf(Mat6::Identity(), Mat3::Identity());
    CHECK((clf.P - sqrt3_kron_i3()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("per-step CLF solves the CARE for the current R")
{
    const PlantModel m = PlantModel::reference();
    std::mt19937_64 rng(31);
    for (int i = 0; i < 50; ++i) {
        const LinearizationData lin = linearize(m, testutil::random_state(rng));
        const ClfData clf = build_clf(lin, Mat6::Identity(), 10.0);
        CHECK(clf.mode == ClfMode::PerStepR);
        const CareProblem p{brunovsky_f(3, 2), brunovsky_g(3, 2), clf.Q, clf.R};
        CHECK(care_residual(p, clf.P) <= 1e-9 * (1.0 + clf.Q.norm()));
    }
}

TEST_CASE("frozen-P builder keeps the first solution")
{
    const PlantModel m = PlantModel::reference();
    std::mt19937_64 rng(32);
    ClfBuilder b(Mat6::Identity(), 10.0, ClfMode::FrozenP);
    const ClfData c1 = b.build(linearize(m, testutil::random_state(rng)));
    const ClfData c2 = b.build(linearize(m, testutil::random_state(rng)));
    CHECK(c1.P == c2.P);
    CHECK((c1.R - c2.R).norm() > 0.0);

    ClfBuilder per(Mat6::Identity(), 10.0, ClfMode::PerStepR);
    const ClfData p1 = per.build(linearize(m, testutil::random_state(rng)));
    const ClfData p2 = per.build(linearize(m, testutil::random_state(rng)));
    CHECK((p1.P - p2.P).norm() > 0.0);
}

TEST_CASE("CLF terms")
{
    const PlantModel m = PlantModel::reference();
    const ClfData clf = build_clf(linearize(m, testutil::reference_initial_state()), Mat6::Identity(), 10.0);
    const ClfTerms zero = clf_terms(clf, Vec6::Zero());
    CHECK(zero.V == 0.0);
    CHECK(zero.LfV == 0.0);
    CHECK(zero.LgV.norm() == 0.0);

    std::mt19937_64 rng(33);
    const Mat6 F = brunovsky_f(3, 2);
    const Eigen::Matrix<double, 6, 3> G = brunovsky_g(3, 2);
    for (int i = 0; i < 500; ++i) {
        const Vec6 eta = random_eta(rng);
        const ClfTerms t = clf_terms(clf, eta);
        CHECK(t.V > 0.0);
        CHECK(t.LfV == doctest::Approx(eta.dot((F.transpose() * clf.P + clf.P * F) * eta)).epsilon(1e-12));
        CHECK((t.LgV - 2.0 * eta.transpose() * clf.P * G).norm() < 1e-12 * (1.0 + t.LgV.norm()));
        // Riccati identity
        const Vec3 b = G.transpose() * clf.P * eta;
        const double rhs = b.dot(clf.R.inverse() * b) - eta.dot(clf.Q * eta);
        CHECK(std::abs(t.LfV - rhs) <= 1e-9 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("optimal decay: quadratic and square-root forms agree when the CARE holds")
{
    const PlantModel m = PlantModel::reference();
    std::mt19937_64 rng(34);
    for (int i = 0; i < 200; ++i) {
        const LinearizationData lin = linearize(m, testutil::random_state(rng));
        const ClfData clf = build_clf(lin, Mat6::Identity(), 10.0);
        const Vec6 eta = random_eta(rng);
        const double w = decay_w_minnorm(clf, eta);
        CHECK(decay_w_sqrt(clf, eta) == doctest::Approx(w).epsilon(1e-8));
        CHECK(w >= eta.dot(clf.Q * eta));
        CHECK(decay_w(clf, eta) == w);
    }
    const ClfData clf = build_clf(linearize(m, SpacecraftState{}), Mat6::Identity(), 10.0);
    CHECK(decay_w_minnorm(clf, Vec6::Zero()) == 0.0);
}

TEST_CASE("frozen-P mode breaks the equivalence away from the frozen state")
{
    const PlantModel m = PlantModel::reference();
    std::mt19937_64 rng(35);
    ClfBuilder b(Mat6::Identity(), 10.0, ClfMode::FrozenP);
    b.build(linearize(m, SpacecraftState{}));
    SpacecraftState far;
    far.sigma = Mrp(Vec3(0.6, -0.5, 0.4));
    const ClfData clf = b.build(linearize(m, far));
    const Vec6 eta = random_eta(rng);
    const double gap = std::abs(decay_w_sqrt(clf, eta) - decay_w_minnorm(clf, eta));
    CHECK(gap > 1e-3 * decay_w_minnorm(clf, eta));
    CHECK(decay_w(clf, eta) == decay_w_sqrt(clf, eta));
}

TEST_CASE("fixed decay rate")
{
    const ClfData clf = build_fixed_clf(Mat6::Identity(), Mat3::Identity());
    std::mt19937_64 rng(36);
    const Vec6 eta = random_eta(rng);
    const double V = clf_terms(clf, eta).V;
    CHECK(decay_w_res(clf, eta, 0.2) == doctest::Approx(1.8301 * V).epsilon(1e-4));
    CHECK(decay_w_res(clf, eta, 0.2) == doctest::Approx(V / (0.2 * (std::sqrt(3.0) + 1.0))).epsilon(1e-10));
    CHECK(decay_w_res(clf, eta, 0.4) == doctest::Approx(0.5 * decay_w_res(clf, eta, 0.2)).epsilon(1e-12));
    CHECK(decay_w_res(clf, Vec6::Zero(), 0.2) == 0.0);
    CHECK_THROWS_AS(decay_w_res(clf, eta, 0.0), std::invalid_argument);
}

TEST_CASE("CLF construction errors")
{
    const LinearizationData lin = linearize(PlantModel::reference(), SpacecraftState{});
    CHECK_THROWS_AS(build_clf(lin, Mat6::Identity(), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(ClfBuilder(Mat6::Identity(), -1.0, ClfMode::PerStepR), std::invalid_argument);
}

TEST_CASE("CBF bounds")
{
    const PlantModel m = PlantModel::reference();
    SpacecraftState s;
    CbfBounds b = cbf_bounds(m, s, 0.05);
    CHECK((b.lower - Vec3::Constant(-0.025)).norm() < 1e-15);
    CHECK((b.upper - Vec3::Constant(0.025)).norm() < 1e-15);

    s.h_w = Vec3(0.4, 0.0, -0.4);
    b = cbf_bounds(m, s, 0.05);
    CHECK((b.upper - Vec3(0.045, 0.025, 0.005)).norm() < 1e-15);
    CHECK((b.lower - Vec3(-0.005, -0.025, -0.045)).norm() < 1e-15);

    b = cbf_bounds(m, s, 0.0);
    CHECK(b.lower.norm() == 0.0);
    CHECK(b.upper.norm() == 0.0);

    std::mt19937_64 rng(37);
    for (int i = 0; i < 1000; ++i) {
        s.h_w = testutil::uniform3(rng, -0.5, 0.5);
        b = cbf_bounds(m, s, 1.0);
        CHECK(b.lower.maxCoeff() <= 0.0);
        CHECK(b.upper.minCoeff() >= 0.0);
    }
}

TEST_CASE("CBF bounds outside the box")
{
    const PlantModel m = PlantModel::reference();
    SpacecraftState s;
    s.h_w = Vec3(0.5 + 1e-10, 0.0, 0.0);
    CHECK_NOTHROW(cbf_bounds(m, s, 0.05));
    s.h_w = Vec3(0.0, -0.5 - 1e-6, 0.0);
    CHECK_THROWS_AS(cbf_bounds(m, s, 0.05), SafetyViolation);
    CHECK_THROWS_AS(cbf_bounds(m, SpacecraftState{}, -1.0), std::invalid_argument);
}

TEST_CASE("forward invariance under adversarial admissible torques")
{
    const PlantModel m = PlantModel::reference();
    std::mt19937_64 rng(38);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double dt = 0.01;
    for (int run = 0; run < 50; ++run) {
        const double alpha = 10.0 * unit(rng);  // alpha times the 0.1 s period stays <= 1
        SpacecraftState s = testutil::random_state(rng);
        for (int k = 0; k < 100; ++k) {
            const CbfBounds b = cbf_bounds(m, s, alpha);
            Vec3 u;
            for (int i = 0; i < 3; ++i)
                u[i] = unit(rng) < 0.5 ? b.lower[i] : b.upper[i];
            for (int j = 0; j < 10; ++j) {
                const SpacecraftState next = rk4_step(m, s, u, {}, dt);
                // barrier rates: d/dt (h_max - h_w) = u, d/dt (h_w + h_max) = -u
                CHECK(((m.h_w_max - next.h_w.array()) - (m.h_w_max - s.h_w.array()) - dt * u.array())
                          .abs()
                          .maxCoeff()
                      < 1e-12);
                s = next;
                CHECK(s.h_w.cwiseAbs().maxCoeff() <= m.h_w_max + kMomentumTolerance);
            }
        }
    }
}
