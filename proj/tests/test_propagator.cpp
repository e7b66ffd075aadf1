#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "wavecoh/oracle.hpp"

using namespace wavecoh;
namespace os = oracle_support;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v) out(k++) = x;
    return out;
}

PotentialModel harmonic(double omega, double mass = 1.0) {
    Params p;
    p.set("omega", omega);
    p.set("mass", mass);
    return builtin_model("harmonic", p);
}

PotentialModel quartic(double omega, double g) {
    Params p;
    p.set("omega", omega);
    p.set("g", g);
    return builtin_model("quartic", p);
}

GaussianWavepacket packet_1d(double q, double p, Complex a, double hbar = 1.0) {
    return normalized(vec({q}), vec({p}), ComplexMatrix::Constant(1, 1, a), hbar);
}

}  // namespace

TEST(Propagate, FreeParticleCenter) {
    const auto g0 = packet_1d(0.0, 1.0, Complex(0, 0.5));
    const auto traj = propagate(g0, free_model(1), vec({1.0}), 2.0, 0.01);
    EXPECT_EQ(traj.size(), 201u);
    EXPECT_NEAR(traj.back().q(0), 2.0, 1e-13);
    EXPECT_NEAR(traj.back().p(0), 1.0, 1e-15);
    EXPECT_NEAR(traj.back().t, 2.0, 1e-15);
}

TEST(Propagate, FreeParticleMatchesClosedFormPacket) {
    const auto g0 = packet_1d(-0.5, 0.8, Complex(0.1, 0.6));
    const auto traj = propagate(g0, free_model(1), vec({1.3}), 3.0, 0.01);
    const auto gt = assemble(traj.back(), 1.0);
    const os::Gauss1 ref =
        os::free_evolved({g0.q()(0), g0.p()(0), g0.A()(0, 0), g0.s(), 1.0}, 1.3, 3.0);
    EXPECT_NEAR(std::abs(gt.A()(0, 0) - ref.a), 0.0, 1e-10);
    EXPECT_NEAR(std::abs(gt.s() - ref.s), 0.0, 1e-10);
}

TEST(Propagate, FreeParticlePhaseMatchesGridOracle) {
    const auto g0 = packet_1d(0.0, 0.5, Complex(0.0, 0.5));
    const double t = 1.7;
    const auto gt = assemble(propagate(g0, free_model(1), vec({1.0}), t, 0.01).back(), 1.0);
    const GridAxis axis{512, -9.0, 13.0};
    const auto psi = split_operator_propagate(sample(g0, {axis}), free_model(1), t, 0.01);
    const Complex o = psi.inner(gt);
    EXPECT_NEAR(std::abs(o), 1.0, 1e-9);
    EXPECT_NEAR(std::arg(o), 0.0, 1e-6);
}

TEST(Propagate, HarmonicCoherentStateIsStationaryInWidth) {
    const double omega = 1.0;
    const auto g0 = coherent(vec({0.7}), vec({-0.4}), vec({omega}), 1.0);
    const auto traj = propagate(g0, harmonic(omega), vec({1.0}), 2.0 * kPi, 2.0 * kPi / 1000.0);
    for (const auto& st : traj.samples) {
        const auto g = assemble(st, 1.0);
        ASSERT_NEAR(std::abs(g.A()(0, 0) - g0.A()(0, 0)), 0.0, 1e-9);
        ASSERT_LT(std::abs(st.q(0) - (0.7 * std::cos(st.t) - 0.4 * std::sin(st.t))), 1e-8);
        ASSERT_NEAR(norm_squared(g), 1.0, 1e-8);
    }
}

TEST(Propagate, HarmonicPeriodPhase) {
    // After one period a coherent state returns with phase exp(-i omega T / 2) = -1.
    const double omega = 1.3;
    const double period = 2.0 * kPi / omega;
    const auto g0 = coherent(vec({0.9}), vec({0.3}), vec({omega}), 1.0);
    const auto traj = propagate(g0, harmonic(omega), vec({1.0}), period, period / 1000.0);
    const auto g = assemble(traj.back(), 1.0);
    EXPECT_NEAR(std::abs(overlap(g0, g) + 1.0), 0.0, 1e-8);
    EXPECT_NEAR(traj.back().S, 0.0, 1e-9);
    EXPECT_NEAR(std::abs(traj.back().logdetZ - Complex(0, 2.0 * kPi)), 0.0, 1e-9);
}

TEST(Propagate, AssembleRoundTrip) {
    const auto g0 = packet_1d(0.3, 0.2, Complex(0.4, 0.9));
    const auto g = assemble(initial_state(g0), 1.0);
    EXPECT_EQ(g.q(), g0.q());
    EXPECT_NEAR(std::abs(g.A()(0, 0) - g0.A()(0, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(g.s() - g0.s()), 0.0, 1e-15);
}

TEST(Propagate, QuarticAgainstGridOracle) {
    const auto model = quartic(1.0, 0.002);
    const auto g0 = coherent(vec({1.0}), vec({0.0}), vec({1.0}), 1.0);
    const double t = 2.0 * kPi;
    const auto gt = assemble(propagate(g0, model, vec({1.0}), t, t / 2000.0).back(), 1.0);
    const auto psi = split_operator_propagate(sample(g0, {GridAxis{512, -11.0, 11.0}}), model, t, t / 2000.0);
    EXPECT_GT(std::abs(psi.inner(gt)), 0.999);
    EXPECT_LT(std::abs(norm_squared(gt) - 1.0), 1e-4);
}

TEST(Propagate, FidelityDeficitShrinksWithHbar) {
    const auto model = quartic(1.0, 0.05);
    const double t = 2.0 * kPi;
    double previous = 1.0;
    for (double hbar : {1.0, 0.5, 0.25}) {
        const auto g0 = coherent(vec({1.0}), vec({0.0}), vec({1.0}), hbar);
        const auto gt = assemble(propagate(g0, model, vec({1.0}), t, t / 2000.0).back(), hbar);
        const double extent = 15.5 * std::sqrt(0.5 * hbar);
        const auto psi =
            split_operator_propagate(sample(g0, {GridAxis{512, -extent, extent}}), model, t, t / 2000.0);
        const double deficit = 1.0 - std::abs(psi.inner(gt));
        EXPECT_LT(deficit, previous) << "hbar " << hbar;
        previous = deficit;
    }
}

TEST(Propagate, EnergyConservation) {
    const auto model = quartic(1.0, 0.1);
    const auto g0 = coherent(vec({1.5}), vec({0.5}), vec({1.0}), 1.0);
    const double t = 4.0 * kPi;
    const auto traj = propagate(g0, model, vec({1.0}), t, default_dt(model, t));
    const double e0 = classical_energy(traj.front(), model, vec({1.0}));
    for (const auto& st : traj.samples)
        ASSERT_LT(std::abs(classical_energy(st, model, vec({1.0})) - e0) / e0, 1e-7);
}

TEST(Propagate, Errors) {
    const auto g0 = packet_1d(0.0, 0.0, Complex(0, 0.5));
    EXPECT_THROW(propagate(g0, free_model(1), vec({1.0}), 1.0, 0.3), ContractError);
    EXPECT_THROW(propagate(g0, free_model(1), vec({1.0}), 1.0, -0.1), ContractError);
    EXPECT_THROW(propagate(g0, free_model(2), vec({1.0}), 1.0, 0.1), ContractError);
    Params p;
    p.set("height", 1.0);
    p.set("width", 1.0);
    const auto bump = builtin_model("gaussian_bump", p);
    const PotentialModel broken("broken", 1, [](const Vector&, double) { return 0.0; },
                                [](const Vector&, double) { return Vector::Constant(1, std::nan("")); },
                                [](const Vector&, double) { return Matrix::Zero(1, 1).eval(); });
    EXPECT_THROW(propagate(g0, broken, vec({1.0}), 1.0, 0.1), ModelError);
    (void)bump;
}

TEST(DefaultDt, DividesHorizon) {
    const double dt = default_dt(harmonic(3.0), 5.0);
    EXPECT_LE(dt, 2.0 * kPi / 3.0 / 200.0 + 1e-15);
    const double n = 5.0 / dt;
    EXPECT_NEAR(n, std::round(n), 1e-9);
    EXPECT_NEAR(default_dt(free_model(1), 2.0), 0.01, 1e-15);
}

TEST(Stability, FreeParticle) {
    const auto g0 = packet_1d(0.0, 1.0, Complex(0, 0.5));
    const auto traj = propagate(g0, free_model(1), vec({2.0}), 3.0, 0.01);
    const auto stabs = stability(traj, free_model(1));
    ASSERT_EQ(stabs.size(), traj.size());
    for (const auto& s : stabs) {
        Matrix ref(2, 2);
        ref << 1.0, 0.0, s.t / 2.0, 1.0;
        ASSERT_NEAR((s.M - ref).cwiseAbs().maxCoeff(), 0.0, 1e-10);
    }
}

TEST(Stability, HarmonicClosedFormAndSymplectic) {
    const double w = 1.7, m = 0.8;
    const auto g0 = coherent(vec({0.4}), vec({0.1}), vec({m * w}), 1.0);
    const auto traj = propagate(g0, harmonic(w, m), vec({m}), 5.0, 0.005);
    for (const auto& s : stability(traj, harmonic(w, m))) {
        Matrix ref(2, 2);
        ref << std::cos(w * s.t), -m * w * std::sin(w * s.t), std::sin(w * s.t) / (m * w), std::cos(w * s.t);
        ASSERT_NEAR((s.M - ref).cwiseAbs().maxCoeff(), 0.0, 1e-8);
        ASSERT_LT(symplectic_defect(s.M), 1e-7);
        ASSERT_NEAR(s.M.determinant(), 1.0, 1e-8);
    }
}

TEST(Stability, AnharmonicSymplectic) {
    Params p;
    p.set("omega", std::vector<double>{1.0, 1.4});
    p.set("g", std::vector<double>{0.1, 0.05});
    const auto model = builtin_model("quartic", p);
    ComplexMatrix a = ComplexMatrix::Zero(2, 2);
    a(0, 0) = Complex(0, 0.5);
    a(1, 1) = Complex(0, 0.7);
    const auto g0 = normalized(vec({1.0, -0.5}), vec({0.2, 0.4}), a, 1.0);
    const auto traj = propagate(g0, model, vec({1.0, 1.0}), 10.0, 0.01);
    const auto stabs = stability(traj, model);
    for (const auto& s : stabs) {
        ASSERT_LT(symplectic_defect(s.M), 1e-7);
        ASSERT_NEAR(s.M.determinant(), 1.0, 1e-8);
    }
    EXPECT_NEAR((stabs.front().M - Matrix::Identity(4, 4)).norm(), 0.0, 0.0);
    EXPECT_THROW(stability(traj, harmonic(1.0)), ContractError);
}

TEST(Join, MatchesJointPropagation) {
    const auto sys = harmonic(1.0);
    const auto bath = harmonic(1.6);
    const auto a = coherent(vec({1.0}), vec({0.0}), vec({1.0}), 1.0);
    const auto b = packet_1d(-0.3, 0.5, Complex(0.2, 0.6));
    const auto ta = propagate(a, sys, vec({1.0}), 3.0, 0.01);
    const auto tb = propagate(b, bath, vec({1.0}), 3.0, 0.01);
    const auto joined = join(ta, tb);
    const auto direct = propagate(tensor_product(a, b), direct_sum(sys, bath), vec({1.0, 1.0}), 3.0, 0.01);
    const auto gj = assemble(joined.back(), 1.0);
    const auto gd = assemble(direct.back(), 1.0);
    EXPECT_NEAR(std::abs(overlap(gj, gd) - 1.0), 0.0, 1e-10);
    const auto sj = join(stability(ta, sys), stability(tb, bath));
    const auto sd = stability(direct, direct_sum(sys, bath));
    EXPECT_NEAR((sj.back().M - sd.back().M).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}
