#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "wavecoh/wavecore.hpp"

using namespace wavecoh;
namespace os = oracle_support;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v) out(k++) = x;
    return out;
}

ComplexMatrix scalar_width(Complex a) { return ComplexMatrix::Constant(1, 1, a); }

GaussianWavepacket packet_1d(double q, double p, Complex a, double hbar = 1.0) {
    return normalized(vec({q}), vec({p}), scalar_width(a), hbar);
}

os::Gauss1 explicit_1d(const GaussianWavepacket& g) {
    return {g.q()(0), g.p()(0), g.A()(0, 0), g.s(), g.hbar()};
}

}  // namespace

TEST(Normalized, UnitNormFromGridQuadrature) {
    for (Complex a : {Complex(0, 0.5), Complex(1.0, 0.5), Complex(-0.3, 2.0)}) {
        const auto g = packet_1d(0.3, -0.7, a);
        EXPECT_NEAR(norm_squared(g), 1.0, 1e-10);
        EXPECT_DOUBLE_EQ(g.s().real(), 0.0);
        const auto f = explicit_1d(g);
        EXPECT_NEAR(os::quad_1d(f, f, -20, 20, 40000).real(), 1.0, 1e-10);
    }
}

TEST(Normalized, SeparableTwoDimensional) {
    ComplexMatrix a = ComplexMatrix::Zero(2, 2);
    a(0, 0) = a(1, 1) = Complex(0, 0.5);
    const auto g = normalized(vec({0, 0}), vec({0, 0}), a, 1.0);
    EXPECT_NEAR(std::abs(overlap(g, g) - 1.0), 0.0, 1e-12);
    const auto x = packet_1d(0, 0, Complex(0, 0.5));
    const auto prod = tensor_product(x, x);
    EXPECT_NEAR(std::abs(overlap(g, prod) - 1.0), 0.0, 1e-12);
}

TEST(Normalized, RejectsBadWidths) {
    ComplexMatrix asym(2, 2);
    asym << Complex(0, 1), Complex(0.5, 0), Complex(0.1, 0), Complex(0, 1);
    EXPECT_THROW(normalized(vec({0, 0}), vec({0, 0}), asym, 1.0), ContractError);
    try {
        normalized(vec({0}), vec({0}), scalar_width(Complex(1, -0.5)), 1.0);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("-0.5"), std::string::npos);
    }
    EXPECT_THROW(normalized(vec({0}), vec({0}), scalar_width(Complex(0, 1)), -1.0), DomainError);
}

TEST(Overlap, SeparatedCentersMatchQuadrature) {
    for (double dq : {0.0, 0.5, 1.0, 2.5, 4.0}) {
        const auto g1 = packet_1d(0, 0, Complex(0, 0.5));
        const auto g2 = packet_1d(dq, 0, Complex(0, 0.5));
        const Complex ref = os::quad_1d(explicit_1d(g1), explicit_1d(g2), -20, 25, 45000);
        EXPECT_NEAR(std::abs(overlap(g1, g2)), std::abs(ref), 1e-8);
        EXPECT_NEAR(std::abs(overlap(g1, g2)), std::exp(-dq * dq / 4.0), 1e-12);
    }
}

TEST(Overlap, MomentumShiftMagnitudeAndPhase) {
    for (double dp : {0.3, 1.0, 2.0}) {
        const auto g1 = packet_1d(0.4, 0, Complex(0.2, 0.5));
        const auto g2 = packet_1d(0.4, dp, Complex(0.2, 0.5));
        const Complex ref = os::quad_1d(explicit_1d(g1), explicit_1d(g2), -20, 20, 40000);
        const Complex got = overlap(g1, g2);
        EXPECT_NEAR(std::abs(got), std::abs(ref), 1e-8);
        EXPECT_NEAR(std::arg(got / ref), 0.0, 1e-8);
    }
}

TEST(Overlap, SymmetryAndCauchySchwarz) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        ComplexMatrix a(2, 2);
        const double off = 0.3 * u(rng);
        a << Complex(u(rng), 1.2 + u(rng)), Complex(u(rng), off), Complex(0, 0), Complex(u(rng), 1.2 + u(rng));
        a(1, 0) = a(0, 1);
        ComplexMatrix b = a;
        b(0, 0) += Complex(0.5 * u(rng), 0.3 * u(rng));
        const auto g1 = normalized(vec({u(rng), u(rng)}), vec({u(rng), u(rng)}), a, 1.0);
        const auto g2 = normalized(vec({u(rng), u(rng)}), vec({u(rng), u(rng)}), b, 1.0);
        const Complex o12 = overlap(g1, g2);
        EXPECT_NEAR(std::abs(o12 - std::conj(overlap(g2, g1))), 0.0, 1e-12);
        EXPECT_LE(std::abs(o12), 1.0 + 1e-9);
    }
}

TEST(Overlap, SeparableProduct) {
    const auto a1 = packet_1d(0.1, 0.2, Complex(0.3, 0.7));
    const auto a2 = packet_1d(-0.4, 1.0, Complex(-0.2, 1.1));
    const auto b1 = packet_1d(1.0, -0.5, Complex(0.0, 0.5), 1.0);
    const auto b2 = packet_1d(0.5, 0.0, Complex(0.4, 0.9), 1.0);
    const Complex joint = overlap(tensor_product(a1, b1), tensor_product(a2, b2));
    EXPECT_NEAR(std::abs(joint - overlap(a1, a2) * overlap(b1, b2)), 0.0, 1e-12);
}

TEST(Overlap, RandomPairsMatchQuadrature) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto g1 = packet_1d(u(rng), u(rng), Complex(0.5 * u(rng), 0.8 + 0.4 * u(rng)));
        const auto g2 = packet_1d(u(rng), u(rng), Complex(0.5 * u(rng), 0.8 + 0.4 * u(rng)));
        const Complex ref = os::quad_1d(explicit_1d(g1), explicit_1d(g2), -12, 12, 2400);
        ASSERT_NEAR(std::abs(overlap(g1, g2) - ref), 0.0, 1e-7) << "trial " << trial;
    }
    for (int trial = 0; trial < 1000; ++trial) {
        auto make = [&] {
            ComplexMatrix a(2, 2);
            a(0, 0) = Complex(0.3 * u(rng), 1.0 + 0.3 * u(rng));
            a(1, 1) = Complex(0.3 * u(rng), 1.0 + 0.3 * u(rng));
            a(0, 1) = a(1, 0) = Complex(0.2 * u(rng), 0.2 * u(rng));
            return normalized(vec({0.5 * u(rng), 0.5 * u(rng)}), vec({0.5 * u(rng), 0.5 * u(rng)}), a, 1.0);
        };
        const auto g1 = make();
        const auto g2 = make();
        const os::Gauss2 f1{g1.q(), g1.p(), g1.A(), g1.s(), 1.0};
        const os::Gauss2 f2{g2.q(), g2.p(), g2.A(), g2.s(), 1.0};
        const Complex ref = os::quad_2d(f1, f2, -6.5, 6.5, 120);
        ASSERT_NEAR(std::abs(overlap(g1, g2) - ref), 0.0, 1e-7) << "trial " << trial;
    }
}

TEST(Overlap, RejectsMismatch) {
    const auto a = packet_1d(0, 0, Complex(0, 0.5), 1.0);
    const auto b = packet_1d(0, 0, Complex(0, 0.5), 0.5);
    EXPECT_THROW(overlap(a, b), ContractError);
    EXPECT_THROW(overlap(a, tensor_product(a, a)), ContractError);
}

TEST(Displace, IdentityPhaseAndShift) {
    const auto g = packet_1d(0.2, 0.1, Complex(0.1, 0.5));
    const auto same = displace(g, vec({0}), vec({0}), 0.0);
    EXPECT_NEAR(std::abs(overlap(g, same) - 1.0), 0.0, 1e-14);
    const auto flipped = displace(g, vec({0}), vec({0}), kPi);
    EXPECT_NEAR(std::abs(overlap(g, flipped) + 1.0), 0.0, 1e-12);
    // unit width: sigma^2 = hbar / (4 Im a) = 1
    const auto unit = packet_1d(0, 0, Complex(0, 0.25));
    const auto shifted = displace(unit, vec({2.0}), vec({0}), 0.0);
    const Complex ref = os::quad_1d(explicit_1d(unit), explicit_1d(shifted), -25, 27, 52000);
    EXPECT_NEAR(std::abs(overlap(unit, shifted)), std::abs(ref), 1e-8);
    EXPECT_THROW(displace(g, vec({0, 1}), vec({0}), 0.0), ContractError);
}

TEST(PhaseSpaceDistance, CoherentStateUnits) {
    const auto g = coherent(vec({0}), vec({0}), vec({1.0}), 1.0);
    // sigma_q = sigma_p = 1/sqrt(2); one sigma in q gives distance 1
    EXPECT_NEAR(phase_space_distance(g, vec({std::sqrt(0.5)}), vec({0})), 1.0, 1e-12);
    EXPECT_NEAR(phase_space_distance(g, vec({0}), vec({std::sqrt(0.5)})), 1.0, 1e-12);
}
