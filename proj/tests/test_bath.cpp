#include <gtest/gtest.h>

#include "wavecoh/bath.hpp"

using namespace wavecoh;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v) out(k++) = x;
    return out;
}

GaussianWavepacket at(double q, double p = 0.0) { return coherent(vec({q}), vec({p}), vec({1.0}), 1.0); }

}  // namespace

TEST(PureState, SinglePacket) {
    const auto e = pure_state({at(0.3)}, {1.0}, {0.4});
    EXPECT_NEAR(std::abs(e.weights(0, 0) - 1.0), 0.0, 1e-14);
    EXPECT_EQ(e.kind, BathKind::pure);
}

TEST(PureState, IdenticalPacketsRescaled) {
    const double r = 1.0 / std::sqrt(2.0);
    const auto e = pure_state({at(0.0), at(0.0)}, {r, r}, {0.0, 0.0});
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) EXPECT_NEAR(std::abs(e.weights(i, j) - 0.25), 0.0, 1e-14);
    EXPECT_LT(validate(e).trace_residual, 1e-12);
}

TEST(PureState, SeparatedPackets) {
    const double r = 1.0 / std::sqrt(2.0);
    const auto e = pure_state({at(-20.0), at(20.0)}, {r, r}, {0.0, 0.0});
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) EXPECT_NEAR(std::abs(e.weights(i, j) - 0.5), 0.0, 1e-12);
    const auto rep = validate(e);
    EXPECT_LT(rep.trace_residual, 1e-8);
    EXPECT_LT(rep.hermiticity_residual, 1e-14);
    EXPECT_NEAR(rep.purity, 1.0, 1e-10);
}

TEST(PureState, Errors) {
    EXPECT_THROW(pure_state({at(0.0), at(1.0)}, {1.0, -0.1}, {0.0, 0.0}), DomainError);
    EXPECT_THROW(pure_state({at(0.0), at(1.0)}, {0.0, 0.0}, {0.0, 0.0}), DomainError);
    EXPECT_THROW(pure_state({at(0.0)}, {1.0, 1.0}, {0.0, 0.0}), ContractError);
}

TEST(DiagonalMixture, Cases) {
    const auto single = diagonal_mixture({at(0.0)}, {1.0});
    EXPECT_NEAR(std::abs(single.weights(0, 0) - 1.0), 0.0, 1e-14);
    const auto two = diagonal_mixture({at(-20.0), at(20.0)}, {0.5, 0.5});
    EXPECT_NEAR(two.weights(0, 0).real(), 0.5, 1e-12);
    EXPECT_EQ(two.weights(0, 1), Complex(0.0, 0.0));
    const auto overlapping = diagonal_mixture({at(0.0), at(0.5)}, {0.3, 0.9});
    EXPECT_NEAR(overlapping.weights.diagonal().real().sum(), 1.0, 1e-12);
    EXPECT_NEAR(overlapping.weights(1, 1).real() / overlapping.weights(0, 0).real(), 3.0, 1e-12);
    EXPECT_TRUE(validate(overlapping).ok());
    EXPECT_THROW(diagonal_mixture({at(0.0)}, {-1.0}), DomainError);
}

TEST(DiagonalMixture, SingleMemberMatchesPureState) {
    const auto a = diagonal_mixture({at(0.7, 0.1)}, {1.0});
    const auto b = pure_state({at(0.7, 0.1)}, {1.0}, {0.0});
    EXPECT_EQ(a.kind, b.kind);
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(a.amplitudes, b.amplitudes);
}

TEST(GeneralEnsemble, OverlappingPacketsHaveUnitTrace) {
    std::vector<GaussianWavepacket> packets{at(0.0), at(0.4, 0.2), at(-0.3, -0.5)};
    ComplexMatrix w(3, 3);
    w << 0.5, Complex(0.1, 0.05), 0.0, Complex(0.1, -0.05), 0.3, Complex(0.02, 0.0), 0.0, Complex(0.02, 0.0), 0.4;
    const auto e = general_ensemble(packets, w);
    const auto rep = validate(e);
    EXPECT_LT(rep.trace_residual, 1e-12);
    EXPECT_GE(rep.min_eigenvalue, -1e-9);
}

TEST(Validate, FlagsNonHermitian) {
    std::vector<GaussianWavepacket> packets{at(-10.0), at(10.0)};
    ComplexMatrix w(2, 2);
    w << 0.5, Complex(0.3, 0.0), Complex(-0.3, 0.0), 0.5;
    const auto e = general_ensemble(packets, w);
    EXPECT_GT(validate(e).hermiticity_residual, 0.1);
    EXPECT_FALSE(validate(e).ok());
}

TEST(ThermalHarmonic, MeanEnergyAndDeterminism) {
    const double temperature = 5.0;
    const auto e = thermal_harmonic(vec({1.0}), temperature, 100, 1234);
    std::vector<double> energy;
    for (const auto& g : e.packets) energy.push_back(0.5 * g.p()(0) * g.p()(0) + 0.5 * g.q()(0) * g.q()(0));
    double mean = 0.0;
    for (double x : energy) mean += x / 100.0;
    double var = 0.0;
    for (double x : energy) var += (x - mean) * (x - mean) / 99.0;
    EXPECT_LT(std::abs(mean - temperature), 3.0 * std::sqrt(var / 100.0));
    const auto again = thermal_harmonic(vec({1.0}), temperature, 100, 1234);
    for (std::size_t i = 0; i < e.size(); ++i) {
        ASSERT_EQ(e.packets[i].q(), again.packets[i].q());
        ASSERT_EQ(e.packets[i].p(), again.packets[i].p());
    }
    EXPECT_EQ(e.weights, again.weights);
    const auto rep = validate(e);
    EXPECT_GE(rep.min_eigenvalue, -1e-9);
    EXPECT_LT(rep.trace_residual, 1e-8);
}

TEST(ThermalHarmonic, ColdLimitAndErrors) {
    const auto e = thermal_harmonic(vec({1.0}), 1e-24, 1, 9);
    EXPECT_NEAR(e.packets[0].q()(0), 0.0, 1e-10);
    EXPECT_NEAR(e.packets[0].p()(0), 0.0, 1e-10);
    EXPECT_THROW(thermal_harmonic(vec({1.0}), 0.0, 10, 1), DomainError);
    EXPECT_THROW(thermal_harmonic(vec({-1.0}), 1.0, 10, 1), DomainError);
}
