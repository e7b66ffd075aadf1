#pragma once

// Bath density matrices in a (non-orthogonal) Gaussian frame:
//   rho_bath = sum_ij w(i,j) |G_i><G_j|.
// Unit trace means sum_ij w(i,j) <G_j|G_i> = 1.

#include <cstdint>
#include <random>
#include <sstream>
#include <vector>

#include "wavecoh/wavecore.hpp"

namespace wavecoh {

enum class BathKind { pure, mixture, general };

struct BathEnsemble {
    std::vector<GaussianWavepacket> packets;
    ComplexMatrix weights;
    BathKind kind = BathKind::general;
    // Complex amplitudes c_i with w(i,j) = c_i conj(c_j); only for pure ensembles.
    ComplexVector amplitudes;

    std::size_t size() const { return packets.size(); }
    Eigen::Index dim() const { return packets.front().dim(); }
    double hbar() const { return packets.front().hbar(); }
};

// S(i,j) = <G_i|G_j>
inline ComplexMatrix gram_matrix(const std::vector<GaussianWavepacket>& packets) {
    const auto m = static_cast<Eigen::Index>(packets.size());
    ComplexMatrix s(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        s(i, i) = overlap(packets[i], packets[i]);
        for (Eigen::Index j = i + 1; j < m; ++j) {
            s(i, j) = overlap(packets[i], packets[j]);
            s(j, i) = std::conj(s(i, j));
        }
    }
    return s;
}

// tr(rho) = sum_ij w(i,j) S(j,i)
inline Complex weighted_trace(const ComplexMatrix& w, const ComplexMatrix& gram) {
    return (w.array() * gram.transpose().array()).sum();
}

namespace detail {

inline void check_packets(const std::vector<GaussianWavepacket>& packets, const char* who) {
    if (packets.empty()) throw ContractError(std::string(who) + ": no packets");
    for (const auto& g : packets) check_compatible(packets.front(), g, who);
}

inline Complex normalize_weights(ComplexMatrix& w, const std::vector<GaussianWavepacket>& packets, const char* who) {
    const Complex tr = weighted_trace(w, gram_matrix(packets));
    if (!(tr.real() > 0.0)) throw DomainError(std::string(who) + ": weights give a non-positive trace");
    w /= tr.real();
    return tr;
}

// Bit-reproducible standard normals from a 64-bit Mersenne twister.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

private:
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace detail

// Empty phases mean all zero.
inline BathEnsemble pure_state(const std::vector<GaussianWavepacket>& packets, const std::vector<double>& amplitudes,
                               std::vector<double> phases = {}) {
    detail::check_packets(packets, "pure_state");
    const auto m = static_cast<Eigen::Index>(packets.size());
    if (phases.empty()) phases.assign(packets.size(), 0.0);
    if (static_cast<Eigen::Index>(amplitudes.size()) != m || static_cast<Eigen::Index>(phases.size()) != m)
        throw ContractError("pure_state: amplitudes and phases must have one entry per packet");
    bool any = false;
    for (double a : amplitudes) {
        if (a < 0.0 || !std::isfinite(a)) throw DomainError("pure_state: amplitudes must be non-negative");
        any = any || a > 0.0;
    }
    if (!any) throw DomainError("pure_state: all amplitudes are zero");

    ComplexVector c(m);
    for (Eigen::Index i = 0; i < m; ++i) c(i) = amplitudes[i] * std::exp(kI * phases[i]);
    ComplexMatrix w = c * c.adjoint();
    const Complex tr = detail::normalize_weights(w, packets, "pure_state");
    c /= std::sqrt(tr.real());
    return BathEnsemble{packets, w, BathKind::pure, c};
}

inline BathEnsemble diagonal_mixture(const std::vector<GaussianWavepacket>& packets,
                                     const std::vector<double>& probabilities) {
    detail::check_packets(packets, "diagonal_mixture");
    const auto m = static_cast<Eigen::Index>(packets.size());
    if (static_cast<Eigen::Index>(probabilities.size()) != m)
        throw ContractError("diagonal_mixture: one probability per packet required");
    ComplexMatrix w = ComplexMatrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (probabilities[i] < 0.0 || !std::isfinite(probabilities[i]))
            throw DomainError("diagonal_mixture: probabilities must be non-negative");
        w(i, i) = probabilities[i];
    }
    detail::normalize_weights(w, packets, "diagonal_mixture");
    if (m == 1) {
        // Identical to the one-packet pure state.
        ComplexVector c(1);
        c(0) = std::sqrt(w(0, 0).real());
        return BathEnsemble{packets, w, BathKind::pure, c};
    }
    return BathEnsemble{packets, w, BathKind::mixture, ComplexVector()};
}

// Any Hermitian weight matrix; rescaled to unit trace.
inline BathEnsemble general_ensemble(const std::vector<GaussianWavepacket>& packets, ComplexMatrix weights) {
    detail::check_packets(packets, "general_ensemble");
    const auto m = static_cast<Eigen::Index>(packets.size());
    detail::require(weights.rows() == m && weights.cols() == m, "general_ensemble: weight matrix has wrong shape");
    detail::normalize_weights(weights, packets, "general_ensemble");
    return BathEnsemble{packets, weights, BathKind::general, ComplexVector()};
}

struct ThermalOptions {
    Vector masses;  // defaults to unit masses
    double hbar = 1.0;
};

// Classical Boltzmann sampler over coherent-state centers (k_B = 1): each mode
// gets q ~ N(0, T / (m w^2)) and p ~ N(0, m T), and the packets carry the
// mode's coherent width A = i m w / 2. Equal probabilities 1 / n_samples.
inline BathEnsemble thermal_harmonic(const Vector& omega, double temperature, std::size_t n_samples,
                                     std::uint64_t seed, const ThermalOptions& opts = {}) {
    if (omega.size() == 0 || (omega.array() <= 0.0).any())
        throw DomainError("thermal_harmonic: frequencies must be positive");
    if (!(temperature > 0.0))
        throw DomainError("thermal_harmonic: temperature must be positive (use a single ground-state packet for T = 0)");
    if (n_samples < 1) throw DomainError("thermal_harmonic: n_samples must be at least 1");
    const auto n = omega.size();
    const Vector mass = opts.masses.size() == 0 ? Vector::Ones(n).eval() : opts.masses;
    detail::require(mass.size() == n, "thermal_harmonic: mass vector has wrong length");

    detail::NormalSampler normal(seed);
    std::vector<GaussianWavepacket> packets;
    packets.reserve(n_samples);
    const Vector mw = mass.cwiseProduct(omega);
    for (std::size_t s = 0; s < n_samples; ++s) {
        Vector q(n), p(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            q(k) = normal() * std::sqrt(temperature / (mass(k) * omega(k) * omega(k)));
            p(k) = normal() * std::sqrt(mass(k) * temperature);
        }
        packets.push_back(coherent(q, p, mw, opts.hbar));
    }
    return diagonal_mixture(packets, std::vector<double>(n_samples, 1.0 / static_cast<double>(n_samples)));
}

struct EnsembleReport {
    double hermiticity_residual = 0.0;
    double trace_residual = 0.0;
    double min_eigenvalue = 0.0;
    double purity = 0.0;

    bool ok(double tol = 1e-8) const {
        return hermiticity_residual < tol && trace_residual < tol && min_eigenvalue >= -1e-9;
    }
};

namespace detail {

// S^{1/2} for a Hermitian positive semidefinite Gram matrix.
inline ComplexMatrix hermitian_sqrt(const ComplexMatrix& s) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(s);
    const Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

inline EnsembleReport validate(const BathEnsemble& ensemble) {
    EnsembleReport r;
    const ComplexMatrix& w = ensemble.weights;
    r.hermiticity_residual = (w - w.adjoint()).cwiseAbs().maxCoeff();
    const ComplexMatrix s = gram_matrix(ensemble.packets);
    r.trace_residual = std::abs(weighted_trace(w, s) - 1.0);
    const ComplexMatrix root = detail::hermitian_sqrt(s);
    const ComplexMatrix rho = root * (0.5 * (w + w.adjoint())) * root;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho, Eigen::EigenvaluesOnly);
    r.min_eigenvalue = es.eigenvalues().minCoeff();
    r.purity = (w * s * w * s).trace().real();
    return r;
}

}  // namespace wavecoh
