#pragma once

// First-order classical perturbation theory for a weak coupling lambda V_1
// added to an already solved H_0 trajectory.
//
// The deviation obeys the linearly forced stability equation
//   d/dt (dp, dq) = K(t) (dp, dq) + (f(t), 0),   f = -grad V_1(q_0(t)),
// solved as (dp, dq)(t) = lambda M(t) int_0^t M(t')^-1 (f(t'), 0) dt'.
// The packet phase change is
//   phi = p_t . dq_t / hbar - (lambda / hbar) int_0^t V_1(q_0(t')) dt'.

#include <sstream>
#include <vector>

#include "wavecoh/propagator.hpp"

namespace wavecoh {

// Deviation from the unperturbed trajectory; lambda is already included.
struct Deviation {
    double t = 0.0;
    Vector dq;
    Vector dp;
};

struct PerturbedEvolution {
    Trajectory base;
    std::vector<Deviation> deviations;
    double lambda = 0.0;
    double phase = 0.0;            // phi at the final time, radians
    double boundary_term = 0.0;    // p_t . dq_t at the final time (action units)
    double action_integral = 0.0;  // int V_1(q_0(t')) dt' up to the final time
    // Same three quantities at every sample.
    std::vector<double> phase_series;
    std::vector<double> boundary_series;
    std::vector<double> action_series;
};

namespace detail {

inline void check_aligned(const Trajectory& base, std::size_t n, const char* who) {
    if (base.size() != n) {
        std::ostringstream os;
        os << who << ": " << n << " entries for a trajectory of " << base.size() << " samples";
        throw ContractError(os.str());
    }
}

// Running integral of uniformly sampled values, fourth order in the step.
// Interior intervals use the cubic rule h/24 (-f0 + 13 f1 + 13 f2 - f3); the
// first and last intervals use the matching one-sided rule.
inline std::vector<double> cumulative_integral(const std::vector<double>& f, double h) {
    const std::size_t n = f.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    if (n < 4) {
        for (std::size_t k = 1; k < n; ++k) out[k] = out[k - 1] + 0.5 * h * (f[k - 1] + f[k]);
        return out;
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
        double piece = 0.0;
        if (k == 0) {
            piece = h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]);
        } else if (k + 2 == n) {
            piece = h / 24.0 * (9.0 * f[k + 1] + 19.0 * f[k] - 5.0 * f[k - 1] + f[k - 2]);
        } else {
            piece = h / 24.0 * (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2]);
        }
        out[k + 1] = out[k] + piece;
    }
    return out;
}

}  // namespace detail

inline std::vector<Deviation> forced_deviation(const Trajectory& base, const std::vector<StabilityMatrix>& stabs,
                                               const PotentialModel& coupling, double lambda) {
    detail::check_aligned(base, stabs.size(), "forced_deviation");
    if (lambda < 0.0) throw DomainError("forced_deviation: lambda must be non-negative");
    detail::require(!base.samples.empty(), "forced_deviation: empty trajectory");
    const auto n = base.dim();
    detail::require(coupling.dim() == n, "forced_deviation: coupling dimension does not match trajectory");

    std::vector<Deviation> out;
    out.reserve(base.size());
    Vector integral = Vector::Zero(2 * n);
    Vector prev_integrand = Vector::Zero(2 * n);
    for (std::size_t k = 0; k < base.size(); ++k) {
        const auto& st = base.samples[k];
        const Matrix& m = stabs[k].M;
        detail::require(m.rows() == 2 * n && m.cols() == 2 * n, "forced_deviation: stability matrix has wrong shape");
        if (std::abs(stabs[k].t - st.t) > 1e-9 * (1.0 + std::abs(st.t)))
            throw ContractError("forced_deviation: stability matrices are not aligned with the trajectory");

        Vector forcing = Vector::Zero(2 * n);
        forcing.head(n) = -coupling.gradient(st.q, st.t);
        const Vector integrand = symplectic_inverse(m) * forcing;
        if (!integrand.allFinite()) throw NumericalError("forced_deviation: non-finite propagated forcing");
        if (k > 0) integral += 0.5 * base.dt * (prev_integrand + integrand);
        prev_integrand = integrand;

        const Vector delta = lambda * (m * integral);
        out.push_back(Deviation{st.t, delta.tail(n), delta.head(n)});
    }
    return out;
}

inline PerturbedEvolution perturbed_phase(const Trajectory& base, const std::vector<Deviation>& devs,
                                          const PotentialModel& coupling, double lambda) {
    detail::check_aligned(base, devs.size(), "perturbed_phase");
    detail::require(coupling.dim() == base.dim(), "perturbed_phase: coupling dimension does not match trajectory");
    const double hbar = base.hbar;

    std::vector<double> v1(base.size());
    for (std::size_t k = 0; k < base.size(); ++k) v1[k] = coupling.value(base.samples[k].q, base.samples[k].t);

    PerturbedEvolution evo;
    evo.base = base;
    evo.deviations = devs;
    evo.lambda = lambda;
    evo.action_series = detail::cumulative_integral(v1, base.dt);
    evo.boundary_series.resize(base.size());
    evo.phase_series.resize(base.size());
    for (std::size_t k = 0; k < base.size(); ++k) {
        if (devs[k].dq.size() != base.dim()) throw ContractError("perturbed_phase: deviation has wrong dimension");
        evo.boundary_series[k] = base.samples[k].p.dot(devs[k].dq);
        evo.phase_series[k] = evo.boundary_series[k] / hbar - lambda * evo.action_series[k] / hbar;
    }
    evo.boundary_term = evo.boundary_series.back();
    evo.action_integral = evo.action_series.back();
    evo.phase = evo.phase_series.back();
    return evo;
}

// Packet displaced by the final deviation and carrying the phase change.
inline GaussianWavepacket apply(const GaussianWavepacket& base_packet, const PerturbedEvolution& evo) {
    detail::require(!evo.deviations.empty(), "apply: empty perturbed evolution");
    const auto& d = evo.deviations.back();
    return displace(base_packet, d.dq, d.dp, evo.phase);
}

}  // namespace wavecoh
