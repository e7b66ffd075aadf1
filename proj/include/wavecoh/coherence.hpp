#pragma once

// Two-arm interferometer: a system packet split into left and right pieces,
// the right piece coupled to a bath. Each bath packet G_i drives its own
// first-order perturbed product state in the right arm,
//
//   (|g^l> + |g^r>) |G_i>  ->  |g^l_t>|G^0_it> + e^{i phi_i} |g^r_it>|G^r_it>,
//
// and the inter-arm coherence is the norm of the effective system state
//
//   |Psi> = 2^{-1/2} sum_ij w(j,i) O_ij e^{i phi_j} |g^r_jt>,  O_ij = <G^0_it|G^r_jt>.

#include <algorithm>
#include <exception>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "wavecoh/bath.hpp"
#include "wavecoh/perturbation.hpp"

namespace wavecoh {

struct TwoArmScenario {
    PotentialModel system_left;
    GaussianWavepacket g0_left;
    GaussianWavepacket g0_right;
    JointHamiltonian joint;  // right-arm system, bath, coupling and lambda
    double t_final = 1.0;
    double dt = 0.01;

    const PotentialModel& system_right() const { return joint.system; }
};

struct EvolvedBranch {
    double t = 0.0;
    GaussianWavepacket g_left;                    // |g^l_0t>
    GaussianWavepacket g_right_unperturbed;       // |g^r_0t>
    std::vector<GaussianWavepacket> g_right;      // |g^r_it>
    std::vector<GaussianWavepacket> G_right;      // |G^r_it>
    std::vector<GaussianWavepacket> G_left;       // |G^0_jt>
    std::vector<double> phi;                      // phi_i
    std::vector<Deviation> deviations;            // joint deviation per bath index
};

namespace detail {

// Runs body(i) for i in [0, n) on up to hardware_concurrency threads. Results
// must be written to index-owned slots; the first failing index is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::exception_ptr> errors(n);
    auto run = [&](std::size_t start) {
        for (std::size_t i = start; i < n; i += workers) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

template <class Fn>
auto with_bath_index(std::size_t i, Fn&& fn) {
    try {
        return fn();
    } catch (const PropagationError& e) {
        throw PropagationError("bath member " + std::to_string(i) + ": " + e.what());
    } catch (const ModelError& e) {
        throw ModelError("bath member " + std::to_string(i) + ": " + e.what());
    }
}

inline std::vector<double> diagonal_probabilities(const BathEnsemble& ensemble) {
    const auto m = ensemble.weights.rows();
    std::vector<double> prob(static_cast<std::size_t>(m));
    double total = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) total += ensemble.weights(i, i).real();
    for (Eigen::Index i = 0; i < m; ++i) prob[static_cast<std::size_t>(i)] = ensemble.weights(i, i).real() / total;
    return prob;
}

inline double wrap_phase(double phi) { return phi - 2.0 * kPi * std::floor((phi + kPi) / (2.0 * kPi)); }

}  // namespace detail

// All trajectories and perturbations of a two-arm run; branches at any
// stored sample are assembled from it.
class TwoArmEvolution {
public:
    TwoArmEvolution(const TwoArmScenario& scenario, const BathEnsemble& ensemble) {
        const auto& joint = scenario.joint;
        const auto ns = joint.n_system();
        const auto nb = joint.n_bath();
        detail::require(scenario.system_left.dim() == ns, "evolve: left-arm model has the wrong dimension");
        detail::require(scenario.g0_left.dim() == ns && scenario.g0_right.dim() == ns,
                        "evolve: system packets have the wrong dimension");
        detail::require(!ensemble.packets.empty(), "evolve: empty bath ensemble");
        detail::require(ensemble.dim() == nb, "evolve: bath packets do not match the bath dimension");
        detail::check_compatible(scenario.g0_left, scenario.g0_right, "evolve");
        if (std::abs(ensemble.hbar() - scenario.g0_left.hbar()) > 1e-14 * ensemble.hbar())
            throw ContractError("evolve: bath and system hbar differ");

        const Vector ms = joint.system_masses();
        const Vector mb = joint.bath_masses();
        left_ = propagate(scenario.g0_left, scenario.system_left, ms, scenario.t_final, scenario.dt);
        right_ = propagate(scenario.g0_right, joint.system, ms, scenario.t_final, scenario.dt);
        const auto right_stab = stability(right_, joint.system);

        const std::size_t m = ensemble.size();
        bath_.resize(m);
        perturbed_.resize(m);
        detail::parallel_for(m, [&](std::size_t i) {
            detail::with_bath_index(i, [&] {
                bath_[i] = propagate(ensemble.packets[i], joint.bath, mb, scenario.t_final, scenario.dt);
                const Trajectory joint_traj = join(right_, bath_[i]);
                const auto joint_stab = join(right_stab, stability(bath_[i], joint.bath));
                const auto devs = forced_deviation(joint_traj, joint_stab, joint.coupling, joint.lambda);
                perturbed_[i] = perturbed_phase(joint_traj, devs, joint.coupling, joint.lambda);
                return 0;
            });
        });
    }

    std::size_t samples() const { return left_.size(); }
    double time(std::size_t k) const { return left_.samples.at(k).t; }
    const Trajectory& left_system() const { return left_; }
    const Trajectory& right_system() const { return right_; }
    const std::vector<Trajectory>& bath() const { return bath_; }
    const std::vector<PerturbedEvolution>& perturbed() const { return perturbed_; }

    EvolvedBranch branch(std::size_t k) const {
        detail::require(k < samples(), "branch: sample index out of range");
        const double hbar = left_.hbar;
        const auto ns = left_.dim();
        const std::size_t m = bath_.size();
        EvolvedBranch b{time(k), assemble(left_.samples[k], hbar), assemble(right_.samples[k], hbar), {}, {}, {}, {},
                        {}};
        b.g_right.reserve(m);
        b.G_right.reserve(m);
        b.G_left.reserve(m);
        for (std::size_t i = 0; i < m; ++i) {
            const auto& dev = perturbed_[i].deviations[k];
            const auto nb = dev.dq.size() - ns;
            const GaussianWavepacket g0 = assemble(bath_[i].samples[k], hbar);
            b.g_right.push_back(displace(b.g_right_unperturbed, dev.dq.head(ns), dev.dp.head(ns), 0.0));
            b.G_right.push_back(displace(g0, dev.dq.tail(nb), dev.dp.tail(nb), 0.0));
            b.G_left.push_back(g0);
            b.phi.push_back(perturbed_[i].phase_series[k]);
            b.deviations.push_back(dev);
        }
        return b;
    }

private:
    Trajectory left_;
    Trajectory right_;
    std::vector<Trajectory> bath_;
    std::vector<PerturbedEvolution> perturbed_;
};

inline EvolvedBranch evolve(const TwoArmScenario& scenario, const BathEnsemble& ensemble) {
    const TwoArmEvolution evo(scenario, ensemble);
    return evo.branch(evo.samples() - 1);
}

// O(i,j) = <G^0_it | G^r_jt>
inline ComplexMatrix bath_overlaps(const EvolvedBranch& branch) {
    const auto m = static_cast<Eigen::Index>(branch.G_left.size());
    ComplexMatrix o(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) o(i, j) = overlap(branch.G_left[i], branch.G_right[j]);
    return o;
}

inline ComplexMatrix system_gram(const std::vector<GaussianWavepacket>& g) { return gram_matrix(g); }

namespace detail {

inline void check_branch(const EvolvedBranch& branch, const BathEnsemble& ensemble, const char* who) {
    const auto m = ensemble.size();
    if (branch.g_right.size() != m || branch.G_right.size() != m || branch.G_left.size() != m ||
        branch.phi.size() != m) {
        std::ostringstream os;
        os << who << ": branch has " << branch.phi.size() << " bath members, ensemble has " << m;
        throw ContractError(os.str());
    }
}

}  // namespace detail

struct EffectiveWavefunction {
    ComplexVector coefficients;
    std::vector<GaussianWavepacket> packets;

    Complex self_overlap() const {
        const ComplexMatrix s = gram_matrix(packets);
        return (coefficients.adjoint() * s * coefficients)(0);
    }
    double norm_squared() const { return self_overlap().real(); }
};

inline EffectiveWavefunction effective_wavefunction(const EvolvedBranch& branch, const BathEnsemble& ensemble,
                                                    const ComplexMatrix& overlaps) {
    detail::check_branch(branch, ensemble, "effective_wavefunction");
    const auto m = static_cast<Eigen::Index>(ensemble.size());
    const ComplexMatrix& w = ensemble.weights;
    ComplexVector c(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        Complex sum{0.0, 0.0};
        for (Eigen::Index i = 0; i < m; ++i) sum += w(j, i) * overlaps(i, j);
        c(j) = sum * std::exp(kI * branch.phi[static_cast<std::size_t>(j)]) / std::sqrt(2.0);
    }
    return EffectiveWavefunction{c, branch.g_right};
}

inline EffectiveWavefunction effective_wavefunction(const EvolvedBranch& branch, const BathEnsemble& ensemble) {
    return effective_wavefunction(branch, ensemble, bath_overlaps(branch));
}

// Literal four-index coherence sum
//   1/2 sum <g_j'|g_j> w(i',j') w(j,i) conj(O_i'j') O_ij e^{i(phi_j - phi_j')}.
inline Complex coherence_four_index(const EvolvedBranch& branch, const BathEnsemble& ensemble,
                                    const ComplexMatrix& overlaps) {
    detail::check_branch(branch, ensemble, "m_coh");
    const auto m = static_cast<Eigen::Index>(ensemble.size());
    const ComplexMatrix& w = ensemble.weights;
    const ComplexMatrix gs = system_gram(branch.g_right);
    ComplexVector ph(m);
    for (Eigen::Index j = 0; j < m; ++j) ph(j) = std::exp(kI * branch.phi[static_cast<std::size_t>(j)]);
    Complex total{0.0, 0.0};
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index jp = 0; jp < m; ++jp) {
            const Complex outer = gs(jp, j) * ph(j) * std::conj(ph(jp));
            Complex inner{0.0, 0.0};
            for (Eigen::Index i = 0; i < m; ++i)
                for (Eigen::Index ip = 0; ip < m; ++ip)
                    inner += w(ip, jp) * w(j, i) * std::conj(overlaps(ip, jp)) * overlaps(i, j);
            total += outer * inner;
        }
    return 0.5 * total;
}

inline constexpr double kCoherenceIdentityTol = 1e-9;

// M_coh = <Psi|Psi>, cross-checked against the four-index sum.
inline double m_coh(const EvolvedBranch& branch, const BathEnsemble& ensemble) {
    const ComplexMatrix o = bath_overlaps(branch);
    const Complex via_psi = effective_wavefunction(branch, ensemble, o).self_overlap();
    const Complex direct = coherence_four_index(branch, ensemble, o);
    if (std::abs(via_psi - direct) > kCoherenceIdentityTol) {
        std::ostringstream os;
        os.precision(17);
        os << "m_coh: four-index sum " << direct << " disagrees with <Psi|Psi> " << via_psi;
        throw NumericalError(os.str());
    }
    return via_psi.real();
}

// mu = sum_ij w(j,i) O_ij e^{i phi_j}
inline Complex bath_mu(const EvolvedBranch& branch, const BathEnsemble& ensemble, const ComplexMatrix& overlaps) {
    detail::check_branch(branch, ensemble, "bath_mu");
    const auto m = static_cast<Eigen::Index>(ensemble.size());
    Complex mu{0.0, 0.0};
    for (Eigen::Index j = 0; j < m; ++j) {
        Complex sum{0.0, 0.0};
        for (Eigen::Index i = 0; i < m; ++i) sum += ensemble.weights(j, i) * overlaps(i, j);
        mu += sum * std::exp(kI * branch.phi[static_cast<std::size_t>(j)]);
    }
    return mu;
}

// Pure-bath overlap mu = sum_ij conj(c_i) O_ij e^{i phi_j} c_j.
inline Complex pure_bath_mu(const EvolvedBranch& branch, const BathEnsemble& ensemble) {
    if (ensemble.kind != BathKind::pure || ensemble.amplitudes.size() != static_cast<Eigen::Index>(ensemble.size()))
        throw ContractError("pure_bath_mu: ensemble is not a pure state");
    detail::check_branch(branch, ensemble, "pure_bath_mu");
    const ComplexMatrix o = bath_overlaps(branch);
    const ComplexVector& c = ensemble.amplitudes;
    const auto m = c.size();
    Complex mu{0.0, 0.0};
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            mu += std::conj(c(i)) * o(i, j) * std::exp(kI * branch.phi[static_cast<std::size_t>(j)]) * c(j);
    return mu;
}

struct NondynamicalEstimate {
    Complex mu;
    double m_coh = 0.0;
};

// mu = sum_i p_i e^{i phi_i}, M_coh = |mu|^2 / 2.
inline NondynamicalEstimate nondynamical_estimate(const std::vector<double>& probabilities,
                                                  const std::vector<double>& phases) {
    detail::require(probabilities.size() == phases.size(), "nondynamical_estimate: length mismatch");
    Complex mu{0.0, 0.0};
    for (std::size_t i = 0; i < phases.size(); ++i) mu += probabilities[i] * std::exp(kI * phases[i]);
    return {mu, 0.5 * std::norm(mu)};
}

// mu ~ sum_i p_i e^{i phi_i} O_ii
inline Complex diagonal_mu(const std::vector<double>& probabilities, const std::vector<double>& phases,
                           const std::vector<Complex>& diag_overlaps) {
    detail::require(probabilities.size() == phases.size() && phases.size() == diag_overlaps.size(),
                    "diagonal_mu: length mismatch");
    Complex mu{0.0, 0.0};
    for (std::size_t i = 0; i < phases.size(); ++i)
        mu += probabilities[i] * std::exp(kI * phases[i]) * diag_overlaps[i];
    return mu;
}

// Inverse participation ratio sum |w_i|^4 of normalized amplitudes.
inline double ipr_bound(const std::vector<double>& amplitudes) {
    double n2 = 0.0;
    double n4 = 0.0;
    for (double w : amplitudes) {
        n2 += w * w;
        n4 += w * w * w * w;
    }
    if (std::abs(n2 - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "ipr_bound: amplitudes are not normalized (sum |w|^2 = " << n2 << ")";
        throw DomainError(os.str());
    }
    return n4;
}

struct PhaseHistogram {
    std::vector<double> edges;    // n_bins + 1 edges on [-pi, pi]
    std::vector<double> weights;  // probability per bin
    Complex histogram_mean;       // sum_b P_b e^{i phi_b} at bin centers
    Complex direct_mean;          // sum_i p_i e^{i phi_i}
};

inline PhaseHistogram phase_distribution(const EvolvedBranch& branch, const BathEnsemble& ensemble,
                                         std::size_t n_bins) {
    if (n_bins < 1) throw ContractError("phase_distribution: n_bins must be at least 1");
    detail::check_branch(branch, ensemble, "phase_distribution");
    const auto prob = detail::diagonal_probabilities(ensemble);
    PhaseHistogram h;
    const double width = 2.0 * kPi / static_cast<double>(n_bins);
    h.edges.resize(n_bins + 1);
    for (std::size_t b = 0; b <= n_bins; ++b) h.edges[b] = -kPi + width * static_cast<double>(b);
    h.weights.assign(n_bins, 0.0);
    h.direct_mean = Complex{0.0, 0.0};
    for (std::size_t i = 0; i < prob.size(); ++i) {
        const double phi = detail::wrap_phase(branch.phi[i]);
        auto b = static_cast<std::size_t>(std::floor((phi + kPi) / width));
        b = std::min(b, n_bins - 1);
        h.weights[b] += prob[i];
        h.direct_mean += prob[i] * std::exp(kI * branch.phi[i]);
    }
    h.histogram_mean = Complex{0.0, 0.0};
    for (std::size_t b = 0; b < n_bins; ++b)
        h.histogram_mean += h.weights[b] * std::exp(kI * (h.edges[b] + 0.5 * width));
    return h;
}

struct CoherenceReport {
    double t = 0.0;
    double m_coh = 0.0;
    double purity_total = 0.0;
    double trace = 0.0;
    double block_ll = 0.0;
    double block_rr = 0.0;
    double block_cross = 0.0;        // Tr[rho^rl rho^lr + rho^lr rho^rl]
    double block_arm_overlap = 0.0;  // remaining terms, nonzero only when the arms overlap
    Complex mu;
    double phase_spread = 0.0;             // circular variance of phi
    double mean_bath_overlap = 0.0;        // sum p_i |O_ii|
    double mean_system_displacement = 0.0; // sum p_i d(g^r_it, g^r_0t) in phase-space sigma units
};

namespace detail {

inline void fill_diagnostics(CoherenceReport& r, const EvolvedBranch& branch, const BathEnsemble& ensemble,
                             const ComplexMatrix& overlaps) {
    const auto prob = diagonal_probabilities(ensemble);
    Complex circ{0.0, 0.0};
    r.mean_bath_overlap = 0.0;
    r.mean_system_displacement = 0.0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        circ += prob[i] * std::exp(kI * branch.phi[i]);
        r.mean_bath_overlap += prob[i] * std::abs(overlaps(ii, ii));
        r.mean_system_displacement +=
            prob[i] * phase_space_distance(branch.g_right_unperturbed, branch.g_right[i].q(), branch.g_right[i].p());
    }
    r.phase_spread = 1.0 - std::abs(circ);
    r.mu = bath_mu(branch, ensemble, overlaps);
}

}  // namespace detail

// Cheap report for time series: M_coh from <Psi|Psi> plus diagnostics; no
// purity and no four-index cross-check.
inline CoherenceReport coherence_summary(const EvolvedBranch& branch, const BathEnsemble& ensemble) {
    const ComplexMatrix o = bath_overlaps(branch);
    CoherenceReport r;
    r.t = branch.t;
    r.m_coh = effective_wavefunction(branch, ensemble, o).norm_squared();
    detail::fill_diagnostics(r, branch, ensemble, o);
    return r;
}

// Full reduced density matrix in the frame {g^l, g^r_0 .. g^r_M-1}:
//   rho_red = sum_ab R(a,b) |v_a><v_b|, traces via the frame Gram matrix.
// With zero_offdiagonal_blocks the rl and lr blocks are dropped, modelling
// complete inter-arm decoherence.
inline CoherenceReport total_purity(const EvolvedBranch& branch, const BathEnsemble& ensemble,
                                    bool zero_offdiagonal_blocks = false) {
    detail::check_branch(branch, ensemble, "total_purity");
    const auto m = static_cast<Eigen::Index>(ensemble.size());
    const ComplexMatrix& w = ensemble.weights;
    const ComplexMatrix o = bath_overlaps(branch);
    const ComplexMatrix bath_left = gram_matrix(branch.G_left);
    const ComplexMatrix bath_right = gram_matrix(branch.G_right);
    ComplexVector ph(m);
    for (Eigen::Index i = 0; i < m; ++i) ph(i) = std::exp(kI * branch.phi[static_cast<std::size_t>(i)]);

    const Eigen::Index n = m + 1;  // index 0 is the left packet
    ComplexMatrix ll = ComplexMatrix::Zero(n, n);
    ComplexMatrix rr = ComplexMatrix::Zero(n, n);
    ComplexMatrix rl = ComplexMatrix::Zero(n, n);
    ll(0, 0) = 0.5 * weighted_trace(w, bath_left);
    for (Eigen::Index i = 0; i < m; ++i) {
        Complex sum{0.0, 0.0};
        for (Eigen::Index j = 0; j < m; ++j) sum += w(i, j) * o(j, i);
        rl(i + 1, 0) = 0.5 * ph(i) * sum;
        for (Eigen::Index j = 0; j < m; ++j)
            rr(i + 1, j + 1) = 0.5 * w(i, j) * ph(i) * std::conj(ph(j)) * bath_right(j, i);
    }
    const ComplexMatrix lr = rl.adjoint();

    std::vector<GaussianWavepacket> frame;
    frame.reserve(static_cast<std::size_t>(n));
    frame.push_back(branch.g_left);
    frame.insert(frame.end(), branch.g_right.begin(), branch.g_right.end());
    const ComplexMatrix s = gram_matrix(frame);

    auto tr2 = [&](const ComplexMatrix& x, const ComplexMatrix& y) { return (x * s * y * s).trace().real(); };

    CoherenceReport r;
    r.t = branch.t;
    const ComplexMatrix rho = zero_offdiagonal_blocks ? (ll + rr).eval() : (ll + rr + rl + lr).eval();
    r.trace = (rho * s).trace().real();
    r.purity_total = tr2(rho, rho);
    r.block_ll = tr2(ll, ll);
    r.block_rr = tr2(rr, rr);
    r.block_cross = zero_offdiagonal_blocks ? 0.0 : tr2(rl, lr) + tr2(lr, rl);
    r.block_arm_overlap = r.purity_total - r.block_ll - r.block_rr - r.block_cross;
    r.m_coh = m_coh(branch, ensemble);
    detail::fill_diagnostics(r, branch, ensemble, o);
    return r;
}

}  // namespace wavecoh
