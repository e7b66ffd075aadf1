#pragma once

// Thawed Gaussian propagation. The packet center follows the classical
// trajectory on the full potential; the width follows the linearized flow
//
//   d/dt (PZ, Z) = [[0, -V''(q_t)], [1/m, 0]] (PZ, Z),   A_t = 1/2 PZ Z^-1
//
// and the phase is s_t = s_0 + S_t + (i hbar / 2) log det Z, with log det Z
// tracked continuously across steps.

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "wavecoh/potentials.hpp"
#include "wavecoh/wavecore.hpp"

namespace wavecoh {

inline constexpr double kMaxZCondition = 1e12;

struct PropagationState {
    double t = 0.0;
    Vector q;
    Vector p;
    ComplexMatrix PZ;
    ComplexMatrix Z;
    double S = 0.0;                 // classical action along the center
    Complex logdetZ{0.0, 0.0};      // continuous branch of log det Z
    Complex s0{0.0, 0.0};           // initial packet phase
};

struct Trajectory {
    std::vector<PropagationState> samples;
    double dt = 0.0;
    double hbar = 1.0;
    Vector masses;

    std::size_t size() const { return samples.size(); }
    const PropagationState& front() const { return samples.front(); }
    const PropagationState& back() const { return samples.back(); }
    Eigen::Index dim() const { return samples.front().q.size(); }
};

// Linearized flow map in (dp, dq) ordering.
struct StabilityMatrix {
    Matrix M;
    double t = 0.0;
};

// Standard symplectic form for (p, q) ordering.
inline Matrix symplectic_form(Eigen::Index n) {
    Matrix j = Matrix::Zero(2 * n, 2 * n);
    j.topRightCorner(n, n) = Matrix::Identity(n, n);
    j.bottomLeftCorner(n, n) = -Matrix::Identity(n, n);
    return j;
}

inline Matrix symplectic_inverse(const Matrix& m) {
    const Matrix j = symplectic_form(m.rows() / 2);
    return -j * m.transpose() * j;
}

inline double symplectic_defect(const Matrix& m) {
    const Matrix j = symplectic_form(m.rows() / 2);
    return (m.transpose() * j * m - j).cwiseAbs().maxCoeff();
}

namespace detail {

struct Flow {
    Vector q;
    Vector p;
    ComplexMatrix PZ;
    ComplexMatrix Z;
    double S = 0.0;

    Flow axpy(double h, const Flow& k) const {
        return Flow{q + h * k.q, p + h * k.p, PZ + h * k.PZ, Z + h * k.Z, S + h * k.S};
    }
};

inline Flow flow_rate(const Flow& y, double t, const PotentialModel& model, const Vector& inv_mass) {
    Flow d;
    d.q = inv_mass.cwiseProduct(y.p);
    d.p = -model.gradient(y.q, t);
    const Matrix hess = model.hessian(y.q, t);
    d.PZ = -(hess.cast<Complex>() * y.Z);
    d.Z = inv_mass.cast<Complex>().asDiagonal() * y.PZ;
    d.S = 0.5 * y.p.dot(inv_mass.cwiseProduct(y.p)) - model.value(y.q, t);
    return d;
}

inline Flow rk4_step(const Flow& y, double t, double dt, const PotentialModel& model, const Vector& inv_mass) {
    const Flow k1 = flow_rate(y, t, model, inv_mass);
    const Flow k2 = flow_rate(y.axpy(0.5 * dt, k1), t + 0.5 * dt, model, inv_mass);
    const Flow k3 = flow_rate(y.axpy(0.5 * dt, k2), t + 0.5 * dt, model, inv_mass);
    const Flow k4 = flow_rate(y.axpy(dt, k3), t + dt, model, inv_mass);
    Flow out = y;
    out.q += dt / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
    out.p += dt / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
    out.PZ += dt / 6.0 * (k1.PZ + 2.0 * k2.PZ + 2.0 * k3.PZ + k4.PZ);
    out.Z += dt / 6.0 * (k1.Z + 2.0 * k2.Z + 2.0 * k3.Z + k4.Z);
    out.S += dt / 6.0 * (k1.S + 2.0 * k2.S + 2.0 * k3.S + k4.S);
    return out;
}

inline double condition_number(const ComplexMatrix& z) {
    Eigen::JacobiSVD<ComplexMatrix> svd(z);
    const auto& sv = svd.singularValues();
    const double lo = sv(sv.size() - 1);
    return lo > 0.0 ? sv(0) / lo : std::numeric_limits<double>::infinity();
}

inline Complex log_det_increment(const ComplexMatrix& z_next, const ComplexMatrix& z_prev) {
    if (z_next.rows() == 1) return std::log(z_next(0, 0) / z_prev(0, 0));
    const ComplexMatrix ratio = z_next * z_prev.inverse();
    Eigen::ComplexEigenSolver<ComplexMatrix> es(ratio, false);
    Complex sum{0.0, 0.0};
    for (Eigen::Index k = 0; k < ratio.rows(); ++k) sum += std::log(es.eigenvalues()(k));
    return sum;
}

inline std::size_t step_count(double t_final, double dt, const char* who) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ContractError(std::string(who) + ": dt must be positive");
    if (!(t_final >= dt * (1.0 - 1e-12))) throw ContractError(std::string(who) + ": t_final must be at least dt");
    const double ratio = t_final / dt;
    const double n = std::round(ratio);
    if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
        std::ostringstream os;
        os << who << ": dt = " << dt << " does not divide t_final = " << t_final;
        throw ContractError(os.str());
    }
    return static_cast<std::size_t>(n);
}

}  // namespace detail

// 1/200 of the shortest harmonic period of the model, or of t_final when the
// model has no frequencies; rounded down so the step divides t_final.
inline double default_dt(const PotentialModel& model, double t_final) {
    double raw = t_final / 200.0;
    if (model.frequencies().size() > 0) {
        const double omega_max = model.frequencies().cwiseAbs().maxCoeff();
        if (omega_max > 0.0) raw = std::min(raw, 2.0 * kPi / omega_max / 200.0);
    }
    const double n = std::ceil(t_final / raw - 1e-9);
    return t_final / n;
}

inline PropagationState initial_state(const GaussianWavepacket& g0) {
    const auto n = g0.dim();
    PropagationState st;
    st.t = 0.0;
    st.q = g0.q();
    st.p = g0.p();
    st.Z = ComplexMatrix::Identity(n, n);
    st.PZ = 2.0 * g0.A();
    st.S = 0.0;
    st.logdetZ = Complex{0.0, 0.0};
    st.s0 = g0.s();
    return st;
}

inline GaussianWavepacket assemble(const PropagationState& state, double hbar) {
    if (detail::condition_number(state.Z) > kMaxZCondition) {
        std::ostringstream os;
        os << "assemble: Z is singular at t = " << state.t;
        throw PropagationError(os.str());
    }
    ComplexMatrix A = 0.5 * state.PZ * state.Z.inverse();
    A = 0.5 * (A + A.transpose()).eval();
    const Complex s = state.s0 + state.S + 0.5 * kI * hbar * state.logdetZ;
    return GaussianWavepacket(state.q, state.p, A, s, hbar);
}

inline Trajectory propagate(const GaussianWavepacket& g0, const PotentialModel& model, const Vector& masses,
                            double t_final, double dt) {
    const std::size_t steps = detail::step_count(t_final, dt, "propagate");
    detail::require(model.dim() == g0.dim(), "propagate: model and packet dimensions differ");
    detail::require(masses.size() == g0.dim(), "propagate: mass vector has wrong length");
    if ((masses.array() <= 0.0).any()) throw DomainError("propagate: masses must be positive");
    const Vector inv_mass = masses.cwiseInverse();

    Trajectory traj;
    traj.dt = dt;
    traj.hbar = g0.hbar();
    traj.masses = masses;
    traj.samples.reserve(steps + 1);
    traj.samples.push_back(initial_state(g0));

    detail::Flow y{g0.q(), g0.p(), traj.samples[0].PZ, traj.samples[0].Z, 0.0};
    Complex logdet{0.0, 0.0};
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const detail::Flow next = detail::rk4_step(y, t, dt, model, inv_mass);
        const double tn = static_cast<double>(k + 1) * dt;
        if (!next.q.allFinite() || !next.p.allFinite() || !next.Z.allFinite() || !next.PZ.allFinite()) {
            std::ostringstream os;
            os << "propagate: non-finite state at t = " << tn;
            throw PropagationError(os.str());
        }
        if (detail::condition_number(next.Z) > kMaxZCondition) {
            std::ostringstream os;
            os << "propagate: Z became near-singular at t = " << tn;
            throw PropagationError(os.str());
        }
        logdet += detail::log_det_increment(next.Z, y.Z);
        y = next;
        PropagationState st;
        st.t = tn;
        st.q = y.q;
        st.p = y.p;
        st.PZ = y.PZ;
        st.Z = y.Z;
        st.S = y.S;
        st.logdetZ = logdet;
        st.s0 = g0.s();
        traj.samples.push_back(std::move(st));
    }
    return traj;
}

// Stability matrices M(t) along a trajectory, solving dM/dt = K(t) M with the
// same RK4 stepper. The center is re-integrated alongside M so that K is
// available at the intermediate stages; it must reproduce the stored samples.
inline std::vector<StabilityMatrix> stability(const Trajectory& traj, const PotentialModel& model) {
    detail::require(!traj.samples.empty(), "stability: empty trajectory");
    const auto n = traj.dim();
    detail::require(model.dim() == n, "stability: model and trajectory dimensions differ");
    const Vector inv_mass = traj.masses.cwiseInverse();
    const double dt = traj.dt;

    auto rate = [&](const Vector& q, const Vector& p, const Matrix& m, double t, Vector& dq, Vector& dp,
                    Matrix& dm) {
        dq = inv_mass.cwiseProduct(p);
        dp = -model.gradient(q, t);
        const Matrix hess = model.hessian(q, t);
        // K = [[0, -V''], [1/m, 0]]
        dm.resize(2 * n, 2 * n);
        dm.topRows(n) = -hess * m.bottomRows(n);
        dm.bottomRows(n) = inv_mass.asDiagonal() * m.topRows(n);
    };

    std::vector<StabilityMatrix> out;
    out.reserve(traj.size());
    Vector q = traj.front().q;
    Vector p = traj.front().p;
    Matrix m = Matrix::Identity(2 * n, 2 * n);
    out.push_back({m, traj.front().t});
    Vector dq1, dp1, dq2, dp2, dq3, dp3, dq4, dp4;
    Matrix dm1, dm2, dm3, dm4;
    for (std::size_t k = 1; k < traj.size(); ++k) {
        const double t = traj.samples[k - 1].t;
        rate(q, p, m, t, dq1, dp1, dm1);
        rate(q + 0.5 * dt * dq1, p + 0.5 * dt * dp1, m + 0.5 * dt * dm1, t + 0.5 * dt, dq2, dp2, dm2);
        rate(q + 0.5 * dt * dq2, p + 0.5 * dt * dp2, m + 0.5 * dt * dm2, t + 0.5 * dt, dq3, dp3, dm3);
        rate(q + dt * dq3, p + dt * dp3, m + dt * dm3, t + dt, dq4, dp4, dm4);
        q += dt / 6.0 * (dq1 + 2.0 * dq2 + 2.0 * dq3 + dq4);
        p += dt / 6.0 * (dp1 + 2.0 * dp2 + 2.0 * dp3 + dp4);
        m += dt / 6.0 * (dm1 + 2.0 * dm2 + 2.0 * dm3 + dm4);

        const auto& ref = traj.samples[k];
        const double scale = 1.0 + ref.q.cwiseAbs().maxCoeff() + ref.p.cwiseAbs().maxCoeff();
        const double mismatch = std::max((q - ref.q).cwiseAbs().maxCoeff(), (p - ref.p).cwiseAbs().maxCoeff());
        if (mismatch > 1e-8 * scale) {
            std::ostringstream os;
            os << "stability: trajectory does not match the model (center mismatch " << mismatch << " at t = "
               << ref.t << ")";
            throw ContractError(os.str());
        }
        out.push_back({m, ref.t});
    }
    return out;
}

// Trajectory of a product packet under a separable Hamiltonian, built from
// the independent factor trajectories (coordinates of a first).
inline Trajectory join(const Trajectory& a, const Trajectory& b) {
    detail::require(a.size() == b.size(), "join: trajectories have different lengths");
    detail::require(std::abs(a.dt - b.dt) <= 1e-14 * a.dt, "join: trajectories have different steps");
    detail::require(std::abs(a.hbar - b.hbar) <= 1e-14 * a.hbar, "join: hbar mismatch");
    const auto na = a.dim();
    const auto nb = b.dim();
    Trajectory out;
    out.dt = a.dt;
    out.hbar = a.hbar;
    out.masses.resize(na + nb);
    out.masses << a.masses, b.masses;
    out.samples.reserve(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        const auto& sa = a.samples[k];
        const auto& sb = b.samples[k];
        PropagationState st;
        st.t = sa.t;
        st.q.resize(na + nb);
        st.q << sa.q, sb.q;
        st.p.resize(na + nb);
        st.p << sa.p, sb.p;
        st.PZ = ComplexMatrix::Zero(na + nb, na + nb);
        st.PZ.topLeftCorner(na, na) = sa.PZ;
        st.PZ.bottomRightCorner(nb, nb) = sb.PZ;
        st.Z = ComplexMatrix::Zero(na + nb, na + nb);
        st.Z.topLeftCorner(na, na) = sa.Z;
        st.Z.bottomRightCorner(nb, nb) = sb.Z;
        st.S = sa.S + sb.S;
        st.logdetZ = sa.logdetZ + sb.logdetZ;
        st.s0 = sa.s0 + sb.s0;
        out.samples.push_back(std::move(st));
    }
    return out;
}

// Block-diagonal stability matrix of a separable flow, (p_a, p_b, q_a, q_b) ordering.
inline std::vector<StabilityMatrix> join(const std::vector<StabilityMatrix>& a, const std::vector<StabilityMatrix>& b) {
    detail::require(a.size() == b.size(), "join: stability lists have different lengths");
    std::vector<StabilityMatrix> out;
    out.reserve(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        const auto na = a[k].M.rows() / 2;
        const auto nb = b[k].M.rows() / 2;
        const auto n = na + nb;
        Matrix m = Matrix::Zero(2 * n, 2 * n);
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 2; ++c) {
                m.block(r * n, c * n, na, na) = a[k].M.block(r * na, c * na, na, na);
                m.block(r * n + na, c * n + na, nb, nb) = b[k].M.block(r * nb, c * nb, nb, nb);
            }
        }
        out.push_back({m, a[k].t});
    }
    return out;
}

inline double classical_energy(const PropagationState& st, const PotentialModel& model, const Vector& masses) {
    return 0.5 * st.p.dot(masses.cwiseInverse().cwiseProduct(st.p)) + model.value(st.q, st.t);
}

}  // namespace wavecoh
