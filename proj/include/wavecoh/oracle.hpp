#pragma once

// Exact grid reference for one- and two-coordinate problems: Strang
// split-operator propagation on periodic grids and reduced density matrices
// of the two-arm setup by explicit partial trace.

#include <fftw3.h>

#include <mutex>
#include <sstream>
#include <vector>

#include "wavecoh/coherence.hpp"

namespace wavecoh {

inline constexpr std::size_t kMaxGridPoints = 512;
inline constexpr double kSigmaCoverage = 6.0;
inline constexpr double kPointsPerSigma = 16.0;

// Periodic grid: x_k = x_min + k dx, dx = (x_max - x_min) / n.
struct GridAxis {
    std::size_t n = 0;
    double x_min = 0.0;
    double x_max = 0.0;

    double dx() const { return (x_max - x_min) / static_cast<double>(n); }
    double x(std::size_t k) const { return x_min + static_cast<double>(k) * dx(); }
    double extent() const { return x_max - x_min; }
    // Angular wavenumber of FFT bin k.
    double wavenumber(std::size_t k) const {
        const auto signed_k = k < n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
        return 2.0 * kPi * signed_k / extent();
    }
    GridAxis refined() const { return GridAxis{2 * n, x_min, x_max}; }
};

namespace detail {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void check_axes(const std::vector<GridAxis>& axes, std::size_t max_points) {
    if (axes.empty() || axes.size() > 2) throw ContractError("grid: one or two axes supported");
    for (std::size_t a = 0; a < axes.size(); ++a) {
        const auto& ax = axes[a];
        std::ostringstream os;
        os << "grid axis " << a << ": ";
        if (!is_power_of_two(ax.n) || ax.n < 4) throw ContractError(os.str() + "n_points must be a power of two >= 4");
        if (ax.n > max_points) {
            os << ax.n << " points exceeds the limit of " << max_points;
            throw ContractError(os.str());
        }
        if (!(ax.x_max > ax.x_min)) throw ContractError(os.str() + "x_max must exceed x_min");
    }
}

// FFTW's planner is not thread-safe; execution with distinct arrays is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

class FftPlan {
public:
    FftPlan(const std::vector<GridAxis>& axes, Complex* data) {
        std::vector<int> dims;
        for (const auto& ax : axes) dims.push_back(static_cast<int>(ax.n));
        auto* buf = reinterpret_cast<fftw_complex*>(data);
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        forward_ = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        backward_ = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
        if (!forward_ || !backward_) throw NumericalError("grid: FFT planning failed");
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;
    ~FftPlan() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }

    void forward() const { fftw_execute(forward_); }
    void backward() const { fftw_execute(backward_); }

private:
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

}  // namespace detail

class GridWavefunction {
public:
    GridWavefunction(std::vector<GridAxis> axes, std::vector<Complex> values, double hbar, Vector masses,
                     std::size_t max_points = kMaxGridPoints)
        : axes_(std::move(axes)), values_(std::move(values)), hbar_(hbar), masses_(std::move(masses)) {
        detail::check_axes(axes_, max_points);
        detail::require(values_.size() == total_points(), "GridWavefunction: value count does not match the grid");
        detail::require(masses_.size() == static_cast<Eigen::Index>(axes_.size()),
                        "GridWavefunction: one mass per axis required");
        detail::require(hbar_ > 0.0, "GridWavefunction: hbar must be positive");
    }

    const std::vector<GridAxis>& axes() const { return axes_; }
    const std::vector<Complex>& values() const { return values_; }
    std::vector<Complex>& values() { return values_; }
    double hbar() const { return hbar_; }
    const Vector& masses() const { return masses_; }
    std::size_t dim() const { return axes_.size(); }

    std::size_t total_points() const {
        std::size_t n = 1;
        for (const auto& ax : axes_) n *= ax.n;
        return n;
    }
    double cell_volume() const {
        double v = 1.0;
        for (const auto& ax : axes_) v *= ax.dx();
        return v;
    }
    // Coordinates of flat (row-major) index k.
    Vector point(std::size_t k) const {
        Vector x(static_cast<Eigen::Index>(axes_.size()));
        for (std::size_t a = axes_.size(); a-- > 0;) {
            x(static_cast<Eigen::Index>(a)) = axes_[a].x(k % axes_[a].n);
            k /= axes_[a].n;
        }
        return x;
    }

    double norm_squared() const {
        double s = 0.0;
        for (const auto& v : values_) s += std::norm(v);
        return s * cell_volume();
    }
    Complex inner(const GridWavefunction& other) const {
        detail::require(other.values_.size() == values_.size(), "GridWavefunction: grids differ");
        Complex s{0.0, 0.0};
        for (std::size_t k = 0; k < values_.size(); ++k) s += std::conj(values_[k]) * other.values_[k];
        return s * cell_volume();
    }
    // <psi | g> with g evaluated pointwise.
    Complex inner(const GaussianWavepacket& g) const {
        detail::require(static_cast<std::size_t>(g.dim()) == axes_.size(), "GridWavefunction: packet dimension");
        Complex s{0.0, 0.0};
        for (std::size_t k = 0; k < values_.size(); ++k) s += std::conj(values_[k]) * g(point(k));
        return s * cell_volume();
    }
    // Probability within `fraction` of the extent from either edge of any axis.
    double boundary_mass(double fraction = 0.05) const {
        double s = 0.0;
        for (std::size_t k = 0; k < values_.size(); ++k) {
            std::size_t r = k;
            bool edge = false;
            for (std::size_t a = axes_.size(); a-- > 0;) {
                const std::size_t i = r % axes_[a].n;
                r /= axes_[a].n;
                const auto band = static_cast<std::size_t>(fraction * static_cast<double>(axes_[a].n));
                edge = edge || i < band || i + band >= axes_[a].n;
            }
            if (edge) s += std::norm(values_[k]);
        }
        return s * cell_volume();
    }

private:
    std::vector<GridAxis> axes_;
    std::vector<Complex> values_;
    double hbar_;
    Vector masses_;
};

// Checks that the grid resolves g: +-6 sigma inside the window, at least 16
// points per sigma, and the momentum grid covering p +- 6 sigma_p.
inline void resolution_audit(const GaussianWavepacket& g, const std::vector<GridAxis>& axes) {
    detail::require(static_cast<std::size_t>(g.dim()) == axes.size(), "resolution_audit: packet dimension");
    const Matrix qcov = g.position_covariance();
    const Matrix pcov = -g.hbar() * ComplexMatrix(g.A().inverse()).imag().inverse();
    for (std::size_t a = 0; a < axes.size(); ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        const auto& ax = axes[a];
        const double sq = std::sqrt(qcov(ai, ai));
        const double sp = std::sqrt(pcov(ai, ai));
        const double q = g.q()(ai);
        const double p = g.p()(ai);
        std::ostringstream os;
        os.precision(6);
        os << "axis " << a << ": ";
        if (q - kSigmaCoverage * sq < ax.x_min || q + kSigmaCoverage * sq > ax.x_max) {
            os << "window [" << ax.x_min << ", " << ax.x_max << "] does not cover " << q << " +- " << kSigmaCoverage
               << " sigma (sigma = " << sq << ")";
            throw ResolutionError(os.str());
        }
        if (sq / ax.dx() < kPointsPerSigma) {
            os << sq / ax.dx() << " points per sigma, need " << kPointsPerSigma;
            throw ResolutionError(os.str());
        }
        const double p_max = kPi * g.hbar() / ax.dx();
        if (std::abs(p) + kSigmaCoverage * sp > p_max) {
            os << "momentum grid +-" << p_max << " does not cover " << p << " +- " << kSigmaCoverage << " sigma_p";
            throw ResolutionError(os.str());
        }
    }
}

inline GridWavefunction sample(const GaussianWavepacket& g, const std::vector<GridAxis>& axes, const Vector& masses,
                               std::size_t max_points = kMaxGridPoints) {
    detail::check_axes(axes, max_points);
    resolution_audit(g, axes);
    std::size_t total = 1;
    for (const auto& ax : axes) total *= ax.n;
    std::vector<Complex> v(total);
    GridWavefunction out(axes, std::move(v), g.hbar(), masses, max_points);
    for (std::size_t k = 0; k < total; ++k) out.values()[k] = g(out.point(k));
    const double n2 = out.norm_squared();
    if (std::abs(n2 - 1.0) > 1e-8) {
        std::ostringstream os;
        os << "sample: sampled norm " << n2 << " deviates from 1";
        throw ResolutionError(os.str());
    }
    const double scale = 1.0 / std::sqrt(n2);
    for (auto& x : out.values()) x *= scale;
    return out;
}

inline GridWavefunction sample(const GaussianWavepacket& g, const std::vector<GridAxis>& axes) {
    return sample(g, axes, Vector::Ones(g.dim()));
}

// Strang splitting exp(-i V dt / 2 hbar) exp(-i T dt / hbar) exp(-i V dt / 2 hbar).
inline GridWavefunction split_operator_propagate(const GridWavefunction& psi0, const PotentialModel& model,
                                                 double t_final, double dt,
                                                 std::size_t max_points = kMaxGridPoints) {
    detail::require(static_cast<std::size_t>(model.dim()) == psi0.dim(),
                    "split_operator_propagate: model dimension does not match the grid");
    const std::size_t steps = detail::step_count(t_final, dt, "split_operator_propagate");
    const double hbar = psi0.hbar();
    const auto& axes = psi0.axes();
    const std::size_t total = psi0.total_points();

    GridWavefunction psi(axes, psi0.values(), hbar, psi0.masses(), max_points);
    auto& v = psi.values();
    const double n0 = psi.norm_squared();

    std::vector<Complex> kinetic(total);
    for (std::size_t k = 0; k < total; ++k) {
        std::size_t r = k;
        double energy = 0.0;
        for (std::size_t a = axes.size(); a-- > 0;) {
            const double kk = axes[a].wavenumber(r % axes[a].n);
            r /= axes[a].n;
            energy += hbar * hbar * kk * kk / (2.0 * psi.masses()(static_cast<Eigen::Index>(a)));
        }
        kinetic[k] = std::exp(-kI * energy * dt / hbar) / static_cast<double>(total);
    }

    std::vector<Vector> points(total);
    for (std::size_t k = 0; k < total; ++k) points[k] = psi.point(k);
    std::vector<Complex> half_kick(total);
    auto fill_kick = [&](double t) {
        for (std::size_t k = 0; k < total; ++k)
            half_kick[k] = std::exp(-kI * model.value(points[k], t) * (0.5 * dt) / hbar);
    };

    detail::FftPlan plan(axes, v.data());
    const bool dynamic = model.time_dependent();
    fill_kick(0.0);
    for (std::size_t step = 0; step < steps; ++step) {
        const double t = static_cast<double>(step) * dt;
        if (dynamic) fill_kick(t);
        for (std::size_t k = 0; k < total; ++k) v[k] *= half_kick[k];
        plan.forward();
        for (std::size_t k = 0; k < total; ++k) v[k] *= kinetic[k];
        plan.backward();
        if (dynamic) fill_kick(t + dt);
        for (std::size_t k = 0; k < total; ++k) v[k] *= half_kick[k];
    }
    for (const auto& x : v)
        if (!std::isfinite(x.real()) || !std::isfinite(x.imag()))
            throw PropagationError("split_operator_propagate: non-finite wavefunction");
    const double n1 = psi.norm_squared();
    if (std::abs(n1 - n0) > 1e-10) {
        std::ostringstream os;
        os << "split_operator_propagate: norm drifted by " << n1 - n0;
        throw PropagationError(os.str());
    }
    return psi;
}

struct OracleOptions {
    GridAxis system_axis;
    GridAxis bath_axis;
    double dt = 0.0;       // defaults to the scenario step
    bool certify = false;  // repeat on a doubled grid and require agreement
    double certification_tol = 1e-4;
    double boundary_tol = 1e-6;
};

struct OracleResult {
    double m_coh = 0.0;
    double purity = 0.0;
    double trace = 0.0;
    double hermiticity_residual = 0.0;
    double min_eigenvalue = 0.0;
    double eigen_purity = 0.0;   // sum of squared eigenvalues
    double certification_change = 0.0;  // zero unless certified
    std::vector<double> eigenvalues;
};

namespace detail {

inline OracleResult exact_two_arm_once(const TwoArmScenario& scenario, const BathEnsemble& ensemble,
                                       const OracleOptions& opts, std::size_t max_points) {
    const auto& joint = scenario.joint;
    if (joint.n_system() != 1 || joint.n_bath() != 1)
        throw ContractError("exact_two_arm: one system and one bath coordinate required");
    const std::vector<GridAxis> axes{opts.system_axis, opts.bath_axis};
    check_axes(axes, max_points);
    const double dt = opts.dt > 0.0 ? opts.dt : scenario.dt;
    const PotentialModel h_left = direct_sum(scenario.system_left, joint.bath);
    const PotentialModel h_right = joint.full();
    const std::size_t m = ensemble.size();
    const std::size_t nx = opts.system_axis.n;
    const std::size_t ne = opts.bath_axis.n;

    using Block = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    std::vector<Block> left(m), right(m);
    parallel_for(m, [&](std::size_t i) {
        with_bath_index(i, [&] {
            for (int arm = 0; arm < 2; ++arm) {
                const auto& g0 = arm == 0 ? scenario.g0_left : scenario.g0_right;
                const auto psi0 = sample(tensor_product(g0, ensemble.packets[i]), axes, joint.masses, max_points);
                const auto psi =
                    split_operator_propagate(psi0, arm == 0 ? h_left : h_right, scenario.t_final, dt, max_points);
                if (psi.boundary_mass() > opts.boundary_tol) {
                    std::ostringstream os;
                    os << "exact_two_arm: wavefunction mass " << psi.boundary_mass() << " reached the grid edge";
                    throw ResolutionError(os.str());
                }
                (arm == 0 ? left : right)[i] = Eigen::Map<const Block>(psi.values().data(), nx, ne);
            }
            return 0;
        });
    });

    // Reduced blocks as operators on the system grid: rho_op = rho(x, x') dx.
    const double dx = opts.system_axis.dx();
    const double deta = opts.bath_axis.dx();
    const ComplexMatrix& w = ensemble.weights;
    ComplexMatrix ll = ComplexMatrix::Zero(nx, nx), rr = ll, rl = ll;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const Complex wij = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (wij == Complex{0.0, 0.0}) continue;
            const Complex f = 0.5 * wij * deta * dx;
            ll.noalias() += f * left[i] * left[j].adjoint();
            rr.noalias() += f * right[i] * right[j].adjoint();
            rl.noalias() += f * right[i] * left[j].adjoint();
        }
    const ComplexMatrix rho = ll + rr + rl + rl.adjoint();

    OracleResult r;
    r.m_coh = 2.0 * rl.squaredNorm();
    r.trace = rho.trace().real();
    r.hermiticity_residual = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    r.purity = (rho * rho).trace().real();
    const ComplexMatrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(herm, Eigen::EigenvaluesOnly);
    r.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    r.min_eigenvalue = es.eigenvalues().minCoeff();
    r.eigen_purity = es.eigenvalues().squaredNorm();
    return r;
}

}  // namespace detail

// Exact M_coh and purity of the two-arm state on the joint (x, eta) grid.
// Left arm: system_left + bath; right arm: full coupled Hamiltonian.
inline OracleResult exact_two_arm(const TwoArmScenario& scenario, const BathEnsemble& ensemble,
                                  const OracleOptions& opts) {
    OracleResult r = detail::exact_two_arm_once(scenario, ensemble, opts, kMaxGridPoints);
    if (opts.certify) {
        OracleOptions fine = opts;
        fine.system_axis = opts.system_axis.refined();
        fine.bath_axis = opts.bath_axis.refined();
        const OracleResult f = detail::exact_two_arm_once(scenario, ensemble, fine, 2 * kMaxGridPoints);
        r.certification_change = std::max(std::abs(f.m_coh - r.m_coh), std::abs(f.purity - r.purity));
        if (r.certification_change > opts.certification_tol) {
            std::ostringstream os;
            os << "exact_two_arm: grid doubling changed the result by " << r.certification_change;
            throw ResolutionError(os.str());
        }
    }
    return r;
}

}  // namespace wavecoh
