#pragma once

// Multidimensional complex Gaussian wavepackets
//
//   psi(x) = exp{ (i/hbar) [ (x-q)^T A (x-q) + p.(x-q) + s ] }
//
// with complex symmetric A (Im A positive definite) and complex phase s.
// There is no explicit prefactor: the norm is carried by Im(s).

#include <cmath>
#include <sstream>

#include "wavecoh/types.hpp"

namespace wavecoh {

inline constexpr double kMaxWidthCondition = 1e12;

class GaussianWavepacket {
public:
    GaussianWavepacket(Vector q, Vector p, ComplexMatrix A, Complex s, double hbar)
        : q_(std::move(q)), p_(std::move(p)), A_(std::move(A)), s_(s), hbar_(hbar) {
        const auto n = q_.size();
        detail::require(n > 0, "GaussianWavepacket: dimension must be positive");
        detail::require(p_.size() == n, "GaussianWavepacket: p has wrong length");
        detail::require(A_.rows() == n && A_.cols() == n, "GaussianWavepacket: A has wrong shape");
        if (!(hbar_ > 0.0) || !std::isfinite(hbar_)) throw DomainError("GaussianWavepacket: hbar must be positive");
        if (!q_.allFinite() || !p_.allFinite() || !A_.allFinite() || !std::isfinite(s_.real()) ||
            !std::isfinite(s_.imag()))
            throw DomainError("GaussianWavepacket: non-finite parameter");

        const double scale = std::max(1.0, A_.cwiseAbs().maxCoeff());
        const double asym = (A_ - A_.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-10 * scale) {
            std::ostringstream os;
            os << "GaussianWavepacket: width matrix is not symmetric (|A-A^T| = " << asym << ")";
            throw ContractError(os.str());
        }
        A_ = 0.5 * (A_ + A_.transpose()).eval();

        Eigen::SelfAdjointEigenSolver<Matrix> es(A_.imag());
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        if (!(lo > 0.0)) {
            std::ostringstream os;
            os << "GaussianWavepacket: Im(A) is not positive definite (eigenvalue " << lo << ")";
            throw DomainError(os.str());
        }
        if (hi / lo > kMaxWidthCondition) {
            std::ostringstream os;
            os << "GaussianWavepacket: Im(A) condition number " << hi / lo << " exceeds " << kMaxWidthCondition;
            throw DomainError(os.str());
        }
    }

    Eigen::Index dim() const { return q_.size(); }
    const Vector& q() const { return q_; }
    const Vector& p() const { return p_; }
    const ComplexMatrix& A() const { return A_; }
    Complex s() const { return s_; }
    double hbar() const { return hbar_; }

    // Position covariance of |psi|^2.
    Matrix position_covariance() const { return 0.25 * hbar_ * A_.imag().inverse(); }

    Complex operator()(const Vector& x) const {
        const Vector d = x - q_;
        const Complex quad = d.cast<Complex>().dot(A_ * d.cast<Complex>());  // dot() conjugates lhs; d is real
        return std::exp(kI / hbar_ * (quad + p_.dot(d) + s_));
    }

private:
    Vector q_;
    Vector p_;
    ComplexMatrix A_;
    Complex s_;
    double hbar_;
};

// Imaginary part of s that gives unit norm for the given width matrix.
inline double normalizing_phase_imag(const ComplexMatrix& A, double hbar) {
    const auto n = static_cast<double>(A.rows());
    const Matrix b = (2.0 / hbar) * A.imag();
    Eigen::LLT<Matrix> llt(b);
    if (llt.info() != Eigen::Success) throw DomainError("normalized: Im(A) is not positive definite");
    double logdet = 0.0;
    for (Eigen::Index k = 0; k < b.rows(); ++k) logdet += 2.0 * std::log(llt.matrixL()(k, k));
    return 0.25 * hbar * (n * std::log(kPi) - logdet);
}

inline GaussianWavepacket normalized(const Vector& q, const Vector& p, const ComplexMatrix& A, double hbar) {
    // Validate through the constructor first so errors name the real problem.
    GaussianWavepacket probe(q, p, A, Complex{0.0, 0.0}, hbar);
    return GaussianWavepacket(q, p, probe.A(), Complex{0.0, normalizing_phase_imag(probe.A(), hbar)}, hbar);
}

// Coherent-state style packet with A = (i/2) diag(m_k omega_k).
inline GaussianWavepacket coherent(const Vector& q, const Vector& p, const Vector& mass_omega, double hbar) {
    ComplexMatrix A = ComplexMatrix::Zero(q.size(), q.size());
    for (Eigen::Index k = 0; k < q.size(); ++k) A(k, k) = Complex{0.0, 0.5 * mass_omega(k)};
    return normalized(q, p, A, hbar);
}

namespace detail {

inline void check_compatible(const GaussianWavepacket& a, const GaussianWavepacket& b, const char* who) {
    if (a.dim() != b.dim()) {
        std::ostringstream os;
        os << who << ": dimension mismatch (" << a.dim() << " vs " << b.dim() << ")";
        throw ContractError(os.str());
    }
    if (std::abs(a.hbar() - b.hbar()) > 1e-14 * std::max(a.hbar(), b.hbar())) {
        std::ostringstream os;
        os << who << ": hbar mismatch (" << a.hbar() << " vs " << b.hbar() << ")";
        throw ContractError(os.str());
    }
}

// Sum of principal logs of the eigenvalues of a complex symmetric matrix whose
// real part is positive definite. All eigenvalues lie in the right half-plane,
// so this is the branch of log det continuous from the real positive case.
inline Complex log_det_right_half_plane(const ComplexMatrix& c) {
    if (c.rows() == 1) return std::log(c(0, 0));
    Eigen::ComplexEigenSolver<ComplexMatrix> es(c, false);
    Complex sum{0.0, 0.0};
    for (Eigen::Index k = 0; k < c.rows(); ++k) sum += std::log(es.eigenvalues()(k));
    return sum;
}

}  // namespace detail

// Natural log of <g1|g2>. Kept separate so callers can combine many overlaps
// without underflow.
inline Complex log_overlap(const GaussianWavepacket& g1, const GaussianWavepacket& g2) {
    detail::check_compatible(g1, g2, "overlap");
    const double hbar = g1.hbar();
    const auto n = static_cast<double>(g1.dim());
    const ComplexMatrix A1c = g1.A().conjugate();
    const ComplexMatrix& A2 = g2.A();
    const ComplexVector a = g1.q().cast<Complex>();
    const ComplexVector b = g2.q().cast<Complex>();

    // integrand exp(-x^T C x + d^T x + e)
    const ComplexMatrix C = (-kI / hbar) * (A2 - A1c);
    const ComplexVector d =
        (kI / hbar) * (-2.0 * (A2 * b) + 2.0 * (A1c * a) + (g2.p() - g1.p()).cast<Complex>());
    const Complex e = (kI / hbar) * ((b.transpose() * A2 * b)(0) - (a.transpose() * A1c * a)(0) -
                                     g2.p().dot(g2.q()) + g1.p().dot(g1.q()) + g2.s() - std::conj(g1.s()));

    const ComplexVector cinv_d = C.partialPivLu().solve(d);
    const Complex quad = (d.transpose() * cinv_d)(0);
    return 0.5 * n * std::log(kPi) - 0.5 * detail::log_det_right_half_plane(C) + 0.25 * quad + e;
}

inline Complex overlap(const GaussianWavepacket& g1, const GaussianWavepacket& g2) {
    return std::exp(log_overlap(g1, g2));
}

inline double norm_squared(const GaussianWavepacket& g) { return overlap(g, g).real(); }

inline GaussianWavepacket displace(const GaussianWavepacket& g, const Vector& dq, const Vector& dp,
                                   double dphase) {
    detail::require(dq.size() == g.dim() && dp.size() == g.dim(), "displace: vector length mismatch");
    return GaussianWavepacket(g.q() + dq, g.p() + dp, g.A(), g.s() + g.hbar() * dphase, g.hbar());
}

// Joint packet a(x) b(y) on the concatenated coordinates (x, y).
inline GaussianWavepacket tensor_product(const GaussianWavepacket& a, const GaussianWavepacket& b) {
    if (std::abs(a.hbar() - b.hbar()) > 1e-14 * a.hbar()) throw ContractError("tensor_product: hbar mismatch");
    const auto na = a.dim();
    const auto nb = b.dim();
    Vector q(na + nb), p(na + nb);
    q << a.q(), b.q();
    p << a.p(), b.p();
    ComplexMatrix A = ComplexMatrix::Zero(na + nb, na + nb);
    A.topLeftCorner(na, na) = a.A();
    A.bottomRightCorner(nb, nb) = b.A();
    return GaussianWavepacket(q, p, A, a.s() + b.s(), a.hbar());
}

// Mahalanobis distance, in phase space, of the point (q, p) from the center
// of g measured with the Wigner covariance of g.
inline double phase_space_distance(const GaussianWavepacket& g, const Vector& q, const Vector& p) {
    detail::require(q.size() == g.dim() && p.size() == g.dim(), "phase_space_distance: length mismatch");
    const Vector dq = q - g.q();
    const Vector dp = p - g.p();
    const Matrix ai = g.A().imag();
    const Matrix ar = g.A().real();
    const Vector chirp = dp - 2.0 * ar * dq;
    const double expo = (2.0 / g.hbar()) * dq.dot(ai * dq) + (0.5 / g.hbar()) * chirp.dot(ai.ldlt().solve(chirp));
    return std::sqrt(2.0 * expo);
}

}  // namespace wavecoh
