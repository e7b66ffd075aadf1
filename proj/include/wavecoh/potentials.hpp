#pragma once

// Potential energy models and the system + bath + coupling decomposition
//   H = H_system + H_bath + lambda * V_1.

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wavecoh/types.hpp"

namespace wavecoh {

// Named real parameters; a scalar is a length-1 list.
class Params {
public:
    Params() = default;
    Params(std::initializer_list<std::pair<const std::string, std::vector<double>>> init) : values_(init) {}

    void set(const std::string& key, std::vector<double> v) { values_[key] = std::move(v); }
    void set(const std::string& key, double v) { values_[key] = {v}; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::vector<double>>& values() const { return values_; }

    const std::vector<double>& list(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing parameter '" + key + "'");
        return it->second;
    }
    double scalar(const std::string& key) const {
        const auto& v = list(key);
        if (v.size() != 1) throw ConfigError("parameter '" + key + "' must be a scalar");
        return v[0];
    }
    double scalar_or(const std::string& key, double fallback) const { return has(key) ? scalar(key) : fallback; }

    // Broadcast a scalar or check the length of a list.
    Vector vector(const std::string& key, Eigen::Index n) const {
        const auto& v = list(key);
        if (v.size() == 1) return Vector::Constant(n, v[0]);
        if (static_cast<Eigen::Index>(v.size()) != n) {
            std::ostringstream os;
            os << "parameter '" << key << "' has " << v.size() << " entries, expected " << n;
            throw ConfigError(os.str());
        }
        return Eigen::Map<const Vector>(v.data(), n);
    }
    Vector vector_or(const std::string& key, Eigen::Index n, double fallback) const {
        return has(key) ? vector(key, n) : Vector::Constant(n, fallback);
    }

private:
    std::map<std::string, std::vector<double>> values_;
};

class PotentialModel {
public:
    using ValueFn = std::function<double(const Vector&, double)>;
    using GradientFn = std::function<Vector(const Vector&, double)>;
    using HessianFn = std::function<Matrix(const Vector&, double)>;

    PotentialModel(std::string name, Eigen::Index dim, ValueFn value, GradientFn gradient, HessianFn hessian,
                   Vector frequencies = Vector())
        : name_(std::move(name)),
          dim_(dim),
          value_(std::move(value)),
          gradient_(std::move(gradient)),
          hessian_(std::move(hessian)),
          frequencies_(std::move(frequencies)) {
        detail::require(dim_ > 0, "PotentialModel: dimension must be positive");
    }

    const std::string& name() const { return name_; }
    Eigen::Index dim() const { return dim_; }
    // Characteristic angular frequencies, empty when the model has none.
    const Vector& frequencies() const { return frequencies_; }
    // Models are static unless marked; grid propagation caches static potentials.
    bool time_dependent() const { return time_dependent_; }
    PotentialModel& mark_time_dependent(bool flag = true) {
        time_dependent_ = flag;
        return *this;
    }

    double value(const Vector& q, double t) const {
        check_arg(q);
        const double v = value_(q, t);
        if (!std::isfinite(v)) throw ModelError(name_ + ": non-finite potential value");
        return v;
    }
    Vector gradient(const Vector& q, double t) const {
        check_arg(q);
        Vector g = gradient_(q, t);
        if (!g.allFinite()) throw ModelError(name_ + ": non-finite potential gradient");
        return g;
    }
    Matrix hessian(const Vector& q, double t) const {
        check_arg(q);
        Matrix h = hessian_(q, t);
        if (!h.allFinite()) throw ModelError(name_ + ": non-finite potential hessian");
        return 0.5 * (h + h.transpose());
    }

private:
    void check_arg(const Vector& q) const {
        if (q.size() != dim_) {
            std::ostringstream os;
            os << name_ << ": expected " << dim_ << " coordinates, got " << q.size();
            throw ContractError(os.str());
        }
        if (!q.allFinite()) throw ModelError(name_ + ": non-finite coordinates");
    }

    std::string name_;
    Eigen::Index dim_;
    ValueFn value_;
    GradientFn gradient_;
    HessianFn hessian_;
    Vector frequencies_;
    bool time_dependent_ = false;
};

inline PotentialModel free_model(Eigen::Index dim) {
    return PotentialModel(
        "free", dim, [](const Vector&, double) { return 0.0; },
        [dim](const Vector&, double) { return Vector::Zero(dim).eval(); },
        [dim](const Vector&, double) { return Matrix::Zero(dim, dim).eval(); });
}

// V(q) = sum_k 1/2 m_k w_k^2 (q_k - c_k)^2 + g_k (q_k - c_k)^4
inline PotentialModel anharmonic_model(std::string name, const Vector& omega, const Vector& mass, const Vector& center,
                                       const Vector& quartic) {
    const Vector k = mass.cwiseProduct(omega.cwiseAbs2());
    const auto n = omega.size();
    return PotentialModel(
        std::move(name), n,
        [=](const Vector& q, double) {
            const Vector u = q - center;
            return 0.5 * k.dot(u.cwiseAbs2()) + quartic.dot(u.array().pow(4).matrix());
        },
        [=](const Vector& q, double) {
            const Vector u = q - center;
            return (k.cwiseProduct(u) + 4.0 * quartic.cwiseProduct(u.array().cube().matrix())).eval();
        },
        [=](const Vector& q, double) {
            const Vector u = q - center;
            return Matrix((k + 12.0 * quartic.cwiseProduct(u.cwiseAbs2())).asDiagonal());
        },
        omega);
}

// Block-diagonal sum V(x, y) = a(x) + b(y).
inline PotentialModel direct_sum(const PotentialModel& a, const PotentialModel& b) {
    const auto na = a.dim();
    const auto nb = b.dim();
    Vector freq(a.frequencies().size() + b.frequencies().size());
    freq << a.frequencies(), b.frequencies();
    PotentialModel sum(
        a.name() + "+" + b.name(), na + nb,
        [=](const Vector& q, double t) { return a.value(q.head(na), t) + b.value(q.tail(nb), t); },
        [=](const Vector& q, double t) {
            Vector g(na + nb);
            g << a.gradient(q.head(na), t), b.gradient(q.tail(nb), t);
            return g;
        },
        [=](const Vector& q, double t) {
            Matrix h = Matrix::Zero(na + nb, na + nb);
            h.topLeftCorner(na, na) = a.hessian(q.head(na), t);
            h.bottomRightCorner(nb, nb) = b.hessian(q.tail(nb), t);
            return h;
        },
        freq);
    sum.mark_time_dependent(a.time_dependent() || b.time_dependent());
    return sum;
}

// a + scale * b on a common space.
inline PotentialModel add_scaled(const PotentialModel& a, const PotentialModel& b, double scale) {
    detail::require(a.dim() == b.dim(), "add_scaled: dimension mismatch");
    PotentialModel sum(
        a.name() + "+lambda*" + b.name(), a.dim(),
        [=](const Vector& q, double t) { return a.value(q, t) + scale * b.value(q, t); },
        [=](const Vector& q, double t) { return (a.gradient(q, t) + scale * b.gradient(q, t)).eval(); },
        [=](const Vector& q, double t) { return (a.hessian(q, t) + scale * b.hessian(q, t)).eval(); },
        a.frequencies());
    sum.mark_time_dependent(a.time_dependent() || b.time_dependent());
    return sum;
}

namespace detail {

struct ModelSpec {
    std::set<std::string> required;
    std::set<std::string> optional;
};

inline const std::map<std::string, ModelSpec>& model_specs() {
    static const std::map<std::string, ModelSpec> specs = {
        {"free", {{}, {"dim"}}},
        {"harmonic", {{"omega"}, {"mass", "center"}}},
        {"quartic", {{"omega", "g"}, {"mass", "center"}}},
        {"gaussian_bump", {{"height", "width"}, {"center"}}},
        {"constant", {{"value"}, {"dim"}}},
        {"bilinear", {{"c"}, {"n_system", "system_index"}}},
        {"gaussian_window", {{"c", "x0", "width"}, {"n_system", "system_index"}}},
        {"system_window", {{"c", "x0", "width", "n_bath"}, {"n_system", "system_index"}}},
        {"lattice_step", {{"c", "spacing"}, {"n_system"}}},
    };
    return specs;
}

inline std::string join_names(const std::set<std::string>& names) {
    std::string out;
    for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
    return out;
}

inline void check_params(const std::string& name, const Params& params) {
    const auto& specs = model_specs();
    auto it = specs.find(name);
    if (it == specs.end()) {
        std::set<std::string> names;
        for (const auto& [k, v] : specs) names.insert(k);
        throw ConfigError("unknown potential model '" + name + "' (valid: " + join_names(names) + ")");
    }
    for (const auto& r : it->second.required) {
        if (!params.has(r))
            throw ConfigError("model '" + name + "' is missing parameter '" + r + "' (required: " +
                              join_names(it->second.required) + ")");
    }
    for (const auto& [key, v] : params.values()) {
        if (!it->second.required.count(key) && !it->second.optional.count(key)) {
            std::set<std::string> all = it->second.required;
            all.insert(it->second.optional.begin(), it->second.optional.end());
            throw ConfigError("model '" + name + "' does not take parameter '" + key + "' (accepted: " +
                              join_names(all) + ")");
        }
    }
}

inline Eigen::Index count_param(const Params& params, const std::string& key, Eigen::Index fallback) {
    const double v = params.scalar_or(key, static_cast<double>(fallback));
    if (v < 1 || v != std::floor(v)) throw ConfigError("parameter '" + key + "' must be a positive integer");
    return static_cast<Eigen::Index>(v);
}

// V(x, eta) = window(x_s) * sum_k c_k h(eta_k), where x_s is one system
// coordinate; covers the bilinear and Gaussian-window couplings.
inline PotentialModel separable_coupling(std::string name, Eigen::Index n_sys, Eigen::Index idx, const Vector& c,
                                         std::function<Vector(double)> window) {
    const auto nb = c.size();
    const auto n = n_sys + nb;
    return PotentialModel(
        std::move(name), n,
        [=](const Vector& q, double) { return window(q(idx))(0) * c.dot(q.tail(nb)); },
        [=](const Vector& q, double) {
            const Vector w = window(q(idx));
            Vector g = Vector::Zero(n);
            g(idx) = w(1) * c.dot(q.tail(nb));
            g.tail(nb) = w(0) * c;
            return g;
        },
        [=](const Vector& q, double) {
            const Vector w = window(q(idx));
            Matrix h = Matrix::Zero(n, n);
            h(idx, idx) = w(2) * c.dot(q.tail(nb));
            h.block(idx, n_sys, 1, nb) = w(1) * c.transpose();
            h.block(n_sys, idx, nb, 1) = w(1) * c;
            return h;
        });
}

// Gaussian window and its first two derivatives.
inline std::function<Vector(double)> gaussian_window(double x0, double width) {
    return [=](double x) {
        const double u = (x - x0) / width;
        const double g = std::exp(-0.5 * u * u);
        Vector w(3);
        w << g, -u / width * g, (u * u - 1.0) / (width * width) * g;
        return w;
    };
}

}  // namespace detail

// Shipped models:
//   free             V = 0
//   harmonic         V = sum 1/2 m w^2 (q-c)^2
//   quartic          harmonic + g (q-c)^4
//   gaussian_bump    V = height exp(-(q-c)^2 / 2 width^2), one coordinate
//   constant         V = value
//   bilinear         V = x * sum_k c_k eta_k                        (couplings act on
//   gaussian_window  V = exp(-(x-x0)^2/2w^2) sum_k c_k eta_k         system + bath
//   system_window    V = c exp(-(x-x0)^2/2w^2), no bath dependence   coordinates)
//   lattice_step     V = sum_k c_k (eta_k - a/(2 pi) sin(2 pi eta_k / a))
// The lattice_step coupling has zero force and zero curvature on the bath at
// every lattice site eta = n a, while its value still depends on the site.
inline PotentialModel builtin_model(const std::string& name, const Params& params) {
    detail::check_params(name, params);
    if (name == "free") return free_model(detail::count_param(params, "dim", 1));
    if (name == "constant") {
        const auto dim = detail::count_param(params, "dim", 1);
        const double v0 = params.scalar("value");
        return PotentialModel(
            name, dim, [=](const Vector&, double) { return v0; },
            [=](const Vector&, double) { return Vector::Zero(dim).eval(); },
            [=](const Vector&, double) { return Matrix::Zero(dim, dim).eval(); });
    }
    if (name == "harmonic" || name == "quartic") {
        const auto n = static_cast<Eigen::Index>(params.list("omega").size());
        const Vector omega = params.vector("omega", n);
        if ((omega.array() <= 0.0).any()) throw ConfigError(name + ": omega must be positive");
        const Vector mass = params.vector_or("mass", n, 1.0);
        if ((mass.array() <= 0.0).any()) throw ConfigError(name + ": mass must be positive");
        const Vector center = params.vector_or("center", n, 0.0);
        const Vector g = name == "quartic" ? params.vector("g", n) : Vector::Zero(n).eval();
        return anharmonic_model(name, omega, mass, center, g);
    }
    if (name == "gaussian_bump") {
        const double h = params.scalar("height");
        const double w = params.scalar("width");
        if (!(w > 0.0)) throw ConfigError("gaussian_bump: width must be positive");
        const auto win = detail::gaussian_window(params.scalar_or("center", 0.0), w);
        return PotentialModel(
            name, 1, [=](const Vector& q, double) { return h * win(q(0))(0); },
            [=](const Vector& q, double) { return Vector::Constant(1, h * win(q(0))(1)).eval(); },
            [=](const Vector& q, double) { return Matrix::Constant(1, 1, h * win(q(0))(2)).eval(); });
    }

    const auto n_sys = detail::count_param(params, "n_system", 1);
    const auto idx = static_cast<Eigen::Index>(params.scalar_or("system_index", 0.0));
    if (idx < 0 || idx >= n_sys) throw ConfigError(name + ": system_index out of range");

    if (name == "bilinear" || name == "gaussian_window") {
        const auto& cl = params.list("c");
        const Vector c = Eigen::Map<const Vector>(cl.data(), static_cast<Eigen::Index>(cl.size()));
        if (c.size() == 0) throw ConfigError(name + ": c must list one coefficient per bath coordinate");
        std::function<Vector(double)> window;
        if (name == "bilinear") {
            window = [](double x) {
                Vector w(3);
                w << x, 1.0, 0.0;
                return w;
            };
        } else {
            const double w = params.scalar("width");
            if (!(w > 0.0)) throw ConfigError("gaussian_window: width must be positive");
            window = detail::gaussian_window(params.scalar("x0"), w);
        }
        return detail::separable_coupling(name, n_sys, idx, c, window);
    }
    if (name == "system_window") {
        const auto nb = detail::count_param(params, "n_bath", 1);
        const double w = params.scalar("width");
        if (!(w > 0.0)) throw ConfigError("system_window: width must be positive");
        const double c = params.scalar("c");
        const auto win = detail::gaussian_window(params.scalar("x0"), w);
        const auto n = n_sys + nb;
        return PotentialModel(
            name, n, [=](const Vector& q, double) { return c * win(q(idx))(0); },
            [=](const Vector& q, double) {
                Vector g = Vector::Zero(n);
                g(idx) = c * win(q(idx))(1);
                return g;
            },
            [=](const Vector& q, double) {
                Matrix h = Matrix::Zero(n, n);
                h(idx, idx) = c * win(q(idx))(2);
                return h;
            });
    }
    // lattice_step
    const auto& cl = params.list("c");
    const Vector c = Eigen::Map<const Vector>(cl.data(), static_cast<Eigen::Index>(cl.size()));
    const double a = params.scalar("spacing");
    if (!(a > 0.0)) throw ConfigError("lattice_step: spacing must be positive");
    const auto nb = c.size();
    const auto n = n_sys + nb;
    const double kk = 2.0 * kPi / a;
    return PotentialModel(
        name, n,
        [=](const Vector& q, double) {
            const Vector eta = q.tail(nb);
            return c.dot((eta.array() - (eta.array() * kk).sin() / kk).matrix());
        },
        [=](const Vector& q, double) {
            const Vector eta = q.tail(nb);
            Vector g = Vector::Zero(n);
            g.tail(nb) = c.cwiseProduct((1.0 - (eta.array() * kk).cos()).matrix());
            return g;
        },
        [=](const Vector& q, double) {
            const Vector eta = q.tail(nb);
            Matrix h = Matrix::Zero(n, n);
            h.bottomRightCorner(nb, nb) = Matrix(c.cwiseProduct((kk * (eta.array() * kk).sin()).matrix()).asDiagonal());
            return h;
        });
}

inline std::vector<std::string> builtin_model_names() {
    std::vector<std::string> out;
    for (const auto& [k, v] : detail::model_specs()) out.push_back(k);
    return out;
}

// H = H_system + H_bath + lambda V_1 on the joint coordinates (system first).
struct JointHamiltonian {
    PotentialModel system;
    PotentialModel bath;
    PotentialModel coupling;
    double lambda = 0.0;
    Vector masses;  // system masses followed by bath masses

    JointHamiltonian(PotentialModel sys, PotentialModel bth, PotentialModel cpl, double lam, Vector m)
        : system(std::move(sys)), bath(std::move(bth)), coupling(std::move(cpl)), lambda(lam), masses(std::move(m)) {
        if (coupling.dim() != system.dim() + bath.dim()) {
            std::ostringstream os;
            os << "JointHamiltonian: coupling acts on " << coupling.dim() << " coordinates, expected "
               << system.dim() + bath.dim();
            throw ContractError(os.str());
        }
        detail::require(masses.size() == coupling.dim(), "JointHamiltonian: mass vector has wrong length");
        if ((masses.array() <= 0.0).any()) throw DomainError("JointHamiltonian: masses must be positive");
        if (lambda < 0.0) throw DomainError("JointHamiltonian: lambda must be non-negative");
    }

    Eigen::Index n_system() const { return system.dim(); }
    Eigen::Index n_bath() const { return bath.dim(); }
    Vector system_masses() const { return masses.head(n_system()); }
    Vector bath_masses() const { return masses.tail(n_bath()); }

    PotentialModel unperturbed() const { return direct_sum(system, bath); }
    PotentialModel full() const { return add_scaled(unperturbed(), coupling, lambda); }
};

}  // namespace wavecoh
