#pragma once

// Scenario files: JSON documents describing a two-arm run and its sweeps.
//
//   {
//     "name": "...", "hbar": 1.0 | [..],
//     "system": {"mass": [..],
//                "left":  {"potential": MODEL, "packet": PACKET},
//                "right": {"potential": MODEL, "packet": PACKET}},
//     "bath": {"mass": [..], "potential": MODEL, "ensemble": ENSEMBLE},
//     "coupling": {"model": "...", "params": {..}, "lambda": x | [..]},
//     "integration": {"t_final": T, "dt": h},
//     "outputs": {"time_series_stride": n, "histogram_bins": n},
//     "oracle": {"enabled": b, "system_axis": AXIS, "bath_axis": AXIS, "certify": b, "dt": h}
//   }
//
//   MODEL    {"model": name, "params": {key: number | [numbers]}}
//   PACKET   {"q": [..], "p": [..], "mass_omega": [..]}  or  {"q", "p", "A": {"re": M, "im": M}}
//   ENSEMBLE {"method": "pure", "packets": [..], "amplitudes": [..], "phases": [..]}
//            {"method": "mixture", "packets": [..], "probabilities": [..]}
//            {"method": "general", "packets": [..], "weights": {"re": M, "im": M}}
//            {"method": "thermal", "omega": [..], "temperature": x | [..], "n_samples": n, "seed": s}
//   AXIS     {"n": points, "x_min": a, "x_max": b}

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wavecoh/oracle.hpp"

namespace wavecoh {

struct ModelConfig {
    std::string model;
    Params params;
};

struct PacketConfig {
    std::vector<double> q;
    std::vector<double> p;
    std::vector<double> mass_omega;  // empty when A is given
    ComplexMatrix A;
};

struct EnsembleConfig {
    std::string method;
    std::vector<PacketConfig> packets;
    std::vector<double> amplitudes;
    std::vector<double> phases;
    std::vector<double> probabilities;
    ComplexMatrix weights;
    std::vector<double> omega;
    std::vector<double> temperatures;
    std::size_t n_samples = 1;
    std::uint64_t seed = 0;
};

struct OutputConfig {
    std::size_t time_series_stride = 10;
    std::size_t histogram_bins = 32;
};

struct OracleConfig {
    bool enabled = false;
    std::optional<GridAxis> system_axis;
    std::optional<GridAxis> bath_axis;
    bool certify = false;
    double dt = 0.0;
};

struct ScenarioConfig {
    std::string name;
    std::vector<double> hbar;
    std::vector<double> system_mass;
    ModelConfig left_potential;
    ModelConfig right_potential;
    PacketConfig left_packet;
    PacketConfig right_packet;
    std::vector<double> bath_mass;
    ModelConfig bath_potential;
    EnsembleConfig ensemble;
    ModelConfig coupling;
    std::vector<double> lambda;
    double t_final = 0.0;
    double dt = 0.0;  // 0 selects the default step
    OutputConfig outputs;
    OracleConfig oracle;
};

namespace detail {

using json = nlohmann::json;

// A JSON value with its dotted path for error messages.
class Field {
public:
    Field(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    const json& raw() const { return j_; }

    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path_ + ": " + what); }

    bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

    Field at(const std::string& key) const {
        if (!j_.is_object()) fail("expected an object");
        if (!j_.contains(key)) throw ConfigError(join(key) + ": required field is missing");
        return Field(j_.at(key), join(key));
    }
    Field at(std::size_t i) const { return Field(j_.at(i), path_ + "[" + std::to_string(i) + "]"); }

    void allow_only(std::initializer_list<const char*> keys) const {
        if (!j_.is_object()) fail("expected an object");
        const std::set<std::string> allowed(keys.begin(), keys.end());
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!allowed.count(it.key())) {
                std::string list;
                for (const auto& k : allowed) list += (list.empty() ? "" : ", ") + k;
                throw ConfigError(join(it.key()) + ": unknown field (allowed: " + list + ")");
            }
        }
    }

    double number() const {
        if (!j_.is_number()) fail("expected a number");
        const double v = j_.get<double>();
        if (!std::isfinite(v)) fail("number must be finite");
        return v;
    }
    bool boolean() const {
        if (!j_.is_boolean()) fail("expected true or false");
        return j_.get<bool>();
    }
    std::string string() const {
        if (!j_.is_string()) fail("expected a string");
        return j_.get<std::string>();
    }
    std::size_t count() const {
        const double v = number();
        if (v < 0.0 || v != std::floor(v)) fail("expected a non-negative integer");
        return static_cast<std::size_t>(v);
    }
    // A number or a non-empty list of numbers.
    std::vector<double> numbers() const {
        if (j_.is_number()) return {number()};
        if (!j_.is_array()) fail("expected a number or a list of numbers");
        if (j_.empty()) fail("list must not be empty");
        std::vector<double> out;
        for (std::size_t i = 0; i < j_.size(); ++i) out.push_back(at(i).number());
        return out;
    }
    // A scalar (1x1) or a list of rows.
    Matrix matrix() const {
        if (j_.is_number()) return Matrix::Constant(1, 1, number());
        if (!j_.is_array() || j_.empty()) fail("expected a number or a list of rows");
        const std::size_t rows = j_.size();
        Matrix m;
        for (std::size_t r = 0; r < rows; ++r) {
            const Field row = at(r);
            const auto vals = row.numbers();
            if (r == 0) m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(vals.size()));
            if (static_cast<Eigen::Index>(vals.size()) != m.cols()) row.fail("rows must have equal length");
            for (std::size_t c = 0; c < vals.size(); ++c)
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = vals[c];
        }
        return m;
    }
    ComplexMatrix complex_matrix() const {
        allow_only({"re", "im"});
        const Matrix re = at("re").matrix();
        const Matrix im = has("im") ? at("im").matrix() : Matrix::Zero(re.rows(), re.cols()).eval();
        if (re.rows() != im.rows() || re.cols() != im.cols()) fail("re and im parts have different shapes");
        ComplexMatrix out(re.rows(), re.cols());
        out.real() = re;
        out.imag() = im;
        return out;
    }

private:
    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& j_;
    std::string path_;
};

inline ModelConfig parse_model(const Field& f) {
    f.allow_only({"model", "params"});
    ModelConfig m;
    m.model = f.at("model").string();
    if (f.has("params")) {
        const Field params = f.at("params");
        if (!params.raw().is_object()) params.fail("expected an object");
        for (auto it = params.raw().begin(); it != params.raw().end(); ++it)
            m.params.set(it.key(), params.at(it.key()).numbers());
    }
    if (!model_specs().count(m.model)) {
        std::string names;
        for (const auto& n : builtin_model_names()) names += (names.empty() ? "" : ", ") + n;
        f.at("model").fail("unknown model '" + m.model + "' (available: " + names + ")");
    }
    return m;
}

inline PacketConfig parse_packet(const Field& f) {
    f.allow_only({"q", "p", "mass_omega", "A"});
    PacketConfig pk;
    pk.q = f.at("q").numbers();
    pk.p = f.has("p") ? f.at("p").numbers() : std::vector<double>(pk.q.size(), 0.0);
    if (pk.p.size() != pk.q.size()) f.at("p").fail("must have one entry per coordinate");
    if (f.has("mass_omega") == f.has("A")) f.fail("give exactly one of 'mass_omega' or 'A'");
    if (f.has("mass_omega")) {
        pk.mass_omega = f.at("mass_omega").numbers();
        if (pk.mass_omega.size() == 1 && pk.q.size() > 1) pk.mass_omega.assign(pk.q.size(), pk.mass_omega[0]);
        if (pk.mass_omega.size() != pk.q.size()) f.at("mass_omega").fail("must have one entry per coordinate");
        for (double v : pk.mass_omega)
            if (!(v > 0.0)) f.at("mass_omega").fail("entries must be positive");
    } else {
        pk.A = f.at("A").complex_matrix();
        if (pk.A.rows() != static_cast<Eigen::Index>(pk.q.size()) || pk.A.cols() != pk.A.rows())
            f.at("A").fail("must be square with one row per coordinate");
    }
    return pk;
}

inline GridAxis parse_axis(const Field& f) {
    f.allow_only({"n", "x_min", "x_max"});
    GridAxis ax{f.at("n").count(), f.at("x_min").number(), f.at("x_max").number()};
    if (!is_power_of_two(ax.n) || ax.n < 4) f.at("n").fail("must be a power of two >= 4");
    if (ax.n > kMaxGridPoints) f.at("n").fail("at most " + std::to_string(kMaxGridPoints) + " points per axis");
    if (!(ax.x_max > ax.x_min)) f.fail("x_max must exceed x_min");
    return ax;
}

inline std::vector<double> positive_list(const Field& f) {
    auto v = f.numbers();
    for (double x : v)
        if (!(x > 0.0)) f.fail("entries must be positive");
    return v;
}

inline EnsembleConfig parse_ensemble(const Field& f) {
    EnsembleConfig e;
    e.method = f.at("method").string();
    auto packets = [&] {
        const Field list = f.at("packets");
        if (!list.raw().is_array() || list.raw().empty()) list.fail("expected a non-empty list of packets");
        for (std::size_t i = 0; i < list.raw().size(); ++i) e.packets.push_back(parse_packet(list.at(i)));
    };
    auto per_packet = [&](const char* key) {
        auto v = f.at(key).numbers();
        if (v.size() != e.packets.size()) f.at(key).fail("must have one entry per packet");
        return v;
    };
    if (e.method == "pure") {
        f.allow_only({"method", "packets", "amplitudes", "phases"});
        packets();
        e.amplitudes = per_packet("amplitudes");
        e.phases = f.has("phases") ? per_packet("phases") : std::vector<double>(e.packets.size(), 0.0);
    } else if (e.method == "mixture") {
        f.allow_only({"method", "packets", "probabilities"});
        packets();
        e.probabilities = per_packet("probabilities");
    } else if (e.method == "general") {
        f.allow_only({"method", "packets", "weights"});
        packets();
        e.weights = f.at("weights").complex_matrix();
        const auto m = static_cast<Eigen::Index>(e.packets.size());
        if (e.weights.rows() != m || e.weights.cols() != m) f.at("weights").fail("must be M x M for M packets");
    } else if (e.method == "thermal") {
        f.allow_only({"method", "omega", "temperature", "n_samples", "seed"});
        e.omega = positive_list(f.at("omega"));
        e.temperatures = positive_list(f.at("temperature"));
        e.n_samples = f.at("n_samples").count();
        if (e.n_samples < 1) f.at("n_samples").fail("must be at least 1");
        e.seed = f.has("seed") ? static_cast<std::uint64_t>(f.at("seed").count()) : 0;
    } else {
        f.at("method").fail("unknown method '" + e.method + "' (available: general, mixture, pure, thermal)");
    }
    return e;
}

inline std::string line_context(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline ScenarioConfig parse_config(const std::string& text, const std::string& source = "config") {
    detail::json doc;
    try {
        doc = detail::json::parse(text);
    } catch (const detail::json::parse_error& e) {
        std::string msg = e.what();
        const auto pos = msg.find("syntax error");
        throw ConfigError(source + ": " + detail::line_context(text, e.byte) + ": " +
                          (pos == std::string::npos ? msg : msg.substr(pos)));
    }
    const detail::Field root(doc, "");
    root.allow_only({"name", "hbar", "system", "bath", "coupling", "integration", "outputs", "oracle"});
    ScenarioConfig c;
    c.name = root.has("name") ? root.at("name").string() : source;
    c.hbar = root.has("hbar") ? detail::positive_list(root.at("hbar")) : std::vector<double>{1.0};

    const auto sys = root.at("system");
    sys.allow_only({"mass", "left", "right"});
    c.system_mass = detail::positive_list(sys.at("mass"));
    for (int arm = 0; arm < 2; ++arm) {
        const auto f = sys.at(arm == 0 ? "left" : "right");
        f.allow_only({"potential", "packet"});
        (arm == 0 ? c.left_potential : c.right_potential) = detail::parse_model(f.at("potential"));
        auto pk = detail::parse_packet(f.at("packet"));
        if (pk.q.size() != c.system_mass.size()) f.at("packet").at("q").fail("must have one entry per system mass");
        (arm == 0 ? c.left_packet : c.right_packet) = std::move(pk);
    }

    const auto bath = root.at("bath");
    bath.allow_only({"mass", "potential", "ensemble"});
    c.bath_mass = detail::positive_list(bath.at("mass"));
    c.bath_potential = detail::parse_model(bath.at("potential"));
    c.ensemble = detail::parse_ensemble(bath.at("ensemble"));
    for (std::size_t i = 0; i < c.ensemble.packets.size(); ++i)
        if (c.ensemble.packets[i].q.size() != c.bath_mass.size())
            bath.at("ensemble").at("packets").at(i).at("q").fail("must have one entry per bath mass");
    if (c.ensemble.method == "thermal" && c.ensemble.omega.size() != c.bath_mass.size())
        bath.at("ensemble").at("omega").fail("must have one entry per bath mass");

    const auto cpl = root.at("coupling");
    cpl.allow_only({"model", "params", "lambda"});
    {
        detail::json model_part = {{"model", cpl.raw().at("model")}};
        if (cpl.has("params")) model_part["params"] = cpl.raw().at("params");
        c.coupling = detail::parse_model(detail::Field(model_part, cpl.path().empty() ? "coupling" : cpl.path()));
    }
    c.lambda = cpl.at("lambda").numbers();
    for (double l : c.lambda)
        if (l < 0.0) cpl.at("lambda").fail("values must be non-negative");

    const auto integ = root.at("integration");
    integ.allow_only({"t_final", "dt"});
    c.t_final = integ.at("t_final").number();
    if (!(c.t_final > 0.0)) integ.at("t_final").fail("must be positive");
    if (integ.has("dt")) {
        c.dt = integ.at("dt").number();
        if (!(c.dt > 0.0)) integ.at("dt").fail("must be positive");
        const double n = c.t_final / c.dt;
        if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
            integ.at("dt").fail("dt must divide t_final (t_final / dt = " + std::to_string(n) + ")");
    }

    if (root.has("outputs")) {
        const auto out = root.at("outputs");
        out.allow_only({"time_series_stride", "histogram_bins"});
        if (out.has("time_series_stride")) c.outputs.time_series_stride = out.at("time_series_stride").count();
        if (out.has("histogram_bins")) c.outputs.histogram_bins = out.at("histogram_bins").count();
        if (c.outputs.time_series_stride < 1) out.at("time_series_stride").fail("must be at least 1");
        if (c.outputs.histogram_bins < 1) out.at("histogram_bins").fail("must be at least 1");
    }
    if (root.has("oracle")) {
        const auto o = root.at("oracle");
        o.allow_only({"enabled", "system_axis", "bath_axis", "certify", "dt"});
        c.oracle.enabled = o.has("enabled") && o.at("enabled").boolean();
        if (o.has("system_axis")) c.oracle.system_axis = detail::parse_axis(o.at("system_axis"));
        if (o.has("bath_axis")) c.oracle.bath_axis = detail::parse_axis(o.at("bath_axis"));
        c.oracle.certify = o.has("certify") && o.at("certify").boolean();
        if (o.has("dt")) {
            c.oracle.dt = o.at("dt").number();
            const double n = c.t_final / c.oracle.dt;
            if (!(c.oracle.dt > 0.0) || std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
                o.at("dt").fail("must be positive and divide t_final");
        }
    }
    return c;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ScenarioConfig load_config(const std::string& path) { return parse_config(read_text_file(path), path); }

struct SweepPoint {
    std::size_t index = 0;
    double hbar = 1.0;
    std::optional<double> temperature;
    double lambda = 0.0;
};

// Cartesian product in the order hbar, temperature, lambda (lambda fastest).
inline std::vector<SweepPoint> sweep_points(const ScenarioConfig& c) {
    std::vector<std::optional<double>> temps;
    if (c.ensemble.method == "thermal")
        for (double t : c.ensemble.temperatures) temps.emplace_back(t);
    else
        temps.emplace_back(std::nullopt);
    std::vector<SweepPoint> out;
    for (double h : c.hbar)
        for (const auto& t : temps)
            for (double l : c.lambda) out.push_back({out.size(), h, t, l});
    return out;
}

namespace detail {

inline GaussianWavepacket build_packet(const PacketConfig& pk, double hbar) {
    const Vector q = to_vector(pk.q);
    const Vector p = to_vector(pk.p);
    if (!pk.mass_omega.empty()) return coherent(q, p, to_vector(pk.mass_omega), hbar);
    return normalized(q, p, pk.A, hbar);
}

inline PotentialModel build_model(const ModelConfig& m, const std::string& where) {
    try {
        return builtin_model(m.model, m.params);
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

}  // namespace detail

inline TwoArmScenario build_scenario(const ScenarioConfig& c, double hbar, double lambda) {
    const auto left = detail::build_model(c.left_potential, "system.left.potential");
    const auto right = detail::build_model(c.right_potential, "system.right.potential");
    const auto bath = detail::build_model(c.bath_potential, "bath.potential");
    const auto coupling = detail::build_model(c.coupling, "coupling");
    const auto ns = static_cast<Eigen::Index>(c.system_mass.size());
    const auto nb = static_cast<Eigen::Index>(c.bath_mass.size());
    if (left.dim() != ns || right.dim() != ns)
        throw ConfigError("system: potentials must act on " + std::to_string(ns) + " coordinate(s)");
    if (bath.dim() != nb) throw ConfigError("bath.potential: must act on " + std::to_string(nb) + " coordinate(s)");
    if (coupling.dim() != ns + nb)
        throw ConfigError("coupling: model acts on " + std::to_string(coupling.dim()) + " coordinates, expected " +
                          std::to_string(ns + nb));
    Vector masses(ns + nb);
    masses << detail::to_vector(c.system_mass), detail::to_vector(c.bath_mass);
    JointHamiltonian joint(right, bath, coupling, lambda, masses);
    const double dt = c.dt > 0.0 ? c.dt : default_dt(joint.unperturbed(), c.t_final);
    return TwoArmScenario{left, detail::build_packet(c.left_packet, hbar), detail::build_packet(c.right_packet, hbar),
                          joint, c.t_final, dt};
}

inline BathEnsemble build_ensemble(const ScenarioConfig& c, double hbar, std::optional<double> temperature,
                                   std::uint64_t seed) {
    const auto& e = c.ensemble;
    if (e.method == "thermal") {
        ThermalOptions opts{detail::to_vector(c.bath_mass), hbar};
        return thermal_harmonic(detail::to_vector(e.omega), temperature.value_or(e.temperatures.front()), e.n_samples,
                                seed, opts);
    }
    std::vector<GaussianWavepacket> packets;
    for (const auto& pk : e.packets) packets.push_back(detail::build_packet(pk, hbar));
    if (e.method == "pure") return pure_state(packets, e.amplitudes, e.phases);
    if (e.method == "mixture") return diagonal_mixture(packets, e.probabilities);
    return general_ensemble(packets, e.weights);
}

inline std::uint64_t config_seed(const ScenarioConfig& c) { return c.ensemble.seed; }

// Dry run: builds every model, packet and ensemble without propagating.
inline void validate_config(const ScenarioConfig& c, bool require_oracle = false) {
    for (double h : c.hbar) {
        try {
            const auto sc = build_scenario(c, h, c.lambda.front());
            const auto ens = build_ensemble(c, h, std::nullopt, config_seed(c));
            const auto report = validate(ens);
            if (!report.ok()) throw ConfigError("bath.ensemble: weights do not form a valid density matrix");
            if (ens.dim() != sc.joint.n_bath()) throw ConfigError("bath.ensemble: packet dimension mismatch");
            detail::step_count(sc.t_final, sc.dt, "integration");
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(std::string("invalid scenario: ") + e.what());
        }
    }
    if (c.oracle.enabled || require_oracle) {
        if (!c.oracle.system_axis) throw ConfigError("oracle.system_axis: required when the oracle is enabled");
        if (!c.oracle.bath_axis) throw ConfigError("oracle.bath_axis: required when the oracle is enabled");
        if (c.system_mass.size() != 1 || c.bath_mass.size() != 1)
            throw ConfigError("oracle: needs exactly one system and one bath coordinate");
        if (c.ensemble.method == "thermal" && c.ensemble.n_samples > 16)
            throw ConfigError("oracle: at most 16 bath members");
        if (c.ensemble.method != "thermal" && c.ensemble.packets.size() > 16)
            throw ConfigError("oracle: at most 16 bath members");
    }
}

}  // namespace wavecoh
