#pragma once

// Scenario runs: sweep execution and the output files.
//
//   manifest.json        config hash, seed, versions
//   reports.csv          one CoherenceReport row per sweep point
//   timeseries.csv       M_coh, |mu|, phase spread, mean |O_ii| over time
//   phase_histogram.csv  P(phi) per sweep point
//   oracle.csv           semiclassical vs exact grid results (oracle runs)
//   summary.json         everything above per point, plus lambda-halving ratios

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "wavecoh/scenario.hpp"

namespace wavecoh {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
    std::string output_dir = "wavecoh_out";
    std::optional<std::uint64_t> seed;
    bool force_oracle = false;
    bool quiet = false;
};

struct PointResult {
    SweepPoint point;
    CoherenceReport report;
    PhaseHistogram histogram;
    std::optional<double> ipr;
    double nondynamical_m_coh = 0.0;
    std::vector<CoherenceReport> series;
    std::optional<OracleResult> oracle;
};

struct RunResult {
    ScenarioConfig config;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<PointResult> points;
};

namespace detail {

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot write '" + path.string() + "'");
    }
    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << csv_field(fields[i]);
        out_ << "\r\n";
        if (!out_) throw IoError("write failed for '" + path_.string() + "'");
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

inline std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline void write_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline double deficit(double m_coh) { return -std::log(2.0 * m_coh); }

}  // namespace detail

inline PointResult run_point(const ScenarioConfig& c, const SweepPoint& pt, std::uint64_t seed, bool oracle) {
    const TwoArmScenario scenario = build_scenario(c, pt.hbar, pt.lambda);
    const BathEnsemble ensemble = build_ensemble(c, pt.hbar, pt.temperature, seed);
    const TwoArmEvolution evo(scenario, ensemble);
    const std::size_t last = evo.samples() - 1;
    const EvolvedBranch final_branch = evo.branch(last);

    PointResult r;
    r.point = pt;
    r.report = total_purity(final_branch, ensemble);
    r.histogram = phase_distribution(final_branch, ensemble, c.outputs.histogram_bins);
    const auto prob = detail::diagonal_probabilities(ensemble);
    r.nondynamical_m_coh = nondynamical_estimate(prob, final_branch.phi).m_coh;
    const bool diagonal = (ensemble.weights - ComplexMatrix(ensemble.weights.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
    if (diagonal || ensemble.size() == 1) {
        std::vector<double> amps;
        for (double p : prob) amps.push_back(std::sqrt(p));
        r.ipr = ipr_bound(amps);
    }
    for (std::size_t k = 0; k < last; k += c.outputs.time_series_stride)
        r.series.push_back(coherence_summary(evo.branch(k), ensemble));
    r.series.push_back(coherence_summary(final_branch, ensemble));

    if (oracle) {
        OracleOptions o;
        o.system_axis = *c.oracle.system_axis;
        o.bath_axis = *c.oracle.bath_axis;
        o.dt = c.oracle.dt;
        o.certify = c.oracle.certify;
        r.oracle = exact_two_arm(scenario, ensemble, o);
    }
    return r;
}

// Pairs (lambda, lambda / 2) at equal hbar and temperature with the ratio of
// their decoherence deficits -ln(2 M_coh).
inline detail::json lambda_halving(const std::vector<PointResult>& points) {
    detail::json out = detail::json::array();
    for (const auto& a : points)
        for (const auto& b : points) {
            if (a.point.hbar != b.point.hbar || a.point.temperature != b.point.temperature) continue;
            if (!(b.point.lambda > 0.0) || std::abs(a.point.lambda - 2.0 * b.point.lambda) > 1e-12 * a.point.lambda)
                continue;
            const double da = detail::deficit(a.report.m_coh);
            const double db = detail::deficit(b.report.m_coh);
            detail::json e = {{"hbar", a.point.hbar},
                              {"temperature", detail::optional_json(a.point.temperature)},
                              {"lambda", a.point.lambda},
                              {"half_lambda", b.point.lambda},
                              {"deficit", da},
                              {"half_deficit", db}};
            e["ratio"] = db > 0.0 ? detail::json(da / db) : detail::json(nullptr);
            out.push_back(e);
        }
    return out;
}

inline void write_outputs(const RunResult& run, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    using detail::format_double;
    using detail::json;
    const auto& c = run.config;
    const bool any_oracle = std::any_of(run.points.begin(), run.points.end(), [](const auto& p) { return p.oracle.has_value(); });

    json manifest = {{"tool", "wavecoh"},
                     {"version", kVersion},
                     {"scenario", c.name},
                     {"config_hash", "fnv1a64:" + run.config_hash},
                     {"seed", run.seed},
                     {"sweep_points", run.points.size()},
                     {"oracle", any_oracle},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"fftw", std::string(fftw_version)},
                     {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    detail::write_json(dir / "manifest.json", manifest);

    {
        detail::CsvWriter csv(dir / "reports.csv");
        csv.row({"point", "hbar", "temperature", "lambda", "t", "m_coh", "purity_total", "trace", "block_ll",
                 "block_rr", "block_cross", "block_arm_overlap", "mu_re", "mu_im", "abs_mu", "phase_spread",
                 "mean_bath_overlap", "mean_system_displacement", "ipr", "nondynamical_m_coh"});
        for (const auto& p : run.points) {
            const auto& r = p.report;
            csv.row({std::to_string(p.point.index), format_double(p.point.hbar), detail::opt(p.point.temperature),
                     format_double(p.point.lambda), format_double(r.t), format_double(r.m_coh),
                     format_double(r.purity_total), format_double(r.trace), format_double(r.block_ll),
                     format_double(r.block_rr), format_double(r.block_cross), format_double(r.block_arm_overlap),
                     format_double(r.mu.real()), format_double(r.mu.imag()), format_double(std::abs(r.mu)),
                     format_double(r.phase_spread), format_double(r.mean_bath_overlap),
                     format_double(r.mean_system_displacement), detail::opt(p.ipr),
                     format_double(p.nondynamical_m_coh)});
        }
    }
    {
        detail::CsvWriter csv(dir / "timeseries.csv");
        csv.row({"point", "hbar", "temperature", "lambda", "t", "m_coh", "abs_mu", "phase_spread",
                 "mean_bath_overlap", "mean_system_displacement"});
        for (const auto& p : run.points)
            for (const auto& r : p.series)
                csv.row({std::to_string(p.point.index), format_double(p.point.hbar),
                         detail::opt(p.point.temperature), format_double(p.point.lambda), format_double(r.t),
                         format_double(r.m_coh), format_double(std::abs(r.mu)), format_double(r.phase_spread),
                         format_double(r.mean_bath_overlap), format_double(r.mean_system_displacement)});
    }
    {
        detail::CsvWriter csv(dir / "phase_histogram.csv");
        csv.row({"point", "hbar", "temperature", "lambda", "phi_lo", "phi_hi", "probability"});
        for (const auto& p : run.points)
            for (std::size_t b = 0; b < p.histogram.weights.size(); ++b)
                csv.row({std::to_string(p.point.index), format_double(p.point.hbar),
                         detail::opt(p.point.temperature), format_double(p.point.lambda),
                         format_double(p.histogram.edges[b]), format_double(p.histogram.edges[b + 1]),
                         format_double(p.histogram.weights[b])});
    }
    if (any_oracle) {
        detail::CsvWriter csv(dir / "oracle.csv");
        csv.row({"point", "hbar", "temperature", "lambda", "m_coh_semiclassical", "m_coh_exact", "m_coh_rel_error",
                 "purity_semiclassical", "purity_exact", "purity_rel_error", "certification_change"});
        for (const auto& p : run.points) {
            if (!p.oracle) continue;
            const auto& o = *p.oracle;
            csv.row({std::to_string(p.point.index), format_double(p.point.hbar), detail::opt(p.point.temperature),
                     format_double(p.point.lambda), format_double(p.report.m_coh), format_double(o.m_coh),
                     format_double(std::abs(p.report.m_coh - o.m_coh) / o.m_coh),
                     format_double(p.report.purity_total), format_double(o.purity),
                     format_double(std::abs(p.report.purity_total - o.purity) / o.purity),
                     format_double(o.certification_change)});
        }
    }

    json points = json::array();
    for (const auto& p : run.points) {
        const auto& r = p.report;
        json e = {{"point", p.point.index},
                  {"hbar", p.point.hbar},
                  {"temperature", detail::optional_json(p.point.temperature)},
                  {"lambda", p.point.lambda},
                  {"m_coh", r.m_coh},
                  {"purity_total", r.purity_total},
                  {"trace", r.trace},
                  {"blocks", {{"ll", r.block_ll}, {"rr", r.block_rr}, {"cross", r.block_cross},
                              {"arm_overlap", r.block_arm_overlap}}},
                  {"mu", {r.mu.real(), r.mu.imag()}},
                  {"phase_spread", r.phase_spread},
                  {"mean_bath_overlap", r.mean_bath_overlap},
                  {"mean_system_displacement", r.mean_system_displacement},
                  {"ipr", detail::optional_json(p.ipr)},
                  {"nondynamical_m_coh", p.nondynamical_m_coh},
                  {"phase_mean_histogram", {p.histogram.histogram_mean.real(), p.histogram.histogram_mean.imag()}},
                  {"phase_mean_direct", {p.histogram.direct_mean.real(), p.histogram.direct_mean.imag()}}};
        if (p.oracle)
            e["oracle"] = {{"m_coh", p.oracle->m_coh},
                           {"purity", p.oracle->purity},
                           {"trace", p.oracle->trace},
                           {"min_eigenvalue", p.oracle->min_eigenvalue},
                           {"certification_change", p.oracle->certification_change}};
        points.push_back(e);
    }
    json summary = {{"scenario", c.name}, {"points", points}, {"lambda_halving", lambda_halving(run.points)}};
    detail::write_json(dir / "summary.json", summary);
}

inline RunResult run_scenario(const std::string& config_path, const RunOptions& opts,
                              std::ostream& log = std::cerr) {
    const std::string text = read_text_file(config_path);
    RunResult run;
    run.config = parse_config(text, config_path);
    run.config_hash = detail::fnv1a_hex(text);
    run.seed = opts.seed.value_or(config_seed(run.config));
    const bool oracle = run.config.oracle.enabled || opts.force_oracle;
    validate_config(run.config, oracle);
    const auto points = sweep_points(run.config);
    for (const auto& pt : points) {
        if (!opts.quiet)
            log << "[" << pt.index + 1 << "/" << points.size() << "] hbar=" << pt.hbar
                << (pt.temperature ? " T=" + detail::format_double(*pt.temperature) : std::string())
                << " lambda=" << pt.lambda << std::endl;
        run.points.push_back(run_point(run.config, pt, run.seed, oracle));
        if (!opts.quiet) {
            const auto& r = run.points.back();
            log << "    m_coh=" << r.report.m_coh << " purity=" << r.report.purity_total;
            if (r.oracle) log << " exact m_coh=" << r.oracle->m_coh << " exact purity=" << r.oracle->purity;
            log << std::endl;
        }
    }
    write_outputs(run, opts.output_dir);
    return run;
}

}  // namespace wavecoh
