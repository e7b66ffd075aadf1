#include <iostream>

#include "CLI11.hpp"
#include "wavecoh/runner.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kNumerical = 3, kIo = 4 };

template <class Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        return kOk;
    } catch (const wavecoh::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const wavecoh::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const wavecoh::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian wavepacket decoherence toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", wavecoh::kVersion);

    std::string config_path;
    wavecoh::RunOptions opts;
    std::uint64_t seed = 0;

    auto* run = app.add_subcommand("run", "run a scenario and write its outputs");
    run->add_option("config", config_path, "scenario file")->required();
    run->add_option("--output-dir,-o", opts.output_dir, "output directory");
    auto* seed_opt = run->add_option("--seed", seed, "override the scenario seed");
    run->add_flag("--oracle", opts.force_oracle, "also run the exact grid oracle");
    run->add_flag("--quiet,-q", opts.quiet, "no progress output");

    bool check_oracle = false;
    auto* val = app.add_subcommand("validate", "check a scenario file without running it");
    val->add_option("config", config_path, "scenario file")->required();
    val->add_flag("--oracle", check_oracle, "also check the oracle settings");

    CLI11_PARSE(app, argc, argv);

    if (*run) {
        if (*seed_opt) opts.seed = seed;
        return guarded([&] {
            wavecoh::run_scenario(config_path, opts);
            if (!opts.quiet) std::cerr << "outputs written to " << opts.output_dir << "\n";
        });
    }
    return guarded([&] {
        const auto cfg = wavecoh::load_config(config_path);
        wavecoh::validate_config(cfg, check_oracle);
        const auto points = wavecoh::sweep_points(cfg);
        std::cout << config_path << ": ok (" << points.size() << " sweep point" << (points.size() == 1 ? "" : "s")
                  << ")\n";
    });
}
