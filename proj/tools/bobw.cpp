// Command-line front end: run experiments, re-plot traces, run the self-test.
// Exit codes: 0 success, 1 invariant violation or aborted run, 2 config error.

#include "bobw/harness.hpp"
#include "bobw/selftest.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& policy,
            const std::string& out_dir, bool parallel) {
    bobw::ExperimentConfig config;
    bobw::Instance instance;
    try {
        config = bobw::load_config(config_path);
        if (seed) config.base_seed = *seed;
        if (!policy.empty()) config.policies = {policy};
        if (!out_dir.empty()) config.out_dir = out_dir;
        if (parallel) config.parallel = true;
        bobw::validate(config);
        instance = bobw::build_instance(config.env, config.horizon);
    } catch (const bobw::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    std::cout << "instance: K=" << config.env.num_actions << " d=" << config.env.dim << " regime=" << bobw::regime_name(config.env.regime)
              << " lambda_min=" << instance.moments.lambda_min << " delta_min=" << instance.delta_min << '\n';

    const auto traces = bobw::run(config, instance, config.parallel ? bobw::Exec::Parallel : bobw::Exec::Serial);
    const auto summaries = bobw::summarize(traces);
    for (const auto& p : bobw::emit(traces, summaries, config.out_dir)) std::cout << "wrote " << p << '\n';

    std::cout << std::left << std::setw(14) << "policy" << std::setw(14) << "R_T mean" << std::setw(12) << "SE" << std::setw(10)
              << "alpha" << "extra draws\n";
    for (const auto& s : summaries) {
        std::cout << std::setw(14) << s.policy << std::setw(14) << (s.mean.empty() ? 0.0 : s.mean.back()) << std::setw(12)
                  << (s.se.empty() ? 0.0 : s.se.back()) << std::setw(10) << s.alpha_hat << s.mean_extra_draws << '\n';
    }
    int status = 0;
    for (const auto& t : traces) {
        if (!t.error.empty()) {
            std::cerr << t.policy << " replication " << t.replication << " aborted: " << t.error << '\n';
            status = 1;
        }
        if (t.invariant_violations > 0) {
            std::cerr << t.policy << " replication " << t.replication << ": " << t.invariant_violations << " invariant violations\n";
            status = 1;
        }
    }
    return status;
}

int cmd_plot(const std::string& in_dir, const std::string& out_file) {
    namespace fs = std::filesystem;
    std::vector<bobw::RegretTrace> traces;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(in_dir))
        if (entry.path().extension() == ".csv" && entry.path().filename() != "summary.csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        auto part = bobw::parse_csv(in);
        traces.insert(traces.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    if (traces.empty()) {
        std::cerr << "no traces found in " << in_dir << '\n';
        return 1;
    }
    std::ofstream out(out_file);
    if (!out) {
        std::cerr << "cannot write " << out_file << '\n';
        return 1;
    }
    bobw::write_svg(bobw::bands_from_traces(traces), out);
    std::cout << "wrote " << out_file << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linear contextual bandit simulation laboratory"};
    app.require_subcommand(1);

    std::string config_path, policy, out_dir, in_dir, out_file;
    std::optional<std::uint64_t> seed;
    bool parallel = false;

    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("--config", config_path, "INI config file")->required();
    run->add_option("--seed", seed, "Base seed override");
    run->add_option("--policy", policy, "Run only this policy");
    run->add_option("--out", out_dir, "Output directory override");
    run->add_flag("--parallel", parallel, "Run replications with OpenMP");

    auto* plot = app.add_subcommand("plot", "Render regret curves from emitted CSV files");
    plot->add_option("--in", in_dir, "Directory with per-policy CSV files")->required();
    plot->add_option("--out", out_file, "SVG file to write")->required();

    auto* selftest = app.add_subcommand("selftest", "Run the fast invariant suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(config_path, seed, policy, out_dir, parallel);
        if (*plot) return cmd_plot(in_dir, out_file);
        if (*selftest) return bobw::run_selftest(std::cout) == 0 ? 0 : 1;
    } catch (const bobw::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
