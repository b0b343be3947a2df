#pragma once

// Experiment orchestration: INI configs, instance construction, seeded
// replications with pseudo-regret accounting, summaries, CSV/SVG output.

#include "bobw/env.hpp"
#include "bobw/ftrl_lc.hpp"
#include "bobw/kernels.hpp"
#include "bobw/policy.hpp"

#include <iosfwd>
#include <memory>
#include <optional>

namespace bobw {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EnvConfig {
    Regime regime = Regime::Stochastic;
    int num_actions = 2;
    int dim = 2;
    bool finite_contexts = true;
    int support_size = 20;
    double variance = 0.3;
    // Support contexts are redrawn until the per-context gap is at least this;
    // the first one is drawn with a gap in [g, 1.05 g] so that Delta_min ~ g.
    double support_min_gap = 0.0;
    // Adds shift * e_1 to each Gaussian draw before normalizing.
    double context_shift = 0.0;
    double noise_std = 0.5477225575051661;
    std::optional<long> corruption_horizon;  // default ceil(sqrt(T))
    double phase_factor = 1.6;
    double phase_gap = 0.125;
    long phase_initial_length = 10;
    int phase_optimal_arm = 0;
    std::uint64_t instance_seed = 1;
    long second_moment_samples = 100'000;
};

struct PolicyConfig {
    double lambda_reg = 1.0;
    double delta = 0.05;
    std::optional<double> c1;       // Corral base-learner stability constants
    std::optional<double> c2;
    std::optional<double> ftrl_c1;  // FTRL-LC rate constants c'_1, c'_2
    std::optional<double> ftrl_c2;
    long n_mc = 2000;
    double mwu_smoothing = 0.2;
    bool mgr_all_arms = true;
    MgrMode mgr_mode = MgrMode::Vector;
    bool throw_on_violation = false;
};

struct ExperimentConfig {
    std::vector<std::string> policies{"ftrl_lc"};
    EnvConfig env;
    long horizon = 50'000;
    int replications = 20;
    std::uint64_t base_seed = 1;
    std::string out_dir = "out";
    bool log_rounds = false;
    bool parallel = false;
    PolicyConfig policy;
};

// Sections [harness], [env], [policy]; unknown keys are rejected.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& config);

const std::vector<std::string>& known_policies();

struct Instance {
    ContextDistribution dist;
    LossModel model;
    SecondMomentInfo moments;
    double delta_min = 0.0;  // finite stochastic kinds; 0 otherwise
};

Instance build_instance(const EnvConfig& env, long horizon);

std::unique_ptr<Policy> make_policy(const std::string& name, const Instance& instance, long horizon, const PolicyConfig& config,
                                    Rng& rng);

// Always plays the comparator action.
class OraclePolicy final : public Policy {
public:
    OraclePolicy(const LossModel& model, long horizon) : opt_(model, horizon) {}
    std::string name() const override { return "oracle"; }
    int act(const Vec& x, Rng&) override { return opt_(x); }
    void observe(const Vec&, int, double, Rng&) override {}

private:
    OptimalPolicy opt_;
};

struct TraceRow {
    long t = 0;
    int action = 0;
    double loss = 0.0;
    double cum_regret = 0.0;
    std::vector<double> diagnostics;

    bool operator==(const TraceRow&) const = default;
};

struct RoundLog {
    Vec x;
    int action = 0;
    double loss = 0.0;
};

struct RegretTrace {
    std::string policy;
    int replication = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> diagnostic_names;
    std::vector<TraceRow> rows;      // checkpoint rounds only
    std::vector<double> cum_regret;  // every round
    std::vector<RoundLog> log;       // when requested
    long extra_draws = 0;
    long invariant_violations = 0;
    std::string error;  // set when the run aborted; the trace is partial
};

// Every round up to 10^4, then spacing growing by x1.05; always includes T.
std::vector<long> checkpoint_rounds(long horizon);

// Expected-loss gap of `action` against the comparator at round t.
double instantaneous_regret(const LossModel& model, const OptimalPolicy& opt, long t, const Vec& x, int action);

// One replication. The environment uses sub-stream 1 of `seed`, the policy 2.
RegretTrace simulate(const Instance& instance, Policy& policy, long horizon, std::uint64_t seed, int replication,
                     bool log_rounds = false);

// All policies x replications, seeds base_seed + r.
std::vector<RegretTrace> run(const ExperimentConfig& config, Exec exec = Exec::Serial);
std::vector<RegretTrace> run(const ExperimentConfig& config, const Instance& instance, Exec exec);

struct PolicySummary {
    std::string policy;
    std::vector<long> checkpoints;
    std::vector<double> mean;
    std::vector<double> se;
    double alpha_hat = 0.0;
    long replications = 0;
    double mean_extra_draws = 0.0;
    long invariant_violations = 0;
};

std::vector<double> mean_curve(const std::vector<RegretTrace>& traces);
std::vector<double> se_curve(const std::vector<RegretTrace>& traces);

// Least-squares slope of log(mean) on log(t) at log-spaced rounds in
// [from, to]; rounds with non-positive mean are skipped.
double growth_exponent(const std::vector<double>& curve, long from, long to, int points = 50);

std::vector<PolicySummary> summarize(const std::vector<RegretTrace>& traces);

std::string format_double(double v);
void write_csv(const std::vector<RegretTrace>& traces, std::ostream& out);
std::vector<RegretTrace> parse_csv(std::istream& in);
void write_summary_csv(const std::vector<PolicySummary>& summaries, std::ostream& out);

struct SeriesBand {
    std::string label;
    std::vector<long> t;
    std::vector<double> mean;
    std::vector<double> se;
};

std::vector<SeriesBand> bands_from_traces(const std::vector<RegretTrace>& traces);
void write_svg(const std::vector<SeriesBand>& series, std::ostream& out);

// Writes <dir>/<policy>.csv for every policy, summary.csv and regret.svg
// (no SVG for an empty trace set). Returns the files written.
std::vector<std::string> emit(const std::vector<RegretTrace>& traces, const std::vector<PolicySummary>& summaries,
                              const std::string& dir);

}  // namespace bobw
