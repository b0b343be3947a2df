#include "bobw/harness.hpp"

#include "bobw/baselines.hpp"
#include "bobw/mwu.hpp"
#include "bobw/reduction.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace bobw {

namespace pt = boost::property_tree;

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
    static const std::map<std::string, std::map<std::string, Setter>> table = {
        {"harness",
         {
             {"policies", [](auto& c, auto&, auto& v) { c.policies = split_list(v); }},
             {"horizon", [](auto& c, auto& k, auto& v) { c.horizon = parse_number<long>(k, v); }},
             {"replications", [](auto& c, auto& k, auto& v) { c.replications = parse_number<int>(k, v); }},
             {"base_seed", [](auto& c, auto& k, auto& v) { c.base_seed = parse_number<std::uint64_t>(k, v); }},
             {"out_dir", [](auto& c, auto&, auto& v) { c.out_dir = v; }},
             {"log_rounds", [](auto& c, auto& k, auto& v) { c.log_rounds = parse_bool(k, v); }},
             {"parallel", [](auto& c, auto& k, auto& v) { c.parallel = parse_bool(k, v); }},
         }},
        {"env",
         {
             {"regime",
              [](auto& c, auto& k, auto& v) {
                  const auto r = parse_regime(v);
                  if (!r) throw ConfigError("config key '" + k + "': unknown regime '" + v + "'");
                  c.env.regime = *r;
              }},
             {"num_actions", [](auto& c, auto& k, auto& v) { c.env.num_actions = parse_number<int>(k, v); }},
             {"dim", [](auto& c, auto& k, auto& v) { c.env.dim = parse_number<int>(k, v); }},
             {"contexts",
              [](auto& c, auto& k, auto& v) {
                  if (v == "finite") c.env.finite_contexts = true;
                  else if (v == "normal") c.env.finite_contexts = false;
                  else throw ConfigError("config key '" + k + "': expected 'finite' or 'normal', got '" + v + "'");
              }},
             {"support_size", [](auto& c, auto& k, auto& v) { c.env.support_size = parse_number<int>(k, v); }},
             {"variance", [](auto& c, auto& k, auto& v) { c.env.variance = parse_number<double>(k, v); }},
             {"support_min_gap", [](auto& c, auto& k, auto& v) { c.env.support_min_gap = parse_number<double>(k, v); }},
             {"context_shift", [](auto& c, auto& k, auto& v) { c.env.context_shift = parse_number<double>(k, v); }},
             {"noise_std", [](auto& c, auto& k, auto& v) { c.env.noise_std = parse_number<double>(k, v); }},
             {"corruption_horizon", [](auto& c, auto& k, auto& v) { c.env.corruption_horizon = parse_number<long>(k, v); }},
             {"phase_factor", [](auto& c, auto& k, auto& v) { c.env.phase_factor = parse_number<double>(k, v); }},
             {"phase_gap", [](auto& c, auto& k, auto& v) { c.env.phase_gap = parse_number<double>(k, v); }},
             {"phase_initial_length", [](auto& c, auto& k, auto& v) { c.env.phase_initial_length = parse_number<long>(k, v); }},
             {"phase_optimal_arm", [](auto& c, auto& k, auto& v) { c.env.phase_optimal_arm = parse_number<int>(k, v); }},
             {"instance_seed", [](auto& c, auto& k, auto& v) { c.env.instance_seed = parse_number<std::uint64_t>(k, v); }},
             {"second_moment_samples",
              [](auto& c, auto& k, auto& v) { c.env.second_moment_samples = parse_number<long>(k, v); }},
         }},
        {"policy",
         {
             {"lambda_reg", [](auto& c, auto& k, auto& v) { c.policy.lambda_reg = parse_number<double>(k, v); }},
             {"delta", [](auto& c, auto& k, auto& v) { c.policy.delta = parse_number<double>(k, v); }},
             {"c1", [](auto& c, auto& k, auto& v) { c.policy.c1 = parse_number<double>(k, v); }},
             {"c2", [](auto& c, auto& k, auto& v) { c.policy.c2 = parse_number<double>(k, v); }},
             {"ftrl_c1", [](auto& c, auto& k, auto& v) { c.policy.ftrl_c1 = parse_number<double>(k, v); }},
             {"ftrl_c2", [](auto& c, auto& k, auto& v) { c.policy.ftrl_c2 = parse_number<double>(k, v); }},
             {"n_mc", [](auto& c, auto& k, auto& v) { c.policy.n_mc = parse_number<long>(k, v); }},
             {"mwu_smoothing", [](auto& c, auto& k, auto& v) { c.policy.mwu_smoothing = parse_number<double>(k, v); }},
             {"mgr_all_arms", [](auto& c, auto& k, auto& v) { c.policy.mgr_all_arms = parse_bool(k, v); }},
             {"mgr_mode",
              [](auto& c, auto& k, auto& v) {
                  if (v == "vector") c.policy.mgr_mode = MgrMode::Vector;
                  else if (v == "matrix") c.policy.mgr_mode = MgrMode::Matrix;
                  else throw ConfigError("config key '" + k + "': expected 'vector' or 'matrix', got '" + v + "'");
              }},
             {"throw_on_violation", [](auto& c, auto& k, auto& v) { c.policy.throw_on_violation = parse_bool(k, v); }},
         }},
    };
    return table;
}

bool stochastic_kind(Regime r) { return r == Regime::Stochastic || r == Regime::CorruptedStochastic; }

// Gap between the best and second-best mean loss at x.
double context_gap(const std::vector<Vec>& theta, const Vec& x) {
    std::vector<double> v;
    for (const auto& th : theta) v.push_back(th.dot(x));
    std::sort(v.begin(), v.end());
    return v[1] - v[0];
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    ExperimentConfig config;
    const auto& table = setters();
    for (const auto& [section, body] : tree) {
        const auto sec = table.find(section);
        if (sec == table.end()) throw ConfigError("unknown config section [" + section + "]");
        if (body.empty() && !body.data().empty()) throw ConfigError("config key '" + section + "' outside a section");
        for (const auto& [key, node] : body) {
            const auto it = sec->second.find(key);
            if (it == sec->second.end()) throw ConfigError("unknown config key '" + section + "." + key + "'");
            it->second(config, section + "." + key, node.get_value<std::string>());
        }
    }
    validate(config);
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in);
}

const std::vector<std::string>& known_policies() {
    static const std::vector<std::string> names = {"ftrl_lc", "reallinexp3", "oful", "uniform", "bobw_iw", "bobw_dd", "mwu_lc", "oracle"};
    return names;
}

void validate(const ExperimentConfig& c) {
    if (c.horizon < 2) throw ConfigError("horizon must be >= 2");
    if (c.replications < 1) throw ConfigError("replications must be >= 1");
    if (c.policies.empty()) throw ConfigError("no policies configured");
    for (const auto& p : c.policies)
        if (std::find(known_policies().begin(), known_policies().end(), p) == known_policies().end())
            throw ConfigError("unknown policy '" + p + "'");
    const auto& e = c.env;
    if (e.num_actions < 2) throw ConfigError("env.num_actions must be >= 2");
    if (e.dim < 1) throw ConfigError("env.dim must be >= 1");
    if (e.finite_contexts && e.support_size < e.dim) throw ConfigError("env.support_size must be >= env.dim");
    if (!(e.variance > 0.0)) throw ConfigError("env.variance must be > 0");
    if (e.support_min_gap < 0.0 || e.support_min_gap >= 2.0) throw ConfigError("env.support_min_gap must lie in [0, 2)");
    if (e.noise_std < 0.0) throw ConfigError("env.noise_std must be >= 0");
    if (e.corruption_horizon && *e.corruption_horizon < 0) throw ConfigError("env.corruption_horizon must be >= 0");
    if (!(e.phase_factor >= 1.0)) throw ConfigError("env.phase_factor must be >= 1");
    if (!(e.phase_gap > 0.0 && e.phase_gap <= 0.125)) throw ConfigError("env.phase_gap must lie in (0, 0.125]");
    if (e.phase_initial_length < 1) throw ConfigError("env.phase_initial_length must be >= 1");
    if (e.phase_optimal_arm < 0 || e.phase_optimal_arm >= e.num_actions) throw ConfigError("env.phase_optimal_arm out of range");
    if (e.regime == Regime::Adversarial)
        throw ConfigError("the adversarial regime needs a programmatic schedule; use regime = phase from configs");
    if (!e.finite_contexts && e.support_min_gap > 0.0) throw ConfigError("env.support_min_gap needs finite contexts");
    if (!e.finite_contexts && e.context_shift != 0.0) throw ConfigError("env.context_shift needs finite contexts");
    for (const auto& p : c.policies)
        if (!e.finite_contexts && (p == "reallinexp3" || p == "bobw_iw" || p == "bobw_dd" || p == "mwu_lc"))
            throw ConfigError("policy '" + p + "' needs env.contexts = finite");
    const auto& p = c.policy;
    if (!(p.lambda_reg > 0.0)) throw ConfigError("policy.lambda_reg must be > 0");
    if (!(p.delta > 0.0 && p.delta < 1.0)) throw ConfigError("policy.delta must lie in (0, 1)");
    if (p.c1 && !(*p.c1 > 0.0)) throw ConfigError("policy.c1 must be > 0");
    if (p.c2 && !(*p.c2 > 0.0)) throw ConfigError("policy.c2 must be > 0");
    if (p.ftrl_c1 && !(*p.ftrl_c1 > 0.0)) throw ConfigError("policy.ftrl_c1 must be > 0");
    if (p.ftrl_c2 && !(*p.ftrl_c2 > 0.0)) throw ConfigError("policy.ftrl_c2 must be > 0");
    if (p.n_mc < 1000) throw ConfigError("policy.n_mc must be >= 1000");
    if (!(p.mwu_smoothing > 0.0 && p.mwu_smoothing <= 1.0)) throw ConfigError("policy.mwu_smoothing must lie in (0, 1]");
}

Instance build_instance(const EnvConfig& env, long horizon) {
    Rng rng = make_rng(env.instance_seed, 0);
    Instance inst;
    LossModel& m = inst.model;
    m.regime = env.regime;
    m.num_actions = env.num_actions;
    m.dim = env.dim;
    m.noise_std = env.noise_std;
    m.phase_factor = env.phase_factor;
    m.phase_gap = env.phase_gap;
    m.phase_initial_length = env.phase_initial_length;
    m.phase_optimal_arm = env.phase_optimal_arm;
    if (stochastic_kind(env.regime)) m.theta = generate_stochastic_theta(env.num_actions, env.dim, rng);
    if (env.regime == Regime::CorruptedStochastic)
        m.corruption_horizon = env.corruption_horizon.value_or(static_cast<long>(std::ceil(std::sqrt(static_cast<double>(horizon)))));

    if (env.finite_contexts) {
        std::normal_distribution<double> normal(0.0, std::sqrt(env.variance));
        std::vector<Vec> support;
        long tries = 0;
        while (static_cast<int>(support.size()) < env.support_size) {
            if (++tries > 10'000'000) throw ConfigError("could not generate a support with the requested minimum gap");
            Vec x(env.dim);
            for (int i = 0; i < env.dim; ++i) x(i) = normal(rng);
            x(0) += env.context_shift;
            const double n = x.norm();
            if (n == 0.0) continue;
            x /= n;
            if (env.support_min_gap > 0.0 && stochastic_kind(env.regime)) {
                const double g = context_gap(m.theta, x);
                if (g < env.support_min_gap) continue;
                if (support.empty() && g > 1.05 * env.support_min_gap) continue;
            }
            support.push_back(x);
        }
        inst.dist = ContextDistribution::finite_uniform(std::move(support));
        inst.dist.per_coordinate_variance = env.variance;
    } else {
        inst.dist = ContextDistribution::spherical_normal(env.dim, env.variance);
    }
    try {
        inst.moments = second_moment(inst.dist, env.second_moment_samples, rng);
    } catch (const std::domain_error& e) {
        throw ConfigError(e.what());
    }
    if (env.finite_contexts && stochastic_kind(env.regime)) {
        inst.delta_min = std::numeric_limits<double>::infinity();
        for (const auto& x : inst.dist.support) inst.delta_min = std::min(inst.delta_min, context_gap(m.theta, x));
    }
    return inst;
}

std::unique_ptr<Policy> make_policy(const std::string& name, const Instance& inst, long horizon, const PolicyConfig& c, Rng& rng) {
    const int k = inst.model.num_actions;
    const int d = inst.model.dim;
    const double lambda = inst.moments.lambda_min;
    if (name == "ftrl_lc") {
        FtrlLcOptions o;
        o.mgr_all_arms = c.mgr_all_arms;
        o.mgr_mode = c.mgr_mode;
        o.throw_on_violation = c.throw_on_violation;
        auto constants = FtrlLcConstants::make(k, d, horizon, lambda);
        if (c.ftrl_c1) constants.c1 = *c.ftrl_c1;
        if (c.ftrl_c2) constants.c2 = *c.ftrl_c2;
        return std::make_unique<FtrlLc>(inst.dist, constants, o);
    }
    if (name == "reallinexp3") return std::make_unique<RealLinExp3Policy>(inst.dist, k, lambda);
    if (name == "oful") return std::make_unique<OfulPolicy>(k, d, c.lambda_reg, c.delta);
    if (name == "uniform") return std::make_unique<UniformPolicy>(k);
    if (name == "oracle") return std::make_unique<OraclePolicy>(inst.model, horizon);
    MwuOptions mwu;
    mwu.n_mc = c.n_mc;
    mwu.smoothing = c.mwu_smoothing;
    if (name == "mwu_lc") return std::make_unique<MwuLcPolicy>(inst.dist, k, mwu);
    ReductionOptions r;
    r.c1 = c.c1;
    r.c2 = c.c2;
    r.mwu = mwu;
    if (name == "bobw_iw") return make_bobw_iw(inst.dist, k, lambda, horizon, rng, r);
    if (name == "bobw_dd") return make_bobw_dd(inst.dist, k, horizon, rng, r);
    throw ConfigError("unknown policy '" + name + "'");
}

std::vector<long> checkpoint_rounds(long horizon) {
    std::vector<long> out;
    const long dense = std::min(horizon, 10'000L);
    for (long t = 1; t <= dense; ++t) out.push_back(t);
    double next = static_cast<double>(dense);
    for (;;) {
        next *= 1.05;
        const long c = static_cast<long>(std::ceil(next));
        if (c > horizon) break;
        if (c > out.back()) out.push_back(c);
    }
    if (out.back() != horizon) out.push_back(horizon);
    return out;
}

double instantaneous_regret(const LossModel& model, const OptimalPolicy& opt, long t, const Vec& x, int action) {
    const int best = opt(x);
    if (stochastic_kind(model.regime)) return model.theta[action].dot(x) - model.theta[best].dot(x);
    return expected_loss(model, t, x, action) - expected_loss(model, t, x, best);
}

RegretTrace simulate(const Instance& inst, Policy& policy, long horizon, std::uint64_t seed, int replication, bool log_rounds) {
    RegretTrace tr;
    tr.policy = policy.name();
    tr.replication = replication;
    tr.seed = seed;
    tr.diagnostic_names = policy.diagnostic_names();
    tr.cum_regret.reserve(horizon);
    Rng env_rng = make_rng(seed, 1);
    Rng pol_rng = make_rng(seed, 2);
    const OptimalPolicy opt(inst.model, horizon);
    const auto checkpoints = checkpoint_rounds(horizon);
    std::size_t next = 0;
    double cum = 0.0;
    Vec x(inst.dist.dim);
    try {
        for (long t = 1; t <= horizon; ++t) {
            sample_context_into(inst.dist, env_rng, x.data());
            const int a = policy.act(x, pol_rng);
            if (a < 0 || a >= inst.model.num_actions) throw std::logic_error(tr.policy + " returned an out-of-range action");
            const double l = loss(inst.model, t, x, a, env_rng);
            policy.observe(x, a, l, pol_rng);
            cum += instantaneous_regret(inst.model, opt, t, x, a);
            tr.cum_regret.push_back(cum);
            if (log_rounds) tr.log.push_back({x, a, l});
            if (next < checkpoints.size() && checkpoints[next] == t) {
                tr.rows.push_back({t, a, l, cum, policy.diagnostics()});
                ++next;
            }
        }
    } catch (const std::exception& e) {
        tr.error = e.what();
    }
    tr.extra_draws = policy.extra_draws();
    tr.invariant_violations = policy.invariant_violations();
    return tr;
}

std::vector<RegretTrace> run(const ExperimentConfig& config, const Instance& inst, Exec exec) {
    const long reps = config.replications;
    const long jobs = static_cast<long>(config.policies.size()) * reps;
    std::vector<RegretTrace> out(jobs);
    parallel_for(jobs, exec, [&](long j) {
        const std::string& name = config.policies[j / reps];
        const int r = static_cast<int>(j % reps);
        const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(r);
        Rng init = make_rng(seed, 3);
        auto policy = make_policy(name, inst, config.horizon, config.policy, init);
        out[j] = simulate(inst, *policy, config.horizon, seed, r, config.log_rounds);
    });
    return out;
}

std::vector<RegretTrace> run(const ExperimentConfig& config, Exec exec) {
    validate(config);
    return run(config, build_instance(config.env, config.horizon), exec);
}

std::vector<double> mean_curve(const std::vector<RegretTrace>& traces) {
    if (traces.empty()) return {};
    std::size_t n = traces.front().cum_regret.size();
    for (const auto& t : traces) n = std::min(n, t.cum_regret.size());
    std::vector<double> m(n, 0.0);
    for (const auto& t : traces)
        for (std::size_t i = 0; i < n; ++i) m[i] += t.cum_regret[i];
    for (auto& v : m) v /= static_cast<double>(traces.size());
    return m;
}

std::vector<double> se_curve(const std::vector<RegretTrace>& traces) {
    const auto m = mean_curve(traces);
    std::vector<double> se(m.size(), 0.0);
    const double r = static_cast<double>(traces.size());
    if (traces.size() < 2) return se;
    for (const auto& t : traces)
        for (std::size_t i = 0; i < m.size(); ++i) se[i] += (t.cum_regret[i] - m[i]) * (t.cum_regret[i] - m[i]);
    for (auto& v : se) v = std::sqrt(v / (r - 1.0) / r);
    return se;
}

double growth_exponent(const std::vector<double>& curve, long from, long to, int points) {
    from = std::max(1L, from);
    to = std::min<long>(to, static_cast<long>(curve.size()));
    if (to <= from || points < 2) return 0.0;
    std::vector<long> ts;
    const double lf = std::log(static_cast<double>(from)), lt = std::log(static_cast<double>(to));
    for (int i = 0; i < points; ++i) {
        const long t = std::lround(std::exp(lf + (lt - lf) * i / (points - 1)));
        if (ts.empty() || t > ts.back()) ts.push_back(std::clamp(t, from, to));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (long t : ts) {
        const double v = curve[t - 1];
        if (!(v > 0.0)) continue;
        const double lx = std::log(static_cast<double>(t)), ly = std::log(v);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return 0.0;
    const double den = n * sxx - sx * sx;
    return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

namespace {

std::vector<std::vector<const RegretTrace*>> group_by_policy(const std::vector<RegretTrace>& traces) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const RegretTrace*>> groups;
    for (const auto& t : traces) {
        if (!groups.count(t.policy)) order.push_back(t.policy);
        groups[t.policy].push_back(&t);
    }
    std::vector<std::vector<const RegretTrace*>> out;
    for (const auto& p : order) out.push_back(groups[p]);
    return out;
}

std::vector<RegretTrace> copy_group(const std::vector<const RegretTrace*>& g) {
    std::vector<RegretTrace> out;
    for (const auto* t : g) out.push_back(*t);
    return out;
}

}  // namespace

std::vector<PolicySummary> summarize(const std::vector<RegretTrace>& traces) {
    std::vector<PolicySummary> out;
    for (const auto& group : group_by_policy(traces)) {
        const auto ts = copy_group(group);
        PolicySummary s;
        s.policy = ts.front().policy;
        s.replications = static_cast<long>(ts.size());
        const auto m = mean_curve(ts);
        const auto se = se_curve(ts);
        const long T = static_cast<long>(m.size());
        for (auto& t : ts) {
            s.mean_extra_draws += static_cast<double>(t.extra_draws) / static_cast<double>(ts.size());
            s.invariant_violations += t.invariant_violations;
        }
        if (T == 0) {
            out.push_back(s);
            continue;
        }
        for (long c : {T / 10, T / 4, T / 2, T}) {
            c = std::max(1L, c);
            s.checkpoints.push_back(c);
            s.mean.push_back(m[c - 1]);
            s.se.push_back(se[c - 1]);
        }
        s.alpha_hat = growth_exponent(m, std::max(1L, T / 10), T);
        out.push_back(s);
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw std::runtime_error("float formatting failed");
    return std::string(buf, ptr);
}

void write_csv(const std::vector<RegretTrace>& traces, std::ostream& out) {
    const std::vector<std::string> diag = traces.empty() ? std::vector<std::string>{} : traces.front().diagnostic_names;
    for (const auto& t : traces)
        if (t.diagnostic_names != diag) throw std::invalid_argument("write_csv: traces disagree on diagnostic columns");
    out << "t,replication,seed,policy,action,loss,cum_regret";
    for (const auto& d : diag) out << ',' << d;
    out << '\n';
    for (const auto& t : traces) {
        for (const auto& r : t.rows) {
            out << r.t << ',' << t.replication << ',' << t.seed << ',' << t.policy << ',' << r.action << ',' << format_double(r.loss)
                << ',' << format_double(r.cum_regret);
            for (double v : r.diagnostics) out << ',' << format_double(v);
            out << '\n';
        }
    }
}

std::vector<RegretTrace> parse_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("parse_csv: missing header");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) header.push_back(f);
    }
    const std::vector<std::string> fixed = {"t", "replication", "seed", "policy", "action", "loss", "cum_regret"};
    if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin()))
        throw std::runtime_error("parse_csv: unexpected header");
    const std::vector<std::string> diag(header.begin() + fixed.size(), header.end());

    std::vector<RegretTrace> out;
    auto num = [](const std::string& s, auto& v) {
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) throw std::runtime_error("parse_csv: bad number '" + s + "'");
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != header.size()) throw std::runtime_error("parse_csv: wrong field count");
        TraceRow r;
        int rep = 0;
        std::uint64_t seed = 0;
        num(f[0], r.t);
        num(f[1], rep);
        num(f[2], seed);
        num(f[4], r.action);
        num(f[5], r.loss);
        num(f[6], r.cum_regret);
        for (std::size_t i = fixed.size(); i < f.size(); ++i) {
            double v = 0.0;
            num(f[i], v);
            r.diagnostics.push_back(v);
        }
        if (out.empty() || out.back().policy != f[3] || out.back().replication != rep || out.back().seed != seed) {
            RegretTrace t;
            t.policy = f[3];
            t.replication = rep;
            t.seed = seed;
            t.diagnostic_names = diag;
            out.push_back(std::move(t));
        }
        out.back().rows.push_back(std::move(r));
    }
    return out;
}

void write_summary_csv(const std::vector<PolicySummary>& summaries, std::ostream& out) {
    out << "policy,t,mean_regret,se,alpha_hat,replications,mean_extra_draws,invariant_violations\n";
    for (const auto& s : summaries)
        for (std::size_t i = 0; i < s.checkpoints.size(); ++i)
            out << s.policy << ',' << s.checkpoints[i] << ',' << format_double(s.mean[i]) << ',' << format_double(s.se[i]) << ','
                << format_double(s.alpha_hat) << ',' << s.replications << ',' << format_double(s.mean_extra_draws) << ','
                << s.invariant_violations << '\n';
}

std::vector<SeriesBand> bands_from_traces(const std::vector<RegretTrace>& traces) {
    std::vector<SeriesBand> out;
    for (const auto& group : group_by_policy(traces)) {
        SeriesBand b;
        b.label = group.front()->policy;
        std::size_t rows = group.front()->rows.size();
        for (const auto* t : group) rows = std::min(rows, t->rows.size());
        const std::size_t stride = std::max<std::size_t>(1, rows / 400);
        const double r = static_cast<double>(group.size());
        for (std::size_t i = 0; i < rows; i += stride) {
            if (i + stride >= rows) i = rows - 1;
            double m = 0.0, ss = 0.0;
            for (const auto* t : group) m += t->rows[i].cum_regret;
            m /= r;
            for (const auto* t : group) ss += (t->rows[i].cum_regret - m) * (t->rows[i].cum_regret - m);
            b.t.push_back(group.front()->rows[i].t);
            b.mean.push_back(m);
            b.se.push_back(group.size() > 1 ? std::sqrt(ss / (r - 1.0) / r) : 0.0);
        }
        out.push_back(std::move(b));
    }
    return out;
}

void write_svg(const std::vector<SeriesBand>& series, std::ostream& out) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    const double w = 800, h = 500, left = 80, right = 170, top = 30, bottom = 60;
    double tmax = 1, ymin = 0, ymax = 1e-12;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.t.size(); ++i) {
            tmax = std::max(tmax, static_cast<double>(s.t[i]));
            ymax = std::max(ymax, s.mean[i] + 2 * s.se[i]);
            ymin = std::min(ymin, s.mean[i] - 2 * s.se[i]);
        }
    auto px = [&](double t) { return left + (w - left - right) * t / tmax; };
    auto py = [&](double y) { return h - bottom - (h - top - bottom) * (y - ymin) / (ymax - ymin); };
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double t = tmax * i / 4, y = ymin + (ymax - ymin) * i / 4;
        out << "<text x=\"" << px(t) << "\" y=\"" << h - bottom + 18 << "\" text-anchor=\"middle\">" << std::lround(t) << "</text>\n";
        out << "<text x=\"" << left - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << std::lround(y) << "</text>\n";
    }
    out << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 15 << "\" text-anchor=\"middle\">round t</text>\n";
    out << "<text x=\"18\" y=\"" << (top + h - bottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << (top + h - bottom) / 2 << ")\">cumulative pseudo-regret (mean &#177; 2 SE)</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* c = colors[k % 8];
        out << "<g class=\"series\" data-label=\"" << s.label << "\">\n<polygon fill=\"" << c << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < s.t.size(); ++i) out << px(s.t[i]) << ',' << py(s.mean[i] + 2 * s.se[i]) << ' ';
        for (std::size_t i = s.t.size(); i-- > 0;) out << px(s.t[i]) << ',' << py(s.mean[i] - 2 * s.se[i]) << ' ';
        out << "\"/>\n<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.t.size(); ++i) out << px(s.t[i]) << ',' << py(s.mean[i]) << ' ';
        out << "\"/>\n";
        const double ly = top + 20 * (k + 1);
        out << "<line x1=\"" << w - right + 15 << "\" y1=\"" << ly - 4 << "\" x2=\"" << w - right + 40 << "\" y2=\"" << ly - 4
            << "\" stroke=\"" << c << "\" stroke-width=\"3\"/>\n";
        out << "<text x=\"" << w - right + 46 << "\" y=\"" << ly << "\">" << s.label << "</text>\n</g>\n";
    }
    out << "</svg>\n";
}

std::vector<std::string> emit(const std::vector<RegretTrace>& traces, const std::vector<PolicySummary>& summaries,
                              const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
    std::vector<std::string> written;
    auto open = [&](const std::string& name) {
        const std::string path = (fs::path(dir) / name).string();
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + path + "'");
        written.push_back(path);
        return f;
    };
    auto close = [&](std::ofstream& f) {
        f.flush();
        if (!f) throw std::runtime_error("write failed for '" + written.back() + "'");
    };
    if (traces.empty()) {
        auto f = open("traces.csv");
        write_csv({}, f);
        close(f);
        return written;
    }
    for (const auto& group : group_by_policy(traces)) {
        auto f = open(group.front()->policy + ".csv");
        write_csv(copy_group(group), f);
        close(f);
    }
    {
        auto f = open("summary.csv");
        write_summary_csv(summaries, f);
        close(f);
    }
    {
        auto f = open("regret.svg");
        write_svg(bands_from_traces(traces), f);
        close(f);
    }
    return written;
}

}  // namespace bobw
