// Command-line front end: config-driven experiments, value-table dumps, and
// the exact-oracle bound check.
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>

#include "edgedispatch/config_io.hpp"
#include "edgedispatch/oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace edgedispatch;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string preset;
    std::string out_dir;
    std::string policies;
    std::string expectation_mode;
    std::string des_form;
    std::uint64_t seed = 0;
    bool seed_set = false;
    long slots = 0;
    long reps = 0;
    long warmup = -1;
    int threads = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "Path to a JSON config document");
    cmd->add_option("--preset", f.preset, "Named preset (comparable, upload-dominant, compute-dominant, tiny)");
    cmd->add_option("--out", f.out_dir, "Output directory");
    cmd->add_option("--seed", f.seed, "Master seed")->each([&](const std::string&) { f.seed_set = true; });
    cmd->add_option("--slots", f.slots, "Simulated slots per replication");
    cmd->add_option("--reps", f.reps, "Replications");
    cmd->add_option("--warmup", f.warmup, "Warmup slots excluded from per-slot CDFs");
    cmd->add_option("--threads", f.threads, "Worker threads (0 = hardware)");
    cmd->add_option("--policies", f.policies, "Comma-separated policy kinds");
    cmd->add_option("--expectation-mode", f.expectation_mode, "exact|ce")
        ->check(CLI::IsMember({"exact", "ce"}));
    cmd->add_option("--des-form", f.des_form, "power|chain")->check(CLI::IsMember({"power", "chain"}));
}

ExperimentConfig resolve(const CommonFlags& f) {
    ExperimentConfig e;
    if (!f.config_path.empty())
        e = load_config_file(f.config_path);
    else if (!f.preset.empty())
        e = make_preset(f.preset);
    else
        throw std::invalid_argument("either --config or --preset is required");
    if (!f.preset.empty() && !f.config_path.empty()) {
        // --preset overrides the file's system parameters wholesale.
        ExperimentConfig p = make_preset(f.preset);
        e.system = p.system;
        e.preset = p.preset;
    }

    if (f.seed_set) e.run.seed = f.seed;
    if (f.slots > 0) e.run.slots = f.slots;
    if (f.reps > 0) e.run.replications = f.reps;
    if (f.warmup >= 0) e.run.warmup = f.warmup;
    if (f.threads >= 0) e.run.num_threads = f.threads;
    if (!f.policies.empty()) {
        e.policies.clear();
        std::string rest = f.policies;
        while (!rest.empty()) {
            auto pos = rest.find(',');
            std::string tok = rest.substr(0, pos);
            rest = pos == std::string::npos ? "" : rest.substr(pos + 1);
            auto t = policy_type_from_string(tok);
            if (!t) throw std::invalid_argument("unknown policy kind: " + tok);
            e.policies.push_back(*t);
        }
    }
    if (!f.expectation_mode.empty())
        e.expectation_mode = f.expectation_mode == "exact" ? ExpectationMode::exact
                                                           : ExpectationMode::certainty_equivalent;
    if (!f.des_form.empty()) e.des_form = f.des_form == "power" ? DesForm::power : DesForm::chain;
    e.system.validate();
    return e;
}

std::shared_ptr<const ValueTables> build_tables_if_needed(const ExperimentConfig& e) {
    for (auto t : e.policies)
        if (t == PolicyType::baseline || t == PolicyType::proposed)
            return std::make_shared<ValueTables>(e.system, e.make_baseline(), e.des_form);
    return nullptr;
}

PolicyKind kind_for(const ExperimentConfig& e, PolicyType t) {
    PolicyKind k;
    k.type = t;
    k.expectation_mode = e.expectation_mode;
    k.enumeration_cap = e.enumeration_cap;
    return k;
}

json summary_header(const ExperimentConfig& e) {
    json s;
    s["schema_version"] = 1;
    s["config_digest"] = config_digest(e);
    s["git_describe"] = git_describe();
    s["preset"] = e.preset;
    s["resolved_config"] = to_json(e);
    return s;
}

int cmd_simulate(const CommonFlags& flags) {
    ExperimentConfig e = resolve(flags);
    if (flags.out_dir.empty()) throw std::invalid_argument("--out is required for simulate");
    fs::create_directories(flags.out_dir);

    auto tables = build_tables_if_needed(e);
    std::vector<std::unique_ptr<PolicyEngine>> engines;
    std::vector<std::pair<std::string, const PolicyEngine*>> named;
    for (auto t : e.policies) {
        engines.push_back(std::make_unique<PolicyEngine>(kind_for(e, t), e.system, tables));
        named.emplace_back(to_string(t), engines.back().get());
    }

    ComparisonReport report = compare(e.system, named, e.run);

    const std::string digest = config_digest(e);
    json summary = summary_header(e);
    summary["slots"] = e.run.slots;
    summary["replications"] = e.run.replications;
    summary["seed"] = e.run.seed;
    summary["warmup"] = e.run.warmup;
    json per_policy = json::object();
    for (const auto& entry : report.entries) {
        const RunMetrics& m = entry.metrics;
        json p;
        p["mean_cost_per_slot"] = m.mean_cost;
        p["std_error"] = m.std_error_cost;
        p["mean_discounted_total"] = m.mean_discounted;
        p["std_error_discounted"] = m.std_error_discounted;
        p["total_arrivals"] = m.total_arrivals;
        p["overflow_drops"] = m.overflow_drops;
        p["inflight_cap_drops"] = m.inflight_drops;
        p["completed_jobs"] = m.completed_jobs;
        p["mean_sojourn_slots"] = m.mean_sojourn;
        p["median_decision_latency_us"] = m.median_decision_latency_us;
        per_policy[entry.name] = p;

        write_trace_csv((fs::path(flags.out_dir) / ("trace_" + entry.name + ".csv")).string(),
                        digest, m);
        write_cdf_csv((fs::path(flags.out_dir) / ("cdf_" + entry.name + ".csv")).string(), digest, m);
    }
    summary["policies"] = per_policy;
    json diffs = json::array();
    for (const auto& d : report.pairwise) {
        diffs.push_back({{"a", d.a},
                         {"b", d.b},
                         {"mean_diff", d.mean},
                         {"std_error", d.std_error},
                         {"ci_low", d.ci_low},
                         {"ci_high", d.ci_high}});
    }
    summary["pairwise_mean_cost_diffs"] = diffs;
    if (tables) {
        summary["value_tables"] = {{"t_trunc", tables->t_trunc()},
                                   {"alpha_clamp_events", tables->clamp_events()},
                                   {"d_ap_monotonicity_warnings", tables->monotonicity_warnings()}};
    }

    std::ofstream out(fs::path(flags.out_dir) / "summary.json");
    out << summary.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed writing summary.json");
    std::cout << "wrote " << report.entries.size() << " policy runs to " << flags.out_dir << "\n";
    return 0;
}

int cmd_value(const CommonFlags& flags) {
    ExperimentConfig e = resolve(flags);
    auto tables = std::make_shared<ValueTables>(e.system, e.make_baseline(), e.des_form);
    SystemState state =
        e.state ? *e.state : SystemState(e.system.num_aps, e.system.num_servers, e.system.num_types);
    require(state_valid(e.system, state), "state in config is invalid");

    json doc = summary_header(e);
    doc["t_trunc"] = tables->t_trunc();

    json d_ap = json::array();
    for (int k = 0; k < e.system.num_aps; ++k)
        for (int j = 0; j < e.system.num_types; ++j)
            for (int m = 0; m < e.system.num_servers; ++m) {
                const auto& table = tables->d_ap_table(k, j, m);
                json entry;
                entry["ap"] = k;
                entry["type"] = j;
                entry["server"] = m;
                std::vector<double> vals(table.data(), table.data() + table.size());
                entry["values"] = vals;
                d_ap.push_back(entry);
            }
    doc["d_ap"] = d_ap;

    json per_type = json::array();
    double v_pi = 0.0;
    for (int j = 0; j < e.system.num_types; ++j) {
        json tj;
        tj["type"] = j;
        json des = json::array();
        for (int m = 0; m < e.system.num_servers; ++m) {
            json dm;
            dm["server"] = m;
            dm["d_es"] = tables->d_es(j, m, state.types[j]);
            auto profile = tables->arrival_rate_profile(j, m, state.types[j]);
            dm["alpha_head"] = std::vector<double>(
                profile.begin(), profile.begin() + std::min<std::size_t>(profile.size(), 16));
            des.push_back(dm);
        }
        tj["d_es"] = des;
        double w = tables->w_j(j, state.types[j]);
        tj["w_j"] = w;
        v_pi += w;
        per_type.push_back(tj);
    }
    doc["per_type"] = per_type;
    doc["v_baseline"] = v_pi;
    doc["alpha_clamp_events"] = tables->clamp_events();
    doc["d_ap_monotonicity_warnings"] = tables->monotonicity_warnings();

    std::cout << doc.dump(2) << "\n";
    if (!flags.out_dir.empty()) {
        fs::create_directories(flags.out_dir);
        std::ofstream out(fs::path(flags.out_dir) / "value.json");
        out << doc.dump(2) << "\n";
        if (!out) throw std::runtime_error("failed writing value.json");
    }
    return 0;
}

int cmd_oracle(const CommonFlags& flags, std::size_t max_states) {
    ExperimentConfig e = resolve(flags);

    EnumeratedMdp mdp;
    try {
        mdp = enumerate_mdp(e.system, max_states);
    } catch (const StateSpaceTooLarge& err) {
        std::cerr << "refusing exact enumeration: " << format_double(err.state_count)
                  << " states exceed the cap of " << max_states << "\n";
        return 2;
    }

    auto tables = std::make_shared<ValueTables>(e.system, e.make_baseline(), e.des_form);
    PolicyEngine proposed(kind_for(e, PolicyType::proposed), e.system, tables);
    PolicyEngine baseline(kind_for(e, PolicyType::baseline), e.system, tables);

    auto vi = value_iteration(mdp, e.system.discount);
    BoundReport bound = check_bound(mdp, proposed, baseline);

    std::cout << "states: " << mdp.num_states() << ", actions: " << mdp.num_actions() << "\n";
    std::cout << "value-iteration sweeps: " << vi.sweeps
              << ", bellman residual: " << format_double(vi.final_residual) << "\n";
    std::cout << "min margin V_baseline - V_proposed: "
              << format_double(bound.min_improvement_margin) << "\n";
    std::cout << "min margin V_proposed - V_star:     "
              << format_double(bound.min_optimality_margin) << "\n";
    std::cout << (bound.holds ? "bound holds state-wise" : "BOUND VIOLATED") << "\n";

    if (!flags.out_dir.empty()) {
        fs::create_directories(flags.out_dir);
        const std::string digest = config_digest(e);
        std::ofstream out(fs::path(flags.out_dir) / "oracle.csv");
        out << "# config_digest=" << digest << "\n";
        out << "state,v_star,v_proposed,v_baseline,improvement_margin,optimality_margin\n";
        for (int s = 0; s < mdp.num_states(); ++s)
            out << s << ',' << format_double(bound.v_star(s)) << ','
                << format_double(bound.v_improved(s)) << ',' << format_double(bound.v_baseline(s))
                << ',' << format_double(bound.v_baseline(s) - bound.v_improved(s)) << ','
                << format_double(bound.v_improved(s) - bound.v_star(s)) << "\n";
        if (!out) throw std::runtime_error("failed writing oracle.csv");

        json doc = summary_header(e);
        doc["states"] = mdp.num_states();
        doc["actions"] = mdp.num_actions();
        doc["bellman_residual"] = vi.final_residual;
        doc["vi_sweeps"] = vi.sweeps;
        doc["min_improvement_margin"] = bound.min_improvement_margin;
        doc["min_optimality_margin"] = bound.min_optimality_margin;
        doc["bound_holds"] = bound.holds;
        doc["violations"] = bound.violations;
        std::ofstream js(fs::path(flags.out_dir) / "oracle.json");
        js << doc.dump(2) << "\n";
        if (!js) throw std::runtime_error("failed writing oracle.json");
    }
    return bound.holds ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative job dispatching simulator and policy library"};
    app.require_subcommand(1);

    CommonFlags sim_flags, value_flags, oracle_flags;
    std::size_t max_states = 1'000'000;

    CLI::App* sim_cmd = app.add_subcommand("simulate", "Run policies and write traces, CDFs, summary");
    add_common(sim_cmd, sim_flags);
    CLI::App* value_cmd = app.add_subcommand("value", "Dump baseline value tables for a state");
    add_common(value_cmd, value_flags);
    CLI::App* oracle_cmd = app.add_subcommand("oracle", "Exact bound check on a tiny instance");
    add_common(oracle_cmd, oracle_flags);
    oracle_cmd->add_option("--max-states", max_states, "Exact-enumeration state cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim_cmd->parsed()) return cmd_simulate(sim_flags);
        if (value_cmd->parsed()) return cmd_value(value_flags);
        if (oracle_cmd->parsed()) return cmd_oracle(oracle_flags, max_states);
    } catch (const std::invalid_argument& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    return 1;
}
