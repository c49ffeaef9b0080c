#include "edgedispatch/config_io.hpp"

#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "edgedispatch/version.hpp"

namespace edgedispatch {

using nlohmann::json;

BaselinePolicy ExperimentConfig::make_baseline() const {
    if (baseline == "scf") return baseline_scf(system);
    if (baseline == "suf") return baseline_suf(system);
    if (baseline == "explicit") {
        BaselinePolicy b(system.num_aps, system.num_types);
        require(baseline_routes.size() == b.route.size(),
                "baseline_routes must have num_aps*num_types entries");
        b.route = baseline_routes;
        for (int v : b.route)
            require(v >= 0 && v < system.num_servers, "baseline route outside server range");
        return b;
    }
    throw std::invalid_argument("unknown baseline kind: " + baseline);
}

namespace {

int pattern(int k, int j, int m, int mod) { return (2 * k + 3 * j + 5 * m) % mod; }

CompTimePmf uniform_pmf(int lo, int hi, int eta_max) {
    CompTimePmf f(static_cast<std::size_t>(eta_max), 0.0);
    for (int x = lo; x <= hi; ++x) f[static_cast<std::size_t>(x) - 1] = 1.0 / (hi - lo + 1);
    return f;
}

void fill_uniform_lambda(SystemConfig& c, double lambda) {
    c.arrival_prob.assign(c.num_aps, std::vector<double>(c.num_types, lambda));
}

ExperimentConfig preset_comparable() {
    ExperimentConfig e;
    e.preset = "comparable";
    SystemConfig& c = e.system;
    c.num_aps = 5;
    c.num_servers = 3;
    c.num_types = 10;
    c.n_max = 3;
    c.l_max = 5;
    c.eta_max = 15;
    c.discount = 0.95;
    c.overflow_weight = 10.0;
    fill_uniform_lambda(c, 0.013);
    c.mean_upload_delay.assign(
        c.num_aps, std::vector<std::vector<double>>(c.num_types, std::vector<double>(c.num_servers)));
    for (int k = 0; k < c.num_aps; ++k)
        for (int j = 0; j < c.num_types; ++j)
            for (int m = 0; m < c.num_servers; ++m)
                c.mean_upload_delay[k][j][m] = 7.0 + (pattern(k, j, m, 7) + 3) % 7;
    c.comp_time_pmf.assign(c.num_servers, std::vector<CompTimePmf>(c.num_types));
    for (int m = 0; m < c.num_servers; ++m)
        for (int j = 0; j < c.num_types; ++j) {
            int lo = 10 + (m + 2 * j) % 3;
            int hi = 15 - (2 * m + j) % 3;
            c.comp_time_pmf[m][j] = uniform_pmf(lo, hi, c.eta_max);
        }
    e.run.slots = 10'000;
    e.run.replications = 50;
    e.run.seed = 12345;
    e.run.warmup = 1'000;
    return e;
}

ExperimentConfig preset_upload_dominant() {
    ExperimentConfig e;
    e.preset = "upload-dominant";
    SystemConfig& c = e.system;
    c.num_aps = 5;
    c.num_servers = 3;
    c.num_types = 10;
    c.n_max = 5;
    c.l_max = 5;
    c.eta_max = 1;
    c.discount = 0.95;
    c.overflow_weight = 10.0;
    fill_uniform_lambda(c, 0.15);
    c.mean_upload_delay.assign(
        c.num_aps, std::vector<std::vector<double>>(c.num_types, std::vector<double>(c.num_servers)));
    for (int k = 0; k < c.num_aps; ++k)
        for (int j = 0; j < c.num_types; ++j)
            for (int m = 0; m < c.num_servers; ++m)
                c.mean_upload_delay[k][j][m] = 5.0 + (pattern(k, j, m, 11) + 5) % 11;
    c.comp_time_pmf.assign(c.num_servers,
                           std::vector<CompTimePmf>(c.num_types, CompTimePmf{1.0}));
    e.run.slots = 10'000;
    e.run.replications = 50;
    e.run.seed = 12345;
    e.run.warmup = 1'000;
    return e;
}

ExperimentConfig preset_compute_dominant() {
    ExperimentConfig e;
    e.preset = "compute-dominant";
    SystemConfig& c = e.system;
    c.num_aps = 5;
    c.num_servers = 3;
    c.num_types = 10;
    c.n_max = 2;
    c.l_max = 5;
    c.eta_max = 15;
    c.discount = 0.95;
    c.overflow_weight = 10.0;
    fill_uniform_lambda(c, 0.01);
    c.mean_upload_delay.assign(
        c.num_aps,
        std::vector<std::vector<double>>(c.num_types, std::vector<double>(c.num_servers, 1.0)));
    c.comp_time_pmf.assign(c.num_servers, std::vector<CompTimePmf>(c.num_types));
    for (int j = 0; j < c.num_types; ++j) {
        int fast = (j % 2) + 1; // never the tie-break server 0
        for (int m = 0; m < c.num_servers; ++m)
            c.comp_time_pmf[m][j] = (m == fast) ? uniform_pmf(10, 11, c.eta_max)
                                                : uniform_pmf(13, 15, c.eta_max);
    }
    e.run.slots = 10'000;
    e.run.replications = 50;
    e.run.seed = 12345;
    e.run.warmup = 1'000;
    return e;
}

ExperimentConfig preset_tiny() {
    ExperimentConfig e;
    e.preset = "tiny";
    SystemConfig& c = e.system;
    c.num_aps = 2;
    c.num_servers = 2;
    c.num_types = 1;
    c.n_max = 1;
    c.l_max = 2;
    c.eta_max = 2;
    c.discount = 0.9;
    c.overflow_weight = 5.0;
    fill_uniform_lambda(c, 0.1);
    c.mean_upload_delay = {{{2.0, 5.0}}, {{5.0, 2.0}}};
    c.comp_time_pmf = {{{0.7, 0.3}}, {{0.3, 0.7}}};
    e.run.slots = 2'000;
    e.run.replications = 200;
    e.run.seed = 12345;
    e.run.warmup = 0;
    return e;
}

const std::set<std::string>& top_keys() {
    static const std::set<std::string> keys{"schema_version", "preset",  "system",
                                            "run",            "policy",  "state"};
    return keys;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("unknown field '" + it.key() + "' in " + where);
}

template <typename T>
void read_if(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

void parse_system(const json& doc, SystemConfig& c) {
    reject_unknown(doc,
                   {"num_aps", "num_servers", "num_types", "arrival_prob", "mean_upload_delay",
                    "comp_time_pmf", "discount", "overflow_weight", "n_max", "l_max", "eta_max"},
                   "system");
    read_if(doc, "num_aps", c.num_aps);
    read_if(doc, "num_servers", c.num_servers);
    read_if(doc, "num_types", c.num_types);
    read_if(doc, "arrival_prob", c.arrival_prob);
    read_if(doc, "mean_upload_delay", c.mean_upload_delay);
    read_if(doc, "comp_time_pmf", c.comp_time_pmf);
    read_if(doc, "discount", c.discount);
    read_if(doc, "overflow_weight", c.overflow_weight);
    read_if(doc, "n_max", c.n_max);
    read_if(doc, "l_max", c.l_max);
    read_if(doc, "eta_max", c.eta_max);
}

void parse_run(const json& doc, RunSpec& r) {
    reject_unknown(doc, {"slots", "replications", "seed", "warmup", "threads"}, "run");
    read_if(doc, "slots", r.slots);
    read_if(doc, "replications", r.replications);
    read_if(doc, "seed", r.seed);
    read_if(doc, "warmup", r.warmup);
    read_if(doc, "threads", r.num_threads);
}

void parse_policy(const json& doc, ExperimentConfig& e) {
    reject_unknown(doc,
                   {"kinds", "expectation_mode", "enumeration_cap", "des_form", "baseline",
                    "baseline_routes"},
                   "policy");
    if (doc.contains("kinds")) {
        e.policies.clear();
        for (const auto& name : doc.at("kinds")) {
            auto t = policy_type_from_string(name.get<std::string>());
            if (!t) throw std::invalid_argument("unknown policy kind: " + name.get<std::string>());
            e.policies.push_back(*t);
        }
    }
    if (doc.contains("expectation_mode")) {
        std::string mode = doc.at("expectation_mode").get<std::string>();
        if (mode == "exact")
            e.expectation_mode = ExpectationMode::exact;
        else if (mode == "ce")
            e.expectation_mode = ExpectationMode::certainty_equivalent;
        else
            throw std::invalid_argument("expectation_mode must be 'exact' or 'ce'");
    }
    read_if(doc, "enumeration_cap", e.enumeration_cap);
    if (doc.contains("des_form")) {
        std::string form = doc.at("des_form").get<std::string>();
        if (form == "power")
            e.des_form = DesForm::power;
        else if (form == "chain")
            e.des_form = DesForm::chain;
        else
            throw std::invalid_argument("des_form must be 'power' or 'chain'");
    }
    read_if(doc, "baseline", e.baseline);
    read_if(doc, "baseline_routes", e.baseline_routes);
}

SystemState parse_state(const json& doc, const SystemConfig& c) {
    reject_unknown(doc, {"in_flight", "queues"}, "state");
    SystemState s(c.num_aps, c.num_servers, c.num_types);
    if (doc.contains("in_flight")) {
        auto n = doc.at("in_flight").get<std::vector<std::vector<std::vector<int>>>>();
        require(static_cast<int>(n.size()) == c.num_aps, "state.in_flight: wrong AP dimension");
        for (int k = 0; k < c.num_aps; ++k) {
            require(static_cast<int>(n[k].size()) == c.num_types,
                    "state.in_flight: wrong type dimension");
            for (int j = 0; j < c.num_types; ++j) {
                require(static_cast<int>(n[k][j].size()) == c.num_servers,
                        "state.in_flight: wrong server dimension");
                for (int m = 0; m < c.num_servers; ++m) s.n(k, j, m) = n[k][j][m];
            }
        }
    }
    if (doc.contains("queues")) {
        auto q = doc.at("queues").get<std::vector<std::vector<std::vector<int>>>>();
        require(static_cast<int>(q.size()) == c.num_servers, "state.queues: wrong server dimension");
        for (int m = 0; m < c.num_servers; ++m) {
            require(static_cast<int>(q[m].size()) == c.num_types, "state.queues: wrong type dimension");
            for (int j = 0; j < c.num_types; ++j) {
                require(q[m][j].size() == 2, "state.queues entries must be [length, remaining]");
                s.q(m, j) = QueueState{q[m][j][0], q[m][j][1]};
            }
        }
    }
    return s;
}

} // namespace

std::vector<std::string> preset_names() {
    return {"comparable", "upload-dominant", "compute-dominant", "tiny"};
}

ExperimentConfig make_preset(const std::string& name) {
    if (name == "comparable") return preset_comparable();
    if (name == "upload-dominant") return preset_upload_dominant();
    if (name == "compute-dominant") return preset_compute_dominant();
    if (name == "tiny") return preset_tiny();
    throw std::invalid_argument("unknown preset: " + name);
}

ExperimentConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw std::invalid_argument("config root must be an object");
    reject_unknown(doc, top_keys(), "config root");

    ExperimentConfig e;
    if (doc.contains("preset")) e = make_preset(doc.at("preset").get<std::string>());

    if (doc.contains("schema_version")) {
        int v = doc.at("schema_version").get<int>();
        if (v != 1) throw std::invalid_argument("unsupported schema_version " + std::to_string(v));
    }
    if (doc.contains("system")) parse_system(doc.at("system"), e.system);
    if (doc.contains("run")) parse_run(doc.at("run"), e.run);
    if (doc.contains("policy")) parse_policy(doc.at("policy"), e);
    e.system.validate();
    if (doc.contains("state")) e.state = parse_state(doc.at("state"), e.system);
    return e;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& err) {
        throw std::invalid_argument("config parse error in " + path + ": " + err.what());
    }
    return parse_config(doc);
}

json to_json(const ExperimentConfig& e) {
    json doc;
    doc["schema_version"] = e.schema_version;
    if (!e.preset.empty()) doc["preset"] = e.preset;
    json sys;
    sys["num_aps"] = e.system.num_aps;
    sys["num_servers"] = e.system.num_servers;
    sys["num_types"] = e.system.num_types;
    sys["arrival_prob"] = e.system.arrival_prob;
    sys["mean_upload_delay"] = e.system.mean_upload_delay;
    sys["comp_time_pmf"] = e.system.comp_time_pmf;
    sys["discount"] = e.system.discount;
    sys["overflow_weight"] = e.system.overflow_weight;
    sys["n_max"] = e.system.n_max;
    sys["l_max"] = e.system.l_max;
    sys["eta_max"] = e.system.eta_max;
    doc["system"] = sys;
    json run;
    run["slots"] = e.run.slots;
    run["replications"] = e.run.replications;
    run["seed"] = e.run.seed;
    run["warmup"] = e.run.warmup;
    run["threads"] = e.run.num_threads;
    doc["run"] = run;
    json pol;
    std::vector<std::string> kinds;
    for (auto t : e.policies) kinds.push_back(to_string(t));
    pol["kinds"] = kinds;
    pol["expectation_mode"] =
        e.expectation_mode == ExpectationMode::exact ? "exact" : "ce";
    pol["enumeration_cap"] = e.enumeration_cap;
    pol["des_form"] = e.des_form == DesForm::power ? "power" : "chain";
    pol["baseline"] = e.baseline;
    if (!e.baseline_routes.empty()) pol["baseline_routes"] = e.baseline_routes;
    doc["policy"] = pol;
    if (e.state) {
        const auto& s = *e.state;
        std::vector<std::vector<std::vector<int>>> n(
            e.system.num_aps,
            std::vector<std::vector<int>>(e.system.num_types, std::vector<int>(e.system.num_servers)));
        for (int k = 0; k < e.system.num_aps; ++k)
            for (int j = 0; j < e.system.num_types; ++j)
                for (int m = 0; m < e.system.num_servers; ++m) n[k][j][m] = s.n(k, j, m);
        std::vector<std::vector<std::vector<int>>> q(
            e.system.num_servers,
            std::vector<std::vector<int>>(e.system.num_types));
        for (int m = 0; m < e.system.num_servers; ++m)
            for (int j = 0; j < e.system.num_types; ++j)
                q[m][j] = {s.q(m, j).length, s.q(m, j).remaining};
        doc["state"] = {{"in_flight", n}, {"queues", q}};
    }
    return doc;
}

std::string config_digest(const ExperimentConfig& e) {
    const std::string canonical = to_json(e).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    static const char* hex = "0123456789abcdef";
    for (int i = 0; i < 16; ++i) buf[15 - i] = hex[(h >> (4 * i)) & 0xF];
    buf[16] = '\0';
    return std::string(buf);
}

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 12);
    return std::string(buf, res.ptr);
}

void write_trace_csv(const std::string& path, const std::string& digest, const RunMetrics& metrics) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# config_digest=" << digest << "\n";
    out << "slot,replication,cost\n";
    for (long r = 0; r < metrics.replications; ++r)
        for (long t = 0; t < metrics.slots; ++t)
            out << (t + 1) << ',' << r << ','
                << format_double(metrics.cost_trace[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)])
                << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_cdf_csv(const std::string& path, const std::string& digest, const RunMetrics& metrics) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# config_digest=" << digest << "\n";
    out << "cost,cum_prob\n";
    for (const auto& [cost, p] : metrics.cdf)
        out << format_double(cost) << ',' << format_double(p) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string git_describe() { return kGitDescribe; }

} // namespace edgedispatch
