// Scratch: sweep comparable-regime parameterizations.
#include <iostream>
#include <memory>

#include "edgedispatch/config_io.hpp"
#include "edgedispatch/sim.hpp"

using namespace edgedispatch;

int main(int argc, char** argv) {
    double lambda = argc > 1 ? std::stod(argv[1]) : 0.013;
    double u_fastcomp = argc > 2 ? std::stod(argv[2]) : 13.0; // upload at the fast-comp server
    double u_mid = argc > 3 ? std::stod(argv[3]) : 10.0;
    double u_slowcomp = argc > 4 ? std::stod(argv[4]) : 7.0;  // upload at the slow-comp server
    long slots = argc > 5 ? std::stol(argv[5]) : 2500;
    long reps = argc > 6 ? std::stol(argv[6]) : 8;

    SystemConfig c;
    c.num_aps = 5;
    c.num_servers = 3;
    c.num_types = 10;
    c.n_max = 3;
    c.l_max = 5;
    c.eta_max = 15;
    c.discount = 0.95;
    c.overflow_weight = 10.0;
    c.arrival_prob.assign(5, std::vector<double>(10, lambda));

    auto uniform = [&](int lo, int hi) {
        CompTimePmf f(15, 0.0);
        for (int x = lo; x <= hi; ++x) f[x - 1] = 1.0 / (hi - lo + 1);
        return f;
    };

    // Role of server m for type j: 0 = fast comp/slow upload, 1 = middle,
    // 2 = slow comp/fast upload. Role 0 lands on (m=0,j=0) so the anchor cell
    // keeps comp U{10..15} and upload 10... anchor wants upload 10 though.
    c.mean_upload_delay.assign(5, std::vector<std::vector<double>>(10, std::vector<double>(3)));
    c.comp_time_pmf.assign(3, std::vector<CompTimePmf>(10));
    for (int j = 0; j < 10; ++j)
        for (int m = 0; m < 3; ++m) {
            int role = (m + j) % 3;
            c.comp_time_pmf[m][j] = role == 0 ? uniform(10, 15) : (role == 1 ? uniform(13, 15) : uniform(14, 15));
            double base = role == 0 ? u_fastcomp : (role == 1 ? u_mid : u_slowcomp);
            for (int k = 0; k < 5; ++k) {
                double jitter = ((2 * k + 3 * j + 5 * m) % 3) - 1.0; // -1, 0, +1
                c.mean_upload_delay[k][j][m] = std::max(1.0, base + jitter);
            }
        }
    // Caption anchor: first AP/type/server uploads in 10 slots on average.
    for (int k = 0; k < 5; ++k) c.mean_upload_delay[k][0][0] = u_fastcomp;
    c.mean_upload_delay[0][0][0] = 10.0;

    auto tables = std::make_shared<ValueTables>(c, baseline_scf(c));
    PolicyKind pk;
    std::vector<std::unique_ptr<PolicyEngine>> engines;
    std::vector<std::pair<std::string, const PolicyEngine*>> named;
    for (PolicyType t : {PolicyType::proposed, PolicyType::sqf, PolicyType::suf, PolicyType::scf,
                         PolicyType::random}) {
        pk.type = t;
        engines.push_back(std::make_unique<PolicyEngine>(pk, c, tables));
        named.emplace_back(to_string(t), engines.back().get());
    }

    RunSpec spec;
    spec.slots = slots;
    spec.replications = reps;
    spec.seed = 20250811;
    spec.warmup = slots / 10;
    spec.num_threads = 2;
    auto report = compare(c, named, spec);

    std::cout << "lambda=" << lambda << " u=(" << u_fastcomp << "," << u_mid << "," << u_slowcomp
              << ")\n";
    for (const auto& e : report.entries)
        std::cout << "  " << e.name << " mean=" << e.metrics.mean_cost
                  << " se=" << e.metrics.std_error_cost << " ovf=" << e.metrics.overflow_drops
                  << "\n";
    for (const auto& d : report.pairwise)
        if (d.a == "proposed")
            std::cout << "  diff " << d.a << "-" << d.b << " = " << d.mean << " +- "
                      << 1.96 * d.std_error << "\n";
    return 0;
}
