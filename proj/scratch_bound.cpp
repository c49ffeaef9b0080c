// Scratch: inspect bound violations on candidate tiny presets.
#include <iostream>
#include <memory>

#include "edgedispatch/config_io.hpp"
#include "edgedispatch/oracle.hpp"

using namespace edgedispatch;

int main(int argc, char** argv) {
    double lambda = argc > 1 ? std::stod(argv[1]) : 0.1;
    double gamma = argc > 2 ? std::stod(argv[2]) : 0.9;
    double beta = argc > 3 ? std::stod(argv[3]) : 5.0;
    double u0 = argc > 4 ? std::stod(argv[4]) : 2.0;
    double u1 = argc > 5 ? std::stod(argv[5]) : 3.0;
    int form = argc > 6 ? std::stoi(argv[6]) : 0;

    SystemConfig c;
    c.num_aps = 2;
    c.num_servers = 2;
    c.num_types = 1;
    c.n_max = 1;
    c.l_max = 2;
    c.eta_max = 2;
    c.discount = gamma;
    c.overflow_weight = beta;
    c.arrival_prob = {{lambda}, {lambda}};
    c.mean_upload_delay = {{{u0, u1}}, {{u1, u0}}};
    c.comp_time_pmf = {{{0.7, 0.3}}, {{0.3, 0.7}}};

    auto tables = std::make_shared<ValueTables>(c, baseline_scf(c),
                                                form ? DesForm::chain : DesForm::power);
    PolicyKind pk;
    pk.type = PolicyType::proposed;
    PolicyEngine proposed(pk, c, tables);
    PolicyKind bk;
    bk.type = PolicyType::baseline;
    PolicyEngine baseline(bk, c, tables);

    auto mdp = enumerate_mdp(c);
    auto rep = check_bound(mdp, proposed, baseline);
    std::cout << "lambda=" << lambda << " gamma=" << gamma << " beta=" << beta << " u=(" << u0
              << "," << u1 << ") form=" << (form ? "chain" : "power") << "\n";
    std::cout << "min improvement margin: " << rep.min_improvement_margin << "\n";
    std::cout << "violations: " << rep.violations.size() << " of " << mdp.num_states() << "\n";

    int shown = 0;
    for (int s : rep.violations) {
        if (++shown > 5) break;
        const auto& st = mdp.states[s];
        TrajectoryRng rng(0, 0);
        auto a_prop = proposed.decide(st, rng);
        auto a_base = baseline.decide(st, rng);
        std::cout << "  state " << s << ": N=[" << st.n(0, 0, 0) << st.n(0, 0, 1) << st.n(1, 0, 0)
                  << st.n(1, 0, 1) << "] Q0=(" << st.q(0, 0).length << "," << st.q(0, 0).remaining
                  << ") Q1=(" << st.q(1, 0).length << "," << st.q(1, 0).remaining << ")"
                  << " prop=(" << a_prop.dest(0, 0) << "," << a_prop.dest(1, 0) << ")"
                  << " base=(" << a_base.dest(0, 0) << "," << a_base.dest(1, 0) << ")"
                  << " V_prop=" << rep.v_improved(s) << " V_base=" << rep.v_baseline(s) << "\n";
    }
    return 0;
}
