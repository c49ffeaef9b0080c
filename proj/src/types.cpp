#include "edgedispatch/types.hpp"

#include <cmath>

namespace edgedispatch {

void SystemConfig::validate() const {
    require(num_aps >= 1, "num_aps must be >= 1");
    require(num_servers >= 1, "num_servers must be >= 1");
    require(num_types >= 1, "num_types must be >= 1");
    require(n_max >= 1, "n_max must be >= 1");
    require(l_max >= 1, "l_max must be >= 1");
    require(eta_max >= 1, "eta_max must be >= 1");
    require(discount > 0.0 && discount < 1.0, "discount must lie in (0,1)");
    require(overflow_weight >= 0.0, "overflow_weight must be >= 0");

    require(static_cast<int>(arrival_prob.size()) == num_aps, "arrival_prob: wrong AP dimension");
    for (int k = 0; k < num_aps; ++k) {
        require(static_cast<int>(arrival_prob[k].size()) == num_types,
                "arrival_prob: wrong type dimension at AP " + std::to_string(k));
        for (int j = 0; j < num_types; ++j)
            require(arrival_prob[k][j] >= 0.0 && arrival_prob[k][j] <= 1.0,
                    "arrival_prob[" + std::to_string(k) + "][" + std::to_string(j) + "] outside [0,1]");
    }

    require(static_cast<int>(mean_upload_delay.size()) == num_aps, "mean_upload_delay: wrong AP dimension");
    for (int k = 0; k < num_aps; ++k) {
        require(static_cast<int>(mean_upload_delay[k].size()) == num_types,
                "mean_upload_delay: wrong type dimension at AP " + std::to_string(k));
        for (int j = 0; j < num_types; ++j) {
            require(static_cast<int>(mean_upload_delay[k][j].size()) == num_servers,
                    "mean_upload_delay: wrong server dimension at (" + std::to_string(k) + "," +
                        std::to_string(j) + ")");
            for (int m = 0; m < num_servers; ++m)
                require(mean_upload_delay[k][j][m] >= 1.0,
                        "mean_upload_delay[" + std::to_string(k) + "][" + std::to_string(j) + "][" +
                            std::to_string(m) + "] must be >= 1");
        }
    }

    require(static_cast<int>(comp_time_pmf.size()) == num_servers, "comp_time_pmf: wrong server dimension");
    for (int m = 0; m < num_servers; ++m) {
        require(static_cast<int>(comp_time_pmf[m].size()) == num_types,
                "comp_time_pmf: wrong type dimension at server " + std::to_string(m));
        for (int j = 0; j < num_types; ++j) {
            const auto& f = comp_time_pmf[m][j];
            require(static_cast<int>(f.size()) == eta_max,
                    "comp_time_pmf[" + std::to_string(m) + "][" + std::to_string(j) +
                        "] must have eta_max entries");
            double s = 0.0;
            for (double p : f) {
                require(p >= 0.0 && p <= 1.0, "comp_time_pmf entries must lie in [0,1]");
                s += p;
            }
            require(std::abs(s - 1.0) <= 1e-12,
                    "comp_time_pmf[" + std::to_string(m) + "][" + std::to_string(j) +
                        "] must sum to 1 within 1e-12");
        }
    }
}

} // namespace edgedispatch
