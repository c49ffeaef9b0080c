// Configuration documents, named experiment presets, and the machine-readable
// output writers used by the command-line tool.
#pragma once

#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "edgedispatch/sim.hpp"
#include "edgedispatch/valuefn.hpp"

namespace edgedispatch {

/// Everything one experiment needs, as parsed from a config document.
struct ExperimentConfig {
    int schema_version = 1;
    std::string preset; // empty when fully explicit

    SystemConfig system;
    RunSpec run;

    std::vector<PolicyType> policies{PolicyType::proposed, PolicyType::sqf, PolicyType::suf,
                                     PolicyType::scf, PolicyType::random};
    ExpectationMode expectation_mode = ExpectationMode::exact;
    std::size_t enumeration_cap = 100'000;
    DesForm des_form = DesForm::power;
    std::string baseline = "scf"; // "scf" | "suf" | "explicit"
    std::vector<int> baseline_routes; // [k*J+j], used when baseline == "explicit"

    std::optional<SystemState> state; // evaluation state for the value command

    BaselinePolicy make_baseline() const;
};

/// Named presets. The three scenario presets pin only the regime ratios the
/// figures describe (delay vs computation magnitudes); every other number is
/// a documented default of this artifact, not ground truth.
///   comparable       delay ~10 slots, computation uniform on subranges of {10..15}
///   upload-dominant  delay ~10 slots, computation exactly 1 slot
///   compute-dominant delay 1 slot, computation uniform on subranges of {10..15}
///   tiny             exact-oracle scale: K=2, M=2, J=1, ~400 states
ExperimentConfig make_preset(const std::string& name);
std::vector<std::string> preset_names();

/// Parse a config document. Unknown fields and schema-version mismatches are
/// rejected with a message naming the offending field. A "preset" field loads
/// that preset first; any sections present then replace the preset's.
ExperimentConfig load_config_file(const std::string& path);
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Resolved round-trippable dump of the configuration.
nlohmann::json to_json(const ExperimentConfig& cfg);

/// FNV-1a hash of the canonical resolved dump, embedded in every output file.
std::string config_digest(const ExperimentConfig& cfg);

/// Locale-independent formatting with 12 significant digits.
std::string format_double(double value);

/// Output writers. Every file starts with (or contains) the config digest.
void write_trace_csv(const std::string& path, const std::string& digest, const RunMetrics& metrics);
void write_cdf_csv(const std::string& path, const std::string& digest, const RunMetrics& metrics);

std::string git_describe();

} // namespace edgedispatch
