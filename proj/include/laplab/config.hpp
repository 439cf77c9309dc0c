#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace laplab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat sectioned key/value run description. Every field has a default, every
// run archives its canonical form, and the FNV-1a hash of that canonical form
// is embedded in all outputs so reports can be matched to the config that
// produced them.
struct RunConfig {
    // [grid]
    int dims = 1;
    int points = 2001;
    double half_extent = 100.0;

    // [potential]
    std::string potential_id = "inverse_power:eps=1,mu=1";

    // [hypotheses]
    double c1_override = nan_marker();  // NaN = midpoint rule
    double delta = 0.05;
    double fd_step = 1e-4;
    double eig_rel_tol = 1e-9;
    int form_samples = 128;
    double form_cap = 50.0;

    // [lambda]
    double lambda_start = 0.0;
    double lambda_stop = 2.0;
    int lambda_count = 21;

    // [mu]
    double mu_start = 1.0;
    double mu_floor = 0.0;  // 0 = use the spectral spacing floor
    int mu_count = 0;       // 0 = automatic, about eight points per decade

    // [epsilon]
    int epsilon_count = 12;
    double epsilon_ratio = 2.0;

    // [trace]
    double trace_lambda = 1.0;
    double trace_mu = 0.5;
    int quad_substeps = 16;
    int sample_vectors = 6;

    // [run]
    std::uint64_t seed = 20260815ull;
    int threads = 0;  // 0 = hardware concurrency (LAPLAB_THREADS overrides)
    std::string output_dir = "out";

    // [tolerances]
    double identity_tol = 1e-10;

    static double nan_marker();
    bool c1_overridden() const;
};

// Strict parse: unknown sections or keys, duplicate keys, keys outside any
// section, and malformed values all throw ConfigError.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Single "section.key=value" assignment (CLI --set). Same strictness.
void apply_override(RunConfig& cfg, const std::string& assignment);

// Canonical serialization: fixed section/key order, %.17g numerics. Parsing
// the canonical text reproduces the config exactly.
std::string canonical_text(const RunConfig& cfg);

std::uint64_t fnv1a64(std::string_view s);
std::string config_hash(const RunConfig& cfg);  // 16 hex digits

// Linearly spaced lambda values (count >= 1; count == 1 uses start).
std::vector<double> lambda_values(const RunConfig& cfg);

// Geometric mu schedule from mu_start down to the effective floor
// (cfg.mu_floor if positive, else spacing_floor). Strictly decreasing.
std::vector<double> mu_values(const RunConfig& cfg, double spacing_floor);

}  // namespace laplab
