#include "laplab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace laplab {

namespace {

std::string trim(std::string_view s) {
    const char* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& v, const std::string& where) {
    double out = 0.0;
    const char* first = v.data();
    const char* last = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw ConfigError(where + ": expected a number, got '" + v + "'");
    return out;
}

int to_int(const std::string& v, const std::string& where) {
    int out = 0;
    const char* first = v.data();
    const char* last = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw ConfigError(where + ": expected an integer, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& v, const std::string& where) {
    std::uint64_t out = 0;
    const char* first = v.data();
    const char* last = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw ConfigError(where + ": expected an unsigned integer, got '" + v + "'");
    return out;
}

double to_positive(const std::string& v, const std::string& where) {
    const double d = to_double(v, where);
    if (!(d > 0.0)) throw ConfigError(where + ": must be > 0, got '" + v + "'");
    return d;
}

int to_positive_int(const std::string& v, const std::string& where) {
    const int i = to_int(v, where);
    if (i <= 0) throw ConfigError(where + ": must be > 0, got '" + v + "'");
    return i;
}

void set_key(RunConfig& cfg, const std::string& section, const std::string& key,
             const std::string& value) {
    const std::string where = section + "." + key;
    if (section == "grid") {
        if (key == "dims") { cfg.dims = to_positive_int(value, where); return; }
        if (key == "points") { cfg.points = to_positive_int(value, where); return; }
        if (key == "half_extent") { cfg.half_extent = to_positive(value, where); return; }
    } else if (section == "potential") {
        if (key == "id") {
            if (value.empty()) throw ConfigError(where + ": empty potential id");
            cfg.potential_id = value;
            return;
        }
    } else if (section == "hypotheses") {
        if (key == "c1_override") {
            cfg.c1_override = (value == "none") ? RunConfig::nan_marker()
                                                : to_double(value, where);
            return;
        }
        if (key == "delta") { cfg.delta = to_positive(value, where); return; }
        if (key == "fd_step") { cfg.fd_step = to_positive(value, where); return; }
        if (key == "eig_rel_tol") { cfg.eig_rel_tol = to_positive(value, where); return; }
        if (key == "form_samples") { cfg.form_samples = to_positive_int(value, where); return; }
        if (key == "form_cap") { cfg.form_cap = to_positive(value, where); return; }
    } else if (section == "lambda") {
        if (key == "start") { cfg.lambda_start = to_double(value, where); return; }
        if (key == "stop") { cfg.lambda_stop = to_double(value, where); return; }
        if (key == "count") { cfg.lambda_count = to_positive_int(value, where); return; }
    } else if (section == "mu") {
        if (key == "start") { cfg.mu_start = to_positive(value, where); return; }
        if (key == "floor") {
            cfg.mu_floor = (value == "spacing") ? 0.0 : to_positive(value, where);
            return;
        }
        if (key == "count") {
            const int i = to_int(value, where);
            if (i != 0 && i < 4)
                throw ConfigError(where + ": must be 0 (auto) or >= 4 (exponent fits)");
            cfg.mu_count = i;
            return;
        }
    } else if (section == "epsilon") {
        if (key == "count") { cfg.epsilon_count = to_positive_int(value, where); return; }
        if (key == "ratio") {
            cfg.epsilon_ratio = to_double(value, where);
            if (!(cfg.epsilon_ratio > 1.0)) throw ConfigError(where + ": must be > 1");
            return;
        }
    } else if (section == "trace") {
        if (key == "lambda") { cfg.trace_lambda = to_double(value, where); return; }
        if (key == "mu") { cfg.trace_mu = to_positive(value, where); return; }
        if (key == "quad_substeps") { cfg.quad_substeps = to_positive_int(value, where); return; }
        if (key == "sample_vectors") { cfg.sample_vectors = to_positive_int(value, where); return; }
    } else if (section == "run") {
        if (key == "seed") { cfg.seed = to_u64(value, where); return; }
        if (key == "threads") {
            const int i = to_int(value, where);
            if (i < 0) throw ConfigError(where + ": must be >= 0");
            cfg.threads = i;
            return;
        }
        if (key == "output_dir") {
            if (value.empty()) throw ConfigError(where + ": empty output_dir");
            cfg.output_dir = value;
            return;
        }
    } else if (section == "tolerances") {
        if (key == "identity_tol") { cfg.identity_tol = to_positive(value, where); return; }
    } else {
        throw ConfigError("unknown section [" + section + "]");
    }
    throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double RunConfig::nan_marker() { return std::numeric_limits<double>::quiet_NaN(); }

bool RunConfig::c1_overridden() const { return std::isfinite(c1_override); }

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string raw;
    std::string section;
    std::set<std::string> seen;
    int lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        const std::string dotted = section + "." + key;
        if (!seen.insert(dotted).second)
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + dotted + "'");
        set_key(cfg, section, key, value);
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override '" + assignment + "': expected section.key=value");
    const std::string dotted = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    const auto dot = dotted.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == dotted.size())
        throw ConfigError("override '" + assignment + "': expected section.key=value");
    set_key(cfg, dotted.substr(0, dot), dotted.substr(dot + 1), value);
}

std::string canonical_text(const RunConfig& cfg) {
    std::ostringstream os;
    os << "[grid]\n";
    os << "dims = " << cfg.dims << "\n";
    os << "points = " << cfg.points << "\n";
    os << "half_extent = " << g17(cfg.half_extent) << "\n";
    os << "\n[potential]\n";
    os << "id = " << cfg.potential_id << "\n";
    os << "\n[hypotheses]\n";
    os << "c1_override = "
       << (cfg.c1_overridden() ? g17(cfg.c1_override) : std::string("none")) << "\n";
    os << "delta = " << g17(cfg.delta) << "\n";
    os << "fd_step = " << g17(cfg.fd_step) << "\n";
    os << "eig_rel_tol = " << g17(cfg.eig_rel_tol) << "\n";
    os << "form_samples = " << cfg.form_samples << "\n";
    os << "form_cap = " << g17(cfg.form_cap) << "\n";
    os << "\n[lambda]\n";
    os << "start = " << g17(cfg.lambda_start) << "\n";
    os << "stop = " << g17(cfg.lambda_stop) << "\n";
    os << "count = " << cfg.lambda_count << "\n";
    os << "\n[mu]\n";
    os << "start = " << g17(cfg.mu_start) << "\n";
    os << "floor = " << (cfg.mu_floor > 0.0 ? g17(cfg.mu_floor) : std::string("spacing"))
       << "\n";
    os << "count = " << cfg.mu_count << "\n";
    os << "\n[epsilon]\n";
    os << "count = " << cfg.epsilon_count << "\n";
    os << "ratio = " << g17(cfg.epsilon_ratio) << "\n";
    os << "\n[trace]\n";
    os << "lambda = " << g17(cfg.trace_lambda) << "\n";
    os << "mu = " << g17(cfg.trace_mu) << "\n";
    os << "quad_substeps = " << cfg.quad_substeps << "\n";
    os << "sample_vectors = " << cfg.sample_vectors << "\n";
    os << "\n[run]\n";
    os << "seed = " << cfg.seed << "\n";
    os << "threads = " << cfg.threads << "\n";
    os << "output_dir = " << cfg.output_dir << "\n";
    os << "\n[tolerances]\n";
    os << "identity_tol = " << g17(cfg.identity_tol) << "\n";
    return os.str();
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string config_hash(const RunConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_text(cfg))));
    return buf;
}

std::vector<double> lambda_values(const RunConfig& cfg) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(cfg.lambda_count));
    if (cfg.lambda_count == 1) {
        out.push_back(cfg.lambda_start);
        return out;
    }
    const double step = (cfg.lambda_stop - cfg.lambda_start) / (cfg.lambda_count - 1);
    for (int i = 0; i < cfg.lambda_count; ++i) out.push_back(cfg.lambda_start + step * i);
    return out;
}

std::vector<double> mu_values(const RunConfig& cfg, double spacing_floor) {
    const double floor_v = cfg.mu_floor > 0.0 ? cfg.mu_floor : spacing_floor;
    if (!(floor_v > 0.0))
        throw ConfigError("mu schedule: effective floor must be > 0");
    if (!(floor_v < cfg.mu_start))
        throw ConfigError("mu schedule: floor " + g17(floor_v) + " is not below start " +
                          g17(cfg.mu_start));
    const double decades = std::log10(cfg.mu_start / floor_v);
    const int count = cfg.mu_count > 0
                          ? cfg.mu_count
                          : std::max(6, static_cast<int>(std::lround(8.0 * decades)) + 1);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    const double log_start = std::log(cfg.mu_start);
    const double log_floor = std::log(floor_v);
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        out.push_back(std::exp(log_start + t * (log_floor - log_start)));
    }
    out.front() = cfg.mu_start;
    out.back() = floor_v;
    if (count == 1) out.front() = cfg.mu_start;
    for (std::size_t i = 1; i < out.size(); ++i)
        if (!(out[i] < out[i - 1]))
            throw ConfigError("mu schedule: not strictly decreasing (count too large?)");
    return out;
}

}  // namespace laplab
