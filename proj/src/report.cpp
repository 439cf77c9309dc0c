#include "laplab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace laplab {

namespace {

using nlohmann::ordered_json;

std::string hash_line(const std::string& cfg_hash) {
    return "# config_hash=" + cfg_hash + "\n";
}

ordered_json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

ordered_json summary_json(const LambdaSummary& s) {
    ordered_json j;
    j["lambda"] = s.lambda;
    j["slope"] = finite_or_null(s.slope);
    j["slope_stderr"] = finite_or_null(s.slope_stderr);
    j["growth_exponent"] = finite_or_null(s.growth_exponent);
    j["local_floor"] = finite_or_null(s.local_floor);
    j["flat"] = s.flat;
    j["in_scope"] = s.in_scope;
    if (!s.in_scope) j["note"] = "outside theorem scope";
    return j;
}

}  // namespace

std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string lap_cells_csv(const LapSweepResult& r, const std::string& cfg_hash) {
    std::string out = hash_line(cfg_hash);
    out += "# lambda,mu,vector,re_F_plus,im_F_plus,normalized,in_scope\n";
    for (const SweepCell& c : r.cells) {
        out += csv_number(c.lambda);
        out += ',';
        out += csv_number(c.mu);
        out += ',';
        out += std::to_string(c.vector_index);
        out += ',';
        out += csv_number(c.F_plus.real());
        out += ',';
        out += csv_number(c.F_plus.imag());
        out += ',';
        out += csv_number(c.normalized);
        out += ',';
        out += c.in_scope ? '1' : '0';
        out += '\n';
    }
    return out;
}

std::string lap_summary_csv(const LapSweepResult& r, const std::string& cfg_hash) {
    std::string out = hash_line(cfg_hash);
    out += "# lambda,slope,slope_stderr,growth_exponent,local_floor,flat,in_scope\n";
    for (const LambdaSummary& s : r.summaries) {
        out += csv_number(s.lambda);
        out += ',';
        out += csv_number(s.slope);
        out += ',';
        out += csv_number(s.slope_stderr);
        out += ',';
        out += csv_number(s.growth_exponent);
        out += ',';
        out += csv_number(s.local_floor);
        out += ',';
        out += s.flat ? '1' : '0';
        out += ',';
        out += s.in_scope ? '1' : '0';
        out += '\n';
    }
    return out;
}

std::string lap_plot_script(const LapSweepResult& r, const std::string& cells_csv,
                            const std::string& summary_csv) {
    std::ostringstream os;
    os << "# gnuplot script: normalized |F| vs mu per lambda, then fitted exponents\n";
    os << "set datafile separator ','\n";
    os << "set datafile commentschars '#'\n";
    os << "set key outside\n";
    os << "set logscale xy\n";
    os << "set xlabel 'mu'\n";
    os << "set ylabel 'normalized |F|'\n";
    os << "plot \\\n";
    for (std::size_t i = 0; i < r.lambda_grid.size(); ++i) {
        char cond[96];
        std::snprintf(cond, sizeof cond, "abs($1 - (%.17g)) < 1e-12 && $3 == 0",
                      r.lambda_grid[i]);
        char title[48];
        std::snprintf(title, sizeof title, "lambda=%.4g", r.lambda_grid[i]);
        os << "  '" << cells_csv << "' using (" << cond << " ? $2 : 1/0):6 "
           << "with linespoints title '" << title << "'";
        os << (i + 1 < r.lambda_grid.size() ? ", \\\n" : "\n");
    }
    os << "pause -1 'exponent summary next'\n";
    os << "unset logscale\n";
    os << "set xlabel 'lambda'\n";
    os << "set ylabel 'growth exponent'\n";
    os << "plot '" << summary_csv << "' using 1:4 with linespoints title 'fitted exponent', \\\n";
    os << "  0.1 with lines dashtype 2 title 'flat threshold'\n";
    os << "pause -1 'done'\n";
    return os.str();
}

nlohmann::ordered_json lap_json(const LapSweepResult& r, double lambda_min_H,
                                double lambda_min_H_error, const std::string& cfg_hash) {
    ordered_json j;
    j["tool"] = "lap";
    j["config_hash"] = cfg_hash;
    j["lambda_min_H"] = lambda_min_H;
    j["lambda_min_H_error"] = lambda_min_H_error;
    j["mu_floor"] = r.mu_floor;
    j["mean_spacing"] = r.mean_spacing;
    j["sup_normalized"] = r.sup_normalized;
    j["all_flat_in_scope"] = r.all_flat_in_scope;
    j["min_im_plus"] = r.min_im_plus;
    j["im_positive_ok"] = r.im_positive_ok;
    j["worst_conjugate_dev"] = r.worst_conjugate_dev;
    j["conjugate_ok"] = r.conjugate_ok;
    j["vectors"] = r.vectors;
    j["lambda_grid"] = r.lambda_grid;
    j["mu_schedule"] = r.mu_schedule;
    j["summaries"] = ordered_json::array();
    for (const LambdaSummary& s : r.summaries) j["summaries"].push_back(summary_json(s));
    return j;
}

std::string trace_csv(const RegularizedTrace& t, const std::vector<TraceIdentityRow>& ids,
                      const EpsWindowReport& w, double zero_row_diff,
                      const std::string& cfg_hash) {
    std::string out = hash_line(cfg_hash);
    out += "# point,eps,re_F_plus,im_F_plus,re_F_minus,im_F_minus,s_star_fprime,s_star_Af,"
           "envelope_slack_plus,envelope_slack_minus,dual_bound_C_plus,dual_bound_C_minus,deriv_plus,deriv_minus,"
           "deriv_envelope_plus,deriv_envelope_minus,deriv_defined\n";
    out += "# identity,eps,residual_plus,residual_minus,margin_plus,margin_minus,"
           "margin_applicable\n";
    out += "# window,eps,diff_norm\n";
    out += "# fit,slope,slope_stderr\n";
    for (const TracePoint& p : t.points) {
        out += "point," + csv_number(p.epsilon);
        out += ',' + csv_number(p.F_plus.real()) + ',' + csv_number(p.F_plus.imag());
        out += ',' + csv_number(p.F_minus.real()) + ',' + csv_number(p.F_minus.imag());
        out += ',' + csv_number(p.s_star_fprime) + ',' + csv_number(p.s_star_Af);
        out += ',' + csv_number(p.envelope_slack_plus) + ',' + csv_number(p.envelope_slack_minus);
        out += ',' + csv_number(p.dual_bound_C_plus) + ',' + csv_number(p.dual_bound_C_minus);
        out += ',' + csv_number(p.deriv_plus) + ',' + csv_number(p.deriv_minus);
        out += ',' + csv_number(p.deriv_envelope_plus) + ',' + csv_number(p.deriv_envelope_minus);
        out += ',';
        out += p.deriv_defined ? '1' : '0';
        out += '\n';
    }
    for (const TraceIdentityRow& row : ids) {
        out += "identity," + csv_number(row.epsilon);
        out += ',' + csv_number(row.plus.identity_residual);
        out += ',' + csv_number(row.minus.identity_residual);
        out += ',' + csv_number(row.plus.positivity_margin);
        out += ',' + csv_number(row.minus.positivity_margin);
        out += ',';
        out += row.plus.margin_applicable ? '1' : '0';
        out += '\n';
    }
    for (std::size_t i = 0; i < w.eps_values.size(); ++i)
        out += "window," + csv_number(w.eps_values[i]) + ',' + csv_number(w.diff_norms[i]) + '\n';
    out += "window,0," + csv_number(zero_row_diff) + '\n';
    out += "fit," + csv_number(w.slope) + ',' + csv_number(w.slope_stderr) + '\n';
    return out;
}

nlohmann::ordered_json trace_json(const RegularizedTrace& t,
                                  const std::vector<TraceIdentityRow>& ids,
                                  const EpsWindowReport& w, double zero_row_diff,
                                  const std::string& cfg_hash) {
    ordered_json j;
    j["tool"] = "proof-trace";
    j["config_hash"] = cfg_hash;
    j["lambda"] = t.lambda;
    j["mu"] = t.mu;
    j["eps0"] = t.eps0;
    j["eps1"] = t.eps1;
    j["d_CB_emp"] = t.d_CB_emp;
    j["F0_plus"] = {t.F0_plus.real(), t.F0_plus.imag()};
    j["F0_minus"] = {t.F0_minus.real(), t.F0_minus.imag()};
    j["F_direct_plus"] = {t.F_direct_plus.real(), t.F_direct_plus.imag()};
    j["gronwall_ratio"] = t.gronwall_ratio;
    j["smoothing_integral_ratio"] = t.smoothing_integral_ratio;
    j["im_sign_ok"] = t.im_sign_ok;

    double max_identity = 0.0;
    double min_margin = std::numeric_limits<double>::infinity();
    bool any_margin = false;
    for (const TraceIdentityRow& row : ids) {
        max_identity = std::max({max_identity, row.plus.identity_residual,
                                 row.minus.identity_residual});
        if (row.plus.margin_applicable) {
            any_margin = true;
            min_margin = std::min({min_margin, row.plus.positivity_margin,
                                   row.minus.positivity_margin});
        }
    }
    j["max_identity_residual"] = max_identity;
    j["min_positivity_margin"] = any_margin ? ordered_json(min_margin) : ordered_json(nullptr);

    double min_slack = std::numeric_limits<double>::infinity();
    double c_min_p = std::numeric_limits<double>::infinity(), c_max_p = 0.0;
    double c_min_m = std::numeric_limits<double>::infinity(), c_max_m = 0.0;
    double min_deriv_margin = std::numeric_limits<double>::infinity();
    bool any14 = false;
    for (const TracePoint& p : t.points) {
        min_slack = std::min({min_slack, p.envelope_slack_plus, p.envelope_slack_minus});
        c_min_p = std::min(c_min_p, p.dual_bound_C_plus);
        c_max_p = std::max(c_max_p, p.dual_bound_C_plus);
        c_min_m = std::min(c_min_m, p.dual_bound_C_minus);
        c_max_m = std::max(c_max_m, p.dual_bound_C_minus);
        if (p.deriv_defined) {
            any14 = true;
            min_deriv_margin = std::min({min_deriv_margin, p.deriv_envelope_plus - p.deriv_plus,
                                     p.deriv_envelope_minus - p.deriv_minus});
        }
    }
    j["envelope_min_slack"] = t.points.empty() ? ordered_json(nullptr) : ordered_json(min_slack);
    j["dual_bound_spread_plus"] = c_min_p > 0.0 ? ordered_json(c_max_p / c_min_p) : ordered_json(nullptr);
    j["dual_bound_spread_minus"] = c_min_m > 0.0 ? ordered_json(c_max_m / c_min_m) : ordered_json(nullptr);
    j["deriv14_min_margin"] = any14 ? ordered_json(min_deriv_margin) : ordered_json(nullptr);

    ordered_json win;
    win["eps2"] = w.eps2;
    win["eps_values"] = w.eps_values;
    win["diff_norms"] = w.diff_norms;
    win["slope"] = w.slope;
    win["slope_stderr"] = w.slope_stderr;
    win["slope_ok"] = w.slope_ok;
    win["worst_contraction_ratio"] = w.worst_contraction_ratio;
    win["contraction_ok"] = w.contraction_ok;
    win["zero_row_diff"] = zero_row_diff;
    j["window"] = win;

    j["caveats"] = ordered_json::array(
        {"contraction ratios are diagnostics: the half-shift contraction holds only up to an "
         "O(eps^2) correction at small mu",
         "smoothing_integral_ratio is a scale diagnostic, not a certified bound"});
    return j;
}

std::string kato_cells_csv(const KatoProbeResult& k, const std::string& cfg_hash) {
    std::string out = hash_line(cfg_hash);
    out += "# lambda,mu,value\n";
    for (const KatoProbeCell& c : k.cells) {
        out += csv_number(c.lambda);
        out += ',';
        out += csv_number(c.mu);
        out += ',';
        out += csv_number(c.value);
        out += '\n';
    }
    return out;
}

std::string kato_summary_csv(const KatoProbeResult& k, const std::string& cfg_hash) {
    std::string out = hash_line(cfg_hash);
    out += "# lambda,slope,slope_stderr,growth_exponent,local_floor,flat,in_scope\n";
    for (const LambdaSummary& s : k.summaries) {
        out += csv_number(s.lambda);
        out += ',';
        out += csv_number(s.slope);
        out += ',';
        out += csv_number(s.slope_stderr);
        out += ',';
        out += csv_number(s.growth_exponent);
        out += ',';
        out += csv_number(s.local_floor);
        out += ',';
        out += s.flat ? '1' : '0';
        out += ',';
        out += s.in_scope ? '1' : '0';
        out += '\n';
    }
    return out;
}

nlohmann::ordered_json kato_json(const KatoProbeResult& k, const std::string& cfg_hash) {
    ordered_json j;
    j["tool"] = "smooth";
    j["config_hash"] = cfg_hash;
    j["refused"] = k.refused;
    j["message"] = k.message;
    j["c_dom"] = finite_or_null(k.c_dom);
    j["l_tail_exponent"] = finite_or_null(k.l_tail_exponent);
    j["lmax_tail_exponent"] = finite_or_null(k.lmax_tail_exponent);
    j["dominated"] = k.dominated;
    j["sup_value"] = k.sup_value;
    j["flat"] = k.flat;
    j["growth_detected"] = k.growth_detected;
    j["mu_floor"] = k.mu_floor;
    j["summaries"] = ordered_json::array();
    for (const LambdaSummary& s : k.summaries) j["summaries"].push_back(summary_json(s));
    return j;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory '" + dir + "': " + ec.message());
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << content;
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string embedded_hash(const std::string& csv_text) {
    const std::string prefix = "# config_hash=";
    if (csv_text.rfind(prefix, 0) != 0) return {};
    const auto nl = csv_text.find('\n');
    if (nl == std::string::npos) return {};
    return csv_text.substr(prefix.size(), nl - prefix.size());
}

}  // namespace laplab
