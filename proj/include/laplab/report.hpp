#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "laplab/hypotheses.hpp"
#include "laplab/resolvent.hpp"
#include "laplab/sweep.hpp"

namespace laplab {

// %.17g — round-trips doubles exactly, so identical runs give identical bytes.
std::string csv_number(double v);

// Every CSV starts with "# config_hash=<hash>" followed by a commented header
// row, so the body stays purely numeric for gnuplot.
std::string lap_cells_csv(const LapSweepResult& r, const std::string& cfg_hash);
std::string lap_summary_csv(const LapSweepResult& r, const std::string& cfg_hash);
std::string lap_plot_script(const LapSweepResult& r, const std::string& cells_csv,
                            const std::string& summary_csv);
nlohmann::ordered_json lap_json(const LapSweepResult& r, double lambda_min_H,
                                double lambda_min_H_error, const std::string& cfg_hash);

struct TraceIdentityRow {
    double epsilon = 0.0;
    FormIdentityCheck plus;
    FormIdentityCheck minus;
};

// Heterogeneous rows, tagged by a leading kind column:
//   point,eps,...      one row per schedule point
//   identity,eps,...   algebraic identity residuals at the same points
//   window,eps,diff    resolvent difference norms (includes the eps = 0 row)
//   fit,slope,stderr   the window's log-log fit
std::string trace_csv(const RegularizedTrace& t, const std::vector<TraceIdentityRow>& ids,
                      const EpsWindowReport& w, double zero_row_diff,
                      const std::string& cfg_hash);
nlohmann::ordered_json trace_json(const RegularizedTrace& t,
                                  const std::vector<TraceIdentityRow>& ids,
                                  const EpsWindowReport& w, double zero_row_diff,
                                  const std::string& cfg_hash);

std::string kato_cells_csv(const KatoProbeResult& k, const std::string& cfg_hash);
std::string kato_summary_csv(const KatoProbeResult& k, const std::string& cfg_hash);
nlohmann::ordered_json kato_json(const KatoProbeResult& k, const std::string& cfg_hash);

void ensure_dir(const std::string& dir);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);  // throws std::runtime_error

// First line of an emitted CSV, or "" when the file has no hash line.
std::string embedded_hash(const std::string& csv_text);

}  // namespace laplab
