#pragma once

#include <complex>
#include <string>
#include <vector>

#include "laplab/normspace.hpp"
#include "laplab/operators.hpp"

namespace laplab {

struct SweepCell {
    double lambda = 0.0;
    double mu = 0.0;
    int vector_index = 0;
    std::complex<double> F_plus{};
    double normalized = 0.0;  // |F| / normalization(f)^2
    bool in_scope = true;     // c1 * lambda >= 0
};

struct LambdaSummary {
    double lambda = 0.0;
    double slope = 0.0;
    double slope_stderr = 0.0;
    double growth_exponent = 0.0;  // max(0, -slope)
    double local_floor = 0.0;      // resolvable mu at this lambda; the fit starts here
    bool flat = false;             // growth_exponent < 0.1
    bool in_scope = true;
};

struct LapSweepResult {
    std::vector<double> lambda_grid;
    std::vector<double> mu_schedule;  // decreasing
    std::vector<SweepCell> cells;     // lambda-major, then mu, then vector
    std::vector<LambdaSummary> summaries;
    double sup_normalized = 0.0;      // over in-scope cells
    double mu_floor = 0.0;            // 3x mean level spacing near the swept window
    double mean_spacing = 0.0;
    double min_im_plus = 0.0;         // min over cells of Im F_plus
    bool im_positive_ok = false;
    double worst_conjugate_dev = 0.0;  // sampled |F_minus - conj(F_plus)| / |F|
    bool conjugate_ok = false;
    bool all_flat_in_scope = false;
    int vectors = 0;
};

// 3x the mean eigenvalue spacing of H over the swept lambda window.
double mu_floor_estimate(const SpMat& H, double lambda_lo, double lambda_hi,
                         double* mean_spacing_out = nullptr);

// Per-lambda floors: 3x the mean eigenvalue spacing of H over
// [lambda - half_width, lambda + half_width]. The discrete spectrum cannot
// resolve the resolvent below the local spacing, so each lambda's exponent
// fit starts at its own floor; the schedule bottom is the smallest of them.
std::vector<double> local_mu_floors(const SpMat& H, const std::vector<double>& lambda_grid,
                                    double half_width = 0.25);

// Gaussians exp(-|x - x0|^2 / (2 sigma^2)), sigma in {1, 2}, x0 in {0, (R/4) e_1},
// normalized in the surrogate norm when available, in l2 otherwise.
std::vector<Vec> make_gaussian_vectors(const Grid& grid, const NormContext& ctx);

// Every mu must sit at or above the smallest local floor; otherwise the sweep
// refuses with the spacing estimate in the message. Empty local_floors are
// recomputed from ops.H; a caller-supplied vector must match lambda_grid.
LapSweepResult lap_sweep(const OperatorSet& ops, const NormContext& ctx,
                         const std::vector<Vec>& test_vectors,
                         const std::vector<double>& lambda_grid,
                         const std::vector<double>& mu_schedule,
                         const std::vector<double>& local_floors = {}, int threads = 0);

struct LSpec {
    std::string id;
    Vec diag;
    double tail_exponent = 0.0;  // lim log|L| / log|x|; -inf for L = 0
    bool is_zero = false;
};

// Multiplication-weight selectors: "zero", "one", "lmax", "scale:<a>".
LSpec make_l_spec(const std::string& selector, const NormContext& ctx);

struct KatoProbeCell {
    double lambda = 0.0;
    double mu = 0.0;
    double value = 0.0;  // sup over starts of <Lg, Im G Lg> after refinement
};

struct KatoProbeResult {
    bool refused = false;
    std::string message;
    double c_dom = 0.0;              // worst grid ratio |L| / L_max
    double l_tail_exponent = 0.0;    // declared by the selector
    double lmax_tail_exponent = 0.0;
    bool dominated = false;
    std::vector<KatoProbeCell> cells;  // lambda-major, then mu
    std::vector<LambdaSummary> summaries;
    double sup_value = 0.0;
    bool flat = false;             // all exponents < 0.1
    bool growth_detected = false;  // any exponent >= 0.4
    double mu_floor = 0.0;
};

// sup over cells of the top of the sandwiched imaginary part L Im(G) L,
// estimated from sample_count seeded starts refined by power_iters power
// iterations (power_iters = 0 keeps the literal sampled values).
KatoProbeResult kato_smoothness_probe(const OperatorSet& ops, const NormContext& ctx,
                                      const LSpec& l_spec,
                                      const std::vector<double>& lambda_grid,
                                      const std::vector<double>& mu_schedule,
                                      const std::vector<double>& local_floors = {},
                                      int sample_count = 4, int power_iters = 3,
                                      bool force = false,
                                      unsigned long long seed = 0x2da7a5eedull);

}  // namespace laplab
