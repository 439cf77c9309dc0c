#pragma once

#include <limits>
#include <string>

#include "json.hpp"
#include "laplab/operators.hpp"
#include "laplab/potentials.hpp"

namespace laplab {

struct EulerFields {
    Vec euler1;  // (x . grad V)(x_i)
    Vec euler2;  // second Euler derivative W(x_i)
    bool analytic = true;
};

// Evaluates both Euler derivatives on the grid, using the potential's analytic
// callbacks when present and a central dilation difference otherwise.
EulerFields euler_derivatives(const PotentialSpec& pot, const Grid& grid,
                              double h_fd = 1e-4);

struct ConditionFlags {
    bool i = false;           // V <= 0 everywhere
    bool ii = false;          // c_tilde < 2
    bool iii = false;         // d_tilde finite
    bool s_positive = false;  // lambda_min(S) > 0
};

struct HypothesisReport {
    std::string potential_id;

    // ratio suprema: grid part, analytic tail part, effective value (max).
    // +infinity encodes an unbounded ratio.
    double c_tilde_grid = 0.0;
    double c_tilde_tail = 0.0;
    double c_tilde = 0.0;
    double d_tilde_grid = 0.0;
    double d_tilde_tail = 0.0;
    double d_tilde = 0.0;

    ConditionFlags conditions;

    double c1 = 0.0;  // NaN when condition (ii) fails and no override is given
    bool c1_overridden = false;
    bool requires_nonneg_lambda = false;  // c1 > 0 restricts the spectral window

    double lambda_min_S = 0.0;
    double lambda_min_S_error = 0.0;  // certified bound on |estimate - true|
    double lambda_min_B = 0.0;
    double lambda_min_B_error = 0.0;
    double c2 = 0.0;

    bool euler_analytic = true;
    bool pass = false;  // conditions i-iii, S > 0, and c1 valid
    std::string message;
};

// Constants part of the report: ratio suprema with the 0/0 = 0 convention and
// the three pointwise condition flags. Eigenvalue fields are left untouched.
HypothesisReport check_conditions(const PotentialSpec& pot, const Grid& grid,
                                  double h_fd = 1e-4);

// Midpoint of (c_tilde, 2); NaN marker when condition (ii) failed.
double select_c1(const HypothesisReport& report);

// c2 = max(0, -(lambda_min(B) - certified_error)), so [iH,A] >= -c2 holds for
// the computed estimate even at the edge of its certificate.
double c2_bound(const OperatorSet& ops, double* lambda_min_out = nullptr,
                double* error_out = nullptr);

struct FormInequalityResult {
    bool valid = false;  // false when S is not positive: inequalities vacuous
    std::string message;
    double d_B = 0.0;   // sup |<f,Bf>| / <f,Sf> over samples
    double d_CB = 0.0;  // same for the second dilation commutator of H
    double d_SB = 0.0;  // same for the dilation commutator of S
    double d_emp = 0.0;
    double cap = 0.0;
    bool within_cap = false;
    int samples = 0;
};

// Empirical constants for the six sandwich inequalities -dS <= T <= dS with
// T in {B, [iB,A], [iS,A]}, over seeded random vectors.
FormInequalityResult quadratic_form_inequalities(const OperatorSet& ops,
                                                 const HypothesisReport& report,
                                                 int samples = 128, double cap = 50.0,
                                                 unsigned long long seed = 0x9e3779b97f4a7c15ull);

struct HypothesisOptions {
    double c1_override = std::numeric_limits<double>::quiet_NaN();
    double eig_rel_tol = 1e-9;
    double h_fd = 1e-4;
};

// Full pipeline: conditions, c1 selection, operator assembly, lambda_min(S),
// c2. Skips the eigenvalue stage when no valid c1 exists.
HypothesisReport full_hypothesis_report(const PotentialSpec& pot, const Grid& grid,
                                        const HypothesisOptions& opts = {});

// Fixed key names: c_tilde, d_tilde, c1, lambda_min_S, c2,
// conditions: {i, ii, iii, S_positive}. Non-finite values serialize as null.
nlohmann::json to_json(const HypothesisReport& report);

}  // namespace laplab
