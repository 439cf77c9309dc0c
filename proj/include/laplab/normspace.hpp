#pragma once

#include <memory>
#include <string>

#include <Eigen/SparseCholesky>

#include "laplab/hypotheses.hpp"
#include "laplab/operators.hpp"

namespace laplab {

// Weighted-norm context over an assembled operator set: cached factorization
// of S plus the per-gridpoint weight fields, built from the operator set's
// weight profile (the potential itself unless the family substitutes a proxy).
//
//   M(x)      = min{-V(x), 1/|x|^2}, with M(0) = -V(0)
//   Lambda(x) = max{1, |x| sqrt(-V(x))}
//   L_max(x)  = M^{1/4+delta} (-V)^{1/4-delta}
//
// The weight fields require the profile < 0 at every grid point; s_norm /
// s_star_norm only require S > 0 and stay available for the V == 0 case.
// A failed S factorization (possible on forced runs where S is indefinite)
// is deferred: only the S-solve paths throw.
struct NormContext {
    Grid grid;
    double c1 = 0.0;
    double c_tilde = 0.0;
    double delta = 0.05;
    double dt_max = 0.0;  // Cayley step bound, grid-dependent

    SpMat S;
    std::unique_ptr<Eigen::SimplicialLDLT<SpMat>> S_fact;
    bool s_fact_ok = false;
    double s_scale = 0.0;  // cheap norm estimate used in error checks

    Vec V_diag;
    Vec M_diag;
    Vec Lambda_diag;
    Vec L_max_diag;
    Vec surrogate_weight;  // Lambda^{1/2+2delta} (-V)^{-1/2}
    bool weights_available = false;
};

// delta in (0, 1/4); dt_max <= 0 picks the default 2e-4 * spacing.
NormContext make_norm_context(const OperatorSet& ops, const HypothesisReport& report,
                              double delta = 0.05, double dt_max = 0.0);

double s_norm(const NormContext& ctx, const Vec& f);
double s_star_norm(const NormContext& ctx, const Vec& g);

// S^{-1} g with iterative refinement to 1e-12 relative residual.
Vec solve_S(const NormContext& ctx, const Vec& g);

// ||M^{-1/2} f|| and ||(-V)^{-1/2} f||; the first dominates the second.
double m_norm(const NormContext& ctx, const Vec& f);
double n_norm(const NormContext& ctx, const Vec& f);

double e_surrogate_norm(const NormContext& ctx, const Vec& f);

// Maximal admissible multiplication weight; a user weight L is admissible iff
// |L| <= c * L_max pointwise for finite c.
Vec smoothness_weight(const NormContext& ctx);

struct DominatedBoundReport {
    int samples = 0;
    double worst_margin = 0.0;      // min over samples of RHS - LHS, >= 0 expected
    double worst_rel_margin = 0.0;  // worst margin / RHS
    bool pass = false;
    Vec offending;  // populated only on violation
    std::string message;
};

// Checks <f, S^{-1} f> <= (c1 - c_tilde)^{-1} <f, (-V)^{-1} f> on random
// vectors supported in the inner half-box.
DominatedBoundReport dominated_bound_check(const NormContext& ctx, int samples = 100,
                                           unsigned long long seed = 0x5eedba1101ull);

// Cayley propagation of the dilation group: n uniform steps of
// f <- (I + (tau/2) K)^{-1} (I - (tau/2) K) f with tau = t/n and
// n = max(steps, ceil(|t|/dt_max)). Exactly l2-unitary per step.
Vec dilation_flow(const NormContext& ctx, const OperatorSet& ops, const Vec& f, double t,
                  int steps = 0);

}  // namespace laplab
