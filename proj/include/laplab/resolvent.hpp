#pragma once

#include <complex>
#include <memory>
#include <vector>

#include <Eigen/SparseLU>

#include "laplab/normspace.hpp"
#include "laplab/operators.hpp"

namespace laplab {

using CVec = Eigen::VectorXcd;
using CSpMat = Eigen::SparseMatrix<std::complex<double>>;

enum class Branch { plus, minus };

// One complex factorization of T+ = H - (lambda + i mu) I - i eps B serves
// both branches: T- is the entrywise conjugate of T+ (H, B real), so
// G- w = conj(G+ conj(w)).
class ShiftedSolver {
  public:
    ShiftedSolver(const OperatorSet& ops, double lambda, double mu, double epsilon);

    // Refined until an internal extended-precision iterate carries a relative
    // residual <= 1e-10; returns that iterate rounded to double.
    CVec solve(Branch branch, const CVec& f) const;
    CVec apply(Branch branch, const CVec& g) const;  // T^branch g

    double lambda() const { return lambda_; }
    double mu() const { return mu_; }
    double epsilon() const { return epsilon_; }

  private:
    double lambda_, mu_, epsilon_;
    CSpMat T_plus_;
    Eigen::SparseLU<CSpMat> lu_;
    double norm1_;  // ||T||_1, for the failure diagnostic
};

CVec shifted_solve(const OperatorSet& ops, double lambda, double mu, double epsilon,
                   Branch branch, const CVec& f);

// eps0 = 1 / (1.05 * power-iteration estimate of ||B||).
double eps0_bound(const OperatorSet& ops);

struct FormIdentityCheck {
    double identity_residual = 0.0;  // relative; exact linear algebra, ~1e-16
    double lhs = 0.0;                // -c1 Re<f,Tf> -/+ (1/eps) Im<f,Tf>
    double s_form = 0.0;             // <f, S f>
    double norm2 = 0.0;              // ||f||^2
    double positivity_margin = 0.0;  // lhs - s_form
    bool margin_applicable = false;  // c1 * lambda >= 0
};

// Verifies -c1 Re<f,Tf> -/+ (1/eps) Im<f,Tf> = <f,Sf> + (c1 lambda + mu/eps)||f||^2
// by actual matrix-vector products.
FormIdentityCheck check_form_identity(const OperatorSet& ops, const CVec& f, double lambda,
                                      double mu, double epsilon, Branch branch);

struct TracePoint {
    double epsilon = 0.0;
    std::complex<double> F_plus{}, F_minus{};
    double s_star_fprime = 0.0;  // ||f'_eps||_{S*}
    double s_star_Af = 0.0;      // ||A f_eps||_{S*}
    double envelope_slack_plus = 0.0;   // sqrt((1+c1 eps)/eps)|F|^{1/2} - ||G f_eps||_S
    double envelope_slack_minus = 0.0;
    double dual_bound_C_plus = 0.0;  // eps * max_j ||G w_j||_S / ||w_j||_{S*}
    double dual_bound_C_minus = 0.0;
    double deriv_plus = 0.0, deriv_minus = 0.0;  // |dF/deps|, centered; ends: 0
    double deriv_envelope_plus = 0.0, deriv_envelope_minus = 0.0;
    bool deriv_defined = false;
};

struct RegularizedTrace {
    std::vector<TracePoint> points;  // strictly decreasing epsilon
    double eps0 = 0.0, eps1 = 0.0;
    double lambda = 0.0, mu = 0.0;
    double d_CB_emp = 0.0;  // ||[iB,A]||_{S->S*}, S-weighted power iteration
    std::complex<double> F0_plus{}, F0_minus{};  // Richardson, last 4 points
    std::complex<double> F_direct_plus{};        // eps = 0 solve with the raw f
    double gronwall_ratio = 0.0;  // |F0_plus| / (|F(first point)| + normalization^2)
    double smoothing_integral_ratio = 0.0;  // 1-homogeneous smoothing diagnostic
    bool im_sign_ok = true;  // Im F+ >= 0 and Im F- <= 0 at every point
};

std::vector<double> default_schedule(double eps1, int points = 12);

RegularizedTrace regularized_trace(const OperatorSet& ops, const NormContext& ctx, const Vec& f,
                                   double lambda, double mu, const std::vector<double>& schedule,
                                   int quad_substeps = 16, int sample_vectors = 6,
                                   unsigned long long seed = 0xb07de511ull);

struct EpsWindowReport {
    double eps0 = 0.0, eps1 = 0.0, eps2 = 0.0;
    std::vector<double> eps_values;  // decreasing, inside (0, eps2]
    std::vector<double> diff_norms;  // ||G_eps f - G_0 f||
    double slope = 0.0, slope_stderr = 0.0;
    bool slope_ok = false;                 // in [0.9, 1.1]
    double worst_contraction_ratio = 0.0;  // ||(H-lambda -/+ i mu/2) G_eps g|| / ||g||
    bool contraction_ok = false;           // <= 1 + 1e-12 over all samples
};

EpsWindowReport eps_window_convergence(const OperatorSet& ops, double c2, const Vec& f,
                                       double lambda, double mu, int points = 8, int samples = 4,
                                       unsigned long long seed = 0xc0ffee11ull);

struct ExponentFit {
    double slope = 0.0;
    double stderr_ = 0.0;
    int points = 0;
};

// Least-squares slope of log(values) against log(mu_values); >= 4 positive points.
ExponentFit fit_exponent(const std::vector<double>& mu_values,
                         const std::vector<double>& values);

// ||[iB,A]||_{S->S*} via power iteration on S^{-1}[iB,A] in the S inner product.
double commutator_s_norm(const OperatorSet& ops, const NormContext& ctx, int iters = 60,
                         unsigned long long seed = 0xd11a7e5ull);

}  // namespace laplab
