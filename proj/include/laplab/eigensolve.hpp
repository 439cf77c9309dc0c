#pragma once

#include <Eigen/SparseCore>
#include <string>

namespace laplab {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

struct EigResult {
    bool converged = false;
    double value = 0.0;
    Vec vector;
    double residual = 0.0;            // ||M v - value v||_2
    double certified_error = 0.0;     // min(residual, Kato-Temple bound from the Ritz gap)
    double next_value = 0.0;          // second Ritz value (gap estimate)
    int iterations = 0;
    int restarts = 0;
    std::string message;
};

// Smallest eigenvalue of a sparse symmetric matrix via restarted shift-invert
// Lanczos with full reorthogonalization. Deterministic for a fixed seed.
// Contract: residual <= rel_tol * ||M||_est on success; explicit failure
// status otherwise (never a silent wrong answer).
EigResult min_eig_sym(const SpMat& M, double rel_tol = 1e-9,
                      unsigned seed = 0x1a9ce1abu, int max_restarts = 12,
                      int lanczos_steps = 48);

// Largest-magnitude eigenvalue estimate (power iteration, symmetric matrices).
double sym_norm_estimate(const SpMat& M, unsigned seed = 0x1a9ce1abu,
                         int max_iters = 400, double rel_change_tol = 1e-10);

// Number of eigenvalues strictly below sigma. Tridiagonal matrices use a
// Sturm-sequence count; otherwise LDLT inertia. Throws std::runtime_error on
// factorization breakdown.
std::int64_t count_eigenvalues_below(const SpMat& M, double sigma);

bool is_tridiagonal(const SpMat& M);

// Mean level spacing of M inside [lo, hi] from eigenvalue counts; falls back
// to the window width when the window holds fewer than two levels.
double mean_level_spacing(const SpMat& M, double lo, double hi);

}  // namespace laplab
