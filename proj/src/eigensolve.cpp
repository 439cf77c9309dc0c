#include "laplab/eigensolve.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace laplab {

namespace {

Vec random_unit(std::int64_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec v(n);
    for (std::int64_t i = 0; i < n; ++i) v[i] = gauss(rng);
    v.normalize();
    return v;
}

double gershgorin_lower(const SpMat& M) {
    double lo = std::numeric_limits<double>::infinity();
    for (int k = 0; k < M.outerSize(); ++k) {
        double diag = 0.0, off = 0.0;
        for (SpMat::InnerIterator it(M, k); it; ++it) {
            if (it.row() == it.col())
                diag = it.value();
            else
                off += std::abs(it.value());
        }
        lo = std::min(lo, diag - off);
    }
    return lo;
}

struct ShiftedFactor {
    Eigen::SimplicialLDLT<SpMat> ldlt;
    bool positive = false;
    bool ok = false;
};

void factor_shifted(const SpMat& M, double sigma, ShiftedFactor& f) {
    SpMat A = M;
    for (std::int64_t i = 0; i < A.rows(); ++i) A.coeffRef(i, i) -= sigma;
    A.makeCompressed();
    f.ldlt.compute(A);
    f.ok = f.ldlt.info() == Eigen::Success;
    if (!f.ok) return;
    const auto& D = f.ldlt.vectorD();
    f.positive = true;
    for (std::int64_t i = 0; i < D.size(); ++i)
        if (!(D[i] > 0.0) || !std::isfinite(D[i])) {
            f.positive = false;
            break;
        }
}

}  // namespace

double sym_norm_estimate(const SpMat& M, unsigned seed, int max_iters, double rel_change_tol) {
    if (M.rows() == 0) return 0.0;
    Vec v = random_unit(M.rows(), seed);
    double last = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Vec w = M * v;
        const double nw = w.norm();
        if (!(nw > 0.0)) return 0.0;
        const double rayleigh = std::abs(v.dot(w));
        v = w / nw;
        if (it > 4 && std::abs(rayleigh - last) <= rel_change_tol * std::max(rayleigh, 1e-300))
            return rayleigh;
        last = rayleigh;
    }
    return last;
}

EigResult min_eig_sym(const SpMat& M, double rel_tol, unsigned seed, int max_restarts,
                      int lanczos_steps) {
    EigResult res;
    const std::int64_t n = M.rows();
    if (n == 0) {
        res.message = "empty matrix";
        return res;
    }
    if (n == 1) {
        res.converged = true;
        res.value = M.coeff(0, 0);
        res.vector = Vec::Ones(1);
        return res;
    }

    const double norm_est = std::max(sym_norm_estimate(M, seed ^ 0x9e3779b9u), 1e-300);
    const double target = rel_tol * norm_est;

    const double glb = gershgorin_lower(M);
    double sigma = glb - std::max(1e-8 * norm_est, 1e-12);
    double backoff = std::max(1e-3 * norm_est, 1e-10);

    ShiftedFactor fac;
    const int m = static_cast<int>(std::min<std::int64_t>(lanczos_steps, n));
    Vec warm_start;

    for (int restart = 0; restart < max_restarts; ++restart) {
        res.restarts = restart;

        // keep the shift strictly below the spectrum so LDLT stays positive
        int guard = 0;
        for (;;) {
            factor_shifted(M, sigma, fac);
            if (fac.ok && fac.positive) break;
            sigma -= backoff;
            backoff *= 4.0;
            if (++guard > 60) {
                res.message = "shift backoff failed (factorization never positive)";
                return res;
            }
        }

        // Lanczos for the largest eigenvalue of (M - sigma I)^{-1};
        // restarts reuse the previous Ritz vector
        std::vector<Vec> basis;
        basis.reserve(m);
        std::vector<double> alpha, beta;
        basis.push_back(warm_start.size() == n ? warm_start : random_unit(n, seed + 17u * restart));
        for (int j = 0; j < m; ++j) {
            Vec w = fac.ldlt.solve(basis[j]);
            if (!w.allFinite()) {
                res.message = "shift-invert solve produced non-finite values";
                return res;
            }
            const double a = basis[j].dot(w);
            alpha.push_back(a);
            res.iterations++;
            if (static_cast<int>(alpha.size()) == m) break;
            // full reorthogonalization, twice
            for (int pass = 0; pass < 2; ++pass)
                for (const Vec& b : basis) w -= b.dot(w) * b;
            const double b = w.norm();
            if (b <= 1e-14 * std::max(std::abs(a), 1e-300)) break;  // invariant subspace
            beta.push_back(b);
            basis.push_back(w / b);
        }

        const int k = static_cast<int>(alpha.size());
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
        for (int i = 0; i < k; ++i) {
            T(i, i) = alpha[i];
            if (i + 1 < k && i < static_cast<int>(beta.size())) {
                T(i, i + 1) = beta[i];
                T(i + 1, i) = beta[i];
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        if (es.info() != Eigen::Success) {
            res.message = "tridiagonal eigensolve failed";
            return res;
        }
        const int top = k - 1;  // largest theta -> eigenvalue closest above sigma
        const double theta = es.eigenvalues()[top];
        if (!(theta > 0.0)) {
            res.message = "shift-invert spectrum not positive (shift above spectrum?)";
            return res;
        }
        Vec v = Vec::Zero(n);
        for (int i = 0; i < k && i < static_cast<int>(basis.size()); ++i)
            v += es.eigenvectors()(i, top) * basis[i];
        v.normalize();
        const double lambda = sigma + 1.0 / theta;
        const double resid = (M * v - lambda * v).norm();

        double lambda2 = std::numeric_limits<double>::infinity();
        if (k >= 2) {
            const double theta2 = es.eigenvalues()[top - 1];
            if (theta2 > 0.0) lambda2 = sigma + 1.0 / theta2;
        }

        res.value = lambda;
        res.vector = v;
        res.residual = resid;
        res.next_value = lambda2;
        // Kato-Temple with a halved Ritz gap (Ritz values overestimate the
        // true gap, so keep a safety margin)
        const double gap = 0.5 * (lambda2 - lambda);
        res.certified_error =
            (std::isfinite(gap) && gap > resid) ? std::min(resid, resid * resid / gap) : resid;

        if (resid <= target) {
            res.converged = true;
            return res;
        }

        // re-shift just below the current estimate and try again
        warm_start = v;
        double step = std::max(4.0 * resid, 1e-3 * std::max(std::abs(lambda), norm_est * 1e-12));
        if (std::isfinite(gap) && gap > 0.0) step = std::min(step, 0.25 * gap);
        sigma = lambda - std::max(step, 4.0 * resid);
        backoff = std::max(step, 1e-10);
    }

    res.message = "no convergence after restarts (residual " + std::to_string(res.residual) +
                  ", target " + std::to_string(target) + ")";
    return res;
}

bool is_tridiagonal(const SpMat& M) {
    for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it)
            if (std::abs(it.row() - it.col()) > 1 && it.value() != 0.0) return false;
    return true;
}

std::int64_t count_eigenvalues_below(const SpMat& M, double sigma) {
    const std::int64_t n = M.rows();
    if (is_tridiagonal(M)) {
        // guarded Sturm sequence on the tridiagonal part
        std::vector<double> diag(n, 0.0), off(std::max<std::int64_t>(n - 1, 0), 0.0);
        for (int k = 0; k < M.outerSize(); ++k)
            for (SpMat::InnerIterator it(M, k); it; ++it) {
                if (it.row() == it.col())
                    diag[it.row()] = it.value();
                else if (it.row() == it.col() + 1)
                    off[it.col()] = it.value();
            }
        double scale = 0.0;
        for (double d : diag) scale = std::max(scale, std::abs(d));
        for (double o : off) scale = std::max(scale, std::abs(o));
        const double tiny = std::max(scale, 1.0) * 1e-300;
        std::int64_t count = 0;
        double d = diag[0] - sigma;
        if (d == 0.0) d = -tiny;
        if (d < 0.0) ++count;
        for (std::int64_t i = 1; i < n; ++i) {
            d = (diag[i] - sigma) - off[i - 1] * off[i - 1] / d;
            if (d == 0.0) d = -tiny;
            if (d < 0.0) ++count;
        }
        return count;
    }
    SpMat A = M;
    for (std::int64_t i = 0; i < n; ++i) A.coeffRef(i, i) -= sigma;
    A.makeCompressed();
    Eigen::SimplicialLDLT<SpMat> ldlt(A);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("count_eigenvalues_below: LDLT factorization failed");
    const auto& D = ldlt.vectorD();
    std::int64_t count = 0;
    for (std::int64_t i = 0; i < D.size(); ++i) {
        if (!std::isfinite(D[i]))
            throw std::runtime_error("count_eigenvalues_below: non-finite pivot");
        if (D[i] < 0.0) ++count;
    }
    return count;
}

double mean_level_spacing(const SpMat& M, double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("mean_level_spacing: empty window");
    const std::int64_t count = count_eigenvalues_below(M, hi) - count_eigenvalues_below(M, lo);
    if (count < 2) return hi - lo;
    return (hi - lo) / static_cast<double>(count);
}

}  // namespace laplab
