#pragma once

#include <Eigen/SparseCore>
#include <functional>
#include <iosfwd>
#include <string>

#include "laplab/grid.hpp"
#include "laplab/potentials.hpp"

namespace laplab {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

// Grid realizations of the operators used throughout:
//   laplacian  = -Delta_h           (second-order (2n+1)-point stencil)
//   H          = -Delta_h + diag(V)
//   K          = real antisymmetric part of the dilation generator, A = iK
//   B          = 2(-Delta_h) - diag(euler1)          (first commutator)
//   S          = -c1 H + B                           (positive combination)
struct OperatorSet {
    Grid grid;
    double c1 = 0.0;
    Vec potential_diag;
    Vec weight_diag;  // profile behind the weighted norms; equals potential_diag
                      // unless the family supplies a negative proxy
    Vec euler1_diag;
    Vec euler2_diag;
    SpMat laplacian;
    SpMat H;
    SpMat K;
    SpMat B;
    SpMat S;
};

SpMat assemble_laplacian(const Grid& grid);

// K = -1/2 sum_j (X_j D_j + D_j X_j) with D_j the central difference along
// axis j; antisymmetric by construction, so iK is Hermitian.
SpMat assemble_dilation(const Grid& grid);

Vec evaluate_on_grid(const Grid& grid,
                     const std::function<double(const double*, int)>& f);

OperatorSet assemble_operators(const Grid& grid, const PotentialSpec& pot, double c1);

// Analytic grid realization of the second commutator 4(-Delta_h) + diag(euler2).
SpMat second_commutator(const OperatorSet& ops);

// -c1 B + second_commutator
SpMat dilation_commutator_of_S(const OperatorSet& ops);

// Exact matrix commutator K M - M K (equals i[M, A] for symmetric real M).
SpMat matrix_commutator_with_dilation(const SpMat& K, const SpMat& M);

struct CommutatorConsistency {
    double residual_coarse = 0.0;  // ||(K H - H K - B) f|| / ||f|| at spacing h
    double residual_fine = 0.0;    // same at spacing h/2 (same extent)
    double ratio = 0.0;            // second-order stencils give ~4
    bool boundary_contact = false; // result meaningless if the probe touches the boundary
};

CommutatorConsistency commutator_consistency(
    const Grid& coarse, const PotentialSpec& pot, double c1,
    const std::function<double(const double*, int)>& probe);

// COO text export, header "# n rows cols nnz" then "row col value" lines.
void export_coo(std::ostream& os, const SpMat& m);
SpMat import_coo(std::istream& is);
void export_coo_file(const std::string& path, const SpMat& m);

}  // namespace laplab
