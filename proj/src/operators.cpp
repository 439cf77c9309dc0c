#include "laplab/operators.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace laplab {

namespace {

using Triplet = Eigen::Triplet<double>;

// step to the neighbor along `axis`; returns -1 when outside the box
std::int64_t neighbor(const Grid& g, std::int64_t flat, int axis, int step) {
    std::int64_t stride = 1;
    for (int d = 0; d < axis; ++d) stride *= g.points_per_axis;
    const int i = static_cast<int>((flat / stride) % g.points_per_axis) + step;
    if (i < 0 || i >= g.points_per_axis) return -1;
    return flat + static_cast<std::int64_t>(step) * stride;
}

}  // namespace

SpMat assemble_laplacian(const Grid& grid) {
    const std::int64_t n = grid.size();
    const double inv_h2 = 1.0 / (grid.spacing * grid.spacing);
    std::vector<Triplet> trips;
    trips.reserve(static_cast<size_t>(n) * (2 * grid.dims + 1));
    for (std::int64_t i = 0; i < n; ++i) {
        trips.emplace_back(i, i, 2.0 * grid.dims * inv_h2);
        for (int d = 0; d < grid.dims; ++d)
            for (int s : {-1, +1}) {
                const std::int64_t j = neighbor(grid, i, d, s);
                if (j >= 0) trips.emplace_back(i, j, -inv_h2);
            }
    }
    SpMat m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

SpMat assemble_dilation(const Grid& grid) {
    const std::int64_t n = grid.size();
    const double q = 1.0 / (4.0 * grid.spacing);
    std::vector<Triplet> trips;
    trips.reserve(static_cast<size_t>(n) * 2 * grid.dims);
    for (std::int64_t i = 0; i < n; ++i) {
        for (int d = 0; d < grid.dims; ++d) {
            const std::int64_t j = neighbor(grid, i, d, +1);
            if (j < 0) continue;
            const double w = (grid.coordinate(i, d) + grid.coordinate(j, d)) * q;
            trips.emplace_back(i, j, -w);  // upper entry
            trips.emplace_back(j, i, +w);  // exact antisymmetry
        }
    }
    SpMat m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

Vec evaluate_on_grid(const Grid& grid,
                     const std::function<double(const double*, int)>& f) {
    const std::int64_t n = grid.size();
    Vec out(n);
    double x[3];
    for (std::int64_t i = 0; i < n; ++i) {
        grid.point(i, x);
        out[i] = f(x, grid.dims);
    }
    return out;
}

OperatorSet assemble_operators(const Grid& grid, const PotentialSpec& pot, double c1) {
    if (!std::isfinite(c1) || c1 < 0.0 || c1 > 2.0)
        throw std::invalid_argument("assemble_operators: c1 must be finite and in [0, 2]");
    OperatorSet ops;
    ops.grid = grid;
    ops.c1 = c1;
    ops.potential_diag = evaluate_on_grid(grid, pot.value);
    ops.weight_diag = pot.weight ? evaluate_on_grid(grid, pot.weight) : ops.potential_diag;
    ops.euler1_diag = evaluate_on_grid(grid, pot.euler1);
    ops.euler2_diag = evaluate_on_grid(grid, pot.euler2);
    ops.laplacian = assemble_laplacian(grid);
    ops.K = assemble_dilation(grid);

    SpMat Vd(grid.size(), grid.size());
    {
        std::vector<Triplet> trips;
        trips.reserve(static_cast<size_t>(grid.size()));
        for (std::int64_t i = 0; i < grid.size(); ++i)
            trips.emplace_back(i, i, ops.potential_diag[i]);
        Vd.setFromTriplets(trips.begin(), trips.end());
    }
    ops.H = ops.laplacian + Vd;

    SpMat E1(grid.size(), grid.size());
    {
        std::vector<Triplet> trips;
        trips.reserve(static_cast<size_t>(grid.size()));
        for (std::int64_t i = 0; i < grid.size(); ++i)
            trips.emplace_back(i, i, ops.euler1_diag[i]);
        E1.setFromTriplets(trips.begin(), trips.end());
    }
    ops.B = 2.0 * ops.laplacian - E1;

    // S = -c1 H + B, assembled from the analytic pieces:
    // (2 - c1)(-Delta_h) - diag(c1 V + euler1)
    ops.S = (2.0 - c1) * ops.laplacian - (c1 * Vd + E1);
    ops.H.makeCompressed();
    ops.B.makeCompressed();
    ops.S.makeCompressed();
    return ops;
}

SpMat second_commutator(const OperatorSet& ops) {
    SpMat E2(ops.grid.size(), ops.grid.size());
    std::vector<Triplet> trips;
    trips.reserve(static_cast<size_t>(ops.grid.size()));
    for (std::int64_t i = 0; i < ops.grid.size(); ++i)
        trips.emplace_back(i, i, ops.euler2_diag[i]);
    E2.setFromTriplets(trips.begin(), trips.end());
    SpMat m = 4.0 * ops.laplacian + E2;
    m.makeCompressed();
    return m;
}

SpMat dilation_commutator_of_S(const OperatorSet& ops) {
    SpMat m = -ops.c1 * ops.B + second_commutator(ops);
    m.makeCompressed();
    return m;
}

SpMat matrix_commutator_with_dilation(const SpMat& K, const SpMat& M) {
    SpMat m = SpMat(K * M) - SpMat(M * K);
    m.makeCompressed();
    return m;
}

CommutatorConsistency commutator_consistency(
    const Grid& coarse, const PotentialSpec& pot, double c1,
    const std::function<double(const double*, int)>& probe) {
    CommutatorConsistency out;

    auto residual = [&](const Grid& g) {
        OperatorSet ops = assemble_operators(g, pot, c1);
        Vec f = evaluate_on_grid(g, probe);
        const double nf = f.norm();
        if (!(nf > 0.0)) throw std::invalid_argument("commutator_consistency: zero probe");
        Vec r = ops.K * (ops.H * f) - ops.H * (ops.K * f) - ops.B * f;
        return r.norm() / nf;
    };

    // boundary contact check on the coarse grid: any probe mass within 10h of the wall
    {
        Vec f = evaluate_on_grid(coarse, probe);
        const double peak = f.cwiseAbs().maxCoeff();
        const double band = coarse.half_extent - 10.0 * coarse.spacing;
        double edge = 0.0;
        for (std::int64_t i = 0; i < coarse.size(); ++i) {
            bool near = false;
            for (int d = 0; d < coarse.dims; ++d)
                if (std::abs(coarse.coordinate(i, d)) > band) near = true;
            if (near) edge = std::max(edge, std::abs(f[i]));
        }
        out.boundary_contact = peak <= 0.0 || edge > 1e-12 * peak;
    }

    Grid fine = build_grid(coarse.dims, coarse.half_extent, 2 * coarse.points_per_axis - 1);
    out.residual_coarse = residual(coarse);
    out.residual_fine = residual(fine);
    out.ratio = out.residual_coarse / out.residual_fine;
    return out;
}

void export_coo(std::ostream& os, const SpMat& m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "# %ld %ld %ld %ld\n", static_cast<long>(m.rows()),
                  static_cast<long>(m.rows()), static_cast<long>(m.cols()),
                  static_cast<long>(m.nonZeros()));
    os << buf;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) {
            std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(it.row()),
                          static_cast<long>(it.col()), it.value());
            os << buf;
        }
}

SpMat import_coo(std::istream& is) {
    char hash;
    long n = 0, rows = 0, cols = 0, nnz = 0;
    is >> hash >> n >> rows >> cols >> nnz;
    if (hash != '#' || rows <= 0 || cols <= 0 || nnz < 0)
        throw std::runtime_error("import_coo: malformed header");
    std::vector<Triplet> trips;
    trips.reserve(static_cast<size_t>(nnz));
    for (long k = 0; k < nnz; ++k) {
        long r = 0, c = 0;
        double v = 0.0;
        if (!(is >> r >> c >> v)) throw std::runtime_error("import_coo: truncated data");
        trips.emplace_back(r, c, v);
    }
    SpMat m(rows, cols);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

void export_coo_file(const std::string& path, const SpMat& m) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("export_coo_file: cannot open " + path);
    export_coo(os, m);
}

}  // namespace laplab
