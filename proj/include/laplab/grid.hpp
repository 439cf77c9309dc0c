#pragma once

#include <cstdint>
#include <vector>

namespace laplab {

inline constexpr std::int64_t kDefaultUnknownCap = 250000;

// Uniform Cartesian grid on [-R, R]^dims with the origin at a node.
// All N^dims points are unknowns; values one step outside the box are
// implicitly zero (Dirichlet truncation).
struct Grid {
    int dims = 1;
    double half_extent = 0.0;
    int points_per_axis = 0;
    double spacing = 0.0;
    std::vector<double> axis_coords;  // exact sign-symmetric, axis_coords[center] == 0

    std::int64_t size() const;
    int center_index() const { return (points_per_axis - 1) / 2; }

    // flat index <-> per-axis indices, axis 0 fastest
    void decode(std::int64_t flat, int* idx) const;
    std::int64_t encode(const int* idx) const;
    double coordinate(std::int64_t flat, int axis) const;
    void point(std::int64_t flat, double* x) const;
    double radius2(std::int64_t flat) const;
};

// Throws std::invalid_argument for dims outside {1,2,3}, non-positive extent,
// even or too-small N, or N^dims above the unknown cap.
Grid build_grid(int dims, double half_extent, int points_per_axis,
                std::int64_t unknown_cap = kDefaultUnknownCap);

}  // namespace laplab
