#include "laplab/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace laplab {

std::int64_t Grid::size() const {
    std::int64_t n = 1;
    for (int d = 0; d < dims; ++d) n *= points_per_axis;
    return n;
}

void Grid::decode(std::int64_t flat, int* idx) const {
    for (int d = 0; d < dims; ++d) {
        idx[d] = static_cast<int>(flat % points_per_axis);
        flat /= points_per_axis;
    }
}

std::int64_t Grid::encode(const int* idx) const {
    std::int64_t flat = 0;
    for (int d = dims - 1; d >= 0; --d) flat = flat * points_per_axis + idx[d];
    return flat;
}

double Grid::coordinate(std::int64_t flat, int axis) const {
    for (int d = 0; d < axis; ++d) flat /= points_per_axis;
    return axis_coords[static_cast<int>(flat % points_per_axis)];
}

void Grid::point(std::int64_t flat, double* x) const {
    for (int d = 0; d < dims; ++d) {
        x[d] = axis_coords[static_cast<int>(flat % points_per_axis)];
        flat /= points_per_axis;
    }
}

double Grid::radius2(std::int64_t flat) const {
    double r2 = 0.0;
    for (int d = 0; d < dims; ++d) {
        double c = axis_coords[static_cast<int>(flat % points_per_axis)];
        r2 += c * c;
        flat /= points_per_axis;
    }
    return r2;
}

Grid build_grid(int dims, double half_extent, int points_per_axis, std::int64_t unknown_cap) {
    if (dims < 1 || dims > 3)
        throw std::invalid_argument("build_grid: dims must be 1, 2 or 3");
    if (!(half_extent > 0.0) || !std::isfinite(half_extent))
        throw std::invalid_argument("build_grid: half_extent must be positive and finite");
    if (points_per_axis < 3)
        throw std::invalid_argument("build_grid: need at least 3 points per axis");
    if (points_per_axis % 2 == 0)
        throw std::invalid_argument("build_grid: points_per_axis must be odd (origin must be a node)");

    std::int64_t total = 1;
    for (int d = 0; d < dims; ++d) {
        total *= points_per_axis;
        if (total > unknown_cap)
            throw std::invalid_argument("build_grid: " + std::to_string(points_per_axis) + "^" +
                                        std::to_string(dims) + " unknowns exceed cap " +
                                        std::to_string(unknown_cap));
    }

    Grid g;
    g.dims = dims;
    g.half_extent = half_extent;
    g.points_per_axis = points_per_axis;
    g.spacing = 2.0 * half_extent / (points_per_axis - 1);
    g.axis_coords.resize(points_per_axis);
    const int c = g.center_index();
    for (int i = 0; i < points_per_axis; ++i)
        g.axis_coords[i] = (i - c) * g.spacing;  // exact 0 at center, exact sign symmetry
    return g;
}

}  // namespace laplab
