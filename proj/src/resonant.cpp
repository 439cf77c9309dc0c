#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/SparseLU>

#include "laplab/eigensolve.hpp"
#include "laplab/operators.hpp"
#include "laplab/potentials.hpp"
#include "laplab/rng.hpp"

namespace laplab {

namespace {

// C-infinity bump, psi(0) = 1, support |t| < 1
double bump(double t) {
    const double t2 = t * t;
    if (t2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - t2));
}

double bump_d1(double t) {  // psi'
    const double t2 = t * t;
    if (t2 >= 1.0) return 0.0;
    const double q = 1.0 / (1.0 - t2);
    return -2.0 * t * q * q * bump(t);
}

double bump_d2(double t) {  // psi''
    const double t2 = t * t;
    if (t2 >= 1.0) return 0.0;
    const double q = 1.0 / (1.0 - t2);
    return (-2.0 * q * q - 8.0 * t2 * q * q * q + 4.0 * t2 * q * q * q * q) * bump(t);
}

// E = x.grad acting on psi(t(r)) with t = (r - shift)/scale and s = r/scale:
// E psi = s psi'(t), E^2 psi = s psi'(t) + s^2 psi''(t)
double radial_euler1(double t, double s) { return s * bump_d1(t); }
double radial_euler2(double t, double s) { return s * (bump_d1(t) + s * bump_d2(t)); }

double radius(const double* x, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x[i] * x[i];
    return std::sqrt(s);
}

// base well + interior lift + positive ring:
//   V = V_base + lift psi(r/a) + height psi((r - c)/width), a = 1.5 w, c = 3 w
PotentialSpec with_crater(const PotentialSpec& base, double lift, double height,
                          double width) {
    const double a = 1.5 * width, c = 3.0 * width;
    PotentialSpec p = base;
    auto v = base.value, e1 = base.euler1, e2 = base.euler2;
    auto gr = base.gradient;
    p.value = [v, lift, height, a, c, width](const double* x, int n) {
        const double r = radius(x, n);
        return v(x, n) + lift * bump(r / a) + height * bump((r - c) / width);
    };
    p.gradient = [gr, lift, height, a, c, width](const double* x, int n, double* out) {
        gr(x, n, out);
        const double r = radius(x, n);
        if (r <= 0.0) return;
        // d/dr psi(t(r)) = psi'(t)/scale, radial direction x/r
        double coeff = 0.0;
        if (r < a) coeff += lift * bump_d1(r / a) / (a * r);
        const double tr = (r - c) / width;
        if (std::abs(tr) < 1.0) coeff += height * bump_d1(tr) / (width * r);
        for (int i = 0; i < n; ++i) out[i] += coeff * x[i];
    };
    p.euler1 = [e1, lift, height, a, c, width](const double* x, int n) {
        const double r = radius(x, n);
        return e1(x, n) + lift * radial_euler1(r / a, r / a) +
               height * radial_euler1((r - c) / width, r / width);
    };
    p.euler2 = [e2, lift, height, a, c, width](const double* x, int n) {
        const double r = radius(x, n);
        return e2(x, n) + lift * radial_euler2(r / a, r / a) +
               height * radial_euler2((r - c) / width, r / width);
    };
    // the base profile keeps the weighted norms defined (and comparable across
    // the family) where the ring pushes V above zero
    p.weight = v;
    p.classification = PotentialClass::resonant;
    p.strictly_negative = false;
    // lift and ring are compactly supported, tail ratios are the base family's
    return p;
}

}  // namespace

PotentialSpec resonant_well(double strength, double exponent, double bump_height,
                            double bump_width, const Grid& grid, ResonantCalibration* info) {
    if (!(bump_height > 0.0))
        throw std::invalid_argument("resonant_well: bump_height must be positive");
    if (!(bump_width > 0.0) || 4.0 * bump_width >= grid.half_extent)
        throw std::invalid_argument(
            "resonant_well: the ring (outer radius 4*width) must fit inside the box");

    const PotentialSpec base = inverse_power(strength, exponent);
    const double a = 1.5 * bump_width, c = 3.0 * bump_width;
    const std::int64_t n = grid.size();

    const SpMat lap = assemble_laplacian(grid);
    const Vec base_diag = evaluate_on_grid(grid, base.value);
    Vec lift_diag(n), ring_diag(n), r2_diag(n);
    for (std::int64_t i = 0; i < n; ++i) {
        const double r2 = grid.radius2(i);
        const double r = std::sqrt(r2);
        r2_diag[i] = r2;
        lift_diag[i] = bump(r / a);
        ring_diag[i] = bump_height * bump((r - c) / bump_width);
    }

    auto hamiltonian = [&](double lift) {
        SpMat H = lap;
        for (std::int64_t i = 0; i < n; ++i)
            H.coeffRef(i, i) += base_diag[i] + lift * lift_diag[i] + ring_diag[i];
        H.makeCompressed();
        return H;
    };
    auto count_below = [&](double lift, double s) {
        return count_eigenvalues_below(hamiltonian(lift), s);
    };

    // calibration window from the local level spacing of the unlifted crater
    const double spacing = mean_level_spacing(hamiltonian(0.0), -0.25, 0.25);
    const double window = spacing / 10.0;
    const double target = -0.5 * window;  // inside the window, clear of both edges

    // probe Gaussians matching the sweep's test vectors, and the base-well
    // weight that normalizes them there
    std::vector<Vec> probes;
    for (const double center : {0.0, grid.half_extent / 4.0}) {
        for (const double sigma : {1.0, 2.0}) {
            Vec f(n);
            std::vector<double> x(static_cast<std::size_t>(grid.dims));
            for (std::int64_t i = 0; i < n; ++i) {
                grid.point(i, x.data());
                double d2 = (x[0] - center) * (x[0] - center);
                for (int d = 1; d < grid.dims; ++d)
                    d2 += x[static_cast<std::size_t>(d)] * x[static_cast<std::size_t>(d)];
                f[i] = std::exp(-d2 / (2.0 * sigma * sigma));
            }
            probes.push_back(f / f.norm());
        }
    }
    Vec weight2(n);
    for (std::int64_t i = 0; i < n; ++i) {
        const double neg_v = -base_diag[i];
        const double lam = std::max(1.0, std::sqrt(r2_diag[i] * neg_v));
        const double w = std::pow(lam, 0.6) / std::sqrt(neg_v);
        weight2[i] = w * w;
    }
    auto coupling = [&](const Vec& u, double* mass_out) {
        double mass = 0.0;
        for (std::int64_t i = 0; i < n; ++i)
            if (r2_diag[i] < c * c) mass += u[i] * u[i];
        if (mass_out) *mass_out = mass;
        double best = 0.0;
        for (const Vec& f : probes) {
            const double ip = f.dot(u);
            best = std::max(best, ip * ip / (f.array().square() * weight2.array()).sum());
        }
        return best;
    };

    // the lift is nonnegative, so every eigenvalue is nondecreasing in its
    // amplitude and the count below the target line can only step down; walk
    // the successive crossings until one couples to the probes
    constexpr double kLiftMax = 3.0;
    constexpr int kMaxCrossings = 8;
    std::int64_t n_cur = count_below(0.0, target);
    double lift_lo = 0.0;
    int total_steps = 0;
    for (int k = 0; k < kMaxCrossings; ++k) {
        double prev = lift_lo, hi = lift_lo;
        bool found = false;
        while (hi < kLiftMax && !found) {
            prev = hi;
            hi = std::min(hi + 0.02, kLiftMax);
            if (count_below(hi, target) < n_cur) found = true;
        }
        if (!found)
            throw std::runtime_error(
                k == 0 ? "resonant_well: no level crossing for lift amplitudes in (0, 3]"
                       : "resonant_well: crossings exhausted before one coupled to the probes");
        double lo = prev;
        for (int it = 0; it < 50; ++it, ++total_steps) {
            const double mid = 0.5 * (lo + hi);
            if (count_below(mid, target) < n_cur)
                hi = mid;
            else
                lo = mid;
        }
        const double lift = lo;  // crossing level still marginally below the target line

        // pinned state by inverse iteration: the crossing level hugs the shift
        // while every other level sits about one spacing away
        const SpMat H = hamiltonian(lift);
        SpMat Hs = H;
        const double shift = target + 1e-6 * window;
        for (std::int64_t i = 0; i < n; ++i) Hs.coeffRef(i, i) -= shift;
        Hs.makeCompressed();
        Eigen::SparseLU<SpMat> lu;
        lu.compute(Hs);
        if (lu.info() == Eigen::Success) {
            std::mt19937_64 rng(0x5ca1ab1eull + static_cast<unsigned long long>(k));
            Vec u(n);
            for (std::int64_t i = 0; i < n; ++i) u[i] = detail::symmetric_uniform(rng);
            u.normalize();
            bool finite = true;
            for (int it = 0; it < 8 && finite; ++it) {
                Vec w = lu.solve(u);
                const double nw = w.norm();
                finite = w.allFinite() && nw > 0.0;
                if (finite) u = w / nw;
            }
            const double e = u.dot(H * u);
            if (finite && e > -2.0 * window && e < 0.0) {
                double mass = 0.0;
                const double best = coupling(u, &mass);
                if (best >= 0.1) {
                    if (info) {
                        info->lift = lift;
                        info->eigenvalue = e;
                        info->spacing = spacing;
                        info->overlap = best;
                        info->crater_mass = mass;
                        info->crossing_index = k;
                        info->bisection_steps = total_steps;
                    }
                    PotentialSpec p = with_crater(base, lift, bump_height, bump_width);
                    std::ostringstream os;
                    os << "resonant_well:eps=" << strength << ",mu=" << exponent
                       << ",height=" << bump_height << ",width=" << bump_width;
                    p.id = os.str();
                    return p;
                }
            }
        }
        // odd or uncoupled level: step just past this crossing and rebase
        lift_lo = lift + 1e-6;
        n_cur = count_below(lift_lo, target);
    }
    throw std::runtime_error(
        "resonant_well: no pinned state with probe coupling >= 0.1 within 8 crossings");
}

}  // namespace laplab
