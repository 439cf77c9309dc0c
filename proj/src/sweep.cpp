#include "laplab/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "laplab/eigensolve.hpp"
#include "laplab/resolvent.hpp"
#include "laplab/rng.hpp"

namespace laplab {

namespace {

using Cplx = std::complex<double>;

int resolve_threads(int requested, std::size_t tasks) {
    std::size_t t = requested > 0 ? static_cast<std::size_t>(requested) : 0;
    if (t == 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        t = hw == 0 ? 1 : hw;
    }
    t = std::min(std::max<std::size_t>(tasks, 1), t);
    return static_cast<int>(std::max<std::size_t>(t, 1));
}

// Flatness is a claim about the floor, not the approach to it: the exponent is
// fitted over the lower half of the schedule's log range (at least 4 points),
// which excludes the large-mu transient. The full profile stays in the table.
std::size_t fit_start_index(const std::vector<double>& mus_decreasing) {
    const std::size_t n = mus_decreasing.size();
    const double gm = std::sqrt(mus_decreasing.front() * mus_decreasing.back());
    std::size_t start = 0;
    while (start < n && mus_decreasing[start] > gm) ++start;
    if (n - start < 4) start = n >= 4 ? n - 4 : 0;
    return start;
}

ExponentFit fit_floor_window(const std::vector<double>& mus, const std::vector<double>& vals) {
    const std::size_t start = fit_start_index(mus);
    const std::vector<double> m(mus.begin() + static_cast<std::ptrdiff_t>(start), mus.end());
    const std::vector<double> v(vals.begin() + static_cast<std::ptrdiff_t>(start), vals.end());
    return fit_exponent(m, v);
}

// drop the part of the (decreasing) schedule below this lambda's own floor,
// then fit the floor window of what remains; fewer than 4 surviving points
// fall back to the deepest 4 of the schedule
ExponentFit fit_above_floor(const std::vector<double>& mus, const std::vector<double>& vals,
                            double floor_v) {
    std::vector<double> m, v;
    m.reserve(mus.size());
    v.reserve(vals.size());
    for (std::size_t j = 0; j < mus.size(); ++j)
        if (mus[j] >= floor_v * (1.0 - 1e-12)) {
            m.push_back(mus[j]);
            v.push_back(vals[j]);
        }
    if (m.size() < 4) {
        const std::size_t take = std::min<std::size_t>(4, mus.size());
        m.assign(mus.end() - static_cast<std::ptrdiff_t>(take), mus.end());
        v.assign(vals.end() - static_cast<std::ptrdiff_t>(take), vals.end());
    }
    return fit_floor_window(m, v);
}

void run_partitioned(std::size_t tasks, int threads, const std::function<void(std::size_t)>& body) {
    if (threads <= 1) {
        for (std::size_t i = 0; i < tasks; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
            for (std::size_t i = static_cast<std::size_t>(t); i < tasks;
                 i += static_cast<std::size_t>(threads))
                body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

double mu_floor_estimate(const SpMat& H, double lambda_lo, double lambda_hi,
                         double* mean_spacing_out) {
    const double width = lambda_hi - lambda_lo;
    const double pad = std::max(0.25, 0.05 * width);
    const double spacing = mean_level_spacing(H, lambda_lo - pad, lambda_hi + pad);
    if (mean_spacing_out) *mean_spacing_out = spacing;
    return 3.0 * spacing;
}

std::vector<double> local_mu_floors(const SpMat& H, const std::vector<double>& lambda_grid,
                                    double half_width) {
    std::vector<double> floors;
    floors.reserve(lambda_grid.size());
    for (const double lambda : lambda_grid)
        floors.push_back(3.0 * mean_level_spacing(H, lambda - half_width, lambda + half_width));
    return floors;
}

std::vector<Vec> make_gaussian_vectors(const Grid& grid, const NormContext& ctx) {
    std::vector<Vec> out;
    const std::int64_t n = grid.size();
    std::vector<double> x(static_cast<std::size_t>(grid.dims));
    for (const double center : {0.0, grid.half_extent / 4.0}) {
        for (const double sigma : {1.0, 2.0}) {
            Vec f(n);
            for (std::int64_t i = 0; i < n; ++i) {
                grid.point(i, x.data());
                double d2 = (x[0] - center) * (x[0] - center);
                for (int d = 1; d < grid.dims; ++d)
                    d2 += x[static_cast<std::size_t>(d)] * x[static_cast<std::size_t>(d)];
                f[i] = std::exp(-d2 / (2.0 * sigma * sigma));
            }
            const double norm = ctx.weights_available ? e_surrogate_norm(ctx, f) : f.norm();
            if (!(norm > 0.0)) throw std::runtime_error("make_gaussian_vectors: zero norm");
            out.push_back(f / norm);
        }
    }
    return out;
}

LapSweepResult lap_sweep(const OperatorSet& ops, const NormContext& ctx,
                         const std::vector<Vec>& test_vectors,
                         const std::vector<double>& lambda_grid,
                         const std::vector<double>& mu_schedule,
                         const std::vector<double>& local_floors, int threads) {
    if (test_vectors.empty()) throw std::invalid_argument("lap_sweep: no test vectors");
    if (lambda_grid.empty() || mu_schedule.empty())
        throw std::invalid_argument("lap_sweep: empty lambda grid or mu schedule");
    if (mu_schedule.size() < 4)
        throw std::invalid_argument("lap_sweep: the exponent fit needs at least 4 mu points");
    for (std::size_t j = 1; j < mu_schedule.size(); ++j)
        if (!(mu_schedule[j] < mu_schedule[j - 1]))
            throw std::invalid_argument("lap_sweep: mu schedule must be strictly decreasing");
    const std::vector<double> floors =
        local_floors.empty() ? local_mu_floors(ops.H, lambda_grid) : local_floors;
    if (floors.size() != lambda_grid.size())
        throw std::invalid_argument("lap_sweep: local floors do not match the lambda grid");

    LapSweepResult res;
    res.lambda_grid = lambda_grid;
    res.mu_schedule = mu_schedule;
    res.vectors = static_cast<int>(test_vectors.size());

    res.mu_floor = *std::min_element(floors.begin(), floors.end());
    res.mean_spacing = res.mu_floor / 3.0;
    const double mu_min = mu_schedule.back();
    if (mu_min < res.mu_floor * (1.0 - 1e-12)) {
        std::ostringstream os;
        os << "lap_sweep: mu = " << mu_min << " is below the smallest local floor "
           << res.mu_floor << " (3x mean level spacing " << res.mean_spacing
           << "); the discrete spectrum cannot support a continuum statement there";
        throw std::invalid_argument(os.str());
    }

    std::vector<double> norm_sq(test_vectors.size());
    for (std::size_t k = 0; k < test_vectors.size(); ++k) {
        const double norm = ctx.weights_available ? e_surrogate_norm(ctx, test_vectors[k])
                                                  : test_vectors[k].norm();
        norm_sq[k] = norm * norm;
    }

    const std::size_t nl = lambda_grid.size(), nm = mu_schedule.size(),
                      nv = test_vectors.size();
    res.cells.resize(nl * nm * nv);
    std::vector<double> conj_dev(nl, 0.0);

    const int pool = resolve_threads(threads, nl);
    run_partitioned(nl, pool, [&](std::size_t li) {
        const double lambda = lambda_grid[li];
        const bool in_scope = ops.c1 * lambda >= 0.0;
        for (std::size_t mj = 0; mj < nm; ++mj) {
            ShiftedSolver solver(ops, lambda, mu_schedule[mj], 0.0);
            for (std::size_t vk = 0; vk < nv; ++vk) {
                const CVec fc = test_vectors[vk].cast<Cplx>();
                const CVec g = solver.solve(Branch::plus, fc);
                SweepCell& cell = res.cells[(li * nm + mj) * nv + vk];
                cell.lambda = lambda;
                cell.mu = mu_schedule[mj];
                cell.vector_index = static_cast<int>(vk);
                cell.F_plus = fc.dot(g);
                cell.normalized = std::abs(cell.F_plus) / norm_sq[vk];
                cell.in_scope = in_scope;
                // conjugate-branch property on a deterministic subsample
                if ((li * nm + mj) % 5 == 0 && vk == 0) {
                    const Cplx fm = fc.dot(solver.solve(Branch::minus, fc));
                    const double dev = std::abs(fm - std::conj(cell.F_plus)) /
                                       std::max(std::abs(cell.F_plus), 1e-300);
                    conj_dev[li] = std::max(conj_dev[li], dev);
                }
            }
        }
    });

    res.min_im_plus = std::numeric_limits<double>::infinity();
    for (const SweepCell& c : res.cells)
        res.min_im_plus = std::min(res.min_im_plus, c.F_plus.imag());
    res.im_positive_ok = res.min_im_plus > 0.0;

    res.worst_conjugate_dev = *std::max_element(conj_dev.begin(), conj_dev.end());
    res.conjugate_ok = res.worst_conjugate_dev <= 1e-12;

    res.summaries.resize(nl);
    res.sup_normalized = 0.0;
    bool all_flat = true;
    for (std::size_t li = 0; li < nl; ++li) {
        std::vector<double> mu_vals(nm), max_vals(nm);
        for (std::size_t mj = 0; mj < nm; ++mj) {
            mu_vals[mj] = mu_schedule[mj];
            double v = 0.0;
            for (std::size_t vk = 0; vk < nv; ++vk)
                v = std::max(v, res.cells[(li * nm + mj) * nv + vk].normalized);
            max_vals[mj] = v;
        }
        LambdaSummary& s = res.summaries[li];
        s.lambda = lambda_grid[li];
        s.in_scope = ops.c1 * lambda_grid[li] >= 0.0;
        s.local_floor = floors[li];
        const ExponentFit fit = fit_above_floor(mu_vals, max_vals, floors[li]);
        s.slope = fit.slope;
        s.slope_stderr = fit.stderr_;
        s.growth_exponent = std::max(0.0, -fit.slope);
        s.flat = s.growth_exponent < 0.1;
        if (s.in_scope) {
            if (!s.flat) all_flat = false;
            for (std::size_t mj = 0; mj < nm; ++mj)
                res.sup_normalized = std::max(res.sup_normalized, max_vals[mj]);
        }
    }
    res.all_flat_in_scope = all_flat;
    return res;
}

LSpec make_l_spec(const std::string& selector, const NormContext& ctx) {
    LSpec spec;
    spec.id = selector;
    const std::int64_t n = ctx.grid.size();
    const double inf = std::numeric_limits<double>::infinity();

    // L_max tail: M ~ |x|^{-max(2,p)}, -V ~ |x|^{-p} with p the Euler tail ratio
    auto lmax_exponent = [&](double p) {
        return -((0.25 + ctx.delta) * std::max(2.0, p) + (0.25 - ctx.delta) * p);
    };

    if (selector == "zero") {
        spec.diag = Vec::Zero(n);
        spec.tail_exponent = -inf;
        spec.is_zero = true;
        return spec;
    }
    if (selector == "one") {
        spec.diag = Vec::Ones(n);
        spec.tail_exponent = 0.0;
        return spec;
    }
    if (selector == "lmax") {
        spec.diag = smoothness_weight(ctx);
        spec.tail_exponent = lmax_exponent(ctx.c_tilde);
        return spec;
    }
    if (selector.rfind("scale:", 0) == 0) {
        const std::string num = selector.substr(6);
        std::size_t pos = 0;
        double a = 0.0;
        try {
            a = std::stod(num, &pos);
        } catch (const std::exception&) {
            throw std::invalid_argument("make_l_spec: bad scale factor '" + num + "'");
        }
        if (pos != num.size())
            throw std::invalid_argument("make_l_spec: bad scale factor '" + num + "'");
        spec.diag = a * smoothness_weight(ctx);
        spec.tail_exponent = a == 0.0 ? -inf : lmax_exponent(ctx.c_tilde);
        spec.is_zero = a == 0.0;
        return spec;
    }
    throw std::invalid_argument("make_l_spec: unknown selector '" + selector +
                                "' (want zero|one|lmax|scale:<a>)");
}

KatoProbeResult kato_smoothness_probe(const OperatorSet& ops, const NormContext& ctx,
                                      const LSpec& l_spec,
                                      const std::vector<double>& lambda_grid,
                                      const std::vector<double>& mu_schedule,
                                      const std::vector<double>& local_floors, int sample_count,
                                      int power_iters, bool force, unsigned long long seed) {
    if (!ctx.weights_available)
        throw std::runtime_error("kato_smoothness_probe: requires V < 0 at every grid point");
    if (lambda_grid.empty() || mu_schedule.empty())
        throw std::invalid_argument("kato_smoothness_probe: empty grids");
    if (mu_schedule.size() < 4)
        throw std::invalid_argument(
            "kato_smoothness_probe: the exponent fit needs at least 4 mu points");
    const std::vector<double> floors =
        local_floors.empty() ? local_mu_floors(ops.H, lambda_grid) : local_floors;
    if (floors.size() != lambda_grid.size())
        throw std::invalid_argument("kato_smoothness_probe: local floors do not match the grid");

    KatoProbeResult res;
    res.l_tail_exponent = l_spec.tail_exponent;
    {
        const double p = ctx.c_tilde;
        res.lmax_tail_exponent = -((0.25 + ctx.delta) * std::max(2.0, p) + (0.25 - ctx.delta) * p);
    }
    res.c_dom = 0.0;
    for (std::int64_t i = 0; i < ctx.grid.size(); ++i)
        res.c_dom = std::max(res.c_dom, std::abs(l_spec.diag[i]) / ctx.L_max_diag[i]);
    res.dominated = l_spec.is_zero || l_spec.tail_exponent <= res.lmax_tail_exponent + 1e-12;
    if (!res.dominated && !force) {
        res.refused = true;
        std::ostringstream os;
        os << "L is not dominated by the maximal smoothness weight: tail exponent "
           << l_spec.tail_exponent << " > " << res.lmax_tail_exponent
           << " (worst grid ratio " << res.c_dom << "); pass force to run anyway";
        res.message = os.str();
        return res;
    }

    res.mu_floor = *std::min_element(floors.begin(), floors.end());
    if (mu_schedule.back() < res.mu_floor * (1.0 - 1e-12)) {
        std::ostringstream os;
        os << "kato_smoothness_probe: mu = " << mu_schedule.back() << " below floor "
           << res.mu_floor;
        throw std::invalid_argument(os.str());
    }

    const std::size_t nl = lambda_grid.size(), nm = mu_schedule.size();
    res.cells.resize(nl * nm);

    if (l_spec.is_zero) {
        for (std::size_t li = 0; li < nl; ++li)
            for (std::size_t mj = 0; mj < nm; ++mj) {
                KatoProbeCell& c = res.cells[li * nm + mj];
                c.lambda = lambda_grid[li];
                c.mu = mu_schedule[mj];
                c.value = 0.0;
            }
        res.sup_value = 0.0;
        res.flat = true;
        res.growth_detected = false;
        return res;
    }

    // fixed starts shared by every cell
    std::mt19937_64 rng(seed);
    std::vector<Vec> starts;
    starts.reserve(static_cast<std::size_t>(sample_count));
    for (int j = 0; j < sample_count; ++j) {
        Vec g(ctx.grid.size());
        for (std::int64_t i = 0; i < ctx.grid.size(); ++i)
            g[i] = detail::symmetric_uniform(rng);
        starts.push_back(g / g.norm());
    }

    const CVec l_diag_c = l_spec.diag.cast<Cplx>();
    for (std::size_t li = 0; li < nl; ++li) {
        const double lambda = lambda_grid[li];
        for (std::size_t mj = 0; mj < nm; ++mj) {
            const double mu = mu_schedule[mj];
            ShiftedSolver solver(ops, lambda, mu, 0.0);
            // one application of L Im(G) L: w -> L * mu * G+ G- (L w)
            auto apply = [&](const CVec& w) {
                CVec u = w.cwiseProduct(l_diag_c);
                u = solver.solve(Branch::minus, u);
                u = solver.solve(Branch::plus, u);
                u *= mu;
                return CVec(u.cwiseProduct(l_diag_c));
            };
            double best = 0.0;
            for (const Vec& g0 : starts) {
                CVec g = g0.cast<Cplx>();
                CVec h = apply(g);
                double value = std::real(g.dot(h));
                for (int it = 0; it < power_iters; ++it) {
                    const double hn = h.norm();
                    if (!(hn > 0.0)) break;
                    g = h / hn;
                    h = apply(g);
                    value = std::real(g.dot(h));
                }
                best = std::max(best, value);
            }
            KatoProbeCell& c = res.cells[li * nm + mj];
            c.lambda = lambda;
            c.mu = mu;
            c.value = best;
        }
    }

    res.summaries.resize(nl);
    res.sup_value = 0.0;
    res.flat = true;
    res.growth_detected = false;
    for (std::size_t li = 0; li < nl; ++li) {
        std::vector<double> mu_vals(nm), vals(nm);
        for (std::size_t mj = 0; mj < nm; ++mj) {
            mu_vals[mj] = mu_schedule[mj];
            vals[mj] = res.cells[li * nm + mj].value;
            res.sup_value = std::max(res.sup_value, vals[mj]);
        }
        LambdaSummary& s = res.summaries[li];
        s.lambda = lambda_grid[li];
        s.local_floor = floors[li];
        const ExponentFit fit = fit_above_floor(mu_vals, vals, floors[li]);
        s.slope = fit.slope;
        s.slope_stderr = fit.stderr_;
        s.growth_exponent = std::max(0.0, -fit.slope);
        s.flat = s.growth_exponent < 0.1;
        if (!s.flat) res.flat = false;
        if (s.growth_exponent >= 0.4) res.growth_detected = true;
    }
    return res;
}

}  // namespace laplab
