#include "laplab/resolvent.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "laplab/eigensolve.hpp"
#include "laplab/rng.hpp"

namespace laplab {

namespace {

using Cplx = std::complex<double>;

CVec random_complex(std::mt19937_64& rng, Eigen::Index n) {
    CVec v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double re = detail::symmetric_uniform(rng);
        const double im = detail::symmetric_uniform(rng);
        v[i] = Cplx(re, im);
    }
    return v;
}

Vec random_real(std::mt19937_64& rng, Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = detail::symmetric_uniform(rng);
    return v;
}

double s_norm_c(const NormContext& ctx, const CVec& g) {
    const Vec re = g.real(), im = g.imag();
    const double q = re.dot(ctx.S * re) + im.dot(ctx.S * im);
    return std::sqrt(std::max(q, 0.0));
}

// Error-free transformations. The refinement loop measures its residual with
// these: near-singular shifts push ||T|| ||x|| / ||f|| far enough above 1 that
// a plain double evaluation of f - T x could not certify 1e-10.
struct DD {
    double hi = 0.0, lo = 0.0;
};

DD two_sum(double a, double b) {
    const double s = a + b;
    const double bv = s - a;
    return {s, (a - (s - bv)) + (b - bv)};
}

DD two_prod(double a, double b) {
    const double p = a * b;
    return {p, std::fma(a, b, -p)};
}

DD dd_add(DD a, DD b) {
    DD s = two_sum(a.hi, b.hi);
    s.lo += a.lo + b.lo;
    return two_sum(s.hi, s.lo);
}

// r = f - T (x_hi + x_lo). The x_lo products are already second order, so
// only the x_hi ones need exact transforms.
CVec compensated_residual(const CSpMat& T, const CVec& x_hi, const CVec& x_lo, const CVec& f) {
    const Eigen::Index n = T.rows();
    std::vector<DD> re(n), im(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        re[i] = DD{f[i].real(), 0.0};
        im[i] = DD{f[i].imag(), 0.0};
    }
    for (Eigen::Index c = 0; c < T.outerSize(); ++c) {
        const double xr = x_hi[c].real(), xi = x_hi[c].imag();
        const double yr = x_lo[c].real(), yi = x_lo[c].imag();
        for (CSpMat::InnerIterator it(T, c); it; ++it) {
            const Eigen::Index row = it.row();
            const double tr = it.value().real(), ti = it.value().imag();
            re[row] = dd_add(re[row], two_prod(-tr, xr));
            re[row] = dd_add(re[row], two_prod(ti, xi));
            im[row] = dd_add(im[row], two_prod(-tr, xi));
            im[row] = dd_add(im[row], two_prod(-ti, xr));
            re[row] = dd_add(re[row], DD{ti * yi - tr * yr, 0.0});
            im[row] = dd_add(im[row], DD{-tr * yi - ti * yr, 0.0});
        }
    }
    CVec r(n);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = Cplx(re[i].hi + re[i].lo, im[i].hi + im[i].lo);
    return r;
}

}  // namespace

ShiftedSolver::ShiftedSolver(const OperatorSet& ops, double lambda, double mu, double epsilon)
    : lambda_(lambda), mu_(mu), epsilon_(epsilon) {
    if (!(mu > 0.0)) throw std::invalid_argument("ShiftedSolver: mu must be positive");
    if (epsilon < 0.0) throw std::invalid_argument("ShiftedSolver: epsilon must be nonnegative");

    // T+ = (H - lambda I) - i (mu I + eps B)
    SpMat imag_part(ops.H.rows(), ops.H.cols());
    imag_part.setIdentity();
    imag_part *= mu;
    if (epsilon > 0.0) imag_part += epsilon * ops.B;

    SpMat shifted = ops.H;
    for (std::int64_t i = 0; i < ops.grid.size(); ++i) shifted.coeffRef(i, i) -= lambda;
    T_plus_ = shifted.cast<Cplx>() + Cplx(0.0, -1.0) * imag_part.cast<Cplx>();
    T_plus_.makeCompressed();
    norm1_ = 0.0;
    for (Eigen::Index c = 0; c < T_plus_.cols(); ++c) {
        double col = 0.0;
        for (CSpMat::InnerIterator it(T_plus_, c); it; ++it) col += std::abs(it.value());
        norm1_ = std::max(norm1_, col);
    }

    lu_.compute(T_plus_);
    if (lu_.info() != Eigen::Success) {
        std::ostringstream os;
        os << "ShiftedSolver: factorization failed at lambda=" << lambda << " mu=" << mu
           << " eps=" << epsilon << " (||T||_1 = " << norm1_ << ")";
        throw std::runtime_error(os.str());
    }
}

CVec ShiftedSolver::apply(Branch branch, const CVec& g) const {
    if (branch == Branch::plus) return T_plus_ * g;
    return (T_plus_ * g.conjugate()).conjugate();
}

CVec ShiftedSolver::solve(Branch branch, const CVec& f) const {
    const CVec rhs = branch == Branch::plus ? f : CVec(f.conjugate());
    // Extended-iterate refinement: the solution lives in a double-double pair
    // while it is being polished, since a plain double vector cannot carry a
    // 1e-10 residual once ||T|| ||x|| / ||f|| passes ~1e6 (resolvents pinned
    // near the spectrum do exactly that). The certificate below is for the
    // pair; the returned vector is its correct rounding.
    CVec x = lu_.solve(rhs);
    CVec x_lo = CVec::Zero(x.size());
    const double fn = rhs.norm();
    if (fn > 0.0) {
        double resid = std::numeric_limits<double>::infinity();
        for (int pass = 0; pass < 9; ++pass) {
            const CVec r = compensated_residual(T_plus_, x, x_lo, rhs);
            resid = r.norm() / fn;
            if (resid <= 1e-10) break;
            if (pass < 8) {
                const CVec d = lu_.solve(r);
                for (Eigen::Index i = 0; i < x.size(); ++i) {
                    const DD re = two_sum(x[i].real(), x_lo[i].real() + d[i].real());
                    const DD im = two_sum(x[i].imag(), x_lo[i].imag() + d[i].imag());
                    x[i] = Cplx(re.hi, im.hi);
                    x_lo[i] = Cplx(re.lo, im.lo);
                }
            }
        }
        if (resid > 1e-10) {
            // condition estimate: ||T||_1 * ||T^{-1}||_2 via a few power steps
            std::mt19937_64 rng(0x51e9e5u);
            CVec v = random_complex(rng, x.size());
            v /= v.norm();
            double sigma = 0.0;
            for (int it = 0; it < 12; ++it) {
                CVec w = lu_.solve(v);
                w = lu_.solve(CVec(w.conjugate())).conjugate();  // (T^* T)^{-1} v
                sigma = w.norm();
                v = w / sigma;
            }
            std::ostringstream os;
            os << "ShiftedSolver: residual " << resid << " above 1e-10 at lambda=" << lambda_
               << " mu=" << mu_ << " eps=" << epsilon_
               << "; condition estimate ~ " << norm1_ * std::sqrt(sigma);
            throw std::runtime_error(os.str());
        }
    }
    return branch == Branch::plus ? x : CVec(x.conjugate());
}

CVec shifted_solve(const OperatorSet& ops, double lambda, double mu, double epsilon,
                   Branch branch, const CVec& f) {
    return ShiftedSolver(ops, lambda, mu, epsilon).solve(branch, f);
}

double eps0_bound(const OperatorSet& ops) {
    const double norm_b = sym_norm_estimate(ops.B);
    if (!(norm_b > 0.0)) throw std::runtime_error("eps0_bound: ||B|| estimate not positive");
    return 1.0 / (1.05 * norm_b);
}

FormIdentityCheck check_form_identity(const OperatorSet& ops, const CVec& f, double lambda,
                                      double mu, double epsilon, Branch branch) {
    if (!(epsilon > 0.0))
        throw std::invalid_argument("check_form_identity: epsilon must be positive");
    if (f.norm() == 0.0) throw std::invalid_argument("check_form_identity: f must be nonzero");

    const double sgn = branch == Branch::plus ? 1.0 : -1.0;
    const CSpMat Hc = ops.H.cast<Cplx>();
    const CSpMat Bc = ops.B.cast<Cplx>();
    CVec Tf = Hc * f - Cplx(lambda, sgn * mu) * f + Cplx(0.0, -sgn * epsilon) * (Bc * f);

    const Cplx form = f.dot(Tf);  // conjugate-linear in the first argument
    FormIdentityCheck out;
    out.norm2 = f.squaredNorm();
    out.lhs = -ops.c1 * form.real() - sgn * (1.0 / epsilon) * form.imag();

    const Vec re = f.real(), im = f.imag();
    out.s_form = re.dot(ops.S * re) + im.dot(ops.S * im);

    const double rhs = out.s_form + (ops.c1 * lambda + mu / epsilon) * out.norm2;
    const double scale = std::max({std::abs(out.lhs), std::abs(rhs), 1e-300});
    out.identity_residual = std::abs(out.lhs - rhs) / scale;
    out.positivity_margin = out.lhs - out.s_form;
    out.margin_applicable = (ops.c1 * lambda >= 0.0);
    return out;
}

std::vector<double> default_schedule(double eps1, int points) {
    std::vector<double> s;
    s.reserve(static_cast<std::size_t>(points));
    double e = eps1;
    for (int k = 0; k < points; ++k) {
        e *= 0.5;
        s.push_back(e);
    }
    return s;
}

double commutator_s_norm(const OperatorSet& ops, const NormContext& ctx, int iters,
                         unsigned long long seed) {
    const SpMat CB = second_commutator(ops);
    std::mt19937_64 rng(seed);
    Vec v = random_real(rng, CB.rows());
    // P = S^{-1} CB is self-adjoint in the S inner product; its spectral radius
    // equals ||CB||_{S->S*}
    double lam = 0.0, prev = 0.0;
    v /= std::max(s_norm(ctx, v), 1e-300);
    for (int it = 0; it < iters; ++it) {
        const Vec w = solve_S(ctx, CB * v);
        lam = v.dot(ctx.S * w);  // <v, Pv>_S with v S-normalized
        const double wn = s_norm(ctx, w);
        if (!(wn > 0.0)) return 0.0;
        v = w / wn;
        if (it > 4 && std::abs(lam - prev) <= 1e-8 * std::abs(lam)) break;
        prev = lam;
    }
    return std::abs(lam);
}

RegularizedTrace regularized_trace(const OperatorSet& ops, const NormContext& ctx, const Vec& f,
                                   double lambda, double mu, const std::vector<double>& schedule,
                                   int quad_substeps, int sample_vectors,
                                   unsigned long long seed) {
    RegularizedTrace tr;
    tr.lambda = lambda;
    tr.mu = mu;
    tr.eps0 = eps0_bound(ops);
    tr.eps1 = std::min(tr.eps0, 1.0);
    if (schedule.empty()) throw std::invalid_argument("regularized_trace: empty schedule");
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        if (!(schedule[k] > 0.0) || schedule[k] >= tr.eps1)
            throw std::invalid_argument("regularized_trace: schedule entries must lie in (0, eps1)");
        if (k > 0 && schedule[k] >= schedule[k - 1])
            throw std::invalid_argument("regularized_trace: schedule must be strictly decreasing");
    }
    const int m = std::max(quad_substeps, 16);

    tr.d_CB_emp = commutator_s_norm(ops, ctx);

    // fixed sample vectors, shared by every schedule point
    std::mt19937_64 rng(seed);
    std::vector<Vec> samples;
    samples.reserve(static_cast<std::size_t>(sample_vectors));
    for (int j = 0; j < sample_vectors; ++j) samples.push_back(random_real(rng, f.size()));

    tr.points.resize(schedule.size());
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        const double eps = schedule[k];
        TracePoint& pt = tr.points[k];
        pt.epsilon = eps;

        // composite midpoint of the Cayley flow: nodes (j + 1/2) eps/m
        const double seg = eps / m;
        Vec g = dilation_flow(ctx, ops, f, 0.5 * seg);
        Vec acc = g;
        for (int j = 1; j < m; ++j) {
            g = dilation_flow(ctx, ops, g, seg);
            acc += g;
        }
        const Vec f_eps = acc / m;
        const Vec w_eps_f = dilation_flow(ctx, ops, g, 0.5 * seg);  // W_eps f
        const Vec f_prime = (w_eps_f - f_eps) / eps;

        pt.s_star_fprime = s_star_norm(ctx, f_prime);
        pt.s_star_Af = s_star_norm(ctx, ops.K * f_eps);  // A = iK; the phase drops

        ShiftedSolver solver(ops, lambda, mu, eps);
        const CVec f_eps_c = f_eps.cast<Cplx>();
        const CVec gp = solver.solve(Branch::plus, f_eps_c);
        const CVec gm = solver.solve(Branch::minus, f_eps_c);
        pt.F_plus = f_eps_c.dot(gp);
        pt.F_minus = f_eps_c.dot(gm);
        if (pt.F_plus.imag() < 0.0 || pt.F_minus.imag() > 0.0) tr.im_sign_ok = false;

        const double env_coef = std::sqrt((1.0 + ops.c1 * eps) / eps);
        pt.envelope_slack_plus = env_coef * std::sqrt(std::abs(pt.F_plus)) - s_norm_c(ctx, gp);
        pt.envelope_slack_minus = env_coef * std::sqrt(std::abs(pt.F_minus)) - s_norm_c(ctx, gm);

        double r12p = 0.0, r12m = 0.0;
        for (const Vec& w : samples) {
            const double wstar = s_star_norm(ctx, w);
            if (!(wstar > 0.0)) continue;
            const CVec wc = w.cast<Cplx>();
            r12p = std::max(r12p, s_norm_c(ctx, solver.solve(Branch::plus, wc)) / wstar);
            r12m = std::max(r12m, s_norm_c(ctx, solver.solve(Branch::minus, wc)) / wstar);
        }
        pt.dual_bound_C_plus = eps * r12p;
        pt.dual_bound_C_minus = eps * r12m;
    }

    // centered derivative estimates on the nonuniform schedule, then the
    // right-hand side of the differential inequality
    for (std::size_t k = 0; k + 2 < tr.points.size(); ++k) {
        TracePoint& mid = tr.points[k + 1];
        const TracePoint& up = tr.points[k];
        const TracePoint& dn = tr.points[k + 2];
        const double h1 = up.epsilon - mid.epsilon;
        const double h2 = mid.epsilon - dn.epsilon;
        const double denom = h1 * h2 * (h1 + h2);
        const Cplx dp = (h2 * h2 * up.F_plus + (h1 * h1 - h2 * h2) * mid.F_plus -
                         h1 * h1 * dn.F_plus) /
                        denom;
        const Cplx dm = (h2 * h2 * up.F_minus + (h1 * h1 - h2 * h2) * mid.F_minus -
                         h1 * h1 * dn.F_minus) /
                        denom;
        mid.deriv_plus = std::abs(dp);
        mid.deriv_minus = std::abs(dm);
        mid.deriv_defined = true;
    }
    for (TracePoint& pt : tr.points) {
        const double env_coef = std::sqrt((1.0 + ops.c1 * pt.epsilon) / pt.epsilon);
        const double first = 2.0 * env_coef * (pt.s_star_fprime + pt.s_star_Af);
        pt.deriv_envelope_plus = first * std::sqrt(std::abs(pt.F_plus)) +
                        (1.0 + ops.c1 * pt.epsilon) * tr.d_CB_emp * std::abs(pt.F_plus);
        pt.deriv_envelope_minus = first * std::sqrt(std::abs(pt.F_minus)) +
                         (1.0 + ops.c1 * pt.epsilon) * tr.d_CB_emp * std::abs(pt.F_minus);
    }

    // Richardson on the last four points (geometric schedules: ratio 1/2)
    const std::size_t n = tr.points.size();
    if (n >= 4) {
        auto richardson = [&](auto pick) {
            std::array<Cplx, 4> v;
            for (std::size_t j = 0; j < 4; ++j) v[j] = pick(tr.points[n - 4 + j]);
            std::array<Cplx, 3> l1;
            for (std::size_t j = 0; j < 3; ++j) l1[j] = 2.0 * v[j + 1] - v[j];
            std::array<Cplx, 2> l2;
            for (std::size_t j = 0; j < 2; ++j) l2[j] = (4.0 * l1[j + 1] - l1[j]) / 3.0;
            return l2[1];
        };
        tr.F0_plus = richardson([](const TracePoint& p) { return p.F_plus; });
        tr.F0_minus = richardson([](const TracePoint& p) { return p.F_minus; });
    } else {
        tr.F0_plus = tr.points.back().F_plus;
        tr.F0_minus = tr.points.back().F_minus;
    }

    {
        ShiftedSolver direct(ops, lambda, mu, 0.0);
        const CVec fc = f.cast<Cplx>();
        tr.F_direct_plus = fc.dot(direct.solve(Branch::plus, fc));
    }

    double norm_sq = 0.0;
    if (ctx.weights_available) {
        const double en = e_surrogate_norm(ctx, f);
        norm_sq = en * en;
    } else {
        norm_sq = f.squaredNorm();
    }
    tr.gronwall_ratio = std::abs(tr.F0_plus) / (std::abs(tr.points.front().F_plus) + norm_sq);

    // trapezoid of eps^{-1/2}-weighted smoothing norms over the realized
    // schedule plus an integrable tail patch below the smallest entry
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const TracePoint& a = tr.points[k + 1];
        const TracePoint& b = tr.points[k];
        auto weight = [&](const TracePoint& p) {
            return std::sqrt((1.0 + ops.c1 * p.epsilon) / p.epsilon) *
                   (p.s_star_fprime + p.s_star_Af);
        };
        integral += 0.5 * (weight(a) + weight(b)) * (b.epsilon - a.epsilon);
    }
    const TracePoint& last = tr.points.back();
    integral += 2.0 * std::sqrt(last.epsilon) * (last.s_star_fprime + last.s_star_Af) *
                std::sqrt(1.0 + ops.c1 * last.epsilon);
    const double e_norm = std::sqrt(norm_sq);
    tr.smoothing_integral_ratio = e_norm > 0.0 ? integral / e_norm : 0.0;

    return tr;
}

EpsWindowReport eps_window_convergence(const OperatorSet& ops, double c2, const Vec& f,
                                       double lambda, double mu, int points, int samples,
                                       unsigned long long seed) {
    EpsWindowReport rep;
    rep.eps0 = eps0_bound(ops);
    rep.eps1 = std::min(rep.eps0, 1.0);
    rep.eps2 = c2 > 0.0 ? std::min(rep.eps1, mu / (2.0 * c2)) : rep.eps1;

    ShiftedSolver base(ops, lambda, mu, 0.0);
    const CVec fc = f.cast<std::complex<double>>();
    const CVec g0 = base.solve(Branch::plus, fc);

    std::mt19937_64 rng(seed);
    std::vector<CVec> gs;
    gs.reserve(static_cast<std::size_t>(samples));
    for (int j = 0; j < samples; ++j) {
        CVec g = random_complex(rng, f.size());
        g /= g.norm();
        gs.push_back(std::move(g));
    }

    const CSpMat Hc = ops.H.cast<std::complex<double>>();
    rep.worst_contraction_ratio = 0.0;
    double e = rep.eps2;
    for (int k = 0; k < points; ++k) {
        e *= 0.5;
        rep.eps_values.push_back(e);
        ShiftedSolver solver(ops, lambda, mu, e);
        rep.diff_norms.push_back((solver.solve(Branch::plus, fc) - g0).norm());

        for (const CVec& g : gs) {
            for (Branch br : {Branch::plus, Branch::minus}) {
                const double sgn = br == Branch::plus ? 1.0 : -1.0;
                const CVec u = solver.solve(br, g);
                const CVec v = Hc * u - std::complex<double>(lambda, sgn * 0.5 * mu) * u;
                rep.worst_contraction_ratio =
                    std::max(rep.worst_contraction_ratio, v.norm() / g.norm());
            }
        }
    }
    rep.contraction_ok = rep.worst_contraction_ratio <= 1.0 + 1e-12;

    const ExponentFit fit = fit_exponent(rep.eps_values, rep.diff_norms);
    rep.slope = fit.slope;
    rep.slope_stderr = fit.stderr_;
    rep.slope_ok = (fit.slope >= 0.9 && fit.slope <= 1.1);
    return rep;
}

ExponentFit fit_exponent(const std::vector<double>& mu_values,
                         const std::vector<double>& values) {
    if (mu_values.size() != values.size())
        throw std::invalid_argument("fit_exponent: size mismatch");
    if (mu_values.size() < 4) throw std::invalid_argument("fit_exponent: needs >= 4 points");
    const std::size_t n = mu_values.size();
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(mu_values[i] > 0.0) || !(values[i] > 0.0))
            throw std::invalid_argument("fit_exponent: data must be positive");
        x[i] = std::log(mu_values[i]);
        y[i] = std::log(values[i]);
    }
    double xm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        xm += x[i];
        ym += y[i];
    }
    xm /= static_cast<double>(n);
    ym /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - xm) * (x[i] - xm);
        sxy += (x[i] - xm) * (y[i] - ym);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_exponent: degenerate abscissae");
    ExponentFit fit;
    fit.points = static_cast<int>(n);
    fit.slope = sxy / sxx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - ym - fit.slope * (x[i] - xm);
        ss += r * r;
    }
    fit.stderr_ = n > 2 ? std::sqrt(ss / (static_cast<double>(n) - 2.0) / sxx) : 0.0;
    return fit;
}

}  // namespace laplab
