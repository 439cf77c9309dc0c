#include "laplab/hypotheses.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "laplab/eigensolve.hpp"
#include "laplab/rng.hpp"

namespace laplab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// sup |num| / den with den = -V, under the convention 0/0 = 0; a nonzero
// numerator over a vanishing (or wrong-sign) denominator is unbounded.
double ratio_sup(const Vec& num, const Vec& neg_v) {
    double sup = 0.0;
    for (Eigen::Index i = 0; i < num.size(); ++i) {
        const double n = std::abs(num[i]);
        if (neg_v[i] > 0.0) {
            sup = std::max(sup, n / neg_v[i]);
        } else if (n != 0.0) {
            return kInf;
        }
    }
    return sup;
}

}  // namespace

EulerFields euler_derivatives(const PotentialSpec& pot, const Grid& grid, double h_fd) {
    EulerFields out;
    const std::int64_t n = grid.size();
    out.euler1.resize(n);
    out.euler2.resize(n);
    out.analytic = static_cast<bool>(pot.euler1) && static_cast<bool>(pot.euler2);

    std::vector<double> x(static_cast<std::size_t>(grid.dims));
    std::vector<double> xs(static_cast<std::size_t>(grid.dims));
    const double up = std::exp(h_fd), dn = std::exp(-h_fd);
    for (std::int64_t i = 0; i < n; ++i) {
        grid.point(i, x.data());
        if (out.analytic) {
            out.euler1[i] = pot.euler1(x.data(), grid.dims);
            out.euler2[i] = pot.euler2(x.data(), grid.dims);
            continue;
        }
        // central differences of t -> V(e^t x) at t = 0
        auto dilate = [&](double factor) {
            for (int d = 0; d < grid.dims; ++d)
                xs[static_cast<std::size_t>(d)] = factor * x[static_cast<std::size_t>(d)];
            return pot.value(xs.data(), grid.dims);
        };
        const double vp = dilate(up), v0 = pot.value(x.data(), grid.dims), vm = dilate(dn);
        out.euler1[i] = (vp - vm) / (2.0 * h_fd);
        out.euler2[i] = (vp - 2.0 * v0 + vm) / (h_fd * h_fd);
    }
    return out;
}

HypothesisReport check_conditions(const PotentialSpec& pot, const Grid& grid, double h_fd) {
    HypothesisReport rep;
    rep.potential_id = pot.id;

    const Vec v = evaluate_on_grid(grid, pot.value);
    const EulerFields ef = euler_derivatives(pot, grid, h_fd);
    rep.euler_analytic = ef.analytic;

    const Vec neg_v = -v;
    rep.c_tilde_grid = ratio_sup(ef.euler1, neg_v);
    rep.d_tilde_grid = ratio_sup(ef.euler2, neg_v);
    rep.c_tilde_tail = pot.tail.finite ? pot.tail.euler1_limit : kInf;
    rep.d_tilde_tail = pot.tail.finite ? pot.tail.euler2_limit : kInf;
    rep.c_tilde = std::max(rep.c_tilde_grid, rep.c_tilde_tail);
    rep.d_tilde = std::max(rep.d_tilde_grid, rep.d_tilde_tail);

    rep.conditions.i = (v.maxCoeff() <= 0.0);
    rep.conditions.ii = (rep.c_tilde < 2.0);
    rep.conditions.iii = std::isfinite(rep.d_tilde);
    return rep;
}

double select_c1(const HypothesisReport& report) {
    if (!report.conditions.ii) return kNaN;
    return 0.5 * (report.c_tilde + 2.0);
}

double c2_bound(const OperatorSet& ops, double* lambda_min_out, double* error_out) {
    EigResult r = min_eig_sym(ops.B);
    if (!r.converged)
        throw std::runtime_error("c2_bound: lambda_min(B) did not converge: " + r.message);
    if (lambda_min_out) *lambda_min_out = r.value;
    if (error_out) *error_out = r.certified_error;
    return std::max(0.0, -(r.value - r.certified_error));
}

FormInequalityResult quadratic_form_inequalities(const OperatorSet& ops,
                                                 const HypothesisReport& report, int samples,
                                                 double cap, unsigned long long seed) {
    FormInequalityResult res;
    res.cap = cap;
    res.samples = samples;
    if (!report.conditions.s_positive) {
        res.valid = false;
        res.message = "S is not strictly positive; form inequalities are vacuous";
        return res;
    }
    if (samples < 1) throw std::invalid_argument("quadratic_form_inequalities: samples < 1");

    const SpMat CB = second_commutator(ops);
    const SpMat CS = dilation_commutator_of_S(ops);

    std::mt19937_64 rng(seed);
    const Eigen::Index n = ops.S.rows();
    Vec f(n);
    for (int s = 0; s < samples; ++s) {
        for (Eigen::Index i = 0; i < n; ++i) f[i] = detail::symmetric_uniform(rng);
        const double sS = f.dot(ops.S * f);
        if (!(sS > 0.0)) {
            res.valid = false;
            res.message = "sampled <f,Sf> not positive despite positive lambda_min(S)";
            return res;
        }
        res.d_B = std::max(res.d_B, std::abs(f.dot(ops.B * f)) / sS);
        res.d_CB = std::max(res.d_CB, std::abs(f.dot(CB * f)) / sS);
        res.d_SB = std::max(res.d_SB, std::abs(f.dot(CS * f)) / sS);
    }
    res.d_emp = std::max({res.d_B, res.d_CB, res.d_SB});
    res.within_cap = (res.d_emp <= cap);
    res.valid = true;
    return res;
}

HypothesisReport full_hypothesis_report(const PotentialSpec& pot, const Grid& grid,
                                        const HypothesisOptions& opts) {
    HypothesisReport rep = check_conditions(pot, grid, opts.h_fd);

    if (std::isfinite(opts.c1_override)) {
        rep.c1 = opts.c1_override;
        rep.c1_overridden = true;
    } else {
        rep.c1 = select_c1(rep);
    }
    if (!std::isfinite(rep.c1)) {
        rep.lambda_min_S = kNaN;
        rep.lambda_min_B = kNaN;
        rep.c2 = kNaN;
        rep.message = "condition (ii) failed: no admissible c1, operator stage skipped";
        return rep;
    }
    rep.requires_nonneg_lambda = (rep.c1 > 0.0);

    OperatorSet ops = assemble_operators(grid, pot, rep.c1);

    EigResult s_eig = min_eig_sym(ops.S, opts.eig_rel_tol);
    if (!s_eig.converged)
        throw std::runtime_error("full_hypothesis_report: lambda_min(S) did not converge: " +
                                 s_eig.message);
    rep.lambda_min_S = s_eig.value;
    rep.lambda_min_S_error = s_eig.certified_error;
    rep.conditions.s_positive = (s_eig.value - s_eig.certified_error > 0.0);

    rep.c2 = c2_bound(ops, &rep.lambda_min_B, &rep.lambda_min_B_error);

    rep.pass = rep.conditions.i && rep.conditions.ii && rep.conditions.iii &&
               rep.conditions.s_positive;
    if (!rep.pass && rep.message.empty()) rep.message = "one or more hypotheses failed";
    return rep;
}

namespace {

nlohmann::json finite_or_null(double x) {
    if (std::isfinite(x)) return x;
    return nullptr;
}

}  // namespace

nlohmann::json to_json(const HypothesisReport& r) {
    nlohmann::json j;
    j["potential"] = r.potential_id;
    j["c_tilde"] = finite_or_null(r.c_tilde);
    j["d_tilde"] = finite_or_null(r.d_tilde);
    j["c1"] = finite_or_null(r.c1);
    j["lambda_min_S"] = finite_or_null(r.lambda_min_S);
    j["c2"] = finite_or_null(r.c2);
    j["conditions"] = {{"i", r.conditions.i},
                       {"ii", r.conditions.ii},
                       {"iii", r.conditions.iii},
                       {"S_positive", r.conditions.s_positive}};
    j["c_tilde_grid"] = finite_or_null(r.c_tilde_grid);
    j["c_tilde_tail"] = finite_or_null(r.c_tilde_tail);
    j["d_tilde_grid"] = finite_or_null(r.d_tilde_grid);
    j["d_tilde_tail"] = finite_or_null(r.d_tilde_tail);
    j["lambda_min_S_error"] = finite_or_null(r.lambda_min_S_error);
    j["lambda_min_B"] = finite_or_null(r.lambda_min_B);
    j["c1_overridden"] = r.c1_overridden;
    j["requires_nonneg_lambda"] = r.requires_nonneg_lambda;
    j["euler_analytic"] = r.euler_analytic;
    j["pass"] = r.pass;
    if (!r.message.empty()) j["message"] = r.message;
    return j;
}

}  // namespace laplab
