#include "laplab/potentials.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace laplab {

namespace {

double dot_self(const double* x, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x[i] * x[i];
    return s;
}

}  // namespace

const char* to_string(PotentialClass c) {
    switch (c) {
        case PotentialClass::compliant: return "compliant";
        case PotentialClass::fails_condition_i: return "fails_condition_i";
        case PotentialClass::fails_condition_ii: return "fails_condition_ii";
        case PotentialClass::resonant: return "resonant";
        case PotentialClass::degenerate: return "degenerate";
    }
    return "unknown";
}

PotentialSpec zero_potential() {
    PotentialSpec p;
    p.id = "zero";
    p.value = [](const double*, int) { return 0.0; };
    p.gradient = [](const double*, int n, double* out) {
        for (int i = 0; i < n; ++i) out[i] = 0.0;
    };
    p.euler1 = [](const double*, int) { return 0.0; };
    p.euler2 = [](const double*, int) { return 0.0; };
    p.tail = {true, 0.0, 0.0};
    p.classification = PotentialClass::degenerate;
    p.strictly_negative = false;
    return p;
}

PotentialSpec inverse_power(double strength, double exponent) {
    if (!(strength > 0.0))
        throw std::invalid_argument("inverse_power: strength must be positive");
    if (!(exponent > 0.0) || !(exponent < 2.0))
        throw std::invalid_argument("inverse_power: exponent must lie in (0, 2)");
    PotentialSpec p;
    {
        std::ostringstream os;
        os << "inverse_power:eps=" << strength << ",mu=" << exponent;
        p.id = os.str();
    }
    const double eps = strength, mu = exponent;
    p.value = [eps, mu](const double* x, int n) {
        return -eps * std::pow(1.0 + dot_self(x, n), -mu / 2.0);
    };
    p.gradient = [eps, mu](const double* x, int n, double* out) {
        const double g = eps * mu * std::pow(1.0 + dot_self(x, n), -mu / 2.0 - 1.0);
        for (int i = 0; i < n; ++i) out[i] = g * x[i];
    };
    p.euler1 = [eps, mu](const double* x, int n) {
        const double s = dot_self(x, n);
        return eps * mu * s * std::pow(1.0 + s, -mu / 2.0 - 1.0);
    };
    p.euler2 = [eps, mu](const double* x, int n) {
        const double s = dot_self(x, n);
        return eps * mu * std::pow(1.0 + s, -mu / 2.0 - 1.0) * 2.0 * s *
               (1.0 - (mu / 2.0 + 1.0) * s / (1.0 + s));
    };
    p.tail = {true, mu, mu * mu};
    p.classification = PotentialClass::compliant;
    p.strictly_negative = true;
    return p;
}

PotentialSpec gaussian_well(double strength) {
    if (!(strength > 0.0))
        throw std::invalid_argument("gaussian_well: strength must be positive");
    PotentialSpec p;
    {
        std::ostringstream os;
        os << "gaussian_well:eps=" << strength;
        p.id = os.str();
    }
    const double eps = strength;
    p.value = [eps](const double* x, int n) { return -eps * std::exp(-dot_self(x, n)); };
    p.gradient = [eps](const double* x, int n, double* out) {
        const double g = 2.0 * eps * std::exp(-dot_self(x, n));
        for (int i = 0; i < n; ++i) out[i] = g * x[i];
    };
    p.euler1 = [eps](const double* x, int n) {
        const double s = dot_self(x, n);
        return 2.0 * eps * s * std::exp(-s);
    };
    p.euler2 = [eps](const double* x, int n) {
        const double s = dot_self(x, n);
        return 4.0 * eps * s * (1.0 - s) * std::exp(-s);
    };
    // |euler1|/(-V) = 2|x|^2 is unbounded
    p.tail = {false, std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity()};
    p.classification = PotentialClass::fails_condition_ii;
    p.strictly_negative = true;
    return p;
}

PotentialSpec scaled(const PotentialSpec& base, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("scaled: alpha must be positive");
    PotentialSpec p = base;
    std::ostringstream os;
    os << "scaled:" << alpha << ":" << base.id;
    p.id = os.str();
    auto v = base.value, e1 = base.euler1, e2 = base.euler2;
    auto gr = base.gradient;
    p.value = [v, alpha](const double* x, int n) { return alpha * v(x, n); };
    p.gradient = [gr, alpha](const double* x, int n, double* out) {
        gr(x, n, out);
        for (int i = 0; i < n; ++i) out[i] *= alpha;
    };
    p.euler1 = [e1, alpha](const double* x, int n) { return alpha * e1(x, n); };
    p.euler2 = [e2, alpha](const double* x, int n) { return alpha * e2(x, n); };
    return p;  // tail ratios are scale invariant
}

namespace {

struct IdParts {
    std::string family;
    std::vector<std::pair<std::string, double>> kv;
    double get(const std::string& key, double fallback, bool* found = nullptr) const {
        for (const auto& [k, v] : kv)
            if (k == key) {
                if (found) *found = true;
                return v;
            }
        if (found) *found = false;
        return fallback;
    }
};

IdParts split_id(const std::string& id) {
    IdParts parts;
    auto colon = id.find(':');
    parts.family = id.substr(0, colon);
    if (colon == std::string::npos) return parts;
    std::string rest = id.substr(colon + 1);
    std::istringstream is(rest);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("potential id: expected key=value in '" + tok + "'");
        std::string key = tok.substr(0, eq);
        std::string val = tok.substr(eq + 1);
        try {
            size_t used = 0;
            double d = std::stod(val, &used);
            if (used != val.size()) throw std::invalid_argument(val);
            parts.kv.emplace_back(key, d);
        } catch (const std::exception&) {
            throw std::invalid_argument("potential id: bad numeric value '" + val + "'");
        }
    }
    return parts;
}

}  // namespace

PotentialSpec parse_potential(const std::string& id, const Grid& grid) {
    IdParts parts = split_id(id);
    if (parts.family == "zero") return zero_potential();
    if (parts.family == "inverse_power")
        return inverse_power(parts.get("eps", 1.0), parts.get("mu", 1.0));
    if (parts.family == "gaussian_well") return gaussian_well(parts.get("eps", 1.0));
    if (parts.family == "resonant_well")
        return resonant_well(parts.get("eps", 1.0), parts.get("mu", 1.0),
                             parts.get("height", 1.0), parts.get("width", 2.0), grid);
    throw std::invalid_argument("unknown potential family '" + parts.family + "'");
}

SpecValidation validate_spec(const PotentialSpec& spec, const Grid& grid, int samples,
                             unsigned seed, double rel_tol) {
    SpecValidation out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-grid.half_extent, grid.half_extent);
    const int n = grid.dims;
    const double fd = 1e-5;

    // fourth-order stencils: second order is not enough near the steep edge
    // of a compactly supported bump
    auto diff4 = [fd](const std::function<double(double)>& f) {
        return (-f(2.0 * fd) + 8.0 * f(fd) - 8.0 * f(-fd) + f(-2.0 * fd)) / (12.0 * fd);
    };

    double worst = 0.0;
    std::ostringstream detail;
    for (int s = 0; s < samples; ++s) {
        double x[3] = {0, 0, 0};
        for (int d = 0; d < n; ++d) x[d] = unif(rng);

        // scale used to turn absolute mismatches into relative ones
        const double base = std::abs(spec.value(x, n)) + 1.0;

        // gradient, one axis at a time
        double grad[3] = {0, 0, 0};
        spec.gradient(x, n, grad);
        for (int d = 0; d < n; ++d) {
            const double fdg = diff4([&](double t) {
                double xs[3] = {x[0], x[1], x[2]};
                xs[d] += t;
                return spec.value(xs, n);
            });
            worst = std::max(worst, std::abs(grad[d] - fdg) / base);
        }

        auto dilated = [&](double t, double* xs) {
            const double e = std::exp(t);
            for (int d = 0; d < n; ++d) xs[d] = x[d] * e;
        };

        // euler1 via a radial (dilation) difference: d/ds V(e^s x) at s = 0
        {
            const double fde = diff4([&](double t) {
                double xs[3];
                dilated(t, xs);
                return spec.value(xs, n);
            });
            worst = std::max(worst, std::abs(spec.euler1(x, n) - fde) / base);
        }

        // euler2 is the dilation derivative of euler1
        {
            const double fde = diff4([&](double t) {
                double xs[3];
                dilated(t, xs);
                return spec.euler1(xs, n);
            });
            worst = std::max(worst, std::abs(spec.euler2(x, n) - fde) / base);
        }
    }
    out.max_rel_error = worst;

    // grid suprema of the ratios must not exceed a declared finite tail limit
    // (monotone approach from below is the normal case; small slack for the
    // resonant family whose bump perturbs the interior)
    double tail_slack = 0.0;
    if (spec.tail.finite) {
        double sup1 = 0.0, sup2 = 0.0;
        const std::int64_t total = grid.size();
        double x[3];
        for (std::int64_t i = 0; i < total; ++i) {
            grid.point(i, x);
            const double v = spec.value(x, n);
            if (v == 0.0) continue;
            sup1 = std::max(sup1, std::abs(spec.euler1(x, n) / v));
            sup2 = std::max(sup2, std::abs(spec.euler2(x, n) / v));
        }
        tail_slack = std::max(sup1 - spec.tail.euler1_limit, 0.0);
        if (spec.classification == PotentialClass::compliant && tail_slack > rel_tol)
            detail << "grid euler1 ratio " << sup1 << " exceeds declared tail "
                   << spec.tail.euler1_limit << "; ";
    }
    out.tail_slack = tail_slack;

    if (worst > rel_tol) detail << "callback/finite-difference mismatch " << worst;
    out.detail = detail.str();
    out.ok = out.detail.empty();
    return out;
}

}  // namespace laplab
