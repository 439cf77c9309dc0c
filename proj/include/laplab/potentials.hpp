#pragma once

#include <functional>
#include <string>

#include "laplab/grid.hpp"

namespace laplab {

enum class PotentialClass { compliant, fails_condition_i, fails_condition_ii, resonant, degenerate };

const char* to_string(PotentialClass c);

// Closed-form limits of |x.grad V| / (-V) and |E(E V)| / (-V) as |x| -> infinity.
struct TailConstants {
    bool finite = false;
    double euler1_limit = 0.0;
    double euler2_limit = 0.0;
};

// A potential is a bundle of analytic callbacks evaluated at arbitrary points
// (not only grid nodes). euler1 = x.grad V, euler2 = E(E V) with E = sum x_j d_j.
struct PotentialSpec {
    std::string id;
    int dims_hint = 0;  // 0 = any
    std::function<double(const double* x, int n)> value;
    std::function<void(const double* x, int n, double* out)> gradient;
    std::function<double(const double* x, int n)> euler1;
    std::function<double(const double* x, int n)> euler2;
    // profile driving the weighted norms; empty = use `value`. Families whose V
    // is not everywhere negative substitute a strictly negative proxy here so
    // the weighted diagnostics stay defined (and comparable across the family).
    std::function<double(const double* x, int n)> weight;
    TailConstants tail;
    PotentialClass classification = PotentialClass::compliant;
    bool strictly_negative = false;  // V < 0 everywhere (weights usable)
};

PotentialSpec zero_potential();
PotentialSpec inverse_power(double strength, double exponent);  // -eps (1+|x|^2)^(-mu/2)
PotentialSpec gaussian_well(double strength);                   // -eps exp(-|x|^2)
PotentialSpec scaled(const PotentialSpec& base, double alpha);  // alpha * V, alpha > 0

struct ResonantCalibration {
    double lift = 0.0;         // calibrated interior lift amplitude
    double eigenvalue = 0.0;   // eigenvalue pinned near zero
    double spacing = 0.0;      // local level-spacing estimate; target window is spacing/10
    double overlap = 0.0;      // best probe coupling |<f, u>|^2 / ||f||_weight^2
    double crater_mass = 0.0;  // pinned-state mass inside the ring
    int crossing_index = 0;    // 0-based index of the accepted level crossing
    int bisection_steps = 0;
};

// Base well with a positive compactly supported ring (the ring breaks V <= 0
// on purpose) and an interior lift whose amplitude is bisected until an
// eigenvalue of H sits within +-spacing/10 of zero and couples to the probe
// Gaussians. Throws std::runtime_error when no such crossing exists.
PotentialSpec resonant_well(double strength, double exponent, double bump_height,
                            double bump_width, const Grid& grid,
                            ResonantCalibration* info = nullptr);

// Registry ids: "zero", "inverse_power:eps=1,mu=1", "gaussian_well:eps=1",
// "resonant_well:eps=1,mu=1,height=1,width=2".
PotentialSpec parse_potential(const std::string& id, const Grid& grid);

struct SpecValidation {
    bool ok = false;
    double max_rel_error = 0.0;   // worst callback-vs-finite-difference mismatch
    double tail_slack = 0.0;      // grid sup minus tail limit (finite tails only)
    std::string detail;
};

// Cross-checks gradient/euler1/euler2 callbacks against finite differences of
// the value callback at random points in the box, and grid suprema against the
// declared tail constants.
SpecValidation validate_spec(const PotentialSpec& spec, const Grid& grid,
                             int samples = 50, unsigned seed = 20260815u,
                             double rel_tol = 1e-6);

}  // namespace laplab
