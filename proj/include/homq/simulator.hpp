#pragma once

#include <optional>
#include <vector>

#include "homq/quantizer.hpp"
#include "homq/synthesis.hpp"

namespace homq {

enum class PerturbationKind { none, matched_sinusoid, matched_constant, mismatched_table };

// Additive disturbance g(t,x). Matched kinds push amplitude-scaled signals
// through the input channel; the table kind interpolates sampled vectors.
// kappa_budget is the disturbance budget kappa of the matched sufficient
// condition ||B gamma||_P <= beta kappa; it is checked along the run and
// reported, never assumed.
struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::none;
    double amplitude = 0.0;
    double kappa_budget = 0.0;
    std::vector<double> table_times;
    std::vector<Vector> table_values;

    Vector evaluate(const Matrix& B, double t, const Vector& x) const;
};

enum class HoldMode { continuous, sample_and_hold };

// Everything one closed-loop run needs. The dilation weight, the quantizer
// weight and the certificate weight must be the same matrix.
struct SimulationConfig {
    Matrix A;
    Matrix B;
    Matrix K;
    Dilation dilation;
    SphericalQuantizer quantizer;
    Vector x0;

    double t_end = 20.0;
    double h = 1e-4;
    double eps_dead_rel = 1e-6;     // deadband on ||x||_d, relative to ||x0||_d
    double settle_threshold = 0.02;  // relative homogeneous-norm level
    double dwell = 0.5;              // seconds the level must hold
    HoldMode hold = HoldMode::continuous;
    double sample_period = 1e-2;
    PerturbationSpec perturbation;
    double divergence_limit = 1e9;

    SimulationConfig(Matrix A_, Matrix B_, Matrix K_, Dilation d, SphericalQuantizer q, Vector x0_);
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> controls;
    std::vector<std::int64_t> seed_codes;
    int code_bits = 0;  // payload width of an encoded seed code
    std::vector<double> hom_norm;
    std::vector<double> lyap_rate;    // 5-point centered d||x||_d/dt, NaN at ends
    std::vector<double> pert_margin;  // NaN inside the deadband
    std::optional<double> settling_time;
    double max_pert_margin = 0.0;
    double max_kappa_observed = 0.0;  // max ||g||_P / beta along the run
    bool kappa_within_budget = true;
};

/// Right-hand side A x + B K q(x) + g(t,x); u = 0 inside the deadband.
Vector closed_loop_rhs(const SimulationConfig& cfg, double t, const Vector& x);

/// Fixed-step classical Runge-Kutta with per-stage control evaluation
/// (continuous mode) or control frozen over sample_period (sample-and-hold).
/// Throws Divergence when the state norm passes divergence_limit.
Trajectory integrate(const SimulationConfig& cfg);

/// The disturbance-gain functional of the robustness condition, evaluated at
/// one state. Throws InvalidInput inside the deadband.
double perturbation_margin(const SimulationConfig& cfg, double t, const Vector& x);

struct LyapunovReport {
    double median_rate = 0.0;
    // fraction of evaluated samples with rate > -(rho - kappa) + tol
    double violation_fraction = 0.0;
    // fraction with rate > tol (monotone-decrease violations)
    double nonincrease_fraction = 0.0;
    int samples = 0;
};

/// Finite-difference decay statistics of the homogeneous norm over the
/// samples above band_level (default: settle_threshold * ||x0||_d, i.e. the
/// chattering band is excluded). Throws InvalidInput when fewer than five
/// samples qualify.
LyapunovReport lyapunov_report(const Trajectory& traj, double rho, double kappa = 0.0,
                               double band_level = -1.0, double tol = 1e-9);

}  // namespace homq
