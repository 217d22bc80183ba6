#include "homq/simulator.hpp"

#include <algorithm>
#include <cmath>

namespace homq {

namespace {
const double kNan = std::numeric_limits<double>::quiet_NaN();
}

Vector PerturbationSpec::evaluate(const Matrix& B, double t, const Vector& x) const {
    switch (kind) {
        case PerturbationKind::none:
            return Vector::Zero(B.rows());
        case PerturbationKind::matched_sinusoid:
            return B * Vector::Constant(B.cols(), amplitude * std::sin(t));
        case PerturbationKind::matched_constant:
            return B * Vector::Constant(B.cols(), amplitude);
        case PerturbationKind::mismatched_table: {
            if (table_times.empty()) return Vector::Zero(B.rows());
            if (table_times.size() != table_values.size())
                throw InvalidInput("PerturbationSpec: table size mismatch");
            auto it = std::lower_bound(table_times.begin(), table_times.end(), t);
            if (it == table_times.begin()) return table_values.front();
            if (it == table_times.end()) return table_values.back();
            size_t hi = static_cast<size_t>(it - table_times.begin());
            double t0 = table_times[hi - 1], t1 = table_times[hi];
            double w = (t - t0) / (t1 - t0);
            return (1.0 - w) * table_values[hi - 1] + w * table_values[hi];
        }
    }
    (void)x;
    return Vector::Zero(B.rows());
}

SimulationConfig::SimulationConfig(Matrix A_, Matrix B_, Matrix K_, Dilation d, SphericalQuantizer q,
                                   Vector x0_)
    : A(std::move(A_)),
      B(std::move(B_)),
      K(std::move(K_)),
      dilation(std::move(d)),
      quantizer(std::move(q)),
      x0(std::move(x0_)) {
    const auto n = A.rows();
    if (A.cols() != n || B.rows() != n || K.cols() != n || K.rows() != B.cols() || x0.size() != n)
        throw InvalidInput("SimulationConfig: dimension mismatch");
    if (dilation.dim() != n || quantizer.dim() != n)
        throw InvalidInput("SimulationConfig: dilation/quantizer dimension mismatch");
    if (!quantizer.weight().isApprox(dilation.weight(), 1e-10))
        throw InvalidInput("SimulationConfig: certificate and quantizer weights disagree");
}

namespace {

// Per-run control evaluator; carries the warm-start hint for the implicit
// norm equation across stage evaluations.
struct ControlEval {
    const SimulationConfig& cfg;
    double eps_dead_abs;
    double hint = kNan;

    struct Result {
        Vector u;
        std::int64_t code;
        HomNorm norm;
    };

    Result operator()(const Vector& x) {
        auto sample = cfg.quantizer.quantize(cfg.dilation, x, hint);
        if (std::isfinite(sample.norm.log_value)) hint = sample.norm.log_value;
        Result r;
        r.norm = sample.norm;
        if (sample.norm.value < eps_dead_abs || sample.code == 0) {
            r.u = Vector::Zero(cfg.K.rows());
            r.code = 0;
        } else {
            r.u = cfg.K * sample.seed;
            r.code = sample.code;
        }
        return r;
    }
};

double deadband_abs(const SimulationConfig& cfg) {
    double hn0 = cfg.dilation.canonical_norm(cfg.x0).value;
    double floor_tol = cfg.dilation.zero_tolerance();
    return std::max(cfg.eps_dead_rel * hn0, floor_tol);
}

}  // namespace

Vector closed_loop_rhs(const SimulationConfig& cfg, double t, const Vector& x) {
    ControlEval eval{cfg, deadband_abs(cfg)};
    Vector g = cfg.perturbation.evaluate(cfg.B, t, x);
    return cfg.A * x + cfg.B * eval(x).u + g;
}

double perturbation_margin(const SimulationConfig& cfg, double t, const Vector& x) {
    double eps = deadband_abs(cfg);
    HomNorm hn = cfg.dilation.canonical_norm(x);
    if (hn.value < eps) throw InvalidInput("perturbation_margin: undefined inside the deadband");
    Vector g = cfg.perturbation.evaluate(cfg.B, t, x);
    Vector v = cfg.dilation.apply(-hn.log_value, x);
    Vector gv = cfg.dilation.apply(-hn.log_value, g);
    const Matrix& P = cfg.dilation.weight();
    double denom = v.dot(P * (cfg.dilation.generator() * v));
    return hn.value * v.dot(P * gv) / denom;
}

Trajectory integrate(const SimulationConfig& cfg) {
    if (!(cfg.h > 0.0) || !(cfg.t_end > 0.0)) throw InvalidInput("integrate: h and t_end must be positive");
    if (!cfg.x0.allFinite()) throw InvalidInput("integrate: non-finite initial state");

    const auto steps = static_cast<std::int64_t>(std::llround(cfg.t_end / cfg.h));
    if (steps < 1) throw InvalidInput("integrate: horizon shorter than one step");

    Trajectory traj;
    traj.code_bits = cfg.quantizer.bits();
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    traj.controls.reserve(steps + 1);
    traj.seed_codes.reserve(steps + 1);
    traj.hom_norm.reserve(steps + 1);
    traj.pert_margin.reserve(steps + 1);

    ControlEval eval{cfg, deadband_abs(cfg)};
    const Matrix& P = cfg.dilation.weight();
    const Matrix& G = cfg.dilation.generator();
    double max_margin = -std::numeric_limits<double>::infinity();
    bool any_margin = false;
    double max_kappa = 0.0;

    const std::int64_t hold_steps =
        cfg.hold == HoldMode::sample_and_hold
            ? std::max<std::int64_t>(1, std::llround(cfg.sample_period / cfg.h))
            : 1;
    Vector held_u = Vector::Zero(cfg.K.rows());
    std::int64_t held_code = 0;

    Vector x = cfg.x0;
    for (std::int64_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * cfg.h;
        if (x.lpNorm<Eigen::Infinity>() > cfg.divergence_limit)
            throw Divergence("integrate: state norm exceeded the divergence limit");

        auto head = eval(x);
        if (cfg.hold == HoldMode::sample_and_hold && k % hold_steps == 0) {
            held_u = head.u;
            held_code = head.code;
        }
        const Vector& u_rec = cfg.hold == HoldMode::sample_and_hold ? held_u : head.u;
        const std::int64_t code_rec = cfg.hold == HoldMode::sample_and_hold ? held_code : head.code;

        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.controls.push_back(u_rec);
        traj.seed_codes.push_back(code_rec);
        traj.hom_norm.push_back(head.norm.value);

        // robustness functional along the run
        Vector g = cfg.perturbation.evaluate(cfg.B, t, x);
        if (cfg.perturbation.kind != PerturbationKind::none) {
            double gn = std::sqrt(g.dot(P * g));
            max_kappa = std::max(max_kappa, gn / cfg.dilation.beta());
        }
        if (head.norm.value >= eval.eps_dead_abs && head.code != 0) {
            Vector v = cfg.dilation.apply(-head.norm.log_value, x);
            Vector gv = cfg.dilation.apply(-head.norm.log_value, g);
            double margin = head.norm.value * v.dot(P * gv) / v.dot(P * (G * v));
            traj.pert_margin.push_back(margin);
            max_margin = std::max(max_margin, margin);
            any_margin = true;
        } else {
            traj.pert_margin.push_back(kNan);
        }

        if (k == steps) break;

        auto rhs = [&](double ts, const Vector& xs, const Vector& us) -> Vector {
            return cfg.A * xs + cfg.B * us + cfg.perturbation.evaluate(cfg.B, ts, xs);
        };
        Vector k1, k2, k3, k4;
        if (cfg.hold == HoldMode::sample_and_hold) {
            k1 = rhs(t, x, held_u);
            k2 = rhs(t + 0.5 * cfg.h, x + 0.5 * cfg.h * k1, held_u);
            k3 = rhs(t + 0.5 * cfg.h, x + 0.5 * cfg.h * k2, held_u);
            k4 = rhs(t + cfg.h, x + cfg.h * k3, held_u);
        } else {
            k1 = rhs(t, x, head.u);
            k2 = rhs(t + 0.5 * cfg.h, x + 0.5 * cfg.h * k1, eval(x + 0.5 * cfg.h * k1).u);
            k3 = rhs(t + 0.5 * cfg.h, x + 0.5 * cfg.h * k2, eval(x + 0.5 * cfg.h * k2).u);
            k4 = rhs(t + cfg.h, x + cfg.h * k3, eval(x + cfg.h * k3).u);
        }
        x += cfg.h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    traj.max_pert_margin = any_margin ? max_margin : 0.0;
    traj.max_kappa_observed = max_kappa;
    traj.kappa_within_budget = cfg.perturbation.kind == PerturbationKind::none ||
                               cfg.perturbation.kappa_budget <= 0.0 ||
                               max_kappa <= cfg.perturbation.kappa_budget * (1.0 + 1e-9);

    // 5-point centered rate of the homogeneous norm
    const auto count = traj.hom_norm.size();
    traj.lyap_rate.assign(count, kNan);
    for (size_t k = 2; k + 2 < count; ++k) {
        traj.lyap_rate[k] = (-traj.hom_norm[k + 2] + 8.0 * traj.hom_norm[k + 1] -
                             8.0 * traj.hom_norm[k - 1] + traj.hom_norm[k - 2]) /
                            (12.0 * cfg.h);
    }

    // settling: earliest time from which the trace stays under the threshold
    // for the rest of the horizon, provided at least one dwell window fits
    double thr = cfg.settle_threshold * traj.hom_norm.front();
    std::int64_t last_above = -1;
    for (std::int64_t k = static_cast<std::int64_t>(count) - 1; k >= 0; --k)
        if (traj.hom_norm[static_cast<size_t>(k)] > thr) {
            last_above = k;
            break;
        }
    std::int64_t first_ok = last_above + 1;
    if (first_ok < static_cast<std::int64_t>(count) &&
        cfg.t_end - traj.times[static_cast<size_t>(first_ok)] >= cfg.dwell - 1e-12)
        traj.settling_time = traj.times[static_cast<size_t>(first_ok)];

    return traj;
}

LyapunovReport lyapunov_report(const Trajectory& traj, double rho, double kappa, double band_level,
                               double tol) {
    if (traj.hom_norm.size() < 5) throw InvalidInput("lyapunov_report: trajectory too short");
    if (band_level < 0.0) band_level = 0.02 * traj.hom_norm.front();

    std::vector<double> rates;
    rates.reserve(traj.hom_norm.size());
    for (size_t k = 0; k < traj.hom_norm.size(); ++k) {
        if (!std::isfinite(traj.lyap_rate[k])) continue;
        if (traj.hom_norm[k] <= band_level) continue;
        rates.push_back(traj.lyap_rate[k]);
    }
    if (rates.size() < 5) throw InvalidInput("lyapunov_report: not enough samples above the band");

    LyapunovReport report;
    report.samples = static_cast<int>(rates.size());
    double threshold = -(rho - kappa) + tol;
    size_t violations = 0, increases = 0;
    for (double r : rates) {
        if (r > threshold) ++violations;
        if (r > tol) ++increases;
    }
    report.violation_fraction = static_cast<double>(violations) / static_cast<double>(rates.size());
    report.nonincrease_fraction = static_cast<double>(increases) / static_cast<double>(rates.size());
    std::nth_element(rates.begin(), rates.begin() + rates.size() / 2, rates.end());
    report.median_rate = rates[rates.size() / 2];
    return report;
}

}  // namespace homq
