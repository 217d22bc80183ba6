#pragma once

#include <cstdint>
#include <utility>

#include "homq/dilation.hpp"

namespace homq {

// Controllable LTI plant (A, B). validated() enforces the Kalman rank
// condition numerically (singular values below 1e-9 * sigma_max are zero).
struct PlantModel {
    Matrix A;
    Matrix B;
    int n = 0;
    int m = 0;

    static PlantModel validated(Matrix A, Matrix B);
};

// Output of the homogenizing change of feedback: the minimum-norm solution of
//   A G0 + B Y0 = G0 A + A,   G0 B = 0,
// plus the derived quantities K0 = Y0 (G0 - I)^{-1}, A0 = A + B K0 (nilpotent)
// and the dilation generator Gd = I + mu G0.
struct HomogenizationResult {
    Matrix G0;
    Matrix Y0;
    Matrix K0;
    Matrix A0;
    Matrix Gd;
    double mu = -1.0;
    double residual_eq = 0.0;
    double residual_gb = 0.0;
};

HomogenizationResult solve_homogenization(const PlantModel& plant, double mu = -1.0);

struct LmiMargins {
    double mono;    // lambda_min(X Gd^T + Gd X)
    double posdef;  // lambda_min(X)
    double w;       // lambda_max(W) assembled from P = X^{-1}, K = Y X^{-1}
};

/// S-procedure block matrix
///   W = [A0^T P + P A0 + K^T B^T P + P B K + delta^2 tau P,  P B K;
///        K^T B^T P,                                          -tau P].
Matrix assemble_s_procedure(const Matrix& A0, const Matrix& B, const Matrix& P, const Matrix& K,
                            double delta, double tau);

/// Exact eigenvalue margins of a candidate pair (X, Y); pure report.
LmiMargins verify_lmi(const Matrix& A0, const Matrix& B, const Matrix& Gd, const Matrix& X,
                      const Matrix& Y, double delta, double tau);

/// Largest rho with W <= -rho * blkdiag(Gd^T P + P Gd, P); requires a
/// certified pair (margin_w < 0, margin_mono > 0), else throws NotCertified.
double compute_rho(const Matrix& A0, const Matrix& B, const Matrix& Gd, const Matrix& X,
                   const Matrix& Y, double delta, double tau);

// Synthesis output. X is normalized to trace(X) = n; scale carries no
// feasibility information (the constraints are jointly homogeneous in (X,Y))
// but does set the physical aggressiveness of the quantized loop, see
// rescale_certificate().
struct GainCertificate {
    Matrix X;
    Matrix Y;
    Matrix K;  // Y X^{-1}
    Matrix P;  // X^{-1}
    double delta = 0.0;
    double tau = 0.0;
    double margin_mono = 0.0;
    double margin_posdef = 0.0;
    double margin_w = 0.0;
    double rho = 0.0;
};

struct SolveOptions {
    int max_iters = 50000;
    int restarts = 5;
    std::uint64_t seed = 0;
    double target_margin = 1e-4;  // per-constraint margin the solver aims for
    bool maximize_decay = true;   // bisect the certified decay rate upward
    bool tau_grid = true;         // coarse tau search when the default fails
};

/// Feasibility solve of the quantized-feedback LMI for fixed delta and tau
/// (tau <= 0 selects the default 1/delta). Throws Infeasible with the best
/// margin found when the budget runs out.
GainCertificate solve_gain_lmi(const Matrix& A0, const Matrix& B, const Matrix& Gd, double delta,
                               double tau = 0.0, const SolveOptions& opts = {});

/// Pair (X, Y) for the unquantized baseline: the equality
///   X A0^T + A0 X + Y^T B^T + B Y + rho (X Gd^T + Gd X) = 0
/// restricted to its exact solution space, with X > 0 and X Gd^T + Gd X > 0.
std::pair<Matrix, Matrix> solve_baseline_lmi(const Matrix& A0, const Matrix& B, const Matrix& Gd,
                                             double rho, const SolveOptions& opts = {});

/// Certificate with (X, Y) scaled by factor > 0; margins and rho recomputed.
GainCertificate rescale_certificate(const GainCertificate& cert, const Matrix& A0,
                                    const Matrix& B, const Matrix& Gd, double factor);

/// Scale factor that places the certified settling bound ||x0||_d / rho at
/// t_target for the loop run from x0 (bisection; larger factors mean smaller
/// homogeneous norms and a more aggressive loop).
double auto_scale_factor(const GainCertificate& cert, const Matrix& Gd, const Vector& x0,
                         double t_target);

}  // namespace homq
