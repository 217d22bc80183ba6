#pragma once

#include <Eigen/Dense>

#include "homq/errors.hpp"

namespace homq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// e^M for a square real matrix (scaling-and-squaring, Pade approximant).
/// Relative accuracy better than 1e-12 for moderately conditioned M with
/// norm up to ~50. Throws InvalidInput on non-finite entries.
Matrix matrix_exponential(const Matrix& M);

/// Symmetric positive square root of an SPD matrix (eigendecomposition).
Matrix spd_sqrt(const Matrix& P);

struct MonotonicityReport {
    bool ok;      // lambda_min(P G + G^T P) > 0
    double beta;  // 0.5 * lambda_min(P^{1/2} G P^{-1/2} + P^{-1/2} G^T P^{1/2})
};

/// Checks strict monotonicity of the dilation generated by G with respect to
/// the weighted norm sqrt(x^T P x). Throws InvalidInput when P is not SPD.
MonotonicityReport check_monotonicity(const Matrix& G, const Matrix& P);

/// Value of the canonical homogeneous norm together with its logarithm.
/// log_value is -inf exactly when value == 0 (the origin).
struct HomNorm {
    double value;
    double log_value;
    bool is_zero() const { return value == 0.0; }
};

// A linear dilation s -> e^{sG} that is strictly monotone with respect to
// the weighted Euclidean norm sqrt(x^T P x). Immutable after construction;
// all member operations are pure and thread-safe.
//
// Construction validates:
//   * P symmetric positive definite,
//   * P G + G^T P positive definite (monotonicity),
//   * all eigenvalues of G in the open right half plane (anti-Hurwitz).
//
// When the generator is diagonalizable with a well-conditioned eigenbasis,
// e^{sG} is evaluated through the cached spectral factorization; otherwise
// every evaluation falls back to the dense matrix exponential.
class Dilation {
  public:
    Dilation(Matrix generator, Matrix weight, double zero_tol = 1e-12);

    int dim() const { return static_cast<int>(generator_.rows()); }
    const Matrix& generator() const { return generator_; }
    const Matrix& weight() const { return weight_; }
    const Matrix& weight_sqrt() const { return weight_sqrt_; }
    const Matrix& weight_sqrt_inv() const { return weight_sqrt_inv_; }
    double beta() const { return beta_; }
    double zero_tolerance() const { return zero_tol_; }

    /// The matrix e^{sG}.
    Matrix matrix(double s) const;

    /// d(s) x = e^{sG} x.
    Vector apply(double s, const Vector& x) const;

    /// sqrt(x^T P x).
    double weighted_norm(const Vector& x) const;

    /// True when x is numerically indistinguishable from the origin.
    bool near_origin(const Vector& x) const;

    /// Canonical homogeneous norm: the unique e^s with ||d(-s)x||_P = 1,
    /// solved to |...-1| <= 1e-12 by bracketing + safeguarded Newton/bisection.
    /// s_hint seeds the bracket (pass the previous solution on slowly varying
    /// inputs). Returns {0, -inf} at the origin.
    HomNorm canonical_norm(const Vector& x,
                           double s_hint = std::numeric_limits<double>::quiet_NaN()) const;

    /// Gradient of the canonical norm (row vector). Undefined at the origin.
    RowVector canonical_norm_gradient(const Vector& x) const;

    /// pi_d(x) = d(-ln||x||_d) x, a point of the P-unit sphere.
    /// Undefined at the origin.
    Vector projector(const Vector& x) const;

  private:
    Matrix generator_;
    Matrix weight_;
    Matrix weight_sqrt_;
    Matrix weight_sqrt_inv_;
    double beta_;
    double zero_tol_;

    // spectral cache (empty when the generator is defective / ill-conditioned)
    bool spectral_ = false;
    Eigen::MatrixXcd evec_;
    Eigen::MatrixXcd evec_inv_;
    Eigen::VectorXcd eval_;
};

}  // namespace homq
