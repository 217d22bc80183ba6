#include "homq/dilation.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>

namespace homq {

namespace {

bool all_finite(const Matrix& M) { return M.allFinite(); }

constexpr double kNormTol = 1e-12;  // |  ||d(-s)x||_P - 1  | target

}  // namespace

Matrix matrix_exponential(const Matrix& M) {
    if (M.rows() != M.cols()) throw InvalidInput("matrix_exponential: matrix must be square");
    if (!all_finite(M)) throw InvalidInput("matrix_exponential: non-finite entries");
    return M.exp();
}

Matrix spd_sqrt(const Matrix& P) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(P);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
        throw InvalidInput("spd_sqrt: matrix is not symmetric positive definite");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

MonotonicityReport check_monotonicity(const Matrix& G, const Matrix& P) {
    if (G.rows() != G.cols() || P.rows() != P.cols() || G.rows() != P.rows())
        throw InvalidInput("check_monotonicity: dimension mismatch");
    if (!all_finite(G) || !all_finite(P)) throw InvalidInput("check_monotonicity: non-finite input");
    if (!P.isApprox(P.transpose(), 1e-10))
        throw InvalidInput("check_monotonicity: weight is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> esP(P);
    if (esP.eigenvalues().minCoeff() <= 0.0)
        throw InvalidInput("check_monotonicity: weight is not positive definite");

    Matrix ph = esP.eigenvectors() * esP.eigenvalues().cwiseSqrt().asDiagonal() *
                esP.eigenvectors().transpose();
    Matrix phi = esP.eigenvectors() * esP.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                 esP.eigenvectors().transpose();

    Matrix sym = P * G + G.transpose() * P;
    double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (sym + sym.transpose()))
                      .eigenvalues()
                      .minCoeff();

    Matrix balanced = ph * G * phi + phi * G.transpose() * ph;
    double beta = 0.5 * Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (balanced + balanced.transpose()))
                            .eigenvalues()
                            .minCoeff();
    return {lmin > 0.0, beta};
}

Dilation::Dilation(Matrix generator, Matrix weight, double zero_tol)
    : generator_(std::move(generator)), weight_(std::move(weight)), zero_tol_(zero_tol) {
    const auto n = generator_.rows();
    if (n == 0 || generator_.cols() != n || weight_.rows() != n || weight_.cols() != n)
        throw InvalidInput("Dilation: dimension mismatch");
    if (!all_finite(generator_) || !all_finite(weight_))
        throw InvalidInput("Dilation: non-finite input");

    auto report = check_monotonicity(generator_, weight_);
    if (!report.ok || report.beta <= 0.0)
        throw InvalidInput("Dilation: generator is not strictly monotone for this weight");
    beta_ = report.beta;

    Eigen::EigenSolver<Matrix> eg(generator_);
    if (eg.eigenvalues().real().minCoeff() <= 0.0)
        throw InvalidInput("Dilation: generator must be anti-Hurwitz");

    weight_sqrt_ = spd_sqrt(weight_);
    weight_sqrt_inv_ = weight_sqrt_.inverse();

    // Spectral cache: only used when V is well conditioned and reproduces G.
    Eigen::MatrixXcd V = eg.eigenvectors();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(V);
    if (lu.isInvertible()) {
        Eigen::MatrixXcd Vi = lu.inverse();
        Eigen::MatrixXcd rebuilt = V * eg.eigenvalues().asDiagonal() * Vi;
        double err = (rebuilt.real() - generator_).norm() + rebuilt.imag().norm();
        double cond = V.norm() * Vi.norm();
        if (err <= 1e-12 * (1.0 + generator_.norm()) && cond < 1e7) {
            spectral_ = true;
            evec_ = std::move(V);
            evec_inv_ = std::move(Vi);
            eval_ = eg.eigenvalues();
        }
    }
}

Matrix Dilation::matrix(double s) const {
    if (!std::isfinite(s)) throw InvalidInput("Dilation::matrix: non-finite scale");
    if (spectral_) {
        Eigen::MatrixXcd D = (s * eval_.array()).exp().matrix().asDiagonal();
        return (evec_ * D * evec_inv_).real();
    }
    return matrix_exponential(s * generator_);
}

Vector Dilation::apply(double s, const Vector& x) const {
    if (!std::isfinite(s) || !x.allFinite()) throw InvalidInput("Dilation::apply: non-finite input");
    if (spectral_) {
        Eigen::VectorXcd w = evec_inv_ * x.cast<std::complex<double>>();
        w.array() *= (s * eval_.array()).exp();
        return (evec_ * w).real();
    }
    return matrix_exponential(s * generator_) * x;
}

double Dilation::weighted_norm(const Vector& x) const {
    return std::sqrt(x.dot(weight_ * x));
}

bool Dilation::near_origin(const Vector& x) const {
    double mag = x.lpNorm<Eigen::Infinity>();
    return mag <= zero_tol_ * (1.0 + mag);
}

HomNorm Dilation::canonical_norm(const Vector& x, double s_hint) const {
    if (!x.allFinite()) throw InvalidInput("canonical_norm: non-finite input");
    if (near_origin(x)) return {0.0, -std::numeric_limits<double>::infinity()};

    // residual of the implicit equation at log-scale s
    auto residual = [&](double s) { return weighted_norm(apply(-s, x)) - 1.0; };

    double s0 = std::isfinite(s_hint) ? s_hint : std::log(weighted_norm(x));
    double r0 = residual(s0);
    if (std::abs(r0) <= kNormTol) return {std::exp(s0), s0};

    // Bracket by doubling: residual is strictly decreasing in s.
    double lo, hi, rlo, rhi;
    double step = 1.0;
    if (r0 > 0.0) {
        lo = s0;
        rlo = r0;
        hi = s0 + step;
        while ((rhi = residual(hi)) > 0.0) {
            lo = hi;
            rlo = rhi;
            step *= 2.0;
            hi = s0 + step;
            if (step > 1e8) throw InvalidInput("canonical_norm: bracketing failed");
        }
    } else {
        hi = s0;
        rhi = r0;
        lo = s0 - step;
        while ((rlo = residual(lo)) < 0.0) {
            hi = lo;
            rhi = rlo;
            step *= 2.0;
            lo = s0 - step;
            if (step > 1e8) throw InvalidInput("canonical_norm: bracketing failed");
        }
    }
    if (std::abs(rlo) <= kNormTol) return {std::exp(lo), lo};
    if (std::abs(rhi) <= kNormTol) return {std::exp(hi), hi};

    // Safeguarded Newton inside the bracket; bisection whenever the Newton
    // step leaves it. d/ds ||d(-s)x||_P = -v^T P G v / ||v||_P < 0.
    double s = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        Vector v = apply(-s, x);
        double nv = std::sqrt(v.dot(weight_ * v));
        double r = nv - 1.0;
        if (std::abs(r) <= kNormTol) return {std::exp(s), s};
        if (r > 0.0)
            lo = s;
        else
            hi = s;
        double slope = -v.dot(weight_ * (generator_ * v)) / nv;
        double snext = s - r / slope;
        if (!(snext > lo && snext < hi)) snext = 0.5 * (lo + hi);
        if (hi - lo < 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(s))) {
            s = 0.5 * (lo + hi);
            return {std::exp(s), s};
        }
        s = snext;
    }
    return {std::exp(s), s};
}

RowVector Dilation::canonical_norm_gradient(const Vector& x) const {
    if (near_origin(x)) throw InvalidInput("canonical_norm_gradient: undefined at the origin");
    HomNorm hn = canonical_norm(x);
    Matrix D = matrix(-hn.log_value);
    Vector v = D * x;
    RowVector numer = hn.value * (v.transpose() * weight_ * D);
    double denom = v.dot(weight_ * (generator_ * v));
    return numer / denom;
}

Vector Dilation::projector(const Vector& x) const {
    if (near_origin(x)) throw InvalidInput("projector: undefined at the origin");
    HomNorm hn = canonical_norm(x);
    return apply(-hn.log_value, x);
}

}  // namespace homq
