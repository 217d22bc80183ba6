#include "homq/synthesis.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace homq {

namespace {

double lambda_min(const Matrix& S) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly)
        .eigenvalues()
        .minCoeff();
}

double lambda_max(const Matrix& S) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly)
        .eigenvalues()
        .maxCoeff();
}

Vector min_eigvec(const Matrix& S) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
    return es.eigenvectors().col(0);
}

Vector max_eigvec(const Matrix& S) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
    return es.eigenvectors().col(S.rows() - 1);
}

// Decision variables of the feasibility solves: a symmetric X and a dense Y,
// flattened over the canonical basis {E_k}. The constraint maps are linear in
// (X, Y), so exact directional derivatives come from evaluating the map on
// basis elements.
struct VariableBasis {
    int n, m;
    std::vector<Matrix> x_dirs;  // symmetric unit directions
    std::vector<Matrix> y_dirs;

    VariableBasis(int n_, int m_) : n(n_), m(m_) {
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                Matrix E = Matrix::Zero(n, n);
                E(i, j) = E(j, i) = 1.0;
                x_dirs.push_back(E);
            }
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                Matrix E = Matrix::Zero(m, n);
                E(i, j) = 1.0;
                y_dirs.push_back(E);
            }
    }
    int size() const { return static_cast<int>(x_dirs.size() + y_dirs.size()); }
};

// min(lambda_min(X), lambda_min(X Gd' + Gd X), -lambda_max(Wxy + rho * blk))
// as a concave function of (X, Y); subgradient from the active eigenpair.
struct QuantizedLmiProblem {
    const Matrix &A0, &B, &Gd;
    double delta, tau, rho;

    Matrix wxy(const Matrix& X, const Matrix& Y) const {
        const auto n = A0.rows();
        Matrix top = X * A0.transpose() + A0 * X + Y.transpose() * B.transpose() + B * Y +
                     delta * delta * tau * X;
        Matrix W(2 * n, 2 * n);
        W.topLeftCorner(n, n) = top;
        W.topRightCorner(n, n) = B * Y;
        W.bottomLeftCorner(n, n) = Y.transpose() * B.transpose();
        W.bottomRightCorner(n, n) = -tau * X;
        return 0.5 * (W + W.transpose());
    }
    Matrix shifted(const Matrix& X, const Matrix& Y) const {
        const auto n = A0.rows();
        Matrix S = wxy(X, Y);
        if (rho != 0.0) {
            Matrix mono = X * Gd.transpose() + Gd * X;
            S.topLeftCorner(n, n) += rho * mono;
            S.bottomRightCorner(n, n) += rho * X;
        }
        return S;
    }

    double margin(const Matrix& X, const Matrix& Y) const {
        double f1 = lambda_min(X);
        double f2 = lambda_min(X * Gd.transpose() + Gd * X);
        double f3 = -lambda_max(shifted(X, Y));
        return std::min({f1, f2, f3});
    }

    void subgradient(const Matrix& X, const Matrix& Y, const VariableBasis& basis, Matrix& gX,
                     Matrix& gY) const {
        double f1 = lambda_min(X);
        double f2 = lambda_min(X * Gd.transpose() + Gd * X);
        double f3 = -lambda_max(shifted(X, Y));
        gX.setZero();
        gY.setZero();
        if (f1 <= f2 && f1 <= f3) {
            Vector v = min_eigvec(X);
            gX = v * v.transpose();
        } else if (f2 <= f3) {
            Vector v = min_eigvec(X * Gd.transpose() + Gd * X);
            gX = Gd.transpose() * v * v.transpose() + v * v.transpose() * Gd;
        } else {
            Vector v = max_eigvec(shifted(X, Y));
            for (size_t k = 0; k < basis.x_dirs.size(); ++k) {
                double g = -v.dot(shiftedLinearX(basis.x_dirs[k]) * v);
                accumulate(gX, basis.x_dirs[k], g);
            }
            for (size_t k = 0; k < basis.y_dirs.size(); ++k) {
                double g = -v.dot(shiftedLinearY(basis.y_dirs[k]) * v);
                accumulate(gY, basis.y_dirs[k], g);
            }
        }
    }

    Matrix shiftedLinearX(const Matrix& E) const {
        const auto n = A0.rows();
        Matrix top = E * A0.transpose() + A0 * E + delta * delta * tau * E;
        Matrix W = Matrix::Zero(2 * n, 2 * n);
        W.topLeftCorner(n, n) = top;
        W.bottomRightCorner(n, n) = -tau * E;
        if (rho != 0.0) {
            W.topLeftCorner(n, n) += rho * (E * Gd.transpose() + Gd * E);
            W.bottomRightCorner(n, n) += rho * E;
        }
        return 0.5 * (W + W.transpose());
    }
    Matrix shiftedLinearY(const Matrix& E) const {
        const auto n = A0.rows();
        Matrix W = Matrix::Zero(2 * n, 2 * n);
        W.topLeftCorner(n, n) = E.transpose() * B.transpose() + B * E;
        W.topRightCorner(n, n) = B * E;
        W.bottomLeftCorner(n, n) = E.transpose() * B.transpose();
        return 0.5 * (W + W.transpose());
    }

    static void accumulate(Matrix& acc, const Matrix& dir, double g) {
        // unit-normalized direction step; dir entries are 0/1 patterns
        acc += g * dir / dir.squaredNorm();
    }
};

struct SubgradientResult {
    double margin = -std::numeric_limits<double>::infinity();
    Matrix X, Y;
};

SubgradientResult maximize_margin(const QuantizedLmiProblem& prob, Matrix X, Matrix Y,
                                  int max_iters, double target) {
    const auto n = X.rows();
    VariableBasis basis(static_cast<int>(n), static_cast<int>(Y.rows()));
    Matrix gX(n, n), gY(Y.rows(), Y.cols());
    SubgradientResult best;
    best.X = X;
    best.Y = Y;
    best.margin = prob.margin(X, Y);
    for (int k = 0; k < max_iters; ++k) {
        double f = prob.margin(X, Y);
        if (f > best.margin) {
            best.margin = f;
            best.X = X;
            best.Y = Y;
        }
        if (best.margin >= target) break;
        prob.subgradient(X, Y, basis, gX, gY);
        double gnorm = std::sqrt(gX.squaredNorm() + gY.squaredNorm());
        if (gnorm < 1e-14) break;
        double alpha = 0.5 / (gnorm * std::sqrt(static_cast<double>(k) + 1.0));
        X += alpha * gX;
        Y += alpha * gY;
        X = 0.5 * (X + X.transpose()).eval();
        double tr = X.trace();
        if (tr <= 1e-9) {
            X += Matrix::Identity(n, n);
            tr = X.trace();
        }
        double c = static_cast<double>(n) / tr;
        X *= c;
        Y *= c;
    }
    return best;
}

}  // namespace

PlantModel PlantModel::validated(Matrix A, Matrix B) {
    if (A.rows() != A.cols()) throw InvalidInput("PlantModel: A must be square");
    if (B.rows() != A.rows() || B.cols() < 1) throw InvalidInput("PlantModel: B shape mismatch");
    if (!A.allFinite() || !B.allFinite()) throw InvalidInput("PlantModel: non-finite entries");
    const auto n = A.rows();
    const auto m = B.cols();
    Matrix ctrb(n, n * m);
    Matrix block = B;
    for (Eigen::Index k = 0; k < n; ++k) {
        ctrb.middleCols(k * m, m) = block;
        block = A * block;
    }
    Eigen::JacobiSVD<Matrix> svd(ctrb);
    double smax = svd.singularValues()(0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-9 * smax) ++rank;
    if (smax <= 0.0 || rank < n) throw InvalidInput("PlantModel: (A,B) is not controllable");
    return {std::move(A), std::move(B), static_cast<int>(n), static_cast<int>(m)};
}

HomogenizationResult solve_homogenization(const PlantModel& plant, double mu) {
    if (!(mu >= -1.0 && mu < 0.0)) throw InvalidInput("solve_homogenization: mu must be in [-1,0)");
    const int n = plant.n;
    const int m = plant.m;
    const Matrix& A = plant.A;
    const Matrix& B = plant.B;
    const Matrix In = Matrix::Identity(n, n);

    // Vectorized least squares over (vec G0, vec Y0), column-major.
    Matrix M(n * n + n * m, n * n + m * n);
    M.setZero();
    M.topLeftCorner(n * n, n * n) =
        Eigen::kroneckerProduct(In, A).eval() - Eigen::kroneckerProduct(A.transpose(), In).eval();
    M.topRightCorner(n * n, m * n) = Eigen::kroneckerProduct(In, B).eval();
    M.bottomLeftCorner(n * m, n * n) = Eigen::kroneckerProduct(B.transpose(), In).eval();

    Vector rhs(n * n + n * m);
    rhs.setZero();
    rhs.head(n * n) = Eigen::Map<const Vector>(A.data(), n * n);

    // Minimum-norm least-squares solution.
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(M);
    Vector sol = cod.solve(rhs);

    HomogenizationResult r;
    r.mu = mu;
    r.G0 = Eigen::Map<const Matrix>(sol.data(), n, n);
    r.Y0 = Eigen::Map<const Matrix>(sol.data() + n * n, m, n);
    r.residual_eq = (A * r.G0 + B * r.Y0 - r.G0 * A - A).norm();
    r.residual_gb = (r.G0 * B).norm();
    if (r.residual_eq > 1e-9 * (1.0 + A.norm()) || r.residual_gb > 1e-9 * (1.0 + B.norm()))
        throw InvalidInput("solve_homogenization: no solution (residual too large)");

    Matrix shift = r.G0 - In;
    Eigen::FullPivLU<Matrix> lu(shift);
    if (!lu.isInvertible()) throw InvalidInput("solve_homogenization: G0 - I is singular");
    r.K0 = r.Y0 * lu.inverse();
    r.A0 = A + B * r.K0;
    r.Gd = In + mu * r.G0;

    Matrix power = r.A0;
    for (int k = 1; k < n; ++k) power = r.A0 * power;
    if (power.norm() > 1e-9 * (1.0 + std::pow(r.A0.norm(), n)))
        throw InvalidInput("solve_homogenization: homogenized matrix is not nilpotent");
    return r;
}

Matrix assemble_s_procedure(const Matrix& A0, const Matrix& B, const Matrix& P, const Matrix& K,
                            double delta, double tau) {
    const auto n = A0.rows();
    Matrix top = A0.transpose() * P + P * A0 + K.transpose() * B.transpose() * P + P * B * K +
                 delta * delta * tau * P;
    Matrix W(2 * n, 2 * n);
    W.topLeftCorner(n, n) = top;
    W.topRightCorner(n, n) = P * B * K;
    W.bottomLeftCorner(n, n) = K.transpose() * B.transpose() * P;
    W.bottomRightCorner(n, n) = -tau * P;
    return 0.5 * (W + W.transpose());
}

LmiMargins verify_lmi(const Matrix& A0, const Matrix& B, const Matrix& Gd, const Matrix& X,
                      const Matrix& Y, double delta, double tau) {
    const auto n = A0.rows();
    if (X.rows() != n || X.cols() != n || Y.cols() != n || Y.rows() != B.cols())
        throw InvalidInput("verify_lmi: shape mismatch");
    LmiMargins out{};
    out.mono = lambda_min(X * Gd.transpose() + Gd * X);
    out.posdef = lambda_min(X);
    Eigen::FullPivLU<Matrix> lu(X);
    if (!lu.isInvertible()) throw InvalidInput("verify_lmi: X is numerically singular");
    Matrix P = lu.inverse();
    P = 0.5 * (P + P.transpose()).eval();
    Matrix K = Y * P;
    out.w = lambda_max(assemble_s_procedure(A0, B, P, K, delta, tau));
    return out;
}

double compute_rho(const Matrix& A0, const Matrix& B, const Matrix& Gd, const Matrix& X,
                   const Matrix& Y, double delta, double tau) {
    LmiMargins margins = verify_lmi(A0, B, Gd, X, Y, delta, tau);
    if (!(margins.w < 0.0) || !(margins.mono > 0.0) || !(margins.posdef > 0.0))
        throw NotCertified("compute_rho: pair is not certified");
    const auto n = A0.rows();
    Matrix P = X.inverse();
    P = 0.5 * (P + P.transpose()).eval();
    Matrix K = Y * P;
    Matrix W = assemble_s_procedure(A0, B, P, K, delta, tau);
    Matrix M = Matrix::Zero(2 * n, 2 * n);
    M.topLeftCorner(n, n) = Gd.transpose() * P + P * Gd;
    M.bottomRightCorner(n, n) = P;
    Matrix mih = spd_sqrt(M).inverse();
    return lambda_min(mih * (-W) * mih);
}

GainCertificate solve_gain_lmi(const Matrix& A0, const Matrix& B, const Matrix& Gd, double delta,
                               double tau, const SolveOptions& opts) {
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("solve_gain_lmi: delta must be in (0,1)");
    const auto n = A0.rows();
    const auto m = B.cols();
    if (tau <= 0.0) tau = 1.0 / delta;

    std::vector<double> taus{tau};
    if (opts.tau_grid)
        for (double c : {0.25, 0.5, 2.0, 4.0}) taus.push_back(c / delta);

    double best_overall = -std::numeric_limits<double>::infinity();
    for (double tau_try : taus) {
        QuantizedLmiProblem prob{A0, B, Gd, delta, tau_try, 0.0};
        std::mt19937_64 rng(opts.seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        SubgradientResult feasible;
        bool found = false;
        for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
            Matrix R(n, n);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j) R(i, j) = gauss(rng);
            Matrix X = Matrix::Identity(n, n) + 0.1 * R * R.transpose();
            X *= static_cast<double>(n) / X.trace();
            Matrix Y(m, n);
            for (Eigen::Index i = 0; i < m; ++i)
                for (Eigen::Index j = 0; j < n; ++j) Y(i, j) = 0.01 * gauss(rng);
            auto result = maximize_margin(prob, X, Y, opts.max_iters, opts.target_margin);
            best_overall = std::max(best_overall, result.margin);
            if (result.margin >= opts.target_margin) {
                feasible = result;
                found = true;
                break;
            }
            if (result.margin > feasible.margin) feasible = result;
        }
        if (!found && feasible.margin >= 1e-6) found = true;  // weaker but certifiable
        if (!found) continue;

        // Outer bisection: push the certified decay rate up while feasible.
        Matrix Xc = feasible.X, Yc = feasible.Y;
        if (opts.maximize_decay) {
            double lo = 0.0, hi = 0.05;
            int inner = std::max(2000, opts.max_iters / 10);
            while (hi < 64.0) {
                QuantizedLmiProblem ps{A0, B, Gd, delta, tau_try, hi};
                auto res = maximize_margin(ps, Xc, Yc, inner, opts.target_margin);
                if (res.margin >= opts.target_margin) {
                    lo = hi;
                    Xc = res.X;
                    Yc = res.Y;
                    hi *= 2.0;
                } else
                    break;
            }
            for (int round = 0; round < 12; ++round) {
                double mid = 0.5 * (lo + hi);
                QuantizedLmiProblem ps{A0, B, Gd, delta, tau_try, mid};
                auto res = maximize_margin(ps, Xc, Yc, inner, opts.target_margin);
                if (res.margin >= opts.target_margin) {
                    lo = mid;
                    Xc = res.X;
                    Yc = res.Y;
                } else
                    hi = mid;
            }
        }

        GainCertificate cert;
        cert.X = Xc;
        cert.Y = Yc;
        cert.P = Xc.inverse();
        cert.P = 0.5 * (cert.P + cert.P.transpose()).eval();
        cert.K = Yc * cert.P;
        cert.delta = delta;
        cert.tau = tau_try;
        LmiMargins mg = verify_lmi(A0, B, Gd, Xc, Yc, delta, tau_try);
        cert.margin_mono = mg.mono;
        cert.margin_posdef = mg.posdef;
        cert.margin_w = mg.w;
        if (!(cert.margin_mono >= 1e-6 && cert.margin_posdef >= 1e-6 && cert.margin_w <= -1e-6))
            continue;
        cert.rho = compute_rho(A0, B, Gd, Xc, Yc, delta, tau_try);
        return cert;
    }
    throw Infeasible("solve_gain_lmi: no feasible pair within the iteration budget", best_overall);
}

std::pair<Matrix, Matrix> solve_baseline_lmi(const Matrix& A0, const Matrix& B, const Matrix& Gd,
                                             double rho, const SolveOptions& opts) {
    if (!(rho > 0.0)) throw InvalidInput("solve_baseline_lmi: rho must be positive");
    const int n = static_cast<int>(A0.rows());
    const int m = static_cast<int>(B.cols());
    VariableBasis basis(n, m);

    // Linear operator of the equality, rows = upper triangle of the symmetric
    // residual, columns = basis directions.
    auto equality = [&](const Matrix& X, const Matrix& Y) {
        return (X * A0.transpose() + A0 * X + Y.transpose() * B.transpose() + B * Y +
                rho * (X * Gd.transpose() + Gd * X))
            .eval();
    };
    const int rows = n * (n + 1) / 2;
    Matrix L(rows, basis.size());
    int col = 0;
    auto fill_column = [&](const Matrix& R) {
        int row = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) L(row++, col) = R(i, j);
        ++col;
    };
    for (const Matrix& E : basis.x_dirs) fill_column(equality(E, Matrix::Zero(m, n)));
    for (const Matrix& E : basis.y_dirs) fill_column(equality(Matrix::Zero(n, n), E));

    Eigen::JacobiSVD<Matrix> svd(L, Eigen::ComputeFullV);
    double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    std::vector<int> null_cols;
    for (int i = 0; i < svd.matrixV().cols(); ++i)
        if (i >= svd.singularValues().size() || svd.singularValues()(i) <= 1e-12 * (1.0 + smax))
            null_cols.push_back(i);
    if (null_cols.empty())
        throw Infeasible("solve_baseline_lmi: equality has no solution space", 0.0);

    auto realize = [&](const Vector& coeffs) {
        Matrix X = Matrix::Zero(n, n);
        Matrix Y = Matrix::Zero(m, n);
        for (size_t kk = 0; kk < null_cols.size(); ++kk) {
            Vector dir = svd.matrixV().col(null_cols[kk]);
            int idx = 0;
            for (const Matrix& E : basis.x_dirs) X += coeffs[kk] * dir[idx++] * E;
            for (const Matrix& E : basis.y_dirs) Y += coeffs[kk] * dir[idx++] * E;
        }
        return std::make_pair(X, Y);
    };
    auto margin_of = [&](const Vector& coeffs) {
        auto [X, Y] = realize(coeffs);
        double tr = X.trace();
        if (std::abs(tr) < 1e-12) return -std::numeric_limits<double>::infinity();
        double c = static_cast<double>(n) / tr;
        X *= c;
        return std::min(lambda_min(X), lambda_min(X * Gd.transpose() + Gd * X));
    };

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int dims = static_cast<int>(null_cols.size());
    double best = -std::numeric_limits<double>::infinity();
    Vector best_coeffs = Vector::Zero(dims);
    for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
        Vector coeffs(dims);
        for (int i = 0; i < dims; ++i) coeffs[i] = gauss(rng);
        double f = margin_of(coeffs);
        if (f < margin_of(-coeffs)) {
            coeffs = -coeffs;
            f = margin_of(coeffs);
        }
        for (int k = 0; k < std::max(200, opts.max_iters / 100); ++k) {
            // coordinate-wise numeric subgradient in the low-dimensional
            // null-space; the margin is concave after trace normalization
            Vector g(dims);
            double h = 1e-6;
            for (int i = 0; i < dims; ++i) {
                Vector cp = coeffs;
                cp[i] += h;
                g[i] = (margin_of(cp) - f) / h;
            }
            if (g.norm() < 1e-14) break;
            coeffs += 0.3 / (g.norm() * std::sqrt(k + 1.0)) * g;
            f = margin_of(coeffs);
        }
        if (f > best) {
            best = f;
            best_coeffs = coeffs;
        }
        if (best > 1e-4) break;
    }
    if (!(best > 1e-8))
        throw Infeasible("solve_baseline_lmi: no positive-definite solution found", best);
    auto [X, Y] = realize(best_coeffs);
    double c = static_cast<double>(n) / X.trace();
    X *= c;
    Y *= c;
    X = 0.5 * (X + X.transpose()).eval();
    return {X, Y};
}

GainCertificate rescale_certificate(const GainCertificate& cert, const Matrix& A0, const Matrix& B,
                                    const Matrix& Gd, double factor) {
    if (!(factor > 0.0)) throw InvalidInput("rescale_certificate: factor must be positive");
    GainCertificate out = cert;
    out.X = factor * cert.X;
    out.Y = factor * cert.Y;
    out.P = cert.P / factor;
    out.K = cert.K;  // invariant under joint scaling
    LmiMargins mg = verify_lmi(A0, B, Gd, out.X, out.Y, cert.delta, cert.tau);
    out.margin_mono = mg.mono;
    out.margin_posdef = mg.posdef;
    out.margin_w = mg.w;
    out.rho = compute_rho(A0, B, Gd, out.X, out.Y, cert.delta, cert.tau);
    return out;
}

double auto_scale_factor(const GainCertificate& cert, const Matrix& Gd, const Vector& x0,
                         double t_target) {
    if (!(t_target > 0.0)) throw InvalidInput("auto_scale_factor: target time must be positive");
    if (!(cert.rho > 0.0)) throw NotCertified("auto_scale_factor: certificate has no decay rate");
    double target_norm = cert.rho * t_target;
    auto norm_at = [&](double c) {
        Dilation d(Gd, cert.P / c);
        return d.canonical_norm(x0).value;
    };
    if (x0.lpNorm<Eigen::Infinity>() < 1e-300) return 1.0;
    double lo = 1.0, hi = 1.0;
    while (norm_at(hi) > target_norm && hi < 1e12) hi *= 4.0;
    while (norm_at(lo) < target_norm && lo > 1e-12) lo /= 4.0;
    for (int it = 0; it < 80; ++it) {
        double mid = std::sqrt(lo * hi);
        if (norm_at(mid) > target_norm)
            lo = mid;
        else
            hi = mid;
    }
    return std::sqrt(lo * hi);
}

}  // namespace homq
