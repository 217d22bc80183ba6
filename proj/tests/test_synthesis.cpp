#include <doctest.h>

#include <cmath>
#include <random>

#include "bench3.hpp"
#include "homq/serialization.hpp"
#include "homq/synthesis.hpp"

using namespace homq;

namespace {

double lam_min(const Matrix& S) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly)
        .eigenvalues()
        .minCoeff();
}
double lam_max(const Matrix& S) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly)
        .eigenvalues()
        .maxCoeff();
}

PlantModel bench_plant() { return PlantModel::validated(bench3::A(), bench3::B()); }

}  // namespace

TEST_SUITE("synthesis") {

TEST_CASE("controllability validation") {
    CHECK_NOTHROW(bench_plant());
    CHECK_THROWS_AS(PlantModel::validated(Matrix::Zero(2, 2), Matrix::Zero(2, 1)), InvalidInput);
    Matrix A(2, 2), B(2, 1);
    A << 0, 1, 0, 0;
    B << 1, 0;  // input cannot reach the second state
    CHECK_THROWS_AS(PlantModel::validated(A, B), InvalidInput);
}

TEST_CASE("homogenization of the benchmark plant") {
    auto r = solve_homogenization(bench_plant(), -1.0);
    CHECK(r.K0.norm() <= 1e-9);
    CHECK((r.Gd - bench3::Gd()).lpNorm<Eigen::Infinity>() <= 1e-9);
    CHECK((r.G0 - bench3::G0()).lpNorm<Eigen::Infinity>() <= 1e-9);
    CHECK(r.residual_eq <= 1e-9 * (1.0 + bench3::A().norm()));
    CHECK(r.residual_gb <= 1e-9 * (1.0 + bench3::B().norm()));
    // nilpotency of the homogenized matrix
    Matrix power = r.A0 * r.A0 * r.A0;
    CHECK(power.norm() <= 1e-9 * (1.0 + std::pow(r.A0.norm(), 3)));
}

TEST_CASE("homogenization of the double integrator (hand solved)") {
    Matrix A(2, 2), B(2, 1);
    A << 0, 1, 0, 0;
    B << 0, 1;
    auto r = solve_homogenization(PlantModel::validated(A, B), -1.0);
    Matrix G0(2, 2);
    G0 << -1, 0, 0, 0;
    CHECK((r.G0 - G0).norm() <= 1e-9);
    CHECK(r.Y0.norm() <= 1e-10);
    CHECK(r.K0.norm() <= 1e-10);
    Matrix Gd(2, 2);
    Gd << 2, 0, 0, 1;
    CHECK((r.Gd - Gd).norm() <= 1e-9);
}

TEST_CASE("homogenization of a single integrator") {
    Matrix A(1, 1), B(1, 1);
    A << 0;
    B << 1;
    auto r = solve_homogenization(PlantModel::validated(A, B), -1.0);
    CHECK(std::abs(r.G0(0, 0)) <= 1e-12);
    CHECK(r.K0.norm() <= 1e-12);
    CHECK(r.Gd(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("homogenization with a milder degree") {
    auto r = solve_homogenization(bench_plant(), -0.5);
    Matrix expected = Matrix::Identity(3, 3) - 0.5 * bench3::G0();
    CHECK((r.Gd - expected).norm() <= 1e-9);

    // the plant is homogeneous of degree mu for the mu-dilation
    Dilation d(r.Gd, bench3::P());
    for (double s : {-1.5, 0.4, 2.0}) {
        Matrix D = d.matrix(s);
        CHECK((r.A0 * D - std::exp(-0.5 * s) * D * r.A0).norm() <= 1e-9 * (1.0 + D.norm()));
    }
    CHECK_THROWS_AS(solve_homogenization(bench_plant(), 0.0), InvalidInput);
    CHECK_THROWS_AS(solve_homogenization(bench_plant(), -1.5), InvalidInput);
}

TEST_CASE("verify_lmi rejects a singular X") {
    auto r = solve_homogenization(bench_plant(), -1.0);
    CHECK_THROWS_AS(
        verify_lmi(r.A0, bench3::B(), r.Gd, Matrix::Zero(3, 3), Matrix::Zero(1, 3), 0.4, 2.5),
        InvalidInput);
}

TEST_CASE("homogeneity identities of the homogenized pair") {
    auto r = solve_homogenization(bench_plant(), -1.0);
    Dilation d(r.Gd, bench3::P());
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> span(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        double s = span(rng);
        Matrix D = d.matrix(s);
        // degree -1 field: A0 d(s) = e^{-s} d(s) A0; input channel: d(s) B = e^{s} B
        CHECK((r.A0 * D - std::exp(-s) * D * r.A0).norm() <= 1e-9 * (1.0 + D.norm()));
        CHECK((D * bench3::B() - std::exp(s) * bench3::B()).norm() <=
              1e-9 * (1.0 + std::exp(s) * bench3::B().norm()));
    }
}

TEST_CASE("verify_lmi: zero-gain case in closed form") {
    Matrix X = Matrix::Identity(2, 2);
    Matrix Y = Matrix::Zero(1, 2);
    auto m = verify_lmi(Matrix::Zero(2, 2), Matrix::Identity(2, 2).col(1), Matrix::Identity(2, 2),
                        X, Y, 0.5, 2.0);
    CHECK(m.mono == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(m.posdef == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.w == doctest::Approx(0.5).epsilon(1e-14));  // delta^2 tau; not feasible
}

TEST_CASE("verify_lmi: reference gains are feasible up to printing precision") {
    Matrix P = bench3::P();
    Matrix X = P.inverse();
    X = 0.5 * (X + X.transpose()).eval();
    Matrix Y = bench3::K() * X;
    auto r = solve_homogenization(bench_plant(), -1.0);

    auto m = verify_lmi(r.A0, bench3::B(), r.Gd, X, Y, bench3::delta, bench3::tau);
    CHECK(m.mono > 0.0);
    CHECK(m.posdef > 0.0);
    CHECK(m.w == doctest::Approx(-0.0005216447369569751).epsilon(1e-6));

    Matrix W = assemble_s_procedure(r.A0, bench3::B(), P, bench3::K(), bench3::delta, bench3::tau);
    double wnorm = std::max(std::abs(lam_max(W)), std::abs(lam_min(W)));
    CHECK(wnorm == doctest::Approx(1.4154762837585506).epsilon(1e-6));
    CHECK(m.w <= 1e-2 * wnorm);  // rounding slack

    double rho = compute_rho(r.A0, bench3::B(), r.Gd, X, Y, bench3::delta, bench3::tau);
    CHECK(rho == doctest::Approx(0.010760525247237933).epsilon(1e-6));
}

TEST_CASE("compute_rho saturates its own bound") {
    auto r = solve_homogenization(bench_plant(), -1.0);
    Matrix P = bench3::P();
    Matrix X = P.inverse();
    X = 0.5 * (X + X.transpose()).eval();
    Matrix Y = bench3::K() * X;
    double rho = compute_rho(r.A0, bench3::B(), r.Gd, X, Y, bench3::delta, bench3::tau);
    CHECK(rho > 0.0);

    Matrix W = assemble_s_procedure(r.A0, bench3::B(), P, bench3::K(), bench3::delta, bench3::tau);
    Matrix M = Matrix::Zero(6, 6);
    M.topLeftCorner(3, 3) = r.Gd.transpose() * P + P * r.Gd;
    M.bottomRightCorner(3, 3) = P;
    // W + rho M just touches zero; a slightly larger rho crosses it
    CHECK(std::abs(lam_max(W + rho * M)) <= 1e-9);
    CHECK(lam_max(W + 1.01 * rho * M) > 0.0);

    // uncertified pair is rejected
    CHECK_THROWS_AS(
        compute_rho(r.A0, bench3::B(), r.Gd, Matrix::Identity(3, 3), Matrix::Zero(1, 3),
                    bench3::delta, bench3::tau),
        NotCertified);
}

TEST_CASE("solve_gain_lmi on the benchmark plant") {
    auto r = solve_homogenization(bench_plant(), -1.0);
    SolveOptions opts;
    opts.seed = 1;
    auto cert = solve_gain_lmi(r.A0, bench3::B(), r.Gd, bench3::delta, bench3::tau, opts);
    CHECK(cert.margin_mono >= 1e-6);
    CHECK(cert.margin_posdef >= 1e-6);
    CHECK(cert.margin_w <= -1e-6);
    CHECK(cert.rho > 0.0);
    CHECK(cert.X.trace() == doctest::Approx(3.0).epsilon(1e-9));
    CHECK((cert.K - cert.Y * cert.X.inverse()).norm() <= 1e-9 * (1.0 + cert.K.norm()));

    // scale invariance of feasibility
    for (double c : {0.1, 10.0}) {
        auto m = verify_lmi(r.A0, bench3::B(), r.Gd, c * cert.X, c * cert.Y, bench3::delta,
                            bench3::tau);
        CHECK(m.mono > 0.0);
        CHECK(m.posdef > 0.0);
        CHECK(m.w < 0.0);
    }
}

TEST_CASE("solve_gain_lmi: small delta stays feasible") {
    auto r = solve_homogenization(bench_plant(), -1.0);
    SolveOptions opts;
    opts.seed = 2;
    opts.maximize_decay = false;
    auto cert = solve_gain_lmi(r.A0, bench3::B(), r.Gd, 1e-3, 0.0, opts);
    CHECK(cert.margin_w <= -1e-6);
    CHECK(cert.tau == doctest::Approx(1000.0));

    Matrix A(2, 2), B(2, 1);
    A << 0, 1, 0, 0;
    B << 0, 1;
    auto rd = solve_homogenization(PlantModel::validated(A, B), -1.0);
    auto cert2 = solve_gain_lmi(rd.A0, B, rd.Gd, 1e-3, 0.0, opts);
    CHECK(cert2.margin_w <= -1e-6);
}

TEST_CASE("solve_gain_lmi: scalar plant against the hand interval") {
    Matrix A0 = Matrix::Zero(1, 1), B = Matrix::Identity(1, 1), Gd = Matrix::Identity(1, 1);
    SolveOptions opts;
    opts.seed = 3;
    auto cert = solve_gain_lmi(A0, B, Gd, 0.4, 0.0, opts);
    CHECK(cert.margin_mono >= 1e-6);
    CHECK(cert.margin_w <= -1e-6);
    // with X normalized to 1, feasibility demands Y in tau(-1 +- sqrt(1-delta^2))
    double tau = cert.tau;
    double y = cert.Y(0, 0) / cert.X(0, 0);
    double lo = tau * (-1.0 - std::sqrt(1.0 - 0.16));
    double hi = tau * (-1.0 + std::sqrt(1.0 - 0.16));
    CHECK(y > lo);
    CHECK(y < hi);
}

TEST_CASE("certified decay does not degrade as delta shrinks") {
    auto r = solve_homogenization(bench_plant(), -1.0);
    SolveOptions opts;
    opts.seed = 4;
    double prev = -1.0;
    for (double delta : {0.4, 0.2, 0.1}) {
        auto cert = solve_gain_lmi(r.A0, bench3::B(), r.Gd, delta, 0.0, opts);
        CHECK(cert.rho >= prev - 1e-6);
        prev = cert.rho;
    }
}

TEST_CASE("infeasible budget reports the best margin") {
    auto r = solve_homogenization(bench_plant(), -1.0);
    SolveOptions opts;
    opts.seed = 5;
    opts.max_iters = 30;  // starve the solver
    opts.restarts = 1;
    opts.tau_grid = false;
    opts.maximize_decay = false;
    opts.target_margin = 0.5;  // unreachable under trace normalization
    try {
        (void)solve_gain_lmi(r.A0, bench3::B(), r.Gd, 0.9, 0.0, opts);
        // a lucky iterate may still certify; nothing to assert in that case
    } catch (const Infeasible& e) {
        CHECK(std::isfinite(e.best_margin));
    }
}

TEST_CASE("baseline pair: scalar closed form") {
    auto [X, Y] = solve_baseline_lmi(Matrix::Zero(1, 1), Matrix::Identity(1, 1),
                                     Matrix::Identity(1, 1), 1.0);
    CHECK(X(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(Y(0, 0) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("baseline pair: double integrator") {
    Matrix A(2, 2), B(2, 1);
    A << 0, 1, 0, 0;
    B << 0, 1;
    auto r = solve_homogenization(PlantModel::validated(A, B), -1.0);
    auto [X, Y] = solve_baseline_lmi(r.A0, B, r.Gd, 1.0);
    CHECK(lam_min(X) > 0.0);
    CHECK(lam_min(X * r.Gd.transpose() + r.Gd * X) > 0.0);
    Matrix E = X * r.A0.transpose() + r.A0 * X + Y.transpose() * B.transpose() + B * Y +
               1.0 * (X * r.Gd.transpose() + r.Gd * X);
    CHECK(E.norm() <= 1e-8 * (1.0 + X.norm()));
}

TEST_CASE("certificate rescaling and auto-scaling") {
    auto r = solve_homogenization(bench_plant(), -1.0);
    SolveOptions opts;
    opts.seed = 6;
    auto cert = solve_gain_lmi(r.A0, bench3::B(), r.Gd, bench3::delta, bench3::tau, opts);

    auto scaled = rescale_certificate(cert, r.A0, bench3::B(), r.Gd, 100.0);
    CHECK((scaled.K - cert.K).norm() <= 1e-8 * (1.0 + cert.K.norm()));
    CHECK(scaled.rho == doctest::Approx(cert.rho).epsilon(1e-6));  // scale-invariant
    CHECK(scaled.margin_w < 0.0);

    double factor = auto_scale_factor(cert, r.Gd, bench3::x0(), 10.0);
    auto tuned = rescale_certificate(cert, r.A0, bench3::B(), r.Gd, factor);
    Dilation d(r.Gd, tuned.P);
    CHECK(d.canonical_norm(bench3::x0()).value / tuned.rho == doctest::Approx(10.0).epsilon(1e-6));
}

TEST_CASE("certificate json round trip") {
    auto r = solve_homogenization(bench_plant(), -1.0);
    SolveOptions opts;
    opts.seed = 7;
    opts.maximize_decay = false;
    CertificateFile file;
    file.A = bench3::A();
    file.B = bench3::B();
    file.G0 = r.G0;
    file.K0 = r.K0;
    file.Gd = r.Gd;
    file.gains = solve_gain_lmi(r.A0, bench3::B(), r.Gd, bench3::delta, bench3::tau, opts);

    auto j = certificate_to_json(file);
    auto back = certificate_from_json(j);
    CHECK((back.gains.X - file.gains.X).norm() == 0.0);  // full double precision
    CHECK((back.gains.K - file.gains.K).norm() == 0.0);
    CHECK(back.gains.rho == file.gains.rho);
    CHECK((back.Gd - file.Gd).norm() == 0.0);

    Json corrupt = j;
    corrupt.erase("X");
    CHECK_THROWS_AS(certificate_from_json(corrupt), InvalidInput);
}

}  // TEST_SUITE
