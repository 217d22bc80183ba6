#include <doctest.h>

#include <cmath>
#include <random>

#include "bench3.hpp"
#include "homq/dilation.hpp"

using namespace homq;

namespace {

// Independent slow oracle for the canonical norm: plain bisection on a wide
// bracket, dense matrix exponentials only, no Newton, no spectral cache.
double bisection_norm_oracle(const Matrix& G, const Matrix& P, const Vector& x) {
    auto res = [&](double s) {
        Vector v = matrix_exponential(-s * G) * x;
        return std::sqrt(v.dot(P * v)) - 1.0;
    };
    double lo = -60.0, hi = 60.0;
    REQUIRE(res(lo) > 0.0);
    REQUIRE(res(hi) < 0.0);
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (res(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

Vector random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
}

}  // namespace

TEST_SUITE("dilation") {

TEST_CASE("matrix exponential closed forms") {
    CHECK((matrix_exponential(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3)).norm() == 0.0);

    Matrix D = Matrix::Zero(2, 2);
    D(0, 0) = 1.0;
    D(1, 1) = -1.0;
    Matrix E = matrix_exponential(D);
    CHECK(E(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
    CHECK(E(1, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(std::abs(E(0, 1)) < 1e-15);

    // e^{s(I+N)} = e^s (I + sN) for nilpotent N
    Matrix M(2, 2);
    M << 1, 0, 1, 1;
    M *= std::log(2.0);
    Matrix R = matrix_exponential(M);
    CHECK(R(0, 0) == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(R(1, 1) == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(R(1, 0) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-13));
    CHECK(std::abs(R(0, 1)) < 1e-14);

    Matrix bad(2, 2);
    bad << 1, std::numeric_limits<double>::quiet_NaN(), 0, 1;
    CHECK_THROWS_AS(matrix_exponential(bad), InvalidInput);
}

TEST_CASE("matrix exponential halving identity") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 2 + static_cast<int>(rng() % 5);
        Matrix M(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                M(i, j) = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
        Matrix half = matrix_exponential(0.5 * M);
        Matrix whole = matrix_exponential(M);
        CHECK((half * half - whole).norm() <= 1e-12 * (1.0 + whole.norm()));
        CHECK((whole * matrix_exponential(-M) - Matrix::Identity(n, n)).norm() < 1e-10);
    }
}

TEST_CASE("matrix exponential at large norm against the symmetric eigenroute") {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 10; ++trial) {
        Matrix R(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) R(i, j) = gauss(rng);
        Matrix M = 0.5 * (R + R.transpose());
        M *= 40.0 / M.norm();
        Eigen::SelfAdjointEigenSolver<Matrix> es(M);
        Matrix oracle = es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
                        es.eigenvectors().transpose();
        Matrix got = matrix_exponential(M);
        CHECK((got - oracle).norm() <= 1e-12 * oracle.norm());
    }
}

TEST_CASE("spectral evaluation agrees with the dense exponential") {
    Dilation d(bench3::Gd(), bench3::P());
    for (double s : {-2.7, -0.3, 0.0, 1.1, 3.5}) {
        Matrix dense = matrix_exponential(s * bench3::Gd());
        CHECK((d.matrix(s) - dense).norm() <= 1e-12 * (1.0 + dense.norm()));
    }
}

TEST_CASE("dilation apply basics") {
    Dilation d(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    Vector x(2);
    x << 0.3, -0.7;
    CHECK((d.apply(0.0, x) - x).norm() < 1e-15);
    CHECK((d.apply(1.3, x) - std::exp(1.3) * x).norm() < 1e-12);

    Matrix G(2, 2);
    G << 2, 0, 0, 1;
    Dilation dw(G, Matrix::Identity(2, 2));
    Vector ones(2);
    ones << 1, 1;
    Vector mapped = dw.apply(std::log(2.0), ones);
    CHECK(mapped[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(mapped[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("group law") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> span(-3.0, 3.0);
    Dilation d(bench3::Gd(), bench3::P());
    for (int trial = 0; trial < 50; ++trial) {
        double s = span(rng), t = span(rng);
        Matrix lhs = d.matrix(s) * d.matrix(t);
        Matrix rhs = d.matrix(s + t);
        CHECK((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }
}

TEST_CASE("monotonicity check") {
    auto rep = check_monotonicity(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    CHECK(rep.ok);
    CHECK(rep.beta == doctest::Approx(1.0).epsilon(1e-14));

    Matrix G(2, 2);
    G << -1, 0, 0, 1;
    rep = check_monotonicity(G, Matrix::Identity(2, 2));
    CHECK_FALSE(rep.ok);
    CHECK(rep.beta == doctest::Approx(-1.0).epsilon(1e-14));

    rep = check_monotonicity(bench3::Gd(), bench3::P());
    CHECK(rep.ok);
    CHECK(rep.beta > 0.0);
    CHECK(rep.beta == doctest::Approx(0.8105116649465387).epsilon(1e-10));

    Matrix notspd(2, 2);
    notspd << 1, 0, 0, -1;
    CHECK_THROWS_AS(check_monotonicity(G, notspd), InvalidInput);
}

TEST_CASE("canonical norm reduces to the Euclidean norm for the standard dilation") {
    Dilation d(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    Vector x(2);
    x << 3, 4;
    CHECK(d.canonical_norm(x).value == doctest::Approx(5.0).epsilon(1e-12));

    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        Vector v = random_vector(rng, 2, 3.0);
        if (v.norm() < 1e-6) continue;
        CHECK(d.canonical_norm(v).value == doctest::Approx(v.norm()).epsilon(1e-12));
    }
}

TEST_CASE("canonical norm of the benchmark state matches the bisection oracle") {
    Dilation d(bench3::Gd(), bench3::P());
    double oracle = bisection_norm_oracle(bench3::Gd(), bench3::P(), bench3::x0());
    double impl = d.canonical_norm(bench3::x0()).value;
    CHECK(impl == doctest::Approx(oracle).epsilon(1e-11));
    CHECK(impl == doctest::Approx(0.7648837439959678).epsilon(1e-9));
    // the defining equation holds at the solution
    Vector v = d.apply(-d.canonical_norm(bench3::x0()).log_value, bench3::x0());
    CHECK(std::abs(d.weighted_norm(v) - 1.0) <= 1e-12);
}

TEST_CASE("unit-sphere inputs have norm one") {
    Dilation d(bench3::Gd(), bench3::P());
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        Vector v = random_vector(rng, 3);
        v /= d.weighted_norm(v);
        CHECK(d.canonical_norm(v).value == doctest::Approx(1.0).epsilon(1e-11));
    }
}

TEST_CASE("homogeneity of the norm") {
    Dilation d(bench3::Gd(), bench3::P());
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> span(-5.0, 5.0);
    for (int trial = 0; trial < 100; ++trial) {
        Vector x = random_vector(rng, 3, 2.0);
        if (x.norm() < 1e-6) continue;
        double s = span(rng);
        double lhs = d.canonical_norm(d.apply(s, x)).value;
        double rhs = std::exp(s) * d.canonical_norm(x).value;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("norm is strictly decreasing in the dilation parameter") {
    Dilation d(bench3::Gd(), bench3::P());
    Vector x = bench3::x0();
    double prev = std::numeric_limits<double>::infinity();
    for (double s = -2.0; s <= 2.0; s += 0.125) {
        double cur = d.weighted_norm(d.apply(-s, x));
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("gradient closed form and finite differences") {
    Dilation dI(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    Vector x(2);
    x << 3, 4;
    RowVector g = dI.canonical_norm_gradient(x);
    CHECK(g(0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(g(1) == doctest::Approx(0.8).epsilon(1e-12));

    Dilation d(bench3::Gd(), bench3::P());
    std::mt19937_64 rng(17);
    int tested = 0;
    for (int trial = 0; trial < 200 && tested < 100; ++trial) {
        Vector p = random_vector(rng, 3, 2.0);
        if (p.norm() < 0.1) continue;
        ++tested;
        RowVector grad = d.canonical_norm_gradient(p);

        // Euler relation for degree-one homogeneity
        double euler = grad.dot(bench3::Gd() * p);
        CHECK(euler == doctest::Approx(d.canonical_norm(p).value).epsilon(1e-9));

        const double h = 1e-6;
        for (int i = 0; i < 3; ++i) {
            Vector lo = p, hi = p;
            lo[i] -= h;
            hi[i] += h;
            double fd = (d.canonical_norm(hi).value - d.canonical_norm(lo).value) / (2.0 * h);
            CHECK(grad(i) == doctest::Approx(fd).epsilon(1e-5));
        }
    }
    CHECK(tested == 100);

    Vector zero = Vector::Zero(3);
    CHECK_THROWS_AS(d.canonical_norm_gradient(zero), InvalidInput);
}

TEST_CASE("projector lands on the unit sphere and is dilation invariant") {
    Dilation d(bench3::Gd(), bench3::P());
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> span(-5.0, 5.0);
    for (int trial = 0; trial < 100; ++trial) {
        Vector x = random_vector(rng, 3, 2.0);
        if (x.norm() < 1e-6) continue;
        Vector pi = d.projector(x);
        CHECK(std::abs(d.weighted_norm(pi) - 1.0) <= 1e-10);
        Vector pi2 = d.projector(d.apply(span(rng), x));
        CHECK((pi - pi2).norm() <= 1e-8 * (1.0 + pi.norm()));
    }

    // a state already on the sphere is fixed
    Vector x = bench3::x0();
    x /= d.weighted_norm(x);
    CHECK((d.projector(x) - x).norm() < 1e-10);

    Dilation dI(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    Vector v(2);
    v << 3, 4;
    Vector piv = dI.projector(v);
    CHECK(piv[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(piv[1] == doctest::Approx(0.8).epsilon(1e-12));

    CHECK_THROWS_AS(d.projector(Vector::Zero(3)), InvalidInput);
}

TEST_CASE("defective generator falls back to the dense exponential") {
    Matrix G(2, 2);
    G << 1, 0, 1, 1;  // single eigenvector
    Dilation d(G, Matrix::Identity(2, 2));
    CHECK(d.beta() == doctest::Approx(0.5).epsilon(1e-12));

    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        Vector x = random_vector(rng, 2, 2.0);
        if (x.norm() < 1e-3) continue;
        double impl = d.canonical_norm(x).value;
        double oracle = bisection_norm_oracle(G, Matrix::Identity(2, 2), x);
        CHECK(impl == doctest::Approx(oracle).epsilon(1e-10));
    }
    // group law holds on the fallback path too
    CHECK((d.matrix(0.4) * d.matrix(0.9) - d.matrix(1.3)).norm() < 1e-12);
}

TEST_CASE("construction rejects invalid generator/weight pairs") {
    Matrix G(2, 2);
    G << -1, 0, 0, 1;  // not anti-Hurwitz, not monotone
    CHECK_THROWS_AS(Dilation(G, Matrix::Identity(2, 2)), InvalidInput);

    Matrix notspd(2, 2);
    notspd << 1, 2, 2, 1;  // indefinite
    CHECK_THROWS_AS(Dilation(Matrix::Identity(2, 2), notspd), InvalidInput);
}

TEST_CASE("origin handling") {
    Dilation d(bench3::Gd(), bench3::P());
    auto hn = d.canonical_norm(Vector::Zero(3));
    CHECK(hn.value == 0.0);
    CHECK(hn.is_zero());
    CHECK(std::isinf(hn.log_value));

    Vector tiny = Vector::Constant(3, 1e-14);
    CHECK(d.canonical_norm(tiny).value == 0.0);
}

}  // TEST_SUITE
