// Scalar spectral kernels: Laplacian eigenbases and their oracles
// (finite-difference Laplace-Beltrami, brute-force product spectra,
// quadrature normalization), Matern/SE transforms, normalization,
// PSD and stationarity properties.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "gvf/spectral.hpp"

using namespace gvf;

namespace {
constexpr double kPi = 3.141592653589793238462643383280;
constexpr double kTwoPi = 2.0 * kPi;

Vec pt(std::initializer_list<double> v) {
    Vec x(static_cast<int>(v.size()));
    int i = 0;
    for (double a : v) x[i++] = a;
    return x;
}
}  // namespace

TEST_CASE("spectral weights: closed-form spot values") {
    CHECK(spectral_weight(kNuSquaredExponential, 1.0, 1, 0.0) == 1.0);
    CHECK(spectral_weight(1.5, 1.0, 2, 0.0) == doctest::Approx(std::pow(3.0, -2.5)).epsilon(1e-14));
    CHECK_THROWS_AS(spectral_weight(-1.0, 1.0, 1, 0.0), DomainError);
    CHECK_THROWS_AS(spectral_weight(1.5, 1.0, 1, -2.0), DomainError);

    // strictly decreasing along the sphere spectrum 0, 2, 6, 12, ...
    double prev = std::numeric_limits<double>::infinity();
    for (int l = 0; l < 12; ++l) {
        double w = spectral_weight(1.5, 0.7, 2, l * (l + 1.0));
        CHECK(w < prev);
        prev = w;
    }
}

TEST_CASE("circle eigenpairs: spectrum and normalized functions") {
    auto pairs = laplacian_eigenpairs(circle(), 3);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].lambda == 0.0);
    CHECK(pairs[1].lambda == 1.0);
    CHECK(pairs[2].lambda == 1.0);
    double theta = 0.83;
    CHECK(pairs[0].psi(pt({theta})) == doctest::Approx(1.0 / std::sqrt(kTwoPi)));
    CHECK(pairs[1].psi(pt({theta})) == doctest::Approx(std::cos(theta) / std::sqrt(kPi)));
    CHECK(pairs[2].psi(pt({theta})) == doctest::Approx(std::sin(theta) / std::sqrt(kPi)));
}

TEST_CASE("sphere eigenpairs: spectrum with multiplicities") {
    auto pairs = laplacian_eigenpairs(sphere(), 4);
    REQUIRE(pairs.size() == 4);
    CHECK(pairs[0].lambda == 0.0);
    for (int j = 1; j < 4; ++j) CHECK(pairs[j].lambda == 2.0);
    CHECK_THROWS_AS(laplacian_eigenpairs(cylinder(), 4), CapabilityError);
}

TEST_CASE("degree-5 zonal harmonic satisfies the eigenvalue equation (FD oracle)") {
    // independent oracle: central-difference Laplace-Beltrami on a 200 x 400
    // (phi, theta) grid; ratio -lap(f)/f should equal l(l+1) = 30
    auto basis = make_eigenbasis(sphere(), 36, true);
    const int j_zonal = 25;  // degree 5, m = 0 sits at l^2
    CHECK(basis->eigenvalue(j_zonal) == 30.0);

    const int nphi = 200, ntheta = 400;
    const double hphi = kPi / nphi, htheta = kTwoPi / ntheta;
    auto f = [&](int i, int j) {
        double phi = (i + 0.5) * hphi;
        double theta = j * htheta;
        return basis->eval_one(j_zonal, pt({phi, theta}));
    };
    double fmax = 0.0;
    for (int i = 0; i < nphi; ++i) fmax = std::max(fmax, std::abs(f(i, 0)));
    double worst = 0.0;
    for (int i = 1; i + 1 < nphi; ++i) {
        double phi = (i + 0.5) * hphi;
        int j = 17;  // zonal: any column works
        double fc = f(i, j);
        if (std::abs(fc) < 0.2 * fmax) continue;
        double dphi2 = (f(i + 1, j) - 2.0 * fc + f(i - 1, j)) / (hphi * hphi);
        double dphi = (f(i + 1, j) - f(i - 1, j)) / (2.0 * hphi);
        double dtheta2 =
            (f(i, (j + 1) % ntheta) - 2.0 * fc + f(i, (j + ntheta - 1) % ntheta)) /
            (htheta * htheta);
        double lap = dphi2 + dphi * std::cos(phi) / std::sin(phi) +
                     dtheta2 / (std::sin(phi) * std::sin(phi));
        worst = std::max(worst, std::abs(-lap / fc - 30.0) / 30.0);
    }
    CHECK(worst <= 1e-3);
}

TEST_CASE("eigenfunctions are L2-normalized (quadrature oracle)") {
    // circle: trapezoid over [0, 2pi)
    auto cpairs = laplacian_eigenpairs(circle(), 7);
    const int n = 4096;
    for (const auto& pair : cpairs) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            double v = pair.psi(pt({kTwoPi * i / n}));
            acc += v * v;
        }
        CHECK(acc * kTwoPi / n == doctest::Approx(1.0).epsilon(1e-3));
    }
    // sphere: midpoint rule in (cos phi, theta); area element becomes du dtheta
    auto basis = make_eigenbasis(sphere(), 16, true);
    const int nu = 256, nt = 256;
    for (int j : {0, 3, 8, 15}) {
        double acc = 0.0;
        for (int iu = 0; iu < nu; ++iu) {
            double u = -1.0 + (iu + 0.5) * 2.0 / nu;
            double phi = std::acos(u);
            for (int it = 0; it < nt; ++it) {
                double v = basis->eval_one(j, pt({phi, kTwoPi * it / nt}));
                acc += v * v;
            }
        }
        CHECK(acc * (2.0 / nu) * (kTwoPi / nt) == doctest::Approx(1.0).epsilon(1e-3));
    }
    // eigenvalues ascend
    for (int j = 1; j < basis->size(); ++j) {
        CHECK(basis->eigenvalue(j) >= basis->eigenvalue(j - 1));
    }
}

TEST_CASE("product eigenpairs: torus spectrum") {
    auto c1 = laplacian_eigenpairs(circle(), 60);
    auto c2 = laplacian_eigenpairs(circle(), 60);
    auto t = product_eigenpairs(c1, 1, c2, 1, 9);
    std::vector<double> want = {0, 1, 1, 1, 1, 2, 2, 2, 2};
    REQUIRE(t.size() == want.size());
    for (size_t i = 0; i < want.size(); ++i) CHECK(t[i].lambda == want[i]);

    // count = 1 gives the smallest sum with the product eigenfunction
    auto one = product_eigenpairs(c1, 1, c2, 1, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].lambda == 0.0);
    CHECK(one[0].psi(pt({0.3, 0.7})) == doctest::Approx(1.0 / kTwoPi));

    // members of the lambda = 1 level are products of a constant factor
    // eigenfunction with a frequency-1 factor eigenfunction
    Vec x = pt({0.4, 1.9});
    double f0 = 1.0 / std::sqrt(kTwoPi);
    std::vector<double> level1 = {t[1].psi(x), t[2].psi(x), t[3].psi(x), t[4].psi(x)};
    std::vector<double> want1 = {f0 * std::cos(1.9) / std::sqrt(kPi),
                                 f0 * std::sin(1.9) / std::sqrt(kPi),
                                 std::cos(0.4) / std::sqrt(kPi) * f0,
                                 std::sin(0.4) / std::sqrt(kPi) * f0};
    std::sort(level1.begin(), level1.end());
    std::sort(want1.begin(), want1.end());
    for (size_t i = 0; i < 4; ++i) CHECK(level1[i] == doctest::Approx(want1[i]).epsilon(1e-12));
}

TEST_CASE("first 50 torus eigenvalues match brute force (oracle)") {
    auto c = laplacian_eigenpairs(circle(), 101);
    auto merged = product_eigenpairs(c, 1, c, 1, 50);
    // oracle: enumerate all pairs (i, j) <= 50 x 50 and sort the sums
    std::vector<double> sums;
    for (int i = 0; i < 50; ++i) {
        for (int j = 0; j < 50; ++j) sums.push_back(c[i].lambda + c[j].lambda);
    }
    std::sort(sums.begin(), sums.end());
    for (int i = 0; i < 50; ++i) CHECK(merged[i].lambda == sums[i]);

    // the eigenbasis used by kernels matches too
    auto basis = make_eigenbasis(flat_torus(), 50, false);
    for (int i = 0; i < 50; ++i) CHECK(basis->eigenvalue(i) == sums[i]);
}

TEST_CASE("kernel variance normalization: k(x,x) = sigma^2 on homogeneous manifolds") {
    struct Case {
        ManifoldPtr m;
        double nu, l, var;
        int trunc;
    };
    std::vector<Case> cases = {
        {circle(), 0.5, 0.5, 1.0, 101},
        {circle(), kNuSquaredExponential, 0.3, 2.5, 101},
        {sphere(), 1.5, 0.4, 11.5, 961},
        {flat_torus(), 1.5, 0.6, 0.7, 401},
    };
    for (const auto& c : cases) {
        auto k = matern_kernel(c.m, c.nu, c.l, c.var, c.trunc);
        Rng rng(5);
        for (int i = 0; i < 20; ++i) {
            Vec x = c.m->random_point(rng);
            INFO(k->describe());
            CHECK(k->eval(x, x) == doctest::Approx(c.var).epsilon(1e-6));
        }
    }
}

TEST_CASE("rescaled spectral weights are nonnegative and nonincreasing") {
    for (const auto& m : {circle(), sphere(), flat_torus()}) {
        auto k = std::dynamic_pointer_cast<const SpectralScalarKernel>(
            matern_kernel(m, 1.5, 0.5, 1.0));
        REQUIRE(k);
        const auto& w = k->weights();
        CHECK(w.minCoeff() >= 0.0);
        for (int j = 1; j < w.size(); ++j) CHECK(w[j] <= w[j - 1] + 1e-15);
    }
}

TEST_CASE("kernel symmetry is exact and mismatched points are rejected") {
    auto k = matern_kernel(sphere(), 1.5, 0.5, 2.0);
    Rng rng(17);
    for (int i = 0; i < 10; ++i) {
        Vec x = sphere()->random_point(rng), y = sphere()->random_point(rng);
        CHECK(k->eval(x, y) == k->eval(y, x));
    }
    CHECK_THROWS_AS(k->eval(pt({0.1}), pt({0.1, 0.2})), ShapeError);
}

TEST_CASE("circle Matern-1/2 truncation convergence at distance pi (oracle)") {
    // two truncations of the same kernel; the distance-pi value is an
    // alternating series and converges much faster than the raw weight tail
    // (~1.6e-4 here). Renormalization couples the two truncations through
    // k(x,x), which dominates the measured difference at 2.9e-6.
    auto k1 = matern_kernel(circle(), 0.5, 0.5, 1.0, 2001);
    auto k2 = matern_kernel(circle(), 0.5, 0.5, 1.0, 4001);
    double v1 = k1->eval(pt({0.0}), pt({kPi}));
    double v2 = k2->eval(pt({0.0}), pt({kPi}));
    CHECK(std::abs(v1 - v2) <= 1e-5);
    // the un-normalized distance-pi series itself converges to ~1.2e-7
    auto tail = [](int terms) {
        double s = spectral_weight(0.5, 0.5, 1, 0.0) / kTwoPi;
        for (int j = 1; j <= terms; ++j) {
            s += spectral_weight(0.5, 0.5, 1, static_cast<double>(j) * j) * std::cos(j * kPi) /
                 kPi;
        }
        return s;
    };
    CHECK(std::abs(tail(1000) - tail(2000)) <= 5e-7);
}

TEST_CASE("Euclidean Matern kernels: profiles and stationarity") {
    EuclideanMaternKernel k(2, 1.5, 0.7, 2.0);
    Vec a = pt({0.3, -1.0}), b = pt({1.1, 0.4}), s = pt({5.0, -3.0});
    CHECK(k.eval(a, b) == doctest::Approx(k.eval(a + s, b + s)).epsilon(1e-12));
    double r = (a - b).norm();
    double u = std::sqrt(3.0) * r / 0.7;
    CHECK(k.eval(a, b) == doctest::Approx(2.0 * (1.0 + u) * std::exp(-u)).epsilon(1e-12));
    CHECK(k.eval(a, a) == doctest::Approx(2.0));
    CHECK_THROWS_AS(EuclideanMaternKernel(2, 0.9, 1.0, 1.0), CapabilityError);
}

TEST_CASE("product kernel multiplies factor kernels over chart slices") {
    ManifoldPtr cyl = cylinder();
    auto* pm = static_cast<const ProductManifold*>(cyl.get());
    auto kc = se_kernel(pm->first(), 0.3, 1.0, 101);
    auto ke = se_kernel(pm->second(), 1.2, 1.0);
    auto k = product_kernel(cyl, kc, ke);
    Vec x = pt({0.3, -0.5}), y = pt({1.4, 0.8});
    CHECK(k->eval(x, y) ==
          doctest::Approx(kc->eval(pt({0.3}), pt({1.4})) * ke->eval(pt({-0.5}), pt({0.8})))
              .epsilon(1e-12));
    CHECK(k->variance() == doctest::Approx(1.0));
    CHECK(k->lengthscales() == std::vector<double>{0.3, 1.2});
}

TEST_CASE("Gram matrices are PSD on every shipped compact manifold") {
    struct Case {
        ManifoldPtr m;
        ScalarKernelPtr k;
    };
    std::vector<Case> cases;
    cases.push_back({circle(), matern_kernel(circle(), 0.5, 0.4, 1.0, 101)});
    cases.push_back({sphere(), matern_kernel(sphere(), 1.5, 0.3, 2.0, 961)});
    cases.push_back({flat_torus(), se_kernel(flat_torus(), 0.5, 1.0, 401)});
    for (const auto& c : cases) {
        Rng rng(29);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<Vec> pts;
            for (int i = 0; i < 12; ++i) pts.push_back(c.m->random_point(rng));
            Mat g(12, 12);
            for (int i = 0; i < 12; ++i) {
                for (int j = 0; j < 12; ++j) g(i, j) = c.k->eval(pts[i], pts[j]);
            }
            Eigen::SelfAdjointEigenSolver<Mat> es(g);
            INFO(c.k->describe());
            CHECK(es.eigenvalues().minCoeff() >= -1e-8 * es.eigenvalues().maxCoeff());
        }
    }
}

TEST_CASE("sphere kernel is rotation invariant (stationarity on a homogeneous space)") {
    auto k = matern_kernel(sphere(), 1.5, 0.4, 1.0, 961);
    Rng rng(31);
    // random rotation from a QR factorization
    Mat g(3, 3);
    for (int i = 0; i < 9; ++i) g(i / 3, i % 3) = rng.normal();
    Eigen::HouseholderQR<Mat> qr(g);
    Mat r = qr.householderQ();
    if (r.determinant() < 0) r.col(0) *= -1.0;

    auto rotate = [&](const Vec& x) {
        Vec e = sphere()->embed(x);
        Vec re = r * e;
        Vec out(2);
        out << std::acos(std::clamp(re[2], -1.0, 1.0)), std::atan2(re[1], re[0]);
        if (out[1] < 0) out[1] += kTwoPi;
        return out;
    };
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        Vec x = sphere()->random_point(rng), y = sphere()->random_point(rng);
        worst = std::max(worst, std::abs(k->eval(x, y) - k->eval(rotate(x), rotate(y))));
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("KL truncation error decreases monotonically (Parseval proxy)") {
    // fixed reference weights, truncated partial sums, discrete L2 on a grid
    // fine enough for exact discrete orthogonality of the trig basis
    auto ref = std::dynamic_pointer_cast<const SpectralScalarKernel>(
        se_kernel(circle(), 0.3, 1.0, 201));
    REQUIRE(ref);
    const auto& w = ref->weights();
    const auto& basis = ref->basis();
    const int grid = 512;
    Mat psi(grid, basis->size());
    for (int i = 0; i < grid; ++i) {
        psi.row(i) = basis->eval_all(pt({kTwoPi * i / grid})).transpose();
    }
    double prev = std::numeric_limits<double>::infinity();
    for (int trunc : {21, 41, 81, 161, 201}) {
        // L2 error of the truncated series vs the full reference
        double err = 0.0;
        for (int i = 0; i < grid; i += 8) {
            for (int j = 0; j < grid; j += 8) {
                double full = 0.0, part = 0.0;
                for (int t = 0; t < basis->size(); ++t) {
                    double term = w[t] * psi(i, t) * psi(j, t);
                    full += term;
                    if (t < trunc) part += term;
                }
                err += (full - part) * (full - part);
            }
        }
        CHECK(err <= prev + 1e-15);
        prev = err;
    }
}

TEST_CASE("default truncations") {
    CHECK(default_truncation(circle()) == 101);
    CHECK(default_truncation(sphere()) == 961);
    CHECK(default_truncation(flat_torus()) == 401);
}
