// Projected matrix-valued kernels: dense-product oracles, gauge equivariance,
// the gauge-independence report with a deliberately broken negative control,
// prior field sampling (tangency, determinism, Monte-Carlo covariance), and
// block-Gram PSD.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <atomic>
#include <cmath>
#include <thread>

#include "gvf/projected.hpp"

using namespace gvf;

namespace {
constexpr double kPi = 3.141592653589793238462643383280;

Vec pt(std::initializer_list<double> v) {
    Vec x(static_cast<int>(v.size()));
    int i = 0;
    for (double a : v) x[i++] = a;
    return x;
}

ProjectedKernelPtr sphere_kernel(double l = 0.4, double var = 1.0) {
    return projected_kernel(sphere(), matern_kernel(sphere(), 1.5, l, var, 961));
}

ProjectedKernelPtr cylinder_kernel() {
    ManifoldPtr cyl = cylinder();
    auto* pm = static_cast<const ProductManifold*>(cyl.get());
    return projected_kernel(cyl, product_kernel(cyl, se_kernel(pm->first(), 0.3, 1.0, 101),
                                                se_kernel(pm->second(), 1.2, 1.0)));
}

ProjectedKernelPtr torus_kernel() {
    return projected_kernel(flat_torus(), matern_kernel(flat_torus(), 1.5, 0.6, 1.0, 401));
}
}  // namespace

TEST_CASE("diagonal evaluation is sigma^2 I in an orthonormal frame") {
    auto k = sphere_kernel(0.4, 2.3);
    Rng rng(3);
    Vec x = sphere()->random_point(rng);
    Mat got = k->eval(x, x);
    CHECK((got - 2.3 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("sphere antipodal pair matches the dense matrix-product oracle") {
    auto k = sphere_kernel();
    Vec x = pt({kPi / 3, 0.0});
    Vec y = pt({2.0 * kPi / 3, kPi});  // antipode of x, on the theta = 0 great circle
    Mat got = k->eval(x, y);
    // oracle: assemble kappa = k I_3 explicitly and multiply 2x3 * 3x3 * 3x2
    double s = k->scalar_kernel()->eval(x, y);
    Mat px = sphere()->projection_matrix(x);
    Mat py = sphere()->projection_matrix(y);
    Mat oracle = px * (s * Mat::Identity(3, 3)) * py.transpose();
    CHECK((got - oracle).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("cylinder off-diagonal structure matches the hand-assembled oracle") {
    auto k = cylinder_kernel();
    Vec x = pt({0.0, 0.0});
    Vec y = pt({kPi / 2, 0.0});
    double s = k->scalar_kernel()->eval(x, y);
    // P(0,.) = [[0,1,0],[0,0,1]], P(pi/2,.) = [[-1,0,0],[0,0,1]]
    // P(0,.) P(pi/2,.)^T = [[0,0],[0,1]]
    Mat got = k->eval(x, y);
    CHECK(std::abs(got(0, 0)) <= 1e-15);  // cos(pi/2) rounds to ~6e-17, not 0
    CHECK(got(0, 1) == 0.0);
    CHECK(got(1, 0) == 0.0);
    CHECK(got(1, 1) == doctest::Approx(s).epsilon(1e-14));
}

TEST_CASE("kernel blocks satisfy K(x,y) = K(y,x)^T within 1e-12") {
    for (const auto& k : {sphere_kernel(), cylinder_kernel(), torus_kernel()}) {
        Rng rng(11);
        for (int i = 0; i < 20; ++i) {
            Vec x = k->manifold()->random_point(rng);
            Vec y = k->manifold()->random_point(rng);
            CHECK((k->eval(x, y) - k->eval(y, x).transpose()).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("gauge transforms: identity, scaling, pointwise rotation") {
    auto k = sphere_kernel();
    Rng rng(5);
    Vec x = sphere()->random_point(rng), y = sphere()->random_point(rng);
    Mat base = k->eval(x, y);

    auto id = k->with_gauge(GaugeField::identity(2));
    CHECK((id->eval(x, y) - base).cwiseAbs().maxCoeff() == 0.0);

    auto doubled = k->with_gauge(GaugeField::constant(2.0 * Mat::Identity(2, 2)));
    CHECK((doubled->eval(x, y) - 4.0 * base).cwiseAbs().maxCoeff() <= 1e-12);

    // rotation by a position-dependent angle
    ManifoldPtr s2 = sphere();
    GaugeField rot(
        [s2](const Vec& p) {
            double a = 0.7 + s2->embed(p)[2] * 1.3;
            Mat r(2, 2);
            r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
            return r;
        },
        "position-rotation", true);
    auto rotated = k->with_gauge(rot);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        Vec a = s2->random_point(rng), b = s2->random_point(rng);
        Mat lhs = rotated->eval(a, b);
        Mat rhs = rot.at(a) * k->eval(a, b) * rot.at(b).transpose();
        worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("gauge independence report: shipped kernels pass, broken kernel fails") {
    for (const auto& k : {sphere_kernel(), cylinder_kernel(), torus_kernel()}) {
        auto report = gauge_independence_report(*k, 10, 10, 2024);
        INFO(k->manifold()->name());
        CHECK(report.trials == 100);
        CHECK(report.max_deviation <= 1e-10);
    }

    // negative control: the frame applied on one side only
    auto k = sphere_kernel(1.2);
    auto broken = [&k](const GaugeField& a, const Vec& x, const Vec& y) {
        return Mat(a.at(x) * k->eval(x, y));  // missing A(y)^T
    };
    auto base = [&k](const Vec& x, const Vec& y) { return k->eval(x, y); };
    auto report = gauge_independence_sweep(k->manifold(), 2, broken, base, 10, 10, 2024);
    CHECK(report.max_deviation > 1e-2);

    auto empty = gauge_independence_report(*sphere_kernel(), 5, 0, 1);
    CHECK(empty.empty);
    CHECK(empty.max_deviation == 0.0);
}

TEST_CASE("prior field samples are tangent, deterministic, and seed-sensitive") {
    auto k = sphere_kernel();
    auto f = sample_prior_field(k, 64, 77);
    auto g = sample_prior_field(k, 64, 77);
    auto h = sample_prior_field(k, 64, 78);
    Rng rng(9);
    bool different = false;
    for (int i = 0; i < 10; ++i) {
        Vec x = sphere()->random_point(rng);
        Vec vf = f(x);
        CHECK(vf == g(x));
        if (vf != h(x)) different = true;
        // ambient pushforward is orthogonal to the sphere normal
        Vec ambient = f.ambient(x);
        CHECK(std::abs(ambient.dot(sphere()->embed(x))) <= 1e-12);
    }
    CHECK(different);
}

TEST_CASE("prior sample covariance matches K_F (Monte-Carlo oracle)") {
    auto k = sphere_kernel(0.5, 1.0);
    Vec x1 = pt({1.0, 0.5}), x2 = pt({1.4, 1.1});
    const int n = 4096;
    Mat c11 = Mat::Zero(2, 2), c12 = Mat::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
        auto f = sample_prior_field(k, 1, 5000 + static_cast<std::uint64_t>(i));
        Vec a = f(x1), b = f(x2);
        c11 += a * a.transpose();
        c12 += a * b.transpose();
    }
    c11 /= n;
    c12 /= n;
    Mat k11 = k->eval(x1, x1), k12 = k->eval(x1, x2), k22 = k->eval(x2, x2);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            double se11 = std::sqrt((k11(r, r) * k11(c, c) + k11(r, c) * k11(r, c)) / n);
            CHECK(std::abs(c11(r, c) - k11(r, c)) <= 3.0 * se11);
            double se12 = std::sqrt((k11(r, r) * k22(c, c) + k12(r, c) * k12(r, c)) / n);
            CHECK(std::abs(c12(r, c) - k12(r, c)) <= 3.0 * se12);
        }
    }
}

TEST_CASE("ambient pushforward covariance matches P^T K_F P (Gaussianity proxy)") {
    auto k = sphere_kernel(0.5, 1.0);
    Vec x1 = pt({0.9, 2.0}), x2 = pt({2.0, 4.0});
    Mat p1 = sphere()->projection_matrix(x1), p2 = sphere()->projection_matrix(x2);
    const int n = 4096;
    Mat c12 = Mat::Zero(3, 3);
    for (int i = 0; i < n; ++i) {
        auto f = sample_prior_field(k, 1, 9000 + static_cast<std::uint64_t>(i));
        c12 += f.ambient(x1) * f.ambient(x2).transpose();
    }
    c12 /= n;
    Mat want = p1.transpose() * k->eval(x1, x2) * p2;
    Mat v1 = p1.transpose() * k->eval(x1, x1) * p1;
    Mat v2 = p2.transpose() * k->eval(x2, x2) * p2;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            double se = std::sqrt((v1(r, r) * v2(c, c) + want(r, c) * want(r, c)) / n) + 1e-12;
            CHECK(std::abs(c12(r, c) - want(r, c)) <= 3.0 * se);
        }
    }
}

TEST_CASE("block Gram matrices are PSD across mixed point-set sizes") {
    for (const auto& k : {sphere_kernel(), cylinder_kernel(), torus_kernel()}) {
        Rng rng(13);
        for (int size : {5, 9, 14, 20}) {
            std::vector<Vec> pts;
            for (int i = 0; i < size; ++i) pts.push_back(k->manifold()->random_point(rng));
            Mat g = k->gram(pts);
            CHECK((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
            Eigen::SelfAdjointEigenSolver<Mat> es(g);
            INFO(k->manifold()->name() << " size " << size);
            CHECK(es.eigenvalues().minCoeff() >= -1e-8 * es.eigenvalues().maxCoeff());
        }
    }
}

TEST_CASE("kernel evaluation is safe from concurrent threads") {
    auto k = sphere_kernel();
    auto f = sample_prior_field(k, 1, 3);
    std::vector<std::thread> workers;
    std::atomic<int> failures{0};
    for (int t = 0; t < 4; ++t) {
        workers.emplace_back([&, t] {
            Rng rng(t);
            for (int i = 0; i < 100; ++i) {
                Vec x = sphere()->random_point(rng);
                Vec y = sphere()->random_point(rng);
                Mat block = k->eval(x, y);
                if (!block.allFinite()) ++failures;
                if (!f(x).allFinite()) ++failures;
            }
        });
    }
    for (auto& w : workers) w.join();
    CHECK(failures == 0);
}

TEST_CASE("general ambient kernels are accepted and shape-checked") {
    ManifoldPtr s2 = sphere();
    auto scalar = matern_kernel(s2, 1.5, 0.4, 1.0, 169);
    ProjectedMatrixKernel general(s2, [scalar](const Vec& x, const Vec& y) {
        return Mat(scalar->eval(x, y) * Mat::Identity(3, 3));
    });
    ProjectedMatrixKernel shipped(s2, scalar);
    Rng rng(1);
    Vec x = s2->random_point(rng), y = s2->random_point(rng);
    CHECK((general.eval(x, y) - shipped.eval(x, y)).cwiseAbs().maxCoeff() <= 1e-14);

    ProjectedMatrixKernel bad(s2, [](const Vec&, const Vec&) { return Mat::Identity(2, 2); });
    CHECK_THROWS_AS(bad.eval(x, y), ShapeError);
    CHECK_THROWS_AS(sample_prior_field(std::make_shared<ProjectedMatrixKernel>(bad), 8, 1),
                    CapabilityError);
}
