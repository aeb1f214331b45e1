// Embedded manifolds: embeddings, projection matrices, metric identity,
// products, periodicity, and the finite-difference check of d emb against
// the frame projection.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "gvf/inference.hpp"
#include "gvf/manifold.hpp"
#include "gvf/rng.hpp"

using namespace gvf;

namespace {
constexpr double kPi = 3.141592653589793238462643383280;

Vec pt(std::initializer_list<double> v) {
    Vec x(static_cast<int>(v.size()));
    int i = 0;
    for (double a : v) x[i++] = a;
    return x;
}

// interior random point: keeps the sphere colatitude away from the poles so
// central differences stay inside the chart
Vec interior_point(const ManifoldPtr& m, Rng& rng) {
    for (;;) {
        Vec x = m->random_point(rng);
        bool ok = true;
        if (m->kind() == ManifoldKind::Sphere && (x[0] < 0.05 || x[0] > kPi - 0.05)) ok = false;
        if (m->kind() == ManifoldKind::Product) {
            auto* pm = static_cast<const ProductManifold*>(m.get());
            for (const auto& f : {pm->first(), pm->second()}) {
                Vec s = f == pm->first() ? pm->first_slice(x) : pm->second_slice(x);
                if (f->kind() == ManifoldKind::Sphere && (s[0] < 0.05 || s[0] > kPi - 0.05))
                    ok = false;
            }
        }
        if (ok) return x;
    }
}

std::vector<ManifoldPtr> shipped() {
    return {circle(), sphere(), euclidean(1), euclidean(2), cylinder(), flat_torus(),
            product(flat_torus(), euclidean(1))};
}
}  // namespace

TEST_CASE("embeddings match the closed forms") {
    CHECK(circle()->embed(pt({0.0})).isApprox(pt({1.0, 0.0})));
    CHECK(sphere()->embed(pt({kPi / 2, 0.0})).isApprox(pt({1.0, 0.0, 0.0})));
    Vec c = cylinder()->embed(pt({kPi / 2, 2.5}));
    CHECK(c[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(c[1] == doctest::Approx(1.0));
    CHECK(c[2] == doctest::Approx(2.5));
}

TEST_CASE("projection matrices match the closed forms") {
    Mat p = sphere()->projection_matrix(pt({kPi / 2, 0.0}));
    Mat want(2, 3);
    want << 0, 0, -1, 0, 1, 0;
    CHECK((p - want).cwiseAbs().maxCoeff() < 1e-15);

    // theta = 0 fixes the frame at the poles
    Mat pole = sphere()->projection_matrix(pt({0.0, 0.0}));
    Mat want_pole(2, 3);
    want_pole << 1, 0, 0, 0, 1, 0;
    CHECK((pole - want_pole).cwiseAbs().maxCoeff() < 1e-15);
    // the convention also applies when a caller hands a nonzero theta
    Mat pole2 = sphere()->projection_matrix(pt({0.0, 1.3}));
    CHECK((pole2 - want_pole).cwiseAbs().maxCoeff() < 1e-15);

    Mat cyl = cylinder()->projection_matrix(pt({0.0, 7.0}));
    Mat want_cyl(2, 3);
    want_cyl << 0, 1, 0, 0, 0, 1;
    CHECK((cyl - want_cyl).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("metric matrix is the identity for shipped orthonormal frames") {
    Rng rng(7);
    CHECK(sphere()->metric_matrix(sphere()->random_point(rng)).isApprox(Mat::Identity(2, 2)));
    CHECK(euclidean(3)->metric_matrix(pt({0.3, -2.0, 5.0})).isApprox(Mat::Identity(3, 3)));
    // torus: block-diagonal P times its transpose, computed numerically
    ManifoldPtr t = flat_torus();
    Vec x = t->random_point(rng);
    Mat p = t->projection_matrix(x);
    CHECK(((p * p.transpose()) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("products concatenate charts and block the projections") {
    CHECK(cylinder()->dim() == 2);
    CHECK(cylinder()->ambient_dim() == 3);
    CHECK(flat_torus()->dim() == 2);
    CHECK(flat_torus()->ambient_dim() == 4);

    ManifoldPtr nested = product(flat_torus(), euclidean(1));
    CHECK(nested->dim() == 3);
    CHECK(nested->ambient_dim() == 5);
    Rng rng(3);
    Vec x = nested->random_point(rng);
    Mat p = nested->projection_matrix(x);
    // block structure: torus rows touch only the first four ambient columns
    CHECK(p.block(0, 4, 2, 1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.block(2, 0, 1, 4).cwiseAbs().maxCoeff() == 0.0);
    CHECK(p(2, 4) == 1.0);
}

TEST_CASE("metric identity holds at 1000 random points per manifold") {
    for (const auto& m : shipped()) {
        Rng rng(11);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            Vec x = m->random_point(rng);
            Mat g = m->metric_matrix(x);
            worst = std::max(worst,
                             (g - Mat::Identity(m->dim(), m->dim())).cwiseAbs().maxCoeff());
        }
        INFO(m->name());
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("central differences of emb agree with the frame projection") {
    const double eps = 1e-5;
    for (const auto& m : shipped()) {
        Rng rng(23);
        for (int trial = 0; trial < 25; ++trial) {
            Vec x = interior_point(m, rng);
            Vec v(m->dim());
            for (int i = 0; i < v.size(); ++i) v[i] = rng.normal();
            v.normalize();
            Vec fd = (m->embed(x + eps * v) - m->embed(x - eps * v)) / (2.0 * eps);
            Vec w = m->chart_velocity_to_frame(x, v);
            Vec push = m->projection_matrix(x).transpose() * w;
            double denom = std::max(1.0, fd.cwiseAbs().maxCoeff());
            INFO(m->name());
            CHECK((fd - push).cwiseAbs().maxCoeff() / denom <= 1e-8);
        }
    }
}

TEST_CASE("periodic coordinates reduce bit-identically") {
    // shifts by one period are exactly representable for these chart values
    for (double t : {0.5, 1.25, 3.0, 5.75}) {
        Vec a = circle()->embed(pt({t}));
        Vec b = circle()->embed(pt({t + 2.0 * kPi}));
        CHECK(a[0] == b[0]);
        CHECK(a[1] == b[1]);
        Vec s1 = sphere()->embed(pt({1.0, t}));
        Vec s2 = sphere()->embed(pt({1.0, t + 2.0 * kPi}));
        CHECK(s1[0] == s2[0]);
        CHECK(s1[1] == s2[1]);
        CHECK(s1[2] == s2[2]);
    }
}

TEST_CASE("domain and shape errors") {
    CHECK_THROWS_AS(circle()->embed(pt({std::nan("")})), DomainError);
    CHECK_THROWS_AS(circle()->embed(pt({0.0, 1.0})), ShapeError);
    CHECK_THROWS_AS(sphere()->embed(pt({-0.2, 0.0})), DomainError);
    CHECK_THROWS_AS(sphere()->embed(pt({3.5, 0.0})), DomainError);
    CHECK_THROWS_AS(euclidean(0), DomainError);
    CHECK_THROWS_AS(manifold_by_name("klein-bottle"), CapabilityError);
}

TEST_CASE("gauge fields reject singular matrices and name the point") {
    GaugeField bad([](const Vec&) { return Mat::Zero(2, 2); }, "zero");
    CHECK_THROWS_AS(bad.at(pt({0.4, 0.2})), GaugeError);
    try {
        bad.at(pt({0.4, 0.2}));
    } catch (const GaugeError& e) {
        CHECK(std::string(e.what()).find("0.4") != std::string::npos);
    }
    GaugeField ok = GaugeField::constant(2.0 * Mat::Identity(2, 2));
    CHECK(ok.at(pt({0.0, 0.0}))(0, 0) == 2.0);
}

TEST_CASE("geodesic distances on shipped manifolds") {
    CHECK(geodesic_distance(circle(), pt({0.1}), pt({2.0 * kPi - 0.1})) ==
          doctest::Approx(0.2).epsilon(1e-12));
    CHECK(geodesic_distance(sphere(), pt({0.0, 0.0}), pt({kPi, 0.0})) ==
          doctest::Approx(kPi));
    CHECK(geodesic_distance(euclidean(2), pt({0.0, 0.0}), pt({3.0, 4.0})) ==
          doctest::Approx(5.0));
    double d = geodesic_distance(cylinder(), pt({0.05, 1.0}), pt({2.0 * kPi - 0.05, 2.0}));
    CHECK(d == doctest::Approx(std::hypot(0.1, 1.0)));
}

TEST_CASE("framed points bundle chart, ambient image, and projection") {
    for (const auto& m : shipped()) {
        Rng rng(41);
        for (int i = 0; i < 20; ++i) {
            Vec x = m->random_point(rng);
            FramedPoint fp = frame_point(m, x);
            CHECK((m->embed(fp.chart) - fp.ambient).cwiseAbs().maxCoeff() <= 1e-12);
            Mat gamma = fp.projection * fp.projection.transpose();
            CHECK((gamma - Mat::Identity(m->dim(), m->dim())).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("const geometry calls are safe from concurrent threads") {
    ManifoldPtr m = sphere();
    std::vector<std::thread> workers;
    std::atomic<int> failures{0};
    for (int t = 0; t < 4; ++t) {
        workers.emplace_back([&, t] {
            Rng rng(100 + t);
            for (int i = 0; i < 500; ++i) {
                Vec x = m->random_point(rng);
                Mat g = m->metric_matrix(x);
                if ((g - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() > 1e-12) ++failures;
            }
        });
    }
    for (auto& w : workers) w.join();
    CHECK(failures == 0);
}

TEST_CASE("manifold lookup by name") {
    CHECK(manifold_by_name("cylinder")->ambient_dim() == 3);
    CHECK(manifold_by_name("torus")->ambient_dim() == 4);
    CHECK(manifold_by_name("euclidean3")->dim() == 3);
    CHECK(manifold_by_name("sphere")->compact());
    CHECK_FALSE(manifold_by_name("cylinder")->compact());
}
