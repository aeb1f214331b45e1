#include "gvf/manifold.hpp"

#include <cmath>
#include <sstream>

#include "gvf/rng.hpp"

namespace gvf {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.141592653589793238462643383280;
}  // namespace

// ------------------------------ base ------------------------------

Manifold::Manifold(int dim, int ambient_dim) : dim_(dim), ambient_dim_(ambient_dim) {
    // Nash bound for the shipped embeddings: d <= d' <= 2d+1.
    if (dim < 1 || ambient_dim < dim || ambient_dim > 2 * dim + 1) {
        throw ShapeError("manifold dimensions violate d <= d' <= 2d+1");
    }
}

void Manifold::check_point(const Vec& x) const {
    if (x.size() != dim_) {
        std::ostringstream os;
        os << name() << ": chart point has length " << x.size() << ", expected " << dim_;
        throw ShapeError(os.str());
    }
    if (!x.allFinite()) {
        throw DomainError(name() + ": non-finite chart coordinates");
    }
}

void Manifold::validate_domain(const Vec&) const {}

Vec Manifold::reduce(const Vec& x) const {
    Vec r = x;
    for (int i = 0; i < dim_; ++i) {
        double t = period(i);
        if (t > 0.0) {
            double v = std::fmod(r[i], t);
            if (v < 0.0) v += t;
            r[i] = v;
        }
    }
    return r;
}

Vec Manifold::embed(const Vec& x) const {
    check_point(x);
    Vec r = reduce(x);
    validate_domain(r);
    return embed_impl(r);
}

Mat Manifold::projection_matrix(const Vec& x) const {
    check_point(x);
    Vec r = reduce(x);
    validate_domain(r);
    return projection_impl(r);
}

Mat Manifold::metric_matrix(const Vec& x) const {
    Mat p = projection_matrix(x);
    return p * p.transpose();
}

Vec Manifold::chart_velocity_to_frame(const Vec& x, const Vec& v) const {
    // Default for manifolds whose coordinate frame is the shipped frame.
    check_point(x);
    if (v.size() != dim_) throw ShapeError(name() + ": velocity length mismatch");
    return v;
}

// ------------------------------ circle ------------------------------

class Circle final : public Manifold {
public:
    Circle() : Manifold(1, 2) {}
    ManifoldKind kind() const override { return ManifoldKind::Circle; }
    std::string name() const override { return "circle"; }
    bool compact() const override { return true; }
    double period(int) const override { return kTwoPi; }
    Vec random_point(Rng& rng) const override {
        Vec x(1);
        x[0] = rng.uniform(0.0, kTwoPi);
        return x;
    }

protected:
    Vec embed_impl(const Vec& x) const override {
        Vec e(2);
        e << std::cos(x[0]), std::sin(x[0]);
        return e;
    }
    Mat projection_impl(const Vec& x) const override {
        Mat p(1, 2);
        p << -std::sin(x[0]), std::cos(x[0]);
        return p;
    }
};

// ------------------------------ sphere ------------------------------

// Chart (phi, theta): colatitude phi in [0, pi], longitude theta in [0, 2pi).
// emb(phi, theta) = (cos theta sin phi, sin theta sin phi, cos phi).
// The frame is (phi-hat, theta-hat); theta = 0 fixes the frame at the poles.
class Sphere final : public Manifold {
public:
    Sphere() : Manifold(2, 3) {}
    ManifoldKind kind() const override { return ManifoldKind::Sphere; }
    std::string name() const override { return "sphere"; }
    bool compact() const override { return true; }
    double period(int coord) const override { return coord == 1 ? kTwoPi : 0.0; }

    Vec chart_velocity_to_frame(const Vec& x, const Vec& v) const override {
        check_point(x);
        if (v.size() != 2) throw ShapeError("sphere: velocity length mismatch");
        Vec w(2);
        w << v[0], std::sin(x[0]) * v[1];
        return w;
    }

    Vec random_point(Rng& rng) const override {
        // uniform on the sphere: cos(phi) uniform in [-1, 1]
        Vec x(2);
        x[0] = std::acos(rng.uniform(-1.0, 1.0));
        x[1] = rng.uniform(0.0, kTwoPi);
        return x;
    }

protected:
    void validate_domain(const Vec& x) const override {
        if (x[0] < 0.0 || x[0] > kPi) {
            throw DomainError("sphere: colatitude outside [0, pi]");
        }
    }
    Vec embed_impl(const Vec& x) const override {
        double sp = std::sin(x[0]), cp = std::cos(x[0]);
        Vec e(3);
        e << std::cos(x[1]) * sp, std::sin(x[1]) * sp, cp;
        return e;
    }
    Mat projection_impl(const Vec& x) const override {
        double phi = x[0];
        double theta = (std::sin(phi) == 0.0) ? 0.0 : x[1];  // pole gauge
        double sp = std::sin(phi), cp = std::cos(phi);
        double st = std::sin(theta), ct = std::cos(theta);
        Mat p(2, 3);
        p << ct * cp, st * cp, -sp,
             -st, ct, 0.0;
        return p;
    }
};

// ------------------------------ euclidean ------------------------------

class EuclideanSpace final : public Manifold {
public:
    explicit EuclideanSpace(int n) : Manifold(n, n) {}
    ManifoldKind kind() const override { return ManifoldKind::Euclidean; }
    std::string name() const override { return "euclidean" + std::to_string(dim_); }
    bool compact() const override { return false; }
    double period(int) const override { return 0.0; }
    Vec random_point(Rng& rng) const override {
        Vec x(dim_);
        for (int i = 0; i < dim_; ++i) x[i] = rng.normal();
        return x;
    }

protected:
    Vec embed_impl(const Vec& x) const override { return x; }
    Mat projection_impl(const Vec&) const override { return Mat::Identity(dim_, dim_); }
};

// ------------------------------ product ------------------------------

ProductManifold::ProductManifold(ManifoldPtr a, ManifoldPtr b)
    : Manifold(a->dim() + b->dim(), a->ambient_dim() + b->ambient_dim()),
      a_(std::move(a)),
      b_(std::move(b)) {}

std::string ProductManifold::name() const { return a_->name() + "x" + b_->name(); }

double ProductManifold::period(int coord) const {
    return coord < a_->dim() ? a_->period(coord) : b_->period(coord - a_->dim());
}

Vec ProductManifold::embed_impl(const Vec& x) const {
    Vec e(ambient_dim_);
    e.head(a_->ambient_dim()) = a_->embed(first_slice(x));
    e.tail(b_->ambient_dim()) = b_->embed(second_slice(x));
    return e;
}

Mat ProductManifold::projection_impl(const Vec& x) const {
    Mat p = Mat::Zero(dim_, ambient_dim_);
    p.topLeftCorner(a_->dim(), a_->ambient_dim()) = a_->projection_matrix(first_slice(x));
    p.bottomRightCorner(b_->dim(), b_->ambient_dim()) = b_->projection_matrix(second_slice(x));
    return p;
}

void ProductManifold::validate_domain(const Vec&) const {
    // factors validate their own slices inside embed/projection calls
}

Vec ProductManifold::chart_velocity_to_frame(const Vec& x, const Vec& v) const {
    check_point(x);
    if (v.size() != dim_) throw ShapeError(name() + ": velocity length mismatch");
    Vec w(dim_);
    w.head(a_->dim()) = a_->chart_velocity_to_frame(first_slice(x), v.head(a_->dim()));
    w.tail(b_->dim()) = b_->chart_velocity_to_frame(second_slice(x), v.tail(b_->dim()));
    return w;
}

Vec ProductManifold::random_point(Rng& rng) const {
    Vec x(dim_);
    x.head(a_->dim()) = a_->random_point(rng);
    x.tail(b_->dim()) = b_->random_point(rng);
    return x;
}

// ------------------------------ factories ------------------------------

FramedPoint frame_point(const ManifoldPtr& m, const Vec& chart) {
    return {m->reduce(chart), m->embed(chart), m->projection_matrix(chart)};
}

ManifoldPtr circle() { return std::make_shared<Circle>(); }
ManifoldPtr sphere() { return std::make_shared<Sphere>(); }

ManifoldPtr euclidean(int n) {
    if (n < 1) throw DomainError("euclidean: dimension must be positive");
    return std::make_shared<EuclideanSpace>(n);
}

ManifoldPtr product(ManifoldPtr a, ManifoldPtr b) {
    return std::make_shared<ProductManifold>(std::move(a), std::move(b));
}

ManifoldPtr cylinder() { return product(circle(), euclidean(1)); }
ManifoldPtr flat_torus() { return product(circle(), circle()); }

ManifoldPtr manifold_by_name(const std::string& name) {
    if (name == "circle") return circle();
    if (name == "sphere") return sphere();
    if (name == "cylinder") return cylinder();
    if (name == "torus") return flat_torus();
    if (name.rfind("euclidean", 0) == 0) {
        int n = 1;
        if (name.size() > 9) n = std::stoi(name.substr(9));
        return euclidean(n);
    }
    throw CapabilityError("unknown manifold: " + name);
}

// ------------------------------ gauge field ------------------------------

GaugeField GaugeField::identity(int dim) {
    return GaugeField([dim](const Vec&) { return Mat::Identity(dim, dim); }, "identity", true);
}

GaugeField GaugeField::constant(const Mat& A) {
    return GaugeField([A](const Vec&) { return A; }, "constant", true);
}

Mat GaugeField::at(const Vec& x) const {
    Mat a = fn_(x);
    if (a.rows() != a.cols()) throw GaugeError("gauge field returned a non-square matrix");
    double det = a.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-8) {
        std::ostringstream os;
        os << "gauge field '" << label_ << "' singular at point [" << x.transpose() << "]";
        throw GaugeError(os.str());
    }
    return a;
}

}  // namespace gvf
