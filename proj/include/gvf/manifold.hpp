#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gvf/errors.hpp"

namespace gvf {

class Rng;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Manifold;
using ManifoldPtr = std::shared_ptr<const Manifold>;

enum class ManifoldKind { Circle, Sphere, Euclidean, Product };

/// An embedded Riemannian manifold: chart coordinates, an isometric embedding
/// into R^{d'}, and an orthonormal frame represented by its projection matrix.
///
/// Immutable after construction; all operations are pure and thread-safe.
class Manifold : public std::enable_shared_from_this<Manifold> {
public:
    virtual ~Manifold() = default;

    int dim() const { return dim_; }
    int ambient_dim() const { return ambient_dim_; }

    virtual ManifoldKind kind() const = 0;
    virtual std::string name() const = 0;

    /// True when every factor is compact (circle, sphere, products thereof).
    virtual bool compact() const = 0;

    /// Period of chart coordinate `coord`, 0 if the coordinate is not periodic.
    virtual double period(int coord) const = 0;

    /// Ambient image of a chart point. Periodic coordinates are reduced first.
    Vec embed(const Vec& x) const;

    /// The d x d' matrix P_x whose rows are the frame covectors in ambient
    /// coordinates. For the shipped orthonormal frames P_x P_x^T = I_d.
    Mat projection_matrix(const Vec& x) const;

    /// P_x P_x^T, the metric matrix in the frame.
    Mat metric_matrix(const Vec& x) const;

    /// Reduce periodic coordinates into [0, period).
    Vec reduce(const Vec& x) const;

    /// Frame coefficients of a chart-coordinate velocity v at x, i.e. the
    /// vector w with d_x emb applied to v equal to P_x^T w.
    virtual Vec chart_velocity_to_frame(const Vec& x, const Vec& v) const;

    /// Uniform-ish random chart point for tests and reports.
    virtual Vec random_point(Rng& rng) const = 0;

protected:
    Manifold(int dim, int ambient_dim);

    virtual Vec embed_impl(const Vec& x) const = 0;
    virtual Mat projection_impl(const Vec& x) const = 0;

    /// Per-manifold domain validation of a (reduced) chart point.
    virtual void validate_domain(const Vec& x) const;

    void check_point(const Vec& x) const;

    int dim_;
    int ambient_dim_;
};

/// A chart point bundled with its ambient image and frame projection matrix.
struct FramedPoint {
    Vec chart;       // length d
    Vec ambient;     // length d', equals emb(chart)
    Mat projection;  // d x d', satisfies P P^T = metric matrix
};

/// Evaluate the embedding and projection at a chart point.
FramedPoint frame_point(const ManifoldPtr& m, const Vec& chart);

ManifoldPtr circle();
ManifoldPtr sphere();
ManifoldPtr euclidean(int n);
ManifoldPtr product(ManifoldPtr a, ManifoldPtr b);

/// S^1 x R, the pendulum state space.
ManifoldPtr cylinder();
/// S^1 x S^1 embedded flat in R^4.
ManifoldPtr flat_torus();

/// Lookup by CLI name: circle, sphere, euclidean1/2/..., cylinder, torus.
ManifoldPtr manifold_by_name(const std::string& name);

/// Product manifold access; kind() == Product guarantees the cast.
class ProductManifold : public Manifold {
public:
    ProductManifold(ManifoldPtr a, ManifoldPtr b);

    ManifoldKind kind() const override { return ManifoldKind::Product; }
    std::string name() const override;
    bool compact() const override { return a_->compact() && b_->compact(); }
    double period(int coord) const override;
    Vec chart_velocity_to_frame(const Vec& x, const Vec& v) const override;
    Vec random_point(Rng& rng) const override;

    const ManifoldPtr& first() const { return a_; }
    const ManifoldPtr& second() const { return b_; }
    Vec first_slice(const Vec& x) const { return x.head(a_->dim()); }
    Vec second_slice(const Vec& x) const { return x.tail(b_->dim()); }

protected:
    Vec embed_impl(const Vec& x) const override;
    Mat projection_impl(const Vec& x) const override;
    void validate_domain(const Vec& x) const override;

private:
    ManifoldPtr a_;
    ManifoldPtr b_;
};

/// A pointwise invertible matrix field A(x) acting on frame representations.
class GaugeField {
public:
    using Fn = std::function<Mat(const Vec&)>;

    GaugeField(Fn fn, std::string label = "gauge", bool smooth = false)
        : fn_(std::move(fn)), label_(std::move(label)), smooth_(smooth) {}

    static GaugeField identity(int dim);
    static GaugeField constant(const Mat& A);

    /// Evaluate A(x); throws GaugeError naming the point when |det| < 1e-8.
    Mat at(const Vec& x) const;

    const std::string& label() const { return label_; }
    bool smooth() const { return smooth_; }

private:
    Fn fn_;
    std::string label_;
    bool smooth_;
};

}  // namespace gvf
