#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "gvf/spectral.hpp"

namespace gvf {

class ProjectedMatrixKernel;
using ProjectedKernelPtr = std::shared_ptr<const ProjectedMatrixKernel>;

/// Gauge-independent matrix-valued kernel K_F(x,x') = P_x kappa(x,x') P_x'^T,
/// with kappa a d'xd' ambient kernel (shipped form: scalar kernel times the
/// identity) and P the frame's projection matrix, optionally composed with a
/// gauge transformation A(x).
class ProjectedMatrixKernel : public std::enable_shared_from_this<ProjectedMatrixKernel> {
public:
    using AmbientFn = std::function<Mat(const Vec&, const Vec&)>;

    /// Shipped form: kappa = scalar * I_{d' x d'}.
    ProjectedMatrixKernel(ManifoldPtr m, ScalarKernelPtr scalar);

    /// General matrix-valued ambient kernel.
    ProjectedMatrixKernel(ManifoldPtr m, AmbientFn kappa);

    int dim() const { return manifold_->dim(); }
    int ambient_dim() const { return manifold_->ambient_dim(); }
    const ManifoldPtr& manifold() const { return manifold_; }
    /// Null when constructed from a general ambient kernel.
    const ScalarKernelPtr& scalar_kernel() const { return scalar_; }
    const std::optional<GaugeField>& gauge() const { return gauge_; }

    /// K_F(x, x'): d x d covariance block between tangent spaces.
    Mat eval(const Vec& x, const Vec& y) const;

    /// Block Gram matrix over one point set (nd x nd).
    Mat gram(std::span<const Vec> pts) const;

    /// Cross Gram between two point sets (|a|d x |b|d).
    Mat cross_gram(std::span<const Vec> a, std::span<const Vec> b) const;

    /// Frame transformation: the returned kernel evaluates
    /// K_{AF}(x,x') = A(x) K_F(x,x') A(x')^T.
    ProjectedKernelPtr with_gauge(GaugeField a) const;

    /// Same kernel family with new scalar lengthscales.
    ProjectedKernelPtr with_lengthscales(std::span<const double> ls) const;

    /// A(x) P_x: maps ambient function values to frame coefficients.
    Mat coeff_projection(const Vec& x) const;

    /// P_x^T A(x)^{-1}: maps frame coefficients to ambient tangent vectors.
    Mat pushforward(const Vec& x) const;

private:
    ManifoldPtr manifold_;
    ScalarKernelPtr scalar_;
    AmbientFn kappa_;
    std::optional<GaugeField> gauge_;
};

ProjectedKernelPtr projected_kernel(ManifoldPtr m, ScalarKernelPtr scalar);

/// One draw of a Gaussian vector field: chart point -> tangent coefficients
/// in the kernel's frame. Holds the underlying ambient feature functions.
class FieldSample {
public:
    FieldSample(ProjectedKernelPtr kernel, std::function<Vec(const Vec&)> coeff_fn,
                std::uint64_t seed)
        : kernel_(std::move(kernel)), fn_(std::move(coeff_fn)), seed_(seed) {}

    /// Tangent coefficients at x (length d).
    Vec operator()(const Vec& x) const { return fn_(x); }

    /// Ambient pushforward of the value at x (length d').
    Vec ambient(const Vec& x) const { return kernel_->pushforward(x) * fn_(x); }

    const ProjectedKernelPtr& kernel() const { return kernel_; }
    std::uint64_t seed() const { return seed_; }

private:
    ProjectedKernelPtr kernel_;
    std::function<Vec(const Vec&)> fn_;
    std::uint64_t seed_;
};

/// Prior vector field draw: d' independent scalar feature-map samples pushed
/// through the frame projection. Deterministic in seed.
FieldSample sample_prior_field(const ProjectedKernelPtr& kernel, int feature_budget,
                               std::uint64_t seed);

struct GaugeIndependenceReport {
    double max_deviation = 0.0;
    int trials = 0;
    bool empty = false;  // n_gauges == 0: max over nothing, reported as 0
};

/// Max deviation of K_{AF}(x,x') vs A(x) K_F(x,x') A(x')^T over random points
/// and random gauges (rotations and condition-bounded matrices).
GaugeIndependenceReport gauge_independence_report(const ProjectedMatrixKernel& kernel,
                                                  int n_points, int n_gauges,
                                                  std::uint64_t seed);

/// Same sweep for an arbitrary gauged evaluation; lets tests run deliberately
/// broken kernels as negative controls.
GaugeIndependenceReport gauge_independence_sweep(
    const ManifoldPtr& m, int dim,
    const std::function<Mat(const GaugeField&, const Vec&, const Vec&)>& gauged_eval,
    const std::function<Mat(const Vec&, const Vec&)>& base_eval, int n_points, int n_gauges,
    std::uint64_t seed);

/// Smooth random gauge field with condition number bounded by 10.
/// `rotation_only` restricts to pointwise rotations.
GaugeField random_gauge_field(const ManifoldPtr& m, Rng rng, bool rotation_only);

}  // namespace gvf
