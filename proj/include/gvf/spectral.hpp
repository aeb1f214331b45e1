#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gvf/manifold.hpp"
#include "gvf/rng.hpp"

namespace gvf {

/// nu value standing for the squared-exponential limit.
inline constexpr double kNuSquaredExponential = std::numeric_limits<double>::infinity();

/// Matern/SE spectral transform of a Laplace-Beltrami eigenvalue, before
/// variance rescaling: Matern (2nu/l^2 + lambda)^-(nu + d/2), SE exp(-l^2 lambda / 2).
double spectral_weight(double nu, double lengthscale, int dim, double lambda);

// ---------------------------------------------------------------------------
// Truncated Laplace-Beltrami eigenbases on compact manifolds
// ---------------------------------------------------------------------------

/// A truncated eigenbasis: eigenvalues ascending, functions L2-normalized.
/// Functions are grouped into complete eigenspace blocks; truncating on a
/// block boundary keeps sum_j psi_j(x)^2 constant on homogeneous manifolds.
class EigenBasis {
public:
    virtual ~EigenBasis() = default;

    const ManifoldPtr& manifold() const { return manifold_; }
    int size() const { return static_cast<int>(lambdas_.size()); }
    double eigenvalue(int j) const { return lambdas_[j]; }
    const std::vector<double>& eigenvalues() const { return lambdas_; }

    /// Start indices of the eigenspace blocks (last entry == size()).
    const std::vector<int>& block_bounds() const { return block_bounds_; }

    /// All psi_j(x); x is a chart point of the associated manifold.
    virtual Vec eval_all(const Vec& x) const = 0;

    /// Single psi_j(x).
    virtual double eval_one(int j, const Vec& x) const = 0;

protected:
    explicit EigenBasis(ManifoldPtr m) : manifold_(std::move(m)) {}

    ManifoldPtr manifold_;
    std::vector<double> lambdas_;
    std::vector<int> block_bounds_;  // includes trailing size()
};

using EigenBasisPtr = std::shared_ptr<const EigenBasis>;

/// Build a truncated eigenbasis with at least `count` functions. When
/// `complete_blocks` is set the count is rounded up to a block boundary.
EigenBasisPtr make_eigenbasis(const ManifoldPtr& m, int count, bool complete_blocks);

/// One Laplace-Beltrami eigenpair.
struct EigenPair {
    double lambda = 0.0;
    int index = 0;
    std::function<double(const Vec&)> psi;
};

/// The `count` smallest eigenpairs of the manifold Laplacian.
/// Supported: circle, sphere, and products of compact manifolds.
std::vector<EigenPair> laplacian_eigenpairs(const ManifoldPtr& m, int count);

/// The `count` smallest of (alpha_i + beta_j, f_i * g_j), merged lazily from
/// two ascending eigenpair lists. dim_a/dim_b are the factor chart lengths;
/// product eigenfunctions take the concatenated chart point.
std::vector<EigenPair> product_eigenpairs(const std::vector<EigenPair>& a, int dim_a,
                                          const std::vector<EigenPair>& b, int dim_b,
                                          int count);

// ---------------------------------------------------------------------------
// Scalar kernels
// ---------------------------------------------------------------------------

/// A deterministic draw of a scalar GP sample path.
using ScalarField = std::function<double(const Vec&)>;

class ScalarKernel;
using ScalarKernelPtr = std::shared_ptr<const ScalarKernel>;

/// Scalar positive-definite kernel on a manifold. Immutable and thread-safe;
/// weights are precomputed at construction.
class ScalarKernel {
public:
    virtual ~ScalarKernel() = default;

    const ManifoldPtr& manifold() const { return manifold_; }
    /// k(x, x); constant by normalization.
    double variance() const { return variance_; }

    double eval(const Vec& x, const Vec& y) const;

    /// All pairwise values k(a_i, b_j); the spectral kernels specialize this
    /// with one basis-evaluation pass per point.
    Mat batch_eval(std::span<const Vec> a, std::span<const Vec> b) const;

    virtual std::string describe() const = 0;
    virtual std::vector<double> lengthscales() const = 0;
    virtual std::vector<double> nus() const = 0;
    virtual ScalarKernelPtr with_lengthscales(std::span<const double> ls) const = 0;

    /// Draw one sample path of the zero-mean GP with this covariance.
    /// `rff_count` is the feature count for stationary Euclidean blocks.
    virtual ScalarField sample_function(Rng rng, int rff_count) const = 0;

protected:
    ScalarKernel(ManifoldPtr m, double variance) : manifold_(std::move(m)), variance_(variance) {
        if (variance_ <= 0.0) throw DomainError("kernel amplitude must be positive");
    }

    virtual double eval_impl(const Vec& x, const Vec& y) const = 0;
    virtual Mat batch_eval_impl(std::span<const Vec> a, std::span<const Vec> b) const;

    ManifoldPtr manifold_;
    double variance_;
};

/// Karhunen-Loeve kernel on a compact manifold: sum_j w_j psi_j(x) psi_j(y)
/// with w_j a rescaled Matern/SE transform of the Laplacian spectrum.
class SpectralScalarKernel final : public ScalarKernel {
public:
    SpectralScalarKernel(ManifoldPtr m, double nu, double lengthscale, double variance,
                         int truncation);

    std::string describe() const override;
    std::vector<double> lengthscales() const override { return {lengthscale_}; }
    std::vector<double> nus() const override { return {nu_}; }
    ScalarKernelPtr with_lengthscales(std::span<const double> ls) const override;
    ScalarField sample_function(Rng rng, int rff_count) const override;

    double nu() const { return nu_; }
    double lengthscale() const { return lengthscale_; }
    const EigenBasisPtr& basis() const { return basis_; }
    /// Rescaled weights w_j (KL variances), nonincreasing in lambda.
    const Vec& weights() const { return weights_; }

protected:
    double eval_impl(const Vec& x, const Vec& y) const override;
    Mat batch_eval_impl(std::span<const Vec> a, std::span<const Vec> b) const override;

private:
    double nu_;
    double lengthscale_;
    int truncation_;
    EigenBasisPtr basis_;
    Vec weights_;
};

/// Stationary isotropic Matern/SE kernel on R^n with spectral-density RFF support.
class EuclideanMaternKernel final : public ScalarKernel {
public:
    EuclideanMaternKernel(int n, double nu, double lengthscale, double variance);

    std::string describe() const override;
    std::vector<double> lengthscales() const override { return {lengthscale_}; }
    std::vector<double> nus() const override { return {nu_}; }
    ScalarKernelPtr with_lengthscales(std::span<const double> ls) const override;
    ScalarField sample_function(Rng rng, int rff_count) const override;

    double nu() const { return nu_; }
    double lengthscale() const { return lengthscale_; }
    int input_dim() const { return manifold_->dim(); }

    /// Stationary profile k(r) at separation distance r (variance included).
    double profile(double r) const;

    /// One frequency draw from the kernel's spectral density.
    Vec sample_frequency(Rng& rng) const;

protected:
    double eval_impl(const Vec& x, const Vec& y) const override;

private:
    double nu_;
    double lengthscale_;
};

/// Product of two scalar kernels over the factors of a product manifold.
class ProductScalarKernel final : public ScalarKernel {
public:
    ProductScalarKernel(ManifoldPtr m, ScalarKernelPtr a, ScalarKernelPtr b);

    std::string describe() const override;
    std::vector<double> lengthscales() const override;
    std::vector<double> nus() const override;
    ScalarKernelPtr with_lengthscales(std::span<const double> ls) const override;
    ScalarField sample_function(Rng rng, int rff_count) const override;

    const ScalarKernelPtr& first() const { return a_; }
    const ScalarKernelPtr& second() const { return b_; }

protected:
    double eval_impl(const Vec& x, const Vec& y) const override;
    Mat batch_eval_impl(std::span<const Vec> a, std::span<const Vec> b) const override;

private:
    ScalarKernelPtr a_;
    ScalarKernelPtr b_;
};

/// Matern kernel on any shipped manifold: spectral on compact manifolds,
/// closed form on Euclidean space. nu = inf gives the squared exponential.
/// truncation < 0 picks the per-manifold default.
ScalarKernelPtr matern_kernel(const ManifoldPtr& m, double nu, double lengthscale,
                              double variance, int truncation = -1);

/// Squared-exponential kernel (nu = inf).
ScalarKernelPtr se_kernel(const ManifoldPtr& m, double lengthscale, double variance,
                          int truncation = -1);

/// Product kernel bound to a product manifold's factor split.
ScalarKernelPtr product_kernel(const ManifoldPtr& m, ScalarKernelPtr a, ScalarKernelPtr b);

/// Default truncation count for a compact manifold.
int default_truncation(const ManifoldPtr& m);

}  // namespace gvf
