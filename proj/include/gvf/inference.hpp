#pragma once

#include <Eigen/Cholesky>

#include <cstdint>
#include <span>
#include <vector>

#include "gvf/projected.hpp"

namespace gvf {

/// Vector-field observations: tangent coefficient vectors in the kernel's
/// frame at chart points, with i.i.d. noise per scalar channel.
struct VectorObservationSet {
    std::vector<Vec> points;
    std::vector<Vec> values;
    double noise_variance = 1e-6;

    int size() const { return static_cast<int>(points.size()); }
    void validate(int d) const;
    /// Values stacked into one nd vector.
    Vec stacked() const;
};

/// Cholesky with an escalating relative jitter ladder:
/// 1e-10 * mean_diag up to 1e-4 * mean_diag, then ConditioningError.
struct JitterChol {
    Eigen::LLT<Mat> llt;
    double jitter = 0.0;
};
JitterChol robust_cholesky(const Mat& k);

/// log N(y | 0, K + noise I)
double gaussian_log_marginal(const Mat& gram, const Vec& y, double noise_variance);

/// KL( N(m1, s1) || N(0, k) ); used by the ELBO and exposed for tests.
double gaussian_kl(const Vec& m1, const Mat& s1, const Mat& k);

// ---------------------------------------------------------------------------
// Exact conditioning
// ---------------------------------------------------------------------------

class ExactPosterior {
public:
    ExactPosterior(ProjectedKernelPtr kernel, VectorObservationSet obs);

    Vec mean(const Vec& x) const;
    Mat cov(const Vec& x, const Vec& y) const;

    /// Means and per-point covariance blocks at many test points.
    std::pair<std::vector<Vec>, std::vector<Mat>> predict(std::span<const Vec> pts) const;

    double log_marginal() const { return log_marginal_; }
    const VectorObservationSet& observations() const { return obs_; }
    const ProjectedKernelPtr& kernel() const { return kernel_; }
    const JitterChol& cholesky() const { return chol_; }

private:
    ProjectedKernelPtr kernel_;
    VectorObservationSet obs_;
    JitterChol chol_;
    Vec alpha_;
    double log_marginal_ = 0.0;
};

/// Desk-scale guard: nd <= 5000.
ExactPosterior exact_posterior_fit(const ProjectedKernelPtr& kernel,
                                   const VectorObservationSet& obs);

/// Matheron update of a prior draw:
/// x -> f(x) + K_xX (K_XX + noise I)^-1 (y - f(X) - eps), eps ~ N(0, noise I).
FieldSample pathwise_posterior_sample(const FieldSample& prior, const ExactPosterior& posterior,
                                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sparse variational inference
// ---------------------------------------------------------------------------

/// Variational state: inducing locations, mean, block-diagonal covariance
/// (stored as lower-triangular factors), kernel hyperparameters, noise.
struct SVGPState {
    std::vector<Vec> inducing;
    Vec mu;                          // md
    std::vector<Mat> sigma_factors;  // m lower-triangular d x d blocks
    std::vector<double> lengthscales;
    std::vector<double> nus;
    double variance = 1.0;
    double noise_variance = 1e-2;
    std::string manifold_name;
    std::uint64_t seed = 0;

    int inducing_count() const { return static_cast<int>(inducing.size()); }
    int dim() const { return inducing.empty() ? 0 : static_cast<int>(inducing[0].size()); }
    Mat sigma_block(int j) const { return sigma_factors[j] * sigma_factors[j].transpose(); }
    /// Full block-diagonal Sigma (md x md).
    Mat sigma() const;
    void validate() const;
};

struct SVGPPrediction {
    std::vector<Vec> means;
    std::vector<Mat> covs;
};

/// m(.) = K_.z (K_zz + Sigma)^-1 mu
/// S(.,.) = K_(.,.) - K_.z (K_zz + Sigma)^-1 K_z. ,
/// the covariance implied by the pathwise form of the variational family.
SVGPPrediction svgp_predict(const SVGPState& state, const ProjectedMatrixKernel& kernel,
                            std::span<const Vec> test_points);

/// Evidence lower bound with minibatch rescaling n/|batch|.
double svgp_elbo(const SVGPState& state, const ProjectedMatrixKernel& kernel,
                 const VectorObservationSet& obs, std::span<const int> minibatch);

struct SVGPFitOptions {
    int steps = 200;
    double learning_rate = 1e-2;  // Adam
    int minibatch = 0;            // 0 = full batch
    bool optimize_lengthscales = true;
    bool optimize_inducing = false;  // kept off: fixed farthest-point inducing set
};

/// Adam on the negative ELBO over {mu, Sigma factors, lengthscales}.
/// Gradients are analytic for mu/Sigma and central-difference for the
/// lengthscales. Returns the best full-data-ELBO state visited.
SVGPState svgp_fit(const ProjectedMatrixKernel& kernel, const VectorObservationSet& obs, int m,
                   const SVGPFitOptions& options, std::uint64_t seed);

/// x -> f(x) + K_xz (K_zz + Sigma)^-1 (mu - f(z) - eps), eps ~ N(0, Sigma).
FieldSample svgp_pathwise_sample(const SVGPState& state, const ProjectedKernelPtr& kernel,
                                 const FieldSample& prior, std::uint64_t seed);

/// Greedy farthest-point subset under geodesic distance, seeded at the point
/// closest to the set's medoid-ish center (first point for determinism).
std::vector<Vec> farthest_point_subset(const ManifoldPtr& m, std::span<const Vec> pts, int count);

/// Geodesic distance between chart points on a shipped manifold.
double geodesic_distance(const ManifoldPtr& m, const Vec& x, const Vec& y);

/// ELBO gradients for the unconstrained parameters; exposed for the
/// finite-difference gradient check.
struct SVGPGradients {
    double elbo = 0.0;
    Vec d_mu;
    std::vector<Mat> d_sigma_factors;  // lower-triangular
};
SVGPGradients svgp_elbo_with_gradients(const SVGPState& state,
                                       const ProjectedMatrixKernel& kernel,
                                       const VectorObservationSet& obs,
                                       std::span<const int> minibatch);

}  // namespace gvf
