#pragma once

#include <cstdint>

#include "gvf/spectral.hpp"

namespace gvf {

/// Random Fourier feature map phi_i(e) = sigma sqrt(2) cos(w_i . e + b_i) with
/// frequencies drawn from the kernel's spectral density. The implied kernel
/// estimate is (1/l) phi(x)^T phi(y).
struct RffFeatureMap {
    Mat frequencies;  // l x n
    Vec phases;       // l
    double scale = 1.0;

    int count() const { return static_cast<int>(phases.size()); }

    Vec eval(const Vec& e) const {
        Vec out = frequencies * e + phases;
        for (int i = 0; i < out.size(); ++i) out[i] = scale * std::cos(out[i]);
        return out;
    }

    double kernel_estimate(const Vec& x, const Vec& y) const {
        return eval(x).dot(eval(y)) / count();
    }
};

/// Deterministic-in-seed RFF basis for a stationary Euclidean kernel.
RffFeatureMap make_rff_features(const EuclideanMaternKernel& kernel, int l, std::uint64_t seed);

/// Combined RFF x KL feature map for a product of a Euclidean and a compact
/// kernel: f(e, m) = l^{-1/2} sum_ij w_ij phi_i(e) psi_j(m), w_ij ~ N(0, w_j).
struct CombinedFeatureMap {
    RffFeatureMap rff;
    EigenBasisPtr basis;
    Vec weight_std;  // sqrt of the compact kernel's KL weights

    int l() const { return rff.count(); }
    int k() const { return static_cast<int>(weight_std.size()); }

    double eval_with_weights(const Mat& w, const Vec& e, const Vec& m) const;

    /// w_ij ~ N(0, weight_std_j^2), row i over RFF features, column j over KL.
    Mat sample_weights(Rng& rng) const;

    /// One sampled function (e, m) -> R.
    std::function<double(const Vec&, const Vec&)> sample(Rng& rng) const;
};

CombinedFeatureMap make_combined_feature_map(const EuclideanMaternKernel& euclid,
                                             const SpectralScalarKernel& compact, int l,
                                             std::uint64_t seed);

}  // namespace gvf
