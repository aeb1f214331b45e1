#include "gvf/inference.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gvf {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

// ---------------------------------------------------------------------------
// observations, linear algebra helpers
// ---------------------------------------------------------------------------

void VectorObservationSet::validate(int d) const {
    if (points.empty()) throw ShapeError("observation set is empty");
    if (points.size() != values.size()) {
        throw ShapeError("observation points/values length mismatch");
    }
    if (!(noise_variance > 0.0)) throw DomainError("observation noise variance must be positive");
    for (size_t i = 0; i < points.size(); ++i) {
        if (values[i].size() != d) throw ShapeError("observation value has wrong dimension");
        if (!points[i].allFinite() || !values[i].allFinite()) {
            throw DomainError("observation contains non-finite entries");
        }
    }
}

Vec VectorObservationSet::stacked() const {
    const int d = static_cast<int>(values.empty() ? 0 : values[0].size());
    Vec y(static_cast<int>(values.size()) * d);
    for (size_t i = 0; i < values.size(); ++i) y.segment(i * d, d) = values[i];
    return y;
}

JitterChol robust_cholesky(const Mat& k) {
    const int n = static_cast<int>(k.rows());
    const double mean_diag = std::max(k.diagonal().mean(), 1e-300);
    JitterChol out;
    for (double rel = 0.0;;) {
        Mat shifted = k;
        if (rel > 0.0) shifted.diagonal().array() += rel * mean_diag;
        out.llt.compute(shifted);
        if (out.llt.info() == Eigen::Success) {
            // LLT can "succeed" on slightly indefinite inputs; accept only a
            // finite factor
            if (Mat(out.llt.matrixL()).allFinite()) {
                out.jitter = rel * mean_diag;
                return out;
            }
        }
        rel = (rel == 0.0) ? 1e-10 : rel * 10.0;
        if (rel > 1e-4 * 1.5) break;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(k);
    double smallest = es.eigenvalues().minCoeff();
    std::ostringstream os;
    os << "Cholesky failed after max jitter " << 1e-4 * mean_diag << " on a " << n << "x" << n
       << " Gram matrix; smallest eigenvalue " << smallest;
    throw ConditioningError(os.str(), smallest);
}

double gaussian_log_marginal(const Mat& gram, const Vec& y, double noise_variance) {
    Mat shifted = gram;
    shifted.diagonal().array() += noise_variance;
    JitterChol chol = robust_cholesky(shifted);
    Vec alpha = chol.llt.solve(y);
    double logdet = 2.0 * Mat(chol.llt.matrixL()).diagonal().array().log().sum();
    return -0.5 * (y.dot(alpha) + logdet + y.size() * kLog2Pi);
}

double gaussian_kl(const Vec& m1, const Mat& s1, const Mat& k) {
    const int n = static_cast<int>(m1.size());
    JitterChol ck = robust_cholesky(k);
    JitterChol cs = robust_cholesky(s1);
    double logdet_k = 2.0 * Mat(ck.llt.matrixL()).diagonal().array().log().sum();
    double logdet_s = 2.0 * Mat(cs.llt.matrixL()).diagonal().array().log().sum();
    double trace = ck.llt.solve(s1).trace();
    double quad = m1.dot(ck.llt.solve(m1));
    return 0.5 * (trace + quad - n + logdet_k - logdet_s);
}

double geodesic_distance(const ManifoldPtr& m, const Vec& x, const Vec& y) {
    switch (m->kind()) {
        case ManifoldKind::Circle: {
            double t = std::remainder(x[0] - y[0], 2.0 * M_PI);
            return std::abs(t);
        }
        case ManifoldKind::Sphere: {
            double c = m->embed(x).dot(m->embed(y));
            return std::acos(std::clamp(c, -1.0, 1.0));
        }
        case ManifoldKind::Euclidean:
            return (x - y).norm();
        case ManifoldKind::Product: {
            auto* pm = static_cast<const ProductManifold*>(m.get());
            double da = geodesic_distance(pm->first(), pm->first_slice(x), pm->first_slice(y));
            double db = geodesic_distance(pm->second(), pm->second_slice(x), pm->second_slice(y));
            return std::hypot(da, db);
        }
    }
    throw CapabilityError("geodesic distance: unsupported manifold");
}

std::vector<Vec> farthest_point_subset(const ManifoldPtr& m, std::span<const Vec> pts,
                                       int count) {
    if (count < 1 || count > static_cast<int>(pts.size())) {
        throw DomainError("farthest point subset: count out of range");
    }
    std::vector<Vec> out;
    out.reserve(count);
    std::vector<double> min_dist(pts.size(), std::numeric_limits<double>::infinity());
    size_t next = 0;  // deterministic start
    for (int step = 0; step < count; ++step) {
        out.push_back(pts[next]);
        for (size_t i = 0; i < pts.size(); ++i) {
            min_dist[i] = std::min(min_dist[i], geodesic_distance(m, pts[i], pts[next]));
        }
        next = std::distance(min_dist.begin(), std::max_element(min_dist.begin(), min_dist.end()));
    }
    return out;
}

// ---------------------------------------------------------------------------
// exact posterior
// ---------------------------------------------------------------------------

ExactPosterior::ExactPosterior(ProjectedKernelPtr kernel, VectorObservationSet obs)
    : kernel_(std::move(kernel)), obs_(std::move(obs)) {
    const int d = kernel_->dim();
    obs_.validate(d);
    Mat k = kernel_->gram(obs_.points);
    k.diagonal().array() += obs_.noise_variance;
    chol_ = robust_cholesky(k);
    Vec y = obs_.stacked();
    alpha_ = chol_.llt.solve(y);
    double logdet = 2.0 * Mat(chol_.llt.matrixL()).diagonal().array().log().sum();
    log_marginal_ = -0.5 * (y.dot(alpha_) + logdet + y.size() * kLog2Pi);
}

Vec ExactPosterior::mean(const Vec& x) const {
    std::vector<Vec> one{x};
    Mat kx = kernel_->cross_gram(one, obs_.points);
    return kx * alpha_;
}

Mat ExactPosterior::cov(const Vec& x, const Vec& y) const {
    std::vector<Vec> vx{x}, vy{y};
    Mat kx = kernel_->cross_gram(vx, obs_.points);
    Mat ky = kernel_->cross_gram(vy, obs_.points);
    return kernel_->eval(x, y) - kx * chol_.llt.solve(ky.transpose());
}

std::pair<std::vector<Vec>, std::vector<Mat>> ExactPosterior::predict(
    std::span<const Vec> pts) const {
    const int d = kernel_->dim();
    Mat b = kernel_->cross_gram(pts, obs_.points);
    Mat v = chol_.llt.solve(b.transpose());
    Vec mu = b * alpha_;
    std::vector<Vec> means(pts.size());
    std::vector<Mat> covs(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        means[i] = mu.segment(i * d, d);
        covs[i] = kernel_->eval(pts[i], pts[i]) -
                  b.middleRows(i * d, d) * v.middleCols(i * d, d);
    }
    return {means, covs};
}

ExactPosterior exact_posterior_fit(const ProjectedKernelPtr& kernel,
                                   const VectorObservationSet& obs) {
    long nd = static_cast<long>(obs.points.size()) * kernel->dim();
    if (nd > 5000) {
        throw DomainError("exact posterior limited to nd <= 5000 at desk scale");
    }
    return ExactPosterior(kernel, obs);
}

FieldSample pathwise_posterior_sample(const FieldSample& prior, const ExactPosterior& posterior,
                                      std::uint64_t seed) {
    const auto& obs = posterior.observations();
    const auto& kernel = posterior.kernel();
    const int d = kernel->dim();
    const int n = obs.size();
    Rng rng = Rng(seed).split("pathwise-noise");
    Vec resid = obs.stacked();
    double sd = std::sqrt(obs.noise_variance);
    for (int i = 0; i < n; ++i) {
        resid.segment(i * d, d) -= prior(obs.points[i]);
    }
    for (int i = 0; i < n * d; ++i) resid[i] -= sd * rng.normal();
    Vec v = posterior.cholesky().llt.solve(resid);

    auto points = obs.points;
    FieldSample base = prior;
    ProjectedKernelPtr k = kernel;
    auto fn = [base, k, points, v, d](const Vec& x) {
        std::vector<Vec> one{x};
        Mat kx = k->cross_gram(one, points);
        return Vec(base(x) + kx * v);
    };
    return FieldSample(kernel, fn, seed);
}

// ---------------------------------------------------------------------------
// SVGP
// ---------------------------------------------------------------------------

Mat SVGPState::sigma() const {
    const int d = dim();
    const int m = inducing_count();
    Mat s = Mat::Zero(m * d, m * d);
    for (int j = 0; j < m; ++j) {
        s.block(j * d, j * d, d, d) = sigma_block(j);
    }
    return s;
}

void SVGPState::validate() const {
    const int m = inducing_count();
    if (m < 1) throw StateError("SVGP state has no inducing points");
    const int d = dim();
    if (mu.size() != m * d) throw StateError("SVGP mean has the wrong length");
    if (static_cast<int>(sigma_factors.size()) != m) {
        throw StateError("SVGP state needs one covariance factor per inducing point");
    }
    if (!(noise_variance > 0.0)) throw StateError("SVGP noise variance must be positive");
    if (!mu.allFinite()) throw StateError("SVGP mean contains non-finite entries");
    for (const auto& f : sigma_factors) {
        if (f.rows() != d || f.cols() != d || !f.allFinite()) {
            throw StateError("SVGP covariance factor malformed");
        }
        for (int i = 0; i < d; ++i) {
            if (f(i, i) == 0.0) throw StateError("SVGP covariance factor is singular");
        }
    }
}

namespace {

struct SVGPWork {
    Mat kzz;         // M x M
    Mat a;           // kzz + sigma
    JitterChol chol; // of a
    Vec c;           // a^-1 mu
};

SVGPWork svgp_prepare(const SVGPState& state, const ProjectedMatrixKernel& kernel) {
    state.validate();
    SVGPWork w;
    w.kzz = kernel.gram(state.inducing);
    w.a = w.kzz + state.sigma();
    w.chol = robust_cholesky(w.a);
    w.c = w.chol.llt.solve(state.mu);
    return w;
}

}  // namespace

SVGPPrediction svgp_predict(const SVGPState& state, const ProjectedMatrixKernel& kernel,
                            std::span<const Vec> test_points) {
    SVGPWork w = svgp_prepare(state, kernel);
    const int d = kernel.dim();
    Mat b = kernel.cross_gram(test_points, state.inducing);
    Mat v = w.chol.llt.solve(b.transpose());
    Vec mu = b * w.c;
    SVGPPrediction out;
    out.means.resize(test_points.size());
    out.covs.resize(test_points.size());
    for (size_t i = 0; i < test_points.size(); ++i) {
        out.means[i] = mu.segment(i * d, d);
        out.covs[i] = kernel.eval(test_points[i], test_points[i]) -
                      b.middleRows(i * d, d) * v.middleCols(i * d, d);
    }
    return out;
}

SVGPGradients svgp_elbo_with_gradients(const SVGPState& state,
                                       const ProjectedMatrixKernel& kernel,
                                       const VectorObservationSet& obs,
                                       std::span<const int> minibatch) {
    const int d = kernel.dim();
    obs.validate(d);
    if (minibatch.empty()) throw DomainError("minibatch must be a nonempty subset");
    for (int idx : minibatch) {
        if (idx < 0 || idx >= obs.size()) throw DomainError("minibatch index out of range");
    }
    SVGPWork w = svgp_prepare(state, kernel);
    const int m = state.inducing_count();
    const int bigm = m * d;
    const int nb = static_cast<int>(minibatch.size());
    const double weight = static_cast<double>(obs.size()) / nb;
    const double s2 = state.noise_variance;

    std::vector<Vec> bpoints(nb);
    for (int i = 0; i < nb; ++i) bpoints[i] = obs.points[minibatch[i]];
    Mat b = kernel.cross_gram(bpoints, state.inducing);  // (nb d) x M
    Mat v = w.chol.llt.solve(b.transpose());             // M x (nb d)

    double lik = 0.0;
    Vec resid(nb * d);
    for (int i = 0; i < nb; ++i) {
        Vec mi = b.middleRows(i * d, d) * w.c;
        Vec ri = obs.values[minibatch[i]] - mi;
        resid.segment(i * d, d) = ri;
        Mat kii = kernel.eval(bpoints[i], bpoints[i]);
        double tr_s = kii.trace() -
                      (b.middleRows(i * d, d).array() *
                       v.middleCols(i * d, d).transpose().array()).sum();
        lik += -0.5 * d * (kLog2Pi + std::log(s2)) - (ri.squaredNorm() + tr_s) / (2.0 * s2);
    }
    lik *= weight;

    Vec kc = w.kzz * w.c;
    double quad = w.c.dot(kc);
    double tr_ak = w.chol.llt.solve(w.kzz).trace();
    double logdet_a = 2.0 * Mat(w.chol.llt.matrixL()).diagonal().array().log().sum();
    double logdet_sigma = 0.0;
    for (const auto& f : state.sigma_factors) {
        logdet_sigma += 2.0 * f.diagonal().array().abs().log().sum();
    }
    double kl = 0.5 * (quad - tr_ak + logdet_a - logdet_sigma);

    SVGPGradients out;
    out.elbo = lik - kl;

    // gradients
    Vec r = b.transpose() * resid;                       // M
    Vec ainv_r = w.chol.llt.solve(r);
    Vec ainv_kc = w.chol.llt.solve(kc);
    out.d_mu = w.chol.llt.solve((weight / s2) * r - kc);

    Mat bigw = b.transpose() * b;                        // M x M
    Mat ainv_w_ainv = w.chol.llt.solve(w.chol.llt.solve(bigw).transpose());
    Mat ainv_k_ainv = w.chol.llt.solve(w.chol.llt.solve(w.kzz).transpose());
    Mat ainv = w.chol.llt.solve(Mat::Identity(bigm, bigm));

    Mat g = -(weight / s2) * (w.c * ainv_r.transpose()) - (weight / (2.0 * s2)) * ainv_w_ainv +
            w.c * ainv_kc.transpose() - 0.5 * ainv_k_ainv - 0.5 * ainv;
    // + 1/2 Sigma^{-1} on the diagonal blocks
    out.d_sigma_factors.resize(m);
    for (int j = 0; j < m; ++j) {
        const Mat& f = state.sigma_factors[j];
        Mat inv_f = f.triangularView<Eigen::Lower>().solve(Mat::Identity(d, d));
        Mat sigma_inv = inv_f.transpose() * inv_f;
        Mat gj = g.block(j * d, j * d, d, d) + 0.5 * sigma_inv;
        Mat df = (gj + gj.transpose()) * f;
        out.d_sigma_factors[j] = df.triangularView<Eigen::Lower>();
    }
    return out;
}

double svgp_elbo(const SVGPState& state, const ProjectedMatrixKernel& kernel,
                 const VectorObservationSet& obs, std::span<const int> minibatch) {
    return svgp_elbo_with_gradients(state, kernel, obs, minibatch).elbo;
}

namespace {

std::vector<int> full_index(int n) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

struct AdamMoments {
    Vec m1, m2;
    int t = 0;
    explicit AdamMoments(int n) : m1(Vec::Zero(n)), m2(Vec::Zero(n)) {}
    Vec step(const Vec& grad, double lr) {
        ++t;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        m1 = b1 * m1 + (1.0 - b1) * grad;
        m2 = b2 * m2 + (1.0 - b2) * grad.cwiseProduct(grad);
        Vec mhat = m1 / (1.0 - std::pow(b1, t));
        Vec vhat = m2 / (1.0 - std::pow(b2, t));
        return Vec(lr * (mhat.array() / (vhat.array().sqrt() + eps)));
    }
};

}  // namespace

SVGPState svgp_fit(const ProjectedMatrixKernel& kernel, const VectorObservationSet& obs, int m,
                   const SVGPFitOptions& options, std::uint64_t seed) {
    const int d = kernel.dim();
    obs.validate(d);
    const int n = obs.size();
    if (m < 1 || m > n) throw DomainError("svgp_fit requires 1 <= m <= n");
    if (!kernel.scalar_kernel()) {
        throw CapabilityError("svgp_fit requires a scalar-times-identity kernel");
    }

    SVGPState state;
    state.manifold_name = kernel.manifold()->name();
    state.seed = seed;
    state.noise_variance = obs.noise_variance;
    state.lengthscales = kernel.scalar_kernel()->lengthscales();
    state.nus = kernel.scalar_kernel()->nus();
    state.variance = kernel.scalar_kernel()->variance();
    state.inducing = farthest_point_subset(kernel.manifold(), obs.points, m);
    // init: mu from the nearest observed value, Sigma = noise * I
    state.mu.resize(m * d);
    for (int j = 0; j < m; ++j) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int i = 0; i < n; ++i) {
            double dist = geodesic_distance(kernel.manifold(), state.inducing[j], obs.points[i]);
            if (dist < best) {
                best = dist;
                arg = i;
            }
        }
        state.mu.segment(j * d, d) = obs.values[arg];
    }
    state.sigma_factors.assign(m, std::sqrt(obs.noise_variance) * Mat::Identity(d, d));

    auto full = full_index(n);
    ProjectedKernelPtr cur = kernel.with_lengthscales(state.lengthscales);

    auto full_elbo = [&](const SVGPState& s, const ProjectedMatrixKernel& k) {
        return svgp_elbo_with_gradients(s, k, obs, full).elbo;
    };

    SVGPState best_state = state;
    double best_elbo = full_elbo(state, *cur);
    if (options.steps == 0) return best_state;

    const int tri = d * (d + 1) / 2;
    const int nls = static_cast<int>(state.lengthscales.size());
    const int nparam = m * d + m * tri + (options.optimize_lengthscales ? nls : 0) +
                       (options.optimize_inducing ? m * d : 0);
    AdamMoments adam(nparam);
    Rng rng = Rng(seed).split("minibatch");

    auto pack_grad = [&](const SVGPGradients& g, const std::vector<double>& lgrad,
                         const std::vector<double>& zgrad) {
        Vec out(nparam);
        out.head(m * d) = g.d_mu;
        int off = m * d;
        for (int j = 0; j < m; ++j) {
            for (int r = 0; r < d; ++r) {
                for (int cidx = 0; cidx <= r; ++cidx) out[off++] = g.d_sigma_factors[j](r, cidx);
            }
        }
        for (int i = 0; i < static_cast<int>(lgrad.size()); ++i) out[off++] = lgrad[i];
        for (int i = 0; i < static_cast<int>(zgrad.size()); ++i) out[off++] = zgrad[i];
        return out;
    };

    for (int step = 0; step < options.steps; ++step) {
        std::vector<int> batch;
        if (options.minibatch > 0 && options.minibatch < n) {
            batch.resize(options.minibatch);
            for (int i = 0; i < options.minibatch; ++i) {
                batch[i] = static_cast<int>(rng.below(n));
            }
        } else {
            batch = full;
        }

        SVGPGradients g = svgp_elbo_with_gradients(state, *cur, obs, batch);
        if (!std::isfinite(g.elbo)) {
            throw OptimizationError("ELBO became non-finite", step);
        }

        std::vector<double> lgrad;
        if (options.optimize_lengthscales) {
            const double h = 1e-4;
            for (int i = 0; i < nls; ++i) {
                auto ls = state.lengthscales;
                ls[i] *= std::exp(h);
                double up = svgp_elbo_with_gradients(state, *kernel.with_lengthscales(ls), obs,
                                                     batch).elbo;
                ls[i] = state.lengthscales[i] * std::exp(-h);
                double dn = svgp_elbo_with_gradients(state, *kernel.with_lengthscales(ls), obs,
                                                     batch).elbo;
                lgrad.push_back((up - dn) / (2.0 * h));
            }
        }

        std::vector<double> zgrad;
        if (options.optimize_inducing) {
            // central differences in chart coordinates; reduce() keeps
            // periodic coordinates in range after each probe and step
            const double h = 1e-5;
            auto elbo_at = [&](SVGPState probe) {
                for (auto& z : probe.inducing) z = kernel.manifold()->reduce(z);
                return svgp_elbo_with_gradients(probe, *cur, obs, batch).elbo;
            };
            for (int j = 0; j < m; ++j) {
                for (int cidx = 0; cidx < d; ++cidx) {
                    double grad = 0.0;
                    try {
                        SVGPState up = state, dn = state;
                        up.inducing[j][cidx] += h;
                        dn.inducing[j][cidx] -= h;
                        grad = (elbo_at(up) - elbo_at(dn)) / (2.0 * h);
                    } catch (const DomainError&) {
                        // probe crossed a chart boundary; hold this coordinate
                    }
                    zgrad.push_back(grad);
                }
            }
        }

        Vec update = adam.step(pack_grad(g, lgrad, zgrad), options.learning_rate);
        state.mu += update.head(m * d);
        int off = m * d;
        for (int j = 0; j < m; ++j) {
            for (int r = 0; r < d; ++r) {
                for (int cidx = 0; cidx <= r; ++cidx) {
                    state.sigma_factors[j](r, cidx) += update[off++];
                }
            }
        }
        if (options.optimize_lengthscales) {
            for (int i = 0; i < nls; ++i) {
                state.lengthscales[i] *= std::exp(update[off++]);
            }
            cur = kernel.with_lengthscales(state.lengthscales);
        }
        if (options.optimize_inducing) {
            for (int j = 0; j < m; ++j) {
                Vec moved = state.inducing[j];
                for (int cidx = 0; cidx < d; ++cidx) moved[cidx] += update[off++];
                moved = kernel.manifold()->reduce(moved);
                try {
                    kernel.manifold()->embed(moved);
                    state.inducing[j] = moved;
                } catch (const DomainError&) {
                    // step left the chart; keep the previous location
                }
            }
        }

        double e = full_elbo(state, *cur);
        if (std::isfinite(e) && e > best_elbo) {
            best_elbo = e;
            best_state = state;
        }
    }
    return best_state;
}

FieldSample svgp_pathwise_sample(const SVGPState& state, const ProjectedKernelPtr& kernel,
                                 const FieldSample& prior, std::uint64_t seed) {
    SVGPWork w = svgp_prepare(state, *kernel);
    const int d = kernel->dim();
    const int m = state.inducing_count();
    Rng rng = Rng(seed).split("svgp-pathwise");
    Vec resid = state.mu;
    for (int j = 0; j < m; ++j) {
        resid.segment(j * d, d) -= prior(state.inducing[j]);
        Vec z(d);
        for (int i = 0; i < d; ++i) z[i] = rng.normal();
        resid.segment(j * d, d) -= state.sigma_factors[j] * z;  // eps ~ N(0, Sigma_j)
    }
    Vec v = w.chol.llt.solve(resid);
    auto zpts = state.inducing;
    FieldSample base = prior;
    ProjectedKernelPtr k = kernel;
    auto fn = [base, k, zpts, v](const Vec& x) {
        std::vector<Vec> one{x};
        Mat kx = k->cross_gram(one, zpts);
        return Vec(base(x) + kx * v);
    };
    return FieldSample(kernel, fn, seed);
}

}  // namespace gvf
