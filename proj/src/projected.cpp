#include "gvf/projected.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

namespace gvf {

ProjectedMatrixKernel::ProjectedMatrixKernel(ManifoldPtr m, ScalarKernelPtr scalar)
    : manifold_(std::move(m)), scalar_(std::move(scalar)) {
    if (scalar_->manifold()->dim() != manifold_->dim()) {
        throw ShapeError("scalar kernel manifold does not match the projected kernel manifold");
    }
}

ProjectedMatrixKernel::ProjectedMatrixKernel(ManifoldPtr m, AmbientFn kappa)
    : manifold_(std::move(m)), kappa_(std::move(kappa)) {}

Mat ProjectedMatrixKernel::coeff_projection(const Vec& x) const {
    Mat p = manifold_->projection_matrix(x);
    if (gauge_) p = gauge_->at(manifold_->reduce(x)) * p;
    return p;
}

Mat ProjectedMatrixKernel::pushforward(const Vec& x) const {
    Mat pt = manifold_->projection_matrix(x).transpose();
    if (gauge_) {
        Mat a = gauge_->at(manifold_->reduce(x));
        return pt * a.inverse();
    }
    return pt;
}

Mat ProjectedMatrixKernel::eval(const Vec& x, const Vec& y) const {
    Mat px = coeff_projection(x);
    Mat py = coeff_projection(y);
    if (scalar_) {
        return scalar_->eval(x, y) * (px * py.transpose());
    }
    Mat kap = kappa_(x, y);
    if (kap.rows() != ambient_dim() || kap.cols() != ambient_dim()) {
        throw ShapeError("ambient kernel block has the wrong shape");
    }
    return px * kap * py.transpose();
}

Mat ProjectedMatrixKernel::gram(std::span<const Vec> pts) const {
    const int d = dim();
    const int n = static_cast<int>(pts.size());
    Mat g(n * d, n * d);
    std::vector<Mat> proj(n);
    for (int i = 0; i < n; ++i) proj[i] = coeff_projection(pts[i]);
    Mat s;
    if (scalar_) s = scalar_->batch_eval(pts, pts);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            Mat block;
            if (scalar_) {
                block = s(i, j) * (proj[i] * proj[j].transpose());
            } else {
                block = proj[i] * kappa_(pts[i], pts[j]) * proj[j].transpose();
            }
            g.block(i * d, j * d, d, d) = block;
            if (j != i) g.block(j * d, i * d, d, d) = block.transpose();
        }
    }
    return g;
}

Mat ProjectedMatrixKernel::cross_gram(std::span<const Vec> a, std::span<const Vec> b) const {
    const int d = dim();
    Mat g(a.size() * d, b.size() * d);
    std::vector<Mat> pb(b.size());
    for (size_t j = 0; j < b.size(); ++j) pb[j] = coeff_projection(b[j]);
    Mat s;
    if (scalar_) s = scalar_->batch_eval(a, b);
    for (size_t i = 0; i < a.size(); ++i) {
        Mat pa = coeff_projection(a[i]);
        for (size_t j = 0; j < b.size(); ++j) {
            if (scalar_) {
                g.block(i * d, j * d, d, d) = s(i, j) * (pa * pb[j].transpose());
            } else {
                g.block(i * d, j * d, d, d) = pa * kappa_(a[i], b[j]) * pb[j].transpose();
            }
        }
    }
    return g;
}

ProjectedKernelPtr ProjectedMatrixKernel::with_gauge(GaugeField a) const {
    auto out = std::make_shared<ProjectedMatrixKernel>(*this);
    if (gauge_) {
        GaugeField inner = *gauge_;
        GaugeField outer = std::move(a);
        out->gauge_ = GaugeField(
            [inner, outer](const Vec& x) { return outer.at(x) * inner.at(x); },
            outer.label() + "*" + inner.label(), inner.smooth() && outer.smooth());
    } else {
        out->gauge_ = std::move(a);
    }
    return out;
}

ProjectedKernelPtr ProjectedMatrixKernel::with_lengthscales(std::span<const double> ls) const {
    if (!scalar_) throw CapabilityError("cannot re-lengthscale a general ambient kernel");
    auto out = std::make_shared<ProjectedMatrixKernel>(manifold_, scalar_->with_lengthscales(ls));
    out->gauge_ = gauge_;
    return out;
}

ProjectedKernelPtr projected_kernel(ManifoldPtr m, ScalarKernelPtr scalar) {
    return std::make_shared<ProjectedMatrixKernel>(std::move(m), std::move(scalar));
}

// ---------------------------------------------------------------------------
// prior sampling
// ---------------------------------------------------------------------------

FieldSample sample_prior_field(const ProjectedKernelPtr& kernel, int feature_budget,
                               std::uint64_t seed) {
    const auto& scalar = kernel->scalar_kernel();
    if (!scalar) {
        throw CapabilityError("prior sampling requires the scalar-times-identity ambient kernel");
    }
    Rng root(seed);
    const int dp = kernel->ambient_dim();
    std::vector<ScalarField> fields;
    fields.reserve(dp);
    for (int c = 0; c < dp; ++c) {
        fields.push_back(scalar->sample_function(root.split(static_cast<std::uint64_t>(c)),
                                                 feature_budget));
    }
    ProjectedKernelPtr k = kernel;
    auto fn = [k, fields](const Vec& x) {
        Vec ambient(k->ambient_dim());
        for (int c = 0; c < ambient.size(); ++c) ambient[c] = fields[c](x);
        return Vec(k->coeff_projection(x) * ambient);
    };
    return FieldSample(kernel, fn, seed);
}

// ---------------------------------------------------------------------------
// gauge independence report
// ---------------------------------------------------------------------------

GaugeField random_gauge_field(const ManifoldPtr& m, Rng rng, bool rotation_only) {
    const int d = m->dim();
    const int dp = m->ambient_dim();
    // smooth scalar field s(x) = tanh(c0 + c . emb(x)) modulating the generators
    Vec c(dp);
    for (int i = 0; i < dp; ++i) c[i] = rng.normal();
    double c0 = rng.normal();
    Mat skew = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            skew(i, j) = rng.normal();
            skew(j, i) = -skew(i, j);
        }
    }
    Vec diag(d);
    const double max_log = 0.5 * std::log(10.0);  // condition number <= 10
    for (int i = 0; i < d; ++i) {
        diag[i] = rotation_only ? 0.0 : rng.uniform(-max_log, max_log);
    }
    ManifoldPtr man = m;
    return GaugeField(
        [man, c, c0, skew, diag](const Vec& x) {
            double s = std::tanh(c0 + c.dot(man->embed(x)));
            Mat rot = Mat(skew * s).exp();
            Vec dexp = diag.unaryExpr([s](double v) { return std::exp(v * s); });
            return Mat(rot * dexp.asDiagonal());
        },
        rotation_only ? "random-rotation" : "random-bounded", true);
}

GaugeIndependenceReport gauge_independence_sweep(
    const ManifoldPtr& m, int dim,
    const std::function<Mat(const GaugeField&, const Vec&, const Vec&)>& gauged_eval,
    const std::function<Mat(const Vec&, const Vec&)>& base_eval, int n_points, int n_gauges,
    std::uint64_t seed) {
    if (n_points < 1) throw DomainError("gauge report needs n_points >= 1");
    GaugeIndependenceReport report;
    if (n_gauges == 0) {
        report.empty = true;
        return report;
    }
    (void)dim;
    Rng rng(seed);
    Rng prng = rng.split("points");
    Rng grng = rng.split("gauges");
    for (int g = 0; g < n_gauges; ++g) {
        bool rotation_only = (g % 2 == 0);
        GaugeField a = random_gauge_field(m, grng.split(static_cast<std::uint64_t>(g)),
                                          rotation_only);
        for (int t = 0; t < n_points; ++t) {
            Vec x = m->random_point(prng);
            Vec y = m->random_point(prng);
            Mat lhs = gauged_eval(a, x, y);
            Mat rhs = a.at(m->reduce(x)) * base_eval(x, y) * a.at(m->reduce(y)).transpose();
            double dev = (lhs - rhs).cwiseAbs().maxCoeff();
            report.max_deviation = std::max(report.max_deviation, dev);
            ++report.trials;
        }
    }
    return report;
}

GaugeIndependenceReport gauge_independence_report(const ProjectedMatrixKernel& kernel,
                                                  int n_points, int n_gauges,
                                                  std::uint64_t seed) {
    auto gauged = [&kernel](const GaugeField& a, const Vec& x, const Vec& y) {
        return kernel.with_gauge(a)->eval(x, y);
    };
    auto base = [&kernel](const Vec& x, const Vec& y) { return kernel.eval(x, y); };
    return gauge_independence_sweep(kernel.manifold(), kernel.dim(), gauged, base, n_points,
                                    n_gauges, seed);
}

}  // namespace gvf
