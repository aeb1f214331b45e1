#include "gvf/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace gvf {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;  // 1/sqrt(2 pi)
constexpr double kInvSqrtPi = 0.56418958354775628694807945156077;   // 1/sqrt(pi)
}  // namespace

double spectral_weight(double nu, double lengthscale, int dim, double lambda) {
    if (!(nu > 0.0)) throw DomainError("spectral_weight: nu must be positive");
    if (!(lengthscale > 0.0)) throw DomainError("spectral_weight: lengthscale must be positive");
    if (lambda < 0.0) throw DomainError("spectral_weight: eigenvalue must be nonnegative");
    if (std::isinf(nu)) {
        return std::exp(-0.5 * lengthscale * lengthscale * lambda);
    }
    double base = 2.0 * nu / (lengthscale * lengthscale) + lambda;
    return std::pow(base, -(nu + 0.5 * dim));
}

// ---------------------------------------------------------------------------
// Circle basis: 1/sqrt(2pi), cos(j t)/sqrt(pi), sin(j t)/sqrt(pi); lambda = j^2.
// ---------------------------------------------------------------------------

class CircleBasis final : public EigenBasis {
public:
    CircleBasis(ManifoldPtr m, int count) : EigenBasis(std::move(m)) {
        lambdas_.reserve(count);
        block_bounds_.push_back(0);
        lambdas_.push_back(0.0);
        block_bounds_.push_back(1);
        for (int j = 1; static_cast<int>(lambdas_.size()) < count; ++j) {
            lambdas_.push_back(static_cast<double>(j) * j);
            lambdas_.push_back(static_cast<double>(j) * j);
            block_bounds_.push_back(static_cast<int>(lambdas_.size()));
        }
    }

    Vec eval_all(const Vec& x) const override {
        const double t = x[0];
        Vec out(size());
        out[0] = kInvSqrt2Pi;
        for (int j = 1; 2 * j - 1 < size(); ++j) {
            double c = std::cos(j * t), s = std::sin(j * t);
            out[2 * j - 1] = c * kInvSqrtPi;
            if (2 * j < size()) out[2 * j] = s * kInvSqrtPi;
        }
        return out;
    }

    double eval_one(int j, const Vec& x) const override {
        if (j == 0) return kInvSqrt2Pi;
        int freq = (j + 1) / 2;
        double a = freq * x[0];
        return (j % 2 == 1 ? std::cos(a) : std::sin(a)) * kInvSqrtPi;
    }
};

// ---------------------------------------------------------------------------
// Sphere basis: real spherical harmonics via fully normalized associated
// Legendre recurrences; lambda = l(l+1), multiplicity 2l+1.
// Within a degree the order is [m=0, cos(1), sin(1), cos(2), sin(2), ...].
// ---------------------------------------------------------------------------

class SphereBasis final : public EigenBasis {
public:
    SphereBasis(ManifoldPtr m, int count, bool complete_blocks) : EigenBasis(std::move(m)) {
        block_bounds_.push_back(0);
        for (int l = 0; static_cast<int>(lambdas_.size()) < count; ++l) {
            double lam = static_cast<double>(l) * (l + 1);
            int mult = 2 * l + 1;
            for (int k = 0; k < mult; ++k) {
                lambdas_.push_back(lam);
                if (!complete_blocks && static_cast<int>(lambdas_.size()) == count) break;
            }
            block_bounds_.push_back(static_cast<int>(lambdas_.size()));
            max_degree_ = l;
        }
    }

    Vec eval_all(const Vec& x) const override {
        const double phi = x[0], theta = x[1];
        const double c = std::cos(phi), s = std::sin(phi);
        const int L = max_degree_;
        // fully normalized P-bar table, column-major in m
        Mat p = legendre_table(L, c, s);
        Vec out(size());
        std::vector<double> cm(L + 1), sm(L + 1);
        for (int m = 0; m <= L; ++m) {
            cm[m] = std::cos(m * theta);
            sm[m] = std::sin(m * theta);
        }
        const double sq2 = std::sqrt(2.0);
        int j = 0;
        for (int l = 0; l <= L && j < size(); ++l) {
            out[j++] = p(l, 0);
            for (int m = 1; m <= l && j < size(); ++m) {
                out[j++] = sq2 * p(l, m) * cm[m];
                if (j < size()) out[j++] = sq2 * p(l, m) * sm[m];
            }
        }
        return out;
    }

    double eval_one(int j, const Vec& x) const override {
        int l = static_cast<int>(std::floor(std::sqrt(static_cast<double>(j) + 0.5)));
        while ((l + 1) * (l + 1) <= j) ++l;
        while (l * l > j) --l;
        int o = j - l * l;
        int m = (o + 1) / 2;
        bool cosine = (o % 2 == 1);
        const double c = std::cos(x[0]), s = std::sin(x[0]);
        double pm = legendre_single(l, m, c, s);
        if (o == 0) return pm;
        double ang = m * x[1];
        return std::sqrt(2.0) * pm * (cosine ? std::cos(ang) : std::sin(ang));
    }

    int max_degree() const { return max_degree_; }

    /// P-bar_{l m}(cos phi), normalized so that the induced real harmonics
    /// are orthonormal on the sphere.
    static Mat legendre_table(int L, double c, double s) {
        Mat p = Mat::Zero(L + 1, L + 1);
        p(0, 0) = std::sqrt(1.0 / (2.0 * kTwoPi));
        for (int m = 1; m <= L; ++m) {
            p(m, m) = std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * p(m - 1, m - 1);
        }
        for (int m = 0; m < L; ++m) {
            p(m + 1, m) = std::sqrt(2.0 * m + 3.0) * c * p(m, m);
        }
        for (int m = 0; m <= L; ++m) {
            for (int l = m + 2; l <= L; ++l) {
                double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - m * m));
                double b = std::sqrt((static_cast<double>(l - 1) * (l - 1) - m * m) /
                                     (4.0 * static_cast<double>(l - 1) * (l - 1) - 1.0));
                p(l, m) = a * (c * p(l - 1, m) - b * p(l - 2, m));
            }
        }
        return p;
    }

    static double legendre_single(int l, int m, double c, double s) {
        double pmm = std::sqrt(1.0 / (2.0 * kTwoPi));
        for (int k = 1; k <= m; ++k) {
            pmm *= std::sqrt((2.0 * k + 1.0) / (2.0 * k)) * s;
        }
        if (l == m) return pmm;
        double pm1 = std::sqrt(2.0 * m + 3.0) * c * pmm;
        if (l == m + 1) return pm1;
        double prev2 = pmm, prev1 = pm1, cur = 0.0;
        for (int k = m + 2; k <= l; ++k) {
            double a = std::sqrt((4.0 * k * k - 1.0) / (static_cast<double>(k) * k - m * m));
            double b = std::sqrt((static_cast<double>(k - 1) * (k - 1) - m * m) /
                                 (4.0 * static_cast<double>(k - 1) * (k - 1) - 1.0));
            cur = a * (c * prev1 - b * prev2);
            prev2 = prev1;
            prev1 = cur;
        }
        return cur;
    }

private:
    int max_degree_ = 0;
};

// ---------------------------------------------------------------------------
// Product basis: lazily merged block sums of two factor bases.
// ---------------------------------------------------------------------------

namespace {

struct BlockInfo {
    double lambda;
    int start;
    int size;
};

std::vector<BlockInfo> blocks_of(const EigenBasis& b) {
    std::vector<BlockInfo> out;
    const auto& bounds = b.block_bounds();
    for (size_t i = 0; i + 1 < bounds.size(); ++i) {
        out.push_back({b.eigenvalue(bounds[i]), bounds[i], bounds[i + 1] - bounds[i]});
    }
    return out;
}

}  // namespace

class ProductBasis final : public EigenBasis {
public:
    ProductBasis(ManifoldPtr m, EigenBasisPtr a, EigenBasisPtr b, int count, bool complete_blocks)
        : EigenBasis(std::move(m)), a_(std::move(a)), b_(std::move(b)) {
        auto ablocks = blocks_of(*a_);
        auto bblocks = blocks_of(*b_);

        struct Entry {
            double lambda;
            int ai, bi;
            bool operator>(const Entry& o) const {
                if (lambda != o.lambda) return lambda > o.lambda;
                if (ai != o.ai) return ai > o.ai;
                return bi > o.bi;
            }
        };
        std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
        heap.push({ablocks[0].lambda + bblocks[0].lambda, 0, 0});
        block_bounds_.push_back(0);
        while (!heap.empty() && static_cast<int>(lambdas_.size()) < count) {
            Entry e = heap.top();
            heap.pop();
            const auto& ba = ablocks[e.ai];
            const auto& bb = bblocks[e.bi];
            for (int i = 0; i < ba.size; ++i) {
                for (int j = 0; j < bb.size; ++j) {
                    pair_a_.push_back(ba.start + i);
                    pair_b_.push_back(bb.start + j);
                    lambdas_.push_back(e.lambda);
                    if (!complete_blocks && static_cast<int>(lambdas_.size()) == count) goto done;
                }
            }
            block_bounds_.push_back(static_cast<int>(lambdas_.size()));
            if (e.bi + 1 < static_cast<int>(bblocks.size())) {
                heap.push({ba.lambda + bblocks[e.bi + 1].lambda, e.ai, e.bi + 1});
            }
            if (e.bi == 0 && e.ai + 1 < static_cast<int>(ablocks.size())) {
                heap.push({ablocks[e.ai + 1].lambda + bb.lambda, e.ai + 1, 0});
            }
        }
    done:
        if (block_bounds_.back() != static_cast<int>(lambdas_.size())) {
            block_bounds_.push_back(static_cast<int>(lambdas_.size()));
        }
    }

    Vec eval_all(const Vec& x) const override {
        auto* pm = static_cast<const ProductManifold*>(manifold_.get());
        Vec fa = a_->eval_all(pm->first_slice(x));
        Vec fb = b_->eval_all(pm->second_slice(x));
        Vec out(size());
        for (int j = 0; j < size(); ++j) out[j] = fa[pair_a_[j]] * fb[pair_b_[j]];
        return out;
    }

    double eval_one(int j, const Vec& x) const override {
        auto* pm = static_cast<const ProductManifold*>(manifold_.get());
        return a_->eval_one(pair_a_[j], pm->first_slice(x)) *
               b_->eval_one(pair_b_[j], pm->second_slice(x));
    }

private:
    EigenBasisPtr a_;
    EigenBasisPtr b_;
    std::vector<int> pair_a_;
    std::vector<int> pair_b_;
};

EigenBasisPtr make_eigenbasis(const ManifoldPtr& m, int count, bool complete_blocks) {
    if (count < 1) throw DomainError("eigenbasis count must be >= 1");
    switch (m->kind()) {
        case ManifoldKind::Circle:
            return std::make_shared<CircleBasis>(m, count);
        case ManifoldKind::Sphere:
            return std::make_shared<SphereBasis>(m, count, complete_blocks);
        case ManifoldKind::Product: {
            auto* pm = static_cast<const ProductManifold*>(m.get());
            if (!pm->compact()) {
                throw CapabilityError("eigenbasis requires a compact manifold: " + m->name());
            }
            auto a = make_eigenbasis(pm->first(), count, true);
            auto b = make_eigenbasis(pm->second(), count, true);
            return std::make_shared<ProductBasis>(m, a, b, count, complete_blocks);
        }
        default:
            throw CapabilityError("no Laplacian eigenbasis for manifold: " + m->name());
    }
}

std::vector<EigenPair> laplacian_eigenpairs(const ManifoldPtr& m, int count) {
    EigenBasisPtr basis = make_eigenbasis(m, count, false);
    std::vector<EigenPair> out;
    out.reserve(count);
    for (int j = 0; j < count; ++j) {
        out.push_back({basis->eigenvalue(j), j,
                       [basis, j](const Vec& x) { return basis->eval_one(j, x); }});
    }
    return out;
}

std::vector<EigenPair> product_eigenpairs(const std::vector<EigenPair>& a, int dim_a,
                                          const std::vector<EigenPair>& b, int dim_b,
                                          int count) {
    std::vector<EigenPair> out;
    if (a.empty() || b.empty() || count < 1) return out;

    struct Entry {
        double lambda;
        int i, j;
        bool operator>(const Entry& o) const {
            if (lambda != o.lambda) return lambda > o.lambda;
            if (i != o.i) return i > o.i;
            return j > o.j;
        }
    };
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
    heap.push({a[0].lambda + b[0].lambda, 0, 0});
    while (!heap.empty() && static_cast<int>(out.size()) < count) {
        Entry e = heap.top();
        heap.pop();
        auto fa = a[e.i].psi;
        auto fb = b[e.j].psi;
        out.push_back({e.lambda, static_cast<int>(out.size()),
                       [fa, fb, dim_a, dim_b](const Vec& x) {
                           return fa(x.head(dim_a)) * fb(x.tail(dim_b));
                       }});
        if (e.j + 1 < static_cast<int>(b.size())) {
            heap.push({a[e.i].lambda + b[e.j + 1].lambda, e.i, e.j + 1});
        }
        if (e.j == 0 && e.i + 1 < static_cast<int>(a.size())) {
            heap.push({a[e.i + 1].lambda + b[0].lambda, e.i + 1, 0});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scalar kernels
// ---------------------------------------------------------------------------

double ScalarKernel::eval(const Vec& x, const Vec& y) const {
    if (x.size() != manifold_->dim() || y.size() != manifold_->dim()) {
        std::ostringstream os;
        os << describe() << ": point length " << x.size() << "/" << y.size()
           << " does not match manifold dim " << manifold_->dim();
        throw ShapeError(os.str());
    }
    if (!x.allFinite() || !y.allFinite()) throw DomainError("kernel input not finite");
    return eval_impl(x, y);
}

Mat ScalarKernel::batch_eval(std::span<const Vec> a, std::span<const Vec> b) const {
    for (const auto& x : a) {
        if (x.size() != manifold_->dim()) throw ShapeError(describe() + ": point length mismatch");
        if (!x.allFinite()) throw DomainError("kernel input not finite");
    }
    for (const auto& y : b) {
        if (y.size() != manifold_->dim()) throw ShapeError(describe() + ": point length mismatch");
        if (!y.allFinite()) throw DomainError("kernel input not finite");
    }
    return batch_eval_impl(a, b);
}

Mat ScalarKernel::batch_eval_impl(std::span<const Vec> a, std::span<const Vec> b) const {
    Mat out(a.size(), b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        for (size_t j = 0; j < b.size(); ++j) out(i, j) = eval_impl(a[i], b[j]);
    }
    return out;
}

SpectralScalarKernel::SpectralScalarKernel(ManifoldPtr m, double nu, double lengthscale,
                                           double variance, int truncation)
    : ScalarKernel(std::move(m), variance), nu_(nu), lengthscale_(lengthscale),
      truncation_(truncation) {
    if (!manifold_->compact()) {
        throw CapabilityError("spectral kernel requires a compact manifold: " + manifold_->name());
    }
    if (!(lengthscale > 0.0)) throw DomainError("lengthscale must be positive");
    if (truncation_ < 1) truncation_ = default_truncation(manifold_);
    basis_ = make_eigenbasis(manifold_, truncation_, /*complete_blocks=*/true);

    const int n = basis_->size();
    weights_.resize(n);
    for (int j = 0; j < n; ++j) {
        weights_[j] = spectral_weight(nu_, lengthscale_, manifold_->dim(), basis_->eigenvalue(j));
    }
    // rescale so k(x, x) = variance; constant over the manifold because the
    // basis keeps eigenspace blocks complete
    Vec ref = basis_->eval_all(Vec::Zero(manifold_->dim()));
    double s = weights_.dot(ref.cwiseProduct(ref));
    if (!(s > 0.0)) throw DomainError("spectral kernel normalization failed");
    weights_ *= variance_ / s;
}

std::string SpectralScalarKernel::describe() const {
    std::ostringstream os;
    if (std::isinf(nu_)) {
        os << "se(" << manifold_->name() << ", l=" << lengthscale_ << ")";
    } else {
        os << "matern" << nu_ << "(" << manifold_->name() << ", l=" << lengthscale_ << ")";
    }
    return os.str();
}

ScalarKernelPtr SpectralScalarKernel::with_lengthscales(std::span<const double> ls) const {
    if (ls.size() != 1) throw ShapeError("spectral kernel expects one lengthscale");
    return std::make_shared<SpectralScalarKernel>(manifold_, nu_, ls[0], variance_, truncation_);
}

double SpectralScalarKernel::eval_impl(const Vec& x, const Vec& y) const {
    Vec fx = basis_->eval_all(manifold_->reduce(x));
    Vec fy = basis_->eval_all(manifold_->reduce(y));
    // summed in an argument-symmetric order so k(x,y) == k(y,x) exactly
    double acc = 0.0;
    for (int j = 0; j < weights_.size(); ++j) acc += weights_[j] * (fx[j] * fy[j]);
    return acc;
}

Mat SpectralScalarKernel::batch_eval_impl(std::span<const Vec> a, std::span<const Vec> b) const {
    Mat pa(a.size(), basis_->size());
    for (size_t i = 0; i < a.size(); ++i) {
        pa.row(i) = basis_->eval_all(manifold_->reduce(a[i])).transpose();
    }
    Mat pb(b.size(), basis_->size());
    for (size_t j = 0; j < b.size(); ++j) {
        pb.row(j) = basis_->eval_all(manifold_->reduce(b[j])).transpose();
    }
    return pa * weights_.asDiagonal() * pb.transpose();
}

EuclideanMaternKernel::EuclideanMaternKernel(int n, double nu, double lengthscale,
                                             double variance)
    : ScalarKernel(euclidean(n), variance), nu_(nu), lengthscale_(lengthscale) {
    if (!(lengthscale > 0.0)) throw DomainError("lengthscale must be positive");
    if (!(nu == 0.5 || nu == 1.5 || nu == 2.5 || std::isinf(nu))) {
        throw CapabilityError("Euclidean Matern kernel supports nu in {1/2, 3/2, 5/2, inf}");
    }
}

std::string EuclideanMaternKernel::describe() const {
    std::ostringstream os;
    if (std::isinf(nu_)) {
        os << "se(R^" << input_dim() << ", l=" << lengthscale_ << ")";
    } else {
        os << "matern" << nu_ << "(R^" << input_dim() << ", l=" << lengthscale_ << ")";
    }
    return os.str();
}

ScalarKernelPtr EuclideanMaternKernel::with_lengthscales(std::span<const double> ls) const {
    if (ls.size() != 1) throw ShapeError("Euclidean kernel expects one lengthscale");
    return std::make_shared<EuclideanMaternKernel>(input_dim(), nu_, ls[0], variance_);
}

double EuclideanMaternKernel::profile(double r) const {
    if (std::isinf(nu_)) {
        double u = r / lengthscale_;
        return variance_ * std::exp(-0.5 * u * u);
    }
    if (nu_ == 0.5) {
        return variance_ * std::exp(-r / lengthscale_);
    }
    if (nu_ == 1.5) {
        double u = std::sqrt(3.0) * r / lengthscale_;
        return variance_ * (1.0 + u) * std::exp(-u);
    }
    double u = std::sqrt(5.0) * r / lengthscale_;
    return variance_ * (1.0 + u + u * u / 3.0) * std::exp(-u);
}

double EuclideanMaternKernel::eval_impl(const Vec& x, const Vec& y) const {
    return profile((x - y).norm());
}

Vec EuclideanMaternKernel::sample_frequency(Rng& rng) const {
    const int n = input_dim();
    Vec z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    if (std::isinf(nu_)) return z / lengthscale_;
    // Matern spectral density is a multivariate-t with 2 nu degrees of freedom
    double chi2;
    double g = rng.normal();
    if (nu_ == 0.5) {
        chi2 = g * g;
    } else if (nu_ == 1.5) {
        chi2 = g * g - 2.0 * std::log(1.0 - rng.uniform());
    } else {
        chi2 = g * g - 2.0 * std::log(1.0 - rng.uniform()) - 2.0 * std::log(1.0 - rng.uniform());
    }
    chi2 = std::max(chi2, 1e-300);
    return z * (std::sqrt(2.0 * nu_ / chi2) / lengthscale_);
}

ProductScalarKernel::ProductScalarKernel(ManifoldPtr m, ScalarKernelPtr a, ScalarKernelPtr b)
    : ScalarKernel(std::move(m), a->variance() * b->variance()), a_(std::move(a)),
      b_(std::move(b)) {
    if (manifold_->kind() != ManifoldKind::Product) {
        throw ShapeError("product kernel requires a product manifold");
    }
    auto* pm = static_cast<const ProductManifold*>(manifold_.get());
    if (a_->manifold()->dim() != pm->first()->dim() ||
        b_->manifold()->dim() != pm->second()->dim()) {
        throw ShapeError("product kernel factors do not match the manifold split");
    }
}

std::string ProductScalarKernel::describe() const {
    return a_->describe() + " * " + b_->describe();
}

std::vector<double> ProductScalarKernel::lengthscales() const {
    auto la = a_->lengthscales();
    auto lb = b_->lengthscales();
    la.insert(la.end(), lb.begin(), lb.end());
    return la;
}

std::vector<double> ProductScalarKernel::nus() const {
    auto na = a_->nus();
    auto nb = b_->nus();
    na.insert(na.end(), nb.begin(), nb.end());
    return na;
}

ScalarKernelPtr ProductScalarKernel::with_lengthscales(std::span<const double> ls) const {
    size_t na = a_->lengthscales().size();
    size_t nb = b_->lengthscales().size();
    if (ls.size() != na + nb) throw ShapeError("product kernel lengthscale count mismatch");
    auto a = a_->with_lengthscales(ls.subspan(0, na));
    auto b = b_->with_lengthscales(ls.subspan(na, nb));
    return std::make_shared<ProductScalarKernel>(manifold_, a, b);
}

double ProductScalarKernel::eval_impl(const Vec& x, const Vec& y) const {
    auto* pm = static_cast<const ProductManifold*>(manifold_.get());
    return a_->eval(pm->first_slice(x), pm->first_slice(y)) *
           b_->eval(pm->second_slice(x), pm->second_slice(y));
}

Mat ProductScalarKernel::batch_eval_impl(std::span<const Vec> a, std::span<const Vec> b) const {
    auto* pm = static_cast<const ProductManifold*>(manifold_.get());
    std::vector<Vec> a1, a2, b1, b2;
    a1.reserve(a.size());
    a2.reserve(a.size());
    for (const auto& x : a) {
        a1.push_back(pm->first_slice(x));
        a2.push_back(pm->second_slice(x));
    }
    b1.reserve(b.size());
    b2.reserve(b.size());
    for (const auto& y : b) {
        b1.push_back(pm->first_slice(y));
        b2.push_back(pm->second_slice(y));
    }
    return a_->batch_eval(a1, b1).cwiseProduct(b_->batch_eval(a2, b2));
}

// ---------------------------------------------------------------------------
// Factories
// ---------------------------------------------------------------------------

int default_truncation(const ManifoldPtr& m) {
    switch (m->kind()) {
        case ManifoldKind::Circle: return 101;
        case ManifoldKind::Sphere: return 961;  // degrees 0..30
        default: return 401;
    }
}

ScalarKernelPtr matern_kernel(const ManifoldPtr& m, double nu, double lengthscale,
                              double variance, int truncation) {
    if (m->compact()) {
        return std::make_shared<SpectralScalarKernel>(m, nu, lengthscale, variance, truncation);
    }
    if (m->kind() == ManifoldKind::Euclidean) {
        return std::make_shared<EuclideanMaternKernel>(m->dim(), nu, lengthscale, variance);
    }
    throw CapabilityError(
        "Matern kernel on a mixed product manifold: build a product_kernel from factors");
}

ScalarKernelPtr se_kernel(const ManifoldPtr& m, double lengthscale, double variance,
                          int truncation) {
    return matern_kernel(m, kNuSquaredExponential, lengthscale, variance, truncation);
}

ScalarKernelPtr product_kernel(const ManifoldPtr& m, ScalarKernelPtr a, ScalarKernelPtr b) {
    return std::make_shared<ProductScalarKernel>(m, std::move(a), std::move(b));
}

}  // namespace gvf
