#include "gvf/features.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace gvf {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

RffFeatureMap draw_rff(const EuclideanMaternKernel& kernel, int l, Rng& rng) {
    if (l < 1) throw DomainError("feature count must be >= 1");
    const int n = kernel.input_dim();
    RffFeatureMap map;
    map.frequencies.resize(l, n);
    map.phases.resize(l);
    for (int i = 0; i < l; ++i) {
        map.frequencies.row(i) = kernel.sample_frequency(rng).transpose();
        map.phases[i] = rng.uniform(0.0, kTwoPi);
    }
    map.scale = std::sqrt(2.0 * kernel.variance());
    return map;
}

// ---- flattened view of a (possibly product) kernel ----

struct EuclidLeaf {
    const EuclideanMaternKernel* k;
    int offset;
};
struct CompactLeaf {
    const SpectralScalarKernel* k;
    int offset;
};

void flatten(const ScalarKernel& kernel, int offset, std::vector<EuclidLeaf>& euclid,
             std::vector<CompactLeaf>& compact) {
    if (auto* p = dynamic_cast<const ProductScalarKernel*>(&kernel)) {
        flatten(*p->first(), offset, euclid, compact);
        flatten(*p->second(), offset + p->first()->manifold()->dim(), euclid, compact);
        return;
    }
    if (auto* e = dynamic_cast<const EuclideanMaternKernel*>(&kernel)) {
        euclid.push_back({e, offset});
        return;
    }
    if (auto* s = dynamic_cast<const SpectralScalarKernel*>(&kernel)) {
        compact.push_back({s, offset});
        return;
    }
    throw CapabilityError("cannot sample from kernel: " + kernel.describe());
}

// Tensor KL block over one or more compact leaves. Evaluates all retained
// basis products at a full chart point and carries their KL weights.
struct CompactBlock {
    std::vector<EigenBasisPtr> bases;
    std::vector<int> offsets;            // chart offset per basis
    std::vector<std::vector<int>> idx;   // per retained function, index into each basis
    Vec weights;                         // KL variances of the retained products

    int size() const { return static_cast<int>(weights.size()); }

    Vec eval(const Vec& x) const {
        std::vector<Vec> vals(bases.size());
        for (size_t b = 0; b < bases.size(); ++b) {
            const auto& m = bases[b]->manifold();
            vals[b] = bases[b]->eval_all(m->reduce(x.segment(offsets[b], m->dim())));
        }
        Vec out(size());
        for (int j = 0; j < size(); ++j) {
            double v = 1.0;
            for (size_t b = 0; b < bases.size(); ++b) v *= vals[b][idx[j][b]];
            out[j] = v;
        }
        return out;
    }
};

// Keep every tensor product when the total is small, else the largest
// `cap` weight products. Sampling only needs the retained set, not an order.
CompactBlock build_compact_block(const std::vector<CompactLeaf>& leaves, int cap = 16384) {
    CompactBlock block;
    long total = 1;
    for (const auto& leaf : leaves) {
        block.bases.push_back(leaf.k->basis());
        block.offsets.push_back(leaf.offset);
        total *= leaf.k->weights().size();
    }
    const size_t nb = leaves.size();
    if (total <= cap) {
        std::vector<int> cursor(nb, 0);
        std::vector<double> w;
        w.reserve(total);
        for (long t = 0; t < total; ++t) {
            double prod = 1.0;
            for (size_t b = 0; b < nb; ++b) prod *= leaves[b].k->weights()[cursor[b]];
            block.idx.push_back(cursor);
            w.push_back(prod);
            for (size_t b = nb; b-- > 0;) {
                if (++cursor[b] < leaves[b].k->weights().size()) break;
                cursor[b] = 0;
            }
        }
        block.weights = Eigen::Map<Vec>(w.data(), w.size());
        return block;
    }

    // heap over descending weight products; leaf weights are nonincreasing
    struct Entry {
        double w;
        std::vector<int> cursor;
        bool operator<(const Entry& o) const { return w < o.w; }
    };
    std::priority_queue<Entry> heap;
    std::vector<double> w;
    heap.push({[&] {
                   double p = 1.0;
                   for (const auto& leaf : leaves) p *= leaf.k->weights()[0];
                   return p;
               }(),
               std::vector<int>(nb, 0)});
    while (!heap.empty() && static_cast<int>(w.size()) < cap) {
        Entry e = heap.top();
        heap.pop();
        block.idx.push_back(e.cursor);
        w.push_back(e.w);
        // advance each coordinate; dedup by only branching on the first
        // coordinate when all later ones are zero
        for (size_t b = 0; b < nb; ++b) {
            bool tail_zero = true;
            for (size_t c = 0; c < b; ++c)
                if (e.cursor[c] != 0) tail_zero = false;
            if (b > 0 && !tail_zero) continue;
            auto cur = e.cursor;
            if (++cur[b] >= leaves[b].k->weights().size()) continue;
            double p = 1.0;
            for (size_t c = 0; c < nb; ++c) p *= leaves[c].k->weights()[cur[c]];
            heap.push({p, cur});
        }
    }
    block.weights = Eigen::Map<Vec>(w.data(), w.size());
    return block;
}

}  // namespace

// ---------------------------------------------------------------------------
// public feature maps
// ---------------------------------------------------------------------------

RffFeatureMap make_rff_features(const EuclideanMaternKernel& kernel, int l, std::uint64_t seed) {
    Rng rng(seed);
    return draw_rff(kernel, l, rng);
}

double CombinedFeatureMap::eval_with_weights(const Mat& w, const Vec& e, const Vec& m) const {
    if (w.rows() != l() || w.cols() != k()) throw ShapeError("weight matrix shape mismatch");
    Vec phi = rff.eval(e);
    Vec psi = basis->eval_all(basis->manifold()->reduce(m));
    return phi.dot(w * psi) / std::sqrt(static_cast<double>(l()));
}

Mat CombinedFeatureMap::sample_weights(Rng& rng) const {
    Mat w(l(), k());
    for (int i = 0; i < w.rows(); ++i) {
        for (int j = 0; j < w.cols(); ++j) w(i, j) = weight_std[j] * rng.normal();
    }
    return w;
}

std::function<double(const Vec&, const Vec&)> CombinedFeatureMap::sample(Rng& rng) const {
    auto self = *this;
    Mat w = sample_weights(rng);
    return [self, w](const Vec& e, const Vec& m) { return self.eval_with_weights(w, e, m); };
}

CombinedFeatureMap make_combined_feature_map(const EuclideanMaternKernel& euclid,
                                             const SpectralScalarKernel& compact, int l,
                                             std::uint64_t seed) {
    Rng rng(seed);
    Rng rff_rng = rng.split("rff");
    CombinedFeatureMap map;
    map.rff = draw_rff(euclid, l, rff_rng);
    map.basis = compact.basis();
    map.weight_std = compact.weights().cwiseSqrt();
    return map;
}

// ---------------------------------------------------------------------------
// sample_function implementations
// ---------------------------------------------------------------------------

ScalarField SpectralScalarKernel::sample_function(Rng rng, int) const {
    Vec w(weights_.size());
    for (int j = 0; j < w.size(); ++j) w[j] = std::sqrt(weights_[j]) * rng.normal();
    EigenBasisPtr basis = basis_;
    ManifoldPtr m = manifold_;
    return [basis, m, w](const Vec& x) { return w.dot(basis->eval_all(m->reduce(x))); };
}

ScalarField EuclideanMaternKernel::sample_function(Rng rng, int rff_count) const {
    RffFeatureMap map = draw_rff(*this, rff_count, rng);
    Vec w(rff_count);
    for (int i = 0; i < rff_count; ++i) w[i] = rng.normal();
    double norm = 1.0 / std::sqrt(static_cast<double>(rff_count));
    return [map, w, norm](const Vec& e) { return norm * w.dot(map.eval(e)); };
}

ScalarField ProductScalarKernel::sample_function(Rng rng, int rff_count) const {
    std::vector<EuclidLeaf> euclid;
    std::vector<CompactLeaf> compact;
    flatten(*this, 0, euclid, compact);

    // stacked RFF over all Euclidean leaves; the product of stationary kernels
    // has the product spectral measure, so frequencies are drawn per leaf
    int edim = 0;
    double evar = 1.0;
    for (const auto& leaf : euclid) {
        edim += leaf.k->input_dim();
        evar *= leaf.k->variance();
    }

    std::vector<std::pair<int, int>> eslices;  // (chart offset, length) per leaf
    for (const auto& leaf : euclid) eslices.emplace_back(leaf.offset, leaf.k->input_dim());
    auto extract = [eslices, edim](const Vec& x) {
        Vec e(edim);
        int col = 0;
        for (const auto& [off, len] : eslices) {
            e.segment(col, len) = x.segment(off, len);
            col += len;
        }
        return e;
    };

    if (compact.empty()) {
        // pure RFF path
        Mat freqs(rff_count, edim);
        Vec phases(rff_count);
        for (int i = 0; i < rff_count; ++i) {
            int col = 0;
            for (const auto& leaf : euclid) {
                freqs.row(i).segment(col, leaf.k->input_dim()) =
                    leaf.k->sample_frequency(rng).transpose();
                col += leaf.k->input_dim();
            }
            phases[i] = rng.uniform(0.0, kTwoPi);
        }
        Vec w(rff_count);
        for (int i = 0; i < rff_count; ++i) w[i] = rng.normal();
        double scale = std::sqrt(2.0 * evar / rff_count);
        return [freqs, phases, w, scale, extract](const Vec& x) {
            Vec e = extract(x);
            double acc = 0.0;
            for (int i = 0; i < w.size(); ++i) {
                acc += w[i] * std::cos(freqs.row(i).dot(e) + phases[i]);
            }
            return scale * acc;
        };
    }

    CompactBlock block = build_compact_block(compact);

    if (euclid.empty()) {
        // pure tensor KL path
        Vec w(block.size());
        for (int j = 0; j < w.size(); ++j) w[j] = std::sqrt(block.weights[j]) * rng.normal();
        return [block, w](const Vec& x) { return w.dot(block.eval(x)); };
    }

    // combined RFF x KL
    Mat freqs(rff_count, edim);
    Vec phases(rff_count);
    for (int i = 0; i < rff_count; ++i) {
        int col = 0;
        for (const auto& leaf : euclid) {
            freqs.row(i).segment(col, leaf.k->input_dim()) =
                leaf.k->sample_frequency(rng).transpose();
            col += leaf.k->input_dim();
        }
        phases[i] = rng.uniform(0.0, kTwoPi);
    }
    Mat w(rff_count, block.size());
    Vec wstd = block.weights.cwiseSqrt();
    for (int i = 0; i < rff_count; ++i) {
        for (int j = 0; j < block.size(); ++j) w(i, j) = wstd[j] * rng.normal();
    }
    double scale = std::sqrt(2.0 * evar / rff_count);
    return [freqs, phases, w, scale, extract, block](const Vec& x) {
        Vec e = extract(x);
        Vec phi(freqs.rows());
        for (int i = 0; i < phi.size(); ++i) {
            phi[i] = std::cos(freqs.row(i).dot(e) + phases[i]);
        }
        return scale * phi.dot(w * block.eval(x));
    };
}

}  // namespace gvf
