#include "graspkit/tensor_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "graspkit/error.hpp"
#include "graspkit/rng.hpp"

namespace graspkit {
namespace {

// Align-corners source coordinate and interpolation pair for one output index.
struct Lerp {
    int lo, hi;
    double t;
};

Lerp lerp_coord(int out_i, int out_n, int in_n) {
    if (out_n == 1 || in_n == 1) return {0, 0, 0.0};
    double src = static_cast<double>(out_i) * (in_n - 1) / (out_n - 1);
    int lo = static_cast<int>(std::floor(src));
    if (lo >= in_n - 1) lo = in_n - 2;
    return {lo, lo + 1, src - lo};
}

} // namespace

FeatureMap bilinear_upsample(const FeatureMap& f, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) raise(Errc::invalid_config, "upsample target must be >= 1x1");
    FeatureMap out(f.d, out_h, out_w, f.tag);
    for (int r = 0; r < out_h; ++r) {
        Lerp ry = lerp_coord(r, out_h, f.h);
        for (int c = 0; c < out_w; ++c) {
            Lerp rx = lerp_coord(c, out_w, f.w);
            for (int ch = 0; ch < f.d; ++ch) {
                double v00 = f.at(ch, ry.lo, rx.lo);
                double v01 = f.at(ch, ry.lo, rx.hi);
                double v10 = f.at(ch, ry.hi, rx.lo);
                double v11 = f.at(ch, ry.hi, rx.hi);
                double top = v00 + (v01 - v00) * rx.t;
                double bot = v10 + (v11 - v10) * rx.t;
                out.at(ch, r, c) = top + (bot - top) * ry.t;
            }
        }
    }
    return out;
}

DenseMap bilinear_upsample(const DenseMap& m, int out_h, int out_w) {
    FeatureMap f(1, m.h, m.w);
    f.v = m.v;
    FeatureMap up = bilinear_upsample(f, out_h, out_w);
    DenseMap out(out_h, out_w);
    out.v = std::move(up.v);
    return out;
}

RoiMask circular_mask(int h, int w, double cx, double cy, double r) {
    if (h < 1 || w < 1) raise(Errc::invalid_config, "mask dims must be >= 1");
    if (r < 0.0) raise(Errc::invalid_config, "mask radius must be >= 0");
    RoiMask m;
    m.h = h;
    m.w = w;
    m.cx = cx;
    m.cy = cy;
    m.radius = r;
    m.v.assign(static_cast<std::size_t>(h) * w, 0);
    const double r2 = r * r;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy <= r2) m.v[static_cast<std::size_t>(y) * w + x] = 1;
        }
    return m;
}

DenseMap to_dense(const RoiMask& m) {
    DenseMap out(m.h, m.w);
    for (std::size_t i = 0; i < m.v.size(); ++i) out.v[i] = m.v[i];
    return out;
}

FeatureMap apply_mask(const FeatureMap& f, const RoiMask& m) {
    if (f.h != m.h || f.w != m.w)
        raise(Errc::dimension_mismatch, "mask dims do not match feature map");
    FeatureMap out = f;
    for (int ch = 0; ch < f.d; ++ch)
        for (int y = 0; y < f.h; ++y)
            for (int x = 0; x < f.w; ++x)
                out.at(ch, y, x) = f.at(ch, y, x) * m.at(y, x);
    return out;
}

Embedding masked_average_pool(const FeatureMap& f, const DenseMap& weights) {
    if (f.h != weights.h || f.w != weights.w)
        raise(Errc::dimension_mismatch, "weights dims do not match feature map");
    double mass = 0.0;
    for (double w : weights.v) {
        if (w < 0.0) raise(Errc::invalid_config, "pooling weights must be non-negative");
        mass += w;
    }
    if (!(mass > 0.0)) raise(Errc::zero_mass, "pooling weights sum to zero");
    Embedding e(f.d, 0.0);
    for (int ch = 0; ch < f.d; ++ch) {
        double acc = 0.0;
        const double* plane = f.v.data() + static_cast<std::size_t>(ch) * f.plane();
        for (std::size_t i = 0; i < weights.v.size(); ++i) acc += plane[i] * weights.v[i];
        e[ch] = acc / mass;
    }
    return e;
}

std::vector<Embedding> patch_embeddings(const FeatureMap& f) {
    std::vector<Embedding> out;
    out.reserve(f.plane());
    for (int y = 0; y < f.h; ++y)
        for (int x = 0; x < f.w; ++x) {
            Embedding e(f.d);
            for (int ch = 0; ch < f.d; ++ch) e[ch] = f.at(ch, y, x);
            out.push_back(std::move(e));
        }
    return out;
}

namespace {

double sqdist(const Embedding& a, const Embedding& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

} // namespace

PrototypeSet cluster_prototypes(const std::vector<Embedding>& patches, int k, uint64_t seed,
                                int max_iters) {
    if (patches.empty()) raise(Errc::empty_input, "no patches to cluster");
    if (k < 2) raise(Errc::invalid_config, "k must be >= 2");
    if (static_cast<std::size_t>(k) > patches.size())
        raise(Errc::invalid_config, "k exceeds number of patches");
    const std::size_t n = patches.size();
    const std::size_t dim = patches[0].size();
    for (const auto& p : patches)
        if (p.size() != dim) raise(Errc::dimension_mismatch, "patch dims differ");

    Rng rng(seed);
    PrototypeSet ps;
    ps.seed = seed;

    // k-means++ seeding
    ps.centroids.push_back(patches[rng.index(n)]);
    std::vector<double> d2(n);
    while (ps.centroids.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (const auto& c : ps.centroids) best = std::min(best, sqdist(patches[i], c));
            d2[i] = best;
            total += best;
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.index(n); // all points coincide with a centroid
        } else {
            double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        ps.centroids.push_back(patches[pick]);
    }

    // Lloyd iterations
    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double bestd = sqdist(patches[i], ps.centroids[0]);
            for (int c = 1; c < k; ++c) {
                double d = sqdist(patches[i], ps.centroids[c]);
                if (d < bestd) {
                    bestd = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;
        std::vector<Embedding> sums(k, Embedding(dim, 0.0));
        std::vector<int> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            counts[assign[i]]++;
            for (std::size_t j = 0; j < dim; ++j) sums[assign[i]][j] += patches[i][j];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue; // keep previous centroid for empty clusters
            for (std::size_t j = 0; j < dim; ++j) ps.centroids[c][j] = sums[c][j] / counts[c];
        }
        if (!changed) break;
    }

    ps.counts.assign(k, 0);
    for (std::size_t i = 0; i < n; ++i) ps.counts[assign[i]]++;
    ps.roles.assign(k, "");
    return ps;
}

double within_cluster_distance(const std::vector<Embedding>& patches, const PrototypeSet& ps) {
    double total = 0.0;
    for (const auto& p : patches) {
        double best = std::numeric_limits<double>::max();
        for (const auto& c : ps.centroids) best = std::min(best, sqdist(p, c));
        total += best;
    }
    return total;
}

DenseMap similarity_map(const FeatureMap& f, const Embedding& proto) {
    if (static_cast<int>(proto.size()) != f.d)
        raise(Errc::dimension_mismatch, "prototype dim does not match feature channels");
    double pn = 0.0;
    for (double x : proto) pn += x * x;
    pn = std::sqrt(pn);
    if (pn == 0.0) raise(Errc::zero_prototype, "prototype has zero norm");
    DenseMap out(f.h, f.w);
    for (int y = 0; y < f.h; ++y)
        for (int x = 0; x < f.w; ++x) {
            double d = 0.0, n = 0.0;
            for (int ch = 0; ch < f.d; ++ch) {
                double val = f.at(ch, y, x);
                d += val * proto[ch];
                n += val * val;
            }
            out.at(y, x) = n == 0.0 ? 0.0 : d / (std::sqrt(n) * pn);
        }
    return out;
}

namespace {

std::vector<uint8_t> binarize(const DenseMap& m, double thresh_frac) {
    double mx = *std::max_element(m.v.begin(), m.v.end());
    double t = thresh_frac * mx;
    std::vector<uint8_t> b(m.v.size());
    for (std::size_t i = 0; i < m.v.size(); ++i) b[i] = m.v[i] >= t && m.v[i] > 0.0 ? 1 : 0;
    return b;
}

} // namespace

int select_prototype_by_iou(const std::vector<DenseMap>& sims, const DenseMap& saliency,
                            double bin_thresh) {
    if (sims.empty()) raise(Errc::empty_input, "no candidate similarity maps");
    for (const auto& s : sims)
        if (s.h != saliency.h || s.w != saliency.w)
            raise(Errc::dimension_mismatch, "similarity map dims do not match saliency");
    auto sal_bin = binarize(saliency, bin_thresh);
    int best = -1;
    double best_iou = -1.0;
    bool any_nonempty = false;
    for (std::size_t c = 0; c < sims.size(); ++c) {
        auto b = binarize(sims[c], bin_thresh);
        long inter = 0, uni = 0, count = 0;
        for (std::size_t i = 0; i < b.size(); ++i) {
            count += b[i];
            inter += b[i] & sal_bin[i];
            uni += b[i] | sal_bin[i];
        }
        if (count > 0) any_nonempty = true;
        double iou = uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
        if (iou > best_iou) {
            best_iou = iou;
            best = static_cast<int>(c);
        }
    }
    if (!any_nonempty) raise(Errc::all_empty, "every binarized candidate is empty");
    return best;
}

DenseMap min_max_normalize(const DenseMap& m) {
    if (m.v.empty()) raise(Errc::empty_input, "empty map");
    auto [mn_it, mx_it] = std::minmax_element(m.v.begin(), m.v.end());
    double mn = *mn_it, mx = *mx_it;
    DenseMap out(m.h, m.w);
    if (mx == mn) return out; // constant map -> zeros
    double inv = 1.0 / (mx - mn);
    for (std::size_t i = 0; i < m.v.size(); ++i) out.v[i] = (m.v[i] - mn) * inv;
    return out;
}

Pixel argmax_pixel(const DenseMap& m) {
    if (m.v.empty()) raise(Errc::empty_input, "empty map");
    std::size_t best = 0;
    for (std::size_t i = 1; i < m.v.size(); ++i)
        if (m.v[i] > m.v[best]) best = i;
    return {static_cast<int>(best % m.w), static_cast<int>(best / m.w)};
}

} // namespace graspkit
