#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace graspkit {

// H x W grid of reals, row-major. Coordinates follow the image convention
// used throughout: u = column (x), v = row (y).
struct DenseMap {
    int h = 0, w = 0;
    std::vector<double> v;

    DenseMap() = default;
    DenseMap(int h_, int w_, double fill = 0.0) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {}

    double at(int row, int col) const { return v[static_cast<std::size_t>(row) * w + col]; }
    double& at(int row, int col) { return v[static_cast<std::size_t>(row) * w + col]; }
    std::size_t size() const { return v.size(); }
};

enum class Provenance { exo, ego };

// D x H x W dense feature grid, channel-major.
struct FeatureMap {
    int d = 0, h = 0, w = 0;
    Provenance tag = Provenance::ego;
    std::vector<double> v;

    FeatureMap() = default;
    FeatureMap(int d_, int h_, int w_, Provenance tag_ = Provenance::ego, double fill = 0.0)
        : d(d_), h(h_), w(w_), tag(tag_), v(static_cast<std::size_t>(d_) * h_ * w_, fill) {}

    double at(int ch, int row, int col) const {
        return v[(static_cast<std::size_t>(ch) * h + row) * w + col];
    }
    double& at(int ch, int row, int col) {
        return v[(static_cast<std::size_t>(ch) * h + row) * w + col];
    }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
};

// Binary circular region, kept with the circle that produced it.
struct RoiMask {
    int h = 0, w = 0;
    double cx = 0.0, cy = 0.0; // center, pixel coordinates (x0, y0)
    double radius = 0.0;
    std::vector<uint8_t> v;

    uint8_t at(int row, int col) const { return v[static_cast<std::size_t>(row) * w + col]; }
};

using Embedding = std::vector<double>;

struct PrototypeSet {
    std::vector<Embedding> centroids;
    std::vector<int> counts;               // assignment count per centroid
    std::vector<std::string> roles;        // assigned post-hoc; empty until then
    uint64_t seed = 0;
};

// Channel-wise align-corners bilinear resize.
FeatureMap bilinear_upsample(const FeatureMap& f, int out_h, int out_w);
DenseMap bilinear_upsample(const DenseMap& m, int out_h, int out_w);

// Inclusive-boundary disc; centers outside the image simply clip.
RoiMask circular_mask(int h, int w, double cx, double cy, double r);

DenseMap to_dense(const RoiMask& m);

FeatureMap apply_mask(const FeatureMap& f, const RoiMask& m);

// embedding[d] = sum(w * f[d]) / sum(w); weights must be non-negative with
// positive mass.
Embedding masked_average_pool(const FeatureMap& f, const DenseMap& weights);

// Feature columns of the map as D-dim patch embeddings, row-major order.
std::vector<Embedding> patch_embeddings(const FeatureMap& f);

// Seeded k-means++ followed by Lloyd iterations; deterministic in (input
// order, seed).
PrototypeSet cluster_prototypes(const std::vector<Embedding>& patches, int k, uint64_t seed,
                                int max_iters = 100);

double within_cluster_distance(const std::vector<Embedding>& patches, const PrototypeSet& ps);

// Per-pixel cosine similarity between each feature column and proto;
// zero-norm columns map to 0.
DenseMap similarity_map(const FeatureMap& f, const Embedding& proto);

// Binarize candidates and saliency at bin_thresh * their own max, return the
// index with the highest IoU against the saliency; ties to the lowest index.
int select_prototype_by_iou(const std::vector<DenseMap>& sims, const DenseMap& saliency,
                            double bin_thresh = 0.5);

// (m - min) / (max - min); constant maps collapse to all zeros.
DenseMap min_max_normalize(const DenseMap& m);

struct Pixel {
    int u = 0; // column
    int v = 0; // row
};

// Row-major first maximum.
Pixel argmax_pixel(const DenseMap& m);

} // namespace graspkit
