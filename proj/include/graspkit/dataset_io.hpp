#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "graspkit/kinematics.hpp"
#include "graspkit/losses_heads.hpp"
#include "graspkit/tensor_core.hpp"

namespace graspkit {

// Closed label sets. The tool list is configuration in spirit (the upstream
// dataset may revise it); this is the set the shipped table uses.
const std::vector<std::string>& task_vocabulary(); // 6 entries
const std::vector<std::string>& tool_vocabulary(); // 18 entries
int task_index(const std::string& task);           // raises UnknownTask

struct ManifestRecord {
    std::string id;
    std::string view;  // exo | ego
    std::string task;  // task vocabulary
    std::string tool;  // tool vocabulary
    std::string split; // train | test
    std::string feature_path;
    std::string heatmap_path;
    std::string landmarks_path;
};

// CSV (header: id,view,task,tool,split,feature_path,heatmap_path,landmarks_path)
// or a JSON array of objects with the same keys; errors carry line numbers.
std::vector<ManifestRecord> load_manifest(const std::string& path);
void save_manifest(const std::vector<ManifestRecord>& records, const std::string& path);

struct GesturePair {
    std::string task, tool;
    int gesture_id = 0; // 1..14
};

struct GestureTable {
    std::vector<GesturePair> pairs;
    std::vector<GestureConfig> gestures;
};

// The valid task-tool cells with hand-assigned gesture ids, plus placeholder
// joint angles per gesture (real deployments calibrate these per hand).
GestureTable default_gesture_table();
GestureTable load_gesture_table(const std::string& path);
void save_gesture_table(const GestureTable& table, const std::string& path);

int lookup_gesture_id(const GestureTable& table, const std::string& task,
                      const std::string& tool); // raises UnknownPair
GestureConfig lookup_gesture(const GestureTable& table, const std::string& task,
                             const std::string& tool);

// One annotator's polygons over an h x w image; vertices in pixel coordinates.
struct PolygonAnnotation {
    int h = 0, w = 0;
    std::vector<std::vector<std::array<double, 2>>> polygons; // (x, y)
};

// Even-odd fill sampled at pixel centers; union over the annotator's polygons.
DenseMap rasterize_polygons(const PolygonAnnotation& ann);

// Average the annotators' binary masks, Gaussian-blur, min-max normalize.
DenseMap polygons_to_heatmap(const std::vector<PolygonAnnotation>& anns, double sigma);

// Separable Gaussian, kernel truncated at ceil(3*sigma) and renormalized,
// reflect padding at the borders.
DenseMap gaussian_blur(const DenseMap& m, double sigma);

// GAFT v1: "GAFT", u32 version=1, u32 rank, u32 dims[rank], f32 data,
// little-endian throughout, row-major (last dim fastest).
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> v;

    std::size_t count() const;
};

Tensor load_tensor(const std::string& path);
void save_tensor(const Tensor& t, const std::string& path);

Tensor to_tensor(const FeatureMap& f);
Tensor to_tensor(const DenseMap& m);
FeatureMap to_feature_map(const Tensor& t, Provenance tag);
DenseMap to_dense_map(const Tensor& t);

FeatureMap load_feature_map(const std::string& path, Provenance tag);
void save_dense_map(const DenseMap& m, const std::string& path);

// 8-bit binary PGM; values map linearly to [0,1].
DenseMap load_pgm(const std::string& path);
void save_pgm(const DenseMap& m, const std::string& path);
void save_ppm(const std::vector<std::uint8_t>& rgb, int h, int w, const std::string& path);

// Sniffs GAFT vs PGM by magic.
DenseMap load_heatmap(const std::string& path);

// write-temp-then-rename so readers never observe partial files
void atomic_write(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

// Checkpoint: one GAFT tensor per parameter block plus manifest.json naming
// roles and shapes.
void save_checkpoint(const std::string& dir, LocalizationHead& head, GestureClassifier* clf);

struct Checkpoint {
    LocalizationHead head;
    GestureClassifier clf;
    bool has_classifier = false;
};

Checkpoint load_checkpoint(const std::string& dir);

} // namespace graspkit
