#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "graspkit/tensor_core.hpp"

namespace graspkit {

// Saliency-style grounding metrics. Conventions (declared, since the source
// protocol is inherited by citation): KLD is KL(gt || pred) with eps only in
// the log denominator; NSS uses the population standard deviation and a
// fixation set of gt >= fix_thresh * max(gt).
double kld(const DenseMap& pred, const DenseMap& gt);
double sim(const DenseMap& pred, const DenseMap& gt);
double nss(const DenseMap& pred, const DenseMap& gt, double fix_thresh = 0.5);

struct MetricReport {
    struct PerImage {
        std::string name;
        double kld = 0.0, sim = 0.0, nss = 0.0;
    };
    std::vector<PerImage> images;
    double mean_kld = 0.0, mean_sim = 0.0, mean_nss = 0.0;
    int count = 0;
    double fix_thresh = 0.5; // convention used, recorded with the numbers
};

// Pairs files by name across the two directories (sorted order); every file
// must have a partner.
MetricReport evaluate_grounding(const std::string& pred_dir, const std::string& gt_dir,
                                double fix_thresh = 0.5);

struct PredictionRecord {
    std::string tool, task;
    int predicted = 0, actual = 0; // gesture ids, 1..14
};

struct PrecisionCell {
    int tp = 0, fp = 0;
    double precision() const { return static_cast<double>(tp) / (tp + fp); }
};

struct PrecisionTable {
    // only observed (task, tool) cells are present
    std::map<std::pair<std::string, std::string>, PrecisionCell> cells;
    std::map<std::string, double> task_ap; // mean over tools present in the task
    std::map<std::string, double> tool_ap; // mean over tasks present for the tool
    double overall_ap = 0.0;               // mean over all present cells
};

PrecisionTable gesture_precision(const std::vector<PredictionRecord>& predictions);

} // namespace graspkit
