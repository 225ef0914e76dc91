#include "graspkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "graspkit/dataset_io.hpp"
#include "graspkit/error.hpp"

namespace graspkit {

namespace {

constexpr double kEps = 1e-12;

void check_dims(const DenseMap& a, const DenseMap& b, const char* what) {
    if (a.h != b.h || a.w != b.w)
        raise(Errc::dimension_mismatch, std::string(what) + ": map dims differ");
}

// to a sum-1 distribution; zero total mass is a caller error
std::vector<double> normalized(const DenseMap& m, const char* what) {
    double total = 0.0;
    for (double x : m.v) {
        if (x < 0.0) raise(Errc::zero_mass, std::string(what) + ": negative map value");
        total += x;
    }
    if (!(total > 0.0)) raise(Errc::zero_mass, std::string(what) + ": map has zero mass");
    std::vector<double> out(m.v);
    for (double& x : out) x /= total;
    return out;
}

} // namespace

double kld(const DenseMap& pred, const DenseMap& gt) {
    check_dims(pred, gt, "kld");
    std::vector<double> p = normalized(pred, "kld pred");
    std::vector<double> g = normalized(gt, "kld gt");
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g[i] > 0.0) acc += g[i] * std::log(g[i] / (p[i] + kEps));
    return acc;
}

double sim(const DenseMap& pred, const DenseMap& gt) {
    check_dims(pred, gt, "sim");
    std::vector<double> p = normalized(pred, "sim pred");
    std::vector<double> g = normalized(gt, "sim gt");
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) acc += std::min(p[i], g[i]);
    return acc;
}

double nss(const DenseMap& pred, const DenseMap& gt, double fix_thresh) {
    check_dims(pred, gt, "nss");
    double gmax = 0.0;
    for (double x : gt.v) {
        if (x < 0.0) raise(Errc::zero_mass, "nss: negative gt value");
        gmax = std::max(gmax, x);
    }
    if (!(gmax > 0.0)) raise(Errc::empty_fixations, "nss: gt has no fixations");

    // a constant map standardizes to zero by definition; test min==max rather
    // than the computed variance, which picks up rounding noise
    auto [pmin, pmax] = std::minmax_element(pred.v.begin(), pred.v.end());
    if (*pmin == *pmax) return 0.0;

    double n = static_cast<double>(pred.v.size());
    double mean = 0.0;
    for (double x : pred.v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : pred.v) var += (x - mean) * (x - mean);
    var /= n; // population variance
    if (!(var > 0.0)) return 0.0;
    double inv_sd = 1.0 / std::sqrt(var);

    double cut = fix_thresh * gmax;
    double acc = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < gt.v.size(); ++i)
        if (gt.v[i] >= cut) {
            acc += (pred.v[i] - mean) * inv_sd;
            ++count;
        }
    return acc / count;
}

MetricReport evaluate_grounding(const std::string& pred_dir, const std::string& gt_dir,
                                double fix_thresh) {
    namespace fs = std::filesystem;
    auto listing = [](const std::string& dir) {
        if (!fs::is_directory(dir)) raise(Errc::io_error, "not a directory: " + dir);
        std::set<std::string> names;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file()) names.insert(e.path().filename().string());
        return names;
    };
    std::set<std::string> preds = listing(pred_dir);
    std::set<std::string> gts = listing(gt_dir);
    for (const std::string& n : preds)
        if (!gts.count(n)) raise(Errc::missing_pair, "no ground truth for " + n);
    for (const std::string& n : gts)
        if (!preds.count(n)) raise(Errc::missing_pair, "no prediction for " + n);

    MetricReport report;
    report.fix_thresh = fix_thresh;
    for (const std::string& n : preds) {
        DenseMap p = load_heatmap((fs::path(pred_dir) / n).string());
        DenseMap g = load_heatmap((fs::path(gt_dir) / n).string());
        MetricReport::PerImage row;
        row.name = n;
        row.kld = kld(p, g);
        row.sim = sim(p, g);
        row.nss = nss(p, g, fix_thresh);
        report.mean_kld += row.kld;
        report.mean_sim += row.sim;
        report.mean_nss += row.nss;
        report.images.push_back(std::move(row));
    }
    report.count = static_cast<int>(report.images.size());
    if (report.count > 0) {
        report.mean_kld /= report.count;
        report.mean_sim /= report.count;
        report.mean_nss /= report.count;
    }
    return report;
}

PrecisionTable gesture_precision(const std::vector<PredictionRecord>& predictions) {
    PrecisionTable table;
    for (const PredictionRecord& r : predictions) {
        if (r.predicted < 1 || r.predicted > 14 || r.actual < 1 || r.actual > 14)
            raise(Errc::label_out_of_range, "gesture id outside [1,14]");
        PrecisionCell& cell = table.cells[{r.task, r.tool}];
        if (r.predicted == r.actual)
            ++cell.tp;
        else
            ++cell.fp;
    }

    std::map<std::string, std::pair<double, int>> by_task, by_tool;
    double total = 0.0;
    for (const auto& [key, cell] : table.cells) {
        double p = cell.precision();
        by_task[key.first].first += p;
        by_task[key.first].second += 1;
        by_tool[key.second].first += p;
        by_tool[key.second].second += 1;
        total += p;
    }
    for (const auto& [task, acc] : by_task) table.task_ap[task] = acc.first / acc.second;
    for (const auto& [tool, acc] : by_tool) table.tool_ap[tool] = acc.first / acc.second;
    if (!table.cells.empty()) table.overall_ap = total / static_cast<double>(table.cells.size());
    return table;
}

} // namespace graspkit
