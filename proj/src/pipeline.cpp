#include "graspkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "graspkit/error.hpp"
#include "graspkit/hand_geometry.hpp"
#include "graspkit/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace graspkit {

namespace {

json parse_json_file(const std::string& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) raise(Errc::parse_error, "invalid JSON in " + path);
    return j;
}

std::vector<double> vec3_json(const Vec3& v) { return {v.x, v.y, v.z}; }

Vec3 json_vec3(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3) raise(Errc::parse_error, what + ": expected 3 numbers");
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

DenseMap channel_of(const FeatureMap& maps, int c) {
    DenseMap m(maps.h, maps.w);
    std::copy_n(&maps.v[static_cast<std::size_t>(c) * maps.plane()], m.size(), m.v.begin());
    return m;
}

// normalized map as pooling weights, uniform fallback when the map is flat
Embedding pooled_embedding(const FeatureMap& f, const DenseMap& map) {
    DenseMap wnorm = min_max_normalize(map);
    double mass = 0.0;
    for (double x : wnorm.v) mass += x;
    if (!(mass > 0.0)) return masked_average_pool(f, DenseMap(f.h, f.w, 1.0));
    return masked_average_pool(f, wnorm);
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    json j = parse_json_file(path);
    PipelineConfig cfg;
    try {
        cfg.manifest_path = j.value("manifest", "");
        cfg.gesture_table_path = j.value("gesture_table", "");
        cfg.checkpoint_dir = j.value("checkpoint_dir", cfg.checkpoint_dir);
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
        cfg.roi_radius = j.value("roi_radius", cfg.roi_radius);
        cfg.prototype_count = j.value("prototypes", cfg.prototype_count);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("loss")) {
            const json& l = j["loss"];
            cfg.loss.alpha = l.value("alpha", cfg.loss.alpha);
            cfg.loss.lambda_c = l.value("lambda_c", cfg.loss.lambda_c);
            cfg.loss.warmup_epochs_without_cos =
                l.value("warmup_epochs_without_cos", cfg.loss.warmup_epochs_without_cos);
        }
        if (j.contains("train")) {
            const json& t = j["train"];
            cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
            cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
            cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
            cfg.train.exo_per_batch = t.value("exo_per_batch", cfg.train.exo_per_batch);
            cfg.train.epochs = t.value("epochs", cfg.train.epochs);
            cfg.train.seed = t.value("seed", cfg.train.seed);
        }
    } catch (const json::exception& ex) {
        raise(Errc::parse_error, path + ": " + ex.what());
    }
    if (!(cfg.roi_radius > 0.0)) raise(Errc::invalid_config, "roi_radius must be positive");
    return cfg;
}

HandModel load_hand_model(const std::string& path) {
    json j = parse_json_file(path);
    HandModel hm;
    try {
        if (j.contains("fingers")) {
            const json& fingers = j["fingers"];
            if (fingers.size() != 5) raise(Errc::parse_error, path + ": need 5 fingers");
            for (int f = 0; f < 5; ++f) {
                hm.fingers[f].l1 = fingers[f].value("l1", hm.fingers[f].l1);
                hm.fingers[f].l2 = fingers[f].value("l2", hm.fingers[f].l2);
                hm.fingers[f].delta = fingers[f].value("delta", hm.fingers[f].delta);
            }
        }
        for (auto [key, maps] : {std::pair{"joint1_map", &hm.joint1_map},
                                 std::pair{"joint2_map", &hm.joint2_map}}) {
            if (!j.contains(key)) continue;
            const json& arr = j[key];
            if (arr.size() != 5) raise(Errc::parse_error, path + ": need 5 joint maps");
            for (int f = 0; f < 5; ++f) {
                (*maps)[f].a = arr[f].value("a", (*maps)[f].a);
                (*maps)[f].b = arr[f].value("b", (*maps)[f].b);
            }
        }
        if (j.contains("wrist_offset"))
            hm.wrist_offset = json_vec3(j["wrist_offset"], path + " wrist_offset");
        if (j.contains("limits")) {
            const json& l = j["limits"];
            hm.limits.flex_min = l.value("flex_min", hm.limits.flex_min);
            hm.limits.flex_max = l.value("flex_max", hm.limits.flex_max);
            hm.limits.abd_min = l.value("abd_min", hm.limits.abd_min);
            hm.limits.abd_max = l.value("abd_max", hm.limits.abd_max);
        }
    } catch (const json::exception& ex) {
        raise(Errc::parse_error, path + ": " + ex.what());
    }
    return hm;
}

CameraIntrinsics load_camera(const std::string& path) {
    json j = parse_json_file(path);
    CameraIntrinsics cam;
    try {
        cam.fx = j.value("fx", cam.fx);
        cam.fy = j.value("fy", cam.fy);
        cam.cx = j.value("cx", cam.cx);
        cam.cy = j.value("cy", cam.cy);
        if (j.contains("rotation")) {
            const json& r = j["rotation"];
            if (r.size() != 9) raise(Errc::parse_error, path + ": rotation needs 9 entries");
            for (int i = 0; i < 9; ++i) cam.rotation.m[i] = r[i].get<double>();
        }
        if (j.contains("translation"))
            cam.translation = json_vec3(j["translation"], path + " translation");
    } catch (const json::exception& ex) {
        raise(Errc::parse_error, path + ": " + ex.what());
    }
    return cam;
}

ContactModel load_contact_model(const std::string& path) {
    json j = parse_json_file(path);
    ContactModel cm;
    try {
        if (j.contains("fingers")) {
            const json& fingers = j["fingers"];
            if (fingers.size() != 5) raise(Errc::parse_error, path + ": need 5 finger contacts");
            for (int f = 0; f < 5; ++f) {
                cm.fingers[f].theta_contact =
                    fingers[f].value("theta_contact", cm.fingers[f].theta_contact);
                cm.fingers[f].stiffness = fingers[f].value("stiffness", cm.fingers[f].stiffness);
            }
        }
        cm.noise_amp = j.value("noise_amp", cm.noise_amp);
        cm.noise_seed = j.value("noise_seed", cm.noise_seed);
    } catch (const json::exception& ex) {
        raise(Errc::parse_error, path + ": " + ex.what());
    }
    return cm;
}

int cmd_funcfinger(const FuncFingerOptions& opt, std::ostream& out) {
    HandLandmarks lm = load_landmarks(opt.landmarks_path);
    FingerId fid = functional_finger(lm);
    Vec3 tip = functional_fingertip(lm, fid);
    out << "functional_finger: " << static_cast<int>(fid) << " (" << finger_name(fid) << ")\n";
    out << "fingertip: " << format_double(tip.x) << " " << format_double(tip.y) << " "
        << format_double(tip.z) << "\n";
    if (!opt.roi_out.empty()) {
        double cx = std::round(tip.x * 447.0);
        double cy = std::round(tip.y * 447.0);
        RoiMask mask = circular_mask(448, 448, cx, cy, opt.radius);
        save_pgm(to_dense(mask), opt.roi_out);
        out << "roi: " << opt.roi_out << "\n";
    }
    return 0;
}

namespace {

struct PreparedSamples {
    std::vector<TrainBatch> fine, coarse;
    int d = 0;
};

// Build per-ego training samples: the fine target pools upsampled exo
// features inside the functional-finger ROI; the coarse target is the
// exo-patch prototype that best overlaps the ego saliency map.
PreparedSamples prepare_training_samples(const std::vector<ManifestRecord>& records,
                                         const GestureTable& table, const PipelineConfig& cfg) {
    std::map<std::pair<std::string, std::string>, std::vector<const ManifestRecord*>> exo;
    std::vector<const ManifestRecord*> egos;
    for (const ManifestRecord& r : records) {
        if (r.split != "train") continue;
        if (r.view == "exo")
            exo[{r.task, r.tool}].push_back(&r);
        else
            egos.push_back(&r);
    }
    if (egos.empty()) raise(Errc::data_inconsistency, "manifest has no ego training records");

    Rng rng(cfg.seed);
    PreparedSamples out;
    out.d = -1;
    std::vector<TrainSample> fine_samples, coarse_samples;

    for (const ManifestRecord* ego : egos) {
        FeatureMap f_ego = load_feature_map(ego->feature_path, Provenance::ego);
        if (out.d < 0) out.d = f_ego.d;
        if (f_ego.d != out.d)
            raise(Errc::data_inconsistency, ego->id + ": feature channel count varies");

        auto it = exo.find({ego->task, ego->tool});
        if (it == exo.end())
            raise(Errc::data_inconsistency,
                  ego->id + ": no exo partners for (" + ego->task + ", " + ego->tool + ")");
        const auto& group = it->second;

        // N exo partners, seeded draw (with replacement so small groups work)
        int n = std::max(1, cfg.train.exo_per_batch);
        Embedding fine_target(out.d, 0.0);
        std::vector<Embedding> patches;
        for (int i = 0; i < n; ++i) {
            const ManifestRecord* rec = group[rng.index(group.size())];
            FeatureMap fx = load_feature_map(rec->feature_path, Provenance::exo);
            if (fx.d != out.d)
                raise(Errc::data_inconsistency, rec->id + ": feature channel count varies");
            HandLandmarks lm = load_landmarks(rec->landmarks_path);
            FingerId fid = functional_finger(lm);
            Vec3 tip = functional_fingertip(lm, fid);
            FeatureMap up = bilinear_upsample(fx, 448, 448);
            RoiMask mask = circular_mask(448, 448, std::round(tip.x * 447.0),
                                         std::round(tip.y * 447.0), cfg.roi_radius);
            Embedding e = masked_average_pool(up, to_dense(mask));
            for (int k = 0; k < out.d; ++k) fine_target[k] += e[k] / n;
            std::vector<Embedding> pe = patch_embeddings(fx);
            patches.insert(patches.end(), pe.begin(), pe.end());
        }

        if (ego->heatmap_path.empty())
            raise(Errc::data_inconsistency,
                  ego->id + ": ego training record needs a saliency heatmap");
        PrototypeSet ps = cluster_prototypes(patches, cfg.prototype_count, rng.next());
        std::vector<DenseMap> sims;
        sims.reserve(ps.centroids.size());
        for (const Embedding& c : ps.centroids) sims.push_back(similarity_map(f_ego, c));
        DenseMap saliency = load_heatmap(ego->heatmap_path);
        if (saliency.h != f_ego.h || saliency.w != f_ego.w)
            saliency = bilinear_upsample(saliency, f_ego.h, f_ego.w);
        Embedding coarse_target = ps.centroids[select_prototype_by_iou(sims, saliency)];

        int task = task_index(ego->task);
        int gid = lookup_gesture_id(table, ego->task, ego->tool) - 1;

        TrainSample fine;
        fine.features = f_ego;
        fine.task_label = task;
        fine.target = std::move(fine_target);
        fine_samples.push_back(std::move(fine));

        TrainSample coarse;
        coarse.features = std::move(f_ego);
        coarse.task_label = task;
        coarse.gesture_label = gid;
        coarse.target = std::move(coarse_target);
        coarse_samples.push_back(std::move(coarse));
    }

    int bs = std::max(1, cfg.train.batch_size);
    auto chunk = [bs](std::vector<TrainSample>& samples) {
        std::vector<TrainBatch> batches;
        for (std::size_t i = 0; i < samples.size(); i += bs) {
            TrainBatch b;
            for (std::size_t k = i; k < std::min(samples.size(), i + bs); ++k)
                b.samples.push_back(std::move(samples[k]));
            batches.push_back(std::move(b));
        }
        return batches;
    };
    out.fine = chunk(fine_samples);
    out.coarse = chunk(coarse_samples);
    return out;
}

void write_trace_csv(const std::string& path, const TrainResult& fine,
                     const TrainResult& coarse) {
    std::string csv = "step,epoch,L_cos,L_c,L_class,L_f,total\n";
    // both branches run the same batch schedule; rows carry the branch sums
    for (std::size_t i = 0; i < fine.trace.size(); ++i) {
        const StepTrace& a = fine.trace[i];
        const StepTrace& b = coarse.trace[i];
        csv += std::to_string(a.step) + ',' + std::to_string(a.epoch) + ',' +
               format_double(a.l_cos + b.l_cos) + ',' + format_double(a.l_c + b.l_c) + ',' +
               format_double(a.l_class + b.l_class) + ',' + format_double(a.l_f + b.l_f) + ',' +
               format_double(a.total + b.total) + '\n';
    }
    atomic_write(path, csv);
}

} // namespace

int cmd_train_heads(const PipelineConfig& cfg, std::ostream& out) {
    std::vector<ManifestRecord> records = load_manifest(cfg.manifest_path);
    GestureTable table = cfg.gesture_table_path.empty()
                             ? default_gesture_table()
                             : load_gesture_table(cfg.gesture_table_path);
    PreparedSamples prepared = prepare_training_samples(records, table, cfg);

    int classes = static_cast<int>(task_vocabulary().size());
    LocalizationHead fine_head = make_head(prepared.d, classes, cfg.seed + 1);
    LocalizationHead coarse_head = make_head(prepared.d, classes, cfg.seed + 2);
    GestureClassifier clf = make_classifier(prepared.d, cfg.seed + 3);

    TrainResult fine_res = train_heads(prepared.fine, fine_head, nullptr, cfg.loss, cfg.train);
    TrainResult coarse_res = train_heads(prepared.coarse, coarse_head, &clf, cfg.loss, cfg.train);

    fs::create_directories(cfg.out_dir);
    std::string ckdir = (fs::path(cfg.out_dir) / cfg.checkpoint_dir).string();
    save_checkpoint((fs::path(ckdir) / "fine").string(), fine_head, nullptr);
    save_checkpoint((fs::path(ckdir) / "coarse").string(), coarse_head, &clf);
    std::string trace_path = (fs::path(cfg.out_dir) / "loss_trace.csv").string();
    write_trace_csv(trace_path, fine_res, coarse_res);

    out << "samples: " << [&] {
        std::size_t n = 0;
        for (const TrainBatch& b : prepared.fine) n += b.samples.size();
        return n;
    }() << "\n";
    out << "steps: " << fine_res.trace.size() << "\n";
    if (!fine_res.trace.empty()) {
        const StepTrace& a = fine_res.trace.back();
        const StepTrace& b = coarse_res.trace.back();
        out << "final_total: " << format_double(a.total + b.total) << "\n";
    }
    out << "checkpoint: " << ckdir << "\n";
    out << "trace: " << trace_path << "\n";
    return 0;
}

int cmd_infer(const InferOptions& opt, std::ostream& out) {
    Checkpoint fine = load_checkpoint((fs::path(opt.checkpoint_dir) / "fine").string());
    Checkpoint coarse = load_checkpoint((fs::path(opt.checkpoint_dir) / "coarse").string());
    if (!coarse.has_classifier)
        raise(Errc::data_inconsistency, "coarse checkpoint lacks a gesture classifier");
    FeatureMap f = load_feature_map(opt.features_path, Provenance::ego);
    int t = task_index(opt.task);

    FeatureMap fine_maps = localization_head_forward(fine.head, f);
    DenseMap pred = min_max_normalize(channel_of(fine_maps, t));
    DenseMap up = bilinear_upsample(pred, opt.out_size, opt.out_size);
    if (!opt.map_out.empty()) save_dense_map(up, opt.map_out);
    if (!opt.map_pgm_out.empty()) save_pgm(up, opt.map_pgm_out);

    FeatureMap coarse_maps = localization_head_forward(coarse.head, f);
    Embedding e = pooled_embedding(f, channel_of(coarse_maps, t));
    std::vector<double> scores = gesture_forward(coarse.clf, e);
    // first maximum wins; an untrained (all-zero) head degenerates to id 1
    int best = static_cast<int>(std::max_element(scores.begin(), scores.end()) -
                                scores.begin());
    out << "task: " << opt.task << "\n";
    out << "gesture_id: " << best + 1 << "\n";
    if (!opt.map_out.empty()) out << "map: " << opt.map_out << "\n";
    return 0;
}

int cmd_eval(const EvalOptions& opt, std::ostream& out) {
    MetricReport report = evaluate_grounding(opt.pred_dir, opt.gt_dir, opt.fix_thresh);
    if (!opt.report_csv.empty()) {
        std::string csv = "name,kld,sim,nss\n";
        for (const auto& row : report.images)
            csv += row.name + ',' + format_double(row.kld) + ',' + format_double(row.sim) + ',' +
                   format_double(row.nss) + '\n';
        csv += "AGGREGATE," + format_double(report.mean_kld) + ',' +
               format_double(report.mean_sim) + ',' + format_double(report.mean_nss) + '\n';
        atomic_write(opt.report_csv, csv);
    }
    if (!opt.report_json.empty()) {
        json images = json::array();
        for (const auto& row : report.images)
            images.push_back(
                {{"name", row.name}, {"kld", row.kld}, {"sim", row.sim}, {"nss", row.nss}});
        json j = {{"count", report.count},
                  {"fix_thresh", report.fix_thresh},
                  {"images", images},
                  {"mean", {{"kld", report.mean_kld},
                            {"sim", report.mean_sim},
                            {"nss", report.mean_nss}}}};
        atomic_write(opt.report_json, j.dump(2) + "\n");
    }
    out << "images: " << report.count << "\n";
    out << "mean_kld: " << format_double(report.mean_kld) << "\n";
    out << "mean_sim: " << format_double(report.mean_sim) << "\n";
    out << "mean_nss: " << format_double(report.mean_nss) << "\n";

    if (!opt.predictions_csv.empty()) {
        std::string text = read_file(opt.predictions_csv);
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        std::vector<PredictionRecord> preds;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (lineno == 1) {
                if (line != "tool,task,predicted,actual")
                    raise(Errc::parse_error, opt.predictions_csv + " line 1: bad header");
                continue;
            }
            if (line.empty()) continue;
            std::istringstream ls(line);
            PredictionRecord r;
            std::string pred_s, act_s;
            if (!std::getline(ls, r.tool, ',') || !std::getline(ls, r.task, ',') ||
                !std::getline(ls, pred_s, ',') || !std::getline(ls, act_s))
                raise(Errc::parse_error, opt.predictions_csv + " line " +
                                             std::to_string(lineno) + ": expected 4 columns");
            try {
                r.predicted = std::stoi(pred_s);
                r.actual = std::stoi(act_s);
            } catch (const std::exception&) {
                raise(Errc::parse_error, opt.predictions_csv + " line " +
                                             std::to_string(lineno) + ": bad gesture id");
            }
            preds.push_back(std::move(r));
        }
        PrecisionTable table = gesture_precision(preds);
        if (!opt.precision_json.empty()) {
            json cells = json::array();
            for (const auto& [key, cell] : table.cells)
                cells.push_back({{"task", key.first},
                                 {"tool", key.second},
                                 {"tp", cell.tp},
                                 {"fp", cell.fp},
                                 {"precision", cell.precision()}});
            json j = {{"cells", cells},
                      {"task_ap", table.task_ap},
                      {"tool_ap", table.tool_ap},
                      {"overall_ap", table.overall_ap}};
            atomic_write(opt.precision_json, j.dump(2) + "\n");
        }
        out << "overall_ap: " << format_double(table.overall_ap) << "\n";
    }
    return 0;
}

int cmd_grasp_sim(const GraspSimOptions& opt, std::ostream& out) {
    DenseMap affordance = load_heatmap(opt.map_path);
    DenseMap depth = to_dense_map(load_tensor(opt.depth_path));
    HandModel hm = opt.hand_path.empty() ? HandModel{} : load_hand_model(opt.hand_path);
    CameraIntrinsics cam =
        opt.camera_path.empty() ? CameraIntrinsics{} : load_camera(opt.camera_path);
    ContactModel contacts;
    if (opt.contacts_path.empty()) {
        for (FingerContact& fc : contacts.fingers) {
            fc.theta_contact = 0.3;
            fc.stiffness = 5.0;
        }
    } else {
        contacts = load_contact_model(opt.contacts_path);
    }
    GestureTable table = opt.gesture_table_path.empty()
                             ? default_gesture_table()
                             : load_gesture_table(opt.gesture_table_path);
    GestureConfig g = lookup_gesture(table, opt.task, opt.tool);
    if (opt.finger < 0 || opt.finger > 4)
        raise(Errc::invalid_config, "functional finger id must be in [0,4]");
    FingerId fid = static_cast<FingerId>(opt.finger);

    GraspPose pose = solve_grasp_pose(affordance, depth, cam, hm, g, fid);

    bool converged = false;
    bool no_contact = false;
    std::string reason;
    ClosureResult closure;
    try {
        closure = force_feedback_closure(g, contacts, opt.step, opt.eps, hm.limits);
        converged = closure.status == ClosureStatus::converged;
        if (!converged) reason = "BestEffort";
    } catch (const Error& e) {
        if (e.code() != Errc::no_contact) throw;
        no_contact = true;
        reason = "NoContact";
    }

    double target_error = 0.0;
    bool target_ok = true;
    if (opt.has_target) {
        target_error = norm(pose.p_wf - opt.target);
        target_ok = target_error <= opt.target_tol;
    }
    bool success = converged && target_ok;

    if (!opt.out_json.empty()) {
        json j = {{"p_wf", vec3_json(pose.p_wf)},
                  {"p_we", vec3_json(pose.p_we)},
                  {"r_wf", std::vector<double>(pose.r_wf.m.begin(), pose.r_wf.m.end())},
                  {"pixel", {pose.pixel.u, pose.pixel.v}},
                  {"depth", pose.depth},
                  {"success", success}};
        if (!no_contact) {
            j["final_angles"] = std::vector<double>(closure.final_angles.begin(),
                                                    closure.final_angles.end());
            j["iterations"] = closure.iterations;
            j["status"] = converged ? "converged" : "best_effort";
        }
        if (!reason.empty()) j["reason"] = reason;
        if (opt.has_target) j["target_error"] = target_error;
        atomic_write(opt.out_json, j.dump(2) + "\n");
    }
    if (!opt.trace_csv.empty() && !no_contact) {
        std::string csv = "iter,thumb,index,middle,ring,pinky,total\n";
        for (std::size_t i = 0; i < closure.trace.size(); ++i) {
            const ForceSample& s = closure.trace[i];
            csv += std::to_string(i);
            for (double fvC : s.finger_force) csv += ',' + format_double(fvC);
            csv += ',' + format_double(s.total) + '\n';
        }
        atomic_write(opt.trace_csv, csv);
    }

    out << "p_wf: " << format_double(pose.p_wf.x) << " " << format_double(pose.p_wf.y) << " "
        << format_double(pose.p_wf.z) << "\n";
    out << "p_we: " << format_double(pose.p_we.x) << " " << format_double(pose.p_we.y) << " "
        << format_double(pose.p_we.z) << "\n";
    out << "success: " << (success ? "true" : "false") << "\n";
    if (!reason.empty()) out << "reason: " << reason << "\n";
    if (no_contact) return errc_exit_code(Errc::no_contact);
    return 0;
}

std::array<std::uint8_t, 3> heat_color(double v) {
    v = std::clamp(v, 0.0, 1.0);
    auto lerp = [](double a, double b, double t) {
        return static_cast<std::uint8_t>(std::lround(a + (b - a) * t));
    };
    if (v < 0.5) {
        double t = v / 0.5; // navy -> yellow
        return {lerp(0, 255, t), lerp(0, 255, t), lerp(128, 0, t)};
    }
    double t = (v - 0.5) / 0.5; // yellow -> red
    return {255, lerp(255, 0, t), 0};
}

int cmd_render(const RenderOptions& opt, std::ostream& out) {
    DenseMap map = load_heatmap(opt.map_path);
    bool has_base = !opt.base_path.empty();
    DenseMap base;
    if (has_base) {
        base = load_pgm(opt.base_path);
        if (base.h != map.h || base.w != map.w)
            raise(Errc::dimension_mismatch, "base image dims do not match the map");
    }
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(map.h) * map.w * 3);
    for (std::size_t i = 0; i < map.v.size(); ++i) {
        double a = std::clamp(map.v[i], 0.0, 1.0);
        std::array<std::uint8_t, 3> c = heat_color(a);
        for (int k = 0; k < 3; ++k) {
            double value = has_base ? (1.0 - a) * base.v[i] * 255.0 + a * c[k]
                                    : static_cast<double>(c[k]);
            rgb[3 * i + k] = static_cast<std::uint8_t>(std::lround(value));
        }
    }
    save_ppm(rgb, map.h, map.w, opt.out_ppm);
    out << "render: " << opt.out_ppm << "\n";
    return 0;
}

} // namespace graspkit
