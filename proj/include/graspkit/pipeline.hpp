#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string>

#include "graspkit/dataset_io.hpp"
#include "graspkit/kinematics.hpp"
#include "graspkit/losses_heads.hpp"
#include "graspkit/metrics.hpp"

namespace graspkit {

struct PipelineConfig {
    std::string manifest_path;
    std::string gesture_table_path; // empty -> built-in table
    std::string checkpoint_dir = "checkpoints";
    std::string out_dir = ".";
    LossConfig loss;
    TrainConfig train;
    double roi_radius = 20.0; // px on the 448 grid
    int prototype_count = 3;
    std::uint64_t seed = 0;
};

PipelineConfig load_pipeline_config(const std::string& path);

// Kinematics configs as JSON documents (SI units); missing keys keep the
// built-in defaults.
HandModel load_hand_model(const std::string& path);
CameraIntrinsics load_camera(const std::string& path);
ContactModel load_contact_model(const std::string& path);

// CSV artifacts print doubles with %.17g so round-trips are exact.
std::string format_double(double v);

struct FuncFingerOptions {
    std::string landmarks_path;
    std::string roi_out; // PGM mask; empty skips the write
    double radius = 20.0;
};
int cmd_funcfinger(const FuncFingerOptions& opt, std::ostream& out);

int cmd_train_heads(const PipelineConfig& cfg, std::ostream& out);

struct InferOptions {
    std::string features_path;
    std::string task;
    std::string checkpoint_dir;
    std::string map_out;     // GAFT, 448x448 by default
    std::string map_pgm_out; // optional PGM copy
    int out_size = 448;
};
int cmd_infer(const InferOptions& opt, std::ostream& out);

struct EvalOptions {
    std::string pred_dir, gt_dir;
    std::string report_csv, report_json; // empty skips that artifact
    std::string predictions_csv;         // optional gesture predictions input
    std::string precision_json;
    double fix_thresh = 0.5;
};
int cmd_eval(const EvalOptions& opt, std::ostream& out);

struct GraspSimOptions {
    std::string map_path, depth_path;
    std::string hand_path, camera_path, contacts_path, gesture_table_path;
    std::string task = "Hold", tool = "hammer";
    int finger = 1; // functional finger driving the wrist solve
    double step = 0.02, eps = 1e-6;
    std::string out_json, trace_csv;
    bool has_target = false;
    Vec3 target{};
    double target_tol = 1e-6;
};
int cmd_grasp_sim(const GraspSimOptions& opt, std::ostream& out);

struct RenderOptions {
    std::string map_path;
    std::string base_path; // optional grayscale PGM underlay
    std::string out_ppm;
};
int cmd_render(const RenderOptions& opt, std::ostream& out);

// Cold-to-hot ramp used by cmd_render; v clamped to [0,1].
std::array<std::uint8_t, 3> heat_color(double v);

} // namespace graspkit
