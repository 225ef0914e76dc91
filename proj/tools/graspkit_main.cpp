#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "graspkit/error.hpp"
#include "graspkit/pipeline.hpp"

using namespace graspkit;

int main(int argc, char** argv) {
    CLI::App app{"grasp toolkit: affordance localization, gesture lookup, grasp simulation"};
    app.require_subcommand(1);

    std::uint64_t g_seed = 0;
    std::string g_out_dir;
    app.add_option("--seed", g_seed, "override every seeded component");
    app.add_option("--out-dir", g_out_dir, "override the output directory");

    int rc = 0;

    FuncFingerOptions ff;
    auto* sc_ff = app.add_subcommand("funcfinger",
                                     "functional finger and ROI mask from hand landmarks");
    sc_ff->add_option("landmarks", ff.landmarks_path, "landmarks JSON file")->required();
    sc_ff->add_option("--roi-out", ff.roi_out, "write the ROI mask as PGM");
    sc_ff->add_option("--radius", ff.radius, "ROI radius in px on the 448 grid");
    sc_ff->callback([&]() { rc = cmd_funcfinger(ff, std::cout); });

    std::string tr_config, tr_manifest, tr_table, tr_checkpoint;
    int tr_epochs = 0;
    auto* sc_tr = app.add_subcommand("train-heads",
                                     "train the localization heads and gesture classifier");
    sc_tr->add_option("--config", tr_config, "pipeline config JSON");
    sc_tr->add_option("--manifest", tr_manifest, "dataset manifest (CSV or JSON)");
    sc_tr->add_option("--gesture-table", tr_table, "gesture table JSON");
    sc_tr->add_option("--checkpoint-dir", tr_checkpoint, "checkpoint directory name");
    sc_tr->add_option("--epochs", tr_epochs, "training epochs");
    sc_tr->callback([&]() {
        PipelineConfig cfg =
            tr_config.empty() ? PipelineConfig{} : load_pipeline_config(tr_config);
        if (sc_tr->count("--manifest")) cfg.manifest_path = tr_manifest;
        if (sc_tr->count("--gesture-table")) cfg.gesture_table_path = tr_table;
        if (sc_tr->count("--checkpoint-dir")) cfg.checkpoint_dir = tr_checkpoint;
        if (sc_tr->count("--epochs")) cfg.train.epochs = tr_epochs;
        if (app.count("--seed")) {
            cfg.seed = g_seed;
            cfg.train.seed = g_seed;
        }
        if (app.count("--out-dir")) cfg.out_dir = g_out_dir;
        if (cfg.manifest_path.empty())
            raise(Errc::invalid_config, "train-heads needs --manifest or a config file");
        rc = cmd_train_heads(cfg, std::cout);
    });

    InferOptions inf;
    auto* sc_inf = app.add_subcommand("infer", "localization map and gesture for one image");
    sc_inf->add_option("features", inf.features_path, "feature tensor (GAFT)")->required();
    sc_inf->add_option("--task", inf.task, "task label")->required();
    sc_inf->add_option("--checkpoint", inf.checkpoint_dir, "checkpoint directory")->required();
    sc_inf->add_option("--map-out", inf.map_out, "output map (GAFT)");
    sc_inf->add_option("--pgm-out", inf.map_pgm_out, "output map copy as PGM");
    sc_inf->add_option("--size", inf.out_size, "output map side length");
    sc_inf->callback([&]() { rc = cmd_infer(inf, std::cout); });

    EvalOptions ev;
    auto* sc_ev = app.add_subcommand("eval", "grounding metrics over prediction/gt directories");
    sc_ev->add_option("pred_dir", ev.pred_dir, "predicted maps")->required();
    sc_ev->add_option("gt_dir", ev.gt_dir, "ground-truth maps")->required();
    sc_ev->add_option("--csv", ev.report_csv, "write the per-image report CSV");
    sc_ev->add_option("--json", ev.report_json, "write the report JSON");
    sc_ev->add_option("--predictions", ev.predictions_csv,
                      "gesture predictions CSV (tool,task,predicted,actual)");
    sc_ev->add_option("--precision-json", ev.precision_json, "write the precision table JSON");
    sc_ev->add_option("--fix-thresh", ev.fix_thresh, "fixation threshold fraction");
    sc_ev->callback([&]() { rc = cmd_eval(ev, std::cout); });

    GraspSimOptions gs;
    std::vector<double> gs_target;
    auto* sc_gs = app.add_subcommand("grasp-sim", "grasp pose + force-feedback closure");
    sc_gs->add_option("map", gs.map_path, "affordance map (GAFT or PGM)")->required();
    sc_gs->add_option("depth", gs.depth_path, "depth map (GAFT rank 2, meters)")->required();
    sc_gs->add_option("--hand", gs.hand_path, "hand model JSON");
    sc_gs->add_option("--camera", gs.camera_path, "camera intrinsics JSON");
    sc_gs->add_option("--contacts", gs.contacts_path, "contact model JSON");
    sc_gs->add_option("--gesture-table", gs.gesture_table_path, "gesture table JSON");
    sc_gs->add_option("--task", gs.task, "task label");
    sc_gs->add_option("--tool", gs.tool, "tool label");
    sc_gs->add_option("--finger", gs.finger, "functional finger id (0..4)");
    sc_gs->add_option("--step", gs.step, "closure step (rad)");
    sc_gs->add_option("--eps", gs.eps, "second-difference tolerance");
    sc_gs->add_option("--out-json", gs.out_json, "write the grasp result JSON");
    sc_gs->add_option("--trace-csv", gs.trace_csv, "write the force trace CSV");
    sc_gs->add_option("--target", gs_target, "planted target point (x y z)")->expected(3);
    sc_gs->add_option("--target-tol", gs.target_tol, "target distance tolerance (m)");
    sc_gs->callback([&]() {
        if (sc_gs->count("--target")) {
            gs.has_target = true;
            gs.target = {gs_target[0], gs_target[1], gs_target[2]};
        }
        rc = cmd_grasp_sim(gs, std::cout);
    });

    RenderOptions rd;
    auto* sc_rd = app.add_subcommand("render", "color-ramp overlay of a map");
    sc_rd->add_option("map", rd.map_path, "map (GAFT or PGM)")->required();
    sc_rd->add_option("--base", rd.base_path, "grayscale base image (PGM)");
    sc_rd->add_option("--out", rd.out_ppm, "output PPM")->required();
    sc_rd->callback([&]() { rc = cmd_render(rd, std::cout); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1; // usage errors are exit code 1
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return rc;
}
