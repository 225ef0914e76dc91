#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "graspkit/hand_geometry.hpp"
#include "graspkit/linalg.hpp"
#include "graspkit/tensor_core.hpp"

namespace graspkit {

// Two-link planar finger: proximal length l1, distal length l2, mounting
// angle delta between the proximal link's zero pose and the x-axis. Meters
// and radians.
struct FingerModel {
    double l1 = 0.032;
    double l2 = 0.038;
    double delta = 0.17453292519943295; // 10 deg
};

// theta_joint = a * theta_cmd + b
struct JointMap {
    double a = 1.0;
    double b = 0.0;
};

struct JointLimits {
    double flex_min = 0.0;
    double flex_max = 1.5707963267948966;
    double abd_min = 0.0;
    double abd_max = 1.5707963267948966;
};

struct HandModel {
    std::array<FingerModel, 5> fingers{};
    std::array<JointMap, 5> joint1_map{}; // command angle -> theta1, per finger
    std::array<JointMap, 5> joint2_map{}; // command angle -> theta2, per finger
    Vec3 wrist_offset{-0.03, -0.095, 0.0}; // P_he, wrist end in the hand frame
    JointLimits limits{};
};

// One of the 14 coarse grasps: per-finger flexion command angles plus the
// thumb abduction angle.
struct GestureConfig {
    int id = 1; // 1..14
    std::array<double, 5> flexion{}; // indexed by FingerId
    double abduction = 0.0;          // gamma
};

struct CameraIntrinsics {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    Mat3 rotation = Mat3::identity(); // camera-to-world
    Vec3 translation{};
};

struct GraspPose {
    Vec3 p_wf;               // functional fingertip, world frame
    Mat3 r_wf;               // world <- hand rotation
    Vec3 p_we;               // wrist end, world frame
    Pixel pixel;             // argmax pixel the pose was derived from
    double depth = 0.0;      // filtered depth at that pixel (m)
};

struct FingerContact {
    double theta_contact = 0.0; // rad at which the finger meets the object
    double stiffness = 0.0;     // N/rad after contact
};

struct ContactModel {
    std::array<FingerContact, 5> fingers{};
    double noise_amp = 0.0;
    uint64_t noise_seed = 0;
};

Mat3 rot_z(double theta);

// Eq. of the planar finger chain: R(theta2)[l2,0,0]^T + R(theta1+theta2+delta)[l1,0,0]^T.
Vec3 fingertip_in_hand(const FingerModel& fm, double theta1, double theta2,
                       const JointLimits& limits = {});

// Lateral thumb swing about the y-axis by gamma.
Vec3 thumb_abduction(const Vec3& p_flexion, double gamma);

// Pixel + metric depth to a world point through the pinhole model and the
// camera-to-world transform.
Vec3 back_project(double u, double v, double depth, const CameraIntrinsics& cam);

std::pair<double, double> joint_angles_from_command(const HandModel& hm, FingerId finger,
                                                    double theta_cmd);

// P_we = R_wf (P_he - P_hf) + P_wf
Vec3 wrist_from_fingertip(const Vec3& p_wf, const Mat3& r_wf, const Vec3& p_hf,
                          const Vec3& p_he);

// Brightest-pixel grasp point: argmax of the affordance map, median-filtered
// depth, back-projection, finger forward kinematics, wrist solve.
GraspPose solve_grasp_pose(const DenseMap& affordance, const DenseMap& depth_map,
                           const CameraIntrinsics& cam, const HandModel& hm,
                           const GestureConfig& g, FingerId functional,
                           const Mat3& r_wf = Mat3::identity());

enum class ClosureStatus { converged, best_effort };

struct ForceSample {
    std::array<double, 5> finger_force{};
    double total = 0.0;
};

struct ClosureResult {
    std::array<double, 5> final_angles{};
    std::vector<ForceSample> trace; // initial state plus one sample per increment
    ClosureStatus status = ClosureStatus::converged;
    int iterations = 0;
};

// Increments every finger's flexion by `step` until each finger in contact
// shows a vanishing second difference of force while total force stays
// positive. Throws NoContact when the cap is reached with zero force.
ClosureResult force_feedback_closure(const GestureConfig& g, const ContactModel& contacts,
                                     double step, double eps,
                                     const JointLimits& limits = {}, int max_iters = 500);

} // namespace graspkit
