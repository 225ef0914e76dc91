#include "graspkit/kinematics.hpp"

#include <algorithm>
#include <cmath>

#include "graspkit/error.hpp"
#include "graspkit/rng.hpp"

namespace graspkit {

Mat3 rot_z(double theta) {
    double c = std::cos(theta), s = std::sin(theta);
    Mat3 r;
    r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
    return r;
}

static void check_flexion(double theta, const JointLimits& lim, const char* which) {
    if (theta < lim.flex_min - 1e-12 || theta > lim.flex_max + 1e-12)
        raise(Errc::joint_limit, std::string(which) + " angle " + std::to_string(theta) +
                                     " outside [" + std::to_string(lim.flex_min) + ", " +
                                     std::to_string(lim.flex_max) + "]");
}

Vec3 fingertip_in_hand(const FingerModel& fm, double theta1, double theta2,
                       const JointLimits& limits) {
    if (fm.l1 <= 0.0 || fm.l2 <= 0.0) raise(Errc::invalid_config, "link lengths must be positive");
    check_flexion(theta1, limits, "theta1");
    check_flexion(theta2, limits, "theta2");
    Vec3 distal = rot_z(theta2) * Vec3{fm.l2, 0.0, 0.0};
    Vec3 proximal = rot_z(theta1 + theta2 + fm.delta) * Vec3{fm.l1, 0.0, 0.0};
    return distal + proximal;
}

Vec3 thumb_abduction(const Vec3& p, double gamma) {
    double c = std::cos(gamma), s = std::sin(gamma);
    return {p.x * c + p.z * s, p.y, -p.x * s + p.z * c};
}

Vec3 back_project(double u, double v, double depth, const CameraIntrinsics& cam) {
    if (!(depth > 0.0)) raise(Errc::non_positive_depth, "depth must be positive");
    if (cam.fx <= 0.0 || cam.fy <= 0.0) raise(Errc::invalid_config, "focal lengths must be positive");
    Vec3 pc{(u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, depth};
    return cam.rotation * pc + cam.translation;
}

std::pair<double, double> joint_angles_from_command(const HandModel& hm, FingerId finger,
                                                    double theta_cmd) {
    int f = static_cast<int>(finger);
    const JointMap& m1 = hm.joint1_map[f];
    const JointMap& m2 = hm.joint2_map[f];
    if (m1.a == 0.0 || m2.a == 0.0) raise(Errc::invalid_config, "joint map slope must be nonzero");
    double t1 = m1.a * theta_cmd + m1.b;
    double t2 = m2.a * theta_cmd + m2.b;
    check_flexion(t1, hm.limits, "theta1");
    check_flexion(t2, hm.limits, "theta2");
    return {t1, t2};
}

Vec3 wrist_from_fingertip(const Vec3& p_wf, const Mat3& r_wf, const Vec3& p_hf,
                          const Vec3& p_he) {
    if (!is_rotation(r_wf, 1e-8)) raise(Errc::invalid_rotation, "r_wf is not a rotation matrix");
    return r_wf * (p_he - p_hf) + p_wf;
}

// Median over the in-bounds 3x3 neighborhood; lower middle for even counts so
// the result is always a sample value.
static double median_depth(const DenseMap& depth, int u, int v) {
    std::vector<double> vals;
    vals.reserve(9);
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            int y = v + dy, x = u + dx;
            if (y < 0 || y >= depth.h || x < 0 || x >= depth.w) continue;
            vals.push_back(depth.at(y, x));
        }
    std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
    return vals[vals.size() / 2];
}

GraspPose solve_grasp_pose(const DenseMap& affordance, const DenseMap& depth_map,
                           const CameraIntrinsics& cam, const HandModel& hm,
                           const GestureConfig& g, FingerId functional, const Mat3& r_wf) {
    if (affordance.h != depth_map.h || affordance.w != depth_map.w)
        raise(Errc::dimension_mismatch, "affordance and depth map dims differ");
    Pixel px = argmax_pixel(affordance);
    double z = median_depth(depth_map, px.u, px.v);
    if (!(z > 0.0)) raise(Errc::non_positive_depth, "depth at grasp pixel is not positive");

    Vec3 p_wf = back_project(px.u, px.v, z, cam);

    int f = static_cast<int>(functional);
    auto [t1, t2] = joint_angles_from_command(hm, functional, g.flexion[f]);
    Vec3 p_hf = fingertip_in_hand(hm.fingers[f], t1, t2, hm.limits);
    if (functional == FingerId::thumb) {
        if (g.abduction < hm.limits.abd_min - 1e-12 || g.abduction > hm.limits.abd_max + 1e-12)
            raise(Errc::joint_limit, "thumb abduction outside limits");
        p_hf = thumb_abduction(p_hf, g.abduction);
    }

    GraspPose pose;
    pose.p_wf = p_wf;
    pose.r_wf = r_wf;
    pose.p_we = wrist_from_fingertip(p_wf, r_wf, p_hf, hm.wrist_offset);
    pose.pixel = px;
    pose.depth = z;
    return pose;
}

ClosureResult force_feedback_closure(const GestureConfig& g, const ContactModel& contacts,
                                     double step, double eps, const JointLimits& limits,
                                     int max_iters) {
    if (!(step > 0.0)) raise(Errc::invalid_config, "closure step must be positive");
    Rng noise(contacts.noise_seed);

    ClosureResult res;
    std::array<double, 5> theta{};
    for (int f = 0; f < 5; ++f) theta[f] = g.flexion[f];

    auto sample = [&]() {
        ForceSample s;
        for (int f = 0; f < 5; ++f) {
            const FingerContact& c = contacts.fingers[f];
            double force = std::max(0.0, c.stiffness * (theta[f] - c.theta_contact));
            if (contacts.noise_amp > 0.0)
                force = std::max(0.0, force + contacts.noise_amp * (2.0 * noise.uniform() - 1.0));
            s.finger_force[f] = force;
            s.total += force;
        }
        return s;
    };

    res.trace.push_back(sample());

    for (int iter = 1; iter <= max_iters; ++iter) {
        for (int f = 0; f < 5; ++f) theta[f] = std::min(theta[f] + step, limits.flex_max);
        res.trace.push_back(sample());
        res.iterations = iter;

        if (res.trace.size() < 3) continue;
        const ForceSample& a = res.trace[res.trace.size() - 3];
        const ForceSample& b = res.trace[res.trace.size() - 2];
        const ForceSample& c = res.trace[res.trace.size() - 1];
        if (!(c.total > 0.0)) continue;
        bool settled = true;
        for (int f = 0; f < 5; ++f) {
            if (c.finger_force[f] <= 0.0) continue; // finger not in contact
            double second = c.finger_force[f] - 2.0 * b.finger_force[f] + a.finger_force[f];
            if (std::abs(second) >= eps) {
                settled = false;
                break;
            }
        }
        if (settled) {
            res.final_angles = theta;
            res.status = ClosureStatus::converged;
            return res;
        }
    }

    if (!(res.trace.back().total > 0.0))
        raise(Errc::no_contact, "iteration cap reached with zero contact force");
    res.final_angles = theta;
    res.status = ClosureStatus::best_effort;
    return res;
}

} // namespace graspkit
