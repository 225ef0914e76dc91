#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "graspkit/error.hpp"
#include "graspkit/kinematics.hpp"
#include "oracles.hpp"

using namespace graspkit;

namespace {

constexpr double kPi = 3.14159265358979323846;

JointLimits wide_limits() {
    JointLimits lim;
    lim.flex_min = -10.0;
    lim.flex_max = 10.0;
    lim.abd_min = -10.0;
    lim.abd_max = 10.0;
    return lim;
}

Mat3 random_rotation(std::mt19937& g) {
    return oracle::axis_angle(oracle::vrand(g, -1.0, 1.0), oracle::urand(g, 0.05, 3.0));
}

} // namespace

TEST_CASE("z-rotation basics: identity, quarter turn, orthonormality") {
    Mat3 i = rot_z(0.0);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(i(r, c) == doctest::Approx(r == c ? 1.0 : 0.0).epsilon(1e-15));

    Vec3 e1 = rot_z(kPi / 2.0) * Vec3{1.0, 0.0, 0.0};
    CHECK(e1.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(e1.y == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e1.z == 0.0);

    std::mt19937 g(61);
    for (int t = 0; t < 50; ++t)
        CHECK(rotation_defect(rot_z(oracle::urand(g, -7, 7))) < 1e-12);
}

TEST_CASE("a straight finger reaches l1+l2 along x") {
    FingerModel fm;
    fm.l1 = 0.032;
    fm.l2 = 0.038;
    fm.delta = 0.0;
    Vec3 p = fingertip_in_hand(fm, 0.0, 0.0);
    CHECK(p.x == doctest::Approx(0.07).epsilon(1e-15));
    CHECK(p.y == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(p.z == 0.0);
}

TEST_CASE("rotating the whole chain ninety degrees moves the tip onto y") {
    FingerModel fm;
    fm.l1 = 0.03;
    fm.l2 = 0.04;
    fm.delta = 0.0;
    Vec3 p = fingertip_in_hand(fm, 0.0, kPi / 2.0);
    CHECK(p.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p.y == doctest::Approx(0.07).epsilon(1e-12));
}

TEST_CASE("fingertip agrees with planar trigonometry and stays within reach") {
    std::mt19937 g(62);
    JointLimits lim = wide_limits();
    for (int t = 0; t < 2000; ++t) {
        FingerModel fm;
        fm.l1 = oracle::urand(g, 0.01, 0.1);
        fm.l2 = oracle::urand(g, 0.01, 0.1);
        fm.delta = oracle::urand(g, -1.0, 1.0);
        double t1 = oracle::urand(g, -3.0, 3.0);
        double t2 = oracle::urand(g, -3.0, 3.0);

        Vec3 got = fingertip_in_hand(fm, t1, t2, lim);
        Vec3 want = oracle::fingertip(fm.l1, fm.l2, fm.delta, t1, t2);
        CHECK(std::abs(got.x - want.x) < 1e-12);
        CHECK(std::abs(got.y - want.y) < 1e-12);
        CHECK(got.z == 0.0);
        CHECK(oracle::norm(got) <= fm.l1 + fm.l2 + 1e-12);
    }
}

TEST_CASE("joint limits and link positivity are enforced") {
    FingerModel fm;
    CHECK_THROWS_AS(fingertip_in_hand(fm, 2.0, 0.0), Error); // default flex_max pi/2
    fm.l1 = -0.01;
    CHECK_THROWS_AS(fingertip_in_hand(fm, 0.0, 0.0), Error);
}

TEST_CASE("thumb abduction swings about y and preserves norms") {
    Vec3 p{1.0, 2.0, 0.0};
    Vec3 same = thumb_abduction(p, 0.0);
    CHECK(same.x == 1.0);
    CHECK(same.y == 2.0);
    CHECK(same.z == 0.0);

    Vec3 quarter = thumb_abduction(p, kPi / 2.0);
    CHECK(quarter.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(quarter.y == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(quarter.z == doctest::Approx(-1.0).epsilon(1e-12));

    std::mt19937 g(63);
    for (int t = 0; t < 100; ++t) {
        Vec3 v = oracle::vrand(g, -2.0, 2.0);
        double gamma = oracle::urand(g, -3.0, 3.0);
        CHECK(std::abs(oracle::norm(thumb_abduction(v, gamma)) - oracle::norm(v)) < 1e-12);
    }
}

TEST_CASE("back-projection inverts the pinhole model") {
    CameraIntrinsics cam; // identity, unit focals
    Vec3 axis = back_project(0.0, 0.0, 2.5, cam);
    CHECK(axis.x == doctest::Approx(0.0));
    CHECK(axis.y == doctest::Approx(0.0));
    CHECK(axis.z == doctest::Approx(2.5));

    cam.fx = 600.0;
    cam.fy = 500.0;
    cam.cx = 320.0;
    cam.cy = 240.0;
    Vec3 unit = back_project(cam.cx + cam.fx, cam.cy, 1.0, cam);
    CHECK(unit.x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(unit.y == doctest::Approx(0.0).epsilon(1e-12));

    std::mt19937 g(64);
    for (int t = 0; t < 200; ++t) {
        CameraIntrinsics c;
        c.fx = oracle::urand(g, 100, 900);
        c.fy = oracle::urand(g, 100, 900);
        c.cx = oracle::urand(g, 100, 500);
        c.cy = oracle::urand(g, 100, 500);
        c.rotation = random_rotation(g);
        c.translation = oracle::vrand(g, -1.0, 1.0);

        // forward-project a random world point, then back-project the pixel
        Vec3 world = oracle::vrand(g, -1.0, 1.0);
        world.z = oracle::urand(g, 1.0, 4.0); // anywhere, depth set below
        oracle::Projected px =
            oracle::project(c.fx, c.fy, c.cx, c.cy, c.rotation, c.translation, world);
        if (px.depth <= 0.05) continue; // behind or too close to the camera
        Vec3 back = back_project(px.u, px.v, px.depth, c);
        CHECK(oracle::norm(oracle::sub(back, world)) < 1e-9);
    }

    CHECK_THROWS_AS(back_project(0, 0, 0.0, cam), Error);
    CHECK_THROWS_AS(back_project(0, 0, -1.0, cam), Error);
}

TEST_CASE("command angles map affinely and invert exactly") {
    HandModel hm;
    auto [a1, a2] = joint_angles_from_command(hm, FingerId::index, 0.4);
    CHECK(a1 == doctest::Approx(0.4).epsilon(1e-15)); // identity default
    CHECK(a2 == doctest::Approx(0.4).epsilon(1e-15));

    hm.joint1_map[1] = {0.5, 0.1};
    hm.joint2_map[1] = {0.5, 0.1};
    auto [b1, b2] = joint_angles_from_command(hm, FingerId::index, 1.0);
    CHECK(b1 == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(b2 == doctest::Approx(0.6).epsilon(1e-15));

    std::mt19937 g(65);
    hm.limits = wide_limits();
    for (int t = 0; t < 100; ++t) {
        JointMap m1{oracle::urand(g, 0.2, 2.0), oracle::urand(g, -0.5, 0.5)};
        JointMap m2{oracle::urand(g, 0.2, 2.0), oracle::urand(g, -0.5, 0.5)};
        hm.joint1_map[2] = m1;
        hm.joint2_map[2] = m2;
        double cmd = oracle::urand(g, -1.0, 1.0);
        auto [t1, t2] = joint_angles_from_command(hm, FingerId::middle, cmd);
        CHECK(std::abs((t1 - m1.b) / m1.a - cmd) < 1e-12);
        CHECK(std::abs((t2 - m2.b) / m2.a - cmd) < 1e-12);
    }

    hm.joint1_map[3] = {0.0, 0.0};
    CHECK_THROWS_AS(joint_angles_from_command(hm, FingerId::ring, 0.1), Error);

    HandModel strict; // default limits [0, pi/2]
    CHECK_THROWS_AS(joint_angles_from_command(strict, FingerId::index, 2.0), Error);
}

TEST_CASE("wrist solve reproduces its closed forms and round-trips") {
    Vec3 p_wf{1.0, 1.0, 1.0};
    Vec3 same = wrist_from_fingertip(p_wf, Mat3::identity(), {0.2, 0.3, 0.4}, {0.2, 0.3, 0.4});
    CHECK(same.x == doctest::Approx(1.0));
    CHECK(same.y == doctest::Approx(1.0));
    CHECK(same.z == doctest::Approx(1.0));

    Vec3 shifted = wrist_from_fingertip(p_wf, Mat3::identity(), {0, 0, 0}, {0, 0, 0.1});
    CHECK(shifted.z == doctest::Approx(1.1).epsilon(1e-15));

    std::mt19937 g(66);
    for (int t = 0; t < 200; ++t) {
        Mat3 r = random_rotation(g);
        Vec3 wf = oracle::vrand(g, -1, 1);
        Vec3 hf = oracle::vrand(g, -0.2, 0.2);
        Vec3 he = oracle::vrand(g, -0.2, 0.2);
        Vec3 we = wrist_from_fingertip(wf, r, hf, he);
        // invert: p_wf = p_we + R (p_hf - p_he)
        Vec3 back = we + r * oracle::sub(hf, he);
        CHECK(oracle::norm(oracle::sub(back, wf)) < 1e-10);
    }

    Mat3 bad;
    bad(0, 0) = 2.0;
    CHECK_THROWS_AS(wrist_from_fingertip(p_wf, bad, {0, 0, 0}, {0, 0, 0}), Error);
}

namespace {

// Planted-button scene: one bright pixel, constant metric depth, identity
// extrinsics unless the caller substitutes its own camera.
struct ButtonScene {
    DenseMap affordance{32, 32, 0.0};
    DenseMap depth{32, 32, 0.8};
    CameraIntrinsics cam;
    int u = 19, v = 11;

    ButtonScene() {
        cam.fx = 40.0;
        cam.fy = 40.0;
        cam.cx = 16.0;
        cam.cy = 16.0;
        affordance.at(v, u) = 1.0;
    }

    Vec3 planted_world() const {
        // oracle back-projection with identity extrinsics
        Vec3 p;
        p.x = (u - cam.cx) * 0.8 / cam.fx;
        p.y = (v - cam.cy) * 0.8 / cam.fy;
        p.z = 0.8;
        return p;
    }
};

} // namespace

TEST_CASE("grasp pose lands on the planted button") {
    ButtonScene scene;
    HandModel hm;
    GestureConfig g;
    g.flexion = {0.3, 0.3, 0.3, 0.3, 0.3};

    GraspPose pose = solve_grasp_pose(scene.affordance, scene.depth, scene.cam, hm, g,
                                      FingerId::index);
    CHECK(pose.pixel.u == scene.u);
    CHECK(pose.pixel.v == scene.v);
    CHECK(pose.depth == doctest::Approx(0.8));
    CHECK(oracle::norm(oracle::sub(pose.p_wf, scene.planted_world())) < 1e-9);
}

TEST_CASE("an all-zero map falls back to pixel (0,0)") {
    DenseMap flat(8, 8, 0.0);
    DenseMap depth(8, 8, 1.0);
    CameraIntrinsics cam;
    HandModel hm;
    GestureConfig g;
    GraspPose pose = solve_grasp_pose(flat, depth, cam, hm, g, FingerId::index);
    CHECK(pose.pixel.u == 0);
    CHECK(pose.pixel.v == 0);
}

TEST_CASE("straight fingers with a zero wrist offset satisfy the wrist equation") {
    ButtonScene scene;
    HandModel hm;
    for (auto& f : hm.fingers) f.delta = 0.0;
    hm.wrist_offset = {0.0, 0.0, 0.0};
    GestureConfig g; // all flexion zero
    Mat3 r = oracle::axis_angle({0.3, 1.0, -0.2}, 0.7);

    GraspPose pose = solve_grasp_pose(scene.affordance, scene.depth, scene.cam, hm, g,
                                      FingerId::index, r);
    double reach = hm.fingers[1].l1 + hm.fingers[1].l2;
    Vec3 want = oracle::sub(pose.p_wf, r * Vec3{reach, 0.0, 0.0});
    CHECK(oracle::norm(oracle::sub(pose.p_we, want)) < 1e-12);
}

TEST_CASE("the grasp pose is equivariant under rigid world transforms") {
    std::mt19937 g(67);
    ButtonScene scene;
    HandModel hm;
    GestureConfig gest;
    gest.flexion = {0.2, 0.2, 0.2, 0.2, 0.2};

    for (int t = 0; t < 20; ++t) {
        Mat3 r_wf = random_rotation(g);
        GraspPose base = solve_grasp_pose(scene.affordance, scene.depth, scene.cam, hm, gest,
                                          FingerId::middle, r_wf);

        Mat3 q = random_rotation(g);
        Vec3 shift = oracle::vrand(g, -1, 1);
        CameraIntrinsics moved = scene.cam;
        moved.rotation = q * scene.cam.rotation;
        moved.translation = q * scene.cam.translation + shift;
        GraspPose got = solve_grasp_pose(scene.affordance, scene.depth, moved, hm, gest,
                                         FingerId::middle, q * r_wf);

        Vec3 want_we = q * base.p_we + shift;
        Vec3 want_wf = q * base.p_wf + shift;
        CHECK(oracle::norm(oracle::sub(got.p_we, want_we)) < 1e-9);
        CHECK(oracle::norm(oracle::sub(got.p_wf, want_wf)) < 1e-9);
    }
}

TEST_CASE("non-positive depth at the chosen pixel is an error") {
    DenseMap map(4, 4, 0.0);
    map.at(2, 2) = 1.0;
    DenseMap depth(4, 4, 0.0);
    CameraIntrinsics cam;
    HandModel hm;
    GestureConfig g;
    try {
        solve_grasp_pose(map, depth, cam, hm, g, FingerId::index);
        FAIL("expected NonPositiveDepth");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::non_positive_depth);
    }
}

TEST_CASE("force closure stops once the force turns linear") {
    GestureConfig g; // start at zero flexion
    ContactModel cm;
    cm.fingers[1] = {0.2, 5.0}; // index touches at 0.2 rad, k = 5

    ClosureResult r = force_feedback_closure(g, cm, 0.05, 1e-9);
    CHECK(r.status == ClosureStatus::converged);
    CHECK(r.final_angles[1] >= 0.3); // needs two equal increments past contact

    // oracle: the trace must follow f = max(0, k (theta - theta_c)) exactly
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
        double theta = 0.05 * static_cast<double>(i);
        double want = std::max(0.0, 5.0 * (theta - 0.2));
        CHECK(r.trace[i].finger_force[1] == doctest::Approx(want).epsilon(1e-12));
        CHECK(r.trace[i].total == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("a zero-stiffness world never makes contact") {
    GestureConfig g;
    ContactModel cm; // all stiffness zero
    try {
        force_feedback_closure(g, cm, 0.05, 1e-9, {}, 50);
        FAIL("expected NoContact");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::no_contact);
    }
}

TEST_CASE("immediate contact settles within three increments") {
    GestureConfig g;
    ContactModel cm;
    for (auto& f : cm.fingers) f = {0.0, 4.0}; // touching from the start

    ClosureResult r = force_feedback_closure(g, cm, 0.02, 1e-9);
    CHECK(r.status == ClosureStatus::converged);
    CHECK(r.iterations <= 3);
}

TEST_CASE("closure traces are non-decreasing and angles never retreat") {
    std::mt19937 rng(68);
    for (double k : {1.0, 5.0, 20.0}) {
        GestureConfig g;
        g.flexion = {0.1, 0.05, 0.0, 0.2, 0.15};
        ContactModel cm;
        for (int f = 0; f < 5; ++f)
            cm.fingers[f] = {oracle::urand(rng, 0.1, 0.4), k};

        ClosureResult r = force_feedback_closure(g, cm, 0.02, 1e-9);
        CHECK(r.status == ClosureStatus::converged);
        for (int f = 0; f < 5; ++f) CHECK(r.final_angles[f] >= g.flexion[f]);
        for (std::size_t i = 1; i < r.trace.size(); ++i)
            CHECK(r.trace[i].total >= r.trace[i - 1].total - 1e-12);
    }

    GestureConfig g;
    ContactModel cm;
    CHECK_THROWS_AS(force_feedback_closure(g, cm, 0.0, 1e-9), Error);
}
