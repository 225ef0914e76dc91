#pragma once

#include <array>
#include <string>

#include "graspkit/linalg.hpp"

namespace graspkit {

enum class FingerId { thumb = 0, index = 1, middle = 2, ring = 3, pinky = 4 };

const char* finger_name(FingerId f);

enum class Handedness { left, right };

// 21-point hand skeleton: landmark 0 is the wrist; each finger occupies four
// consecutive slots ordered base to tip (thumb 1-4, index 5-8, middle 9-12,
// ring 13-16, pinky 17-20). x,y are normalized image coordinates, z is
// relative depth.
struct HandLandmarks {
    std::array<Vec3, 21> points{};
    Handedness handedness = Handedness::right;
};

constexpr int kNumLandmarks = 21;

constexpr int finger_base_index(FingerId f) { return 1 + 4 * static_cast<int>(f); }
constexpr int finger_tip_index(FingerId f) { return 4 + 4 * static_cast<int>(f); }

// Throws on non-finite coordinates.
void validate(const HandLandmarks& lm);

// { "handedness": "right", "points": [[x,y,z], x21] }
HandLandmarks parse_landmarks_json(const std::string& text);
HandLandmarks load_landmarks(const std::string& path);
std::string landmarks_to_json(const HandLandmarks& lm);

struct ParallelismConfig {
    double angle_threshold = 0.26; // rad, ~15 deg; must be in (0, pi/2)
};

// Full-finger chord tip - base for each of the five fingers.
std::array<Vec3, 5> finger_direction_vectors(const HandLandmarks& lm);

// True when the three adjacent pairs among index/middle/ring/pinky all span an
// angle below cfg.angle_threshold.
bool adjacent_parallelism(const HandLandmarks& lm, const ParallelismConfig& cfg);

// 1 - cos of the angle between the proximal (base->pip) and middle (pip->dip)
// phalanx vectors; 0 for a straight finger, up to 2 when folded back.
double finger_bending(const HandLandmarks& lm, FingerId f);

// Thumb when the four non-thumb fingers are parallel, otherwise the non-thumb
// finger with minimal bending (ties to the lowest id).
FingerId functional_finger(const HandLandmarks& lm, const ParallelismConfig& cfg = {});

Vec3 functional_fingertip(const HandLandmarks& lm, FingerId f);

} // namespace graspkit
