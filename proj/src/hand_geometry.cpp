#include "graspkit/hand_geometry.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "graspkit/error.hpp"

namespace graspkit {

const char* finger_name(FingerId f) {
    switch (f) {
        case FingerId::thumb: return "thumb";
        case FingerId::index: return "index";
        case FingerId::middle: return "middle";
        case FingerId::ring: return "ring";
        case FingerId::pinky: return "pinky";
    }
    return "?";
}

void validate(const HandLandmarks& lm) {
    for (int i = 0; i < kNumLandmarks; ++i) {
        if (!finite(lm.points[i]))
            raise(Errc::parse_error, "landmark " + std::to_string(i) + " is not finite");
    }
}

HandLandmarks parse_landmarks_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        raise(Errc::parse_error, std::string("landmarks JSON: ") + e.what());
    }
    HandLandmarks lm;
    if (!j.contains("points") || !j["points"].is_array() || j["points"].size() != kNumLandmarks)
        raise(Errc::parse_error, "landmarks JSON must carry exactly 21 points");
    const std::string hand = j.value("handedness", "right");
    if (hand == "left") lm.handedness = Handedness::left;
    else if (hand == "right") lm.handedness = Handedness::right;
    else raise(Errc::parse_error, "handedness must be \"left\" or \"right\"");
    for (int i = 0; i < kNumLandmarks; ++i) {
        const auto& p = j["points"][i];
        if (!p.is_array() || p.size() != 3)
            raise(Errc::parse_error, "point " + std::to_string(i) + " must be [x,y,z]");
        lm.points[i] = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
    }
    validate(lm);
    return lm;
}

HandLandmarks load_landmarks(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::io_error, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_landmarks_json(ss.str());
}

std::string landmarks_to_json(const HandLandmarks& lm) {
    nlohmann::json j;
    j["handedness"] = lm.handedness == Handedness::left ? "left" : "right";
    auto pts = nlohmann::json::array();
    for (const auto& p : lm.points) pts.push_back({p.x, p.y, p.z});
    j["points"] = pts;
    return j.dump(2);
}

static void check_threshold(const ParallelismConfig& cfg) {
    constexpr double half_pi = 1.5707963267948966;
    if (!(cfg.angle_threshold > 0.0 && cfg.angle_threshold < half_pi))
        raise(Errc::invalid_config, "parallelism threshold must lie in (0, pi/2)");
}

static Vec3 direction_vector(const HandLandmarks& lm, FingerId f) {
    Vec3 v = lm.points[finger_tip_index(f)] - lm.points[finger_base_index(f)];
    if (norm(v) == 0.0)
        raise(Errc::degenerate_finger, std::string(finger_name(f)) + " tip coincides with its base");
    return v;
}

std::array<Vec3, 5> finger_direction_vectors(const HandLandmarks& lm) {
    std::array<Vec3, 5> out;
    for (int f = 0; f < 5; ++f) out[f] = direction_vector(lm, static_cast<FingerId>(f));
    return out;
}

bool adjacent_parallelism(const HandLandmarks& lm, const ParallelismConfig& cfg) {
    check_threshold(cfg);
    // The thumb is excluded, so only the four non-thumb chords are formed and a
    // degenerate thumb cannot trip this path.
    std::array<Vec3, 4> v;
    for (int i = 0; i < 4; ++i) v[i] = direction_vector(lm, static_cast<FingerId>(i + 1));
    const double min_cos = std::cos(cfg.angle_threshold);
    for (int i = 0; i < 3; ++i) {
        double c = dot(v[i], v[i + 1]) / (norm(v[i]) * norm(v[i + 1]));
        if (!(c > min_cos)) return false;
    }
    return true;
}

double finger_bending(const HandLandmarks& lm, FingerId f) {
    const int b = finger_base_index(f);
    Vec3 u1 = lm.points[b + 1] - lm.points[b];
    Vec3 u2 = lm.points[b + 2] - lm.points[b + 1];
    double n1 = norm(u1), n2 = norm(u2);
    if (n1 == 0.0 || n2 == 0.0)
        raise(Errc::degenerate_phalanx, std::string(finger_name(f)) + " has a zero-length phalanx");
    return 1.0 - dot(u1, u2) / (n1 * n2);
}

FingerId functional_finger(const HandLandmarks& lm, const ParallelismConfig& cfg) {
    if (adjacent_parallelism(lm, cfg)) return FingerId::thumb;
    FingerId best = FingerId::index;
    double best_score = finger_bending(lm, FingerId::index);
    for (int f = 2; f <= 4; ++f) {
        double s = finger_bending(lm, static_cast<FingerId>(f));
        if (s < best_score) {
            best_score = s;
            best = static_cast<FingerId>(f);
        }
    }
    return best;
}

Vec3 functional_fingertip(const HandLandmarks& lm, FingerId f) {
    return lm.points[finger_tip_index(f)];
}

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::degenerate_finger: return "DegenerateFinger";
        case Errc::degenerate_phalanx: return "DegeneratePhalanx";
        case Errc::dimension_mismatch: return "DimensionMismatch";
        case Errc::zero_mass: return "ZeroMass";
        case Errc::empty_input: return "EmptyInput";
        case Errc::zero_prototype: return "ZeroPrototype";
        case Errc::all_empty: return "AllEmpty";
        case Errc::zero_embedding: return "ZeroEmbedding";
        case Errc::label_out_of_range: return "LabelOutOfRange";
        case Errc::data_inconsistency: return "DataInconsistency";
        case Errc::joint_limit: return "JointLimit";
        case Errc::non_positive_depth: return "NonPositiveDepth";
        case Errc::invalid_rotation: return "InvalidRotation";
        case Errc::no_contact: return "NoContact";
        case Errc::empty_fixations: return "EmptyFixations";
        case Errc::missing_pair: return "MissingPair";
        case Errc::parse_error: return "ParseError";
        case Errc::vocabulary_error: return "VocabularyError";
        case Errc::unknown_pair: return "UnknownPair";
        case Errc::degenerate_polygon: return "DegeneratePolygon";
        case Errc::bad_magic: return "BadMagic";
        case Errc::truncated_file: return "TruncatedFile";
        case Errc::dim_limit: return "DimLimit";
        case Errc::unknown_task: return "UnknownTask";
        case Errc::invalid_config: return "InvalidConfig";
        case Errc::io_error: return "IoError";
    }
    return "Error";
}

int errc_exit_code(Errc c) {
    switch (c) {
        case Errc::invalid_config:
            return 1;
        case Errc::dimension_mismatch:
        case Errc::label_out_of_range:
        case Errc::data_inconsistency:
        case Errc::missing_pair:
        case Errc::parse_error:
        case Errc::vocabulary_error:
        case Errc::unknown_pair:
        case Errc::bad_magic:
        case Errc::truncated_file:
        case Errc::dim_limit:
        case Errc::unknown_task:
        case Errc::empty_input:
        case Errc::io_error:
            return 2;
        default:
            return 3; // numeric / degenerate-data / convergence
    }
}

} // namespace graspkit
