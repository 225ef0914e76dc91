#pragma once

#include <stdexcept>
#include <string>

namespace graspkit {

// Every failure the library reports, keyed so callers (and the CLI exit-code
// mapping) can branch without string matching.
enum class Errc {
    // geometry
    degenerate_finger,
    degenerate_phalanx,
    // tensors / embeddings
    dimension_mismatch,
    zero_mass,
    empty_input,
    zero_prototype,
    all_empty,
    zero_embedding,
    // heads / training
    label_out_of_range,
    data_inconsistency,
    // kinematics
    joint_limit,
    non_positive_depth,
    invalid_rotation,
    no_contact,
    // metrics
    empty_fixations,
    missing_pair,
    // dataset / files
    parse_error,
    vocabulary_error,
    unknown_pair,
    degenerate_polygon,
    bad_magic,
    truncated_file,
    dim_limit,
    // cli
    unknown_task,
    invalid_config,
    io_error,
};

const char* errc_name(Errc c);

// CLI contract: 0 success, 1 usage, 2 data error, 3 numeric/convergence error.
int errc_exit_code(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const { return code_; }
    int exit_code() const { return errc_exit_code(code_); }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& msg) { throw Error(code, msg); }

} // namespace graspkit
