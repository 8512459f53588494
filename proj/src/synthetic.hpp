#pragma once

#include <string>
#include <vector>

#include "datamodel.hpp"
#include "tensor.hpp"

namespace gebc {

// Deterministic prototype-plus-noise dataset: one subject per video, one
// action per clip, captions templated from them, features carrying the
// matching class prototypes.
struct SyntheticSpec {
    uint64_t seed = 0;
    int num_videos = 20;
    int min_boundaries = 2;
    int max_boundaries = 4;
    int num_subjects = 8;
    int num_actions = 6;
    std::vector<int> frame_dims = {12, 12};  // one entry per frame block
    int region_dim = 16;
    int regions_per_clip = 6;
    double noise = 0.05;
    double fps = 8.0;
    int min_frames = 64;
    int max_frames = 128;

    void validate() const;  // throws ConfigError
};

// Ground-truth generative structure, returned for oracle checks.
struct SyntheticTruth {
    std::vector<std::string> subjects;  // phrases
    std::vector<std::string> actions;   // single words
    std::vector<int> video_subject;     // per video
    std::vector<std::vector<int>> clip_actions;       // per video, per clip
    // frame prototype for (block, subject, action), region prototype per subject
    std::vector<std::vector<Tensor>> frame_prototypes;  // [block][subject*num_actions+action]
    std::vector<Tensor> region_prototypes;              // [subject]
};

// Writes annotations.json and features/<video_id>.gebf under out_dir and
// returns the generative assignments. Output is byte-identical for a fixed
// spec.
SyntheticTruth generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir);

}  // namespace gebc
