#pragma once

#include <string>
#include <vector>

#include "datamodel.hpp"
#include "features.hpp"

namespace gebc {

struct LoadedVideo {
    VideoRecord record;
    VideoInputs inputs;
};

struct Dataset {
    std::vector<LoadedVideo> videos;

    std::vector<VideoRecord> records() const;
    int input_dim() const;   // frame feature dim after block concat
    int region_dim() const;  // d_r
};

// Loads <dir>/annotations.json plus <dir>/features/<video_id>.gebf for each
// video and shapes them into model inputs. Feature preparation runs in
// parallel workers.
Dataset load_dataset(const std::string& dir, const ModelConfig& config);

}  // namespace gebc
