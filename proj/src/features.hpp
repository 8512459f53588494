#pragma once

#include <string>
#include <vector>

#include "datamodel.hpp"
#include "tensor.hpp"

namespace gebc {

// Fixed-length frame features for one video: per-extractor blocks resized to
// the shared temporal length and concatenated along the feature axis.
struct FrameFeatures {
    Tensor features;              // L x d_in
    std::vector<int> block_dims;  // provenance: width of each concatenated block
};

// Per-clip object features, padded to max_regions rows per clip and flattened
// clip-major. Rows with valid=false are exactly zero; valid rows are sorted
// by non-increasing confidence.
struct RegionFeatures {
    int num_clips = 0;
    int max_regions = 0;
    int dim = 0;
    Tensor features;                 // (num_clips * max_regions) x dim
    std::vector<double> confidence;  // num_clips * max_regions
    std::vector<uint8_t> valid;      // num_clips * max_regions
    std::vector<int> source_frame;   // num_clips
};

// Raw contents of one feature file before shaping.
struct FeatureFile {
    bool pre_strided = false;
    std::vector<Tensor> frame_blocks;          // per block: rows x d_b
    std::vector<Tensor> clip_regions;          // per clip: count_j x d_r (count_j may be 0)
    std::vector<std::vector<double>> clip_confidences;
};

std::vector<int> sample_frame_indices(int num_frames, int stride);
Tensor temporal_resize(const Tensor& block, int target_len);
Tensor concat_blocks(const std::vector<Tensor>& blocks);
std::vector<int> clip_center_frames(const std::vector<double>& boundaries, double duration,
                                    int num_frames);

// Keeps the max_regions highest-confidence detections (ties break toward the
// lower original index), zero-padding when there are fewer. Returns rows,
// confidences and the valid mask for one clip.
struct SelectedRegions {
    Tensor features;  // max_regions x d_r
    std::vector<double> confidence;
    std::vector<uint8_t> valid;
};
SelectedRegions select_regions(const Tensor& detections, const std::vector<double>& confidences,
                               int max_regions);

void save_feature_file(const std::string& path, const FeatureFile& file);
FeatureFile load_feature_file(const std::string& path);

// Everything the network needs for one video, in model-input shape.
struct VideoInputs {
    FrameFeatures frames;
    RegionFeatures regions;
    std::vector<double> boundaries;  // seconds
    double duration = 0.0;
    std::vector<double> clip_starts;  // num_clips = N + 1
    std::vector<double> clip_ends;
};

VideoInputs prepare_video_inputs(const VideoRecord& record, const FeatureFile& file,
                                 const ModelConfig& config);

}  // namespace gebc
