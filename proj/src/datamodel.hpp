#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"

namespace gebc {

struct CaptionTriple {
    std::string subject;
    std::string before;
    std::string after;
};

enum class CaptionKind { Subject, Before, After };

const char* to_string(CaptionKind kind);
CaptionKind caption_kind_from_string(const std::string& s);  // throws ConfigError

// One annotated video: frame count, duration and the N boundary timestamps
// with one caption triple per boundary. Immutable after load.
struct VideoRecord {
    std::string video_id;
    int num_frames = 0;
    double duration = 0.0;
    std::vector<double> boundaries;      // seconds, strictly increasing, interior
    std::vector<CaptionTriple> captions;

    int num_boundaries() const { return static_cast<int>(boundaries.size()); }
    // Throws DataError naming the video and the violated rule.
    void validate() const;
};

struct ModelConfig {
    int hidden_dim = 512;          // d
    int encoder_layers = 2;
    int frame_decoder_layers = 2;  // event queries over encoded frames
    int region_decoder_layers = 1;
    int attention_heads = 8;
    int sampling_points = 4;       // K
    int target_length = 100;       // L
    int max_regions = 50;          // N_o
    int max_caption_len = 30;      // M
    std::vector<int> strides = {8, 16};
    int ffn_dim = 1024;
    int input_dim = 0;   // frame feature dim after concat; 0 = infer from data
    int region_dim = 0;  // d_r; 0 = infer from data
    int vocab_size = 0;  // set when the vocabulary is built
    uint64_t seed = 0;

    void validate() const;  // throws ConfigError
    bool operator==(const ModelConfig&) const = default;
};

struct SupervisionPair {
    std::string video_id;
    int boundary_index = 0;
    std::string target;
};

std::vector<VideoRecord> load_annotations(const std::string& path);
void save_annotations(const std::string& path, const std::vector<VideoRecord>& records);

std::vector<SupervisionPair> split_by_kind(const std::vector<VideoRecord>& records,
                                           CaptionKind kind);

const std::string& caption_field(const CaptionTriple& triple, CaptionKind kind);

}  // namespace gebc
