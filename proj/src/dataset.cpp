#include "dataset.hpp"

#include <filesystem>

#include "common.hpp"

namespace gebc {

std::vector<VideoRecord> Dataset::records() const {
    std::vector<VideoRecord> out;
    out.reserve(videos.size());
    for (const LoadedVideo& v : videos) out.push_back(v.record);
    return out;
}

int Dataset::input_dim() const {
    if (videos.empty()) throw DataError("dataset is empty");
    return videos.front().inputs.frames.features.cols;
}

int Dataset::region_dim() const {
    if (videos.empty()) throw DataError("dataset is empty");
    return videos.front().inputs.regions.dim;
}

Dataset load_dataset(const std::string& dir, const ModelConfig& config) {
    namespace fs = std::filesystem;
    const std::string ann_path = (fs::path(dir) / "annotations.json").string();
    std::vector<VideoRecord> records = load_annotations(ann_path);
    if (records.empty()) throw DataError("dataset '" + dir + "' has no videos");

    Dataset dataset;
    dataset.videos.resize(records.size());
    parallel_for(static_cast<int>(records.size()), [&](int i) {
        const VideoRecord& rec = records[static_cast<size_t>(i)];
        const std::string feat_path =
            (fs::path(dir) / "features" / (rec.video_id + ".gebf")).string();
        FeatureFile file = load_feature_file(feat_path);
        LoadedVideo& out = dataset.videos[static_cast<size_t>(i)];
        out.record = rec;
        out.inputs = prepare_video_inputs(rec, file, config);
    });

    const int d_in = dataset.input_dim();
    const int d_r = dataset.region_dim();
    for (const LoadedVideo& v : dataset.videos) {
        if (v.inputs.frames.features.cols != d_in)
            throw DataError("video '" + v.record.video_id + "': frame feature dim " +
                            std::to_string(v.inputs.frames.features.cols) +
                            " differs from dataset dim " + std::to_string(d_in));
        if (v.inputs.regions.dim != d_r)
            throw DataError("video '" + v.record.video_id + "': region feature dim " +
                            std::to_string(v.inputs.regions.dim) +
                            " differs from dataset dim " + std::to_string(d_r));
    }
    return dataset;
}

}  // namespace gebc
