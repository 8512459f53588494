#include "features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "io_util.hpp"

namespace gebc {

std::vector<int> sample_frame_indices(int num_frames, int stride) {
    if (num_frames <= 0) throw DataError("sample_frame_indices: num_frames must be positive");
    if (stride <= 0) throw ConfigError("sample_frame_indices: stride must be positive");
    std::vector<int> indices;
    for (int i = 0; i < num_frames; i += stride) indices.push_back(i);
    return indices;
}

Tensor temporal_resize(const Tensor& block, int target_len) {
    if (block.rows < 1 || block.cols < 1) throw DataError("temporal_resize: empty input block");
    if (target_len < 1) throw ConfigError("temporal_resize: target length must be positive");
    const int S = block.rows;
    Tensor out(target_len, block.cols);
    for (int j = 0; j < target_len; ++j) {
        // Endpoint-aligned linear interpolation along the temporal axis.
        double pos = (target_len == 1 || S == 1)
                         ? 0.0
                         : static_cast<double>(j) * (S - 1) / (target_len - 1);
        int i0 = static_cast<int>(std::floor(pos));
        if (i0 > S - 1) i0 = S - 1;
        int i1 = std::min(i0 + 1, S - 1);
        double f = pos - i0;
        const double* r0 = block.row(i0);
        const double* r1 = block.row(i1);
        double* dst = out.row(j);
        if (f == 0.0) {
            for (int c = 0; c < block.cols; ++c) dst[c] = r0[c];
        } else {
            for (int c = 0; c < block.cols; ++c) dst[c] = (1.0 - f) * r0[c] + f * r1[c];
        }
    }
    return out;
}

Tensor concat_blocks(const std::vector<Tensor>& blocks) {
    if (blocks.empty()) throw DataError("concat_blocks: no blocks");
    const int L = blocks[0].rows;
    int total = 0;
    for (const Tensor& b : blocks) {
        if (b.rows != L)
            throw DataError("concat_blocks: temporal length mismatch (" + std::to_string(b.rows) +
                            " vs " + std::to_string(L) + ")");
        total += b.cols;
    }
    Tensor out(L, total);
    int off = 0;
    for (const Tensor& b : blocks) {
        for (int r = 0; r < L; ++r) {
            const double* src = b.row(r);
            double* dst = out.row(r) + off;
            for (int c = 0; c < b.cols; ++c) dst[c] = src[c];
        }
        off += b.cols;
    }
    return out;
}

std::vector<int> clip_center_frames(const std::vector<double>& boundaries, double duration,
                                    int num_frames) {
    std::vector<double> edges;
    edges.push_back(0.0);
    edges.insert(edges.end(), boundaries.begin(), boundaries.end());
    edges.push_back(duration);
    std::vector<int> centers;
    centers.reserve(edges.size() - 1);
    for (size_t j = 0; j + 1 < edges.size(); ++j) {
        double center = 0.5 * (edges[j] + edges[j + 1]);
        long idx = std::lround(center / duration * (num_frames - 1));
        idx = std::clamp(idx, 0l, static_cast<long>(num_frames - 1));
        centers.push_back(static_cast<int>(idx));
    }
    return centers;
}

SelectedRegions select_regions(const Tensor& detections, const std::vector<double>& confidences,
                               int max_regions) {
    if (detections.rows != static_cast<int>(confidences.size()))
        throw DataError("select_regions: detection/confidence count mismatch");
    for (double c : confidences)
        if (!(c >= 0.0 && c <= 1.0))
            throw DataError("select_regions: confidence outside [0, 1]");
    const int count = detections.rows;
    const int d_r = detections.cols;

    std::vector<int> order(count);
    std::iota(order.begin(), order.end(), 0);
    // stable sort keeps lower original index first among equal confidences
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return confidences[a] > confidences[b]; });
    if (count > max_regions) order.resize(max_regions);

    SelectedRegions out;
    out.features = Tensor(max_regions, d_r);
    out.confidence.assign(max_regions, 0.0);
    out.valid.assign(max_regions, 0);
    for (size_t r = 0; r < order.size(); ++r) {
        const double* src = detections.row(order[r]);
        double* dst = out.features.row(static_cast<int>(r));
        for (int c = 0; c < d_r; ++c) dst[c] = src[c];
        out.confidence[r] = confidences[order[r]];
        out.valid[r] = 1;
    }
    return out;
}

namespace {
constexpr uint32_t kPreStridedFlag = 1u;
}

void save_feature_file(const std::string& path, const FeatureFile& file) {
    ArrayFile out;
    out.flags = file.pre_strided ? kPreStridedFlag : 0u;
    for (size_t k = 0; k < file.frame_blocks.size(); ++k)
        out.arrays.push_back({"frame_block_" + std::to_string(k), file.frame_blocks[k], true});
    for (size_t j = 0; j < file.clip_regions.size(); ++j) {
        out.arrays.push_back({"regions_" + std::to_string(j), file.clip_regions[j], true});
        Tensor conf(1, static_cast<int>(file.clip_confidences[j].size()));
        for (size_t i = 0; i < file.clip_confidences[j].size(); ++i)
            conf.data[i] = file.clip_confidences[j][i];
        out.arrays.push_back({"region_conf_" + std::to_string(j), std::move(conf), true});
    }
    write_array_file(path, out);
}

FeatureFile load_feature_file(const std::string& path) {
    ArrayFile raw = read_array_file(path);
    FeatureFile file;
    file.pre_strided = (raw.flags & kPreStridedFlag) != 0;
    for (size_t k = 0;; ++k) {
        const NamedArray* a = raw.find("frame_block_" + std::to_string(k));
        if (!a) break;
        if (!a->data.all_finite())
            throw DataError("feature file '" + path + "': frame_block_" + std::to_string(k) +
                            " contains non-finite values");
        file.frame_blocks.push_back(a->data);
    }
    if (file.frame_blocks.empty())
        throw DataError("feature file '" + path + "' carries no frame blocks");
    for (size_t j = 0;; ++j) {
        const NamedArray* regions = raw.find("regions_" + std::to_string(j));
        if (!regions) break;
        const NamedArray& conf = raw.require("region_conf_" + std::to_string(j), path);
        if (conf.data.size() != static_cast<size_t>(regions->data.rows))
            throw DataError("feature file '" + path + "': region_conf_" + std::to_string(j) +
                            " length does not match regions_" + std::to_string(j));
        if (!regions->data.all_finite())
            throw DataError("feature file '" + path + "': regions_" + std::to_string(j) +
                            " contains non-finite values");
        file.clip_regions.push_back(regions->data);
        file.clip_confidences.emplace_back(conf.data.data.begin(), conf.data.data.end());
    }
    if (file.clip_regions.empty())
        throw DataError("feature file '" + path + "' carries no region clips");
    return file;
}

VideoInputs prepare_video_inputs(const VideoRecord& record, const FeatureFile& file,
                                 const ModelConfig& config) {
    record.validate();
    if (file.frame_blocks.size() > config.strides.size())
        throw ConfigError("video '" + record.video_id + "': feature file has " +
                          std::to_string(file.frame_blocks.size()) +
                          " frame blocks but config declares only " +
                          std::to_string(config.strides.size()) + " strides");

    VideoInputs out;
    std::vector<Tensor> resized;
    for (size_t k = 0; k < file.frame_blocks.size(); ++k) {
        const Tensor& block = file.frame_blocks[k];
        Tensor strided;
        if (file.pre_strided) {
            strided = block;
        } else {
            if (block.rows != record.num_frames)
                throw DataError("video '" + record.video_id + "': frame_block_" +
                                std::to_string(k) + " has " + std::to_string(block.rows) +
                                " rows but the video has " + std::to_string(record.num_frames) +
                                " frames");
            std::vector<int> idx = sample_frame_indices(record.num_frames, config.strides[k]);
            strided = Tensor(static_cast<int>(idx.size()), block.cols);
            for (size_t r = 0; r < idx.size(); ++r) {
                const double* src = block.row(idx[r]);
                double* dst = strided.row(static_cast<int>(r));
                for (int c = 0; c < block.cols; ++c) dst[c] = src[c];
            }
        }
        resized.push_back(temporal_resize(strided, config.target_length));
        out.frames.block_dims.push_back(block.cols);
    }
    out.frames.features = concat_blocks(resized);

    const int num_clips = record.num_boundaries() + 1;
    if (static_cast<int>(file.clip_regions.size()) != num_clips)
        throw DataError("video '" + record.video_id + "': feature file has " +
                        std::to_string(file.clip_regions.size()) + " region clips, expected " +
                        std::to_string(num_clips));
    int d_r = file.clip_regions[0].cols;
    for (const Tensor& t : file.clip_regions)
        if (t.rows > 0 && t.cols != d_r)
            throw DataError("video '" + record.video_id + "': inconsistent region dims");

    RegionFeatures& regions = out.regions;
    regions.num_clips = num_clips;
    regions.max_regions = config.max_regions;
    regions.dim = d_r;
    regions.features = Tensor(num_clips * config.max_regions, d_r);
    regions.confidence.assign(static_cast<size_t>(num_clips) * config.max_regions, 0.0);
    regions.valid.assign(static_cast<size_t>(num_clips) * config.max_regions, 0);
    for (int j = 0; j < num_clips; ++j) {
        SelectedRegions sel =
            select_regions(file.clip_regions[j], file.clip_confidences[j], config.max_regions);
        for (int r = 0; r < config.max_regions; ++r) {
            const double* src = sel.features.row(r);
            double* dst = regions.features.row(j * config.max_regions + r);
            for (int c = 0; c < d_r; ++c) dst[c] = src[c];
            regions.confidence[j * config.max_regions + r] = sel.confidence[r];
            regions.valid[j * config.max_regions + r] = sel.valid[r];
        }
    }
    regions.source_frame = clip_center_frames(record.boundaries, record.duration,
                                              record.num_frames);

    out.boundaries = record.boundaries;
    out.duration = record.duration;
    out.clip_starts.push_back(0.0);
    for (double t : record.boundaries) {
        out.clip_ends.push_back(t);
        out.clip_starts.push_back(t);
    }
    out.clip_ends.push_back(record.duration);
    return out;
}

}  // namespace gebc
