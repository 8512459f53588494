#include "datamodel.hpp"

#include <algorithm>
#include <fstream>

#include "io_util.hpp"
#include "json.hpp"

namespace gebc {

using nlohmann::json;

const char* to_string(CaptionKind kind) {
    switch (kind) {
        case CaptionKind::Subject: return "subject";
        case CaptionKind::Before: return "before";
        case CaptionKind::After: return "after";
    }
    return "subject";
}

CaptionKind caption_kind_from_string(const std::string& s) {
    if (s == "subject") return CaptionKind::Subject;
    if (s == "before") return CaptionKind::Before;
    if (s == "after") return CaptionKind::After;
    throw ConfigError("unknown caption kind '" + s + "' (expected subject|before|after)");
}

void VideoRecord::validate() const {
    auto fail = [this](const std::string& rule) {
        throw DataError("video '" + video_id + "': " + rule);
    };
    if (video_id.empty()) throw DataError("video with empty video_id");
    if (num_frames <= 0) fail("num_frames must be positive");
    if (!(duration > 0.0)) fail("duration must be positive");
    if (boundaries.empty()) fail("at least one boundary required");
    if (captions.size() != boundaries.size())
        fail("captions length " + std::to_string(captions.size()) +
             " != boundaries length " + std::to_string(boundaries.size()));
    double prev = 0.0;
    for (size_t i = 0; i < boundaries.size(); ++i) {
        double t = boundaries[i];
        if (!(t > 0.0) || !(t < duration))
            fail("boundary " + std::to_string(i) + " (" + std::to_string(t) +
                 ") must lie strictly inside (0, duration)");
        if (!(t > prev))
            fail("boundaries must be strictly increasing (index " + std::to_string(i) + ")");
        prev = t;
    }
}

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v <= 0) throw ConfigError(std::string("model config: ") + name + " must be positive");
    };
    positive(hidden_dim, "hidden_dim");
    positive(encoder_layers, "encoder_layers");
    positive(frame_decoder_layers, "frame_decoder_layers");
    positive(region_decoder_layers, "region_decoder_layers");
    positive(attention_heads, "attention_heads");
    positive(sampling_points, "sampling_points");
    positive(target_length, "target_length");
    positive(max_regions, "max_regions");
    positive(max_caption_len, "max_caption_len");
    positive(ffn_dim, "ffn_dim");
    if (strides.empty()) throw ConfigError("model config: strides must be non-empty");
    for (int s : strides) positive(s, "stride");
    if (hidden_dim % attention_heads != 0)
        throw ConfigError("model config: hidden_dim must be divisible by attention_heads");
}

namespace {

VideoRecord record_from_json(const json& v, size_t index) {
    auto context = [index](const char* field) {
        return "annotation entry " + std::to_string(index) + ": " + field;
    };
    VideoRecord rec;
    try {
        rec.video_id = v.at("video_id").get<std::string>();
        rec.num_frames = v.at("num_frames").get<int>();
        rec.duration = v.at("duration").get<double>();
        rec.boundaries = v.at("boundaries").get<std::vector<double>>();
        for (const auto& c : v.at("captions")) {
            CaptionTriple t;
            t.subject = c.at("subject").get<std::string>();
            t.before = c.at("before").get<std::string>();
            t.after = c.at("after").get<std::string>();
            rec.captions.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw DataError(context(e.what()));
    }
    rec.validate();
    return rec;
}

}  // namespace

std::vector<VideoRecord> load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open annotation file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("annotation file '" + path + "': " + e.what());
    }
    if (!doc.is_array()) throw DataError("annotation file '" + path + "': expected a JSON array");
    std::vector<VideoRecord> records;
    records.reserve(doc.size());
    for (size_t i = 0; i < doc.size(); ++i) records.push_back(record_from_json(doc[i], i));
    std::sort(records.begin(), records.end(),
              [](const VideoRecord& a, const VideoRecord& b) { return a.video_id < b.video_id; });
    for (size_t i = 1; i < records.size(); ++i)
        if (records[i].video_id == records[i - 1].video_id)
            throw DataError("duplicate video_id '" + records[i].video_id + "'");
    return records;
}

void save_annotations(const std::string& path, const std::vector<VideoRecord>& records) {
    json doc = json::array();
    for (const VideoRecord& rec : records) {
        rec.validate();
        json caps = json::array();
        for (const CaptionTriple& t : rec.captions)
            caps.push_back({{"subject", t.subject}, {"before", t.before}, {"after", t.after}});
        doc.push_back({{"video_id", rec.video_id},
                       {"num_frames", rec.num_frames},
                       {"duration", rec.duration},
                       {"boundaries", rec.boundaries},
                       {"captions", std::move(caps)}});
    }
    atomic_write_text(path, doc.dump(2) + "\n");
}

const std::string& caption_field(const CaptionTriple& triple, CaptionKind kind) {
    switch (kind) {
        case CaptionKind::Subject: return triple.subject;
        case CaptionKind::Before: return triple.before;
        case CaptionKind::After: return triple.after;
    }
    return triple.subject;
}

std::vector<SupervisionPair> split_by_kind(const std::vector<VideoRecord>& records,
                                           CaptionKind kind) {
    std::vector<SupervisionPair> pairs;
    for (const VideoRecord& rec : records)
        for (int i = 0; i < rec.num_boundaries(); ++i)
            pairs.push_back({rec.video_id, i, caption_field(rec.captions[i], kind)});
    return pairs;
}

}  // namespace gebc
