#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "features.hpp"

namespace gebc {

void SyntheticSpec::validate() const {
    auto positive = [](double v, const char* name) {
        if (v <= 0) throw ConfigError(std::string("synthetic spec: ") + name + " must be positive");
    };
    positive(num_videos, "num_videos");
    positive(min_boundaries, "min_boundaries");
    positive(max_boundaries, "max_boundaries");
    positive(num_subjects, "num_subjects");
    positive(num_actions, "num_actions");
    positive(region_dim, "region_dim");
    positive(regions_per_clip, "regions_per_clip");
    positive(fps, "fps");
    positive(min_frames, "min_frames");
    positive(max_frames, "max_frames");
    if (noise < 0) throw ConfigError("synthetic spec: noise must be non-negative");
    if (min_boundaries > max_boundaries)
        throw ConfigError("synthetic spec: min_boundaries > max_boundaries");
    if (min_frames > max_frames) throw ConfigError("synthetic spec: min_frames > max_frames");
    if (frame_dims.empty()) throw ConfigError("synthetic spec: frame_dims must be non-empty");
    for (int d : frame_dims) positive(d, "frame_dims entry");
}

namespace {

// Three distinct words per subject so every caption n-gram up to length 4 is
// informative for the scorer.
const char* kAdjectives[] = {"amber", "bronze", "crimson", "dusty",
                             "emerald", "frosted", "golden", "hazel"};
const char* kAnimals[] = {"fox", "owl", "wolf", "hare", "lynx", "otter", "crane", "mole"};
const char* kYoung[] = {"cub", "chick", "pup", "kit", "whelp", "joey", "colt", "fawn"};
const char* kActions[] = {"running", "sleeping", "digging", "gliding", "pouncing", "wading"};

std::vector<std::string> subject_phrases(int count) {
    std::vector<std::string> out;
    for (int i = 0; i < count; ++i) {
        if (i < 8)
            out.push_back(std::string(kAdjectives[i]) + " " + kAnimals[i] + " " + kYoung[i]);
        else
            out.push_back("breed" + std::to_string(i) + " creature" + std::to_string(i) + " form" +
                          std::to_string(i));
    }
    return out;
}

std::vector<std::string> action_words(int count) {
    std::vector<std::string> out;
    for (int i = 0; i < count; ++i) {
        if (i < 6)
            out.push_back(kActions[i]);
        else
            out.push_back("acting" + std::to_string(i));
    }
    return out;
}

Tensor draw_prototype(Rng& rng, int dim) {
    Tensor t(1, dim);
    for (double& v : t.data) v = rng.normal();
    return t;
}

}  // namespace

SyntheticTruth generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
    spec.validate();
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "features");

    Rng rng(spec.seed);
    SyntheticTruth truth;
    truth.subjects = subject_phrases(spec.num_subjects);
    truth.actions = action_words(spec.num_actions);

    // All prototypes first, in a fixed order, so video draws never shift them.
    truth.frame_prototypes.resize(spec.frame_dims.size());
    for (size_t b = 0; b < spec.frame_dims.size(); ++b)
        for (int s = 0; s < spec.num_subjects; ++s)
            for (int a = 0; a < spec.num_actions; ++a)
                truth.frame_prototypes[b].push_back(draw_prototype(rng, spec.frame_dims[b]));
    for (int s = 0; s < spec.num_subjects; ++s)
        truth.region_prototypes.push_back(draw_prototype(rng, spec.region_dim));

    std::vector<VideoRecord> records;
    for (int v = 0; v < spec.num_videos; ++v) {
        char id[32];
        std::snprintf(id, sizeof(id), "synth_%04d", v);

        VideoRecord rec;
        rec.video_id = id;
        rec.num_frames = rng.uniform_int(spec.min_frames, spec.max_frames);
        rec.duration = rec.num_frames / spec.fps;
        const int n = rng.uniform_int(spec.min_boundaries, spec.max_boundaries);

        // evenly spaced boundaries with a small jitter keeps clips well fed
        for (int i = 1; i <= n; ++i) {
            double frac = static_cast<double>(i) / (n + 1) + rng.uniform(-0.03, 0.03);
            rec.boundaries.push_back(frac * rec.duration);
        }

        int subject = rng.uniform_int(0, spec.num_subjects - 1);
        truth.video_subject.push_back(subject);

        // one action per clip; consecutive clips differ so every boundary is
        // a real status change
        std::vector<int> actions(static_cast<size_t>(n) + 1);
        for (size_t j = 0; j < actions.size(); ++j) {
            int a = rng.uniform_int(0, spec.num_actions - 1);
            if (j > 0 && a == actions[j - 1]) a = (a + 1) % spec.num_actions;
            actions[j] = a;
        }
        truth.clip_actions.push_back(actions);

        for (int i = 0; i < n; ++i) {
            CaptionTriple triple;
            triple.subject = "the " + truth.subjects[subject];
            triple.before = "the " + truth.subjects[subject] + " is " +
                            truth.actions[actions[static_cast<size_t>(i)]];
            triple.after = "the " + truth.subjects[subject] + " is " +
                           truth.actions[actions[static_cast<size_t>(i) + 1]];
            rec.captions.push_back(std::move(triple));
        }
        rec.validate();

        // clip edges for per-frame lookup
        std::vector<double> edges = {0.0};
        edges.insert(edges.end(), rec.boundaries.begin(), rec.boundaries.end());
        edges.push_back(rec.duration);

        FeatureFile file;
        file.pre_strided = false;
        for (size_t b = 0; b < spec.frame_dims.size(); ++b) {
            Tensor block(rec.num_frames, spec.frame_dims[b]);
            for (int f = 0; f < rec.num_frames; ++f) {
                double t = (f + 0.5) / rec.num_frames * rec.duration;
                int clip = 0;
                while (clip + 1 < static_cast<int>(edges.size()) - 1 && t >= edges[clip + 1])
                    ++clip;
                const Tensor& proto =
                    truth.frame_prototypes[b][static_cast<size_t>(subject) * spec.num_actions +
                                              actions[static_cast<size_t>(clip)]];
                double* row = block.row(f);
                for (int c = 0; c < spec.frame_dims[b]; ++c)
                    row[c] = proto.data[static_cast<size_t>(c)] + spec.noise * rng.normal();
            }
            file.frame_blocks.push_back(std::move(block));
        }

        for (int j = 0; j <= n; ++j) {
            Tensor regions(spec.regions_per_clip, spec.region_dim);
            std::vector<double> conf(static_cast<size_t>(spec.regions_per_clip));
            // subject prototype lands in one high-confidence row; the rest
            // are low-confidence noise
            int subject_row = rng.uniform_int(0, spec.regions_per_clip - 1);
            for (int r = 0; r < spec.regions_per_clip; ++r) {
                double* row = regions.row(r);
                if (r == subject_row) {
                    const Tensor& proto = truth.region_prototypes[static_cast<size_t>(subject)];
                    for (int c = 0; c < spec.region_dim; ++c)
                        row[c] = proto.data[static_cast<size_t>(c)] + spec.noise * rng.normal();
                    conf[static_cast<size_t>(r)] = 0.9 + 0.09 * rng.uniform();
                } else {
                    for (int c = 0; c < spec.region_dim; ++c) row[c] = rng.normal();
                    conf[static_cast<size_t>(r)] = 0.1 + 0.7 * rng.uniform();
                }
            }
            file.clip_regions.push_back(std::move(regions));
            file.clip_confidences.push_back(std::move(conf));
        }

        save_feature_file((fs::path(out_dir) / "features" / (rec.video_id + ".gebf")).string(),
                          file);
        records.push_back(std::move(rec));
    }

    save_annotations((fs::path(out_dir) / "annotations.json").string(), records);
    return truth;
}

}  // namespace gebc
