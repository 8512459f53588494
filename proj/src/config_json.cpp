#include "config_json.hpp"

#include <set>

#include "io_util.hpp"

namespace gebc {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& doc, const std::set<std::string>& known,
                         const std::string& prefix) {
    if (!doc.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
    for (const auto& [key, value] : doc.items())
        if (!known.count(key)) throw ConfigError("unknown config key '" + prefix + key + "'");
}

template <typename T>
void read_key(const json& doc, const char* key, T& out, const std::string& prefix) {
    auto it = doc.find(key);
    if (it == doc.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + prefix + key + "' has the wrong type");
    }
}

}  // namespace

json model_config_to_json(const ModelConfig& c) {
    return json{{"hidden_dim", c.hidden_dim},
                {"encoder_layers", c.encoder_layers},
                {"frame_decoder_layers", c.frame_decoder_layers},
                {"region_decoder_layers", c.region_decoder_layers},
                {"attention_heads", c.attention_heads},
                {"sampling_points", c.sampling_points},
                {"target_length", c.target_length},
                {"max_regions", c.max_regions},
                {"max_caption_len", c.max_caption_len},
                {"strides", c.strides},
                {"ffn_dim", c.ffn_dim},
                {"input_dim", c.input_dim},
                {"region_dim", c.region_dim},
                {"vocab_size", c.vocab_size},
                {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& doc, const std::string& prefix) {
    static const std::set<std::string> known = {
        "hidden_dim",   "encoder_layers", "frame_decoder_layers", "region_decoder_layers",
        "attention_heads", "sampling_points", "target_length",    "max_regions",
        "max_caption_len", "strides",        "ffn_dim",           "input_dim",
        "region_dim",      "vocab_size",     "seed"};
    reject_unknown_keys(doc, known, prefix);
    ModelConfig c;
    read_key(doc, "hidden_dim", c.hidden_dim, prefix);
    read_key(doc, "encoder_layers", c.encoder_layers, prefix);
    read_key(doc, "frame_decoder_layers", c.frame_decoder_layers, prefix);
    read_key(doc, "region_decoder_layers", c.region_decoder_layers, prefix);
    read_key(doc, "attention_heads", c.attention_heads, prefix);
    read_key(doc, "sampling_points", c.sampling_points, prefix);
    read_key(doc, "target_length", c.target_length, prefix);
    read_key(doc, "max_regions", c.max_regions, prefix);
    read_key(doc, "max_caption_len", c.max_caption_len, prefix);
    read_key(doc, "strides", c.strides, prefix);
    read_key(doc, "ffn_dim", c.ffn_dim, prefix);
    read_key(doc, "input_dim", c.input_dim, prefix);
    read_key(doc, "region_dim", c.region_dim, prefix);
    read_key(doc, "vocab_size", c.vocab_size, prefix);
    read_key(doc, "seed", c.seed, prefix);
    c.validate();
    return c;
}

json train_config_to_json(const TrainConfig& c) {
    return json{{"initial_lr", c.initial_lr},
                {"weight_decay", c.weight_decay},
                {"batch_size", c.batch_size},
                {"decay_start_epoch", c.decay_start_epoch},
                {"decay_factor", c.decay_factor},
                {"decay_every", c.decay_every},
                {"num_epochs", c.num_epochs},
                {"rl_enabled", c.rl_enabled},
                {"rl_start_epoch", c.rl_start_epoch},
                {"grad_clip", c.grad_clip},
                {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& doc, const std::string& prefix) {
    static const std::set<std::string> known = {
        "initial_lr", "weight_decay", "batch_size",     "decay_start_epoch",
        "decay_factor", "decay_every", "num_epochs",    "rl_enabled",
        "rl_start_epoch", "grad_clip", "seed"};
    reject_unknown_keys(doc, known, prefix);
    TrainConfig c;
    read_key(doc, "initial_lr", c.initial_lr, prefix);
    read_key(doc, "weight_decay", c.weight_decay, prefix);
    read_key(doc, "batch_size", c.batch_size, prefix);
    read_key(doc, "decay_start_epoch", c.decay_start_epoch, prefix);
    read_key(doc, "decay_factor", c.decay_factor, prefix);
    read_key(doc, "decay_every", c.decay_every, prefix);
    read_key(doc, "num_epochs", c.num_epochs, prefix);
    read_key(doc, "rl_enabled", c.rl_enabled, prefix);
    read_key(doc, "rl_start_epoch", c.rl_start_epoch, prefix);
    read_key(doc, "grad_clip", c.grad_clip, prefix);
    read_key(doc, "seed", c.seed, prefix);
    c.validate();
    return c;
}

json synthetic_spec_to_json(const SyntheticSpec& s) {
    return json{{"seed", s.seed},
                {"num_videos", s.num_videos},
                {"min_boundaries", s.min_boundaries},
                {"max_boundaries", s.max_boundaries},
                {"num_subjects", s.num_subjects},
                {"num_actions", s.num_actions},
                {"frame_dims", s.frame_dims},
                {"region_dim", s.region_dim},
                {"regions_per_clip", s.regions_per_clip},
                {"noise", s.noise},
                {"fps", s.fps},
                {"min_frames", s.min_frames},
                {"max_frames", s.max_frames}};
}

SyntheticSpec synthetic_spec_from_json(const json& doc) {
    static const std::set<std::string> known = {
        "seed",        "num_videos", "min_boundaries",   "max_boundaries", "num_subjects",
        "num_actions", "frame_dims", "region_dim",       "regions_per_clip", "noise",
        "fps",         "min_frames", "max_frames"};
    const std::string prefix;
    reject_unknown_keys(doc, known, prefix);
    SyntheticSpec s;
    read_key(doc, "seed", s.seed, prefix);
    read_key(doc, "num_videos", s.num_videos, prefix);
    read_key(doc, "min_boundaries", s.min_boundaries, prefix);
    read_key(doc, "max_boundaries", s.max_boundaries, prefix);
    read_key(doc, "num_subjects", s.num_subjects, prefix);
    read_key(doc, "num_actions", s.num_actions, prefix);
    read_key(doc, "frame_dims", s.frame_dims, prefix);
    read_key(doc, "region_dim", s.region_dim, prefix);
    read_key(doc, "regions_per_clip", s.regions_per_clip, prefix);
    read_key(doc, "noise", s.noise, prefix);
    read_key(doc, "fps", s.fps, prefix);
    read_key(doc, "min_frames", s.min_frames, prefix);
    read_key(doc, "max_frames", s.max_frames, prefix);
    s.validate();
    return s;
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("synthetic spec '" + path + "': " + e.what());
    }
    return synthetic_spec_from_json(doc);
}

FullConfig load_full_config(const std::string& path_or_empty) {
    FullConfig out;
    if (path_or_empty.empty()) return out;
    json doc;
    try {
        doc = json::parse(read_text_file(path_or_empty));
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path_or_empty + "': " + e.what());
    }
    static const std::set<std::string> known = {"model", "train"};
    reject_unknown_keys(doc, known, "");
    if (doc.contains("model")) out.model = model_config_from_json(doc["model"], "model.");
    if (doc.contains("train")) out.train = train_config_from_json(doc["train"], "train.");
    return out;
}

json full_config_to_json(const FullConfig& config) {
    return json{{"model", model_config_to_json(config.model)},
                {"train", train_config_to_json(config.train)}};
}

}  // namespace gebc
