#include "runner.hpp"

#include <algorithm>
#include <filesystem>

#include "config_json.hpp"
#include "io_util.hpp"
#include "synthetic.hpp"

namespace gebc {

namespace fs = std::filesystem;

void run_generate(const GenerateOptions& options) {
    SyntheticSpec spec = load_synthetic_spec(options.spec_path);
    if (fs::exists(options.out_dir) && !fs::is_empty(options.out_dir) && !options.force)
        throw DataError("output directory '" + options.out_dir +
                        "' is not empty (use --force to overwrite)");
    generate_synthetic(spec, options.out_dir);
}

void run_train(const TrainOptions& options) {
    FullConfig config = load_full_config(options.config_path);
    if (options.seed_override >= 0) {
        config.model.seed = static_cast<uint64_t>(options.seed_override);
        config.train.seed = static_cast<uint64_t>(options.seed_override);
    }
    Dataset dataset = load_dataset(options.data_dir, config.model);

    if (options.log) {
        // effective configuration echo, resolved against the dataset
        FullConfig effective = config;
        if (effective.model.input_dim == 0) effective.model.input_dim = dataset.input_dim();
        if (effective.model.region_dim == 0) effective.model.region_dim = dataset.region_dim();
        options.log("config " + full_config_to_json(effective).dump());
    }
    train_model(dataset, options.kind, config.model, config.train, options.out_dir, options.log);
}

std::vector<PredictionRecord> predict_dataset(ModelParams& params, const Vocabulary& vocab,
                                              CaptionKind kind, const Dataset& dataset) {
    std::vector<PredictionRecord> predictions;
    for (const LoadedVideo& video : dataset.videos) {
        ad::Graph g(false);
        GraphForward fwd = model_forward(g, params, video.inputs, kind);
        const Tensor& events = fwd.events->v();
        const Tensor& f_enc = fwd.f_enc->v();
        for (int i = 0; i < video.record.num_boundaries(); ++i) {
            Tensor event_row(1, events.cols);
            for (int c = 0; c < events.cols; ++c) event_row.at(0, c) = events.at(i, c);
            std::vector<int> ids =
                greedy_decode(params, event_row, f_enc, fwd.reference_points[static_cast<size_t>(i)],
                              params.config.max_caption_len);
            PredictionRecord rec;
            rec.video_id = video.record.video_id;
            rec.boundary_index = i;
            rec.kind = kind;
            rec.caption = vocab.decode(ids);
            predictions.push_back(std::move(rec));
        }
    }
    std::sort(predictions.begin(), predictions.end(),
              [](const PredictionRecord& a, const PredictionRecord& b) {
                  if (a.video_id != b.video_id) return a.video_id < b.video_id;
                  return a.boundary_index < b.boundary_index;
              });
    return predictions;
}

void run_predict(const PredictOptions& options) {
    LoadedModel model = load_checkpoint(options.checkpoint_path);
    if (model.kind != options.kind)
        throw ConfigError("checkpoint '" + options.checkpoint_path + "' was trained for kind '" +
                          to_string(model.kind) + "', not '" + to_string(options.kind) + "'");
    Dataset dataset = load_dataset(options.data_dir, model.params->config);
    if (dataset.input_dim() != model.params->config.input_dim ||
        dataset.region_dim() != model.params->config.region_dim)
        throw ConfigError("dataset feature dims do not match the checkpoint config");
    std::vector<PredictionRecord> predictions =
        predict_dataset(*model.params, model.vocab, options.kind, dataset);
    save_predictions(options.out_path, predictions);
}

ScoreReport run_evaluate(const EvaluateOptions& options) {
    if (options.prediction_paths.empty()) throw ConfigError("evaluate: no prediction files given");
    std::vector<PredictionRecord> merged;
    for (const std::string& path : options.prediction_paths) {
        std::vector<PredictionRecord> part = load_predictions(path);
        merged.insert(merged.end(), part.begin(), part.end());
    }
    std::vector<VideoRecord> annotations = load_annotations(options.annotation_path);
    return score_prediction_records(merged, annotations, options.kind_filter);
}

std::string resolve_config_json(const std::string& config_path_or_empty) {
    FullConfig config = load_full_config(config_path_or_empty);
    return full_config_to_json(config).dump(2);
}

}  // namespace gebc
