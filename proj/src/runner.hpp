#pragma once

#include <optional>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "training.hpp"

namespace gebc {

struct GenerateOptions {
    std::string spec_path;
    std::string out_dir;
    bool force = false;
};
void run_generate(const GenerateOptions& options);

struct TrainOptions {
    std::string data_dir;
    std::string out_dir;
    CaptionKind kind = CaptionKind::Subject;
    std::string config_path;      // empty: defaults
    long long seed_override = -1;  // >= 0 overrides both model and train seeds
    LogFn log;
};
void run_train(const TrainOptions& options);

struct PredictOptions {
    std::string checkpoint_path;
    std::string data_dir;
    CaptionKind kind = CaptionKind::Subject;
    std::string out_path;
};
void run_predict(const PredictOptions& options);

struct EvaluateOptions {
    std::vector<std::string> prediction_paths;
    std::string annotation_path;
    std::optional<CaptionKind> kind_filter;
};
ScoreReport run_evaluate(const EvaluateOptions& options);

// Effective configuration (defaults merged with the file) as a JSON string.
std::string resolve_config_json(const std::string& config_path_or_empty);

// Greedy predictions for every boundary of the dataset, sorted by
// (video_id, boundary_index). Shared by run_predict and the tests.
std::vector<PredictionRecord> predict_dataset(ModelParams& params, const Vocabulary& vocab,
                                              CaptionKind kind, const Dataset& dataset);

}  // namespace gebc
