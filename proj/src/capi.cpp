#include "gebc.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "dataset.hpp"
#include "runner.hpp"

namespace {

thread_local std::string t_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

// Runs fn, translating the C++ error taxonomy into status codes.
template <typename Fn>
gebc_status guarded(Fn&& fn) {
    try {
        fn();
        t_last_error.clear();
        return GEBC_OK;
    } catch (const gebc::ConfigError& e) {
        t_last_error = e.what();
        return GEBC_ERR_CONFIG;
    } catch (const gebc::NumericError& e) {
        t_last_error = e.what();
        return GEBC_ERR_NUMERIC;
    } catch (const gebc::DataError& e) {
        t_last_error = e.what();
        return GEBC_ERR_DATA;
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return GEBC_ERR_DATA;
    }
}

gebc_status fail_config(const char* msg) {
    t_last_error = msg;
    return GEBC_ERR_CONFIG;
}

}  // namespace

struct gebc_dataset {
    gebc::Dataset data;
};

struct gebc_report {
    gebc::ScoreReport report;
};

extern "C" {

const char* gebc_version(void) { return "0.1.0"; }

const char* gebc_last_error(void) { return t_last_error.c_str(); }

void gebc_free(void* ptr) { std::free(ptr); }

gebc_status gebc_generate(const char* spec_path, const char* out_dir, int force) {
    if (!spec_path || !out_dir) return fail_config("gebc_generate: null argument");
    return guarded([&] {
        gebc::GenerateOptions options;
        options.spec_path = spec_path;
        options.out_dir = out_dir;
        options.force = force != 0;
        gebc::run_generate(options);
    });
}

gebc_status gebc_resolve_config(const char* config_path, char** json_out) {
    if (!json_out) return fail_config("gebc_resolve_config: null output");
    return guarded([&] {
        std::string json = gebc::resolve_config_json(config_path ? config_path : "");
        *json_out = dup_string(json);
    });
}

gebc_status gebc_train(const char* data_dir, const char* kind, const char* config_path,
                       const char* out_dir, long long seed, gebc_log_fn log, void* user) {
    if (!data_dir || !kind || !out_dir) return fail_config("gebc_train: null argument");
    return guarded([&] {
        gebc::TrainOptions options;
        options.data_dir = data_dir;
        options.kind = gebc::caption_kind_from_string(kind);
        options.config_path = config_path ? config_path : "";
        options.out_dir = out_dir;
        options.seed_override = seed;
        if (log)
            options.log = [log, user](const std::string& line) { log(line.c_str(), user); };
        gebc::run_train(options);
    });
}

gebc_status gebc_predict(const char* checkpoint_path, const char* data_dir, const char* kind,
                         const char* out_path) {
    if (!checkpoint_path || !data_dir || !kind || !out_path)
        return fail_config("gebc_predict: null argument");
    return guarded([&] {
        gebc::PredictOptions options;
        options.checkpoint_path = checkpoint_path;
        options.data_dir = data_dir;
        options.kind = gebc::caption_kind_from_string(kind);
        options.out_path = out_path;
        gebc::run_predict(options);
    });
}

gebc_status gebc_dataset_open(const char* data_dir, gebc_dataset** out) {
    if (!data_dir || !out) return fail_config("gebc_dataset_open: null argument");
    return guarded([&] {
        auto handle = std::make_unique<gebc_dataset>();
        gebc::ModelConfig config;  // defaults shape the padded inputs
        handle->data = gebc::load_dataset(data_dir, config);
        *out = handle.release();
    });
}

void gebc_dataset_close(gebc_dataset* dataset) { delete dataset; }

int gebc_dataset_num_videos(const gebc_dataset* dataset) {
    return dataset ? static_cast<int>(dataset->data.videos.size()) : 0;
}

int gebc_dataset_num_boundaries(const gebc_dataset* dataset) {
    if (!dataset) return 0;
    int total = 0;
    for (const gebc::LoadedVideo& v : dataset->data.videos) total += v.record.num_boundaries();
    return total;
}

gebc_status gebc_evaluate(const char* const* prediction_paths, int num_prediction_paths,
                          const char* annotation_path, const char* kind, gebc_report** out) {
    if (!prediction_paths || num_prediction_paths <= 0 || !annotation_path || !out)
        return fail_config("gebc_evaluate: null argument");
    return guarded([&] {
        gebc::EvaluateOptions options;
        for (int i = 0; i < num_prediction_paths; ++i) {
            if (!prediction_paths[i]) throw gebc::ConfigError("gebc_evaluate: null path");
            options.prediction_paths.emplace_back(prediction_paths[i]);
        }
        options.annotation_path = annotation_path;
        if (kind) options.kind_filter = gebc::caption_kind_from_string(kind);
        auto handle = std::make_unique<gebc_report>();
        handle->report = gebc::run_evaluate(options);
        *out = handle.release();
    });
}

void gebc_report_close(gebc_report* report) { delete report; }

double gebc_report_score(const gebc_report* report, const char* metric, const char* kind) {
    const double nan = std::nan("");
    if (!report || !metric || !kind) return nan;
    const gebc::ScoreReport& r = report->report;
    const bool want_cider = std::strcmp(metric, "cider") == 0;
    if (!want_cider && std::strcmp(metric, "rouge_l") != 0) return nan;
    if (std::strcmp(kind, "average") == 0) {
        if (want_cider) return r.cider_average ? *r.cider_average : nan;
        return r.rouge_l_average ? *r.rouge_l_average : nan;
    }
    gebc::CaptionKind k;
    try {
        k = gebc::caption_kind_from_string(kind);
    } catch (const gebc::ConfigError&) {
        return nan;
    }
    const gebc::ScoreReport::Entry& e = r.entry(k);
    if (!e.present) return nan;
    return want_cider ? e.cider : e.rouge_l;
}

gebc_status gebc_report_to_json(const gebc_report* report, int percent, char** json_out) {
    if (!report || !json_out) return fail_config("gebc_report_to_json: null argument");
    return guarded([&] { *json_out = dup_string(report->report.to_json(percent != 0)); });
}

gebc_status gebc_report_to_text(const gebc_report* report, int percent, char** text_out) {
    if (!report || !text_out) return fail_config("gebc_report_to_text: null argument");
    return guarded([&] { *text_out = dup_string(report->report.to_text(percent != 0)); });
}

}  // extern "C"
