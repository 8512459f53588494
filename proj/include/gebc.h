/* gebc — generic event boundary captioning engine.
 *
 * C API over the C++ core. All functions return gebc_status; on failure a
 * human-readable message is available from gebc_last_error() (thread-local).
 * Objects returned through out-parameters are opaque handles released with
 * their matching *_close/gebc_free calls.
 */
#ifndef GEBC_H
#define GEBC_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined _WIN32
#define GEBC_API __declspec(dllexport)
#else
#define GEBC_API __attribute__((visibility("default")))
#endif

typedef enum gebc_status {
    GEBC_OK = 0,
    GEBC_ERR_CONFIG = 1,  /* bad configuration, flags or file formats thereof */
    GEBC_ERR_DATA = 2,    /* missing/corrupt data files, invariant violations */
    GEBC_ERR_NUMERIC = 3  /* non-finite losses or activations */
} gebc_status;

GEBC_API const char* gebc_version(void);

/* Message for the most recent failure on this thread; empty string if none. */
GEBC_API const char* gebc_last_error(void);

/* Frees buffers returned through char** out-parameters. */
GEBC_API void gebc_free(void* ptr);

/* Line-oriented progress callback (no trailing newline). */
typedef void (*gebc_log_fn)(const char* line, void* user);

/* Writes a synthetic dataset described by the JSON spec file into out_dir.
 * Refuses a non-empty out_dir unless force is nonzero. */
GEBC_API gebc_status gebc_generate(const char* spec_path, const char* out_dir, int force);

/* Effective configuration (defaults merged with the optional config file) as
 * a JSON string; caller frees with gebc_free. config_path may be NULL. */
GEBC_API gebc_status gebc_resolve_config(const char* config_path, char** json_out);

/* Trains one caption kind ("subject" | "before" | "after") on the dataset in
 * data_dir, writing checkpoints, the vocabulary and train.log into out_dir.
 * config_path may be NULL for defaults; seed >= 0 overrides config seeds. */
GEBC_API gebc_status gebc_train(const char* data_dir, const char* kind, const char* config_path,
                                const char* out_dir, long long seed, gebc_log_fn log, void* user);

/* Greedy-decodes one prediction per (video, boundary) into a JSON file. */
GEBC_API gebc_status gebc_predict(const char* checkpoint_path, const char* data_dir,
                                  const char* kind, const char* out_path);

/* Dataset handle: validates and loads a dataset directory. */
typedef struct gebc_dataset gebc_dataset;
GEBC_API gebc_status gebc_dataset_open(const char* data_dir, gebc_dataset** out);
GEBC_API void gebc_dataset_close(gebc_dataset* dataset);
GEBC_API int gebc_dataset_num_videos(const gebc_dataset* dataset);
GEBC_API int gebc_dataset_num_boundaries(const gebc_dataset* dataset);

/* Score report handle produced by gebc_evaluate. */
typedef struct gebc_report gebc_report;

/* Scores prediction files (merged) against an annotation file. kind may be
 * NULL to require and evaluate all three kinds, or one kind name to restrict
 * the report. */
GEBC_API gebc_status gebc_evaluate(const char* const* prediction_paths, int num_prediction_paths,
                                   const char* annotation_path, const char* kind,
                                   gebc_report** out);
GEBC_API void gebc_report_close(gebc_report* report);

/* metric: "cider" | "rouge_l"; kind: "subject" | "before" | "after" |
 * "average". Returns NaN when the slot is absent from the report. */
GEBC_API double gebc_report_score(const gebc_report* report, const char* metric,
                                  const char* kind);

/* JSON form of the report; percent scales ROUGE-L by 100. Caller frees. */
GEBC_API gebc_status gebc_report_to_json(const gebc_report* report, int percent, char** json_out);

/* Human-readable table form of the report. Caller frees. */
GEBC_API gebc_status gebc_report_to_text(const gebc_report* report, int percent, char** text_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GEBC_H */
