// gebc command line: generate / train / predict / evaluate, all through the
// shared-library C API.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gebc.h"

namespace {

int status_to_exit(gebc_status status) {
    if (status != GEBC_OK) std::fprintf(stderr, "error: %s\n", gebc_last_error());
    return static_cast<int>(status);
}

void print_line(const char* line, void*) { std::printf("%s\n", line); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gebc — context-aware generic event boundary captioning"};
    app.set_version_flag("--version", std::string(gebc_version()));
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset");
    std::string gen_spec, gen_out;
    bool gen_force = false;
    generate->add_option("--spec", gen_spec, "Synthetic spec JSON file")->required();
    generate->add_option("--out", gen_out, "Output dataset directory")->required();
    generate->add_flag("--force", gen_force, "Allow writing into a non-empty directory");

    // train
    auto* train = app.add_subcommand("train", "Train one caption kind");
    std::string train_data, train_kind, train_config, train_out;
    long long train_seed = -1;
    train->add_option("--data", train_data, "Dataset directory")->required();
    train->add_option("--kind", train_kind, "subject|before|after")->required();
    train->add_option("--config", train_config, "Config JSON file (defaults when omitted)");
    train->add_option("--out", train_out, "Output directory for checkpoints and logs")->required();
    train->add_option("--seed", train_seed, "Override model and train seeds");

    // predict
    auto* predict = app.add_subcommand("predict", "Greedy-decode captions for a dataset");
    std::string pred_ckpt, pred_data, pred_kind, pred_out;
    predict->add_option("--ckpt", pred_ckpt, "Checkpoint file")->required();
    predict->add_option("--data", pred_data, "Dataset directory")->required();
    predict->add_option("--kind", pred_kind, "subject|before|after")->required();
    predict->add_option("--out", pred_out, "Prediction JSON output file")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions with CIDEr-D and ROUGE-L");
    std::vector<std::string> eval_preds;
    std::string eval_ann, eval_kind, eval_json;
    bool eval_percent = false;
    evaluate->add_option("--pred", eval_preds, "Prediction JSON file (repeatable)")->required();
    evaluate->add_option("--ann", eval_ann, "Annotation JSON file")->required();
    evaluate->add_option("--kind", eval_kind, "Restrict scoring to one caption kind");
    evaluate->add_option("--out", eval_json, "Write the JSON report here (default: <pred>.scores.json)");
    evaluate->add_flag("--percent", eval_percent, "Display ROUGE-L on a 0-100 scale");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage errors exit 1
    }

    if (generate->parsed())
        return status_to_exit(gebc_generate(gen_spec.c_str(), gen_out.c_str(), gen_force ? 1 : 0));

    if (train->parsed())
        return status_to_exit(gebc_train(train_data.c_str(), train_kind.c_str(),
                                         train_config.empty() ? nullptr : train_config.c_str(),
                                         train_out.c_str(), train_seed, print_line, nullptr));

    if (predict->parsed())
        return status_to_exit(gebc_predict(pred_ckpt.c_str(), pred_data.c_str(),
                                           pred_kind.c_str(), pred_out.c_str()));

    if (evaluate->parsed()) {
        std::vector<const char*> paths;
        for (const std::string& p : eval_preds) paths.push_back(p.c_str());
        gebc_report* report = nullptr;
        gebc_status status =
            gebc_evaluate(paths.data(), static_cast<int>(paths.size()), eval_ann.c_str(),
                          eval_kind.empty() ? nullptr : eval_kind.c_str(), &report);
        if (status != GEBC_OK) return status_to_exit(status);

        char* text = nullptr;
        if (gebc_report_to_text(report, eval_percent ? 1 : 0, &text) == GEBC_OK && text) {
            std::fputs(text, stdout);
            gebc_free(text);
        }
        char* json = nullptr;
        status = gebc_report_to_json(report, eval_percent ? 1 : 0, &json);
        if (status == GEBC_OK && json) {
            std::string out_path = eval_json.empty() ? eval_preds.front() + ".scores.json"
                                                     : eval_json;
            // temp + rename so readers never see a partial report
            std::string tmp_path = out_path + ".tmp";
            std::FILE* f = std::fopen(tmp_path.c_str(), "w");
            bool written = f != nullptr;
            if (f) {
                written = std::fputs(json, f) >= 0 && std::fputc('\n', f) != EOF;
                written = std::fclose(f) == 0 && written;
                written = written && std::rename(tmp_path.c_str(), out_path.c_str()) == 0;
            }
            if (!written) {
                std::fprintf(stderr, "error: cannot write report '%s'\n", out_path.c_str());
                std::remove(tmp_path.c_str());
                gebc_free(json);
                gebc_report_close(report);
                return 2;
            }
            std::printf("report written to %s\n", out_path.c_str());
            gebc_free(json);
        }
        gebc_report_close(report);
        return status_to_exit(status);
    }

    return 1;
}
