#include "training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "config_json.hpp"
#include "io_util.hpp"
#include "json.hpp"

namespace gebc {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(initial_lr > 0)) throw ConfigError("train config: initial_lr must be positive");
    if (weight_decay < 0) throw ConfigError("train config: weight_decay must be non-negative");
    if (batch_size <= 0) throw ConfigError("train config: batch_size must be positive");
    if (decay_start_epoch < 0) throw ConfigError("train config: decay_start_epoch must be >= 0");
    if (!(decay_factor > 0 && decay_factor < 1))
        throw ConfigError("train config: decay_factor must be in (0, 1)");
    if (decay_every <= 0) throw ConfigError("train config: decay_every must be positive");
    if (num_epochs <= 0) throw ConfigError("train config: num_epochs must be positive");
    if (rl_start_epoch < 0) throw ConfigError("train config: rl_start_epoch must be >= 0");
    if (!(grad_clip > 0)) throw ConfigError("train config: grad_clip must be positive");
}

double lr_at_epoch(int epoch, const TrainConfig& config) {
    if (epoch < config.decay_start_epoch) return config.initial_lr;
    int steps = (epoch - config.decay_start_epoch) / config.decay_every + 1;
    return config.initial_lr * std::pow(config.decay_factor, steps);
}

double xe_loss(const Tensor& logits, const std::vector<int>& targets,
               const std::vector<uint8_t>& mask) {
    if (logits.rows != static_cast<int>(targets.size()) ||
        logits.rows != static_cast<int>(mask.size()))
        throw DataError("xe_loss: shape mismatch");
    double total = 0.0;
    int count = 0;
    for (int r = 0; r < logits.rows; ++r) {
        if (!mask[r]) continue;
        if (targets[r] < 0 || targets[r] >= logits.cols)
            throw DataError("xe_loss: target out of range");
        const double* lr = logits.row(r);
        double mx = lr[0];
        for (int c = 1; c < logits.cols; ++c) mx = std::max(mx, lr[c]);
        double sum = 0.0;
        for (int c = 0; c < logits.cols; ++c) sum += std::exp(lr[c] - mx);
        total += -(lr[targets[r]] - mx - std::log(sum));
        ++count;
    }
    if (count == 0) throw DataError("xe_loss: all positions are masked");
    return total / count;
}

double scst_loss(const TokenList& sampled_tokens, const std::vector<double>& sampled_logprobs,
                 const TokenList& greedy_tokens, const std::vector<TokenList>& references,
                 const NGramStats& stats) {
    double advantage =
        cider_d(sampled_tokens, references, stats) - cider_d(greedy_tokens, references, stats);
    double logprob_sum = 0.0;
    for (double lp : sampled_logprobs) logprob_sum += lp;
    return -advantage * logprob_sum;
}

AdamW::AdamW(std::vector<ad::Parameter*> params, double weight_decay, double beta1, double beta2,
             double eps)
    : params_(std::move(params)), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
    for (ad::Parameter* p : params_) {
        m_.emplace_back(p->value.rows, p->value.cols);
        v_.emplace_back(p->value.rows, p->value.cols);
    }
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
        ad::Parameter* p = params_[i];
        for (size_t j = 0; j < p->value.data.size(); ++j) {
            double g = p->grad.data[j];
            double& m = m_[i].data[j];
            double& v = v_[i].data[j];
            m = beta1_ * m + (1.0 - beta1_) * g;
            v = beta2_ * v + (1.0 - beta2_) * g * g;
            double mhat = m / bc1;
            double vhat = v / bc2;
            p->value.data[j] -=
                lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * p->value.data[j]);
        }
    }
}

double clip_gradients(const std::vector<ad::Parameter*>& params, double max_norm) {
    double norm2 = 0.0;
    for (ad::Parameter* p : params)
        for (double g : p->grad.data) norm2 += g * g;
    double norm = std::sqrt(norm2);
    if (norm > max_norm && norm > 0.0) {
        double scale = max_norm / norm;
        for (ad::Parameter* p : params)
            for (double& g : p->grad.data) g *= scale;
    }
    return norm;
}

namespace {
constexpr uint32_t kCheckpointFlag = 2u;
}

void save_checkpoint(const std::string& path, const ModelParams& params, const Vocabulary& vocab,
                     CaptionKind kind, int epoch) {
    ArrayFile file;
    file.flags = kCheckpointFlag;
    json meta;
    meta["format"] = "gebc-checkpoint";
    meta["config"] = model_config_to_json(params.config);
    meta["kind"] = to_string(kind);
    meta["epoch"] = epoch;
    meta["vocab"] = vocab.content_tokens();
    meta["vocab_hash"] = vocab.hash();
    file.meta = meta.dump();
    for (const ad::Parameter* p : params.all()) file.arrays.push_back({p->name, p->value, false});
    write_array_file(path, file);
}

LoadedModel load_checkpoint(const std::string& path, const ModelConfig* expected_config) {
    ArrayFile file = read_array_file(path);
    json meta;
    try {
        meta = json::parse(file.meta);
    } catch (const json::parse_error&) {
        throw DataError("checkpoint '" + path + "': corrupt metadata");
    }
    if (!meta.contains("format") || meta["format"] != "gebc-checkpoint")
        throw DataError("file '" + path + "' is not a gebc checkpoint");

    LoadedModel out;
    ModelConfig config = model_config_from_json(meta.at("config"), "checkpoint.config.");
    if (expected_config && !(config == *expected_config))
        throw ConfigError("checkpoint '" + path + "' was written with a different model config");
    out.kind = caption_kind_from_string(meta.at("kind").get<std::string>());
    out.epoch = meta.at("epoch").get<int>();
    out.vocab = Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
    uint64_t stored_hash = meta.at("vocab_hash").get<uint64_t>();
    if (stored_hash != out.vocab.hash())
        throw DataError("checkpoint '" + path + "': vocabulary hash mismatch");
    if (config.vocab_size != out.vocab.size())
        throw DataError("checkpoint '" + path + "': config vocab_size disagrees with vocabulary");

    out.params = std::make_unique<ModelParams>(config);
    size_t filled = 0;
    for (ad::Parameter* p : out.params->all()) {
        const NamedArray* a = file.find(p->name);
        if (!a) throw DataError("checkpoint '" + path + "': missing parameter '" + p->name + "'");
        if (!a->data.same_shape(p->value))
            throw DataError("checkpoint '" + path + "': parameter '" + p->name +
                            "' has the wrong shape");
        p->value = a->data;
        ++filled;
    }
    if (filled != file.arrays.size())
        throw DataError("checkpoint '" + path + "' carries unknown extra parameters");
    return out;
}

namespace {

struct VideoTargets {
    std::vector<std::vector<int>> token_ids;  // per boundary, content + <end>
    std::vector<std::vector<std::string>> reference_tokens;
};

std::string format_loss_line(int epoch, int step, double loss, double lr) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "epoch=%d step=%d loss=%.10g lr=%.10g", epoch, step, loss, lr);
    return buf;
}

}  // namespace

TrainResult train_model(const Dataset& dataset, CaptionKind kind, ModelConfig model_config,
                        const TrainConfig& train_config, const std::string& out_dir,
                        const LogFn& log, const EpochCallback& epoch_callback) {
    train_config.validate();
    if (dataset.videos.empty()) throw DataError("train: dataset is empty");

    // vocabulary from this kind's training captions only
    std::vector<VideoRecord> records = dataset.records();
    std::vector<SupervisionPair> pairs = split_by_kind(records, kind);
    std::vector<std::string> corpus;
    corpus.reserve(pairs.size());
    for (const SupervisionPair& p : pairs) corpus.push_back(p.target);
    Vocabulary vocab = Vocabulary::build(corpus);

    if (model_config.input_dim == 0) model_config.input_dim = dataset.input_dim();
    if (model_config.region_dim == 0) model_config.region_dim = dataset.region_dim();
    model_config.vocab_size = vocab.size();
    model_config.validate();
    if (model_config.input_dim != dataset.input_dim())
        throw ConfigError("train: config input_dim does not match the dataset");
    if (model_config.region_dim != dataset.region_dim())
        throw ConfigError("train: config region_dim does not match the dataset");

    namespace fs = std::filesystem;
    std::ofstream log_file;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        vocab.save((fs::path(out_dir) / (std::string(to_string(kind)) + "_vocab.txt")).string());
        log_file.open((fs::path(out_dir) / "train.log").string(), std::ios::app);
        if (!log_file) throw DataError("train: cannot open train.log under '" + out_dir + "'");
    }
    auto emit = [&](const std::string& line) {
        if (log_file.is_open()) log_file << line << '\n' << std::flush;
        if (log) log(line);
    };

    std::vector<VideoTargets> targets(dataset.videos.size());
    for (size_t i = 0; i < dataset.videos.size(); ++i) {
        const VideoRecord& rec = dataset.videos[i].record;
        for (const CaptionTriple& triple : rec.captions) {
            const std::string& text = caption_field(triple, kind);
            targets[i].token_ids.push_back(
                make_target_ids(vocab, text, model_config.max_caption_len));
            targets[i].reference_tokens.push_back(tokenize(text));
        }
    }

    // reward statistics for the self-critical phase: this split's references
    std::vector<std::vector<TokenList>> docs;
    for (const VideoTargets& vt : targets)
        for (const auto& ref : vt.reference_tokens) docs.push_back({ref});
    NGramStats reward_stats = NGramStats::build(docs);

    ModelParams params(model_config);
    AdamW optimizer(params.all(), train_config.weight_decay);
    Rng shuffle_rng(train_config.seed);
    Rng sample_rng(train_config.seed ^ 0x9e3779b97f4a7c15ull);

    TrainResult result;
    result.resolved_config = model_config;
    result.vocab_hash = vocab.hash();

    int global_step = 0;
    for (int epoch = 0; epoch < train_config.num_epochs; ++epoch) {
        const double lr = lr_at_epoch(epoch, train_config);
        const bool rl_phase = train_config.rl_enabled && epoch >= train_config.rl_start_epoch;

        std::vector<size_t> order(dataset.videos.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);

        double epoch_loss_sum = 0.0;
        int epoch_batches = 0;
        for (size_t start = 0; start < order.size(); start += train_config.batch_size) {
            size_t end = std::min(order.size(), start + train_config.batch_size);
            params.zero_grads();

            std::vector<std::unique_ptr<ad::Graph>> graphs;
            std::vector<ad::Var> losses;
            std::vector<double> loss_values;
            int total_units = 0;  // tokens for XE, boundaries for SCST
            for (size_t b = start; b < end; ++b) {
                const LoadedVideo& video = dataset.videos[order[b]];
                auto g = std::make_unique<ad::Graph>();
                GraphForward fwd = model_forward(*g, params, video.inputs, kind);

                if (!rl_phase) {
                    int token_count = 0;
                    ad::Var loss = caption_xe_sum(*g, params, fwd.events, fwd.f_enc,
                                                  fwd.reference_points,
                                                  targets[order[b]].token_ids, &token_count);
                    total_units += token_count;
                    losses.push_back(loss);
                    loss_values.push_back(loss->v().data[0]);
                } else {
                    // self-critical: sample vs greedy, CIDEr advantage weights
                    const int n = video.record.num_boundaries();
                    const Tensor& events = fwd.events->v();
                    const Tensor& f_enc = fwd.f_enc->v();
                    std::vector<std::vector<int>> sampled_targets(n);
                    std::vector<double> advantages(n, 0.0);
                    for (int i = 0; i < n; ++i) {
                        Tensor event_row(1, events.cols);
                        for (int c = 0; c < events.cols; ++c)
                            event_row.at(0, c) = events.at(i, c);
                        double ref_point = fwd.reference_points[static_cast<size_t>(i)];
                        std::vector<int> greedy =
                            greedy_decode(params, event_row, f_enc, ref_point,
                                          model_config.max_caption_len);
                        SampledCaption sampled =
                            sample_decode(params, event_row, f_enc, ref_point, sample_rng,
                                          model_config.max_caption_len);
                        TokenList greedy_tokens, sampled_tokens;
                        for (int id : greedy) greedy_tokens.push_back(vocab.token(id));
                        for (int id : sampled.ids) sampled_tokens.push_back(vocab.token(id));
                        const std::vector<TokenList> refs = {
                            targets[order[b]].reference_tokens[static_cast<size_t>(i)]};
                        advantages[static_cast<size_t>(i)] =
                            cider_d(sampled_tokens, refs, reward_stats) -
                            cider_d(greedy_tokens, refs, reward_stats);
                        sampled_targets[static_cast<size_t>(i)] = sampled.ids;
                        if (sampled.ended_with_end)
                            sampled_targets[static_cast<size_t>(i)].push_back(Vocabulary::kEnd);
                    }
                    ad::Var loss =
                        caption_xe_sum(*g, params, fwd.events, fwd.f_enc, fwd.reference_points,
                                       sampled_targets, nullptr, &advantages);
                    total_units += n;
                    losses.push_back(loss);
                    loss_values.push_back(loss->v().data[0]);
                }
                graphs.push_back(std::move(g));
            }

            if (total_units == 0) continue;
            double batch_loss = 0.0;
            for (size_t i = 0; i < graphs.size(); ++i) {
                graphs[i]->backward(losses[i], 1.0 / total_units);
                batch_loss += loss_values[i];
            }
            batch_loss /= total_units;
            graphs.clear();

            if (!std::isfinite(batch_loss)) {
                std::string ids;
                for (size_t b = start; b < end; ++b)
                    ids += (ids.empty() ? "" : ",") + dataset.videos[order[b]].record.video_id;
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                   " step " + std::to_string(global_step) + " (batch: " + ids +
                                   ")");
            }

            double norm = clip_gradients(params.all(), train_config.grad_clip);
            // clip events go to the progress callback; train.log keeps the
            // fixed epoch/step/loss/lr line format
            if (norm > train_config.grad_clip && log)
                log("# grad_clip epoch=" + std::to_string(epoch) +
                    " step=" + std::to_string(global_step) + " norm=" + std::to_string(norm));
            optimizer.step(lr);

            emit(format_loss_line(epoch, global_step, batch_loss, lr));
            epoch_loss_sum += batch_loss;
            ++epoch_batches;
            ++global_step;
        }

        double mean_loss = epoch_batches ? epoch_loss_sum / epoch_batches : 0.0;
        result.epoch_losses.push_back(mean_loss);
        result.epochs_run = epoch + 1;

        if (!out_dir.empty()) {
            std::string name = std::string(to_string(kind)) + "_epoch" + std::to_string(epoch) +
                               ".ckpt";
            save_checkpoint((fs::path(out_dir) / name).string(), params, vocab, kind, epoch);
        }
        if (epoch_callback && !epoch_callback(epoch, mean_loss, params)) break;
    }
    return result;
}

}  // namespace gebc
