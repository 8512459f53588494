#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "caption.hpp"
#include "dataset.hpp"
#include "metrics.hpp"
#include "network.hpp"

namespace gebc {

struct TrainConfig {
    double initial_lr = 5e-5;
    double weight_decay = 1e-4;
    int batch_size = 8;
    int decay_start_epoch = 8;
    double decay_factor = 0.5;
    int decay_every = 3;
    int num_epochs = 20;
    bool rl_enabled = false;
    int rl_start_epoch = 15;
    double grad_clip = 1.0;
    uint64_t seed = 0;

    void validate() const;  // throws ConfigError
    bool operator==(const TrainConfig&) const = default;
};

// initial_lr until decay_start_epoch, then halved (decay_factor) every
// decay_every epochs: decays apply at epochs 8, 11, 14, ... under defaults.
double lr_at_epoch(int epoch, const TrainConfig& config);

// Mean over unmasked positions of -log softmax(logits)[target]; padded
// positions contribute exactly zero. logits rows correspond to flattened
// (batch, step) positions. Throws DataError when everything is masked.
double xe_loss(const Tensor& logits, const std::vector<int>& targets,
               const std::vector<uint8_t>& mask);

// Self-critical loss value: advantage = CIDEr(sampled) - CIDEr(greedy),
// loss = -advantage * sum(logprobs). The greedy branch is the baseline and
// carries no gradient.
double scst_loss(const TokenList& sampled_tokens, const std::vector<double>& sampled_logprobs,
                 const TokenList& greedy_tokens, const std::vector<TokenList>& references,
                 const NGramStats& stats);

// Decoupled weight decay Adam.
class AdamW {
public:
    AdamW(std::vector<ad::Parameter*> params, double weight_decay, double beta1 = 0.9,
          double beta2 = 0.999, double eps = 1e-8);
    void step(double lr);

private:
    std::vector<ad::Parameter*> params_;
    std::vector<Tensor> m_, v_;
    double weight_decay_, beta1_, beta2_, eps_;
    int t_ = 0;
};

// Scales gradients so the global norm is at most max_norm; returns the
// pre-clip norm.
double clip_gradients(const std::vector<ad::Parameter*>& params, double max_norm);

void save_checkpoint(const std::string& path, const ModelParams& params, const Vocabulary& vocab,
                     CaptionKind kind, int epoch);

struct LoadedModel {
    std::unique_ptr<ModelParams> params;
    Vocabulary vocab;
    CaptionKind kind = CaptionKind::Subject;
    int epoch = 0;
};

// expected_config, when given, must match the stored one exactly.
LoadedModel load_checkpoint(const std::string& path, const ModelConfig* expected_config = nullptr);

using LogFn = std::function<void(const std::string&)>;
// Return false to stop before num_epochs (convergence reached).
using EpochCallback = std::function<bool(int epoch, double mean_loss, ModelParams& params)>;

struct TrainResult {
    int epochs_run = 0;
    std::vector<double> epoch_losses;
    ModelConfig resolved_config;
    uint64_t vocab_hash = 0;
};

// Full optimization loop for one caption kind: cross-entropy phase, optional
// self-critical phase, per-epoch checkpoints "<kind>_epoch<e>.ckpt", vocab
// file and append-only train.log under out_dir. out_dir may be empty to skip
// all file output (in-memory runs).
TrainResult train_model(const Dataset& dataset, CaptionKind kind, ModelConfig model_config,
                        const TrainConfig& train_config, const std::string& out_dir,
                        const LogFn& log = {}, const EpochCallback& epoch_callback = {});

}  // namespace gebc
