#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "network.hpp"

namespace gebc {

// Token <-> id bijection with fixed special ids.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEnd = 2;
    static constexpr int kUnk = 3;
    static constexpr int kNumSpecials = 4;

    // Tokens with count >= min_count get ids in frequency-then-lexicographic
    // order after the specials. Throws DataError on an empty corpus.
    static Vocabulary build(const std::vector<std::string>& corpus, int min_count = 1);

    int size() const { return kNumSpecials + static_cast<int>(tokens_.size()); }
    int id(const std::string& token) const;  // kUnk when unknown
    const std::string& token(int id) const;
    uint64_t hash() const;

    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;

    void save(const std::string& path) const;  // one token per line, line = id - 4
    static Vocabulary load(const std::string& path);
    const std::vector<std::string>& content_tokens() const { return tokens_; }
    static Vocabulary from_tokens(std::vector<std::string> tokens);

private:
    std::vector<std::string> tokens_;  // content tokens; index = id - kNumSpecials
    std::unordered_map<std::string, int> index_;
    void rebuild_index();
};

// Lowercase, punctuation to spaces, whitespace split.
std::vector<std::string> tokenize(const std::string& text);

struct DecoderState {
    Tensor hidden;  // 1 x d
    Tensor cell;    // 1 x d
    int step = 0;
};

DecoderState initial_decoder_state(int hidden_dim);

struct StepOutput {
    DecoderState state;
    Tensor logits;  // 1 x V
};

// One LSTM-DSA step: deformable context from the encoded frames, LSTM update,
// vocabulary logits. Throws DataError once state.step reaches max_caption_len.
StepOutput caption_step(const ModelParams& params, const DecoderState& state, int prev_token,
                        const Tensor& event_embedding, const Tensor& f_enc,
                        double reference_point);

// Greedy argmax decoding (ties break toward the lower id). The returned ids
// exclude <bos>/<end> and never exceed max_len tokens.
std::vector<int> greedy_decode(const ModelParams& params, const Tensor& event_embedding,
                               const Tensor& f_enc, double reference_point, int max_len);

struct SampledCaption {
    std::vector<int> ids;             // excludes <bos>/<end>
    std::vector<double> logprobs;     // one per sampled step, including the <end> step
    bool ended_with_end = false;
};

SampledCaption sample_decode(const ModelParams& params, const Tensor& event_embedding,
                             const Tensor& f_enc, double reference_point, Rng& rng, int max_len);

// Teacher-forced caption loss over all boundaries of one video, built on the
// graph so gradients flow back through the whole network. targets hold the
// content ids terminated by <end>; row_weights, when given, scale each
// boundary's contribution (used by self-critical training). Returns the sum
// of per-token negative log-likelihoods; token_count receives the number of
// supervised positions.
ad::Var caption_xe_sum(ad::Graph& g, ModelParams& params, ad::Var events, ad::Var f_enc,
                       const std::vector<double>& reference_points,
                       const std::vector<std::vector<int>>& targets, int* token_count,
                       const std::vector<double>* row_weights = nullptr);

// Caps content tokens at max_len and appends <end>.
std::vector<int> make_target_ids(const Vocabulary& vocab, const std::string& caption,
                                 int max_len);

}  // namespace gebc
