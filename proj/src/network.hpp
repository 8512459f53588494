#pragma once

#include <deque>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "datamodel.hpp"
#include "features.hpp"
#include "proposals.hpp"

namespace gebc {

// Per-head 1-D deformable attention: K learned fractional offsets around a
// reference point, softmax-mixed interpolated values.
struct DeformAttnParams {
    ad::Parameter* value_w = nullptr;
    ad::Parameter* value_b = nullptr;
    ad::Parameter* offset_w = nullptr;  // query -> heads*points offsets (normalized time)
    ad::Parameter* offset_b = nullptr;
    ad::Parameter* weight_w = nullptr;  // query -> heads*points mixing logits
    ad::Parameter* weight_b = nullptr;
    ad::Parameter* out_w = nullptr;
    ad::Parameter* out_b = nullptr;
};

struct MhaParams {
    ad::Parameter* q_w = nullptr;
    ad::Parameter* q_b = nullptr;
    ad::Parameter* k_w = nullptr;
    ad::Parameter* k_b = nullptr;
    ad::Parameter* v_w = nullptr;
    ad::Parameter* v_b = nullptr;
    ad::Parameter* out_w = nullptr;
    ad::Parameter* out_b = nullptr;
};

struct LayerNormParams {
    ad::Parameter* gain = nullptr;
    ad::Parameter* bias = nullptr;
};

struct FfnParams {
    ad::Parameter* w1 = nullptr;
    ad::Parameter* b1 = nullptr;
    ad::Parameter* w2 = nullptr;
    ad::Parameter* b2 = nullptr;
};

struct EncoderLayerParams {
    LayerNormParams ln1;
    DeformAttnParams attn;
    LayerNormParams ln2;
    FfnParams ffn;
};

struct RegionLayerParams {
    LayerNormParams ln1;
    MhaParams cross;
    LayerNormParams ln2;
    FfnParams ffn;
};

struct ContextLayerParams {
    LayerNormParams ln1;
    MhaParams self_attn;
    LayerNormParams ln2;
    DeformAttnParams cross;
    LayerNormParams ln3;
    FfnParams ffn;
};

struct CaptionParams {
    ad::Parameter* word_emb = nullptr;  // V x d
    ad::Parameter* query_w = nullptr;   // 2d x d: concat(hidden, event) -> attention query
    ad::Parameter* query_b = nullptr;
    DeformAttnParams attn;
    ad::Parameter* lstm_wx = nullptr;  // 3d x 4d (gates i, f, g, o)
    ad::Parameter* lstm_wh = nullptr;  // d x 4d
    ad::Parameter* lstm_b = nullptr;   // 1 x 4d
    ad::Parameter* out_w = nullptr;    // d x V
    ad::Parameter* out_b = nullptr;    // 1 x V
};

// All trainable tensors, with a stable name registry used by checkpoints,
// the optimizer and the gradient check.
class ModelParams {
public:
    // Requires input_dim, region_dim and vocab_size to be resolved.
    explicit ModelParams(const ModelConfig& config);

    ModelConfig config;
    ad::Parameter* input_proj_w = nullptr;
    ad::Parameter* input_proj_b = nullptr;
    std::vector<EncoderLayerParams> encoder;
    ad::Parameter* proposal_w = nullptr;  // d x d projection of the box encoding
    ad::Parameter* proposal_b = nullptr;
    ad::Parameter* region_proj_w = nullptr;  // d_r x d
    ad::Parameter* region_proj_b = nullptr;
    std::vector<RegionLayerParams> region_decoder;
    std::vector<ContextLayerParams> context_decoder;
    CaptionParams caption;

    std::vector<ad::Parameter*>& all() { return registry_; }
    const std::vector<ad::Parameter*>& all() const { return registry_; }
    ad::Parameter* find(const std::string& name);
    void zero_grads();

    // Overwrites every parameter with uniform noise; offset predictors get
    // their own (smaller) scale so sampling stays interior. Test helper.
    void randomize(uint64_t seed, double weight_scale, double offset_scale);

private:
    std::deque<ad::Parameter> store_;
    std::vector<ad::Parameter*> registry_;
    ad::Parameter* add(const std::string& name, int rows, int cols);
    DeformAttnParams add_deform(const std::string& prefix, int dim, int heads, int points);
    MhaParams add_mha(const std::string& prefix, int dim);
    LayerNormParams add_ln(const std::string& prefix, int dim);
    FfnParams add_ffn(const std::string& prefix, int dim, int ffn_dim);
    void default_init();
};

// Event proposals for one caption kind.
struct ProposalBatch {
    Tensor embeddings;  // N x d
    std::vector<TimeBox> boxes;
    std::vector<double> reference_points;  // box centers, in [0, 1]
    CaptionKind kind = CaptionKind::Subject;
};

ProposalBatch embed_proposals(const std::vector<TimeBox>& boxes, const ModelParams& params,
                              CaptionKind kind);

// Single-query deformable attention on plain tensors (the inference path).
// out_weights, when given, receives the heads x points softmax weights.
Tensor deformable_attend(const Tensor& query, double reference_point, const Tensor& values,
                         const DeformAttnParams& params, int heads, int points,
                         Tensor* out_weights = nullptr);

// Batched graph version used by training and the encoder/decoders.
ad::Var deformable_attention(ad::Graph& g, ad::Var queries,
                             const std::vector<double>& reference_points, ad::Var values,
                             const DeformAttnParams& params, int heads, int points);

ad::Var multi_head_attention(ad::Graph& g, ad::Var queries, ad::Var keys_values,
                             const MhaParams& params, int heads,
                             const std::vector<uint8_t>* mask);

ad::Var ffn_forward(ad::Graph& g, ad::Var x, const FfnParams& params);

// Reference point of encoder position i is its own normalized location.
std::vector<double> encoder_reference_points(int length);

ad::Var encode_frames(ad::Graph& g, ModelParams& params, ad::Var frames_projected);

// Attention mask for proposals over flattened region tokens: token (clip j,
// slot r) is attendable from proposal i iff clip j overlaps box i and the
// slot is valid. Row-major N x (num_clips * max_regions).
std::vector<uint8_t> build_region_attention_mask(const std::vector<TimeBox>& boxes,
                                                 const std::vector<double>& clip_starts,
                                                 const std::vector<double>& clip_ends,
                                                 const std::vector<uint8_t>& valid,
                                                 int max_regions);

ad::Var decode_regions(ad::Graph& g, ModelParams& params, ad::Var proposals,
                       ad::Var region_tokens, const std::vector<uint8_t>& mask);

ad::Var decode_context(ad::Graph& g, ModelParams& params, ad::Var queries, ad::Var f_enc,
                       const std::vector<double>& reference_points);

struct GraphForward {
    ad::Var f_enc = nullptr;   // L x d
    ad::Var events = nullptr;  // N x d
    std::vector<TimeBox> boxes;
    std::vector<double> reference_points;
    int encoder_invocations = 0;
};

// project frames -> encode -> embed proposals -> region decoder -> context
// decoder. One encoder pass regardless of N.
GraphForward model_forward(ad::Graph& g, ModelParams& params, const VideoInputs& inputs,
                           CaptionKind kind);

}  // namespace gebc
