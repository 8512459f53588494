#include "network.hpp"

#include <cmath>

namespace gebc {

namespace {
constexpr double kLayerNormEps = 1e-5;
}

ad::Parameter* ModelParams::add(const std::string& name, int rows, int cols) {
    store_.emplace_back(name, rows, cols);
    registry_.push_back(&store_.back());
    return &store_.back();
}

LayerNormParams ModelParams::add_ln(const std::string& prefix, int dim) {
    return {add(prefix + ".gain", 1, dim), add(prefix + ".bias", 1, dim)};
}

DeformAttnParams ModelParams::add_deform(const std::string& prefix, int dim, int heads,
                                         int points) {
    DeformAttnParams p;
    p.value_w = add(prefix + ".value_w", dim, dim);
    p.value_b = add(prefix + ".value_b", 1, dim);
    p.offset_w = add(prefix + ".offset_w", dim, heads * points);
    p.offset_b = add(prefix + ".offset_b", 1, heads * points);
    p.weight_w = add(prefix + ".weight_w", dim, heads * points);
    p.weight_b = add(prefix + ".weight_b", 1, heads * points);
    p.out_w = add(prefix + ".out_w", dim, dim);
    p.out_b = add(prefix + ".out_b", 1, dim);
    return p;
}

MhaParams ModelParams::add_mha(const std::string& prefix, int dim) {
    MhaParams p;
    p.q_w = add(prefix + ".q_w", dim, dim);
    p.q_b = add(prefix + ".q_b", 1, dim);
    p.k_w = add(prefix + ".k_w", dim, dim);
    p.k_b = add(prefix + ".k_b", 1, dim);
    p.v_w = add(prefix + ".v_w", dim, dim);
    p.v_b = add(prefix + ".v_b", 1, dim);
    p.out_w = add(prefix + ".out_w", dim, dim);
    p.out_b = add(prefix + ".out_b", 1, dim);
    return p;
}

FfnParams ModelParams::add_ffn(const std::string& prefix, int dim, int ffn_dim) {
    FfnParams p;
    p.w1 = add(prefix + ".w1", dim, ffn_dim);
    p.b1 = add(prefix + ".b1", 1, ffn_dim);
    p.w2 = add(prefix + ".w2", ffn_dim, dim);
    p.b2 = add(prefix + ".b2", 1, dim);
    return p;
}

ModelParams::ModelParams(const ModelConfig& cfg) : config(cfg) {
    config.validate();
    if (config.input_dim <= 0 || config.region_dim <= 0 || config.vocab_size <= 0)
        throw ConfigError("model params: input_dim, region_dim and vocab_size must be resolved");
    const int d = config.hidden_dim;
    const int H = config.attention_heads;
    const int K = config.sampling_points;

    input_proj_w = add("input_proj.w", config.input_dim, d);
    input_proj_b = add("input_proj.b", 1, d);
    for (int l = 0; l < config.encoder_layers; ++l) {
        std::string p = "encoder." + std::to_string(l);
        EncoderLayerParams layer;
        layer.ln1 = add_ln(p + ".ln1", d);
        layer.attn = add_deform(p + ".attn", d, H, K);
        layer.ln2 = add_ln(p + ".ln2", d);
        layer.ffn = add_ffn(p + ".ffn", d, config.ffn_dim);
        encoder.push_back(layer);
    }
    proposal_w = add("proposal.w", d, d);
    proposal_b = add("proposal.b", 1, d);
    region_proj_w = add("region_proj.w", config.region_dim, d);
    region_proj_b = add("region_proj.b", 1, d);
    for (int l = 0; l < config.region_decoder_layers; ++l) {
        std::string p = "region_decoder." + std::to_string(l);
        RegionLayerParams layer;
        layer.ln1 = add_ln(p + ".ln1", d);
        layer.cross = add_mha(p + ".cross", d);
        layer.ln2 = add_ln(p + ".ln2", d);
        layer.ffn = add_ffn(p + ".ffn", d, config.ffn_dim);
        region_decoder.push_back(layer);
    }
    for (int l = 0; l < config.frame_decoder_layers; ++l) {
        std::string p = "context_decoder." + std::to_string(l);
        ContextLayerParams layer;
        layer.ln1 = add_ln(p + ".ln1", d);
        layer.self_attn = add_mha(p + ".self", d);
        layer.ln2 = add_ln(p + ".ln2", d);
        layer.cross = add_deform(p + ".cross", d, H, K);
        layer.ln3 = add_ln(p + ".ln3", d);
        layer.ffn = add_ffn(p + ".ffn", d, config.ffn_dim);
        context_decoder.push_back(layer);
    }
    caption.word_emb = add("caption.word_emb", config.vocab_size, d);
    caption.query_w = add("caption.query_w", 2 * d, d);
    caption.query_b = add("caption.query_b", 1, d);
    caption.attn = add_deform("caption.attn", d, H, K);
    caption.lstm_wx = add("caption.lstm_wx", 3 * d, 4 * d);
    caption.lstm_wh = add("caption.lstm_wh", d, 4 * d);
    caption.lstm_b = add("caption.lstm_b", 1, 4 * d);
    caption.out_w = add("caption.out_w", d, config.vocab_size);
    caption.out_b = add("caption.out_b", 1, config.vocab_size);

    default_init();
}

void ModelParams::default_init() {
    Rng rng(config.seed);
    for (ad::Parameter* p : registry_) {
        const std::string& n = p->name;
        bool is_gain = n.ends_with(".gain");
        bool is_bias = n.ends_with(".bias") || n.ends_with("_b") || n.ends_with(".b") ||
                       n.ends_with(".b1") || n.ends_with(".b2") || n.ends_with(".q_b") ||
                       n.ends_with(".k_b") || n.ends_with(".v_b");
        bool is_offset = n.find("offset") != std::string::npos;
        bool is_point_weight = n.find("weight_w") != std::string::npos ||
                               n.find("weight_b") != std::string::npos;
        if (is_gain) {
            p->value.fill(1.0);
        } else if (is_offset || is_point_weight) {
            // zero offsets sample at the reference point; zero logits give a
            // uniform mix over the K points
            p->value.fill(0.0);
        } else if (is_bias) {
            p->value.fill(0.0);
        } else {
            double a = std::sqrt(6.0 / (p->value.rows + p->value.cols));
            for (double& v : p->value.data) v = rng.uniform(-a, a);
        }
    }
    // forget-gate bias starts open
    const int d = config.hidden_dim;
    ad::Parameter* lb = caption.lstm_b;
    for (int c = d; c < 2 * d; ++c) lb->value.at(0, c) = 1.0;
}

ad::Parameter* ModelParams::find(const std::string& name) {
    for (ad::Parameter* p : registry_)
        if (p->name == name) return p;
    return nullptr;
}

void ModelParams::zero_grads() {
    for (ad::Parameter* p : registry_) p->zero_grad();
}

void ModelParams::randomize(uint64_t seed, double weight_scale, double offset_scale) {
    Rng rng(seed);
    for (ad::Parameter* p : registry_) {
        double scale = p->name.find("offset") != std::string::npos ? offset_scale : weight_scale;
        for (double& v : p->value.data) v = rng.uniform(-scale, scale);
    }
}

ProposalBatch embed_proposals(const std::vector<TimeBox>& boxes, const ModelParams& params,
                              CaptionKind kind) {
    ProposalBatch batch;
    batch.kind = kind;
    batch.boxes = boxes;
    for (const TimeBox& b : boxes) batch.reference_points.push_back(b.reference_point());
    Tensor encoded = proposal_position_encoding(boxes, params.config.hidden_dim);
    batch.embeddings = matmul(encoded, params.proposal_w->value);
    for (int r = 0; r < batch.embeddings.rows; ++r)
        for (int c = 0; c < batch.embeddings.cols; ++c)
            batch.embeddings.at(r, c) += params.proposal_b->value.at(0, c);
    return batch;
}

Tensor deformable_attend(const Tensor& query, double reference_point, const Tensor& values,
                         const DeformAttnParams& params, int heads, int points,
                         Tensor* out_weights) {
    if (values.rows < 1) throw DataError("deformable_attend: empty values");
    const int d = values.cols;
    const int hd = d / heads;
    const int L = values.rows;

    // offsets and mixing logits predicted from the query
    Tensor offsets = matmul(query, params.offset_w->value);
    Tensor wlogits = matmul(query, params.weight_w->value);
    for (int c = 0; c < heads * points; ++c) {
        offsets.at(0, c) += params.offset_b->value.at(0, c);
        wlogits.at(0, c) += params.weight_b->value.at(0, c);
    }

    Tensor projected = matmul(values, params.value_w->value);
    for (int r = 0; r < L; ++r)
        for (int c = 0; c < d; ++c) projected.at(r, c) += params.value_b->value.at(0, c);

    if (out_weights) *out_weights = Tensor(heads, points);
    Tensor mixed(1, d);
    for (int h = 0; h < heads; ++h) {
        // softmax over the K points of this head
        double mx = wlogits.at(0, h * points);
        for (int k = 1; k < points; ++k) mx = std::max(mx, wlogits.at(0, h * points + k));
        std::vector<double> w(points);
        double sum = 0.0;
        for (int k = 0; k < points; ++k) {
            w[k] = std::exp(wlogits.at(0, h * points + k) - mx);
            sum += w[k];
        }
        for (int k = 0; k < points; ++k) w[k] /= sum;
        if (out_weights)
            for (int k = 0; k < points; ++k) out_weights->at(h, k) = w[k];
        for (int k = 0; k < points; ++k) {
            double s = (reference_point + offsets.at(0, h * points + k)) * (L - 1);
            if (!(s >= 0.0)) s = 0.0;  // also catches NaN
            if (s > L - 1) s = static_cast<double>(L - 1);
            int i0 = static_cast<int>(std::floor(s));
            if (i0 > L - 1) i0 = L - 1;
            int i1 = std::min(i0 + 1, L - 1);
            double f = s - i0;
            const double* v0 = projected.row(i0) + h * hd;
            const double* v1 = projected.row(i1) + h * hd;
            double* dst = mixed.row(0) + h * hd;
            for (int j = 0; j < hd; ++j) dst[j] += w[k] * ((1.0 - f) * v0[j] + f * v1[j]);
        }
    }
    Tensor out = matmul(mixed, params.out_w->value);
    for (int c = 0; c < d; ++c) out.at(0, c) += params.out_b->value.at(0, c);
    return out;
}

ad::Var deformable_attention(ad::Graph& g, ad::Var queries,
                             const std::vector<double>& reference_points, ad::Var values,
                             const DeformAttnParams& params, int heads, int points) {
    if (values->rows() < 1) throw DataError("deformable_attention: empty values");
    const int Q = queries->rows();
    const int L = values->rows();

    ad::Var offsets = ad::add_row(g, ad::matmul(g, queries, g.param(*params.offset_w)),
                                  g.param(*params.offset_b));
    Tensor refs(Q, heads * points);
    for (int q = 0; q < Q; ++q)
        for (int c = 0; c < heads * points; ++c) refs.at(q, c) = reference_points[q];
    ad::Var pos01 = ad::add(g, offsets, g.input(std::move(refs)));
    ad::Var pos = ad::clamp(g, ad::scale(g, pos01, static_cast<double>(L - 1)), 0.0,
                            static_cast<double>(L - 1));

    ad::Var projected =
        ad::add_row(g, ad::matmul(g, values, g.param(*params.value_w)), g.param(*params.value_b));
    ad::Var sampled = ad::deform_sample(g, projected, pos, heads, points);
    ad::Var wlogits = ad::add_row(g, ad::matmul(g, queries, g.param(*params.weight_w)),
                                  g.param(*params.weight_b));
    ad::Var weights = ad::softmax_groups(g, wlogits, points);
    ad::Var mixed = ad::point_mix(g, sampled, weights, heads, points);
    return ad::add_row(g, ad::matmul(g, mixed, g.param(*params.out_w)), g.param(*params.out_b));
}

ad::Var multi_head_attention(ad::Graph& g, ad::Var queries, ad::Var keys_values,
                             const MhaParams& params, int heads,
                             const std::vector<uint8_t>* mask) {
    const int d = queries->cols();
    const int hd = d / heads;
    ad::Var q = ad::add_row(g, ad::matmul(g, queries, g.param(*params.q_w)), g.param(*params.q_b));
    ad::Var k =
        ad::add_row(g, ad::matmul(g, keys_values, g.param(*params.k_w)), g.param(*params.k_b));
    ad::Var v =
        ad::add_row(g, ad::matmul(g, keys_values, g.param(*params.v_w)), g.param(*params.v_b));
    std::vector<ad::Var> head_outputs;
    for (int h = 0; h < heads; ++h) {
        ad::Var qh = ad::slice_cols(g, q, h * hd, (h + 1) * hd);
        ad::Var kh = ad::slice_cols(g, k, h * hd, (h + 1) * hd);
        ad::Var vh = ad::slice_cols(g, v, h * hd, (h + 1) * hd);
        ad::Var scores = ad::scale(g, ad::matmul_nt(g, qh, kh), 1.0 / std::sqrt(hd));
        ad::Var attn = mask ? ad::masked_softmax_rows(g, scores, *mask)
                            : ad::softmax_groups(g, scores, scores->cols());
        head_outputs.push_back(ad::matmul(g, attn, vh));
    }
    ad::Var merged = ad::concat_cols(g, head_outputs);
    return ad::add_row(g, ad::matmul(g, merged, g.param(*params.out_w)), g.param(*params.out_b));
}

ad::Var ffn_forward(ad::Graph& g, ad::Var x, const FfnParams& params) {
    ad::Var h = ad::relu(
        g, ad::add_row(g, ad::matmul(g, x, g.param(*params.w1)), g.param(*params.b1)));
    return ad::add_row(g, ad::matmul(g, h, g.param(*params.w2)), g.param(*params.b2));
}

std::vector<double> encoder_reference_points(int length) {
    std::vector<double> refs(length, 0.0);
    for (int i = 0; i < length; ++i) refs[i] = length > 1 ? static_cast<double>(i) / (length - 1) : 0.0;
    return refs;
}

namespace {

ad::Var pre_norm(ad::Graph& g, ad::Var x, const LayerNormParams& ln) {
    return ad::layer_norm(g, x, g.param(*ln.gain), g.param(*ln.bias), kLayerNormEps);
}

}  // namespace

ad::Var encode_frames(ad::Graph& g, ModelParams& params, ad::Var frames_projected) {
    if (!frames_projected->v().all_finite())
        throw NumericError("encode_frames: non-finite input features");
    const int L = frames_projected->rows();
    std::vector<double> refs = encoder_reference_points(L);
    ad::Var x = frames_projected;
    for (EncoderLayerParams& layer : params.encoder) {
        ad::Var h = pre_norm(g, x, layer.ln1);
        ad::Var attn = deformable_attention(g, h, refs, h, layer.attn,
                                            params.config.attention_heads,
                                            params.config.sampling_points);
        x = ad::add(g, x, attn);
        ad::Var h2 = pre_norm(g, x, layer.ln2);
        x = ad::add(g, x, ffn_forward(g, h2, layer.ffn));
    }
    return x;
}

std::vector<uint8_t> build_region_attention_mask(const std::vector<TimeBox>& boxes,
                                                 const std::vector<double>& clip_starts,
                                                 const std::vector<double>& clip_ends,
                                                 const std::vector<uint8_t>& valid,
                                                 int max_regions) {
    const int num_clips = static_cast<int>(clip_starts.size());
    const int tokens = num_clips * max_regions;
    std::vector<uint8_t> mask(boxes.size() * static_cast<size_t>(tokens), 0);
    for (size_t i = 0; i < boxes.size(); ++i) {
        for (int j = 0; j < num_clips; ++j) {
            bool overlaps = boxes[i].start < clip_ends[j] && clip_starts[j] < boxes[i].end;
            if (!overlaps) continue;
            for (int r = 0; r < max_regions; ++r) {
                size_t t = static_cast<size_t>(j) * max_regions + r;
                if (valid[t]) mask[i * tokens + t] = 1;
            }
        }
    }
    return mask;
}

ad::Var decode_regions(ad::Graph& g, ModelParams& params, ad::Var proposals,
                       ad::Var region_tokens, const std::vector<uint8_t>& mask) {
    const int n = proposals->rows();
    const int tokens = region_tokens->rows();
    std::vector<uint8_t> active(n, 0);
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < tokens; ++t)
            if (mask[static_cast<size_t>(i) * tokens + t]) {
                active[i] = 1;
                break;
            }

    ad::Var x = proposals;
    for (RegionLayerParams& layer : params.region_decoder) {
        ad::Var h = pre_norm(g, x, layer.ln1);
        ad::Var attn = multi_head_attention(g, h, region_tokens, layer.cross,
                                            params.config.attention_heads, &mask);
        ad::Var after_attn = ad::add(g, x, attn);
        ad::Var h2 = pre_norm(g, after_attn, layer.ln2);
        ad::Var after_ffn = ad::add(g, after_attn, ffn_forward(g, h2, layer.ffn));
        // proposals with no attendable region token pass through unchanged
        x = ad::blend_rows(g, after_ffn, x, active);
    }
    return x;
}

ad::Var decode_context(ad::Graph& g, ModelParams& params, ad::Var queries, ad::Var f_enc,
                       const std::vector<double>& reference_points) {
    ad::Var x = queries;
    for (ContextLayerParams& layer : params.context_decoder) {
        ad::Var h = pre_norm(g, x, layer.ln1);
        x = ad::add(g, x,
                    multi_head_attention(g, h, h, layer.self_attn,
                                         params.config.attention_heads, nullptr));
        ad::Var h2 = pre_norm(g, x, layer.ln2);
        x = ad::add(g, x,
                    deformable_attention(g, h2, reference_points, f_enc, layer.cross,
                                         params.config.attention_heads,
                                         params.config.sampling_points));
        ad::Var h3 = pre_norm(g, x, layer.ln3);
        x = ad::add(g, x, ffn_forward(g, h3, layer.ffn));
    }
    if (!x->v().all_finite()) throw NumericError("decode_context: non-finite activations");
    return x;
}

GraphForward model_forward(ad::Graph& g, ModelParams& params, const VideoInputs& inputs,
                           CaptionKind kind) {
    GraphForward out;
    ad::Var frames = g.input_ref(&inputs.frames.features);
    ad::Var projected = ad::add_row(g, ad::matmul(g, frames, g.param(*params.input_proj_w)),
                                    g.param(*params.input_proj_b));
    out.f_enc = encode_frames(g, params, projected);
    out.encoder_invocations = 1;

    out.boxes = make_time_boxes(inputs.boundaries, inputs.duration, kind);
    for (const TimeBox& b : out.boxes) out.reference_points.push_back(b.reference_point());
    Tensor encoded = proposal_position_encoding(out.boxes, params.config.hidden_dim);
    ad::Var proposals = ad::add_row(g, ad::matmul(g, g.input(std::move(encoded)),
                                                  g.param(*params.proposal_w)),
                                    g.param(*params.proposal_b));

    ad::Var region_tokens =
        ad::add_row(g, ad::matmul(g, g.input_ref(&inputs.regions.features),
                                  g.param(*params.region_proj_w)),
                    g.param(*params.region_proj_b));
    std::vector<uint8_t> mask =
        build_region_attention_mask(out.boxes, inputs.clip_starts, inputs.clip_ends,
                                    inputs.regions.valid, inputs.regions.max_regions);
    ad::Var region_decoded = decode_regions(g, params, proposals, region_tokens, mask);
    out.events = decode_context(g, params, region_decoded, out.f_enc, out.reference_points);
    return out;
}

}  // namespace gebc
