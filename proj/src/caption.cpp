#include "caption.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "io_util.hpp"

namespace gebc {

std::vector<std::string> tokenize(const std::string& text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (unsigned char c : text) {
        if (std::isalnum(c))
            cleaned.push_back(static_cast<char>(std::tolower(c)));
        else
            cleaned.push_back(' ');
    }
    std::vector<std::string> tokens;
    std::istringstream ss(cleaned);
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    return tokens;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus, int min_count) {
    std::map<std::string, int> counts;
    for (const std::string& text : corpus)
        for (const std::string& tok : tokenize(text)) ++counts[tok];
    if (counts.empty()) throw DataError("build_vocab: empty corpus");

    std::vector<std::pair<std::string, int>> entries(counts.begin(), counts.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary v;
    for (const auto& [tok, count] : entries)
        if (count >= min_count) v.tokens_.push_back(tok);
    if (v.tokens_.empty()) throw DataError("build_vocab: no token reaches min_count");
    v.rebuild_index();
    return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    v.rebuild_index();
    return v;
}

void Vocabulary::rebuild_index() {
    index_.clear();
    for (size_t i = 0; i < tokens_.size(); ++i)
        index_[tokens_[i]] = kNumSpecials + static_cast<int>(i);
}

int Vocabulary::id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
    static const std::string specials[kNumSpecials] = {"<pad>", "<bos>", "<end>", "<unk>"};
    if (id < kNumSpecials) return specials[id];
    return tokens_.at(static_cast<size_t>(id - kNumSpecials));
}

uint64_t Vocabulary::hash() const {
    uint64_t h = 14695981039346656037ull;
    for (const std::string& t : tokens_) {
        h ^= fnv1a64(t);
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
    std::vector<int> ids;
    for (const std::string& tok : tokenize(text)) ids.push_back(id(tok));
    return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (!out.empty()) out.push_back(' ');
        out += token(id);
    }
    return out;
}

void Vocabulary::save(const std::string& path) const {
    std::string body;
    for (const std::string& t : tokens_) {
        body += t;
        body.push_back('\n');
    }
    atomic_write_text(path, body);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary file '" + path + "'");
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) tokens.push_back(line);
    if (tokens.empty()) throw DataError("vocabulary file '" + path + "' is empty");
    return from_tokens(std::move(tokens));
}

DecoderState initial_decoder_state(int hidden_dim) {
    DecoderState s;
    s.hidden = Tensor(1, hidden_dim);
    s.cell = Tensor(1, hidden_dim);
    return s;
}

namespace {

// Plain LSTM cell shared by the inference steps. Gate order: i, f, g, o.
void lstm_cell(const ModelParams& params, const Tensor& x /*1 x 3d*/, Tensor& hidden,
               Tensor& cell) {
    const int d = params.config.hidden_dim;
    Tensor z = matmul(x, params.caption.lstm_wx->value);
    Tensor zh = matmul(hidden, params.caption.lstm_wh->value);
    for (int c = 0; c < 4 * d; ++c) z.at(0, c) += zh.at(0, c) + params.caption.lstm_b->value.at(0, c);
    for (int j = 0; j < d; ++j) {
        double ig = 1.0 / (1.0 + std::exp(-z.at(0, j)));
        double fg = 1.0 / (1.0 + std::exp(-z.at(0, d + j)));
        double gg = std::tanh(z.at(0, 2 * d + j));
        double og = 1.0 / (1.0 + std::exp(-z.at(0, 3 * d + j)));
        double cnew = fg * cell.at(0, j) + ig * gg;
        cell.at(0, j) = cnew;
        hidden.at(0, j) = og * std::tanh(cnew);
    }
}

}  // namespace

StepOutput caption_step(const ModelParams& params, const DecoderState& state, int prev_token,
                        const Tensor& event_embedding, const Tensor& f_enc,
                        double reference_point) {
    const ModelConfig& cfg = params.config;
    if (state.step >= cfg.max_caption_len)
        throw DataError("caption_step: step " + std::to_string(state.step) +
                        " exceeds max caption length " + std::to_string(cfg.max_caption_len));
    if (prev_token < 0 || prev_token >= cfg.vocab_size)
        throw DataError("caption_step: token id out of range");
    const int d = cfg.hidden_dim;

    // attention query from the running hidden state and the event embedding
    Tensor query_in(1, 2 * d);
    for (int c = 0; c < d; ++c) {
        query_in.at(0, c) = state.hidden.at(0, c);
        query_in.at(0, d + c) = event_embedding.at(0, c);
    }
    Tensor query = matmul(query_in, params.caption.query_w->value);
    for (int c = 0; c < d; ++c) query.at(0, c) += params.caption.query_b->value.at(0, c);

    Tensor context = deformable_attend(query, reference_point, f_enc, params.caption.attn,
                                       cfg.attention_heads, cfg.sampling_points);

    Tensor x(1, 3 * d);
    const double* word = params.caption.word_emb->value.row(prev_token);
    for (int c = 0; c < d; ++c) {
        x.at(0, c) = word[c];
        x.at(0, d + c) = context.at(0, c);
        x.at(0, 2 * d + c) = event_embedding.at(0, c);
    }

    StepOutput out;
    out.state = state;
    out.state.step = state.step + 1;
    lstm_cell(params, x, out.state.hidden, out.state.cell);

    out.logits = matmul(out.state.hidden, params.caption.out_w->value);
    for (int c = 0; c < cfg.vocab_size; ++c) out.logits.at(0, c) += params.caption.out_b->value.at(0, c);
    return out;
}

std::vector<int> greedy_decode(const ModelParams& params, const Tensor& event_embedding,
                               const Tensor& f_enc, double reference_point, int max_len) {
    std::vector<int> ids;
    DecoderState state = initial_decoder_state(params.config.hidden_dim);
    int prev = Vocabulary::kBos;
    while (static_cast<int>(ids.size()) < max_len) {
        StepOutput step = caption_step(params, state, prev, event_embedding, f_enc,
                                       reference_point);
        int best = 0;
        double best_v = step.logits.at(0, 0);
        for (int c = 1; c < step.logits.cols; ++c)
            if (step.logits.at(0, c) > best_v) {  // ties keep the lower id
                best_v = step.logits.at(0, c);
                best = c;
            }
        if (best == Vocabulary::kEnd) break;
        ids.push_back(best);
        prev = best;
        state = step.state;
    }
    return ids;
}

namespace {

std::vector<double> log_softmax_row(const Tensor& logits) {
    double mx = logits.at(0, 0);
    for (int c = 1; c < logits.cols; ++c) mx = std::max(mx, logits.at(0, c));
    double sum = 0.0;
    for (int c = 0; c < logits.cols; ++c) sum += std::exp(logits.at(0, c) - mx);
    double lse = mx + std::log(sum);
    std::vector<double> out(logits.cols);
    for (int c = 0; c < logits.cols; ++c) out[c] = logits.at(0, c) - lse;
    return out;
}

}  // namespace

SampledCaption sample_decode(const ModelParams& params, const Tensor& event_embedding,
                             const Tensor& f_enc, double reference_point, Rng& rng, int max_len) {
    SampledCaption out;
    DecoderState state = initial_decoder_state(params.config.hidden_dim);
    int prev = Vocabulary::kBos;
    while (static_cast<int>(out.ids.size()) < max_len) {
        StepOutput step = caption_step(params, state, prev, event_embedding, f_enc,
                                       reference_point);
        std::vector<double> logp = log_softmax_row(step.logits);
        double u = rng.uniform();
        double acc = 0.0;
        int chosen = step.logits.cols - 1;
        for (int c = 0; c < step.logits.cols; ++c) {
            acc += std::exp(logp[c]);
            if (u < acc) {
                chosen = c;
                break;
            }
        }
        out.logprobs.push_back(logp[chosen]);
        if (chosen == Vocabulary::kEnd) {
            out.ended_with_end = true;
            break;
        }
        out.ids.push_back(chosen);
        prev = chosen;
        state = step.state;
    }
    return out;
}

std::vector<int> make_target_ids(const Vocabulary& vocab, const std::string& caption,
                                 int max_len) {
    std::vector<int> ids = vocab.encode(caption);
    if (static_cast<int>(ids.size()) > max_len) ids.resize(static_cast<size_t>(max_len));
    ids.push_back(Vocabulary::kEnd);
    return ids;
}

ad::Var caption_xe_sum(ad::Graph& g, ModelParams& params, ad::Var events, ad::Var f_enc,
                       const std::vector<double>& reference_points,
                       const std::vector<std::vector<int>>& targets, int* token_count,
                       const std::vector<double>* row_weights) {
    const int n = events->rows();
    const int d = params.config.hidden_dim;
    if (static_cast<int>(targets.size()) != n)
        throw DataError("caption_xe_sum: one target sequence per boundary required");

    int max_steps = 0;
    for (const auto& t : targets) max_steps = std::max(max_steps, static_cast<int>(t.size()));
    if (token_count) *token_count = 0;

    ad::Var hidden = g.input(Tensor(n, d));
    ad::Var cell = g.input(Tensor(n, d));
    ad::Var total = g.input(Tensor(1, 1));
    CaptionParams& cp = params.caption;

    for (int t = 0; t < max_steps; ++t) {
        std::vector<int> prev_ids(n, Vocabulary::kPad);
        std::vector<int> step_targets(n, Vocabulary::kPad);
        std::vector<uint8_t> mask(n, 0);
        std::vector<double> weights(n, 1.0);
        for (int i = 0; i < n; ++i) {
            if (t < static_cast<int>(targets[i].size())) {
                mask[i] = 1;
                step_targets[i] = targets[i][static_cast<size_t>(t)];
                prev_ids[i] = t == 0 ? Vocabulary::kBos : targets[i][static_cast<size_t>(t - 1)];
                if (row_weights) weights[i] = (*row_weights)[i];
                if (token_count) ++*token_count;
            }
        }

        ad::Var query_in = ad::concat_cols(g, {hidden, events});
        ad::Var query = ad::add_row(g, ad::matmul(g, query_in, g.param(*cp.query_w)),
                                    g.param(*cp.query_b));
        ad::Var context = deformable_attention(g, query, reference_points, f_enc, cp.attn,
                                               params.config.attention_heads,
                                               params.config.sampling_points);
        ad::Var words = ad::select_rows(g, g.param(*cp.word_emb), prev_ids);
        ad::Var x = ad::concat_cols(g, {words, context, events});

        ad::Var z = ad::add_row(
            g, ad::add(g, ad::matmul(g, x, g.param(*cp.lstm_wx)),
                       ad::matmul(g, hidden, g.param(*cp.lstm_wh))),
            g.param(*cp.lstm_b));
        ad::Var gate_i = ad::sigmoid(g, ad::slice_cols(g, z, 0, d));
        ad::Var gate_f = ad::sigmoid(g, ad::slice_cols(g, z, d, 2 * d));
        ad::Var gate_g = ad::tanh_act(g, ad::slice_cols(g, z, 2 * d, 3 * d));
        ad::Var gate_o = ad::sigmoid(g, ad::slice_cols(g, z, 3 * d, 4 * d));
        cell = ad::add(g, ad::mul(g, gate_f, cell), ad::mul(g, gate_i, gate_g));
        hidden = ad::mul(g, gate_o, ad::tanh_act(g, cell));

        ad::Var logits = ad::add_row(g, ad::matmul(g, hidden, g.param(*cp.out_w)),
                                     g.param(*cp.out_b));
        ad::Var ce = ad::cross_entropy_sum(g, logits, step_targets, mask, weights);
        total = ad::add(g, total, ce);
    }
    return total;
}

}  // namespace gebc
