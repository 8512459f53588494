#include "autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace gebc::ad {

namespace {

void check(bool cond, const char* msg) {
    if (!cond) throw std::logic_error(msg);
}

// Adds delta into the parent's gradient buffer, allocating lazily. No-op for
// nodes that do not need gradients.
void accum(Node* parent, const Tensor& delta) {
    if (!parent->needs_grad) return;
    Tensor& g = Graph::grad_buf(parent);
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += delta.data[i];
}

}  // namespace

Node* Graph::make(int rows, int cols, bool needs_grad) {
    auto node = std::make_unique<Node>();
    node->owned = Tensor(rows, cols);
    node->val = &node->owned;
    node->needs_grad = needs_grad && grad_enabled_;
    Node* raw = node.get();
    nodes_.push_back(std::move(node));
    return raw;
}

Tensor& Graph::grad_buf(Node* n) {
    if (n->grad.rows != n->val->rows || n->grad.cols != n->val->cols)
        n->grad = Tensor(n->val->rows, n->val->cols);
    return n->grad;
}

Var Graph::input(Tensor t) {
    auto node = std::make_unique<Node>();
    node->owned = std::move(t);
    node->val = &node->owned;
    node->needs_grad = false;
    Node* raw = node.get();
    nodes_.push_back(std::move(node));
    return raw;
}

Var Graph::input_ref(const Tensor* t) {
    auto node = std::make_unique<Node>();
    node->val = t;
    node->needs_grad = false;
    Node* raw = node.get();
    nodes_.push_back(std::move(node));
    return raw;
}

Var Graph::param(Parameter& p) {
    auto node = std::make_unique<Node>();
    node->val = &p.value;
    node->needs_grad = grad_enabled_;
    Node* raw = node.get();
    if (grad_enabled_) {
        Parameter* pp = &p;
        raw->back = [raw, pp]() {
            for (size_t i = 0; i < pp->grad.data.size(); ++i)
                pp->grad.data[i] += raw->grad.data[i];
        };
    }
    nodes_.push_back(std::move(node));
    return raw;
}

void Graph::backward(Var loss, double seed) {
    check(grad_enabled_, "backward() on a no-grad graph");
    check(loss->rows() == 1 && loss->cols() == 1, "backward: loss must be 1x1");
    grad_buf(loss).data[0] += seed;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node* n = it->get();
        if (n->back && n->grad.rows > 0) n->back();
    }
}

Var matmul(Graph& g, Var a, Var b) {
    check(a->cols() == b->rows(), "matmul: shape mismatch");
    bool ng = a->needs_grad || b->needs_grad;
    Node* out = g.make(a->rows(), b->cols(), ng);
    gemm(a->v(), false, b->v(), false, out->owned, false);
    if (ng)
        out->back = [out, a, b]() {
            if (a->needs_grad) gemm(out->grad, false, b->v(), true, Graph::grad_buf(a), true);
            if (b->needs_grad) gemm(a->v(), true, out->grad, false, Graph::grad_buf(b), true);
        };
    return out;
}

Var matmul_nt(Graph& g, Var a, Var b) {
    check(a->cols() == b->cols(), "matmul_nt: shape mismatch");
    bool ng = a->needs_grad || b->needs_grad;
    Node* out = g.make(a->rows(), b->rows(), ng);
    gemm(a->v(), false, b->v(), true, out->owned, false);
    if (ng)
        out->back = [out, a, b]() {
            if (a->needs_grad) gemm(out->grad, false, b->v(), false, Graph::grad_buf(a), true);
            if (b->needs_grad) gemm(out->grad, true, a->v(), false, Graph::grad_buf(b), true);
        };
    return out;
}

Var add(Graph& g, Var a, Var b) {
    check(a->v().same_shape(b->v()), "add: shape mismatch");
    bool ng = a->needs_grad || b->needs_grad;
    Node* out = g.make(a->rows(), a->cols(), ng);
    for (size_t i = 0; i < out->owned.data.size(); ++i)
        out->owned.data[i] = a->v().data[i] + b->v().data[i];
    if (ng)
        out->back = [out, a, b]() {
            accum(a, out->grad);
            accum(b, out->grad);
        };
    return out;
}

Var add_row(Graph& g, Var a, Var row) {
    check(row->rows() == 1 && row->cols() == a->cols(), "add_row: shape mismatch");
    bool ng = a->needs_grad || row->needs_grad;
    Node* out = g.make(a->rows(), a->cols(), ng);
    const double* rv = row->v().row(0);
    for (int r = 0; r < a->rows(); ++r) {
        const double* src = a->v().row(r);
        double* dst = out->owned.row(r);
        for (int c = 0; c < a->cols(); ++c) dst[c] = src[c] + rv[c];
    }
    if (ng)
        out->back = [out, a, row]() {
            accum(a, out->grad);
            if (row->needs_grad) {
                Tensor& rg = Graph::grad_buf(row);
                for (int r = 0; r < out->grad.rows; ++r) {
                    const double* gr = out->grad.row(r);
                    for (int c = 0; c < out->grad.cols; ++c) rg.data[c] += gr[c];
                }
            }
        };
    return out;
}

Var scale(Graph& g, Var a, double s) {
    Node* out = g.make(a->rows(), a->cols(), a->needs_grad);
    for (size_t i = 0; i < out->owned.data.size(); ++i) out->owned.data[i] = s * a->v().data[i];
    if (out->needs_grad)
        out->back = [out, a, s]() {
            Tensor& ag = Graph::grad_buf(a);
            for (size_t i = 0; i < ag.data.size(); ++i) ag.data[i] += s * out->grad.data[i];
        };
    return out;
}

Var mul(Graph& g, Var a, Var b) {
    check(a->v().same_shape(b->v()), "mul: shape mismatch");
    bool ng = a->needs_grad || b->needs_grad;
    Node* out = g.make(a->rows(), a->cols(), ng);
    for (size_t i = 0; i < out->owned.data.size(); ++i)
        out->owned.data[i] = a->v().data[i] * b->v().data[i];
    if (ng)
        out->back = [out, a, b]() {
            if (a->needs_grad) {
                Tensor& ag = Graph::grad_buf(a);
                for (size_t i = 0; i < ag.data.size(); ++i)
                    ag.data[i] += out->grad.data[i] * b->v().data[i];
            }
            if (b->needs_grad) {
                Tensor& bg = Graph::grad_buf(b);
                for (size_t i = 0; i < bg.data.size(); ++i)
                    bg.data[i] += out->grad.data[i] * a->v().data[i];
            }
        };
    return out;
}

Var relu(Graph& g, Var a) {
    Node* out = g.make(a->rows(), a->cols(), a->needs_grad);
    for (size_t i = 0; i < out->owned.data.size(); ++i)
        out->owned.data[i] = a->v().data[i] > 0.0 ? a->v().data[i] : 0.0;
    if (out->needs_grad)
        out->back = [out, a]() {
            Tensor& ag = Graph::grad_buf(a);
            for (size_t i = 0; i < ag.data.size(); ++i)
                if (a->v().data[i] > 0.0) ag.data[i] += out->grad.data[i];
        };
    return out;
}

Var sigmoid(Graph& g, Var a) {
    Node* out = g.make(a->rows(), a->cols(), a->needs_grad);
    for (size_t i = 0; i < out->owned.data.size(); ++i)
        out->owned.data[i] = 1.0 / (1.0 + std::exp(-a->v().data[i]));
    if (out->needs_grad)
        out->back = [out, a]() {
            Tensor& ag = Graph::grad_buf(a);
            for (size_t i = 0; i < ag.data.size(); ++i) {
                double s = out->owned.data[i];
                ag.data[i] += out->grad.data[i] * s * (1.0 - s);
            }
        };
    return out;
}

Var tanh_act(Graph& g, Var a) {
    Node* out = g.make(a->rows(), a->cols(), a->needs_grad);
    for (size_t i = 0; i < out->owned.data.size(); ++i)
        out->owned.data[i] = std::tanh(a->v().data[i]);
    if (out->needs_grad)
        out->back = [out, a]() {
            Tensor& ag = Graph::grad_buf(a);
            for (size_t i = 0; i < ag.data.size(); ++i) {
                double t = out->owned.data[i];
                ag.data[i] += out->grad.data[i] * (1.0 - t * t);
            }
        };
    return out;
}

Var clamp(Graph& g, Var a, double lo, double hi) {
    Node* out = g.make(a->rows(), a->cols(), a->needs_grad);
    for (size_t i = 0; i < out->owned.data.size(); ++i) {
        double v = a->v().data[i];
        out->owned.data[i] = v < lo ? lo : (v > hi ? hi : v);
    }
    if (out->needs_grad)
        out->back = [out, a, lo, hi]() {
            Tensor& ag = Graph::grad_buf(a);
            for (size_t i = 0; i < ag.data.size(); ++i) {
                double v = a->v().data[i];
                if (v > lo && v < hi) ag.data[i] += out->grad.data[i];
            }
        };
    return out;
}

Var concat_cols(Graph& g, const std::vector<Var>& parts) {
    check(!parts.empty(), "concat_cols: empty");
    int rows = parts[0]->rows();
    int cols = 0;
    bool ng = false;
    for (Var p : parts) {
        check(p->rows() == rows, "concat_cols: row mismatch");
        cols += p->cols();
        ng = ng || p->needs_grad;
    }
    Node* out = g.make(rows, cols, ng);
    int off = 0;
    for (Var p : parts) {
        for (int r = 0; r < rows; ++r) {
            const double* src = p->v().row(r);
            double* dst = out->owned.row(r) + off;
            for (int c = 0; c < p->cols(); ++c) dst[c] = src[c];
        }
        off += p->cols();
    }
    if (ng) {
        std::vector<Var> ps = parts;
        out->back = [out, ps]() {
            int off2 = 0;
            for (Var p : ps) {
                if (p->needs_grad) {
                    Tensor& pg = Graph::grad_buf(p);
                    for (int r = 0; r < pg.rows; ++r) {
                        const double* src = out->grad.row(r) + off2;
                        double* dst = pg.row(r);
                        for (int c = 0; c < pg.cols; ++c) dst[c] += src[c];
                    }
                }
                off2 += p->cols();
            }
        };
    }
    return out;
}

Var slice_cols(Graph& g, Var a, int c0, int c1) {
    check(0 <= c0 && c0 < c1 && c1 <= a->cols(), "slice_cols: bad range");
    Node* out = g.make(a->rows(), c1 - c0, a->needs_grad);
    for (int r = 0; r < a->rows(); ++r) {
        const double* src = a->v().row(r) + c0;
        double* dst = out->owned.row(r);
        for (int c = 0; c < c1 - c0; ++c) dst[c] = src[c];
    }
    if (out->needs_grad)
        out->back = [out, a, c0]() {
            Tensor& ag = Graph::grad_buf(a);
            for (int r = 0; r < out->grad.rows; ++r) {
                const double* src = out->grad.row(r);
                double* dst = ag.row(r) + c0;
                for (int c = 0; c < out->grad.cols; ++c) dst[c] += src[c];
            }
        };
    return out;
}

Var select_rows(Graph& g, Var table, std::vector<int> ids) {
    for (int id : ids) check(0 <= id && id < table->rows(), "select_rows: id out of range");
    Node* out = g.make(static_cast<int>(ids.size()), table->cols(), table->needs_grad);
    for (size_t r = 0; r < ids.size(); ++r) {
        const double* src = table->v().row(ids[r]);
        double* dst = out->owned.row(static_cast<int>(r));
        for (int c = 0; c < table->cols(); ++c) dst[c] = src[c];
    }
    if (out->needs_grad) {
        out->back = [out, table, ids = std::move(ids)]() {
            Tensor& tg = Graph::grad_buf(table);
            for (size_t r = 0; r < ids.size(); ++r) {
                const double* src = out->grad.row(static_cast<int>(r));
                double* dst = tg.row(ids[r]);
                for (int c = 0; c < out->grad.cols; ++c) dst[c] += src[c];
            }
        };
    }
    return out;
}

namespace {

// Shared layer-norm kernel; gain/bias may be null (plain normalization).
Var layer_norm_impl(Graph& g, Var x, Var gain, Var bias, double eps) {
    const int R = x->rows(), C = x->cols();
    bool ng = x->needs_grad || (gain && gain->needs_grad) || (bias && bias->needs_grad);
    Node* out = g.make(R, C, ng);
    // Cache normalized values and inverse stds for the backward pass.
    auto xhat = std::make_shared<Tensor>(R, C);
    auto inv_std = std::make_shared<std::vector<double>>(R);
    for (int r = 0; r < R; ++r) {
        const double* xr = x->v().row(r);
        double mean = 0.0;
        for (int c = 0; c < C; ++c) mean += xr[c];
        mean /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) var += (xr[c] - mean) * (xr[c] - mean);
        var /= C;
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        double* hr = xhat->row(r);
        double* or_ = out->owned.row(r);
        for (int c = 0; c < C; ++c) {
            hr[c] = (xr[c] - mean) * is;
            or_[c] = gain ? gain->v().data[c] * hr[c] + bias->v().data[c] : hr[c];
        }
    }
    if (ng)
        out->back = [out, x, gain, bias, xhat, inv_std]() {
            const int R2 = out->grad.rows, C2 = out->grad.cols;
            for (int r = 0; r < R2; ++r) {
                const double* go = out->grad.row(r);
                const double* hr = xhat->row(r);
                if (gain && gain->needs_grad) {
                    Tensor& gg = Graph::grad_buf(gain);
                    for (int c = 0; c < C2; ++c) gg.data[c] += go[c] * hr[c];
                }
                if (bias && bias->needs_grad) {
                    Tensor& bg = Graph::grad_buf(bias);
                    for (int c = 0; c < C2; ++c) bg.data[c] += go[c];
                }
                if (x->needs_grad) {
                    Tensor& xg = Graph::grad_buf(x);
                    double* xgr = xg.row(r);
                    // dxhat = go * gain
                    double mean_d = 0.0, mean_dh = 0.0;
                    for (int c = 0; c < C2; ++c) {
                        double dh = gain ? go[c] * gain->v().data[c] : go[c];
                        mean_d += dh;
                        mean_dh += dh * hr[c];
                    }
                    mean_d /= C2;
                    mean_dh /= C2;
                    double is = (*inv_std)[r];
                    for (int c = 0; c < C2; ++c) {
                        double dh = gain ? go[c] * gain->v().data[c] : go[c];
                        xgr[c] += is * (dh - mean_d - hr[c] * mean_dh);
                    }
                }
            }
        };
    return out;
}

}  // namespace

Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps) {
    check(gain->rows() == 1 && gain->cols() == x->cols(), "layer_norm: gain shape");
    check(bias->rows() == 1 && bias->cols() == x->cols(), "layer_norm: bias shape");
    return layer_norm_impl(g, x, gain, bias, eps);
}

Var layer_norm_plain(Graph& g, Var x, double eps) {
    return layer_norm_impl(g, x, nullptr, nullptr, eps);
}

Var softmax_groups(Graph& g, Var a, int group) {
    check(group >= 1 && a->cols() % group == 0, "softmax_groups: cols not divisible");
    Node* out = g.make(a->rows(), a->cols(), a->needs_grad);
    const int ngroups = a->cols() / group;
    for (int r = 0; r < a->rows(); ++r) {
        const double* src = a->v().row(r);
        double* dst = out->owned.row(r);
        for (int q = 0; q < ngroups; ++q) {
            const double* s = src + q * group;
            double* d = dst + q * group;
            double mx = s[0];
            for (int k = 1; k < group; ++k) mx = std::max(mx, s[k]);
            double sum = 0.0;
            for (int k = 0; k < group; ++k) {
                d[k] = std::exp(s[k] - mx);
                sum += d[k];
            }
            for (int k = 0; k < group; ++k) d[k] /= sum;
        }
    }
    if (out->needs_grad)
        out->back = [out, a, group]() {
            Tensor& ag = Graph::grad_buf(a);
            const int ng2 = out->grad.cols / group;
            for (int r = 0; r < out->grad.rows; ++r) {
                const double* go = out->grad.row(r);
                const double* s = out->owned.row(r);
                double* dst = ag.row(r);
                for (int q = 0; q < ng2; ++q) {
                    double dot = 0.0;
                    for (int k = 0; k < group; ++k) dot += go[q * group + k] * s[q * group + k];
                    for (int k = 0; k < group; ++k)
                        dst[q * group + k] += s[q * group + k] * (go[q * group + k] - dot);
                }
            }
        };
    return out;
}

Var masked_softmax_rows(Graph& g, Var scores, std::vector<uint8_t> allowed) {
    const int R = scores->rows(), C = scores->cols();
    check(static_cast<int>(allowed.size()) == R * C, "masked_softmax_rows: mask size");
    Node* out = g.make(R, C, scores->needs_grad);
    for (int r = 0; r < R; ++r) {
        const double* src = scores->v().row(r);
        const uint8_t* m = allowed.data() + static_cast<size_t>(r) * C;
        double* dst = out->owned.row(r);
        double mx = -1e300;
        bool any = false;
        for (int c = 0; c < C; ++c)
            if (m[c]) {
                any = true;
                mx = std::max(mx, src[c]);
            }
        if (!any) continue;  // row stays zero
        double sum = 0.0;
        for (int c = 0; c < C; ++c)
            if (m[c]) {
                dst[c] = std::exp(src[c] - mx);
                sum += dst[c];
            }
        for (int c = 0; c < C; ++c)
            if (m[c]) dst[c] /= sum;
    }
    if (out->needs_grad)
        out->back = [out, scores]() {
            Tensor& sg = Graph::grad_buf(scores);
            for (int r = 0; r < out->grad.rows; ++r) {
                const double* go = out->grad.row(r);
                const double* s = out->owned.row(r);
                double* dst = sg.row(r);
                double dot = 0.0;
                for (int c = 0; c < out->grad.cols; ++c) dot += go[c] * s[c];
                for (int c = 0; c < out->grad.cols; ++c) dst[c] += s[c] * (go[c] - dot);
            }
        };
    return out;
}

Var blend_rows(Graph& g, Var when_true, Var when_false, std::vector<uint8_t> use_true) {
    check(when_true->v().same_shape(when_false->v()), "blend_rows: shape mismatch");
    check(static_cast<int>(use_true.size()) == when_true->rows(), "blend_rows: mask size");
    bool ng = when_true->needs_grad || when_false->needs_grad;
    Node* out = g.make(when_true->rows(), when_true->cols(), ng);
    for (int r = 0; r < out->owned.rows; ++r) {
        const double* src = use_true[r] ? when_true->v().row(r) : when_false->v().row(r);
        double* dst = out->owned.row(r);
        for (int c = 0; c < out->owned.cols; ++c) dst[c] = src[c];
    }
    if (ng)
        out->back = [out, when_true, when_false, use_true = std::move(use_true)]() {
            for (int r = 0; r < out->grad.rows; ++r) {
                Var target = use_true[r] ? when_true : when_false;
                if (!target->needs_grad) continue;
                Tensor& tg = Graph::grad_buf(target);
                const double* src = out->grad.row(r);
                double* dst = tg.row(r);
                for (int c = 0; c < out->grad.cols; ++c) dst[c] += src[c];
            }
        };
    return out;
}

Var deform_sample(Graph& g, Var values, Var positions, int heads, int points) {
    const int L = values->rows(), D = values->cols();
    check(D % heads == 0, "deform_sample: dim not divisible by heads");
    const int hd = D / heads;
    check(positions->cols() == heads * points, "deform_sample: positions shape");
    const int Q = positions->rows();
    bool ng = values->needs_grad || positions->needs_grad;
    Node* out = g.make(Q, heads * points * hd, ng);
    for (int q = 0; q < Q; ++q) {
        const double* pos = positions->v().row(q);
        double* dst = out->owned.row(q);
        for (int h = 0; h < heads; ++h) {
            for (int k = 0; k < points; ++k) {
                double s = pos[h * points + k];
                if (!(s >= 0.0)) s = 0.0;  // also catches NaN positions
                if (s > L - 1) s = static_cast<double>(L - 1);
                int i0 = static_cast<int>(std::floor(s));
                if (i0 > L - 1) i0 = L - 1;
                int i1 = std::min(i0 + 1, L - 1);
                double f = s - i0;
                const double* v0 = values->v().row(i0) + h * hd;
                const double* v1 = values->v().row(i1) + h * hd;
                double* o = dst + (h * points + k) * hd;
                for (int j = 0; j < hd; ++j) o[j] = (1.0 - f) * v0[j] + f * v1[j];
            }
        }
    }
    if (ng)
        out->back = [out, values, positions, heads, points, hd, L]() {
            const int Q2 = out->grad.rows;
            for (int q = 0; q < Q2; ++q) {
                const double* pos = positions->v().row(q);
                const double* go = out->grad.row(q);
                for (int h = 0; h < heads; ++h) {
                    for (int k = 0; k < points; ++k) {
                        double s = pos[h * points + k];
                        if (!(s >= 0.0)) s = 0.0;
                        if (s > L - 1) s = static_cast<double>(L - 1);
                        int i0 = static_cast<int>(std::floor(s));
                        if (i0 > L - 1) i0 = L - 1;
                        int i1 = std::min(i0 + 1, L - 1);
                        double f = s - i0;
                        const double* gseg = go + (h * points + k) * hd;
                        if (values->needs_grad) {
                            Tensor& vg = Graph::grad_buf(values);
                            double* g0 = vg.row(i0) + h * hd;
                            double* g1 = vg.row(i1) + h * hd;
                            for (int j = 0; j < hd; ++j) {
                                g0[j] += (1.0 - f) * gseg[j];
                                g1[j] += f * gseg[j];
                            }
                        }
                        if (positions->needs_grad) {
                            const double* v0 = values->v().row(i0) + h * hd;
                            const double* v1 = values->v().row(i1) + h * hd;
                            double dpos = 0.0;
                            for (int j = 0; j < hd; ++j) dpos += gseg[j] * (v1[j] - v0[j]);
                            Graph::grad_buf(positions).at(q, h * points + k) += dpos;
                        }
                    }
                }
            }
        };
    return out;
}

Var point_mix(Graph& g, Var sampled, Var weights, int heads, int points) {
    check(weights->cols() == heads * points, "point_mix: weights shape");
    check(sampled->cols() % (heads * points) == 0, "point_mix: sampled shape");
    const int hd = sampled->cols() / (heads * points);
    const int Q = sampled->rows();
    check(weights->rows() == Q, "point_mix: row mismatch");
    bool ng = sampled->needs_grad || weights->needs_grad;
    Node* out = g.make(Q, heads * hd, ng);
    for (int q = 0; q < Q; ++q) {
        const double* sr = sampled->v().row(q);
        const double* wr = weights->v().row(q);
        double* dst = out->owned.row(q);
        for (int h = 0; h < heads; ++h) {
            double* o = dst + h * hd;
            for (int k = 0; k < points; ++k) {
                double w = wr[h * points + k];
                const double* s = sr + (h * points + k) * hd;
                for (int j = 0; j < hd; ++j) o[j] += w * s[j];
            }
        }
    }
    if (ng)
        out->back = [out, sampled, weights, heads, points, hd]() {
            for (int q = 0; q < out->grad.rows; ++q) {
                const double* go = out->grad.row(q);
                const double* sr = sampled->v().row(q);
                const double* wr = weights->v().row(q);
                for (int h = 0; h < heads; ++h) {
                    const double* goh = go + h * hd;
                    for (int k = 0; k < points; ++k) {
                        const double* s = sr + (h * points + k) * hd;
                        if (weights->needs_grad) {
                            double dot = 0.0;
                            for (int j = 0; j < hd; ++j) dot += goh[j] * s[j];
                            Graph::grad_buf(weights).at(q, h * points + k) += dot;
                        }
                        if (sampled->needs_grad) {
                            double w = wr[h * points + k];
                            double* sg = Graph::grad_buf(sampled).row(q) + (h * points + k) * hd;
                            for (int j = 0; j < hd; ++j) sg[j] += w * goh[j];
                        }
                    }
                }
            }
        };
    return out;
}

Var sum_all(Graph& g, Var a) {
    Node* out = g.make(1, 1, a->needs_grad);
    double s = 0.0;
    for (double v : a->v().data) s += v;
    out->owned.data[0] = s;
    if (out->needs_grad)
        out->back = [out, a]() {
            Tensor& ag = Graph::grad_buf(a);
            double go = out->grad.data[0];
            for (size_t i = 0; i < ag.data.size(); ++i) ag.data[i] += go;
        };
    return out;
}

Var cross_entropy_sum(Graph& g, Var logits, std::vector<int> targets, std::vector<uint8_t> mask,
                      std::vector<double> row_weights) {
    const int R = logits->rows(), V = logits->cols();
    check(static_cast<int>(targets.size()) == R, "cross_entropy_sum: targets size");
    check(static_cast<int>(mask.size()) == R, "cross_entropy_sum: mask size");
    if (row_weights.empty()) row_weights.assign(R, 1.0);
    check(static_cast<int>(row_weights.size()) == R, "cross_entropy_sum: weights size");

    Node* out = g.make(1, 1, logits->needs_grad);
    // Probabilities cached for the backward pass (zero on masked rows).
    auto probs = std::make_shared<Tensor>(R, V);
    double total = 0.0;
    for (int r = 0; r < R; ++r) {
        if (!mask[r]) continue;
        check(0 <= targets[r] && targets[r] < V, "cross_entropy_sum: target out of range");
        const double* lr = logits->v().row(r);
        double mx = lr[0];
        for (int c = 1; c < V; ++c) mx = std::max(mx, lr[c]);
        double sum = 0.0;
        double* pr = probs->row(r);
        for (int c = 0; c < V; ++c) {
            pr[c] = std::exp(lr[c] - mx);
            sum += pr[c];
        }
        for (int c = 0; c < V; ++c) pr[c] /= sum;
        total += row_weights[r] * -(lr[targets[r]] - mx - std::log(sum));
    }
    out->owned.data[0] = total;
    if (out->needs_grad)
        out->back = [out, logits, probs, targets = std::move(targets), mask = std::move(mask),
                     row_weights = std::move(row_weights)]() {
            Tensor& lg = Graph::grad_buf(logits);
            double go = out->grad.data[0];
            for (int r = 0; r < lg.rows; ++r) {
                if (!mask[r]) continue;
                const double* pr = probs->row(r);
                double* gr = lg.row(r);
                double w = go * row_weights[r];
                for (int c = 0; c < lg.cols; ++c) gr[c] += w * pr[c];
                gr[targets[r]] -= w;
            }
        };
    return out;
}

}  // namespace gebc::ad
