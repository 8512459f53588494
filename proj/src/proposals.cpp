#include "proposals.hpp"

#include <cmath>

namespace gebc {

double inverse_sigmoid(double x, double eps) {
    if (!(x >= 0.0 && x <= 1.0))
        throw DataError("inverse_sigmoid: input " + std::to_string(x) + " outside [0, 1]");
    if (!(eps > 0.0 && eps < 0.5)) throw ConfigError("inverse_sigmoid: eps must be in (0, 0.5)");
    double clamped = std::min(std::max(x, eps), 1.0 - eps);
    return std::log(clamped / (1.0 - clamped));
}

std::vector<TimeBox> make_time_boxes(const std::vector<double>& boundaries, double duration,
                                     CaptionKind kind) {
    const int n = static_cast<int>(boundaries.size());
    std::vector<TimeBox> boxes;
    boxes.reserve(n);
    auto at = [&](int i) {  // virtual endpoints t[0]=0, t[N+1]=duration
        if (i <= 0) return 0.0;
        if (i > n) return duration;
        return boundaries[i - 1];
    };
    for (int i = 1; i <= n; ++i) {
        TimeBox box;
        switch (kind) {
            case CaptionKind::Subject:
                box.start = at(i - 1);
                box.end = at(i + 1);
                break;
            case CaptionKind::Before:
                box.start = at(i - 1);
                box.end = at(i);
                break;
            case CaptionKind::After:
                box.start = at(i);
                box.end = at(i + 1);
                break;
        }
        if (!(box.start < box.end))
            throw DataError("make_time_boxes: degenerate box at boundary " + std::to_string(i));
        box.norm_start = box.start / duration;
        box.norm_end = box.end / duration;
        box.logit_start = inverse_sigmoid(box.norm_start);
        box.logit_end = inverse_sigmoid(box.norm_end);
        boxes.push_back(box);
    }
    return boxes;
}

void sinusoidal_encode(double x, int dim, double* out) {
    // Pairs (sin, cos) share a divisor; divisors run geometrically from 1
    // (pair 0) toward 1e4 across the encoding.
    for (int i = 0; i < dim; ++i) {
        int pair = i / 2;
        double divisor = std::pow(10000.0, 2.0 * pair / dim);
        double angle = x / divisor;
        out[i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
}

Tensor proposal_position_encoding(const std::vector<TimeBox>& boxes, int hidden_dim) {
    if (hidden_dim % 2 != 0)
        throw ConfigError("proposal position encoding requires an even hidden_dim");
    const int half = hidden_dim / 2;
    Tensor out(static_cast<int>(boxes.size()), hidden_dim);
    for (size_t r = 0; r < boxes.size(); ++r) {
        double* row = out.row(static_cast<int>(r));
        sinusoidal_encode(boxes[r].logit_start, half, row);
        sinusoidal_encode(boxes[r].logit_end, half, row + half);
        // Plain layer normalization (no learned affine) before projection.
        double mean = 0.0;
        for (int c = 0; c < hidden_dim; ++c) mean += row[c];
        mean /= hidden_dim;
        double var = 0.0;
        for (int c = 0; c < hidden_dim; ++c) var += (row[c] - mean) * (row[c] - mean);
        var /= hidden_dim;
        double inv_std = 1.0 / std::sqrt(var + 1e-9);
        for (int c = 0; c < hidden_dim; ++c) row[c] = (row[c] - mean) * inv_std;
    }
    return out;
}

}  // namespace gebc
