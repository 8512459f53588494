#pragma once

#include <vector>

#include "datamodel.hpp"
#include "tensor.hpp"

namespace gebc {

// Time interval around one boundary, with its normalized and logit forms.
struct TimeBox {
    double start = 0.0;  // seconds
    double end = 0.0;
    double norm_start = 0.0;  // divided by duration
    double norm_end = 0.0;
    double logit_start = 0.0;  // inverse sigmoid of the normalized coordinate
    double logit_end = 0.0;

    double reference_point() const { return 0.5 * (norm_start + norm_end); }
};

inline constexpr double kInverseSigmoidEps = 1e-5;

// log(x' / (1 - x')) with x' = clamp(x, eps, 1-eps). x must be in [0, 1].
double inverse_sigmoid(double x, double eps = kInverseSigmoidEps);

// Boxes from neighboring boundaries: (t[i-1], t[i+1]) for Subject,
// (t[i-1], t[i]) for Before, (t[i], t[i+1]) for After, with virtual
// endpoints t[0] = 0 and t[N+1] = duration.
std::vector<TimeBox> make_time_boxes(const std::vector<double>& boundaries, double duration,
                                     CaptionKind kind);

// Fixed sinusoidal encoding of a scalar into `dim` values; frequencies run
// geometrically from 1 up to 1e4.
void sinusoidal_encode(double x, int dim, double* out);

// Sinusoidal encoding of both logit coordinates (d/2 each), concatenated,
// layer-normalized, ready for the learned projection to d. One row per box.
Tensor proposal_position_encoding(const std::vector<TimeBox>& boxes, int hidden_dim);

}  // namespace gebc
