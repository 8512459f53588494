#include "proposals.hpp"

#include <cmath>

#include "doctest.h"
#include "network.hpp"

using namespace gebc;

TEST_CASE("inverse_sigmoid basics") {
    CHECK(inverse_sigmoid(0.5) == 0.0);
    // closed form at the clamp: log(eps / (1 - eps))
    double expected = std::log(1e-5 / (1.0 - 1e-5));
    CHECK(inverse_sigmoid(0.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(-11.5129).epsilon(1e-4));
    CHECK(inverse_sigmoid(1.0) == doctest::Approx(-expected).epsilon(1e-12));
    CHECK_THROWS_AS(inverse_sigmoid(-0.01), DataError);
    CHECK_THROWS_AS(inverse_sigmoid(1.01), DataError);
    CHECK_THROWS_AS(inverse_sigmoid(0.5, 0.6), ConfigError);
}

TEST_CASE("sigmoid(inverse_sigmoid(x)) round-trips inside the clamp") {
    for (int i = 1; i <= 99; ++i) {
        double x = i / 100.0;
        double back = 1.0 / (1.0 + std::exp(-inverse_sigmoid(x)));
        CHECK(std::fabs(back - x) < 1e-9);
    }
}

TEST_CASE("make_time_boxes applies the per-kind neighbor formulas") {
    std::vector<double> boundaries = {2.0, 4.0, 6.0};
    auto subject = make_time_boxes(boundaries, 8.0, CaptionKind::Subject);
    REQUIRE(subject.size() == 3);
    CHECK(subject[0].start == 0.0);
    CHECK(subject[0].end == 4.0);
    CHECK(subject[1].start == 2.0);
    CHECK(subject[1].end == 6.0);
    CHECK(subject[2].start == 4.0);
    CHECK(subject[2].end == 8.0);

    auto before = make_time_boxes(boundaries, 8.0, CaptionKind::Before);
    CHECK(before[0].start == 0.0);
    CHECK(before[0].end == 2.0);
    CHECK(before[2].start == 4.0);
    CHECK(before[2].end == 6.0);

    auto after = make_time_boxes({5.0}, 10.0, CaptionKind::After);
    REQUIRE(after.size() == 1);
    CHECK(after[0].start == 5.0);
    CHECK(after[0].end == 10.0);
    CHECK(after[0].norm_start == 0.5);
    CHECK(after[0].norm_end == 1.0);
}

TEST_CASE("boxes relate to their boundary per kind") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        int n = rng.uniform_int(1, 6);
        double duration = rng.uniform(4.0, 20.0);
        std::vector<double> bounds;
        double t = 0.0;
        double gap = duration / (n + 1);
        for (int i = 0; i < n; ++i) {
            t += gap * rng.uniform(0.5, 1.0);
            bounds.push_back(t);
        }
        auto subject = make_time_boxes(bounds, duration, CaptionKind::Subject);
        auto before = make_time_boxes(bounds, duration, CaptionKind::Before);
        auto after = make_time_boxes(bounds, duration, CaptionKind::After);
        for (int i = 0; i < n; ++i) {
            CHECK(subject[i].start < bounds[i]);
            CHECK(subject[i].end > bounds[i]);
            CHECK(before[i].end == bounds[i]);
            CHECK(after[i].start == bounds[i]);
            CHECK(subject[i].reference_point() >= 0.0);
            CHECK(subject[i].reference_point() <= 1.0);
        }
    }
}

TEST_CASE("boxes shift with a common translation of boundaries and duration") {
    std::vector<double> bounds = {2.0, 5.0};
    auto base = make_time_boxes(bounds, 9.0, CaptionKind::Subject);
    // shift the whole timeline right by 3 seconds (pad duration accordingly,
    // boundaries stay interior)
    std::vector<double> shifted = {5.0, 8.0};
    auto moved = make_time_boxes(shifted, 12.0, CaptionKind::Subject);
    // interior box (not touching the virtual endpoints) translates exactly
    CHECK(moved[1].start == base[1].start + 3.0);
    CHECK(moved[1].end == doctest::Approx(base[1].end + 3.0));
}

TEST_CASE("proposal position encoding is normalized per row") {
    auto boxes = make_time_boxes({2.0, 4.0, 6.0}, 8.0, CaptionKind::Subject);
    Tensor enc = proposal_position_encoding(boxes, 64);
    CHECK(enc.rows == 3);
    CHECK(enc.cols == 64);
    for (int r = 0; r < 3; ++r) {
        double mean = 0.0, var = 0.0;
        for (int c = 0; c < 64; ++c) mean += enc.at(r, c);
        mean /= 64;
        for (int c = 0; c < 64; ++c) var += (enc.at(r, c) - mean) * (enc.at(r, c) - mean);
        var /= 64;
        CHECK(std::fabs(mean) < 1e-5);
        CHECK(std::fabs(var - 1.0) < 1e-5);
    }
    CHECK_THROWS_AS(proposal_position_encoding(boxes, 63), ConfigError);
}

TEST_CASE("embed_proposals is deterministic and shaped N x d") {
    ModelConfig config;
    config.hidden_dim = 512;
    config.input_dim = 8;
    config.region_dim = 8;
    config.vocab_size = 8;
    config.encoder_layers = 1;
    config.frame_decoder_layers = 1;
    config.region_decoder_layers = 1;
    config.ffn_dim = 32;
    ModelParams params(config);

    auto boxes = make_time_boxes({2.0, 4.0, 6.0}, 8.0, CaptionKind::Subject);
    ProposalBatch batch = embed_proposals(boxes, params, CaptionKind::Subject);
    CHECK(batch.embeddings.rows == 3);
    CHECK(batch.embeddings.cols == 512);
    CHECK(batch.reference_points.size() == 3);
    CHECK(batch.reference_points[1] == doctest::Approx(0.5));

    // identical boxes embed to identical rows
    ProposalBatch again = embed_proposals(boxes, params, CaptionKind::Subject);
    CHECK(again.embeddings.data == batch.embeddings.data);

    std::vector<TimeBox> same = {boxes[1], boxes[1]};
    ProposalBatch dup = embed_proposals(same, params, CaptionKind::Subject);
    for (int c = 0; c < 512; ++c)
        CHECK(dup.embeddings.at(0, c) == dup.embeddings.at(1, c));
}
