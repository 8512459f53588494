#include "features.hpp"

#include <cmath>

#include "doctest.h"
#include "test_util.hpp"

using namespace gebc;

TEST_CASE("sample_frame_indices strides from zero") {
    CHECK(sample_frame_indices(32, 8) == std::vector<int>{0, 8, 16, 24});
    CHECK(sample_frame_indices(8, 8) == std::vector<int>{0});
    CHECK_THROWS_AS(sample_frame_indices(0, 8), DataError);
    CHECK_THROWS_AS(sample_frame_indices(8, 0), ConfigError);
}

TEST_CASE("sample_frame_indices length is ceil(T/m)") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        int t = rng.uniform_int(1, 500);
        int m = rng.uniform_int(1, 40);
        auto idx = sample_frame_indices(t, m);
        CHECK(static_cast<int>(idx.size()) == (t + m - 1) / m);
        CHECK(idx.back() < t);
    }
}

TEST_CASE("temporal_resize is exact identity when S == L") {
    Rng rng(12);
    Tensor block(7, 3);
    for (double& v : block.data) v = rng.uniform(-5, 5);
    Tensor out = temporal_resize(block, 7);
    CHECK(out.data == block.data);
}

TEST_CASE("temporal_resize interpolates linearly with aligned endpoints") {
    Tensor block = Tensor::from_rows({{0.0}, {1.0}});
    Tensor out = temporal_resize(block, 3);
    REQUIRE(out.rows == 3);
    CHECK(out.at(0, 0) == doctest::Approx(0.0));
    CHECK(out.at(1, 0) == doctest::Approx(0.5));
    CHECK(out.at(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("temporal_resize preserves constants and endpoints") {
    Tensor constant(5, 2, 3.25);
    Tensor out = temporal_resize(constant, 11);
    for (double v : out.data) CHECK(v == doctest::Approx(3.25));

    Rng rng(13);
    Tensor block(9, 4);
    for (double& v : block.data) v = rng.uniform(-2, 2);
    Tensor resized = temporal_resize(block, 17);
    for (int c = 0; c < 4; ++c) {
        CHECK(resized.at(0, c) == doctest::Approx(block.at(0, c)));
        CHECK(resized.at(16, c) == doctest::Approx(block.at(8, c)));
    }
}

TEST_CASE("temporal_resize stays inside per-column bounds") {
    Rng rng(14);
    Tensor block(6, 3);
    for (double& v : block.data) v = rng.uniform(-10, 10);
    Tensor out = temporal_resize(block, 23);
    for (int c = 0; c < 3; ++c) {
        double lo = block.at(0, c), hi = block.at(0, c);
        for (int r = 1; r < block.rows; ++r) {
            lo = std::min(lo, block.at(r, c));
            hi = std::max(hi, block.at(r, c));
        }
        for (int r = 0; r < out.rows; ++r) {
            CHECK(out.at(r, c) >= lo - 1e-12);
            CHECK(out.at(r, c) <= hi + 1e-12);
        }
    }
}

TEST_CASE("temporal_resize to L=1 or from S=1 takes row zero") {
    Tensor block = Tensor::from_rows({{1.0}, {5.0}, {9.0}});
    Tensor one = temporal_resize(block, 1);
    CHECK(one.rows == 1);
    CHECK(one.at(0, 0) == 1.0);
    Tensor single = Tensor::from_rows({{4.5, -2.0}});
    Tensor widened = temporal_resize(single, 4);
    for (int r = 0; r < 4; ++r) {
        CHECK(widened.at(r, 0) == 4.5);
        CHECK(widened.at(r, 1) == -2.0);
    }

    CHECK_THROWS_AS(temporal_resize(Tensor(), 5), DataError);
}

TEST_CASE("concat_blocks joins along the feature axis") {
    Tensor a(100, 512, 1.0), b(100, 768, 2.0);
    Tensor joined = concat_blocks({a, b});
    CHECK(joined.rows == 100);
    CHECK(joined.cols == 1280);
    CHECK(joined.at(50, 511) == 1.0);
    CHECK(joined.at(50, 512) == 2.0);

    Tensor single = concat_blocks({a});
    CHECK(single.data == a.data);

    Tensor mismatched(99, 8);
    CHECK_THROWS_AS(concat_blocks({a, mismatched}), DataError);
}

TEST_CASE("clip_center_frames rounds centers onto the frame grid") {
    CHECK(clip_center_frames({4.0}, 10.0, 11) == std::vector<int>{2, 7});
    // centers 2.5 and 7.5 on a 2-frame grid: 0.25 -> 0, 0.75 -> 1
    CHECK(clip_center_frames({5.0}, 10.0, 2) == std::vector<int>{0, 1});
    // N >= 1 means there are always at least two clips
    CHECK(clip_center_frames({1.0}, 2.0, 10).size() == 2);
}

TEST_CASE("select_regions keeps the top confidences and zero-pads") {
    Rng rng(15);
    Tensor detections(3, 4);
    for (double& v : detections.data) v = rng.uniform(-1, 1);
    SelectedRegions sel = select_regions(detections, {0.5, 0.9, 0.1}, 50);
    CHECK(sel.features.rows == 50);
    int valid = 0;
    for (uint8_t v : sel.valid) valid += v;
    CHECK(valid == 3);
    CHECK(sel.confidence[0] == 0.9);
    CHECK(sel.confidence[1] == 0.5);
    CHECK(sel.confidence[2] == 0.1);
    for (int r = 3; r < 50; ++r)
        for (int c = 0; c < 4; ++c) CHECK(sel.features.at(r, c) == 0.0);
}

TEST_CASE("select_regions truncates to the highest confidences") {
    Rng rng(16);
    Tensor detections(60, 2);
    std::vector<double> conf(60);
    for (double& v : detections.data) v = rng.uniform(-1, 1);
    for (double& c : conf) c = rng.uniform(0, 1);
    SelectedRegions sel = select_regions(detections, conf, 50);
    int valid = 0;
    for (uint8_t v : sel.valid) valid += v;
    CHECK(valid == 50);
    double min_kept = 1.0;
    for (int r = 0; r < 50; ++r) min_kept = std::min(min_kept, sel.confidence[r]);
    std::sort(conf.begin(), conf.end(), std::greater<>());
    double max_dropped = conf[50];
    CHECK(min_kept >= max_dropped);
    // kept rows sorted by non-increasing confidence
    for (int r = 1; r < 50; ++r) CHECK(sel.confidence[r - 1] >= sel.confidence[r]);
}

TEST_CASE("select_regions breaks confidence ties toward the lower index") {
    Tensor detections(10, 1);
    for (int r = 0; r < 10; ++r) detections.at(r, 0) = r;
    std::vector<double> conf(10, 0.2);
    conf[4] = 0.7;
    conf[9] = 0.7;
    SelectedRegions sel = select_regions(detections, conf, 1);
    CHECK(sel.features.at(0, 0) == 4.0);
}

TEST_CASE("select_regions validates confidences") {
    Tensor detections(2, 2);
    CHECK_THROWS_AS(select_regions(detections, {0.5, 1.5}, 4), DataError);
    CHECK_THROWS_AS(select_regions(detections, {0.5}, 4), DataError);
}

TEST_CASE("feature files round trip") {
    testutil::TempDir dir("features");
    Rng rng(17);
    FeatureFile file;
    file.pre_strided = false;
    Tensor block(40, 6);
    for (double& v : block.data) v = rng.uniform(-1, 1);
    file.frame_blocks.push_back(block);
    Tensor regions(3, 5);
    for (double& v : regions.data) v = rng.uniform(-1, 1);
    file.clip_regions.push_back(regions);
    file.clip_confidences.push_back({0.9, 0.5, 0.2});
    file.clip_regions.push_back(Tensor(2, 5, 0.25));
    file.clip_confidences.push_back({0.8, 0.7});

    save_feature_file(dir.file("v.gebf"), file);
    FeatureFile loaded = load_feature_file(dir.file("v.gebf"));
    CHECK(loaded.pre_strided == false);
    REQUIRE(loaded.frame_blocks.size() == 1);
    CHECK(loaded.frame_blocks[0].rows == 40);
    REQUIRE(loaded.clip_regions.size() == 2);
    REQUIRE(loaded.clip_confidences[0].size() == 3);
    CHECK(loaded.clip_confidences[0][0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(loaded.clip_confidences[0][2] == doctest::Approx(0.2).epsilon(1e-6));
    // float32 storage round-trips to float precision
    for (size_t i = 0; i < block.data.size(); ++i)
        CHECK(loaded.frame_blocks[0].data[i] ==
              doctest::Approx(block.data[i]).epsilon(1e-6));
}

TEST_CASE("non-finite feature blocks are rejected at load") {
    testutil::TempDir dir("features");
    FeatureFile file;
    Tensor block(4, 2, 1.0);
    block.at(2, 1) = std::numeric_limits<double>::quiet_NaN();
    file.frame_blocks.push_back(block);
    file.clip_regions.push_back(Tensor(1, 3, 0.0));
    file.clip_confidences.push_back({0.5});
    save_feature_file(dir.file("bad.gebf"), file);
    CHECK_THROWS_AS(load_feature_file(dir.file("bad.gebf")), DataError);
}

TEST_CASE("prepare_video_inputs shapes frames and regions to config") {
    VideoRecord rec;
    rec.video_id = "v";
    rec.num_frames = 64;
    rec.duration = 8.0;
    rec.boundaries = {3.0, 5.0};
    rec.captions = {{"s", "b", "a"}, {"s", "b", "a"}};

    Rng rng(18);
    FeatureFile file;
    Tensor b0(64, 5), b1(64, 3);
    for (double& v : b0.data) v = rng.uniform(-1, 1);
    for (double& v : b1.data) v = rng.uniform(-1, 1);
    file.frame_blocks = {b0, b1};
    for (int j = 0; j < 3; ++j) {
        file.clip_regions.push_back(Tensor(2, 4, 0.5));
        file.clip_confidences.push_back({0.9, 0.4});
    }

    ModelConfig config;
    config.target_length = 10;
    config.max_regions = 6;
    config.strides = {8, 16};

    VideoInputs inputs = prepare_video_inputs(rec, file, config);
    CHECK(inputs.frames.features.rows == 10);
    CHECK(inputs.frames.features.cols == 8);
    CHECK(inputs.frames.block_dims == std::vector<int>{5, 3});
    CHECK(inputs.regions.features.rows == 3 * 6);
    CHECK(inputs.regions.num_clips == 3);
    CHECK(inputs.clip_starts == std::vector<double>{0.0, 3.0, 5.0});
    CHECK(inputs.clip_ends == std::vector<double>{3.0, 5.0, 8.0});
    int valid = 0;
    for (uint8_t v : inputs.regions.valid) valid += v;
    CHECK(valid == 6);  // 2 per clip

    // wrong clip count is a data error naming the video
    file.clip_regions.pop_back();
    file.clip_confidences.pop_back();
    CHECK_THROWS_WITH_AS(prepare_video_inputs(rec, file, config), doctest::Contains("v"),
                         DataError);
}

TEST_CASE("pre-strided blocks skip stride sampling") {
    VideoRecord rec;
    rec.video_id = "v";
    rec.num_frames = 999;  // irrelevant for pre-strided input
    rec.duration = 4.0;
    rec.boundaries = {2.0};
    rec.captions = {{"s", "b", "a"}};

    FeatureFile file;
    file.pre_strided = true;
    file.frame_blocks = {Tensor(12, 2, 1.5)};
    file.clip_regions = {Tensor(1, 3, 0.0), Tensor(1, 3, 0.0)};
    file.clip_confidences = {{0.5}, {0.5}};

    ModelConfig config;
    config.target_length = 5;
    config.max_regions = 2;
    config.strides = {8};

    VideoInputs inputs = prepare_video_inputs(rec, file, config);
    CHECK(inputs.frames.features.rows == 5);
    for (double v : inputs.frames.features.data) CHECK(v == doctest::Approx(1.5));
}
