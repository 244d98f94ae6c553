#include <gtest/gtest.h>

#include <random>

#include "khclust/otsu.hpp"
#include "khclust/segment.hpp"
#include "test_support.hpp"

using namespace kh;

namespace {

GrayImage noisy_blocks(std::mt19937_64& rng, std::size_t w, std::size_t h, double noise) {
    std::normal_distribution<double> g(0.0, noise);
    std::vector<double> px(w * h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double base = 40.0 + 60.0 * static_cast<double>((x * 3 / w + y * 2 / h) % 3);
            px[y * w + x] = std::clamp(std::round(base + g(rng)), 0.0, 255.0);
        }
    }
    return GrayImage(w, h, std::move(px));
}

std::vector<int> labels_of(const SegmentMap& s) {
    return s.compact_labels();
}

}  // namespace

TEST(GrayImage, Validates) {
    EXPECT_THROW(GrayImage(2, 2, {0, 1, 2}), PreconditionError);
    EXPECT_THROW(GrayImage(1, 1, {256}), PreconditionError);
    EXPECT_THROW(GrayImage(0, 1, {}), PreconditionError);
}

TEST(SegmentMap, FlatZones) {
    const GrayImage img(3, 2, {5, 5, 7, 7, 5, 7});
    const auto s = SegmentMap::flat_zones(img);
    // The 5s form one zone, the right column of 7s another, the lone 7 a third.
    EXPECT_EQ(s.segment_count(), 3u);
    EXPECT_NEAR(s.total_error(), 0.0, 1e-12);
    EXPECT_TRUE(s.audit());
}

TEST(SegmentMap, RejectsDisconnectedLabels) {
    const GrayImage img(3, 1, {1, 2, 3});
    EXPECT_THROW(SegmentMap::from_labels(img, {0, 1, 0}), PreconditionError);
}

TEST(MergePass, EqualNeighboursFirst) {
    const GrayImage img(4, 1, {0, 0, 9, 10});
    auto s = merge_pass(SegmentMap::singletons(img));
    EXPECT_EQ(s.segment_count(), 3u);
    EXPECT_EQ(s.label(0), s.label(1));
    EXPECT_NEAR(s.total_error(), 0.0, 1e-12);
    s = merge_pass(std::move(s));
    EXPECT_NEAR(s.total_error(), 0.5, 1e-12);
    EXPECT_EQ(labels_of(s), (std::vector<int>{0, 0, 1, 1}));
    const auto approx = approximation(s);
    EXPECT_EQ(approx.pixels, (std::vector<double>{0, 0, 10, 10}));
    s = merge_pass(std::move(s));
    EXPECT_THROW(merge_pass(s), PreconditionError);
}

TEST(MergePass, LookaheadNeverWorseAfterCorrection) {
    std::mt19937_64 rng(2);
    const auto img = noisy_blocks(rng, 8, 8, 10);
    auto s = SegmentMap::flat_zones(img);
    while (s.segment_count() > 4) {
        MergeOptions look;
        look.lookahead_candidates = 4;
        const auto a = correct_boundaries(merge_pass(s, look)).map.total_error();
        const auto b = correct_boundaries(merge_pass(s)).map.total_error();
        ASSERT_LE(a, b + 1e-9 * (1 + b));
        s = correct_boundaries(merge_pass(s)).map;
    }
}

TEST(CorrectBoundaries, MovesStrandedPixel) {
    const GrayImage img(2, 2, {0, 10, 0, 10});
    const auto s = SegmentMap::from_labels(img, {0, 0, 0, 1});
    EXPECT_NEAR(s.total_error(), 200.0 / 3.0, 1e-9);
    const auto r = correct_boundaries(s);
    EXPECT_EQ(r.moves, 1u);
    EXPECT_NEAR(r.map.total_error(), 0.0, 1e-12);
    EXPECT_EQ(labels_of(r.map), (std::vector<int>{0, 1, 0, 1}));
    EXPECT_TRUE(r.map.audit());
}

TEST(CorrectBoundaries, ArticulationPixelIsLocked) {
    // Top row {0, 9, 0} loses connectivity without its middle pixel.
    const GrayImage img(3, 2, {0, 9, 0, 10, 10, 10});
    const auto s = SegmentMap::from_labels(img, {0, 0, 0, 1, 1, 1});
    EXPECT_FALSE(s.stays_connected_without(0, {1}));
    EXPECT_TRUE(s.stays_connected_without(0, {0}));
    const auto r = correct_boundaries(s);
    EXPECT_EQ(r.moves, 0u);
    EXPECT_EQ(r.map.labels(), s.labels());

    // Without the lock the move pays off.
    const auto relaxed = relaxed_partition(img, s);
    EXPECT_LT(relaxed.total_error(), s.total_error());
}

TEST(CorrectBoundaries, StableMapUnchanged) {
    const GrayImage img(4, 1, {0, 0, 9, 10});
    const auto s = SegmentMap::from_labels(img, {0, 0, 1, 1});
    const auto r = correct_boundaries(s);
    EXPECT_EQ(r.moves, 0u);
    EXPECT_EQ(r.map.labels(), s.labels());
}

TEST(SegmentCurve, FlatImage) {
    const GrayImage img(4, 4, std::vector<double>(16, 77));
    const auto c = segment_curve(img, 1);
    for (const auto& r : c.corrected) {
        EXPECT_EQ(r.error, 0.0);
    }
    EXPECT_EQ(c.corrected.back().count, 1u);
    EXPECT_EQ(c.corrected.size(), 16u);
}

TEST(SegmentCurve, OneRowMatchesThresholds) {
    const GrayImage img(4, 1, {0, 0, 9, 10});
    SegmentCurveOptions opts;
    opts.snapshot_counts = {2};
    const auto c = segment_curve(img, 1, opts);
    const auto h = build_histogram(img.pixels);
    const auto otsu = otsu_curve(h, h.bins());
    for (const auto& r : c.corrected) {
        if (r.count <= h.bins()) {
            EXPECT_NEAR(r.error, otsu[r.count - 1].error, 1e-12);
            EXPECT_NEAR(r.sigma, otsu[r.count - 1].sigma, 1e-12);
        }
    }
    ASSERT_TRUE(c.snapshots.count(2));
    EXPECT_EQ(approximation(c.snapshots.at(2)).pixels, (std::vector<double>{0, 0, 10, 10}));
}

TEST(SegmentProperties, CorrectionKeepsConnectivityAndLowersError) {
    std::mt19937_64 rng(40);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t w = 3 + rng() % 8;
        const std::size_t h = 3 + rng() % 8;
        const auto img = noisy_blocks(rng, w, h, 25);
        SegmentCurveOptions opts;
        opts.audit_every_step = true;
        opts.correction_policy = {static_cast<SubsetMode>(trial % 3)};
        const auto c = segment_curve(img, 1, opts);
        ASSERT_TRUE(c.connectivity_ok);
        ASSERT_EQ(c.corrected.size(), c.merge_only.size());
        for (std::size_t i = 0; i < c.corrected.size(); ++i) {
            ASSERT_EQ(c.corrected[i].count, c.merge_only[i].count);
            ASSERT_LE(c.corrected[i].error, c.merge_only[i].error + 1e-9 * (1 + c.merge_only[i].error))
                << "trial " << trial << " count " << c.corrected[i].count;
        }
    }
}

TEST(SegmentProperties, RelaxedClusteringBoundsSegments) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const auto img = noisy_blocks(rng, 6 + rng() % 5, 6 + rng() % 5, 20);
        SegmentCurveOptions opts;
        opts.snapshot_counts = {2, 3, 5};
        const auto c = segment_curve(img, 2, opts);
        for (const auto& [count, map] : c.snapshots) {
            const auto relaxed = relaxed_partition(img, map);
            ASSERT_EQ(relaxed.num_clusters(), count);
            ASSERT_LE(relaxed.total_error(), map.total_error() + 1e-9 * (1 + map.total_error()));
        }
    }
}

TEST(SegmentProperties, ErrorMatchesLabels) {
    std::mt19937_64 rng(42);
    const auto img = noisy_blocks(rng, 12, 9, 15);
    SegmentCurveOptions opts;
    opts.snapshot_counts = {1, 4, 20};
    const auto c = segment_curve(img, 1, opts);
    const auto ds = image_dataset(img);
    for (const auto& [count, map] : c.snapshots) {
        EXPECT_EQ(map.segment_count(), count);
        EXPECT_NEAR(map.total_error(), kh::testing::brute_energy(ds, map.compact_labels()),
                    1e-9 * (1 + map.total_error()));
        EXPECT_TRUE(map.audit());
    }
}
