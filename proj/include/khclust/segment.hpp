#ifndef KHCLUST_SEGMENT_HPP
#define KHCLUST_SEGMENT_HPP

#include <cstddef>
#include <map>
#include <vector>

#include "core.hpp"
#include "engine.hpp"

/**
 * @file segment.hpp
 * @brief Grayscale image segmentation into 4-connected segments: merging of
 * adjacent segments by the merge cost, and boundary correction that moves
 * pixels between adjacent segments without breaking connectivity.
 */

namespace kh {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    /// Row-major intensities in [0, 255].
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(std::size_t w, std::size_t h, std::vector<double> px);

    std::size_t size() const { return pixels.size(); }
    double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

/// Pixels as a N x 1 dataset, row-major order.
Dataset image_dataset(const GrayImage& img);

/// Point graph joining 4-neighbouring pixels, for PairScope::adjacency.
PairScope pixel_grid_scope(std::size_t width, std::size_t height);

/**
 * Labelling of pixels into 4-connected segments with per-segment statistics
 * and the region adjacency graph (edge weight = shared border length).
 * Segment ids are stable; merged-away ids become dead.
 */
class SegmentMap {
public:
    /// One segment per pixel.
    static SegmentMap singletons(const GrayImage& img);
    /// One segment per maximal 4-connected run of equal intensity.
    static SegmentMap flat_zones(const GrayImage& img);
    /// Arbitrary labelling; every label must be 4-connected.
    static SegmentMap from_labels(const GrayImage& img, const std::vector<int>& labels);

    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    std::size_t pixel_count() const { return labels_.size(); }
    std::size_t segment_count() const { return alive_count_; }
    double total_error() const;

    int label(std::size_t px) const { return labels_[px]; }
    const std::vector<int>& labels() const { return labels_; }
    /// Labels renumbered to 0..count-1 in order of first appearance.
    std::vector<int> compact_labels() const;

    bool alive(int seg) const { return alive_[seg] != 0; }
    std::size_t id_bound() const { return stats_.size(); }
    const ClusterStats& stats(int seg) const { return stats_[seg]; }
    const std::vector<std::size_t>& members(int seg) const { return members_[seg]; }
    const std::map<int, std::size_t>& neighbors(int seg) const { return neighbors_[seg]; }
    double intensity(std::size_t px) const { return intensity_[px]; }

    /// Merges b into a, or a into b when b is larger; returns the surviving id.
    int merge(int a, int b);

    /// Moves pixels (all currently in `donor`) into `acceptor`; connectivity is the caller's duty.
    void move_pixels(const std::vector<std::size_t>& px, int donor, int acceptor);

    /// Whether `donor` stays 4-connected once `px` is removed from it.
    bool stays_connected_without(int donor, const std::vector<std::size_t>& px) const;

    /// Full BFS audit: every live segment is 4-connected and the adjacency graph matches the labels.
    bool audit() const;

    /// Up to four 4-neighbours of a pixel.
    std::size_t neighbours_of(std::size_t px, std::size_t out[4]) const;

private:
    void build(const GrayImage& img, std::vector<int> labels);
    bool locally_simple(std::size_t px, int donor) const;

    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> intensity_;
    std::vector<int> labels_;
    std::vector<ClusterStats> stats_;
    std::vector<std::vector<std::size_t>> members_;
    std::vector<std::map<int, std::size_t>> neighbors_;
    std::vector<char> alive_;
    std::size_t alive_count_ = 0;
};

struct MergeOptions {
    /// Pick the merge by error after boundary correction, among this many cheapest merges (0 = off).
    std::size_t lookahead_candidates = 0;
    SubsetPolicy policy;
};

/// Merges the adjacent pair with the smallest merge cost (ties: lowest ids).
SegmentMap merge_pass(SegmentMap s, const MergeOptions& opts = {});

struct BoundaryCorrection {
    SegmentMap map;
    std::size_t moves = 0;
};

/**
 * Moves border pixels (and, under identical-group policies, 4-connected runs
 * of equal-intensity border pixels) to an adjacent segment while that lowers
 * E. A move is locked when it would disconnect or empty the donor.
 */
BoundaryCorrection correct_boundaries(SegmentMap s, SubsetPolicy policy = {SubsetMode::both});

struct SegmentCurveRow {
    std::size_t count = 0;
    double error = 0;
    double sigma = 0;
};

struct SegmentCurveOptions {
    bool flat_zone_start = false;
    MergeOptions merge;
    SubsetPolicy correction_policy{SubsetMode::both};
    /// Segment counts at which the corrected map is kept.
    std::vector<std::size_t> snapshot_counts;
    /// Run the connectivity audit after every step (slow; for tests).
    bool audit_every_step = false;
    /**
     * At each count also correct the merge-only map and continue from it when
     * that gives lower E than the corrected trajectory.
     */
    bool adopt_merge_only = true;
};

struct SegmentCurve {
    std::vector<SegmentCurveRow> corrected;
    std::vector<SegmentCurveRow> merge_only;
    std::map<std::size_t, SegmentMap> snapshots;
    bool connectivity_ok = true;
    /// Counts at which the corrected merge-only map was adopted.
    std::size_t adoptions = 0;
};

/// Error and sigma per segment count down to `m_min`, with and without boundary correction after each merge.
SegmentCurve segment_curve(const GrayImage& img, std::size_t m_min, const SegmentCurveOptions& opts = {});

/// Each pixel replaced by its segment mean rounded half-up, clamped to [0, 255].
GrayImage approximation(const SegmentMap& s);

/**
 * The same pixels clustered without the connectivity lock: pairwise and tuple
 * correction over the pixel-grid scope, starting from the segment labels.
 */
Partition relaxed_partition(const GrayImage& img, const SegmentMap& s, std::size_t l_max = 2);

}  // namespace kh

#endif  // KHCLUST_SEGMENT_HPP
