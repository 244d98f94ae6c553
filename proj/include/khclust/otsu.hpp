#ifndef KHCLUST_OTSU_HPP
#define KHCLUST_OTSU_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "core.hpp"

/**
 * @file otsu.hpp
 * @brief Exact multilevel thresholding of 1-D data. Optimal 1-D clusters
 * occupy disjoint value ranges, so a dynamic program over contiguous ranges
 * of the sorted distinct values finds the global minimum of E for every
 * cluster count.
 */

namespace kh {

/// Distinct values in increasing order with their multiplicities.
struct Histogram {
    std::vector<double> values;
    std::vector<std::size_t> counts;

    /// Prefix sums over bins, values shifted by `shift` to limit cancellation.
    std::vector<double> prefix_count;
    std::vector<double> prefix_sum;
    std::vector<double> prefix_sumsq;
    double shift = 0;

    std::size_t bins() const { return values.size(); }
    std::size_t total() const;

    /// Squared error of the bins [lo, hi) taken as one cluster.
    double range_error(std::size_t lo, std::size_t hi) const;
};

/// Largest number of distinct values the quadratic program accepts.
inline constexpr std::size_t kMaxHistogramBins = 4096;

Histogram build_histogram(std::span<const double> values);
Histogram build_histogram(const Dataset& ds);

struct ThresholdResult {
    /// Bin index where each cluster after the first starts (m - 1 entries).
    std::vector<std::size_t> cuts;
    /// Smallest value of each cluster after the first.
    std::vector<double> thresholds;
    double error = 0;
};

ThresholdResult optimal_thresholds(const Histogram& h, std::size_t m);

struct CurvePoint {
    std::size_t m = 0;
    double error = 0;
    double sigma = 0;
};

/// Optimal error and sigma for 1..m_max clusters.
std::vector<CurvePoint> otsu_curve(const Histogram& h, std::size_t m_max);

/// Cluster label of each value given thresholds from optimal_thresholds.
std::vector<int> threshold_labels(std::span<const double> values, const ThresholdResult& t);

}  // namespace kh

#endif  // KHCLUST_OTSU_HPP
