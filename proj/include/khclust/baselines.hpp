#ifndef KHCLUST_BASELINES_HPP
#define KHCLUST_BASELINES_HPP

#include <cstdint>
#include <vector>

#include "core.hpp"

/**
 * @file baselines.hpp
 * @brief Lloyd's K-means and global-K-means style incremental seeding, the
 * reference the reclassification engine is measured against.
 */

namespace kh {

enum class Seeding {
    provided_centers,
    provided_labels,
    incremental,
    /// m distinct points drawn with the configured RNG seed.
    random_points,
};

struct KMeansConfig {
    std::size_t m = 1;
    std::size_t max_iters = 200;
    Seeding seeding = Seeding::incremental;
    /// Used with Seeding::provided_centers; m rows of dimension d.
    std::vector<std::vector<double>> centers;
    /// Used with Seeding::provided_labels.
    std::vector<int> labels;
    std::uint64_t rng_seed = 0;
};

struct LloydResult {
    Partition partition;
    std::size_t iterations = 0;
    bool converged = false;
    /// Total error after each iteration.
    std::vector<double> energy_trace;
};

/**
 * Alternates nearest-center assignment and centroid recomputation until the
 * labels stop changing or `max_iters` is reached.
 *
 * Ties keep the current label when within tolerance, else go to the lowest
 * cluster index. An empty cluster receives the point farthest from its
 * assigned center (taken from a cluster that keeps at least one point).
 */
LloydResult lloyd(const Dataset& ds, const KMeansConfig& cfg);

/// Lloyd started from explicit centers.
LloydResult lloyd_from_centers(const Dataset& ds, std::vector<std::vector<double>> centers,
                               std::size_t max_iters = 200);

/**
 * Partitions for 1..m_max clusters, each grown from the previous one by trying
 * every distinct point as the extra center and keeping the best Lloyd result.
 * Above 2000 points only 512 candidates drawn with `rng_seed` are tried.
 */
std::vector<Partition> incremental_sequence(const Dataset& ds, std::size_t m_max, std::uint64_t rng_seed = 0);

/// Last entry of incremental_sequence.
Partition incremental_seed(const Dataset& ds, std::size_t m, std::uint64_t rng_seed = 0);

/// True iff no point is strictly (beyond tolerance) closer to another cluster's centroid than to its own.
bool is_lloyd_fixed_point(const Dataset& ds, const Partition& p);

}  // namespace kh

#endif  // KHCLUST_BASELINES_HPP
