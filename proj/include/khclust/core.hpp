#ifndef KHCLUST_CORE_HPP
#define KHCLUST_CORE_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

/**
 * @file core.hpp
 * @brief Datasets, cluster sufficient statistics and partitions with exact
 * incremental maintenance of the total squared error.
 */

namespace kh {

/** Violated caller contract (bad index, empty cluster, k out of range...). */
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/** Internal bookkeeping disagrees with itself beyond numeric tolerance. */
class ConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/** Problem too large for an exhaustive routine. */
class SizeGuardError : public std::length_error {
public:
    using std::length_error::length_error;
};

/**
 * Immutable N x d matrix of finite reals, row-major. Rows may repeat.
 */
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t n, std::size_t d, std::vector<double> values);

    static Dataset from_rows(const std::vector<std::vector<double>>& rows);
    static Dataset from_values(std::span<const double> values);

    std::size_t size() const { return n_; }
    std::size_t dim() const { return d_; }

    std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * d_, d_};
    }

    const std::vector<double>& values() const { return values_; }

private:
    std::size_t n_ = 0;
    std::size_t d_ = 0;
    std::vector<double> values_;
};

/**
 * Sufficient statistics (count, coordinate sums, sum of squared norms) of a
 * set of points. The error of the set is sumsq - |sum|^2 / n.
 */
struct ClusterStats {
    std::size_t n = 0;
    std::vector<double> sum;
    double sumsq = 0;

    ClusterStats() = default;
    explicit ClusterStats(std::size_t dim) : sum(dim, 0.0) {}

    std::size_t dim() const { return sum.size(); }
    bool empty() const { return n == 0; }

    void add(std::span<const double> x);
    void remove(std::span<const double> x);
    void absorb(const ClusterStats& other);
    void release(const ClusterStats& other);

    /// Mean point; requires n >= 1.
    std::vector<double> centroid() const;

    /// Within-set squared error, clamped to 0 when negative within 1e-9 * (1 + sumsq).
    double error() const;
};

ClusterStats stats_of_subset(const Dataset& ds, std::span<const std::size_t> idx);

double squared_distance(std::span<const double> a, std::span<const double> b);

/**
 * Assignment of every point to one of m nonempty clusters, with per-cluster
 * statistics and the running total error.
 *
 * Partitions do not hold a reference to their dataset; every mutating call
 * takes the dataset explicitly, and the caller must always pass the same one.
 */
class Partition {
public:
    Partition() = default;

    /// Builds stats from labels. Labels must lie in [0, m) and cover every cluster.
    static Partition from_labels(const Dataset& ds, std::vector<int> labels, std::size_t m);
    static Partition from_labels(const Dataset& ds, std::vector<int> labels);

    std::size_t size() const { return labels_.size(); }
    std::size_t num_clusters() const { return stats_.size(); }
    const std::vector<int>& labels() const { return labels_; }
    int label(std::size_t i) const { return labels_[i]; }
    const std::vector<ClusterStats>& stats() const { return stats_; }
    const ClusterStats& stats(std::size_t c) const { return stats_[c]; }
    double total_error() const { return total_error_; }

    /// Indices of the points of cluster c, ascending.
    std::vector<std::size_t> members(std::size_t c) const;

    /**
     * Moves the points `idx` (all labeled `donor`) into `acceptor`. The total
     * error is updated by the exact change of the two touched cluster errors.
     * Moving a whole cluster is refused; that is a merge.
     */
    void apply_move(const Dataset& ds, std::span<const std::size_t> idx, int donor, int acceptor);

    /// Merges cluster `b` into `a`; clusters above `b` are renumbered down by one.
    void merge_clusters(const Dataset& ds, int a, int b);

    /// Rebuilds every statistic from the labels.
    void recompute(const Dataset& ds);

    /// Throws ConsistencyError when stats or total error drifted from a fresh recomputation.
    void audit(const Dataset& ds) const;

    /// Accepted moves between full recomputations (0 disables).
    void set_refresh_interval(std::size_t every) { refresh_interval_ = every; }

private:
    std::vector<int> labels_;
    std::vector<ClusterStats> stats_;
    double total_error_ = 0;
    std::size_t refresh_interval_ = 1024;
    std::size_t moves_since_refresh_ = 0;
};

/// Total squared error of a labeling, from scratch. Every cluster in [0, m) must be nonempty.
double partition_energy(const Dataset& ds, std::span<const int> labels);

/// Standard deviation of the piecewise-constant approximation: sqrt(E / N).
double sigma(double error, std::size_t count);

/// Move acceptance tolerance shared by every correction routine.
inline double move_tolerance(double error) { return 1e-12 * (1.0 + error); }

}  // namespace kh

#endif  // KHCLUST_CORE_HPP
