#ifndef KHCLUST_RECLASS_HPP
#define KHCLUST_RECLASS_HPP

#include <span>

#include "core.hpp"

/**
 * @file reclass.hpp
 * @brief Closed-form change of the total squared error when a subset of
 * points is reclassified from one cluster into another.
 *
 * Notation used below: a subset of k points with mean I is taken out of a
 * donor cluster (n1 points, mean I1) and put into an acceptor cluster
 * (n2 points, mean I2).
 */

namespace kh {

enum class DeltaKind { merge, correct };

struct DeltaE {
    double value = 0;
    DeltaKind kind = DeltaKind::correct;
};

/**
 * Increase of E caused by merging two clusters:
 * |I1 - I2|^2 / (1/n1 + 1/n2). Never negative.
 */
double delta_e_merge(const ClusterStats& a, const ClusterStats& b);

/**
 * Change of E caused by moving `sub` (k < n1 points of `donor`) into `acceptor`:
 * |I - I2|^2 / (1/k + 1/n2) - |I - I1|^2 / (1/k - 1/n1).
 *
 * `sub` must be a sub-statistic of `donor`; only k <= n1 can be checked here.
 */
double delta_e_correct(const ClusterStats& sub, const ClusterStats& donor, const ClusterStats& acceptor);

/// Merge formula when the subset is the whole donor, correction formula otherwise.
DeltaE reclass_delta(const ClusterStats& sub, const ClusterStats& donor, const ClusterStats& acceptor);

/// sqrt(n2 (n1 - k) / (n1 (n2 + k))), in [0, 1); zero when k = n1.
double alpha(std::size_t k, std::size_t n1, std::size_t n2);

/**
 * True iff |I - I1| > alpha |I - I2|, i.e. the move strictly lowers E.
 * Evaluated on squared norms cleared of denominators.
 */
bool correction_improves(const ClusterStats& sub, const ClusterStats& donor, const ClusterStats& acceptor);

/// Negation of correction_improves: the move does not lower E.
bool is_stable_move(const ClusterStats& sub, const ClusterStats& donor, const ClusterStats& acceptor);

/// Increase of E caused by merging l >= 2 clusters: sum_{i<j} n_i n_j |I_i - I_j|^2 / sum n_i.
double merge_many(std::span<const ClusterStats> clusters);

/**
 * |alpha (I - I2) - (I - I1) / alpha|^2 / (1/n1 + 1/n2), which equals
 * delta_e_merge(donor, acceptor) - delta_e_correct(sub, donor, acceptor).
 * Diagnostic only.
 */
double gap_identity(const ClusterStats& sub, const ClusterStats& donor, const ClusterStats& acceptor);

namespace detail {

/// delta_e_correct on raw centroids, for hot loops that cache means.
inline double correct_delta(double k, std::span<const double> sub_mean, double n1,
                            std::span<const double> donor_mean, double n2,
                            std::span<const double> acceptor_mean) {
    const double to_acceptor = squared_distance(sub_mean, acceptor_mean);
    const double to_donor = squared_distance(sub_mean, donor_mean);
    return to_acceptor / (1.0 / k + 1.0 / n2) - to_donor / (1.0 / k - 1.0 / n1);
}

}  // namespace detail

}  // namespace kh

#endif  // KHCLUST_RECLASS_HPP
