#ifndef KHCLUST_ORACLE_HPP
#define KHCLUST_ORACLE_HPP

#include <cstdint>
#include <vector>

#include "core.hpp"

namespace kh {

/// Exhaustive search refuses datasets above this size.
inline constexpr std::size_t kOracleMaxPoints = 13;

struct OracleResult {
    std::size_t m = 0;
    double best_error = 0;
    std::vector<int> best_labels;
    std::uint64_t partitions_examined = 0;
};

/**
 * Global minimum of E over every partition into exactly m nonempty clusters,
 * enumerated as restricted growth strings. Ties keep the lexicographically
 * smallest string.
 */
OracleResult global_min(const Dataset& ds, std::size_t m);

/// Whether the global minimizer is stable under single-point moves between any clusters.
bool stability_is_necessary(const Dataset& ds, std::size_t m);

}  // namespace kh

#endif  // KHCLUST_ORACLE_HPP
