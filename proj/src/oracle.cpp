#include "khclust/oracle.hpp"

#include <limits>
#include <string>

#include "khclust/engine.hpp"

namespace kh {

OracleResult global_min(const Dataset& ds, std::size_t m) {
    const std::size_t n = ds.size();
    if (n > kOracleMaxPoints) {
        throw SizeGuardError("exhaustive search limited to " + std::to_string(kOracleMaxPoints) + " points, got " +
                             std::to_string(n));
    }
    if (m < 1 || m > n) {
        throw PreconditionError("cluster count must lie in [1, N]");
    }

    OracleResult res;
    res.m = m;
    res.best_error = std::numeric_limits<double>::infinity();
    std::vector<int> rgs(n, 0);
    std::vector<ClusterStats> blocks(m, ClusterStats(ds.dim()));

    auto recurse = [&](auto&& self, std::size_t i, std::size_t used) -> void {
        if (i == n) {
            if (used != m) {
                return;
            }
            ++res.partitions_examined;
            double e = 0;
            for (const auto& b : blocks) {
                e += b.error();
            }
            if (e < res.best_error) {
                res.best_error = e;
                res.best_labels = rgs;
            }
            return;
        }
        const std::size_t open = std::min(used + 1, m);
        for (std::size_t b = 0; b < open; ++b) {
            const std::size_t now_used = std::max(used, b + 1);
            if (m - now_used > n - i - 1) {
                continue;
            }
            const ClusterStats saved = blocks[b];
            blocks[b].add(ds.row(i));
            rgs[i] = static_cast<int>(b);
            self(self, i + 1, now_used);
            blocks[b] = saved;
        }
    };
    recurse(recurse, 0, 0);
    return res;
}

bool stability_is_necessary(const Dataset& ds, std::size_t m) {
    const auto best = global_min(ds, m);
    const auto p = Partition::from_labels(ds, best.best_labels, m);
    return verify_stability(ds, p, {SubsetMode::singletons}, PairScope::all_pairs()).stable;
}

}  // namespace kh
