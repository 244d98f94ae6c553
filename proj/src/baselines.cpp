#include "khclust/baselines.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <random>
#include <string>

namespace kh {

namespace {

std::vector<std::vector<double>> centroids_of(const Partition& p) {
    std::vector<std::vector<double>> out;
    out.reserve(p.num_clusters());
    for (const auto& s : p.stats()) {
        out.push_back(s.centroid());
    }
    return out;
}

std::vector<std::size_t> distinct_points(const Dataset& ds) {
    std::map<std::vector<double>, std::size_t> seen;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto r = ds.row(i);
        if (seen.emplace(std::vector<double>(r.begin(), r.end()), i).second) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::vector<double>> centers_from_labels(const Dataset& ds, const std::vector<int>& labels,
                                                     std::size_t m) {
    return centroids_of(Partition::from_labels(ds, labels, m));
}

std::vector<std::vector<double>> random_centers(const Dataset& ds, std::size_t m, std::uint64_t seed) {
    auto candidates = distinct_points(ds);
    std::mt19937_64 rng(seed);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::vector<std::vector<double>> centers;
    for (std::size_t j = 0; j < m; ++j) {
        // Fewer distinct points than m: reuse, the empty-cluster repair splits duplicates.
        auto r = ds.row(candidates[j % candidates.size()]);
        centers.emplace_back(r.begin(), r.end());
    }
    return centers;
}

}  // namespace

LloydResult lloyd_from_centers(const Dataset& ds, std::vector<std::vector<double>> centers, std::size_t max_iters) {
    const std::size_t n = ds.size();
    const std::size_t m = centers.size();
    if (m == 0 || m > n) {
        throw PreconditionError("lloyd needs 1 <= m <= N, got m = " + std::to_string(m));
    }
    for (const auto& c : centers) {
        if (c.size() != ds.dim()) {
            throw PreconditionError("center dimension does not match dataset");
        }
    }

    LloydResult result;
    std::vector<int> labels(n, -1);
    std::vector<double> dist(n, 0.0);
    std::vector<std::size_t> counts(m, 0);

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto x = ds.row(i);
            int best = -1;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < m; ++c) {
                const double d = squared_distance(x, centers[c]);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(c);
                }
            }
            const int cur = labels[i];
            if (cur >= 0 && cur != best) {
                const double d_cur = squared_distance(x, centers[cur]);
                if (d_cur <= best_d + move_tolerance(best_d)) {
                    best = cur;
                    best_d = d_cur;
                }
            }
            if (best != cur) {
                changed = true;
                labels[i] = best;
            }
            dist[i] = best_d;
            ++counts[best];
        }

        for (std::size_t c = 0; c < m; ++c) {
            if (counts[c] != 0) {
                continue;
            }
            std::size_t far = n;
            double far_d = -1;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[labels[i]] >= 2 && dist[i] > far_d) {
                    far_d = dist[i];
                    far = i;
                }
            }
            --counts[labels[far]];
            labels[far] = static_cast<int>(c);
            counts[c] = 1;
            dist[far] = 0;
            auto r = ds.row(far);
            centers[c].assign(r.begin(), r.end());
            changed = true;
        }

        result.partition = Partition::from_labels(ds, labels, m);
        result.energy_trace.push_back(result.partition.total_error());
        result.iterations = iter + 1;
        centers = centroids_of(result.partition);
        if (!changed) {
            result.converged = true;
            break;
        }
    }
    return result;
}

LloydResult lloyd(const Dataset& ds, const KMeansConfig& cfg) {
    if (cfg.m == 0 || cfg.m > ds.size()) {
        throw PreconditionError("k-means needs 1 <= m <= N");
    }
    switch (cfg.seeding) {
    case Seeding::provided_centers:
        if (cfg.centers.size() != cfg.m) {
            throw PreconditionError("expected " + std::to_string(cfg.m) + " initial centers");
        }
        return lloyd_from_centers(ds, cfg.centers, cfg.max_iters);
    case Seeding::provided_labels:
        return lloyd_from_centers(ds, centers_from_labels(ds, cfg.labels, cfg.m), cfg.max_iters);
    case Seeding::random_points:
        return lloyd_from_centers(ds, random_centers(ds, cfg.m, cfg.rng_seed), cfg.max_iters);
    case Seeding::incremental:
        break;
    }
    auto p = incremental_seed(ds, cfg.m, cfg.rng_seed);
    return lloyd_from_centers(ds, centroids_of(p), cfg.max_iters);
}

std::vector<Partition> incremental_sequence(const Dataset& ds, std::size_t m_max, std::uint64_t rng_seed) {
    if (m_max == 0 || m_max > ds.size()) {
        throw PreconditionError("incremental seeding needs 1 <= m <= N");
    }
    std::vector<Partition> out;
    out.push_back(Partition::from_labels(ds, std::vector<int>(ds.size(), 0), 1));

    auto candidates = distinct_points(ds);
    if (ds.size() > 2000 && candidates.size() > 512) {
        std::vector<std::size_t> picked;
        std::mt19937_64 rng(rng_seed);
        std::sample(candidates.begin(), candidates.end(), std::back_inserter(picked), 512, rng);
        candidates = std::move(picked);
    }

    for (std::size_t m = 2; m <= m_max; ++m) {
        const auto base = centroids_of(out.back());
        LloydResult best;
        bool have = false;
        for (auto idx : candidates) {
            auto centers = base;
            auto r = ds.row(idx);
            centers.emplace_back(r.begin(), r.end());
            auto res = lloyd_from_centers(ds, std::move(centers));
            if (!have || res.partition.total_error() < best.partition.total_error()) {
                best = std::move(res);
                have = true;
            }
        }
        out.push_back(std::move(best.partition));
    }
    return out;
}

Partition incremental_seed(const Dataset& ds, std::size_t m, std::uint64_t rng_seed) {
    return std::move(incremental_sequence(ds, m, rng_seed).back());
}

bool is_lloyd_fixed_point(const Dataset& ds, const Partition& p) {
    const auto centers = centroids_of(p);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto x = ds.row(i);
        const double own = squared_distance(x, centers[p.label(i)]);
        for (std::size_t c = 0; c < centers.size(); ++c) {
            if (static_cast<int>(c) == p.label(i)) {
                continue;
            }
            if (squared_distance(x, centers[c]) < own - move_tolerance(own)) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace kh
