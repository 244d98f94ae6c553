#include "khclust/otsu.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <string>

namespace kh {

namespace {

struct Table {
    // cost[j][v]: best error of j + 1 clusters covering bins [0, v).
    std::vector<std::vector<double>> cost;
    std::vector<std::vector<std::size_t>> from;
};

Table solve(const Histogram& h, std::size_t m) {
    const std::size_t v_count = h.bins();
    if (v_count > kMaxHistogramBins) {
        throw SizeGuardError("threshold search limited to " + std::to_string(kMaxHistogramBins) +
                             " distinct values, got " + std::to_string(v_count));
    }
    if (m < 1 || m > v_count) {
        throw PreconditionError("cluster count must lie in [1, " + std::to_string(v_count) + "]");
    }
    const double inf = std::numeric_limits<double>::infinity();
    Table t;
    t.cost.assign(m, std::vector<double>(v_count + 1, inf));
    t.from.assign(m, std::vector<std::size_t>(v_count + 1, 0));
    for (std::size_t v = 1; v <= v_count; ++v) {
        t.cost[0][v] = h.range_error(0, v);
    }
    for (std::size_t j = 1; j < m; ++j) {
        for (std::size_t v = j + 1; v <= v_count; ++v) {
            double best = inf;
            std::size_t arg = j;
            for (std::size_t u = j; u < v; ++u) {
                const double c = t.cost[j - 1][u] + h.range_error(u, v);
                if (c < best) {
                    best = c;
                    arg = u;
                }
            }
            t.cost[j][v] = best;
            t.from[j][v] = arg;
        }
    }
    return t;
}

}  // namespace

std::size_t Histogram::total() const {
    return prefix_count.empty() ? 0 : static_cast<std::size_t>(prefix_count.back());
}

double Histogram::range_error(std::size_t lo, std::size_t hi) const {
    const double n = prefix_count[hi] - prefix_count[lo];
    if (n <= 0) {
        return 0;
    }
    const double s = prefix_sum[hi] - prefix_sum[lo];
    const double sq = prefix_sumsq[hi] - prefix_sumsq[lo];
    return std::max(0.0, sq - s * s / n);
}

Histogram build_histogram(std::span<const double> values) {
    if (values.empty()) {
        throw PreconditionError("histogram of no values");
    }
    std::map<double, std::size_t> bins;
    double mean = 0;
    for (double v : values) {
        ++bins[v];
        mean += v;
    }
    mean /= static_cast<double>(values.size());

    Histogram h;
    h.shift = mean;
    h.prefix_count.push_back(0);
    h.prefix_sum.push_back(0);
    h.prefix_sumsq.push_back(0);
    for (const auto& [v, c] : bins) {
        h.values.push_back(v);
        h.counts.push_back(c);
        const double x = v - mean;
        const double n = static_cast<double>(c);
        h.prefix_count.push_back(h.prefix_count.back() + n);
        h.prefix_sum.push_back(h.prefix_sum.back() + n * x);
        h.prefix_sumsq.push_back(h.prefix_sumsq.back() + n * x * x);
    }
    return h;
}

Histogram build_histogram(const Dataset& ds) {
    if (ds.dim() != 1) {
        throw PreconditionError("histogram needs 1-D data, got d = " + std::to_string(ds.dim()));
    }
    return build_histogram(std::span<const double>(ds.values()));
}

ThresholdResult optimal_thresholds(const Histogram& h, std::size_t m) {
    const auto t = solve(h, m);
    ThresholdResult r;
    r.error = t.cost[m - 1][h.bins()];
    std::size_t v = h.bins();
    for (std::size_t j = m - 1; j >= 1; --j) {
        const std::size_t u = t.from[j][v];
        r.cuts.push_back(u);
        v = u;
    }
    std::reverse(r.cuts.begin(), r.cuts.end());
    for (auto c : r.cuts) {
        r.thresholds.push_back(h.values[c]);
    }
    return r;
}

std::vector<CurvePoint> otsu_curve(const Histogram& h, std::size_t m_max) {
    const auto t = solve(h, m_max);
    std::vector<CurvePoint> out;
    for (std::size_t m = 1; m <= m_max; ++m) {
        const double e = t.cost[m - 1][h.bins()];
        out.push_back({m, e, sigma(e, h.total())});
    }
    return out;
}

std::vector<int> threshold_labels(std::span<const double> values, const ThresholdResult& t) {
    std::vector<int> out;
    out.reserve(values.size());
    for (double v : values) {
        const auto it = std::upper_bound(t.thresholds.begin(), t.thresholds.end(), v);
        out.push_back(static_cast<int>(it - t.thresholds.begin()));
    }
    return out;
}

}  // namespace kh
