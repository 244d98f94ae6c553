#include "khclust/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kh {

Dataset::Dataset(std::size_t n, std::size_t d, std::vector<double> values)
    : n_(n), d_(d), values_(std::move(values)) {
    if (n_ == 0 || d_ == 0) {
        throw PreconditionError("dataset needs at least one point and one dimension");
    }
    if (values_.size() != n_ * d_) {
        throw PreconditionError("dataset value count does not match " + std::to_string(n_) + "x" +
                                std::to_string(d_));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw PreconditionError("non-finite coordinate at row " + std::to_string(i / d_));
        }
    }
}

Dataset Dataset::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) {
        throw PreconditionError("dataset needs at least one point");
    }
    const std::size_t d = rows.front().size();
    std::vector<double> values;
    values.reserve(rows.size() * d);
    for (const auto& r : rows) {
        if (r.size() != d) {
            throw PreconditionError("ragged rows");
        }
        values.insert(values.end(), r.begin(), r.end());
    }
    return Dataset(rows.size(), d, std::move(values));
}

Dataset Dataset::from_values(std::span<const double> values) {
    return Dataset(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

void ClusterStats::add(std::span<const double> x) {
    if (sum.empty()) {
        sum.assign(x.size(), 0.0);
    }
    double sq = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        sum[j] += x[j];
        sq += x[j] * x[j];
    }
    sumsq += sq;
    ++n;
}

void ClusterStats::remove(std::span<const double> x) {
    if (n == 0) {
        throw PreconditionError("removing a point from an empty cluster");
    }
    --n;
    if (n == 0) {
        std::fill(sum.begin(), sum.end(), 0.0);
        sumsq = 0;
        return;
    }
    double sq = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        sum[j] -= x[j];
        sq += x[j] * x[j];
    }
    sumsq -= sq;
}

void ClusterStats::absorb(const ClusterStats& other) {
    if (sum.empty()) {
        sum.assign(other.sum.size(), 0.0);
    }
    for (std::size_t j = 0; j < other.sum.size(); ++j) {
        sum[j] += other.sum[j];
    }
    sumsq += other.sumsq;
    n += other.n;
}

void ClusterStats::release(const ClusterStats& other) {
    if (other.n > n) {
        throw PreconditionError("releasing more points than the cluster holds");
    }
    n -= other.n;
    if (n == 0) {
        std::fill(sum.begin(), sum.end(), 0.0);
        sumsq = 0;
        return;
    }
    for (std::size_t j = 0; j < other.sum.size(); ++j) {
        sum[j] -= other.sum[j];
    }
    sumsq -= other.sumsq;
}

std::vector<double> ClusterStats::centroid() const {
    if (n == 0) {
        throw PreconditionError("centroid of an empty cluster");
    }
    std::vector<double> c(sum);
    for (auto& v : c) {
        v /= static_cast<double>(n);
    }
    return c;
}

double ClusterStats::error() const {
    if (n == 0) {
        return 0;
    }
    double norm2 = 0;
    for (double s : sum) {
        norm2 += s * s;
    }
    const double e = sumsq - norm2 / static_cast<double>(n);
    if (e >= 0) {
        return e;
    }
    if (-e <= 1e-9 * (1.0 + sumsq)) {
        return 0;
    }
    throw ConsistencyError("negative cluster error " + std::to_string(e));
}

ClusterStats stats_of_subset(const Dataset& ds, std::span<const std::size_t> idx) {
    if (idx.empty()) {
        throw PreconditionError("empty subset");
    }
    std::vector<std::size_t> sorted(idx.begin(), idx.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw PreconditionError("duplicate index in subset");
    }
    if (sorted.back() >= ds.size()) {
        throw PreconditionError("subset index " + std::to_string(sorted.back()) + " out of range");
    }
    ClusterStats out(ds.dim());
    for (auto i : idx) {
        out.add(ds.row(i));
    }
    return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double t = a[j] - b[j];
        acc += t * t;
    }
    return acc;
}

Partition Partition::from_labels(const Dataset& ds, std::vector<int> labels, std::size_t m) {
    if (labels.size() != ds.size()) {
        throw PreconditionError("label count does not match dataset size");
    }
    if (m == 0) {
        throw PreconditionError("partition needs at least one cluster");
    }
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= m) {
            throw PreconditionError("label " + std::to_string(l) + " out of range");
        }
    }
    Partition p;
    p.labels_ = std::move(labels);
    p.stats_.assign(m, ClusterStats(ds.dim()));
    p.recompute(ds);
    return p;
}

Partition Partition::from_labels(const Dataset& ds, std::vector<int> labels) {
    int mx = -1;
    for (int l : labels) {
        mx = std::max(mx, l);
    }
    return from_labels(ds, std::move(labels), static_cast<std::size_t>(mx + 1));
}

std::vector<std::size_t> Partition::members(std::size_t c) const {
    std::vector<std::size_t> out;
    out.reserve(stats_[c].n);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == static_cast<int>(c)) {
            out.push_back(i);
        }
    }
    return out;
}

void Partition::recompute(const Dataset& ds) {
    for (auto& s : stats_) {
        s = ClusterStats(ds.dim());
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        stats_[labels_[i]].add(ds.row(i));
    }
    total_error_ = 0;
    for (std::size_t c = 0; c < stats_.size(); ++c) {
        if (stats_[c].n == 0) {
            throw PreconditionError("cluster " + std::to_string(c) + " is empty");
        }
        total_error_ += stats_[c].error();
    }
    moves_since_refresh_ = 0;
}

void Partition::apply_move(const Dataset& ds, std::span<const std::size_t> idx, int donor, int acceptor) {
    const int m = static_cast<int>(stats_.size());
    if (donor < 0 || donor >= m || acceptor < 0 || acceptor >= m || donor == acceptor) {
        throw PreconditionError("invalid donor/acceptor pair");
    }
    if (idx.empty()) {
        throw PreconditionError("empty move subset");
    }
    std::vector<std::size_t> sorted(idx.begin(), idx.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw PreconditionError("duplicate index in move subset");
    }
    for (auto i : sorted) {
        if (i >= labels_.size() || labels_[i] != donor) {
            throw PreconditionError("move subset contains a point outside the donor cluster");
        }
    }
    if (sorted.size() >= stats_[donor].n) {
        throw PreconditionError("subset is the whole donor cluster; use merge");
    }

    const double before = stats_[donor].error() + stats_[acceptor].error();
    for (auto i : sorted) {
        stats_[donor].remove(ds.row(i));
        stats_[acceptor].add(ds.row(i));
        labels_[i] = acceptor;
    }
    const double after = stats_[donor].error() + stats_[acceptor].error();
    total_error_ += after - before;

    if (refresh_interval_ != 0 && ++moves_since_refresh_ >= refresh_interval_) {
        recompute(ds);
    }
}

void Partition::merge_clusters(const Dataset& ds, int a, int b) {
    const int m = static_cast<int>(stats_.size());
    if (a < 0 || a >= m || b < 0 || b >= m || a == b) {
        throw PreconditionError("invalid merge pair");
    }
    const double before = stats_[a].error() + stats_[b].error();
    stats_[a].absorb(stats_[b]);
    const double after = stats_[a].error();
    stats_.erase(stats_.begin() + b);
    for (auto& l : labels_) {
        if (l == b) {
            l = a;
        }
    }
    for (auto& l : labels_) {
        if (l > b) {
            --l;
        }
    }
    total_error_ += after - before;
    if (refresh_interval_ != 0 && ++moves_since_refresh_ >= refresh_interval_) {
        recompute(ds);
    }
}

void Partition::audit(const Dataset& ds) const {
    Partition fresh;
    fresh.labels_ = labels_;
    fresh.stats_.assign(stats_.size(), ClusterStats(ds.dim()));
    fresh.recompute(ds);
    for (std::size_t c = 0; c < stats_.size(); ++c) {
        if (fresh.stats_[c].n != stats_[c].n) {
            throw ConsistencyError("cluster count drift in cluster " + std::to_string(c));
        }
    }
    const double tol = 1e-9 * (1.0 + fresh.total_error_);
    if (std::abs(fresh.total_error_ - total_error_) > tol) {
        throw ConsistencyError("total error drift: tracked " + std::to_string(total_error_) + " vs " +
                               std::to_string(fresh.total_error_));
    }
}

double partition_energy(const Dataset& ds, std::span<const int> labels) {
    if (labels.size() != ds.size()) {
        throw PreconditionError("label count does not match dataset size");
    }
    int mx = -1;
    for (int l : labels) {
        if (l < 0) {
            throw PreconditionError("negative label");
        }
        mx = std::max(mx, l);
    }
    std::vector<ClusterStats> stats(static_cast<std::size_t>(mx + 1), ClusterStats(ds.dim()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        stats[labels[i]].add(ds.row(i));
    }
    double e = 0;
    for (std::size_t c = 0; c < stats.size(); ++c) {
        if (stats[c].n == 0) {
            throw PreconditionError("cluster " + std::to_string(c) + " is empty");
        }
        e += stats[c].error();
    }
    return e;
}

double sigma(double error, std::size_t count) {
    if (count == 0) {
        throw PreconditionError("sigma needs at least one point");
    }
    if (error < 0) {
        throw PreconditionError("negative error");
    }
    return std::sqrt(error / static_cast<double>(count));
}

}  // namespace kh
