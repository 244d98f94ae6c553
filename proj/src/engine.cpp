#include "khclust/engine.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>
#include <tuple>

#include "khclust/baselines.hpp"
#include "khclust/reclass.hpp"

namespace kh {

namespace {

using RowKey = std::vector<std::uint64_t>;

RowKey row_key(std::span<const double> r) {
    RowKey key(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) {
        key[j] = std::bit_cast<std::uint64_t>(r[j]);
    }
    return key;
}

/// Flattened move candidates of one sweep.
struct Candidates {
    std::size_t dim = 0;
    std::vector<int> donor;
    std::vector<std::vector<std::size_t>> subset;
    std::vector<double> means;

    std::size_t size() const { return donor.size(); }
    std::span<const double> mean(std::size_t c) const { return {means.data() + c * dim, dim}; }
    std::size_t min_index(std::size_t c) const { return subset[c].front(); }
};

Candidates gather(const Dataset& ds, const Partition& p, SubsetPolicy policy) {
    Candidates out;
    out.dim = ds.dim();
    const auto per_cluster = candidate_subsets(ds, p, policy);
    for (std::size_t c = 0; c < per_cluster.size(); ++c) {
        for (const auto& sub : per_cluster[c]) {
            out.donor.push_back(static_cast<int>(c));
            out.subset.push_back(sub);
            std::vector<double> acc(ds.dim(), 0.0);
            for (auto i : sub) {
                auto r = ds.row(i);
                for (std::size_t j = 0; j < acc.size(); ++j) {
                    acc[j] += r[j];
                }
            }
            for (auto v : acc) {
                out.means.push_back(v / static_cast<double>(sub.size()));
            }
        }
    }
    return out;
}

std::vector<double> flat_centroids(const Partition& p, std::size_t dim) {
    std::vector<double> out;
    out.reserve(p.num_clusters() * dim);
    for (const auto& s : p.stats()) {
        for (double v : s.sum) {
            out.push_back(v / static_cast<double>(s.n));
        }
    }
    return out;
}

struct SingleMove {
    double delta = std::numeric_limits<double>::infinity();
    int donor = -1;
    int acceptor = -1;
    std::size_t cand = 0;
};

bool precedes(const SingleMove& a, const SingleMove& b, const Candidates& cands) {
    if (a.delta != b.delta) {
        return a.delta < b.delta;
    }
    return std::make_tuple(a.donor, a.acceptor, cands.min_index(a.cand), cands.subset[a.cand].size()) <
           std::make_tuple(b.donor, b.acceptor, cands.min_index(b.cand), cands.subset[b.cand].size());
}

/// Calls fn(move) for every admissible single move with its predicted change of E.
template <class Fn>
void for_each_move(const Partition& p, const Candidates& cands, const PairScope& scope, Fn&& fn) {
    const std::size_t m = p.num_clusters();
    const std::size_t dim = cands.dim;
    const auto centroids = flat_centroids(p, dim);
    std::vector<std::vector<char>> adj;
    if (scope.mode() == PairScope::Mode::adjacency) {
        adj = scope.cluster_adjacency(p);
    }
    for (std::size_t c = 0; c < cands.size(); ++c) {
        const int donor = cands.donor[c];
        const std::size_t n1 = p.stats(donor).n;
        const std::size_t k = cands.subset[c].size();
        if (k >= n1) {
            continue;
        }
        std::span<const double> donor_mean(centroids.data() + donor * dim, dim);
        for (std::size_t a = 0; a < m; ++a) {
            if (static_cast<int>(a) == donor || (!adj.empty() && !adj[donor][a])) {
                continue;
            }
            std::span<const double> acc_mean(centroids.data() + a * dim, dim);
            SingleMove mv;
            mv.delta = detail::correct_delta(static_cast<double>(k), cands.mean(c), static_cast<double>(n1),
                                             donor_mean, static_cast<double>(p.stats(a).n), acc_mean);
            mv.donor = donor;
            mv.acceptor = static_cast<int>(a);
            mv.cand = c;
            fn(mv);
        }
    }
}

std::optional<SingleMove> best_single_move(const Partition& p, const Candidates& cands, const PairScope& scope) {
    SingleMove best;
    bool have = false;
    for_each_move(p, cands, scope, [&](const SingleMove& mv) {
        if (!have || precedes(mv, best, cands)) {
            best = mv;
            have = true;
        }
    });
    if (!have) {
        return std::nullopt;
    }
    return best;
}

template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < count; i += threads) {
                    fn(i);
                }
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) {
        w.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

/// Merge cost of a group of clusters given as counts and flat coordinate sums.
double merge_cost(std::span<const double> counts, std::span<const double> sums, std::size_t dim) {
    const std::size_t l = counts.size();
    double total = 0;
    double acc = 0;
    for (std::size_t i = 0; i < l; ++i) {
        total += counts[i];
        for (std::size_t j = i + 1; j < l; ++j) {
            double d2 = 0;
            for (std::size_t t = 0; t < dim; ++t) {
                const double diff = sums[i * dim + t] / counts[i] - sums[j * dim + t] / counts[j];
                d2 += diff * diff;
            }
            acc += counts[i] * counts[j] * d2;
        }
    }
    return acc / total;
}

struct CompoundMove {
    double delta = std::numeric_limits<double>::infinity();
    std::vector<int> tuple;
    /// (candidate, acceptor) pairs.
    std::vector<std::pair<std::size_t, int>> moves;
};

bool tuple_connected(const std::vector<int>& tuple, const std::vector<std::vector<char>>& adj) {
    if (adj.empty()) {
        return true;
    }
    std::vector<char> seen(tuple.size(), 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (std::size_t v = 0; v < tuple.size(); ++v) {
            if (!seen[v] && adj[tuple[u]][tuple[v]]) {
                seen[v] = 1;
                ++reached;
                stack.push_back(v);
            }
        }
    }
    return reached == tuple.size();
}

std::size_t binomial_capped(std::size_t n, std::size_t r, std::size_t cap) {
    if (r > n) {
        return 0;
    }
    double acc = 1;
    for (std::size_t i = 0; i < r; ++i) {
        acc = acc * static_cast<double>(n - i) / static_cast<double>(i + 1);
        if (acc > static_cast<double>(cap)) {
            return cap + 1;
        }
    }
    return static_cast<std::size_t>(acc + 0.5);
}

/// Best single moves per ordered (donor, acceptor) cluster pair, at most `keep` each, best first.
std::vector<std::vector<SingleMove>> pair_buckets(const Dataset& ds, const Partition& p, const Candidates& cands,
                                                  const std::vector<std::vector<char>>& adj, std::size_t keep) {
    const std::size_t m = p.num_clusters();
    const std::size_t dim = ds.dim();
    const auto centroids = flat_centroids(p, dim);
    std::vector<std::vector<SingleMove>> buckets(m * m);
    for (std::size_t c = 0; c < cands.size(); ++c) {
        const int d = cands.donor[c];
        const std::size_t n1 = p.stats(d).n;
        const std::size_t k = cands.subset[c].size();
        if (k >= n1) {
            continue;
        }
        for (std::size_t a = 0; a < m; ++a) {
            if (static_cast<int>(a) == d || (!adj.empty() && !adj[d][a])) {
                continue;
            }
            SingleMove mv;
            mv.delta = detail::correct_delta(static_cast<double>(k), cands.mean(c), static_cast<double>(n1),
                                             {centroids.data() + d * dim, dim},
                                             static_cast<double>(p.stats(a).n), {centroids.data() + a * dim, dim});
            mv.donor = d;
            mv.acceptor = static_cast<int>(a);
            mv.cand = c;
            buckets[d * m + a].push_back(mv);
        }
    }
    for (auto& b : buckets) {
        std::sort(b.begin(), b.end(), [&](const SingleMove& x, const SingleMove& y) { return precedes(x, y, cands); });
        if (b.size() > keep) {
            b.resize(keep);
        }
    }
    return buckets;
}

/// Best compound move of l - 1 simultaneous reclassifications within one tuple.
void search_tuple(const Dataset& ds, const Partition& p, const Candidates& cands,
                  const std::vector<std::vector<SingleMove>>& all_buckets, const std::vector<int>& tuple,
                  const EngineOptions& opts, CompoundMove& best) {
    const std::size_t l = tuple.size();
    const std::size_t m = p.num_clusters();
    const std::size_t dim = ds.dim();
    const std::size_t pairs = l * (l - 1);
    const std::size_t r = l - 1;

    std::vector<int> pos(m, -1);
    for (std::size_t i = 0; i < l; ++i) {
        pos[tuple[i]] = static_cast<int>(i);
    }

    std::size_t per_pair = std::max<std::size_t>(1, opts.tuple_candidates);
    while (per_pair > 1 && binomial_capped(pairs * per_pair, r, opts.tuple_budget) > opts.tuple_budget) {
        --per_pair;
    }
    std::vector<SingleMove> pool;
    for (std::size_t di = 0; di < l; ++di) {
        for (std::size_t ai = 0; ai < l; ++ai) {
            if (di == ai) {
                continue;
            }
            const auto& b = all_buckets[tuple[di] * m + tuple[ai]];
            for (std::size_t i = 0; i < std::min(per_pair, b.size()); ++i) {
                pool.push_back(b[i]);
            }
        }
    }
    if (pool.size() < r) {
        return;
    }

    std::vector<double> base_counts(l), base_sums(l * dim);
    for (std::size_t i = 0; i < l; ++i) {
        const auto& s = p.stats(tuple[i]);
        base_counts[i] = static_cast<double>(s.n);
        std::copy(s.sum.begin(), s.sum.end(), base_sums.begin() + i * dim);
    }
    const double before = merge_cost(base_counts, base_sums, dim);

    // Per-candidate coordinate sums, for the converted statistics.
    std::vector<std::vector<double>> sub_sums(pool.size(), std::vector<double>(dim, 0.0));
    for (std::size_t q = 0; q < pool.size(); ++q) {
        for (auto i : cands.subset[pool[q].cand]) {
            auto row = ds.row(i);
            for (std::size_t t = 0; t < dim; ++t) {
                sub_sums[q][t] += row[t];
            }
        }
    }

    std::vector<std::size_t> chosen;
    std::vector<double> counts = base_counts;
    std::vector<double> sums = base_sums;
    std::vector<std::size_t> removed(l, 0);
    std::vector<std::size_t> used_points;
    const double tol = move_tolerance(p.total_error());

    auto overlaps = [&](std::size_t q) {
        for (auto i : cands.subset[pool[q].cand]) {
            if (std::find(used_points.begin(), used_points.end(), i) != used_points.end()) {
                return true;
            }
        }
        return false;
    };

    auto spans_tuple = [&]() {
        std::vector<std::size_t> parent(l);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](std::size_t x) {
            while (parent[x] != x) {
                x = parent[x] = parent[parent[x]];
            }
            return x;
        };
        std::size_t joined = 0;
        for (auto q : chosen) {
            const auto a = find(static_cast<std::size_t>(pos[pool[q].donor]));
            const auto b = find(static_cast<std::size_t>(pos[pool[q].acceptor]));
            if (a != b) {
                parent[a] = b;
                ++joined;
            }
        }
        return joined == l - 1;
    };

    auto recurse = [&](auto&& self, std::size_t start) -> void {
        if (chosen.size() == r) {
            if (!spans_tuple()) {
                return;
            }
            const double delta = before - merge_cost(counts, sums, dim);
            if (delta < -tol && delta < best.delta) {
                best.delta = delta;
                best.tuple = tuple;
                best.moves.clear();
                for (auto q : chosen) {
                    best.moves.emplace_back(pool[q].cand, pool[q].acceptor);
                }
            }
            return;
        }
        for (std::size_t q = start; q < pool.size(); ++q) {
            const auto& mv = pool[q];
            const std::size_t di = pos[mv.donor];
            const std::size_t ai = pos[mv.acceptor];
            const std::size_t k = cands.subset[mv.cand].size();
            if (removed[di] + k >= p.stats(mv.donor).n || overlaps(q)) {
                continue;
            }
            chosen.push_back(q);
            removed[di] += k;
            counts[di] -= static_cast<double>(k);
            counts[ai] += static_cast<double>(k);
            for (std::size_t t = 0; t < dim; ++t) {
                sums[di * dim + t] -= sub_sums[q][t];
                sums[ai * dim + t] += sub_sums[q][t];
            }
            const auto& pts = cands.subset[mv.cand];
            used_points.insert(used_points.end(), pts.begin(), pts.end());

            self(self, q + 1);

            used_points.resize(used_points.size() - pts.size());
            for (std::size_t t = 0; t < dim; ++t) {
                sums[di * dim + t] += sub_sums[q][t];
                sums[ai * dim + t] -= sub_sums[q][t];
            }
            counts[di] += static_cast<double>(k);
            counts[ai] -= static_cast<double>(k);
            removed[di] -= k;
            chosen.pop_back();
        }
    };
    recurse(recurse, 0);
}

std::optional<CompoundMove> best_compound_move(const Dataset& ds, const Partition& p, const Candidates& cands,
                                               std::size_t l, const PairScope& scope, const EngineOptions& opts) {
    const std::size_t m = p.num_clusters();
    if (l < 3 || l > m) {
        return std::nullopt;
    }
    std::vector<std::vector<char>> adj;
    if (scope.mode() == PairScope::Mode::adjacency) {
        adj = scope.cluster_adjacency(p);
    }
    const auto buckets = pair_buckets(ds, p, cands, adj, std::max<std::size_t>(1, opts.tuple_candidates));
    CompoundMove best;
    std::vector<int> tuple(l);
    std::iota(tuple.begin(), tuple.end(), 0);
    while (true) {
        if (tuple_connected(tuple, adj)) {
            // Strict improvement only, so ties keep the lexicographically first tuple.
            search_tuple(ds, p, cands, buckets, tuple, opts, best);
        }
        int i = static_cast<int>(l) - 1;
        while (i >= 0 && tuple[i] == static_cast<int>(m - l + i)) {
            --i;
        }
        if (i < 0) {
            break;
        }
        ++tuple[i];
        for (std::size_t j = i + 1; j < l; ++j) {
            tuple[j] = tuple[j - 1] + 1;
        }
    }
    if (best.moves.empty()) {
        return std::nullopt;
    }
    return best;
}

bool has_two_distinct(const Dataset& ds, const std::vector<std::size_t>& members) {
    for (std::size_t i = 1; i < members.size(); ++i) {
        if (squared_distance(ds.row(members[0]), ds.row(members[i])) > 0) {
            return true;
        }
    }
    return false;
}

/// Bisects cluster c of p; the second half gets label m.
Partition bisect(const Dataset& ds, const Partition& p, std::size_t c) {
    const auto members = p.members(c);
    std::size_t fa = 0, fb = 0;
    double far = -1;
    for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i + 1; j < members.size(); ++j) {
            const double d = squared_distance(ds.row(members[i]), ds.row(members[j]));
            if (d > far) {
                far = d;
                fa = i;
                fb = j;
            }
        }
    }
    std::vector<double> values;
    values.reserve(members.size() * ds.dim());
    for (auto i : members) {
        auto r = ds.row(i);
        values.insert(values.end(), r.begin(), r.end());
    }
    const Dataset sub(members.size(), ds.dim(), std::move(values));
    auto ra = sub.row(fa);
    auto rb = sub.row(fb);
    auto halves = lloyd_from_centers(sub, {{ra.begin(), ra.end()}, {rb.begin(), rb.end()}});

    auto labels = p.labels();
    const int fresh = static_cast<int>(p.num_clusters());
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (halves.partition.label(i) == 1) {
            labels[members[i]] = fresh;
        }
    }
    return Partition::from_labels(ds, std::move(labels), p.num_clusters() + 1);
}

}  // namespace

PairScope PairScope::adjacency(std::vector<std::pair<std::size_t, std::size_t>> point_edges) {
    PairScope s;
    s.mode_ = Mode::adjacency;
    s.edges_ = std::move(point_edges);
    return s;
}

std::vector<std::vector<char>> PairScope::cluster_adjacency(const Partition& p) const {
    const std::size_t m = p.num_clusters();
    std::vector<std::vector<char>> adj(m, std::vector<char>(m, mode_ == Mode::all_pairs ? 1 : 0));
    if (mode_ == Mode::adjacency) {
        for (const auto& [u, v] : edges_) {
            const int a = p.label(u);
            const int b = p.label(v);
            if (a != b) {
                adj[a][b] = adj[b][a] = 1;
            }
        }
    }
    for (std::size_t c = 0; c < m; ++c) {
        adj[c][c] = 0;
    }
    return adj;
}

PairScope sorted_value_adjacency(const Dataset& ds) {
    if (ds.dim() != 1) {
        throw PreconditionError("value adjacency needs 1-D data");
    }
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ds.row(a)[0] < ds.row(b)[0]; });
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 1; i < order.size(); ++i) {
        edges.emplace_back(order[i - 1], order[i]);
    }
    return PairScope::adjacency(std::move(edges));
}

std::vector<std::vector<std::vector<std::size_t>>> candidate_subsets(const Dataset& ds, const Partition& p,
                                                                     SubsetPolicy policy) {
    const std::size_t m = p.num_clusters();
    std::vector<std::vector<std::vector<std::size_t>>> out(m);
    const bool singles = policy.mode != SubsetMode::identical_groups;
    const bool groups = policy.mode != SubsetMode::singletons;

    for (std::size_t c = 0; c < m; ++c) {
        const auto members = p.members(c);
        std::vector<std::vector<std::size_t>> group_list;
        if (groups) {
            std::map<RowKey, std::size_t> slot;
            for (auto i : members) {
                auto [it, inserted] = slot.emplace(row_key(ds.row(i)), group_list.size());
                if (inserted) {
                    group_list.emplace_back();
                }
                group_list[it->second].push_back(i);
            }
        }
        if (singles) {
            for (auto i : members) {
                if (members.size() > 1) {
                    out[c].push_back({i});
                }
            }
        }
        for (auto& g : group_list) {
            if (g.size() == members.size()) {
                continue;
            }
            if (singles && g.size() == 1) {
                continue;
            }
            out[c].push_back(std::move(g));
        }
        std::sort(out[c].begin(), out[c].end(), [](const auto& a, const auto& b) {
            return std::make_pair(a.front(), a.size()) < std::make_pair(b.front(), b.size());
        });
    }
    return out;
}

CorrectionResult correct_pairs(const Dataset& ds, Partition p, SubsetPolicy policy, const PairScope& scope) {
    CorrectionResult res;
    if (p.num_clusters() < 2) {
        res.noop = true;
        res.partition = std::move(p);
        res.energy_by_tuple_size.push_back(res.partition.total_error());
        return res;
    }
    while (true) {
        const auto cands = gather(ds, p, policy);
        const auto best = best_single_move(p, cands, scope);
        if (!best || !(best->delta < -move_tolerance(p.total_error()))) {
            break;
        }
        p.apply_move(ds, cands.subset[best->cand], best->donor, best->acceptor);
        ++res.moves;
    }
    res.partition = std::move(p);
    res.energy_by_tuple_size.push_back(res.partition.total_error());
    return res;
}

StabilityReport verify_stability(const Dataset& ds, const Partition& p, SubsetPolicy policy, const PairScope& scope) {
    StabilityReport report;
    if (p.num_clusters() < 2) {
        return report;
    }
    const auto cands = gather(ds, p, policy);
    const auto adj = scope.cluster_adjacency(p);
    for (std::size_t a = 0; a < adj.size(); ++a) {
        for (std::size_t b = 0; b < adj.size(); ++b) {
            report.checked_pairs += adj[a][b] ? 1 : 0;
        }
    }
    const double tol = move_tolerance(p.total_error());
    for_each_move(p, cands, scope, [&](const SingleMove& mv) {
        ++report.checked_subsets;
        if (mv.delta < -tol) {
            report.violations.push_back({mv.donor, mv.acceptor, cands.subset[mv.cand], mv.delta});
        }
    });
    report.stable = report.violations.empty();
    return report;
}

CorrectionResult correct_tuples(const Dataset& ds, Partition p, std::size_t l_max, SubsetPolicy policy,
                                const PairScope& scope, const EngineOptions& opts) {
    if (l_max < 2) {
        throw PreconditionError("tuple size must be at least 2");
    }
    auto res = correct_pairs(ds, std::move(p), policy, scope);
    if (res.noop) {
        return res;
    }
    const std::size_t top = std::min(l_max, res.partition.num_clusters());
    res.energy_by_tuple_size.resize(std::max<std::size_t>(1, l_max - 1), res.partition.total_error());

    bool progressed = true;
    while (progressed) {
        progressed = false;
        for (std::size_t l = 3; l <= top; ++l) {
            while (true) {
                const auto cands = gather(ds, res.partition, policy);
                const auto best = best_compound_move(ds, res.partition, cands, l, scope, opts);
                if (!best) {
                    break;
                }
                for (const auto& [cand, acceptor] : best->moves) {
                    res.partition.apply_move(ds, cands.subset[cand], cands.donor[cand], acceptor);
                }
                ++res.compound_moves;
                progressed = true;
                auto again = correct_pairs(ds, std::move(res.partition), policy, scope);
                res.moves += again.moves;
                res.partition = std::move(again.partition);
            }
            res.energy_by_tuple_size[l - 2] = res.partition.total_error();
        }
    }
    for (std::size_t l = top + 1; l <= l_max; ++l) {
        res.energy_by_tuple_size[l - 2] = res.partition.total_error();
    }
    return res;
}

CorrectionResult merge_step(const Dataset& ds, const Partition& p, SubsetPolicy policy, const PairScope& scope,
                            const EngineOptions& opts) {
    const std::size_t m = p.num_clusters();
    if (m < 2) {
        throw PreconditionError("merge step needs at least two clusters");
    }
    const auto adj = scope.cluster_adjacency(p);
    struct Pair {
        double cost;
        int a, b;
    };
    std::vector<Pair> pairs;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            if (adj[a][b]) {
                pairs.push_back({delta_e_merge(p.stats(a), p.stats(b)), static_cast<int>(a), static_cast<int>(b)});
            }
        }
    }
    if (pairs.empty()) {
        throw PreconditionError("no admissible cluster pair to merge");
    }
    if (opts.merge_lookahead != 0 && pairs.size() > opts.merge_lookahead) {
        std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.cost < y.cost; });
        pairs.resize(opts.merge_lookahead);
        std::sort(pairs.begin(), pairs.end(),
                  [](const Pair& x, const Pair& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
    }

    std::vector<CorrectionResult> results(pairs.size());
    parallel_for(pairs.size(), opts.threads, [&](std::size_t i) {
        Partition q = p;
        q.merge_clusters(ds, pairs[i].a, pairs[i].b);
        results[i] = correct_pairs(ds, std::move(q), policy, scope);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i) {
        if (results[i].partition.total_error() < results[best].partition.total_error()) {
            best = i;
        }
    }
    return std::move(results[best]);
}

CorrectionResult split_step(const Dataset& ds, const Partition& p, SubsetPolicy policy, const PairScope& scope,
                            const EngineOptions& opts) {
    std::vector<std::size_t> splittable;
    for (std::size_t c = 0; c < p.num_clusters(); ++c) {
        if (has_two_distinct(ds, p.members(c))) {
            splittable.push_back(c);
        }
    }
    if (splittable.empty()) {
        throw PreconditionError("no cluster holds two distinct points");
    }
    std::vector<CorrectionResult> results(splittable.size());
    parallel_for(splittable.size(), opts.threads, [&](std::size_t i) {
        results[i] = correct_pairs(ds, bisect(ds, p, splittable[i]), policy, scope);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i) {
        if (results[i].partition.total_error() < results[best].partition.total_error()) {
            best = i;
        }
    }
    return std::move(results[best]);
}

Partition identical_groups_partition(const Dataset& ds) {
    std::map<RowKey, int> slot;
    std::vector<int> labels(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto [it, inserted] = slot.emplace(row_key(ds.row(i)), static_cast<int>(slot.size()));
        labels[i] = it->second;
    }
    return Partition::from_labels(ds, std::move(labels), slot.size());
}

std::size_t count_distinct(const Dataset& ds) {
    std::map<RowKey, int> slot;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        slot.emplace(row_key(ds.row(i)), 0);
    }
    return slot.size();
}

PartitionSequence build_sequence(const Dataset& ds, const SequenceConfig& cfg) {
    const std::size_t distinct = count_distinct(ds);
    if (cfg.m_max < 1 || cfg.m_max > distinct) {
        throw PreconditionError("m_max must lie in [1, " + std::to_string(distinct) + "]");
    }
    auto finish = [&](Partition q) {
        return correct_tuples(ds, std::move(q), cfg.l_max, cfg.policy, cfg.scope, cfg.options);
    };
    auto entry_of = [](CorrectionResult r, std::string method, std::size_t step_moves) {
        SequenceEntry e;
        e.partition = std::move(r.partition);
        e.method = std::move(method);
        e.moves = r.moves + r.compound_moves + step_moves;
        e.energy_by_tuple_size = std::move(r.energy_by_tuple_size);
        return e;
    };

    std::map<std::size_t, SequenceEntry> up;
    std::map<std::size_t, SequenceEntry> down;

    if (cfg.direction != Direction::top_down) {
        auto cur = finish(Partition::from_labels(ds, std::vector<int>(ds.size(), 0), 1));
        up[1] = entry_of(cur, "bottom-up", 0);
        for (std::size_t m = 2; m <= cfg.m_max; ++m) {
            auto split = split_step(ds, up[m - 1].partition, cfg.policy, cfg.scope, cfg.options);
            auto corrected = finish(std::move(split.partition));
            up[m] = entry_of(std::move(corrected), "bottom-up", split.moves);
        }
    }
    if (cfg.direction != Direction::bottom_up) {
        std::size_t m = distinct;
        auto cur = m > cfg.m_max ? correct_pairs(ds, identical_groups_partition(ds), cfg.policy, cfg.scope)
                                 : finish(identical_groups_partition(ds));
        Partition state = cur.partition;
        if (m <= cfg.m_max) {
            down[m] = entry_of(std::move(cur), "top-down", 0);
        }
        while (m > 1) {
            EngineOptions step = cfg.options;
            if (m - 1 > cfg.m_max && cfg.transit_lookahead != 0) {
                step.merge_lookahead = step.merge_lookahead == 0 ? cfg.transit_lookahead
                                                                 : std::min(step.merge_lookahead, cfg.transit_lookahead);
            }
            auto merged = merge_step(ds, state, cfg.policy, cfg.scope, step);
            auto corrected = m - 1 > cfg.m_max ? std::move(merged) : finish(std::move(merged.partition));
            --m;
            state = corrected.partition;
            if (m <= cfg.m_max) {
                down[m] = entry_of(std::move(corrected), "top-down", merged.moves);
            }
        }
    }

    PartitionSequence seq;
    for (std::size_t m = 1; m <= cfg.m_max; ++m) {
        auto u = up.find(m);
        auto d = down.find(m);
        if (u != up.end() && (d == down.end() || u->second.partition.total_error() <= d->second.partition.total_error())) {
            seq.by_count[m] = std::move(u->second);
        } else {
            seq.by_count[m] = std::move(d->second);
        }
    }

    for (const auto& seed : cfg.seeds) {
        const std::size_t m = seed.num_clusters();
        if (m < 1 || m > cfg.m_max) {
            continue;
        }
        if (seed.size() != ds.size()) {
            throw PreconditionError("seed partition does not match the dataset");
        }
        auto corrected = finish(seed);
        if (corrected.partition.total_error() < seq.by_count[m].partition.total_error()) {
            seq.by_count[m] = entry_of(std::move(corrected), "seeded", 0);
        }
    }

    // A split of the m-cluster partition always beats it, so E can be made non-increasing in m.
    for (std::size_t m = 1; m < cfg.m_max; ++m) {
        const auto& prev = seq.by_count[m];
        if (seq.by_count[m + 1].partition.total_error() <= prev.partition.total_error()) {
            continue;
        }
        auto split = split_step(ds, prev.partition, cfg.policy, cfg.scope, cfg.options);
        auto corrected = finish(std::move(split.partition));
        if (corrected.partition.total_error() < seq.by_count[m + 1].partition.total_error()) {
            seq.by_count[m + 1] = entry_of(std::move(corrected), "split-repair", split.moves);
        }
    }

    for (auto& [m, e] : seq.by_count) {
        e.stable = verify_stability(ds, e.partition, cfg.policy, cfg.scope).stable;
    }
    return seq;
}

}  // namespace kh
