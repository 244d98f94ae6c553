#include "khclust/segment.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <tuple>

#include "khclust/reclass.hpp"

namespace kh {

GrayImage::GrayImage(std::size_t w, std::size_t h, std::vector<double> px) : width(w), height(h), pixels(std::move(px)) {
    if (width == 0 || height == 0) {
        throw PreconditionError("image needs positive width and height");
    }
    if (pixels.size() != width * height) {
        throw PreconditionError("pixel count does not match image size");
    }
    for (double v : pixels) {
        if (!(v >= 0 && v <= 255)) {
            throw PreconditionError("intensity outside [0, 255]");
        }
    }
}

Dataset image_dataset(const GrayImage& img) {
    return Dataset(img.size(), 1, img.pixels);
}

PairScope pixel_grid_scope(std::size_t width, std::size_t height) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const std::size_t p = y * width + x;
            if (x + 1 < width) {
                edges.emplace_back(p, p + 1);
            }
            if (y + 1 < height) {
                edges.emplace_back(p, p + width);
            }
        }
    }
    return PairScope::adjacency(std::move(edges));
}

std::size_t SegmentMap::neighbours_of(std::size_t px, std::size_t out[4]) const {
    const std::size_t x = px % width_;
    const std::size_t y = px / width_;
    std::size_t k = 0;
    if (y > 0) {
        out[k++] = px - width_;
    }
    if (x > 0) {
        out[k++] = px - 1;
    }
    if (x + 1 < width_) {
        out[k++] = px + 1;
    }
    if (y + 1 < height_) {
        out[k++] = px + width_;
    }
    return k;
}

void SegmentMap::build(const GrayImage& img, std::vector<int> labels) {
    width_ = img.width;
    height_ = img.height;
    intensity_ = img.pixels;
    labels_ = std::move(labels);
    int mx = -1;
    for (int l : labels_) {
        if (l < 0) {
            throw PreconditionError("negative segment label");
        }
        mx = std::max(mx, l);
    }
    const std::size_t ids = static_cast<std::size_t>(mx + 1);
    stats_.assign(ids, ClusterStats(1));
    members_.assign(ids, {});
    neighbors_.assign(ids, {});
    alive_.assign(ids, 0);
    for (std::size_t p = 0; p < labels_.size(); ++p) {
        const int l = labels_[p];
        stats_[l].add(std::span<const double>(&intensity_[p], 1));
        members_[l].push_back(p);
        alive_[l] = 1;
    }
    alive_count_ = static_cast<std::size_t>(std::count(alive_.begin(), alive_.end(), 1));
    for (std::size_t y = 0; y < height_; ++y) {
        for (std::size_t x = 0; x < width_; ++x) {
            const std::size_t p = y * width_ + x;
            for (std::size_t q : {x + 1 < width_ ? p + 1 : p, y + 1 < height_ ? p + width_ : p}) {
                if (q != p && labels_[p] != labels_[q]) {
                    ++neighbors_[labels_[p]][labels_[q]];
                    ++neighbors_[labels_[q]][labels_[p]];
                }
            }
        }
    }
}

SegmentMap SegmentMap::singletons(const GrayImage& img) {
    std::vector<int> labels(img.size());
    for (std::size_t p = 0; p < labels.size(); ++p) {
        labels[p] = static_cast<int>(p);
    }
    SegmentMap s;
    s.build(img, std::move(labels));
    return s;
}

SegmentMap SegmentMap::flat_zones(const GrayImage& img) {
    std::vector<int> labels(img.size(), -1);
    SegmentMap probe;
    probe.width_ = img.width;
    probe.height_ = img.height;
    int next = 0;
    std::vector<std::size_t> stack;
    for (std::size_t p = 0; p < labels.size(); ++p) {
        if (labels[p] >= 0) {
            continue;
        }
        labels[p] = next;
        stack.push_back(p);
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            std::size_t nb[4];
            const auto k = probe.neighbours_of(u, nb);
            for (std::size_t i = 0; i < k; ++i) {
                if (labels[nb[i]] < 0 && img.pixels[nb[i]] == img.pixels[p]) {
                    labels[nb[i]] = next;
                    stack.push_back(nb[i]);
                }
            }
        }
        ++next;
    }
    SegmentMap s;
    s.build(img, std::move(labels));
    return s;
}

SegmentMap SegmentMap::from_labels(const GrayImage& img, const std::vector<int>& labels) {
    if (labels.size() != img.size()) {
        throw PreconditionError("label count does not match image size");
    }
    SegmentMap s;
    s.build(img, labels);
    if (!s.audit()) {
        throw PreconditionError("segments are not 4-connected");
    }
    return s;
}

double SegmentMap::total_error() const {
    double e = 0;
    for (std::size_t s = 0; s < stats_.size(); ++s) {
        if (alive_[s]) {
            e += stats_[s].error();
        }
    }
    return e;
}

std::vector<int> SegmentMap::compact_labels() const {
    std::vector<int> remap(stats_.size(), -1);
    std::vector<int> out(labels_.size());
    int next = 0;
    for (std::size_t p = 0; p < labels_.size(); ++p) {
        int& r = remap[labels_[p]];
        if (r < 0) {
            r = next++;
        }
        out[p] = r;
    }
    return out;
}

int SegmentMap::merge(int a, int b) {
    if (a == b || !alive_[a] || !alive_[b]) {
        throw PreconditionError("invalid segment merge");
    }
    int keep = a;
    int gone = b;
    if (stats_[b].n > stats_[a].n || (stats_[b].n == stats_[a].n && b < a)) {
        std::swap(keep, gone);
    }
    for (auto p : members_[gone]) {
        labels_[p] = keep;
    }
    members_[keep].insert(members_[keep].end(), members_[gone].begin(), members_[gone].end());
    members_[gone].clear();
    stats_[keep].absorb(stats_[gone]);
    stats_[gone] = ClusterStats(1);
    for (const auto& [c, w] : neighbors_[gone]) {
        neighbors_[c].erase(gone);
        if (c == keep) {
            continue;
        }
        neighbors_[keep][c] += w;
        neighbors_[c][keep] += w;
    }
    neighbors_[gone].clear();
    alive_[gone] = 0;
    --alive_count_;
    return keep;
}

void SegmentMap::move_pixels(const std::vector<std::size_t>& px, int donor, int acceptor) {
    auto dec = [&](int a, int b) {
        if (--neighbors_[a][b] == 0) {
            neighbors_[a].erase(b);
        }
        if (--neighbors_[b][a] == 0) {
            neighbors_[b].erase(a);
        }
    };
    auto inc = [&](int a, int b) {
        ++neighbors_[a][b];
        ++neighbors_[b][a];
    };
    if (px.size() >= stats_[donor].n) {
        throw PreconditionError("move would empty the donor segment");
    }
    for (auto p : px) {
        if (labels_[p] != donor) {
            throw PreconditionError("pixel outside the donor segment");
        }
        std::size_t nb[4];
        const auto k = neighbours_of(p, nb);
        for (std::size_t i = 0; i < k; ++i) {
            const int l = labels_[nb[i]];
            if (l != donor) {
                dec(donor, l);
            }
            if (l != acceptor) {
                inc(acceptor, l);
            }
        }
        labels_[p] = acceptor;
        const std::span<const double> v(&intensity_[p], 1);
        stats_[donor].remove(v);
        stats_[acceptor].add(v);
        auto& dm = members_[donor];
        dm.erase(std::find(dm.begin(), dm.end(), p));
        members_[acceptor].push_back(p);
    }
}

bool SegmentMap::locally_simple(std::size_t px, int donor) const {
    const long x = static_cast<long>(px % width_);
    const long y = static_cast<long>(px / width_);
    static constexpr int dx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
    static constexpr int dy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
    bool in[8];
    int edge_count = 0;
    for (int i = 0; i < 8; ++i) {
        const long nx = x + dx[i];
        const long ny = y + dy[i];
        in[i] = nx >= 0 && ny >= 0 && nx < static_cast<long>(width_) && ny < static_cast<long>(height_) &&
                labels_[ny * static_cast<long>(width_) + nx] == donor;
        if (i % 2 == 0 && in[i]) {
            ++edge_count;
        }
    }
    if (edge_count == 1) {
        return true;
    }
    if (edge_count == 0) {
        return false;
    }
    // Walk the ring; the donor 4-neighbours must all fall in one cyclic run.
    int start = -1;
    for (int i = 0; i < 8; ++i) {
        if (!in[i]) {
            start = i;
            break;
        }
    }
    if (start < 0) {
        return true;
    }
    int runs_with_edge = 0;
    bool in_run = false;
    bool run_has_edge = false;
    for (int step = 1; step <= 8; ++step) {
        const int i = (start + step) % 8;
        if (in[i]) {
            in_run = true;
            run_has_edge = run_has_edge || (i % 2 == 0);
        } else if (in_run) {
            runs_with_edge += run_has_edge ? 1 : 0;
            in_run = false;
            run_has_edge = false;
        }
    }
    return runs_with_edge == 1;
}

bool SegmentMap::stays_connected_without(int donor, const std::vector<std::size_t>& px) const {
    const auto& mem = members_[donor];
    if (px.size() >= mem.size()) {
        return false;
    }
    if (px.size() == 1 && locally_simple(px[0], donor)) {
        return true;
    }
    std::vector<char> blocked(labels_.size(), 0);
    for (auto p : px) {
        blocked[p] = 1;
    }
    std::size_t start = mem.front();
    for (auto p : mem) {
        if (!blocked[p]) {
            start = p;
            break;
        }
    }
    std::vector<char> seen(labels_.size(), 0);
    std::vector<std::size_t> stack{start};
    seen[start] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        std::size_t nb[4];
        const auto k = neighbours_of(u, nb);
        for (std::size_t i = 0; i < k; ++i) {
            const auto q = nb[i];
            if (!seen[q] && !blocked[q] && labels_[q] == donor) {
                seen[q] = 1;
                ++reached;
                stack.push_back(q);
            }
        }
    }
    return reached == mem.size() - px.size();
}

bool SegmentMap::audit() const {
    std::vector<char> seen(labels_.size(), 0);
    std::vector<char> visited_label(stats_.size(), 0);
    for (std::size_t p = 0; p < labels_.size(); ++p) {
        if (seen[p]) {
            continue;
        }
        const int l = labels_[p];
        if (visited_label[l] || !alive_[l]) {
            return false;
        }
        visited_label[l] = 1;
        std::vector<std::size_t> stack{p};
        seen[p] = 1;
        std::size_t reached = 1;
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            std::size_t nb[4];
            const auto k = neighbours_of(u, nb);
            for (std::size_t i = 0; i < k; ++i) {
                if (!seen[nb[i]] && labels_[nb[i]] == l) {
                    seen[nb[i]] = 1;
                    ++reached;
                    stack.push_back(nb[i]);
                }
            }
        }
        if (reached != stats_[l].n || reached != members_[l].size()) {
            return false;
        }
    }
    // Adjacency graph must equal the one derived from labels.
    std::vector<std::map<int, std::size_t>> fresh(stats_.size());
    for (std::size_t y = 0; y < height_; ++y) {
        for (std::size_t x = 0; x < width_; ++x) {
            const std::size_t p = y * width_ + x;
            for (std::size_t q : {x + 1 < width_ ? p + 1 : p, y + 1 < height_ ? p + width_ : p}) {
                if (q != p && labels_[p] != labels_[q]) {
                    ++fresh[labels_[p]][labels_[q]];
                    ++fresh[labels_[q]][labels_[p]];
                }
            }
        }
    }
    return fresh == neighbors_;
}

namespace {

struct PixelMove {
    double delta;
    int donor;
    int acceptor;
    std::vector<std::size_t> px;
};

bool move_less(const PixelMove& a, const PixelMove& b) {
    return std::make_tuple(a.delta, a.donor, a.acceptor, a.px.front(), a.px.size()) <
           std::make_tuple(b.delta, b.donor, b.acceptor, b.px.front(), b.px.size());
}

double pixel_delta(const SegmentMap& s, std::size_t k, double sub_mean, int donor, int acceptor) {
    const auto& d = s.stats(donor);
    const auto& a = s.stats(acceptor);
    const double dm = d.sum[0] / static_cast<double>(d.n);
    const double am = a.sum[0] / static_cast<double>(a.n);
    return detail::correct_delta(static_cast<double>(k), {&sub_mean, 1}, static_cast<double>(d.n), {&dm, 1},
                                 static_cast<double>(a.n), {&am, 1});
}

/// Improving boundary moves, best first.
std::vector<PixelMove> boundary_moves(const SegmentMap& s, SubsetPolicy policy, double tol) {
    const bool singles = policy.mode != SubsetMode::identical_groups;
    const bool runs = policy.mode != SubsetMode::singletons;
    std::vector<PixelMove> out;
    std::set<std::pair<std::size_t, int>> run_seen;

    for (std::size_t p = 0; p < s.pixel_count(); ++p) {
        const int donor = s.label(p);
        std::size_t nb[4];
        const auto k = s.neighbours_of(p, nb);
        int acceptors[4];
        std::size_t n_acc = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const int l = s.label(nb[i]);
            if (l != donor && std::find(acceptors, acceptors + n_acc, l) == acceptors + n_acc) {
                acceptors[n_acc++] = l;
            }
        }
        if (n_acc == 0 || s.stats(donor).n < 2) {
            continue;
        }
        for (std::size_t ai = 0; ai < n_acc; ++ai) {
            const int acceptor = acceptors[ai];
            if (singles) {
                const double d = pixel_delta(s, 1, s.intensity(p), donor, acceptor);
                if (d < -tol) {
                    out.push_back({d, donor, acceptor, {p}});
                }
            }
            if (!runs || run_seen.count({p, acceptor})) {
                continue;
            }
            // 4-connected run of equal-intensity donor pixels that all touch the acceptor.
            auto touches = [&](std::size_t q) {
                std::size_t qn[4];
                const auto qk = s.neighbours_of(q, qn);
                for (std::size_t i = 0; i < qk; ++i) {
                    if (s.label(qn[i]) == acceptor) {
                        return true;
                    }
                }
                return false;
            };
            std::vector<std::size_t> run{p};
            run_seen.insert({p, acceptor});
            for (std::size_t head = 0; head < run.size(); ++head) {
                std::size_t qn[4];
                const auto qk = s.neighbours_of(run[head], qn);
                for (std::size_t i = 0; i < qk; ++i) {
                    const auto q = qn[i];
                    if (s.label(q) == donor && s.intensity(q) == s.intensity(p) && !run_seen.count({q, acceptor}) &&
                        touches(q)) {
                        run_seen.insert({q, acceptor});
                        run.push_back(q);
                    }
                }
            }
            if (singles && run.size() == 1) {
                continue;
            }
            if (run.size() >= s.stats(donor).n) {
                continue;
            }
            std::sort(run.begin(), run.end());
            const double d = pixel_delta(s, run.size(), s.intensity(p), donor, acceptor);
            if (d < -tol) {
                out.push_back({d, donor, acceptor, std::move(run)});
            }
        }
    }
    std::sort(out.begin(), out.end(), move_less);
    return out;
}

}  // namespace

BoundaryCorrection correct_boundaries(SegmentMap s, SubsetPolicy policy) {
    BoundaryCorrection res;
    if (s.segment_count() >= 2) {
        while (true) {
            const auto moves = boundary_moves(s, policy, move_tolerance(s.total_error()));
            bool applied = false;
            for (const auto& mv : moves) {
                if (mv.px.size() < s.stats(mv.donor).n && s.stays_connected_without(mv.donor, mv.px)) {
                    s.move_pixels(mv.px, mv.donor, mv.acceptor);
                    ++res.moves;
                    applied = true;
                    break;
                }
            }
            if (!applied) {
                break;
            }
        }
    }
    res.map = std::move(s);
    return res;
}

SegmentMap merge_pass(SegmentMap s, const MergeOptions& opts) {
    if (s.segment_count() < 2) {
        throw PreconditionError("merge pass needs at least two segments");
    }
    struct Pair {
        double cost;
        int a, b;
    };
    std::vector<Pair> pairs;
    for (std::size_t a = 0; a < s.id_bound(); ++a) {
        if (!s.alive(static_cast<int>(a))) {
            continue;
        }
        for (const auto& [b, w] : s.neighbors(static_cast<int>(a))) {
            if (b > static_cast<int>(a)) {
                pairs.push_back({delta_e_merge(s.stats(static_cast<int>(a)), s.stats(b)), static_cast<int>(a), b});
            }
        }
    }
    auto by_cost = [](const Pair& x, const Pair& y) { return std::tie(x.cost, x.a, x.b) < std::tie(y.cost, y.a, y.b); };
    if (opts.lookahead_candidates == 0) {
        const auto best = *std::min_element(pairs.begin(), pairs.end(), by_cost);
        s.merge(best.a, best.b);
        return s;
    }
    std::sort(pairs.begin(), pairs.end(), by_cost);
    pairs.resize(std::min(pairs.size(), opts.lookahead_candidates));
    std::size_t best = 0;
    double best_e = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        SegmentMap trial = s;
        trial.merge(pairs[i].a, pairs[i].b);
        const double e = correct_boundaries(std::move(trial), opts.policy).map.total_error();
        if (i == 0 || e < best_e) {
            best = i;
            best_e = e;
        }
    }
    s.merge(pairs[best].a, pairs[best].b);
    return s;
}

SegmentCurve segment_curve(const GrayImage& img, std::size_t m_min, const SegmentCurveOptions& opts) {
    if (m_min < 1) {
        throw PreconditionError("minimum segment count must be at least 1");
    }
    SegmentCurve out;
    const auto start = opts.flat_zone_start ? SegmentMap::flat_zones(img) : SegmentMap::singletons(img);
    const std::size_t n = img.size();
    auto row = [&](const SegmentMap& s) {
        const double e = s.total_error();
        return SegmentCurveRow{s.segment_count(), e, sigma(e, n)};
    };
    auto wants_snapshot = [&](std::size_t c) {
        return std::find(opts.snapshot_counts.begin(), opts.snapshot_counts.end(), c) != opts.snapshot_counts.end();
    };

    SegmentMap s = start;
    SegmentMap plain_state = start;
    const MergeOptions plain;
    out.corrected.push_back(row(s));
    out.merge_only.push_back(row(plain_state));
    if (wants_snapshot(s.segment_count())) {
        out.snapshots.emplace(s.segment_count(), s);
    }
    while (s.segment_count() > m_min) {
        s = merge_pass(std::move(s), opts.merge);
        s = correct_boundaries(std::move(s), opts.correction_policy).map;
        plain_state = merge_pass(std::move(plain_state), plain);
        if (opts.adopt_merge_only && plain_state.total_error() < s.total_error()) {
            auto alt = correct_boundaries(plain_state, opts.correction_policy).map;
            s = alt.total_error() <= plain_state.total_error() ? std::move(alt) : plain_state;
            ++out.adoptions;
        }
        out.corrected.push_back(row(s));
        out.merge_only.push_back(row(plain_state));
        if (wants_snapshot(s.segment_count())) {
            out.snapshots.insert_or_assign(s.segment_count(), s);
        }
        if (opts.audit_every_step && !(s.audit() && plain_state.audit())) {
            out.connectivity_ok = false;
        }
    }
    return out;
}

GrayImage approximation(const SegmentMap& s) {
    std::vector<double> px(s.pixel_count());
    for (std::size_t p = 0; p < px.size(); ++p) {
        const auto& st = s.stats(s.label(p));
        const double mean = st.sum[0] / static_cast<double>(st.n);
        px[p] = std::clamp(std::floor(mean + 0.5), 0.0, 255.0);
    }
    return GrayImage(s.width(), s.height(), std::move(px));
}

Partition relaxed_partition(const GrayImage& img, const SegmentMap& s, std::size_t l_max) {
    const auto ds = image_dataset(img);
    auto p = Partition::from_labels(ds, s.compact_labels());
    return correct_tuples(ds, std::move(p), l_max, {SubsetMode::both}, pixel_grid_scope(img.width, img.height))
        .partition;
}

}  // namespace kh
