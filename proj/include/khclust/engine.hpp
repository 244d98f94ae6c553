#ifndef KHCLUST_ENGINE_HPP
#define KHCLUST_ENGINE_HPP

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"

/**
 * @file engine.hpp
 * @brief Reclassification-driven minimization of the total squared error:
 * greatest-reduction pairwise correction, tuple correction, merge and split
 * steps, and construction of a partition for every cluster count.
 */

namespace kh {

enum class SubsetMode {
    singletons,
    /// Bit-identical points of one cluster moved together.
    identical_groups,
    both,
};

struct SubsetPolicy {
    SubsetMode mode = SubsetMode::singletons;
};

/**
 * Which cluster pairs may exchange points. Under `adjacency` two clusters are
 * neighbours when some edge of the point graph joins a point of one to a
 * point of the other; the relation is recomputed from the current labels.
 */
class PairScope {
public:
    enum class Mode { all_pairs, adjacency };

    static PairScope all_pairs() { return PairScope(); }
    static PairScope adjacency(std::vector<std::pair<std::size_t, std::size_t>> point_edges);

    Mode mode() const { return mode_; }
    const std::vector<std::pair<std::size_t, std::size_t>>& point_edges() const { return edges_; }

    /// Symmetric, irreflexive m x m relation for the given labels.
    std::vector<std::vector<char>> cluster_adjacency(const Partition& p) const;

private:
    Mode mode_ = Mode::all_pairs;
    std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

/// Edges between consecutive distinct values of 1-D data (ties joined too).
PairScope sorted_value_adjacency(const Dataset& ds);

struct MoveProposal {
    int donor = -1;
    int acceptor = -1;
    std::vector<std::size_t> subset;
    double predicted_delta = 0;
};

struct StabilityReport {
    bool stable = true;
    std::vector<MoveProposal> violations;
    std::size_t checked_pairs = 0;
    std::size_t checked_subsets = 0;
};

struct EngineOptions {
    /// Per ordered cluster pair, how many of the best single moves seed compound tuple moves.
    std::size_t tuple_candidates = 16;
    /// Upper bound on compound moves examined per tuple; larger tuples use fewer seeds.
    std::size_t tuple_budget = 200000;
    /// Merge step: evaluate only this many cheapest merges with lookahead (0 = all pairs).
    std::size_t merge_lookahead = 0;
    /// Worker threads for merge/split candidate evaluation.
    std::size_t threads = 1;
};

struct CorrectionResult {
    Partition partition;
    /// Accepted single-subset moves.
    std::size_t moves = 0;
    /// Accepted compound (tuple) moves.
    std::size_t compound_moves = 0;
    /// Input returned untouched because it has fewer than two clusters.
    bool noop = false;
    /// Total error after finishing each tuple size, starting at l = 2.
    std::vector<double> energy_by_tuple_size;
};

/// Candidate move subsets of every cluster under `policy`, whole clusters excluded.
std::vector<std::vector<std::vector<std::size_t>>> candidate_subsets(const Dataset& ds, const Partition& p,
                                                                     SubsetPolicy policy);

/**
 * Repeatedly applies the single move with the most negative predicted change
 * until no move lowers E by more than the tolerance.
 */
CorrectionResult correct_pairs(const Dataset& ds, Partition p, SubsetPolicy policy = {},
                               const PairScope& scope = PairScope::all_pairs());

/// Lists every admissible move that would lower E by more than the tolerance.
StabilityReport verify_stability(const Dataset& ds, const Partition& p, SubsetPolicy policy = {},
                                 const PairScope& scope = PairScope::all_pairs());

/**
 * Pairwise correction followed by compound moves inside tuples of 3..l_max
 * clusters. A compound move is l - 1 simultaneous reclassifications linking
 * all clusters of the tuple; its change of E is the drop of the tuple's
 * merge cost. l_max = 2 is plain pairwise correction.
 */
CorrectionResult correct_tuples(const Dataset& ds, Partition p, std::size_t l_max, SubsetPolicy policy = {},
                                const PairScope& scope = PairScope::all_pairs(), const EngineOptions& opts = {});

/// Best merge of two admissible clusters judged by the error after pairwise correction.
CorrectionResult merge_step(const Dataset& ds, const Partition& p, SubsetPolicy policy = {},
                            const PairScope& scope = PairScope::all_pairs(), const EngineOptions& opts = {});

/**
 * Best bisection of one cluster (2-means seeded by its farthest pair),
 * judged by the error after pairwise correction.
 */
CorrectionResult split_step(const Dataset& ds, const Partition& p, SubsetPolicy policy = {},
                            const PairScope& scope = PairScope::all_pairs(), const EngineOptions& opts = {});

/// One cluster per group of identical points, in order of first appearance.
Partition identical_groups_partition(const Dataset& ds);

std::size_t count_distinct(const Dataset& ds);

enum class Direction { bottom_up, top_down, both };

struct SequenceEntry {
    Partition partition;
    std::string method;
    std::size_t moves = 0;
    bool stable = false;
    std::vector<double> energy_by_tuple_size;
};

struct PartitionSequence {
    std::map<std::size_t, SequenceEntry> by_count;

    const SequenceEntry& at(std::size_t m) const { return by_count.at(m); }
    double error(std::size_t m) const { return by_count.at(m).partition.total_error(); }
};

struct SequenceConfig {
    std::size_t m_max = 2;
    Direction direction = Direction::both;
    SubsetPolicy policy;
    PairScope scope;
    std::size_t l_max = 3;
    EngineOptions options;
    /**
     * Top-down merges that lead to counts above m_max judge only this many
     * cheapest merges (0 = all pairs) and skip tuple correction.
     */
    std::size_t transit_lookahead = 8;
    /// Extra starting partitions (e.g. K-means output); each is corrected and competes at its cluster count.
    std::vector<Partition> seeds;
};

/**
 * Stable partitions for 1..m_max clusters. Bottom-up splits from the single
 * cluster, top-down merges from the identical-groups partition; each step is
 * followed by tuple correction. With both directions the lower E wins per count,
 * and so does any corrected seed.
 */
PartitionSequence build_sequence(const Dataset& ds, const SequenceConfig& cfg);

}  // namespace kh

#endif  // KHCLUST_ENGINE_HPP
