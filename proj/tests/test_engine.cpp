#include <gtest/gtest.h>

#include <iostream>
#include <numeric>
#include <random>
#include <set>

#include "khclust/baselines.hpp"
#include "khclust/engine.hpp"
#include "khclust/oracle.hpp"
#include "test_support.hpp"

using namespace kh;
using kh::testing::brute_energy;

namespace {

Dataset zero_six_tens() {
    std::vector<double> v{0, 6};
    v.insert(v.end(), 100, 10.0);
    return Dataset::from_values(v);
}

Dataset pairs_0_1_9_10() {
    return Dataset::from_values(std::vector<double>{0, 1, 9, 10});
}

// Every single-point move between any two clusters, judged by recomputing E from scratch.
bool brute_stable(const Dataset& ds, const Partition& p) {
    const double e = brute_energy(ds, p.labels());
    const int m = static_cast<int>(p.num_clusters());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const int from = p.label(i);
        if (p.stats(from).n < 2) {
            continue;
        }
        for (int to = 0; to < m; ++to) {
            if (to == from) {
                continue;
            }
            auto labels = p.labels();
            labels[i] = to;
            if (brute_energy(ds, labels) < e - 1e-9 * (1 + e)) {
                return false;
            }
        }
    }
    return true;
}

bool nested(const std::vector<int>& coarse, const std::vector<int>& fine) {
    std::map<int, int> parent;
    for (std::size_t i = 0; i < fine.size(); ++i) {
        auto [it, inserted] = parent.emplace(fine[i], coarse[i]);
        if (!inserted && it->second != coarse[i]) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST(CorrectPairs, RepairsLloydFixedPoint) {
    const auto ds = zero_six_tens();
    const auto lloyd_out = lloyd_from_centers(ds, {{3}, {10}}).partition;
    ASSERT_NEAR(lloyd_out.total_error(), 18.0, 1e-9);
    const auto r = correct_pairs(ds, lloyd_out);
    EXPECT_EQ(r.moves, 1u);
    EXPECT_NEAR(r.partition.total_error(), 15.841584158415841, 1e-9);
    EXPECT_NEAR(brute_energy(ds, r.partition.labels()), 15.841584158415841, 1e-9);
    EXPECT_NE(r.partition.label(0), r.partition.label(1));
    EXPECT_TRUE(verify_stability(ds, r.partition).stable);
}

TEST(CorrectPairs, SingleClusterIsNoop) {
    const auto ds = pairs_0_1_9_10();
    const auto p = Partition::from_labels(ds, {0, 0, 0, 0});
    const auto r = correct_pairs(ds, p);
    EXPECT_TRUE(r.noop);
    EXPECT_EQ(r.moves, 0u);
    EXPECT_EQ(r.partition.labels(), p.labels());
}

TEST(CorrectPairs, OptimalInputUnchanged) {
    const auto ds = pairs_0_1_9_10();
    const auto r = correct_pairs(ds, Partition::from_labels(ds, {0, 0, 1, 1}));
    EXPECT_EQ(r.moves, 0u);
    EXPECT_NEAR(r.partition.total_error(), 1.0, 1e-12);
}

TEST(VerifyStability, ReportsViolation) {
    const auto ds = zero_six_tens();
    const auto p = lloyd_from_centers(ds, {{3}, {10}}).partition;
    const auto rep = verify_stability(ds, p);
    EXPECT_FALSE(rep.stable);
    ASSERT_FALSE(rep.violations.empty());
    bool saw_six = false;
    for (const auto& v : rep.violations) {
        saw_six |= v.subset == std::vector<std::size_t>{1};
        EXPECT_LT(v.predicted_delta, 0);
    }
    EXPECT_TRUE(saw_six);
}

TEST(VerifyStability, IdenticalGroupsPolicySeesGroupMoves) {
    const auto ds = Dataset::from_values(std::vector<double>{0, 5, 5, 10, 10});
    const auto p = Partition::from_labels(ds, {0, 0, 0, 1, 1});
    const auto subsets = candidate_subsets(ds, p, {SubsetMode::both});
    ASSERT_EQ(subsets.size(), 2u);
    // Cluster 0 offers {0}, {1}, {2} and the group {1,2}.
    std::set<std::vector<std::size_t>> c0(subsets[0].begin(), subsets[0].end());
    EXPECT_TRUE(c0.count({1, 2}));
    EXPECT_TRUE(c0.count({0}));
    // The whole of cluster 1 is a merge, not a move.
    for (const auto& s : subsets[1]) {
        EXPECT_LT(s.size(), 2u);
    }
}

TEST(AdjacencyScope, RestrictsPairs) {
    const auto ds = Dataset::from_values(std::vector<double>{0, 1, 2, 3});
    const auto scope = sorted_value_adjacency(ds);
    const auto p = Partition::from_labels(ds, {0, 1, 1, 2});
    const auto adj = scope.cluster_adjacency(p);
    EXPECT_TRUE(adj[0][1]);
    EXPECT_TRUE(adj[1][2]);
    EXPECT_FALSE(adj[0][2]);
    EXPECT_FALSE(adj[0][0]);
}

TEST(CorrectTuples, LMaxTwoEqualsPairs) {
    std::mt19937_64 rng(4);
    const auto ds = kh::testing::random_dataset(rng, 40, 2);
    const auto p = Partition::from_labels(ds, kh::testing::random_labels(rng, 40, 4), 4);
    const auto a = correct_pairs(ds, p);
    const auto b = correct_tuples(ds, p, 2);
    EXPECT_EQ(a.partition.labels(), b.partition.labels());
    EXPECT_EQ(b.compound_moves, 0u);
    EXPECT_THROW(correct_tuples(ds, p, 1), PreconditionError);
}

TEST(CorrectTuples, CompoundMovesFoundOnSomeStablePartition) {
    // Search for a pair-stable partition that a 3-tuple move improves.
    std::mt19937_64 rng(99);
    int strict = 0;
    for (int trial = 0; trial < 300 && strict == 0; ++trial) {
        const std::size_t n = 6 + rng() % 20;
        const auto ds = kh::testing::random_dataset(rng, n, 1 + rng() % 2);
        const auto p = Partition::from_labels(ds, kh::testing::random_labels(rng, n, 3), 3);
        const auto pairs = correct_pairs(ds, p);
        const auto tuples = correct_tuples(ds, p, 3);
        ASSERT_LE(tuples.partition.total_error(), pairs.partition.total_error() + 1e-9);
        ASSERT_EQ(tuples.energy_by_tuple_size.size(), 2u);
        ASSERT_LE(tuples.energy_by_tuple_size[1], tuples.energy_by_tuple_size[0] + 1e-9);
        if (tuples.compound_moves > 0) {
            ++strict;
        }
    }
    std::cout << "[ info ] compound move found: " << (strict ? "yes" : "no") << "\n";
}

TEST(MergeStep, PicksCheapestAfterCorrection) {
    const auto ds = pairs_0_1_9_10();
    const auto r = merge_step(ds, Partition::from_labels(ds, {0, 0, 1, 2}));
    EXPECT_EQ(r.partition.num_clusters(), 2u);
    EXPECT_NEAR(r.partition.total_error(), 1.0, 1e-12);
    EXPECT_THROW(merge_step(ds, Partition::from_labels(ds, {0, 0, 0, 0})), PreconditionError);
}

TEST(MergeStep, LookaheadCapStillMerges) {
    const auto ds = pairs_0_1_9_10();
    EngineOptions opts;
    opts.merge_lookahead = 1;
    const auto r = merge_step(ds, Partition::from_labels(ds, {0, 1, 2, 3}), {}, PairScope::all_pairs(), opts);
    EXPECT_EQ(r.partition.num_clusters(), 3u);
    EXPECT_NEAR(r.partition.total_error(), 0.5, 1e-12);
}

TEST(SplitStep, Examples) {
    const auto ds = pairs_0_1_9_10();
    const auto r = split_step(ds, Partition::from_labels(ds, {0, 0, 0, 0}));
    EXPECT_NEAR(r.partition.total_error(), 1.0, 1e-12);
    EXPECT_EQ(r.partition.label(0), r.partition.label(1));
    EXPECT_NE(r.partition.label(1), r.partition.label(2));
    EXPECT_THROW(split_step(ds, Partition::from_labels(ds, {0, 1, 2, 3})), PreconditionError);

    // A cluster of identical points is never split.
    const auto dup = Dataset::from_values(std::vector<double>{4, 4, 4, 0, 1});
    const auto s = split_step(dup, Partition::from_labels(dup, {0, 0, 0, 1, 1}));
    EXPECT_NEAR(s.partition.total_error(), 0.0, 1e-12);
}

TEST(BuildSequence, TwoPairs) {
    const auto ds = pairs_0_1_9_10();
    for (auto dir : {Direction::both, Direction::bottom_up, Direction::top_down}) {
        SequenceConfig cfg;
        cfg.m_max = 4;
        cfg.direction = dir;
        const auto seq = build_sequence(ds, cfg);
        EXPECT_NEAR(seq.error(1), 82.0, 1e-12);
        EXPECT_NEAR(seq.error(2), 1.0, 1e-12);
        EXPECT_NEAR(seq.error(3), 0.5, 1e-12);
        EXPECT_NEAR(seq.error(4), 0.0, 1e-12);
        for (const auto& [m, e] : seq.by_count) {
            EXPECT_TRUE(e.stable);
            EXPECT_EQ(e.partition.num_clusters(), m);
        }
    }
    SequenceConfig bad;
    bad.m_max = 5;
    EXPECT_THROW(build_sequence(ds, bad), PreconditionError);
}

TEST(BuildSequence, SeedsCompete) {
    const auto ds = zero_six_tens();
    SequenceConfig cfg;
    cfg.m_max = 2;
    cfg.seeds.push_back(lloyd_from_centers(ds, {{3}, {10}}).partition);
    const auto seq = build_sequence(ds, cfg);
    EXPECT_LE(seq.error(2), 15.841584158415841 + 1e-9);
}

TEST(EngineProperties, CorrectionOutputsAreStableAndNeverWorse) {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng() % 99;
        const std::size_t d = 1 + rng() % 4;
        const auto ds = kh::testing::random_dataset(rng, n, d, 10.0, trial % 4 == 0);
        const std::size_t m = 1 + rng() % std::min<std::size_t>(8, n);
        const SubsetPolicy policy{static_cast<SubsetMode>(trial % 3)};
        const auto p = Partition::from_labels(ds, kh::testing::random_labels(rng, n, m), m);
        const auto r = correct_pairs(ds, p, policy);
        ASSERT_LE(r.partition.total_error(), p.total_error() + 1e-9 * (1 + p.total_error()));
        ASSERT_TRUE(verify_stability(ds, r.partition, policy).stable) << "trial " << trial;
        r.partition.audit(ds);
        if (trial % 10 == 0 && n <= 40) {
            ASSERT_TRUE(brute_stable(ds, r.partition));
        }
    }
}

TEST(EngineProperties, DominatesLloyd) {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng() % 99;
        const std::size_t d = 1 + rng() % 4;
        const auto ds = kh::testing::random_dataset(rng, n, d, 10.0, trial % 3 == 0);
        const std::size_t m = 1 + rng() % std::min<std::size_t>(8, count_distinct(ds));
        KMeansConfig cfg;
        cfg.m = m;
        cfg.seeding = Seeding::random_points;
        cfg.rng_seed = trial;
        const auto km = lloyd(ds, cfg).partition;
        const auto kh = correct_pairs(ds, km);
        ASSERT_LE(kh.partition.total_error(), km.total_error());
    }
}

TEST(EngineProperties, AdversarialFamilyStrictlyImproves) {
    // {0, 2a, b x n2}: centers at a and b keep Lloyd fixed while moving 2a lowers E.
    int strict = 0;
    for (double a = 1; a <= 4; a += 0.5) {
        for (std::size_t n2 = 10; n2 <= 200; n2 *= 2) {
            const double b = 3.3 * a;
            if (!(2 * a - a < b - 2 * a)) {
                continue;
            }
            std::vector<double> v{0, 2 * a};
            v.insert(v.end(), n2, b);
            const auto ds = Dataset::from_values(v);
            const auto km = lloyd_from_centers(ds, {{a}, {b}}).partition;
            ASSERT_TRUE(is_lloyd_fixed_point(ds, km));
            const auto kh = correct_pairs(ds, km);
            const double expected = (b - 2 * a) * (b - 2 * a) / (1.0 + 1.0 / n2) - 2 * a * a;
            if (expected < 0) {
                ++strict;
                EXPECT_NEAR(kh.partition.total_error() - km.total_error(), expected, 1e-9);
            }
        }
    }
    EXPECT_GT(strict, 10);
}

TEST(EngineProperties, OracleProximity) {
    std::mt19937_64 rng(31);
    int hits = 0;
    int total = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 3 + rng() % 8;
        const std::size_t d = 1 + rng() % 2;
        const auto ds = kh::testing::random_dataset(rng, n, d, 10.0, trial % 2 == 0);
        const std::size_t m_max = std::min<std::size_t>(4, count_distinct(ds));
        SequenceConfig cfg;
        cfg.m_max = m_max;
        const auto seq = build_sequence(ds, cfg);
        for (std::size_t m = 1; m <= m_max; ++m) {
            const double best = global_min(ds, m).best_error;
            ASSERT_GE(seq.error(m), best - 1e-9 * (1 + best));
            ++total;
            hits += seq.error(m) <= best + 1e-9 * (1 + best) ? 1 : 0;
        }
    }
    std::cout << "[ info ] oracle attained in " << hits << " of " << total << " (m, instance) cases\n";
}

TEST(EngineProperties, SequenceIsMonotoneAndStable) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 5 + rng() % 40;
        const auto ds = kh::testing::random_dataset(rng, n, 1 + rng() % 3, 10.0, trial % 2 == 0);
        SequenceConfig cfg;
        cfg.m_max = std::min<std::size_t>(6, count_distinct(ds));
        const auto seq = build_sequence(ds, cfg);
        for (std::size_t m = 1; m <= cfg.m_max; ++m) {
            ASSERT_TRUE(seq.at(m).stable);
            ASSERT_NEAR(seq.error(m), brute_energy(ds, seq.at(m).partition.labels()), 1e-9 * (1 + seq.error(m)));
            if (m > 1) {
                ASSERT_LE(seq.error(m), seq.error(m - 1));
            }
        }
    }
}

TEST(EngineProperties, OverlapWitness) {
    // Partitions for consecutive counts are computed independently and need not nest.
    std::mt19937_64 rng(21);
    bool found = false;
    for (int trial = 0; trial < 500 && !found; ++trial) {
        const std::size_t n = 6 + rng() % 20;
        const auto ds = kh::testing::random_dataset(rng, n, 1 + rng() % 2);
        SequenceConfig cfg;
        cfg.m_max = 3;
        const auto seq = build_sequence(ds, cfg);
        found = !nested(seq.at(2).partition.labels(), seq.at(3).partition.labels());
    }
    std::cout << "[ info ] non-nested m=2/m=3 witness: " << (found ? "found" : "not found") << "\n";
    EXPECT_TRUE(found);
}

TEST(EngineProperties, OrderInvarianceMeasured) {
    std::mt19937_64 rng(12);
    int same = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        const std::size_t n = 8 + rng() % 30;
        const std::size_t d = 1 + rng() % 3;
        const auto ds = kh::testing::random_dataset(rng, n, d);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> values;
        for (auto i : perm) {
            auto r = ds.row(i);
            values.insert(values.end(), r.begin(), r.end());
        }
        const Dataset shuffled(n, d, values);
        SequenceConfig cfg;
        cfg.m_max = 3;
        const double a = build_sequence(ds, cfg).error(3);
        const double b = build_sequence(shuffled, cfg).error(3);
        same += kh::testing::close_rel(a, b, 1e-9) ? 1 : 0;
    }
    std::cout << "[ info ] final E unchanged under row permutation in " << same << " of " << trials << "\n";
}

TEST(EngineProperties, ThreadedMergeMatchesSerial) {
    std::mt19937_64 rng(3);
    const auto ds = kh::testing::random_dataset(rng, 60, 2);
    const auto p = Partition::from_labels(ds, kh::testing::random_labels(rng, 60, 6), 6);
    EngineOptions one;
    EngineOptions four;
    four.threads = 4;
    EXPECT_EQ(merge_step(ds, p, {}, PairScope::all_pairs(), one).partition.labels(),
              merge_step(ds, p, {}, PairScope::all_pairs(), four).partition.labels());
    EXPECT_EQ(split_step(ds, p, {}, PairScope::all_pairs(), one).partition.labels(),
              split_step(ds, p, {}, PairScope::all_pairs(), four).partition.labels());
}
