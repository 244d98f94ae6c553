#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "khclust/baselines.hpp"
#include "khclust/io.hpp"
#include "khclust/oracle.hpp"
#include "khclust/otsu.hpp"
#include "khclust/segment.hpp"

namespace kh::cli {

namespace {

using nlohmann::ordered_json;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

const std::vector<std::string> kMethodOrder = {"kmeans", "kh", "otsu", "oracle"};

std::string format_number(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string detect_format(const RunConfig& cfg) {
    if (!cfg.format.empty()) {
        return cfg.format;
    }
    const auto ext = std::filesystem::path(cfg.input).extension().string();
    if (ext == ".pgm" || ext == ".PGM") {
        return "pgm";
    }
    return "csv";
}

SubsetPolicy parse_policy(const std::string& s) {
    if (s == "singletons") {
        return {SubsetMode::singletons};
    }
    if (s == "identical") {
        return {SubsetMode::identical_groups};
    }
    return {SubsetMode::both};
}

Direction parse_direction(const std::string& s) {
    if (s == "bottom-up") {
        return Direction::bottom_up;
    }
    if (s == "top-down") {
        return Direction::top_down;
    }
    return Direction::both;
}

/// One row of a method's sequence.
struct Entry {
    std::size_t m = 0;
    Partition partition;
    bool stable = false;
    std::size_t moves = 0;
    std::string detail;
};

struct MethodRun {
    std::string name;
    std::vector<Entry> entries;
};

struct Input {
    Dataset ds;
    std::optional<GrayImage> image;
};

Input load_input(const RunConfig& cfg) {
    Input in;
    if (detect_format(cfg) == "pgm") {
        in.image = read_pgm_file(cfg.input);
        in.ds = image_dataset(*in.image);
    } else {
        in.ds = read_csv_file(cfg.input);
    }
    return in;
}

PairScope make_scope(const RunConfig& cfg, const Input& in) {
    if (cfg.scope == "all") {
        return PairScope::all_pairs();
    }
    if (in.image) {
        return pixel_grid_scope(in.image->width, in.image->height);
    }
    if (in.ds.dim() != 1) {
        throw UsageError("--scope adjacent needs 1-D csv data or a pgm image");
    }
    return sorted_value_adjacency(in.ds);
}

std::vector<std::vector<double>> load_centers(const std::string& path, std::size_t dim) {
    const auto ds = read_csv_file(path);
    if (ds.dim() != dim) {
        throw UsageError("center file dimension does not match the data");
    }
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto r = ds.row(i);
        out.emplace_back(r.begin(), r.end());
    }
    return out;
}

MethodRun run_kmeans(const RunConfig& cfg, const Dataset& ds, SubsetPolicy policy, const PairScope& scope) {
    MethodRun run{"kmeans", {}};
    std::vector<Partition> seq;
    std::vector<std::size_t> iters(cfg.m_max + 1, 0);
    std::vector<std::string> details(cfg.m_max + 1, "incremental");
    if (cfg.kmeans_init == "random") {
        for (std::size_t m = 1; m <= cfg.m_max; ++m) {
            KMeansConfig kc;
            kc.m = m;
            kc.seeding = Seeding::random_points;
            kc.rng_seed = cfg.seed + m;
            auto r = lloyd(ds, kc);
            iters[m] = r.iterations;
            details[m] = "random";
            seq.push_back(std::move(r.partition));
        }
    } else {
        seq = incremental_sequence(ds, cfg.m_max, cfg.seed);
    }
    if (!cfg.centers.empty()) {
        auto centers = load_centers(cfg.centers, ds.dim());
        const std::size_t m = centers.size();
        if (m >= 1 && m <= cfg.m_max) {
            auto r = lloyd_from_centers(ds, std::move(centers));
            iters[m] = r.iterations;
            details[m] = "centers";
            seq[m - 1] = std::move(r.partition);
        }
    }
    for (std::size_t m = 1; m <= cfg.m_max; ++m) {
        Entry e;
        e.m = m;
        e.partition = seq[m - 1];
        e.stable = verify_stability(ds, e.partition, policy, scope).stable;
        e.moves = iters[m];
        e.detail = details[m];
        run.entries.push_back(std::move(e));
    }
    return run;
}

MethodRun run_kh(const RunConfig& cfg, const Dataset& ds, SubsetPolicy policy, const PairScope& scope,
                 const MethodRun* kmeans) {
    SequenceConfig sc;
    sc.m_max = cfg.m_max;
    sc.direction = parse_direction(cfg.direction);
    sc.policy = policy;
    sc.scope = scope;
    sc.l_max = cfg.l_max;
    sc.options.merge_lookahead = cfg.lookahead;
    sc.options.threads = cfg.threads;
    if (kmeans != nullptr) {
        for (const auto& e : kmeans->entries) {
            sc.seeds.push_back(e.partition);
        }
    }
    const auto seq = build_sequence(ds, sc);
    MethodRun run{"kh", {}};
    for (const auto& [m, se] : seq.by_count) {
        run.entries.push_back({m, se.partition, se.stable, se.moves, se.method});
    }
    return run;
}

MethodRun run_otsu(const RunConfig& cfg, const Dataset& ds, SubsetPolicy policy, const PairScope& scope) {
    const auto h = build_histogram(ds);
    MethodRun run{"otsu", {}};
    for (std::size_t m = 1; m <= cfg.m_max; ++m) {
        const auto t = optimal_thresholds(h, m);
        auto p = Partition::from_labels(ds, threshold_labels(ds.values(), t), m);
        const bool stable = verify_stability(ds, p, policy, scope).stable;
        run.entries.push_back({m, std::move(p), stable, 0, "thresholds"});
    }
    return run;
}

MethodRun run_oracle(const RunConfig& cfg, const Dataset& ds, SubsetPolicy policy, const PairScope& scope) {
    MethodRun run{"oracle", {}};
    for (std::size_t m = 1; m <= cfg.m_max; ++m) {
        const auto r = global_min(ds, m);
        auto p = Partition::from_labels(ds, r.best_labels, m);
        const bool stable = verify_stability(ds, p, policy, scope).stable;
        run.entries.push_back({m, std::move(p), stable, 0, std::to_string(r.partitions_examined) + " partitions"});
    }
    return run;
}

ordered_json report_json(const RunConfig& cfg, const Dataset& ds, const MethodRun& run) {
    ordered_json j;
    j["schemaVersion"] = 1;
    j["method"] = run.name;
    j["input"] = cfg.input;
    j["n"] = ds.size();
    j["d"] = ds.dim();
    j["config"] = {{"mMax", cfg.m_max}, {"lMax", cfg.l_max},         {"policy", cfg.policy},
                   {"scope", cfg.scope}, {"direction", cfg.direction}, {"seed", cfg.seed}};
    auto parts = ordered_json::array();
    for (const auto& e : run.entries) {
        ordered_json pj;
        pj["m"] = e.m;
        pj["E"] = e.partition.total_error();
        pj["sigma"] = sigma(e.partition.total_error(), ds.size());
        pj["stable"] = e.stable;
        pj["moves"] = e.moves;
        pj["provenance"] = e.detail;
        pj["labels"] = e.partition.labels();
        parts.push_back(std::move(pj));
    }
    j["partitions"] = std::move(parts);
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw InputError("cannot write " + path.string());
    }
    f << text;
}

std::vector<std::string> resolve_methods(const RunConfig& cfg, const Dataset& ds) {
    std::vector<std::string> chosen;
    if (!cfg.methods.empty()) {
        for (const auto& m : cfg.methods) {
            if (std::find(kMethodOrder.begin(), kMethodOrder.end(), m) == kMethodOrder.end()) {
                throw UsageError("unknown method '" + m + "'");
            }
        }
        for (const auto& m : kMethodOrder) {
            if (std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end()) {
                chosen.push_back(m);
            }
        }
        return chosen;
    }
    if (cfg.command == "cluster") {
        return {"kh"};
    }
    chosen = {"kmeans", "kh"};
    if (ds.dim() == 1) {
        chosen.push_back("otsu");
    }
    if (ds.size() <= kOracleMaxPoints) {
        chosen.push_back("oracle");
    }
    return chosen;
}

int run_cluster(const RunConfig& cfg, std::ostream& out) {
    const auto in = load_input(cfg);
    const auto& ds = in.ds;
    const auto methods = resolve_methods(cfg, ds);
    const auto policy = parse_policy(cfg.policy);
    const auto scope = make_scope(cfg, in);

    if (cfg.m_max < 1 || cfg.m_max > ds.size()) {
        throw UsageError("--m-max must lie in [1, N]");
    }
    const auto has = [&](const char* m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
    if (has("oracle") && ds.size() > kOracleMaxPoints) {
        throw SizeGuardError("oracle needs N <= " + std::to_string(kOracleMaxPoints) + ", got " +
                             std::to_string(ds.size()));
    }
    if (has("otsu") && ds.dim() != 1) {
        throw UsageError("otsu needs 1-D data");
    }
    if ((has("kh") || has("otsu")) && cfg.m_max > count_distinct(ds)) {
        throw UsageError("--m-max exceeds the number of distinct points (" + std::to_string(count_distinct(ds)) + ")");
    }

    std::vector<MethodRun> runs;
    for (const auto& m : methods) {
        if (m == "kmeans") {
            runs.push_back(run_kmeans(cfg, ds, policy, scope));
        } else if (m == "kh") {
            const MethodRun* kmeans = nullptr;
            for (const auto& r : runs) {
                if (r.name == "kmeans") {
                    kmeans = &r;
                }
            }
            runs.push_back(run_kh(cfg, ds, policy, scope, kmeans));
        } else if (m == "otsu") {
            runs.push_back(run_otsu(cfg, ds, policy, scope));
        } else {
            runs.push_back(run_oracle(cfg, ds, policy, scope));
        }
    }

    const std::filesystem::path dir(cfg.out);
    std::filesystem::create_directories(dir);
    for (const auto& r : runs) {
        write_text(dir / (r.name + ".json"), report_json(cfg, ds, r).dump(2) + "\n");
    }

    std::ostringstream csv;
    csv << "m";
    for (const auto& r : runs) {
        csv << ",E_" << r.name;
    }
    csv << "\n";
    for (std::size_t m = 1; m <= cfg.m_max; ++m) {
        csv << m;
        for (const auto& r : runs) {
            csv << "," << format_number(r.entries[m - 1].partition.total_error(), 12);
        }
        csv << "\n";
    }
    write_text(dir / "comparison.csv", csv.str());
    if (cfg.command == "compare") {
        out << csv.str();
    }
    return kOk;
}

int run_segment(const RunConfig& cfg, std::ostream& out) {
    if (detect_format(cfg) != "pgm") {
        throw UsageError("segment needs a PGM input");
    }
    const auto img = read_pgm_file(cfg.input);
    SegmentCurveOptions opts;
    opts.flat_zone_start = cfg.flat_zones;
    opts.snapshot_counts = cfg.counts;
    opts.correction_policy = parse_policy(cfg.policy);
    opts.merge.policy = opts.correction_policy;
    opts.merge.lookahead_candidates = cfg.lookahead;
    const auto curve = segment_curve(img, cfg.m_min, opts);

    std::ostringstream csv;
    csv << "count,E,sigma,variant\n";
    auto emit = [&](const std::vector<SegmentCurveRow>& rows, const char* variant) {
        for (const auto& r : rows) {
            csv << r.count << "," << format_number(r.error, 12) << "," << format_number(r.sigma, 6) << "," << variant
                << "\n";
        }
    };
    emit(curve.corrected, "corrected");
    emit(curve.merge_only, "merge-only");

    const std::filesystem::path dir(cfg.out);
    std::filesystem::create_directories(dir);
    write_text(dir / "curve.csv", csv.str());
    for (const auto& [count, map] : curve.snapshots) {
        write_pgm_file((dir / ("approx_" + std::to_string(count) + ".pgm")).string(), approximation(map));
    }
    out << "segments " << img.size() << " -> " << curve.corrected.back().count << ", sigma "
        << format_number(curve.corrected.back().sigma, 6) << " (corrected) vs "
        << format_number(curve.merge_only.back().sigma, 6) << " (merge-only)\n";
    return kOk;
}

}  // namespace

int parse_args(int argc, const char* const* argv, RunConfig& cfg, std::ostream& out, std::ostream& err) {
    CLI::App app{"Total squared error clustering by subset reclassification"};
    app.require_subcommand(1, 1);
    std::string methods;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--input", cfg.input, "Input file (csv or pgm)")->required();
        sub->add_option("--format", cfg.format, "Input format")->check(CLI::IsMember({"csv", "pgm"}));
        sub->add_option("--policy", cfg.policy, "Move subsets")->check(CLI::IsMember({"singletons", "identical", "both"}));
        sub->add_option("--seed", cfg.seed, "RNG seed");
        sub->add_option("--out", cfg.out, "Output directory");
        sub->add_option("--lookahead", cfg.lookahead, "Merge candidates judged after correction (0 = all)");
    };
    for (const char* name : {"cluster", "compare"}) {
        auto* sub = app.add_subcommand(name, std::string(name) == "cluster" ? "Cluster points and write reports"
                                                                            : "Run several methods side by side");
        add_common(sub);
        sub->add_option("--m-max", cfg.m_max, "Largest cluster count");
        sub->add_option("--l-max", cfg.l_max, "Largest tuple size for tuple correction")->check(CLI::Range(2, 8));
        sub->add_option("--scope", cfg.scope, "Cluster pairs allowed to exchange points")
            ->check(CLI::IsMember({"all", "adjacent"}));
        sub->add_option("--direction", cfg.direction, "Sequence construction")
            ->check(CLI::IsMember({"bottom-up", "top-down", "both"}));
        sub->add_option("--methods", methods, "Comma-separated subset of kmeans,kh,otsu,oracle");
        sub->add_option("--kmeans-init", cfg.kmeans_init, "K-means seeding")
            ->check(CLI::IsMember({"incremental", "random"}));
        sub->add_option("--centers", cfg.centers, "CSV of initial K-means centers (one row per center)");
    }
    auto* seg = app.add_subcommand("segment", "Segment a grayscale image into connected regions");
    add_common(seg);
    seg->add_option("--m-min", cfg.m_min, "Smallest segment count")->check(CLI::PositiveNumber);
    seg->add_option("--counts", cfg.counts, "Segment counts to write approximations for")->delimiter(',');
    seg->add_flag("--flat-zones", cfg.flat_zones, "Start from flat zones instead of single pixels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kHelpShown;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kUsage;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    if (cfg.command == "segment") {
        cfg.policy = seg->count("--policy") ? cfg.policy : "both";
    }
    std::stringstream ss(methods);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            cfg.methods.push_back(item);
        }
    }
    if (const char* env = std::getenv("KH_THREADS")) {
        const long t = std::strtol(env, nullptr, 10);
        cfg.threads = t > 0 ? static_cast<std::size_t>(t) : 1;
    }
    return kOk;
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.command == "segment") {
            return run_segment(cfg, out);
        }
        return run_cluster(cfg, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << "\n";
        return kInput;
    } catch (const SizeGuardError& e) {
        err << "size guard: " << e.what() << "\n";
        return kSizeGuard;
    } catch (const PreconditionError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    }
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    if (const int rc = parse_args(argc, argv, cfg, out, err); rc != kOk) {
        return rc == kHelpShown ? kOk : rc;
    }
    return run(cfg, out, err);
}

}  // namespace kh::cli
