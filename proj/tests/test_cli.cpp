#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "khclust/io.hpp"

namespace fs = std::filesystem;
using namespace kh;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path(KHCLUST_TEST_TMP) / "cli" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr) {
    args.insert(args.begin(), "khclust");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int rc = cli::main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) {
        *out_text = out.str();
    }
    return rc;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

nlohmann::json load_json(const fs::path& p) {
    return nlohmann::json::parse(read_file(p));
}

}  // namespace

TEST(Cli, KmeansVersusKh) {
    const auto dir = scratch("kmeans_vs_kh");
    std::string csv = "x\n0\n6\n";
    for (int i = 0; i < 100; ++i) {
        csv += "10\n";
    }
    write_file(dir / "in.csv", csv);
    write_file(dir / "centers.csv", "3\n10\n");
    std::string out;
    ASSERT_EQ(run_cli({"compare", "--input", (dir / "in.csv").string(), "--m-max", "2", "--methods", "kmeans,kh",
                       "--centers", (dir / "centers.csv").string(), "--out", (dir / "out").string()},
                      &out),
              0);
    const auto km = load_json(dir / "out" / "kmeans.json");
    const auto kh = load_json(dir / "out" / "kh.json");
    EXPECT_NEAR(km["partitions"][1]["E"].get<double>(), 18.0, 1e-9);
    EXPECT_FALSE(km["partitions"][1]["stable"].get<bool>());
    EXPECT_NEAR(kh["partitions"][1]["E"].get<double>(), 15.841584158415841, 1e-6);
    EXPECT_TRUE(kh["partitions"][1]["stable"].get<bool>());
    EXPECT_NE(out.find("2,18,15.8415841584"), std::string::npos) << out;
}

TEST(Cli, AllMethodsAgreeOnTwoPairs) {
    const auto dir = scratch("all_methods");
    write_file(dir / "in.csv", "0\n1\n9\n10\n");
    ASSERT_EQ(run_cli({"compare", "--input", (dir / "in.csv").string(), "--m-max", "2", "--out",
                       (dir / "out").string()}),
              0);
    const auto csv = read_file(dir / "out" / "comparison.csv");
    EXPECT_EQ(csv, "m,E_kmeans,E_kh,E_otsu,E_oracle\n1,82,82,82,82\n2,1,1,1,1\n");
}

TEST(Cli, ReportRoundTrip) {
    const auto dir = scratch("round_trip");
    std::mt19937_64 rng(5);
    std::string csv;
    std::normal_distribution<double> g(0, 4);
    for (int i = 0; i < 60; ++i) {
        csv += std::to_string(g(rng)) + "," + std::to_string(g(rng) + (i % 3) * 6) + "\n";
    }
    write_file(dir / "in.csv", csv);
    ASSERT_EQ(run_cli({"cluster", "--input", (dir / "in.csv").string(), "--m-max", "4", "--out",
                       (dir / "out").string()}),
              0);
    const auto ds = read_csv_file((dir / "in.csv").string());
    const auto j = load_json(dir / "out" / "kh.json");
    EXPECT_EQ(j["schemaVersion"].get<int>(), 1);
    ASSERT_EQ(j["partitions"].size(), 4u);
    for (const auto& p : j["partitions"]) {
        const auto labels = p["labels"].get<std::vector<int>>();
        const double e = partition_energy(ds, labels);
        const double stored = p["E"].get<double>();
        EXPECT_NEAR(e, stored, 1e-9 * (1 + stored));
        EXPECT_NEAR(p["sigma"].get<double>(), sigma(stored, ds.size()), 1e-12);
    }
}

TEST(Cli, Deterministic) {
    const auto dir = scratch("determinism");
    std::string csv;
    for (int i = 0; i < 40; ++i) {
        csv += std::to_string((i * 37) % 23) + "," + std::to_string((i * 11) % 7) + "\n";
    }
    write_file(dir / "in.csv", csv);
    for (const char* run : {"a", "b"}) {
        ASSERT_EQ(run_cli({"compare", "--input", (dir / "in.csv").string(), "--m-max", "4", "--methods",
                           "kmeans,kh", "--kmeans-init", "random", "--seed", "7", "--out", (dir / run).string()}),
                  0);
    }
    for (const char* f : {"kmeans.json", "kh.json", "comparison.csv"}) {
        EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
    }
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("exit_codes");
    write_file(dir / "empty.csv", "");
    write_file(dir / "bad.csv", "1,2\n3\n");
    write_file(dir / "two_d.csv", "1,2\n3,4\n5,6\n");
    std::string big;
    for (int i = 0; i < 20; ++i) {
        big += std::to_string(i) + "\n";
    }
    write_file(dir / "big.csv", big);
    const auto out = (dir / "out").string();
    EXPECT_EQ(run_cli({"cluster", "--input", (dir / "empty.csv").string(), "--out", out}), 3);
    EXPECT_EQ(run_cli({"cluster", "--input", (dir / "bad.csv").string(), "--out", out}), 3);
    EXPECT_EQ(run_cli({"cluster", "--input", (dir / "missing.csv").string(), "--out", out}), 3);
    EXPECT_EQ(run_cli({"compare", "--input", (dir / "big.csv").string(), "--methods", "oracle", "--out", out}), 4);
    EXPECT_EQ(run_cli({"compare", "--input", (dir / "two_d.csv").string(), "--m-max", "2", "--methods", "otsu",
                       "--out", out}),
              2);
    EXPECT_EQ(run_cli({"cluster", "--input", (dir / "two_d.csv").string(), "--m-max", "9", "--out", out}), 2);
    EXPECT_EQ(run_cli({"cluster", "--input", (dir / "two_d.csv").string(), "--policy", "bogus"}), 2);
    EXPECT_EQ(run_cli({"frobnicate"}), 2);
    EXPECT_EQ(run_cli({"segment", "--input", (dir / "two_d.csv").string(), "--out", out}), 2);
    EXPECT_EQ(run_cli({"--help"}), 0);
}

TEST(Cli, SegmentWritesApproximation) {
    const auto dir = scratch("segment");
    write_pgm_file((dir / "row.pgm").string(), GrayImage(4, 1, {0, 0, 9, 10}));
    ASSERT_EQ(run_cli({"segment", "--input", (dir / "row.pgm").string(), "--counts", "2", "--out",
                       (dir / "out").string()}),
              0);
    const auto img = read_pgm_file((dir / "out" / "approx_2.pgm").string());
    EXPECT_EQ(img.pixels, (std::vector<double>{0, 0, 10, 10}));
    const auto curve = read_file(dir / "out" / "curve.csv");
    EXPECT_NE(curve.find("2,0.5,0.353553,corrected"), std::string::npos) << curve;
}

TEST(Cli, SegmentFlatImage) {
    const auto dir = scratch("segment_flat");
    write_pgm_file((dir / "flat.pgm").string(), GrayImage(8, 8, std::vector<double>(64, 128)));
    ASSERT_EQ(run_cli({"segment", "--input", (dir / "flat.pgm").string(), "--out", (dir / "out").string()}), 0);
    std::istringstream rows(read_file(dir / "out" / "curve.csv"));
    std::string line;
    std::getline(rows, line);
    int count = 0;
    while (std::getline(rows, line)) {
        ++count;
        EXPECT_NE(line.find(",0,0,"), std::string::npos) << line;
    }
    EXPECT_EQ(count, 128);
}
