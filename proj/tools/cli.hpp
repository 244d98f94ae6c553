#ifndef KHCLUST_TOOLS_CLI_HPP
#define KHCLUST_TOOLS_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "khclust/engine.hpp"

namespace kh::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kInput = 3,
    kSizeGuard = 4,
    /// parse_args printed help; not a process exit code.
    kHelpShown = -1,
};

struct RunConfig {
    std::string command;
    std::string input;
    std::string format;  // csv | pgm, empty = from extension
    std::size_t m_max = 5;
    std::size_t l_max = 3;
    std::string policy = "singletons";
    std::string scope = "all";
    std::string direction = "both";
    std::vector<std::string> methods;
    std::uint64_t seed = 0;
    std::string out = ".";
    std::size_t lookahead = 0;
    std::string kmeans_init = "incremental";
    std::string centers;
    // segment only
    std::size_t m_min = 1;
    std::vector<std::size_t> counts;
    bool flat_zones = false;
    std::size_t threads = 1;
};

/// Parses argv into a RunConfig; returns kUsage on bad arguments and kHelpShown after --help.
int parse_args(int argc, const char* const* argv, RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Runs one parsed command, writing reports under cfg.out.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// parse_args followed by run.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kh::cli

#endif  // KHCLUST_TOOLS_CLI_HPP
