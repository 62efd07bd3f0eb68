#pragma once

// Subcommand implementations behind the cpnmf command-line tool.

#include "cpnmf/eval.hpp"
#include "cpnmf/masked_nmf.hpp"
#include "cpnmf/synthetic.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cpnmf::cli {

namespace fs = std::filesystem;

/// Parses "1,2,5..8" into {1, 2, 5, 6, 7, 8}. Throws std::invalid_argument.
std::vector<std::int64_t> parse_int_list(const std::string& text);

struct GenerateOptions {
    PlantedConfig planted;
    Index overlap = 0;
    fs::path output;        // edge list
    fs::path ground_truth;  // "node pair core" lines; secondary memberships go to <ground_truth>.overlap
};

struct GenerateSummary {
    Index n = 0;
    std::size_t pairs = 0;
    double density = 0.0;
    // Observed within-pair block densities and the cross-pair density.
    double core_core = 0.0;
    double core_periph = 0.0;
    double periph_periph = 0.0;
    double cross = 0.0;
};

GenerateSummary block_densities(const PlantedNetwork& net);
GenerateSummary run_generate(const GenerateOptions& opts, std::ostream& log);

struct DetectOptions {
    fs::path input;
    fs::path output;
    Hyperparameters hp;
    std::optional<fs::path> reorder;       // reordered adjacency CSV
    std::optional<fs::path> dump_factors;  // prefix for <prefix>W.csv, H.csv, M.csv
};

DetectionResult<double> run_detect(const DetectOptions& opts, std::ostream& log);

struct EvalOptions {
    fs::path input;  // result JSON
    fs::path ground_truth;
    std::optional<fs::path> output;
};

CpScores run_eval(const EvalOptions& opts, std::ostream& out);

struct BenchmarkOptions {
    std::vector<Index> sizes;
    std::vector<std::uint64_t> seeds;
    Index pairs = 2;
    PlantedConfig planted;  // probabilities and core fraction; sizes and seed are set per run
    Hyperparameters hp;     // seed is set per run
    int threads = 1;        // concurrent (N, seed) jobs
};

struct BenchmarkRow {
    Index n = 0;
    std::string seed;  // "mean" on aggregate rows
    double nmi_cp = 0.0;
    double seconds_per_iter = 0.0;
    double total_seconds = 0.0;
};

/// One row per (N, seed) in sweep order, then one mean row per N.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkOptions& opts);
void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows);

}  // namespace cpnmf::cli
