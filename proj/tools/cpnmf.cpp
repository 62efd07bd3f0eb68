// cpnmf: generate planted networks, detect core-periphery pairs, score and benchmark.

#include "cpnmf/commands.hpp"
#include "cpnmf/result_io.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <iostream>

namespace {

using namespace cpnmf;
using namespace cpnmf::cli;

void add_hyperparameter_flags(CLI::App& cmd, Hyperparameters& hp) {
    cmd.add_option("--k", hp.k_init, "Initial number of pairs")->capture_default_str();
    cmd.add_option("--a", hp.a, "Gamma shape of beta")->capture_default_str();
    cmd.add_option("--b", hp.b, "Gamma rate of beta")->capture_default_str();
    cmd.add_option("--sigma-bar", hp.sigma_bar, "Scale of the mask prior")->capture_default_str();
    cmd.add_option("--sigma-hat", hp.sigma_hat, "Scale of the prior on mu")->capture_default_str();
    cmd.add_option("--mu-hat", hp.mu_hat, "Prior mean of mu")->capture_default_str();
    cmd.add_option("--iters", hp.n_iter, "Maximum number of sweeps")->capture_default_str();
    cmd.add_option("--tol", hp.tol, "Relative objective change that stops the fit")->capture_default_str();
    cmd.add_option("--eps", hp.eps, "Numerical floor")->capture_default_str();
    cmd.add_option("--prune", hp.prune_threshold, "Relative norm below which a pair is dropped")
        ->capture_default_str();
}

void add_planted_flags(CLI::App& cmd, PlantedConfig& cfg) {
    cmd.add_option("--core-fraction", cfg.core_fraction, "Fraction of core nodes per pair")->capture_default_str();
    cmd.add_option("--p-cc", cfg.p_core_core, "Core-core edge probability")->capture_default_str();
    cmd.add_option("--p-cp", cfg.p_core_periph, "Core-periphery edge probability")->capture_default_str();
    cmd.add_option("--p-pp", cfg.p_periph_periph, "Periphery-periphery edge probability")->capture_default_str();
    cmd.add_option("--p-cross", cfg.p_cross, "Edge probability across pairs")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Core-periphery detection with masked Bayesian NMF"};
    app.require_subcommand(1);
    int threads = 1;

    // generate
    GenerateOptions gen;
    Index gen_n = 200;
    Index gen_pairs = 2;
    std::string gen_sizes;
    auto* generate_cmd = app.add_subcommand("generate", "Sample a planted core-periphery network");
    generate_cmd->add_option("--output", gen.output, "Edge list to write")->required();
    generate_cmd->add_option("--ground-truth", gen.ground_truth, "Ground truth file (default <output>.truth)");
    generate_cmd->add_option("--n", gen_n, "Number of nodes, split evenly across pairs")->capture_default_str();
    generate_cmd->add_option("--pairs", gen_pairs, "Number of pairs")->capture_default_str();
    generate_cmd->add_option("--pair-sizes", gen_sizes, "Explicit pair sizes, e.g. 100,150 (overrides --n/--pairs)");
    generate_cmd->add_option("--overlap", gen.overlap, "Nodes of pair 0 that are also cores of pair 1")
        ->capture_default_str();
    generate_cmd->add_option("--seed", gen.planted.seed, "RNG seed")->capture_default_str();
    add_planted_flags(*generate_cmd, gen.planted);

    // detect
    DetectOptions det;
    std::string reorder;
    std::string dump;
    auto* detect_cmd = app.add_subcommand("detect", "Fit the model to an edge list");
    detect_cmd->add_option("--input", det.input, "Edge list")->required()->check(CLI::ExistingFile);
    detect_cmd->add_option("--output", det.output, "Result JSON")->required();
    detect_cmd->add_option("--seed", det.hp.seed, "RNG seed")->capture_default_str();
    detect_cmd->add_option("--reorder", reorder, "Write the reordered adjacency CSV here");
    detect_cmd->add_option("--dump-factors", dump, "Write <prefix>W.csv, <prefix>H.csv, <prefix>M.csv");
    detect_cmd->add_option("--threads", threads, "Threads for matrix products")->capture_default_str();
    add_hyperparameter_flags(*detect_cmd, det.hp);

    // eval
    EvalOptions ev;
    std::string eval_out;
    auto* eval_cmd = app.add_subcommand("eval", "Score a result against ground truth");
    eval_cmd->add_option("--input", ev.input, "Result JSON")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--ground-truth", ev.ground_truth, "Ground truth file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--output", eval_out, "Also write the metrics JSON here");

    // benchmark
    BenchmarkOptions bench;
    std::string sizes = "1000";
    std::string seeds = "1..5";
    std::string bench_out;
    auto* bench_cmd = app.add_subcommand("benchmark", "Generate, fit and score over a sweep of sizes and seeds");
    bench_cmd->add_option("--sizes", sizes, "Network sizes, e.g. 1000,2000")->capture_default_str();
    bench_cmd->add_option("--seeds", seeds, "Seeds, e.g. 1..5")->capture_default_str();
    bench_cmd->add_option("--pairs", bench.pairs, "Number of pairs")->capture_default_str();
    bench_cmd->add_option("--output", bench_out, "CSV to write (default stdout)");
    bench_cmd->add_option("--threads", threads, "Concurrent runs")->capture_default_str();
    add_planted_flags(*bench_cmd, bench.planted);
    add_hyperparameter_flags(*bench_cmd, bench.hp);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate_cmd) {
            if (!gen_sizes.empty()) {
                gen.planted.pair_sizes.clear();
                for (auto s : parse_int_list(gen_sizes))
                    gen.planted.pair_sizes.push_back(static_cast<Index>(s));
            } else {
                gen.planted.pair_sizes = even_pair_sizes(gen_n, gen_pairs);
            }
            run_generate(gen, std::cout);
        } else if (*detect_cmd) {
            if (threads < 1)
                throw std::invalid_argument("--threads must be >= 1");
            Eigen::setNbThreads(threads);
            if (!reorder.empty())
                det.reorder = reorder;
            if (!dump.empty())
                det.dump_factors = dump;
            run_detect(det, std::cerr);
        } else if (*eval_cmd) {
            if (!eval_out.empty())
                ev.output = eval_out;
            run_eval(ev, std::cout);
        } else if (*bench_cmd) {
            if (threads < 1)
                throw std::invalid_argument("--threads must be >= 1");
            Eigen::setNbThreads(1);
            for (auto s : parse_int_list(sizes))
                bench.sizes.push_back(static_cast<Index>(s));
            for (auto s : parse_int_list(seeds)) {
                if (s < 0)
                    throw std::invalid_argument("seeds must be non-negative");
                bench.seeds.push_back(static_cast<std::uint64_t>(s));
            }
            bench.threads = threads;
            const auto rows = run_benchmark(bench);
            if (bench_out.empty()) {
                write_benchmark_csv(std::cout, rows);
            } else {
                write_file_atomically(bench_out, [&](std::ostream& out) { write_benchmark_csv(out, rows); });
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
