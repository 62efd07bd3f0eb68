#include "cpnmf/commands.hpp"

#include "cpnmf/graph.hpp"
#include "cpnmf/result_io.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace cpnmf::cli {

namespace {

std::int64_t parse_int(const std::string& token) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || token.empty())
        throw std::invalid_argument("not an integer: '" + token + "'");
    return value;
}

Labeling to_labeling(const std::vector<Index>& v) { return Labeling(v.begin(), v.end()); }

Labeling to_labeling(const std::vector<bool>& v) {
    Labeling out;
    out.reserve(v.size());
    for (bool b : v)
        out.push_back(b ? 1 : 0);
    return out;
}

}  // namespace

std::vector<std::int64_t> parse_int_list(const std::string& text) {
    std::vector<std::int64_t> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
                   item.end());
        if (item.empty())
            continue;
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(parse_int(item));
            continue;
        }
        const auto lo = parse_int(item.substr(0, dots));
        const auto hi = parse_int(item.substr(dots + 2));
        if (hi < lo)
            throw std::invalid_argument("empty range '" + item + "'");
        for (auto v = lo; v <= hi; ++v)
            out.push_back(v);
    }
    if (out.empty())
        throw std::invalid_argument("empty list '" + text + "'");
    return out;
}

GenerateSummary block_densities(const PlantedNetwork& net) {
    const auto& v = net.graph.adjacency();
    const auto& r = net.truth.pair_label;
    const auto& c = net.truth.core_flag;
    double edges[4] = {0, 0, 0, 0};
    double slots[4] = {0, 0, 0, 0};
    for (Index i = 0; i < net.graph.n(); ++i) {
        for (Index j = i + 1; j < net.graph.n(); ++j) {
            const auto ui = static_cast<std::size_t>(i);
            const auto uj = static_cast<std::size_t>(j);
            int block = 3;
            if (r[ui] == r[uj])
                block = c[ui] && c[uj] ? 0 : (c[ui] || c[uj] ? 1 : 2);
            slots[block] += 1;
            edges[block] += v(i, j) != 0.0 ? 1 : 0;
        }
    }
    auto frac = [&](int b) { return slots[b] > 0 ? edges[b] / slots[b] : 0.0; };
    GenerateSummary s;
    s.n = net.graph.n();
    s.pairs = static_cast<std::size_t>(*std::max_element(r.begin(), r.end()) + 1);
    s.density = s.n >= 2 ? density(net.graph) : 0.0;
    s.core_core = frac(0);
    s.core_periph = frac(1);
    s.periph_periph = frac(2);
    s.cross = frac(3);
    return s;
}

GenerateSummary run_generate(const GenerateOptions& opts, std::ostream& log) {
    if (opts.output.empty())
        throw std::invalid_argument("generate: --output is required");
    const PlantedNetwork net =
        opts.overlap > 0 ? generate_overlapping(opts.planted, opts.overlap) : generate(opts.planted);
    const fs::path truth_path = opts.ground_truth.empty() ? fs::path(opts.output.string() + ".truth") : opts.ground_truth;

    write_file_atomically(opts.output, [&](std::ostream& out) { write_edge_list(out, net.graph); });
    write_file_atomically(truth_path, [&](std::ostream& out) {
        write_ground_truth(out, net.graph.node_ids(), net.truth.labels());
    });
    if (opts.overlap > 0) {
        write_file_atomically(truth_path.string() + ".overlap", [&](std::ostream& out) {
            for (std::size_t i = 0; i < net.truth.secondary.size(); ++i)
                if (const auto& m = net.truth.secondary[i])
                    out << net.graph.node_ids()[i] << ' ' << m->pair << ' ' << (m->core ? 1 : 0) << '\n';
        });
    }

    const GenerateSummary s = block_densities(net);
    log << std::setprecision(4) << "N=" << s.n << " pairs=" << s.pairs << " density=" << s.density
        << " core-core=" << s.core_core << " core-periphery=" << s.core_periph
        << " periphery-periphery=" << s.periph_periph << " cross=" << s.cross << '\n';
    return s;
}

DetectionResult<double> run_detect(const DetectOptions& opts, std::ostream& log) {
    opts.hp.validate();
    if (opts.output.empty())
        throw std::invalid_argument("detect: --output is required");
    const Graph g = load_edge_list(opts.input);
    const auto res = fit(g.adjacency(), opts.hp);

    write_file_atomically(opts.output,
                          [&](std::ostream& out) { out << result_to_json(res, g.node_ids(), opts.hp).dump(1) << '\n'; });
    if (opts.reorder)
        write_file_atomically(*opts.reorder, [&](std::ostream& out) { write_reordered_adjacency(out, g, res); });
    if (opts.dump_factors) {
        const std::string prefix = opts.dump_factors->string();
        const auto& s = res.state;
        write_file_atomically(prefix + "W.csv", [&](std::ostream& out) { write_factor_csv(out, g.node_ids(), s.W); });
        write_file_atomically(prefix + "H.csv",
                              [&](std::ostream& out) { write_factor_csv(out, g.node_ids(), s.H.transpose()); });
        write_file_atomically(prefix + "M.csv", [&](std::ostream& out) { write_factor_csv(out, g.node_ids(), s.M); });
    }

    log << "N=" << g.n() << " active_pairs=" << res.active_pairs.size() << " iterations=" << res.iterations
        << (res.converged ? " (converged)" : "") << " objective=" << std::setprecision(10)
        << res.objective_trace.back() << '\n';
    return res;
}

CpScores run_eval(const EvalOptions& opts, std::ostream& out) {
    const ResultLabels pred = load_result_labels(opts.input);
    const TruthLabels truth = load_ground_truth(opts.ground_truth, pred.node_ids);
    const CpScores s = score_cp(truth.pairs, pred.pairs, truth.cores, pred.cores);
    const nlohmann::json doc{{"nmi_pairs", s.nmi_pairs}, {"nmi_core", s.nmi_core}, {"nmi_cp", s.nmi_cp}};
    if (opts.output)
        write_file_atomically(*opts.output, [&](std::ostream& o) { o << doc.dump(1) << '\n'; });
    out << doc.dump(1) << '\n';
    return s;
}

std::vector<BenchmarkRow> run_benchmark(const BenchmarkOptions& opts) {
    if (opts.sizes.empty() || opts.seeds.empty())
        throw std::invalid_argument("benchmark: --sizes and --seeds must be non-empty");
    opts.hp.validate();

    struct Job {
        Index n;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (Index n : opts.sizes)
        for (auto seed : opts.seeds)
            jobs.push_back({n, seed});
    for (const Job& job : jobs) {
        PlantedConfig cfg = opts.planted;
        cfg.pair_sizes = even_pair_sizes(job.n, opts.pairs);
        cfg.validate();
    }

    std::vector<BenchmarkRow> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            try {
                const auto started = std::chrono::steady_clock::now();
                PlantedConfig cfg = opts.planted;
                cfg.pair_sizes = even_pair_sizes(jobs[j].n, opts.pairs);
                cfg.seed = jobs[j].seed;
                const PlantedNetwork net = generate(cfg);
                Hyperparameters hp = opts.hp;
                hp.seed = jobs[j].seed;
                const auto res = fit(net.graph.adjacency(), hp);
                const double score = nmi_cp(net.truth.pair_label, to_labeling(res.pair_labels),
                                            net.truth.core_flag, to_labeling(res.core_flags));
                const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
                rows[j] = {jobs[j].n, std::to_string(jobs[j].seed), score,
                           res.seconds / static_cast<double>(std::max(res.iterations, 1)), total};
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };

    const int workers = std::max(1, std::min<int>(opts.threads, static_cast<int>(jobs.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < workers; ++t)
            pool.emplace_back(worker);
    }
    if (failure)
        std::rethrow_exception(failure);

    for (Index n : opts.sizes) {
        BenchmarkRow mean{n, "mean", 0.0, 0.0, 0.0};
        double count = 0;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (jobs[j].n != n)
                continue;
            mean.nmi_cp += rows[j].nmi_cp;
            mean.seconds_per_iter += rows[j].seconds_per_iter;
            mean.total_seconds += rows[j].total_seconds;
            count += 1;
        }
        mean.nmi_cp /= count;
        mean.seconds_per_iter /= count;
        mean.total_seconds /= count;
        rows.push_back(mean);
    }
    return rows;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
    out << "N,seed,nmi_cp,seconds_per_iter,total_seconds\n";
    for (const auto& r : rows)
        out << r.n << ',' << r.seed << ',' << std::setprecision(6) << r.nmi_cp << ',' << r.seconds_per_iter << ','
            << r.total_seconds << '\n';
}

}  // namespace cpnmf::cli
