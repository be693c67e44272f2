// Compares the serial reference kernels against the OpenMP versions and
// verifies they agree bit for bit while timing both.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "dialeval/kernels.hpp"

using namespace dialeval;
using clock_type = std::chrono::steady_clock;

namespace {

double ms_since(clock_type::time_point start) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - start).count();
}

std::vector<double> random_unit_rows(std::mt19937_64& rng, int rows, int dim) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> m(static_cast<size_t>(rows) * dim);
    for (int r = 0; r < rows; ++r) {
        double norm_sq = 0.0;
        for (int c = 0; c < dim; ++c) {
            double v = gauss(rng);
            m[static_cast<size_t>(r) * dim + c] = v;
            norm_sq += v * v;
        }
        double norm = std::sqrt(norm_sq);
        if (norm > 0.0)
            for (int c = 0; c < dim; ++c) m[static_cast<size_t>(r) * dim + c] /= norm;
    }
    return m;
}

struct BenchResult {
    double serial_ms = 0.0;
    double parallel_ms = 0.0;
    bool identical = false;
};

BenchResult bench_top_k(int rows, int dim, int k, int reps, std::mt19937_64& rng) {
    std::vector<double> matrix = random_unit_rows(rng, rows, dim);
    std::vector<double> query = random_unit_rows(rng, 1, dim);

    BenchResult res;
    res.identical = true;
    std::vector<ScoredIndex> serial, parallel;
    auto t0 = clock_type::now();
    for (int i = 0; i < reps; ++i) serial = top_k_serial(matrix, dim, rows, query, k);
    res.serial_ms = ms_since(t0) / reps;
    t0 = clock_type::now();
    for (int i = 0; i < reps; ++i) parallel = top_k_parallel(matrix, dim, rows, query, k);
    res.parallel_ms = ms_since(t0) / reps;

    if (serial.size() != parallel.size()) res.identical = false;
    for (size_t i = 0; res.identical && i < serial.size(); ++i) {
        if (serial[i].index != parallel[i].index ||
            std::memcmp(&serial[i].score, &parallel[i].score, sizeof(double)) != 0)
            res.identical = false;
    }
    return res;
}

BenchResult bench_cooccurrence(int sequences, int nodes, int seq_len, int reps,
                               std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, nodes - 1);
    std::vector<std::vector<int>> corpus(sequences);
    for (auto& seq : corpus) {
        seq.resize(seq_len);
        for (int& id : seq) id = pick(rng);
    }

    BenchResult res;
    std::vector<uint32_t> serial, parallel;
    auto t0 = clock_type::now();
    for (int i = 0; i < reps; ++i) serial = cooccurrence_counts_serial(corpus, nodes);
    res.serial_ms = ms_since(t0) / reps;
    t0 = clock_type::now();
    for (int i = 0; i < reps; ++i) parallel = cooccurrence_counts_parallel(corpus, nodes);
    res.parallel_ms = ms_since(t0) / reps;
    res.identical = serial == parallel;
    return res;
}

void print_row(const char* name, const BenchResult& r) {
    double speedup = r.parallel_ms > 0.0 ? r.serial_ms / r.parallel_ms : 0.0;
    std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n", name,
                r.serial_ms, r.parallel_ms, speedup, r.identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    bool smoke = false;
    for (int i = 1; i < argc; ++i)
        if (std::string(argv[i]) == "--smoke") smoke = true;

    std::mt19937_64 rng(42);
    int scale = smoke ? 1 : 16;
    int reps = smoke ? 2 : 10;

    BenchResult topk_small = bench_top_k(2000 * scale, 64, 10, reps, rng);
    BenchResult topk_wide = bench_top_k(500 * scale, 384, 5, reps, rng);
    BenchResult cooc = bench_cooccurrence(400 * scale, 60 * scale, 12, reps, rng);

    print_row("top_k 2k-row dim=64", topk_small);
    print_row("top_k 500-row dim=384", topk_wide);
    print_row("cooccurrence 400x12", cooc);

    bool all_ok = topk_small.identical && topk_wide.identical && cooc.identical;
    if (!all_ok) {
        std::fprintf(stderr, "parallel kernels diverged from the serial reference\n");
        return 1;
    }
    return 0;
}
