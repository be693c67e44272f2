#include "dialeval/kernels.hpp"

#include <algorithm>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dialeval {

namespace {

double dot_row(const std::vector<double>& matrix, int dim, int row,
               const std::vector<double>& query) {
    const double* base = matrix.data() + static_cast<size_t>(row) * dim;
    double acc = 0.0;
    for (int i = 0; i < dim; ++i) acc += base[i] * query[i];
    return acc;
}

std::vector<ScoredIndex> select_top_k(std::vector<double> scores, int k) {
    std::vector<ScoredIndex> all(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) {
        all[i] = ScoredIndex{static_cast<int>(i), scores[i]};
    }
    std::sort(all.begin(), all.end(), [](const ScoredIndex& a, const ScoredIndex& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.index < b.index;
    });
    if (static_cast<int>(all.size()) > k) all.resize(static_cast<size_t>(k));
    return all;
}

void check_shapes(const std::vector<double>& matrix, int dim, int count,
                  const std::vector<double>& query, int k) {
    if (dim <= 0) throw std::invalid_argument("top_k: dim must be positive");
    if (k < 0) throw std::invalid_argument("top_k: k must be non-negative");
    if (static_cast<size_t>(count) * dim != matrix.size())
        throw std::invalid_argument("top_k: matrix size does not match count*dim");
    if (static_cast<int>(query.size()) != dim)
        throw std::invalid_argument("top_k: query dimension mismatch");
}

}  // namespace

std::vector<ScoredIndex> top_k_serial(const std::vector<double>& matrix, int dim, int count,
                                      const std::vector<double>& query, int k) {
    check_shapes(matrix, dim, count, query, k);
    std::vector<double> scores(static_cast<size_t>(count));
    for (int row = 0; row < count; ++row) scores[row] = dot_row(matrix, dim, row, query);
    return select_top_k(std::move(scores), k);
}

std::vector<ScoredIndex> top_k_parallel(const std::vector<double>& matrix, int dim, int count,
                                        const std::vector<double>& query, int k) {
    check_shapes(matrix, dim, count, query, k);
    std::vector<double> scores(static_cast<size_t>(count));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int row = 0; row < count; ++row) scores[row] = dot_row(matrix, dim, row, query);
    return select_top_k(std::move(scores), k);
}

namespace {

void accumulate_sequence(const std::vector<int>& sequence, int node_count,
                         std::vector<int>& scratch, std::vector<uint32_t>& counts) {
    scratch.clear();
    for (const int id : sequence) {
        if (id < 0 || id >= node_count)
            throw std::out_of_range("cooccurrence: node id out of range");
        scratch.push_back(id);
    }
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
    for (size_t i = 0; i < scratch.size(); ++i) {
        for (size_t j = i + 1; j < scratch.size(); ++j) {
            const int a = scratch[i], b = scratch[j];
            counts[static_cast<size_t>(a) * node_count + b] += 1;
            counts[static_cast<size_t>(b) * node_count + a] += 1;
        }
    }
}

}  // namespace

std::vector<uint32_t> cooccurrence_counts_serial(const std::vector<std::vector<int>>& sequences,
                                                 int node_count) {
    std::vector<uint32_t> counts(static_cast<size_t>(node_count) * node_count, 0);
    std::vector<int> scratch;
    for (const auto& seq : sequences) accumulate_sequence(seq, node_count, scratch, counts);
    return counts;
}

std::vector<uint32_t> cooccurrence_counts_parallel(const std::vector<std::vector<int>>& sequences,
                                                   int node_count) {
    const size_t cells = static_cast<size_t>(node_count) * node_count;
#ifdef _OPENMP
    // Exceptions must not escape the parallel region, so range-check up front.
    for (const auto& seq : sequences)
        for (const int id : seq)
            if (id < 0 || id >= node_count)
                throw std::out_of_range("cooccurrence: node id out of range");

    const int threads = omp_get_max_threads();
    std::vector<std::vector<uint32_t>> partial(static_cast<size_t>(threads));

#pragma omp parallel
    {
        const int tid = omp_get_thread_num();
        auto& local = partial[static_cast<size_t>(tid)];
        local.assign(cells, 0);
        std::vector<int> scratch;
#pragma omp for schedule(static)
        for (long long s = 0; s < static_cast<long long>(sequences.size()); ++s) {
            accumulate_sequence(sequences[static_cast<size_t>(s)], node_count, scratch, local);
        }
    }

    std::vector<uint32_t> counts(cells, 0);
    for (const auto& local : partial) {
        if (local.empty()) continue;
        for (size_t i = 0; i < cells; ++i) counts[i] += local[i];
    }
    return counts;
#else
    (void)cells;
    return cooccurrence_counts_serial(sequences, node_count);
#endif
}

}  // namespace dialeval
