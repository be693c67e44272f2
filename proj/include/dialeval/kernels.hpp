#pragma once

#include <cstdint>
#include <vector>

namespace dialeval {

/// One retrieval hit: index into the candidate matrix plus its cosine score.
struct ScoredIndex {
    int index = 0;
    double score = 0.0;

    bool operator==(const ScoredIndex&) const = default;
};

/// Top-k cosine scan over a row-major matrix of `count` vectors of length
/// `dim` (vectors are expected unit-norm or zero; scores are plain dot
/// products). Results sorted by (score desc, index asc) so ties resolve to
/// the earliest-inserted vector.
///
/// The serial version is the reference; the parallel version must return
/// bit-identical results (per-row dot products are computed with the same
/// serial accumulation order, only the rows are distributed across threads).
std::vector<ScoredIndex> top_k_serial(const std::vector<double>& matrix, int dim, int count,
                                      const std::vector<double>& query, int k);
std::vector<ScoredIndex> top_k_parallel(const std::vector<double>& matrix, int dim, int count,
                                        const std::vector<double>& query, int k);

/// Pair-count accumulation for the co-occurrence graph: every sequence
/// contributes exactly 1 to each unordered pair of distinct node ids it
/// contains (duplicates within a sequence collapse first). Returns a
/// row-major node_count x node_count symmetric matrix with zero diagonal.
std::vector<uint32_t> cooccurrence_counts_serial(const std::vector<std::vector<int>>& sequences,
                                                 int node_count);
std::vector<uint32_t> cooccurrence_counts_parallel(const std::vector<std::vector<int>>& sequences,
                                                   int node_count);

}  // namespace dialeval
