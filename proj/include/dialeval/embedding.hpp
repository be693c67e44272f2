#pragma once

#include <memory>
#include <string_view>
#include <vector>

namespace dialeval {

inline constexpr int kDefaultEmbeddingDim = 384;

/// Text-to-vector contract. Real embedding models sit behind this interface;
/// the shipped implementation is deterministic so every test and scripted run
/// is reproducible.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual int dimension() const = 0;
    virtual std::vector<double> embed(std::string_view text) const = 0;
};

/// Hashed bag-of-words: each whitespace token (lowercased) hashes to one
/// coordinate with a hash-derived sign; the result is L2-normalized.
/// Same text always gives the same unit vector; empty text gives the zero
/// vector.
class HashedBagEmbedder : public EmbeddingProvider {
public:
    explicit HashedBagEmbedder(int dim = kDefaultEmbeddingDim);
    int dimension() const override;
    std::vector<double> embed(std::string_view text) const override;

private:
    int dim_;
};

/// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace dialeval
