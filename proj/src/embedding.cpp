#include "dialeval/embedding.hpp"

#include <cmath>
#include <stdexcept>

#include "dialeval/json_util.hpp"
#include "dialeval/rng.hpp"

namespace dialeval {

HashedBagEmbedder::HashedBagEmbedder(int dim) : dim_(dim) {
    if (dim <= 0) throw std::invalid_argument("embedding dimension must be positive");
}

int HashedBagEmbedder::dimension() const { return dim_; }

std::vector<double> HashedBagEmbedder::embed(std::string_view text) const {
    std::vector<double> v(static_cast<size_t>(dim_), 0.0);
    const std::string normalized = normalize_text(text);

    size_t pos = 0;
    while (pos < normalized.size()) {
        size_t end = normalized.find(' ', pos);
        if (end == std::string::npos) end = normalized.size();
        if (end > pos) {
            const uint64_t h = fnv1a64(std::string_view(normalized).substr(pos, end - pos));
            const size_t index = static_cast<size_t>(h % static_cast<uint64_t>(dim_));
            const double sign = (h >> 63) ? -1.0 : 1.0;
            v[index] += sign;
        }
        pos = end + 1;
    }

    double norm_sq = 0.0;
    for (const double x : v) norm_sq += x * x;
    if (norm_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& x : v) x *= inv;
    }
    return v;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace dialeval
