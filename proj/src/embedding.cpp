#include "council/embedding.hpp"

#include <cmath>
#include <numeric>

#include "council/errors.hpp"
#include "council/random.hpp"

namespace council {

double EmbeddingVector::norm() const {
  return std::sqrt(std::inner_product(values.begin(), values.end(), values.begin(), 0.0));
}

double similarity(std::span<const double> a, double norm_a, std::span<const double> b,
                  double norm_b) {
  if (a.size() != b.size()) {
    throw InvalidInput("embedding dimension mismatch: " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()));
  }
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  return std::clamp(dot / (norm_a * norm_b), -1.0, 1.0);
}

double similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  return similarity(a.values, a.norm(), b.values, b.norm());
}

TrigramEmbedder::TrigramEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw InvalidInput("embedding dimension must be positive");
}

EmbeddingVector TrigramEmbedder::embed(std::string_view text) const {
  EmbeddingVector out{std::vector<double>(dim_, 0.0)};
  if (text.empty()) return out;
  std::string padded;
  padded.reserve(text.size() + 2);
  padded += '\x02';
  padded += text;
  padded += '\x03';
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    out.values[hash_text(std::string_view(padded).substr(i, 3)) % dim_] += 1.0;
  }
  return out;
}

}  // namespace council
