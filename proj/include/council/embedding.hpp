#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace council {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  double norm() const;
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

// Cosine similarity in [-1, 1]; 0 when either vector is all-zero.
// Throws InvalidInput on dimension mismatch.
double similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Same, with norms supplied by the caller (the memory store caches them).
double similarity(std::span<const double> a, double norm_a, std::span<const double> b,
                  double norm_b);

// Text -> vector provider. Implementations must be deterministic per text and
// safe for concurrent calls. Transient failures throw ProviderError.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::string name() const = 0;
};

// Hashed character-trigram counts, fully offline. Text is padded with one
// boundary marker on each side, so strings shorter than one character embed
// to the zero vector.
class TrigramEmbedder final : public Embedder {
 public:
  explicit TrigramEmbedder(std::size_t dim = 256);

  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dim() const override { return dim_; }
  std::string name() const override { return "trigram"; }

 private:
  std::size_t dim_;
};

}  // namespace council
