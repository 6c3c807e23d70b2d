#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "delichain/common.hpp"
#include "delichain/pairs.hpp"

namespace delichain {

using Vector = std::vector<double>;

// Fuzzy string ratio in [0, 100]: 100 * (1 - d / (|a| + |b|)) where d is the
// edit distance with insert/delete cost 1 and substitution cost 2. Operates on
// bytes. Two empty strings score 100.
double lexical_ratio(std::string_view a, std::string_view b);

// Per-category entity counts for one utterance.
struct CategoryCounts {
  Schema schema = Schema::Delidata;
  std::map<std::string, int> counts;

  bool empty() const;
  bool operator==(const CategoryCounts&) const = default;
};

// Category names per schema.
const std::vector<std::string>& schema_categories(Schema s);

struct EntityOptions {
  // Integer tokens that count as block-weight mentions in the wtd schema.
  std::vector<int> weight_values = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
};

// delidata: single-letter tokens are card letters (vowel/consonant; the
// pronoun "I" and lowercase "a"/"i" are words, not cards), integer tokens are
// card digits (even/odd). wtd: the five block colors and weight mentions.
CategoryCounts extract_entities(std::string_view text, Schema schema, const EntityOptions& opts = {});

// sum_c min(a_c, b_c) / sum_c max(a_c, b_c); 0 when both are empty.
// Throws ConfigError on schema mismatch.
double entity_iou(const CategoryCounts& a, const CategoryCounts& b);

double cosine(std::span<const double> a, std::span<const double> b);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  // Deterministic; safe to call concurrently.
  virtual Vector embed(std::string_view text) const = 0;
};

inline constexpr std::size_t kDefaultEmbeddingDim = 256;

// Token counts hashed into `dimension` buckets, L2-normalized unless all-zero.
Vector hashed_bow_embed(std::string_view text, std::size_t dimension = kDefaultEmbeddingDim);

class HashedBowProvider final : public EmbeddingProvider {
 public:
  explicit HashedBowProvider(std::size_t dimension = kDefaultEmbeddingDim);
  std::size_t dimension() const override { return dim_; }
  Vector embed(std::string_view text) const override { return hashed_bow_embed(text, dim_); }

 private:
  std::size_t dim_;
};

// Precomputed vectors: one record per line, "key<TAB>v1 v2 ... vd". Keys are
// the literal text to embed with backslash escapes for \t, \n and \\.
// embed() on an unknown key throws ValidationError.
class FileEmbeddingProvider final : public EmbeddingProvider {
 public:
  std::size_t dimension() const override { return dim_; }
  Vector embed(std::string_view key) const override;
  std::size_t size() const { return table_.size(); }

  static FileEmbeddingProvider load(const std::filesystem::path& path);
  static std::string escape_key(std::string_view text);

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, Vector> table_;
};

std::unique_ptr<EmbeddingProvider> file_embed_provider(const std::filesystem::path& path);

// [v_ctx, v_p, v_c, v_p (.) v_c]. v_p embeds the consequent (candidate
// probing) span, v_c the antecedent (candidate causal) span, v_ctx the whole
// rendered pair context.
struct PairFeature {
  std::size_t dimension = 0;
  Vector concatenated;

  std::span<const double> context() const { return segment(0); }
  std::span<const double> probing() const { return segment(1); }
  std::span<const double> causal() const { return segment(2); }
  std::span<const double> hadamard() const { return segment(3); }

 private:
  std::span<const double> segment(std::size_t k) const {
    return std::span<const double>(concatenated).subspan(k * dimension, dimension);
  }
};

PairFeature pair_feature(const PairText& text, const EmbeddingProvider& provider);

}  // namespace delichain
