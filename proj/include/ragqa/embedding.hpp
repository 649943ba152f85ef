#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ragqa {

enum class Language { Arabic, English, Unknown };

std::string_view to_string(Language lang);
// Accepts "arabic"/"ar", "english"/"en", "unknown"; throws InvalidArgument otherwise.
Language parse_language(std::string_view name);

struct LanguageTag {
  Language tag = Language::Unknown;
  double arabic_ratio = 0.0;  // over letters only; 0 when there are none
  double latin_ratio = 0.0;
};

// Script-ratio classifier: Arabic iff arabic_ratio > 0.5, English iff the
// Latin ratio > 0.5, Unknown otherwise (including text with no letters).
LanguageTag detect_language(std::string_view text);

class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {}

  // Scales to unit L2 norm; throws ZeroVector for an all-zero input.
  static EmbeddingVector normalized(std::vector<double> values);

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double norm() const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

struct EmbedderSpec {
  std::string id;
  Language language = Language::English;
  std::size_t dim = 0;
  std::string endpoint;  // empty or "stub" selects the reference embedder
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual const EmbedderSpec& spec() const = 0;
  // Raw embedding; callers go through embed_text, which validates input and
  // normalizes.
  virtual std::vector<double> embed_raw(std::string_view text) const = 0;
  virtual std::vector<std::vector<double>> embed_raw_many(std::span<const std::string> texts) const;
};

// Reference embedder: every lowercased whitespace token maps to a seeded
// pseudo-random unit vector keyed by a hash of the token; the token vectors
// are averaged and the mean renormalized.
class HashedTokenEmbedder final : public Embedder {
 public:
  explicit HashedTokenEmbedder(EmbedderSpec spec, std::uint64_t seed = 0);

  const EmbedderSpec& spec() const override { return spec_; }
  std::vector<double> embed_raw(std::string_view text) const override;

 private:
  EmbedderSpec spec_;
  std::uint64_t seed_;
};

EmbeddingVector embed_text(std::string_view text, const Embedder& embedder);
std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts, const Embedder& embedder);

// One embedder per supported language; immutable once the service starts.
class RoutingTable {
 public:
  void add(std::shared_ptr<const Embedder> embedder);

  bool has(Language lang) const;
  const Embedder& for_language(Language lang) const;
  // Distinct embedders in registration order.
  std::vector<std::shared_ptr<const Embedder>> embedders() const;

 private:
  std::shared_ptr<const Embedder> arabic_;
  std::shared_ptr<const Embedder> english_;
  std::vector<std::shared_ptr<const Embedder>> order_;
};

// Unknown-language text falls back to the English embedder.
const Embedder& route_embedder(std::string_view text, const RoutingTable& table);

}  // namespace ragqa
