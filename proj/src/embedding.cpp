#include "ragqa/embedding.hpp"

#include <cmath>

#include "ragqa/error.hpp"
#include "ragqa/kernels.hpp"
#include "ragqa/random.hpp"
#include "ragqa/text.hpp"

namespace ragqa {

std::string_view to_string(Language lang) {
  switch (lang) {
    case Language::Arabic: return "arabic";
    case Language::English: return "english";
    case Language::Unknown: return "unknown";
  }
  return "unknown";
}

Language parse_language(std::string_view name) {
  const auto lower = text::ascii_lower(name);
  if (lower == "arabic" || lower == "ar") return Language::Arabic;
  if (lower == "english" || lower == "en") return Language::English;
  if (lower == "unknown") return Language::Unknown;
  throw Error(ErrorCode::InvalidArgument, "unknown language '" + std::string(name) + "'");
}

LanguageTag detect_language(std::string_view s) {
  const auto counts = text::count_scripts(s);
  LanguageTag tag;
  tag.arabic_ratio = counts.arabic_ratio();
  tag.latin_ratio = counts.latin_ratio();
  if (counts.letters() == 0) {
    tag.tag = Language::Unknown;
  } else if (tag.arabic_ratio > 0.5) {
    tag.tag = Language::Arabic;
  } else if (tag.latin_ratio > 0.5) {
    tag.tag = Language::English;
  }
  return tag;
}

EmbeddingVector EmbeddingVector::normalized(std::vector<double> values) {
  const auto& k = kernels::active();
  const double norm = std::sqrt(k.dot(values.data(), values.data(), values.size()));
  if (!(norm > 0.0) || !std::isfinite(norm)) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  k.scale(values.data(), 1.0 / norm, values.size());
  return EmbeddingVector(std::move(values));
}

double EmbeddingVector::norm() const {
  return std::sqrt(kernels::active().dot(values_.data(), values_.data(), values_.size()));
}

std::vector<std::vector<double>> Embedder::embed_raw_many(std::span<const std::string> texts) const {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_raw(t));
  return out;
}

HashedTokenEmbedder::HashedTokenEmbedder(EmbedderSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), seed_(mix_seed(seed, fnv1a64(spec_.id))) {}

std::vector<double> HashedTokenEmbedder::embed_raw(std::string_view s) const {
  const auto& k = kernels::active();
  const auto tokens = text::default_tokenizer().tokens(s);
  std::vector<double> acc(spec_.dim, 0.0);
  std::vector<double> token_vec(spec_.dim);
  for (const auto token : tokens) {
    SplitMix64 rng(mix_seed(seed_, fnv1a64(text::ascii_lower(token))));
    for (auto& x : token_vec) x = rng.gaussian();
    const double norm = std::sqrt(k.dot(token_vec.data(), token_vec.data(), spec_.dim));
    k.scale(token_vec.data(), 1.0 / norm, spec_.dim);
    k.add_into(acc.data(), token_vec.data(), spec_.dim);
  }
  if (!tokens.empty()) k.scale(acc.data(), 1.0 / static_cast<double>(tokens.size()), spec_.dim);
  return acc;
}

namespace {

void check_text(std::string_view s, std::optional<std::size_t> index) {
  const bool blank = text::whitespace_spans(s).empty();
  if (blank) {
    const std::string where = index ? " at index " + std::to_string(*index) : std::string();
    throw Error(ErrorCode::EmptyText, "cannot embed empty text" + where, index);
  }
}

EmbeddingVector finish(std::vector<double> raw, const EmbedderSpec& spec) {
  if (raw.size() != spec.dim) {
    throw Error(ErrorCode::DimensionMismatch, "embedder '" + spec.id + "' returned " + std::to_string(raw.size()) +
                                                  " values, expected " + std::to_string(spec.dim));
  }
  return EmbeddingVector::normalized(std::move(raw));
}

}  // namespace

EmbeddingVector embed_text(std::string_view s, const Embedder& embedder) {
  const auto& spec = embedder.spec();
  if (spec.dim == 0) throw Error(ErrorCode::DimensionZero, "embedder '" + spec.id + "' has dim 0");
  check_text(s, std::nullopt);
  return finish(embedder.embed_raw(s), spec);
}

std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts, const Embedder& embedder) {
  const auto& spec = embedder.spec();
  if (spec.dim == 0) throw Error(ErrorCode::DimensionZero, "embedder '" + spec.id + "' has dim 0");
  for (std::size_t i = 0; i < texts.size(); ++i) check_text(texts[i], i);
  if (texts.empty()) return {};
  auto raw = embedder.embed_raw_many(texts);
  if (raw.size() != texts.size()) {
    throw Error(ErrorCode::BackendFailure, "embedder returned " + std::to_string(raw.size()) + " vectors for " +
                                               std::to_string(texts.size()) + " texts");
  }
  std::vector<EmbeddingVector> out;
  out.reserve(raw.size());
  for (auto& r : raw) out.push_back(finish(std::move(r), spec));
  return out;
}

void RoutingTable::add(std::shared_ptr<const Embedder> embedder) {
  const auto lang = embedder->spec().language;
  auto* slot = lang == Language::Arabic ? &arabic_ : lang == Language::English ? &english_ : nullptr;
  if (slot == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "embedder '" + embedder->spec().id + "' must serve arabic or english");
  }
  if (*slot) {
    throw Error(ErrorCode::InvalidArgument, "a " + std::string(to_string(lang)) + " embedder is already registered");
  }
  *slot = embedder;
  for (const auto& e : order_) {
    if (e->spec().id == embedder->spec().id) return;
  }
  order_.push_back(std::move(embedder));
}

bool RoutingTable::has(Language lang) const {
  return lang == Language::Arabic ? arabic_ != nullptr : english_ != nullptr;
}

const Embedder& RoutingTable::for_language(Language lang) const {
  const auto& slot = lang == Language::Arabic ? arabic_ : english_;
  if (!slot) throw Error(ErrorCode::MissingRoute, "no embedder registered for " + std::string(to_string(lang)));
  return *slot;
}

std::vector<std::shared_ptr<const Embedder>> RoutingTable::embedders() const { return order_; }

const Embedder& route_embedder(std::string_view s, const RoutingTable& table) {
  const auto lang = detect_language(s).tag;
  return table.for_language(lang == Language::Arabic ? Language::Arabic : Language::English);
}

}  // namespace ragqa
