#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ragqa/embedding.hpp"
#include "ragqa/error.hpp"

namespace ragqa {

using Metadata = std::map<std::string, std::string>;

struct Document {
  std::string id;
  std::string text;
  Language language = Language::Unknown;
  Metadata metadata;
  EmbeddingVector embedding;
};

struct RetrievalResult {
  std::string doc_id;
  double similarity = 0.0;
  std::string text;

  friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

inline constexpr int kStoreFormatVersion = 1;

struct StoreManifest {
  std::size_t dim = 0;
  std::size_t count = 0;
  std::string embedder_id;
  int format_version = kStoreFormatVersion;
};

// <a,b> / (|a| |b|), clamped to [-1, 1].
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Exact cosine top-k index. Rows live in one contiguous buffer so a query is
// a single kernel pass. Readers share, writers are exclusive.
class VectorStore {
 public:
  VectorStore(std::size_t dim, std::string embedder_id);
  VectorStore(VectorStore&& other) noexcept;
  VectorStore& operator=(VectorStore&& other) noexcept;
  VectorStore(const VectorStore&) = delete;
  VectorStore& operator=(const VectorStore&) = delete;
  ~VectorStore();

  void add_document(Document doc);
  // All-or-nothing insert; nothing is added if any document is rejected.
  void add_documents(std::vector<Document> docs);

  std::vector<RetrievalResult> search_top_k(const EmbeddingVector& query, std::size_t k) const;

  bool contains(std::string_view id) const;
  std::optional<Document> get(std::string_view id) const;
  std::vector<Document> documents() const;

  std::size_t size() const;
  std::size_t dim() const { return dim_; }
  const std::string& embedder_id() const { return embedder_id_; }
  StoreManifest manifest() const;

  // Writes manifest.json and records.jsonl into dir.
  StoreManifest save(const std::filesystem::path& dir) const;
  static VectorStore load(const std::filesystem::path& dir);

 private:
  struct Entry {
    std::string id;
    std::string text;
    Language language;
    Metadata metadata;
  };

  void validate_locked(const Document& doc) const;
  void append_locked(Document doc);

  std::size_t dim_;
  std::string embedder_id_;
  std::vector<double> rows_;
  std::vector<double> norms_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unique_ptr<std::shared_mutex> mutex_;
};

struct ChunkingOptions {
  std::size_t max_tokens = 200;
  std::size_t overlap = 20;
};

struct Chunk {
  std::string id;  // "{doc_id}#{ordinal}"
  std::size_t ordinal = 0;
  std::string text;
};

// Windows of at most max_tokens whitespace tokens, consecutive windows
// sharing `overlap` tokens. Chunk text is the original substring.
std::vector<Chunk> chunk_text(std::string_view doc_id, std::string_view text, const ChunkingOptions& options);

struct SourceDocument {
  std::string id;
  std::string text;
  Metadata metadata;
};

struct IngestOutcome {
  std::string doc_id;
  std::size_t chunks_added = 0;
  std::optional<ErrorCode> error;
  std::string reason;
};

// The vector database: one VectorStore per routed embedder, so texts are
// always searched in the embedding space they were routed to.
class KnowledgeBase {
 public:
  explicit KnowledgeBase(std::shared_ptr<const RoutingTable> routing);

  // Loads every sub-store present under dir; embedders without one start empty.
  static KnowledgeBase open(const std::filesystem::path& dir, std::shared_ptr<const RoutingTable> routing);
  void save(const std::filesystem::path& dir) const;

  IngestOutcome ingest(const SourceDocument& doc, const ChunkingOptions& options);

  const Embedder& route(std::string_view query) const;
  const VectorStore& store_for(const Embedder& embedder) const;
  std::vector<RetrievalResult> search(std::string_view query, std::size_t k) const;

  const RoutingTable& routing() const { return *routing_; }
  std::size_t size() const;

  static std::string directory_name(std::string_view embedder_id);

 private:
  std::shared_ptr<const RoutingTable> routing_;
  std::map<std::string, std::unique_ptr<VectorStore>> stores_;
  std::unique_ptr<std::mutex> ingest_mutex_;
};

}  // namespace ragqa
