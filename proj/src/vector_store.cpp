#include "ragqa/vector_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "ragqa/kernels.hpp"
#include "ragqa/text.hpp"

namespace ragqa {

namespace fs = std::filesystem;
using nlohmann::json;

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "dims " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()) + " differ");
  }
  const auto& k = kernels::active();
  const auto av = a.values();
  const auto bv = b.values();
  const double na = std::sqrt(k.dot(av.data(), av.data(), av.size()));
  const double nb = std::sqrt(k.dot(bv.data(), bv.data(), bv.size()));
  if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  return std::clamp(k.dot(av.data(), bv.data(), av.size()) / (na * nb), -1.0, 1.0);
}

VectorStore::VectorStore(std::size_t dim, std::string embedder_id)
    : dim_(dim), embedder_id_(std::move(embedder_id)), mutex_(std::make_unique<std::shared_mutex>()) {
  if (dim_ == 0) throw Error(ErrorCode::DimensionZero, "store dim must be positive");
}

VectorStore::VectorStore(VectorStore&& other) noexcept = default;
VectorStore& VectorStore::operator=(VectorStore&& other) noexcept = default;
VectorStore::~VectorStore() = default;

void VectorStore::validate_locked(const Document& doc) const {
  if (doc.embedding.dim() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "document '" + doc.id + "' has dim " +
                                                  std::to_string(doc.embedding.dim()) + ", store dim is " +
                                                  std::to_string(dim_));
  }
  if (doc.text.empty()) throw Error(ErrorCode::EmptyText, "document '" + doc.id + "' has empty text");
  if (index_.contains(doc.id)) throw Error(ErrorCode::DuplicateId, "document id '" + doc.id + "' already stored");
  if (!(doc.embedding.norm() > 0.0)) throw Error(ErrorCode::ZeroVector, "document '" + doc.id + "' embedding is zero");
}

void VectorStore::append_locked(Document doc) {
  const auto values = doc.embedding.values();
  rows_.insert(rows_.end(), values.begin(), values.end());
  norms_.push_back(doc.embedding.norm());
  index_.emplace(doc.id, entries_.size());
  entries_.push_back({std::move(doc.id), std::move(doc.text), doc.language, std::move(doc.metadata)});
}

void VectorStore::add_document(Document doc) {
  std::unique_lock lock(*mutex_);
  validate_locked(doc);
  append_locked(std::move(doc));
}

void VectorStore::add_documents(std::vector<Document> docs) {
  std::unique_lock lock(*mutex_);
  std::vector<std::string_view> ids;
  for (const auto& d : docs) {
    validate_locked(d);
    ids.push_back(d.id);
  }
  std::sort(ids.begin(), ids.end());
  if (auto it = std::adjacent_find(ids.begin(), ids.end()); it != ids.end()) {
    throw Error(ErrorCode::DuplicateId, "document id '" + std::string(*it) + "' repeated in batch");
  }
  for (auto& d : docs) append_locked(std::move(d));
}

std::vector<RetrievalResult> VectorStore::search_top_k(const EmbeddingVector& query, std::size_t k) const {
  if (query.dim() != dim_) {
    throw Error(ErrorCode::DimensionMismatch,
                "query dim " + std::to_string(query.dim()) + " vs store dim " + std::to_string(dim_));
  }
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  const double qnorm = query.norm();
  if (!(qnorm > 0.0)) throw Error(ErrorCode::ZeroVector, "query embedding is zero");

  std::shared_lock lock(*mutex_);
  const std::size_t n = entries_.size();
  std::vector<double> sims(n);
  kernels::active().dot_rows(rows_.data(), n, dim_, query.values().data(), sims.data());
  for (std::size_t i = 0; i < n; ++i) sims[i] = std::clamp(sims[i] / (qnorm * norms_[i]), -1.0, 1.0);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (sims[a] != sims[b]) return sims[a] > sims[b];
                      return entries_[a].id < entries_[b].id;
                    });
  std::vector<RetrievalResult> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const auto idx = order[i];
    out.push_back({entries_[idx].id, sims[idx], entries_[idx].text});
  }
  return out;
}

bool VectorStore::contains(std::string_view id) const {
  std::shared_lock lock(*mutex_);
  return index_.contains(std::string(id));
}

std::optional<Document> VectorStore::get(std::string_view id) const {
  std::shared_lock lock(*mutex_);
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  const auto& e = entries_[it->second];
  const auto* row = rows_.data() + it->second * dim_;
  return Document{e.id, e.text, e.language, e.metadata, EmbeddingVector(std::vector<double>(row, row + dim_))};
}

std::vector<Document> VectorStore::documents() const {
  std::shared_lock lock(*mutex_);
  std::vector<Document> out;
  out.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    const auto* row = rows_.data() + i * dim_;
    out.push_back({e.id, e.text, e.language, e.metadata, EmbeddingVector(std::vector<double>(row, row + dim_))});
  }
  return out;
}

std::size_t VectorStore::size() const {
  std::shared_lock lock(*mutex_);
  return entries_.size();
}

StoreManifest VectorStore::manifest() const { return {dim_, size(), embedder_id_, kStoreFormatVersion}; }

namespace {

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace

StoreManifest VectorStore::save(const fs::path& dir) const {
  std::shared_lock lock(*mutex_);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());

  std::string records;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    const auto* row = rows_.data() + i * dim_;
    json rec = {{"id", e.id},
                {"text", e.text},
                {"language", to_string(e.language)},
                {"metadata", e.metadata},
                {"embedding", std::vector<double>(row, row + dim_)}};
    records += rec.dump();
    records += '\n';
  }
  const StoreManifest m{dim_, entries_.size(), embedder_id_, kStoreFormatVersion};
  const json manifest = {
      {"format_version", m.format_version}, {"dim", m.dim}, {"count", m.count}, {"embedder_id", m.embedder_id}};
  write_file_atomic(dir / "records.jsonl", records);
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return m;
}

VectorStore VectorStore::load(const fs::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw Error(ErrorCode::IoFailure, "cannot open " + (dir / "manifest.json").string());
  StoreManifest m;
  try {
    const json manifest = json::parse(mf);
    m.format_version = manifest.at("format_version").get<int>();
    if (m.format_version != kStoreFormatVersion) {
      throw Error(ErrorCode::VersionMismatch, "store format " + std::to_string(m.format_version) +
                                                  ", expected " + std::to_string(kStoreFormatVersion));
    }
    m.dim = manifest.at("dim").get<std::size_t>();
    m.count = manifest.at("count").get<std::size_t>();
    m.embedder_id = manifest.at("embedder_id").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, std::string("manifest: ") + e.what());
  }
  if (m.dim == 0) throw Error(ErrorCode::CorruptManifest, "manifest dim is 0");

  std::ifstream rf(dir / "records.jsonl");
  if (!rf) throw Error(ErrorCode::IoFailure, "cannot open " + (dir / "records.jsonl").string());
  VectorStore store(m.dim, m.embedder_id);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(rf, line)) {
    ++line_no;
    if (line.empty()) continue;
    Document doc;
    try {
      const json rec = json::parse(line);
      doc.id = rec.at("id").get<std::string>();
      doc.text = rec.at("text").get<std::string>();
      doc.language = parse_language(rec.at("language").get<std::string>());
      doc.metadata = rec.at("metadata").get<Metadata>();
      doc.embedding = EmbeddingVector(rec.at("embedding").get<std::vector<double>>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptManifest, "records line " + std::to_string(line_no) + ": " + e.what());
    }
    if (doc.embedding.dim() != m.dim) {
      throw Error(ErrorCode::CorruptManifest, "record '" + doc.id + "' has dim " +
                                                  std::to_string(doc.embedding.dim()) + ", manifest says " +
                                                  std::to_string(m.dim));
    }
    try {
      store.add_document(std::move(doc));
    } catch (const Error& e) {
      throw Error(ErrorCode::CorruptManifest, std::string("records line ") + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (store.size() != m.count) {
    throw Error(ErrorCode::CorruptManifest, "manifest count " + std::to_string(m.count) + " but " +
                                                std::to_string(store.size()) + " records found");
  }
  return store;
}

std::vector<Chunk> chunk_text(std::string_view doc_id, std::string_view s, const ChunkingOptions& options) {
  if (options.max_tokens == 0) throw Error(ErrorCode::InvalidArgument, "chunk size must be positive");
  if (options.overlap >= options.max_tokens) {
    throw Error(ErrorCode::InvalidArgument, "chunk overlap must be smaller than chunk size");
  }
  const auto spans = text::whitespace_spans(s);
  std::vector<Chunk> out;
  const std::size_t step = options.max_tokens - options.overlap;
  for (std::size_t start = 0; start < spans.size(); start += step) {
    const std::size_t end = std::min(start + options.max_tokens, spans.size());
    const std::size_t ordinal = out.size();
    out.push_back({std::string(doc_id) + "#" + std::to_string(ordinal), ordinal,
                   std::string(s.substr(spans[start].begin, spans[end - 1].end - spans[start].begin))});
    if (end == spans.size()) break;
  }
  return out;
}

KnowledgeBase::KnowledgeBase(std::shared_ptr<const RoutingTable> routing)
    : routing_(std::move(routing)), ingest_mutex_(std::make_unique<std::mutex>()) {
  if (!routing_->has(Language::English) || !routing_->has(Language::Arabic)) {
    throw Error(ErrorCode::MissingRoute, "routing table needs both an arabic and an english embedder");
  }
  for (const auto& e : routing_->embedders()) {
    stores_.emplace(e->spec().id, std::make_unique<VectorStore>(e->spec().dim, e->spec().id));
  }
}

std::string KnowledgeBase::directory_name(std::string_view embedder_id) {
  std::string out;
  for (char c : embedder_id) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                      c == '_' || c == '.';
    out.push_back(keep ? c : '_');
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

KnowledgeBase KnowledgeBase::open(const fs::path& dir, std::shared_ptr<const RoutingTable> routing) {
  KnowledgeBase kb(std::move(routing));
  for (auto& [id, store] : kb.stores_) {
    const auto sub = dir / directory_name(id);
    if (!fs::exists(sub / "manifest.json")) continue;
    auto loaded = VectorStore::load(sub);
    if (loaded.dim() != store->dim()) {
      throw Error(ErrorCode::DimensionMismatch, "stored index for '" + id + "' has dim " +
                                                    std::to_string(loaded.dim()) + ", embedder dim is " +
                                                    std::to_string(store->dim()));
    }
    *store = std::move(loaded);
  }
  return kb;
}

void KnowledgeBase::save(const fs::path& dir) const {
  for (const auto& [id, store] : stores_) store->save(dir / directory_name(id));
}

IngestOutcome KnowledgeBase::ingest(const SourceDocument& doc, const ChunkingOptions& options) {
  IngestOutcome outcome{doc.id, 0, std::nullopt, {}};
  auto fail = [&](ErrorCode code, std::string reason) {
    outcome.error = code;
    outcome.reason = std::move(reason);
    return outcome;
  };
  if (doc.id.empty()) return fail(ErrorCode::SchemaError, "document id is empty");
  if (text::whitespace_spans(doc.text).empty()) return fail(ErrorCode::EmptyText, "document text is empty");

  std::map<std::string, std::vector<Document>> batches;
  try {
    for (auto& chunk : chunk_text(doc.id, doc.text, options)) {
      const auto& embedder = route(chunk.text);
      Metadata md = doc.metadata;
      md["source_id"] = doc.id;
      md["chunk"] = std::to_string(chunk.ordinal);
      auto embedding = embed_text(chunk.text, embedder);
      batches[embedder.spec().id].push_back(
          {std::move(chunk.id), chunk.text, detect_language(chunk.text).tag, std::move(md), std::move(embedding)});
    }
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  }

  std::lock_guard lock(*ingest_mutex_);
  const std::string first_chunk = doc.id + "#0";
  for (const auto& [id, store] : stores_) {
    if (store->contains(first_chunk)) return fail(ErrorCode::DuplicateId, "document id '" + doc.id + "' already ingested");
  }
  try {
    for (auto& [id, docs] : batches) {
      outcome.chunks_added += docs.size();
      stores_.at(id)->add_documents(std::move(docs));
    }
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  }
  return outcome;
}

const Embedder& KnowledgeBase::route(std::string_view query) const { return route_embedder(query, *routing_); }

const VectorStore& KnowledgeBase::store_for(const Embedder& embedder) const {
  const auto it = stores_.find(embedder.spec().id);
  if (it == stores_.end()) throw Error(ErrorCode::UnknownStore, "no index for embedder '" + embedder.spec().id + "'");
  return *it->second;
}

std::vector<RetrievalResult> KnowledgeBase::search(std::string_view query, std::size_t k) const {
  if (text::whitespace_spans(query).empty()) throw Error(ErrorCode::EmptyQuery, "query is empty");
  const auto& embedder = route(query);
  const auto& store = store_for(embedder);
  const auto q = embed_text(query, embedder);
  return store.search_top_k(q, k);
}

std::size_t KnowledgeBase::size() const {
  std::size_t n = 0;
  for (const auto& [id, store] : stores_) n += store->size();
  return n;
}

}  // namespace ragqa
