#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ragqa/chat.hpp"
#include "ragqa/remote.hpp"
#include "ragqa/vector_store.hpp"

namespace ragqa {

struct EmbedderEntry {
  Language language = Language::English;
  std::string model_id;
  std::size_t dim = 8;
  std::string endpoint = "stub";  // "stub" or an embeddings URL
  std::string api_key_env;
};

struct AppConfig {
  std::filesystem::path store_dir = "store";
  std::vector<EmbedderEntry> embedders;
  double threshold = 0.7;
  std::size_t k = 4;
  std::size_t max_tokens = kDefaultContextTokens;
  std::size_t max_context = 4;
  std::optional<std::filesystem::path> template_dir;
  remote::BackendSpec generator;
  remote::BackendSpec transformer;
  remote::BackendSpec translator;
  remote::BackendSpec judge;
  std::string bind = "127.0.0.1:8080";
  std::size_t chunk_tokens = 200;
  std::size_t chunk_overlap = 20;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> session_snapshot;

  ChatConfig chat() const { return {threshold, k, max_context, max_tokens}; }
  ChunkingOptions chunking() const { return {chunk_tokens, chunk_overlap}; }
  // Effective configuration; credentials never appear because only the
  // names of their environment variables are configurable.
  nlohmann::json redacted() const;
};

// Defaults, including the two routed embedders (multilingual model for
// Arabic, lightweight model for English) on the reference backend.
AppConfig default_config();

// Applies defaults for absent keys and validates everything; a ConfigError
// lists every violated constraint. Relative paths resolve against base_dir.
AppConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);
void validate(const AppConfig& config);

std::shared_ptr<RoutingTable> make_routing(const AppConfig& config);
std::shared_ptr<Generator> make_generator(const AppConfig& config);
std::unique_ptr<dataset::Transformer> make_transformer(const AppConfig& config);
std::unique_ptr<dataset::Translator> make_translator(const AppConfig& config);
std::unique_ptr<eval::Judge> make_judge(const AppConfig& config);
PromptTemplates load_templates(const AppConfig& config);

}  // namespace ragqa
