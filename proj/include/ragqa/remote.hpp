#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>

#include "json.hpp"
#include "ragqa/chat.hpp"
#include "ragqa/dataset.hpp"
#include "ragqa/embedding.hpp"
#include "ragqa/evaluation.hpp"

namespace ragqa::remote {

// Where a pluggable model lives. Credentials are never part of the spec;
// api_key_env names the environment variable holding the bearer token.
struct BackendSpec {
  std::string backend = "stub";  // "stub" | "remote"
  std::string endpoint;          // full URL, e.g. http://127.0.0.1:8000/v1/chat/completions
  std::string model;
  std::string api_key_env;
  std::string prompt_file;  // optional prompt template override
  double timeout_seconds = 120.0;

  bool is_remote() const { return backend == "remote"; }
};

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

// Accepts http:// and https:// URLs; throws InvalidArgument otherwise.
Url parse_url(std::string_view url);

class JsonClient {
 public:
  explicit JsonClient(BackendSpec spec);

  // POSTs body to the endpoint and parses the JSON reply. Transport errors,
  // non-2xx statuses and unparsable bodies raise BackendFailure.
  nlohmann::json post(const nlohmann::json& body) const;
  const BackendSpec& spec() const { return spec_; }

 private:
  BackendSpec spec_;
  Url url_;
};

// Single-message chat completion; returns choices[0].message.content.
std::string complete(const JsonClient& client, const std::string& prompt);

std::string load_prompt(const BackendSpec& spec, std::string_view fallback);

class RemoteGenerator final : public Generator {
 public:
  explicit RemoteGenerator(BackendSpec spec) : client_(std::move(spec)) {}
  std::string id() const override { return "remote:" + client_.spec().model; }
  std::string generate(const AugmentedPrompt& prompt) override;

 private:
  JsonClient client_;
};

class RemoteTransformer final : public dataset::Transformer {
 public:
  explicit RemoteTransformer(BackendSpec spec);
  std::string id() const override { return "remote:" + client_.spec().model; }
  std::string rewrite(std::string_view question, std::string_view answer) override;

 private:
  JsonClient client_;
  std::string prompt_;
};

// Sends question and answer in one prompt and expects a JSON object
// {"question": ..., "answer": ...} back.
class RemoteTranslator final : public dataset::Translator {
 public:
  explicit RemoteTranslator(BackendSpec spec);
  std::string id() const override { return "remote:" + client_.spec().model; }
  dataset::TranslatedPair translate(std::string_view question, std::string_view answer) override;

 private:
  JsonClient client_;
  std::string prompt_;
};

// Expects a reply whose first word is First, Second or Neither.
class RemoteJudge final : public eval::Judge {
 public:
  explicit RemoteJudge(BackendSpec spec);
  std::string id() const override { return "remote:" + client_.spec().model; }
  eval::Verdict judge(std::string_view ground_truth, std::string_view first, std::string_view second) override;

 private:
  JsonClient client_;
  std::string prompt_;
};

// OpenAI-style embeddings endpoint: {"model", "input": [...]} ->
// {"data": [{"embedding": [...]}, ...]}.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(EmbedderSpec spec, BackendSpec backend);
  const EmbedderSpec& spec() const override { return spec_; }
  std::vector<double> embed_raw(std::string_view text) const override;
  std::vector<std::vector<double>> embed_raw_many(std::span<const std::string> texts) const override;

 private:
  EmbedderSpec spec_;
  JsonClient client_;
};

extern const std::string_view kDefaultTransformerPrompt;
extern const std::string_view kDefaultTranslatorPrompt;
extern const std::string_view kDefaultJudgePrompt;

}  // namespace ragqa::remote
