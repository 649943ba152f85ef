#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "ragqa/config.hpp"
#include "ragqa/error.hpp"

using namespace ragqa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string config_error(const json& j) {
  try {
    config_from_json(j);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    return e.what();
  }
  ADD_FAILURE() << "configuration accepted: " << j.dump();
  return {};
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  const auto c = config_from_json(json::object());
  EXPECT_DOUBLE_EQ(c.threshold, 0.7);
  EXPECT_EQ(c.k, 4u);
  EXPECT_EQ(c.max_tokens, 1024u);
  EXPECT_EQ(c.chunk_tokens, 200u);
  EXPECT_EQ(c.chunk_overlap, 20u);
  ASSERT_EQ(c.embedders.size(), 2u);
  const auto routing = make_routing(c);
  EXPECT_EQ(routing->for_language(Language::Arabic).spec().id, "stsb-xlm-r-multilingual");
  EXPECT_EQ(routing->for_language(Language::English).spec().id, "all-MiniLM-L6-v2");
}

TEST(Config, CollectsEveryProblem) {
  const auto msg = config_error({{"threshold", 1.5}, {"k", 0}, {"bogus", true}, {"bind", "nope"},
                                 {"chunk_tokens", 10}, {"chunk_overlap", 10}, {"generator", {{"backend", "magic"}}}});
  for (const char* needle : {"threshold", "k", "bogus", "bind", "chunk_overlap", "generator"}) {
    EXPECT_NE(msg.find(needle), std::string::npos) << needle << " in " << msg;
  }
}

TEST(Config, TypeErrors) {
  EXPECT_NE(config_error({{"k", "four"}}).find("k must be an integer"), std::string::npos);
  EXPECT_NE(config_error({{"threshold", "high"}}).find("threshold"), std::string::npos);
  EXPECT_NE(config_error({{"embedders", 3}}).find("embedders"), std::string::npos);
  config_error(json::array());
}

TEST(Config, CredentialsAreRefusedAnywhere) {
  EXPECT_NE(config_error({{"api_key", "sk-123"}}).find("environment variable"), std::string::npos);
  EXPECT_NE(config_error({{"generator", {{"backend", "remote"}, {"endpoint", "http://h/v1"}, {"token", "x"}}}})
                .find("generator.token"),
            std::string::npos);
  const json embedders = json::array({{{"language", "arabic"}, {"model_id", "a"}, {"Authorization", "Bearer x"}},
                                      {{"language", "english"}, {"model_id", "b"}}});
  EXPECT_NE(config_error({{"embedders", embedders}}).find("embedders[0].Authorization"), std::string::npos);
}

TEST(Config, EmbedderRoutesMustCoverBothLanguages) {
  const json only_english = json::array({{{"language", "english"}, {"model_id", "b"}}});
  EXPECT_NE(config_error({{"embedders", only_english}}).find("arabic"), std::string::npos);
  const json twice = json::array({{{"language", "english"}, {"model_id", "a"}},
                                  {{"language", "english"}, {"model_id", "b"}},
                                  {{"language", "arabic"}, {"model_id", "c"}}});
  config_error({{"embedders", twice}});
}

TEST(Config, SharedModelServesBothLanguages) {
  const json shared = json::array({{{"language", "arabic"}, {"model_id", "multi"}, {"dim", 16}},
                                   {{"language", "english"}, {"model_id", "multi"}, {"dim", 16}}});
  const auto c = config_from_json({{"embedders", shared}});
  const auto routing = make_routing(c);
  EXPECT_EQ(routing->for_language(Language::Arabic).spec().id, "multi");
  EXPECT_EQ(routing->for_language(Language::Arabic).spec().language, Language::Arabic);
  EXPECT_EQ(routing->for_language(Language::English).spec().language, Language::English);
  KnowledgeBase kb(routing);
  kb.ingest({"en", "ocean heat content", {}}, {});
  kb.ingest({"ar", "حرارة المحيطات", {}}, {});
  EXPECT_EQ(kb.size(), 2u);
}

TEST(Config, RemoteBackendsNeedEndpoints) {
  EXPECT_NE(config_error({{"judge", {{"backend", "remote"}}}}).find("judge.endpoint"), std::string::npos);
  EXPECT_NE(config_error({{"judge", {{"backend", "remote"}, {"endpoint", "ftp://x"}}}}).find("judge.endpoint"),
            std::string::npos);
  const auto c = config_from_json(
      {{"judge", {{"backend", "remote"}, {"endpoint", "https://example.test/v1/chat/completions"}, {"model", "m"},
                  {"api_key_env", "JUDGE_KEY"}}}});
  EXPECT_TRUE(c.judge.is_remote());
  EXPECT_EQ(c.judge.api_key_env, "JUDGE_KEY");
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  const auto c = config_from_json({{"store_dir", "db"}, {"template_dir", "tpl"}, {"session_snapshot", "s.json"}},
                                  "/etc/ragqa");
  EXPECT_EQ(c.store_dir, fs::path("/etc/ragqa/db"));
  EXPECT_EQ(*c.template_dir, fs::path("/etc/ragqa/tpl"));
  EXPECT_EQ(*c.session_snapshot, fs::path("/etc/ragqa/s.json"));
  EXPECT_EQ(config_from_json({{"store_dir", "/abs"}}, "/etc").store_dir, fs::path("/abs"));
}

TEST(Config, RedactedViewHoldsNoSecrets) {
  ::setenv("RAGQA_TEST_SECRET", "super-secret-value", 1);
  const auto c = config_from_json(
      {{"generator", {{"backend", "remote"}, {"endpoint", "http://127.0.0.1:9/v1"}, {"api_key_env", "RAGQA_TEST_SECRET"}}}});
  const auto dumped = c.redacted().dump();
  EXPECT_EQ(dumped.find("super-secret-value"), std::string::npos);
  EXPECT_NE(dumped.find("RAGQA_TEST_SECRET"), std::string::npos);
}

TEST(Config, ShippedConfigLoads) {
  const fs::path root = RAGQA_SOURCE_DIR;
  const auto c = load_config(root / "config.json");
  EXPECT_EQ(c.store_dir, root / "store");
  EXPECT_EQ(c.template_dir, root / "templates");
  const auto t = load_templates(c);
  EXPECT_EQ(t.query, PromptTemplates::defaults().query);
}

TEST(Config, ShippedPromptsMatchBuiltins) {
  const fs::path prompts = fs::path(RAGQA_SOURCE_DIR) / "prompts";
  const std::pair<const char*, std::string_view> files[] = {{"transformer.txt", remote::kDefaultTransformerPrompt},
                                                            {"translator.txt", remote::kDefaultTranslatorPrompt},
                                                            {"judge.txt", remote::kDefaultJudgePrompt}};
  for (const auto& [name, builtin] : files) {
    remote::BackendSpec spec;
    spec.prompt_file = (prompts / name).string();
    EXPECT_EQ(remote::load_prompt(spec, "unused"), builtin) << name;
  }
}

TEST(Config, MissingFile) {
  try {
    load_config("/nonexistent/ragqa.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}
