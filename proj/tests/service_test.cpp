#include <gtest/gtest.h>

#include <filesystem>
#include <stdexcept>
#include <fstream>
#include <thread>

#include <unistd.h>

#include "httplib.h"
#include "mock_server.hpp"
#include "oracles.hpp"
#include "ragqa/service.hpp"

using namespace ragqa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class FailingGenerator final : public Generator {
 public:
  std::string id() const override { return "failing"; }
  std::string generate(const AugmentedPrompt&) override { throw std::runtime_error("upstream timeout"); }
};

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ragqa_service_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    config_ = default_config();
    config_.store_dir = dir_ / "store";
  }
  void TearDown() override { fs::remove_all(dir_); }

  static json docs() {
    return {{"documents",
             {{{"id", "en1"}, {"text", "Thermal expansion of seawater raises sea levels"}, {"metadata", {{"src", "t"}}}},
              {{"id", "ar1"}, {"text", "التمدد الحراري لمياه البحر يرفع مستوى سطح البحر"}}}}};
  }

  fs::path dir_;
  AppConfig config_;
};

}  // namespace

TEST_F(ServiceTest, ChatBeforeStoreExistsIsNotFound) {
  Service svc(config_);
  const auto r = svc.handle_chat({{"message", "hello"}});
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(r.body["error"]["code"], "UnknownStore");
  EXPECT_EQ(svc.handle_search("hello", std::nullopt).status, 404);
  EXPECT_EQ(svc.handle_health().body["store"], false);
}

TEST_F(ServiceTest, IngestThenChatAugmentsWithSources) {
  Service svc(config_);
  const auto ing = svc.handle_ingest(docs());
  ASSERT_EQ(ing.status, 200) << ing.body.dump();
  EXPECT_EQ(ing.body["added"], 2);
  EXPECT_TRUE(fs::exists(config_.store_dir));

  const auto r = svc.handle_chat({{"conversation_id", "c1"}, {"message", "Thermal expansion of seawater raises sea levels"}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["conversation_id"], "c1");
  EXPECT_EQ(r.body["augmented"], true);
  EXPECT_EQ(r.body["sources"][0]["doc_id"], "en1#0");
  EXPECT_EQ(r.body["truncated"], false);
  EXPECT_EQ(r.body["reply"].get<std::string>().rfind("stub-reply ", 0), 0u);

  const auto r2 = svc.handle_chat({{"conversation_id", "c1"}, {"message", "zzz qqq"}});
  EXPECT_EQ(r2.body["augmented"], false);
  EXPECT_TRUE(r2.body["sources"].empty());
  EXPECT_EQ(svc.conversation("c1")->turns.size(), 4u);

  const auto s = svc.handle_search("التمدد الحراري لمياه البحر يرفع مستوى سطح البحر", std::string_view("1"));
  ASSERT_EQ(s.status, 200);
  ASSERT_EQ(s.body["results"].size(), 1u);
  EXPECT_EQ(s.body["results"][0]["doc_id"], "ar1#0");
}

TEST_F(ServiceTest, ChatValidation) {
  Service svc(config_);
  svc.handle_ingest(docs());
  EXPECT_EQ(svc.handle_chat(json::object()).status, 400);
  EXPECT_EQ(svc.handle_chat({{"message", "   "}}).status, 400);
  EXPECT_EQ(svc.handle_chat({{"message", 3}}).status, 422);
  EXPECT_EQ(svc.handle_chat({{"message", "hi"}, {"conversation_id", 5}}).status, 422);
  EXPECT_EQ(svc.handle_chat(json::array()).status, 422);
  const auto fresh = svc.handle_chat({{"message", "hi"}});
  EXPECT_EQ(fresh.status, 200);
  EXPECT_FALSE(fresh.body["conversation_id"].get<std::string>().empty());
}

TEST_F(ServiceTest, GeneratorFailureIs502AndKeepsHistory) {
  {
    Service seed(config_);
    seed.handle_ingest(docs());
  }
  Service svc(config_, std::make_shared<FailingGenerator>());
  const auto r = svc.handle_chat({{"conversation_id", "c"}, {"message", "hello"}});
  EXPECT_EQ(r.status, 502);
  EXPECT_EQ(r.body["error"]["code"], "GeneratorFailure");
  EXPECT_TRUE(svc.conversation("c")->turns.empty());
}

TEST_F(ServiceTest, IngestStatusCodes) {
  Service svc(config_);
  EXPECT_EQ(svc.handle_ingest(docs()).status, 200);
  const auto dup = svc.handle_ingest(docs());
  EXPECT_EQ(dup.status, 409);
  EXPECT_EQ(dup.body["rejected"].size(), 2u);
  const auto empty = svc.handle_ingest(json::array({{{"id", "e"}, {"text", " "}}}));
  EXPECT_EQ(empty.status, 422);
  EXPECT_EQ(svc.handle_ingest(json::array({{{"id", 1}, {"text", "x"}}})).status, 422);
  EXPECT_EQ(svc.handle_ingest({{"id", "x"}}).status, 422);
  const auto mixed = svc.handle_ingest(json::array({{{"id", "new"}, {"text", "fresh text"}}, {{"id", "en1"}, {"text", "x"}}}));
  EXPECT_EQ(mixed.status, 200);
  EXPECT_EQ(mixed.body["added"], 1);
  EXPECT_EQ(mixed.body["rejected"][0]["id"], "en1");
}

TEST_F(ServiceTest, SearchParameters) {
  Service svc(config_);
  svc.handle_ingest(docs());
  EXPECT_EQ(svc.handle_search("", std::nullopt).status, 400);
  EXPECT_EQ(svc.handle_search("sea", std::string_view("0")).status, 400);
  EXPECT_EQ(svc.handle_search("sea", std::string_view("x")).status, 400);
  EXPECT_EQ(svc.handle_search("sea", std::string_view("-1")).status, 400);
  EXPECT_EQ(svc.handle_search("sea", std::string_view("50")).status, 200);
}

TEST_F(ServiceTest, StoreSurvivesRestart) {
  {
    Service svc(config_);
    svc.handle_ingest(docs());
  }
  Service again(config_);
  EXPECT_TRUE(again.store_known());
  EXPECT_EQ(again.handle_health().body["documents"], 2);
}

TEST_F(ServiceTest, SessionSnapshotRoundTrip) {
  const auto snapshot = dir_ / "sessions.json";
  std::vector<ConversationTurn> before;
  {
    Service svc(config_);
    svc.handle_ingest(docs());
    svc.handle_chat({{"conversation_id", "keep"}, {"message", "first question"}});
    svc.handle_chat({{"conversation_id", "keep"}, {"message", "second question"}});
    before = svc.conversation("keep")->turns;
    svc.save_sessions(snapshot);
  }
  Service svc(config_);
  svc.load_sessions(snapshot);
  EXPECT_EQ(svc.conversation("keep")->turns, before);
  svc.load_sessions(dir_ / "missing.json");
  // Fresh ids never collide with restored sessions.
  const json restored_like = {{"conversations", {{{"id", "conv-1"}, {"turns", json::array()}}}}};
  std::ofstream(snapshot) << restored_like.dump();
  svc.load_sessions(snapshot);
  const auto r = svc.handle_chat({{"message", "new"}});
  EXPECT_NE(r.body["conversation_id"], "conv-1");
}

TEST_F(ServiceTest, ConcurrentConversations) {
  Service svc(config_);
  svc.handle_ingest(docs());
  std::vector<std::thread> threads;
  std::atomic<int> failures{0};
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 20; ++i) {
        const auto r = svc.handle_chat({{"conversation_id", "c" + std::to_string(t % 4)}, {"message", "question " + std::to_string(i)}});
        if (r.status != 200) ++failures;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(failures, 0);
  for (int c = 0; c < 4; ++c) {
    const auto conv = svc.conversation("c" + std::to_string(c));
    ASSERT_TRUE(conv);
    EXPECT_EQ(conv->turns.size(), 80u);
    for (std::size_t i = 0; i < conv->turns.size(); ++i) {
      EXPECT_EQ(conv->turns[i].role, i % 2 == 0 ? Role::User : Role::Assistant);
    }
  }
}

TEST_F(ServiceTest, ConfigEndpointIsRedacted) {
  Service svc(config_);
  const auto r = svc.handle_config();
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["k"], 4);
  EXPECT_FALSE(r.body.contains("api_key"));
}

TEST_F(ServiceTest, HttpRoutesOverLoopback) {
  Service svc(config_);
  httplib::Server server;
  svc.register_routes(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  auto chat = client.Post("/v1/chat", R"({"message":"hello"})", "application/json");
  ASSERT_TRUE(chat);
  EXPECT_EQ(chat->status, 404);

  auto ing = client.Post("/v1/documents", docs().dump(), "application/json");
  ASSERT_TRUE(ing);
  EXPECT_EQ(ing->status, 200);

  chat = client.Post("/v1/chat", R"({"conversation_id":"web","message":"Thermal expansion of seawater raises sea levels"})",
                     "application/json");
  ASSERT_TRUE(chat);
  EXPECT_EQ(chat->status, 200);
  const auto body = json::parse(chat->body);
  EXPECT_EQ(body["augmented"], true);
  EXPECT_EQ(chat->get_header_value("Content-Type"), "application/json");

  auto bad = client.Post("/v1/chat", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 422);

  auto search = client.Get("/v1/search?q=sea%20levels&k=1");
  ASSERT_TRUE(search);
  EXPECT_EQ(search->status, 200);
  EXPECT_EQ(json::parse(search->body)["results"].size(), 1u);

  auto health = client.Get("/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(json::parse(health->body)["status"], "ok");
  auto cfg = client.Get("/v1/config");
  ASSERT_TRUE(cfg);
  EXPECT_EQ(cfg->status, 200);

  server.stop();
  th.join();
}

TEST_F(ServiceTest, RemoteGeneratorFailureOverHttpIs502) {
  MockBackend backend([](const json&) { return std::pair<int, std::string>{500, "{}"}; });
  {
    Service seed(config_);
    seed.handle_ingest(docs());
  }
  config_.generator.backend = "remote";
  config_.generator.endpoint = backend.url("/v1/chat/completions");
  config_.generator.timeout_seconds = 5;
  Service svc(config_);
  const auto r = svc.handle_chat({{"message", "hello"}});
  EXPECT_EQ(r.status, 502);
}
