#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "ragqa/chat.hpp"
#include "ragqa/config.hpp"

namespace httplib {
class Server;
}

namespace ragqa {

struct HttpResult {
  int status = 200;
  nlohmann::json body;
};

// Request handlers shared by the HTTP server and the CLI, so both produce
// identical records. Distinct conversations run concurrently; turns of one
// conversation are serialized.
class Service {
 public:
  explicit Service(AppConfig config, std::shared_ptr<Generator> generator = nullptr);

  HttpResult handle_chat(const nlohmann::json& request);
  HttpResult handle_ingest(const nlohmann::json& payload);
  HttpResult handle_search(std::string_view query, std::optional<std::string_view> k) const;
  HttpResult handle_health() const;
  HttpResult handle_config() const;

  void register_routes(httplib::Server& server);

  // Session snapshot: {"conversations": [{id, max_tokens, turns:[{role,text}]}]}
  void save_sessions(const std::filesystem::path& path) const;
  void load_sessions(const std::filesystem::path& path);
  std::optional<Conversation> conversation(const std::string& id) const;

  const AppConfig& config() const { return config_; }
  bool store_known() const { return store_known_.load(); }

 private:
  struct Session {
    std::mutex mutex;
    Conversation conv;
  };

  std::shared_ptr<Session> session_for(const std::string& id);
  std::string fresh_conversation_id();

  AppConfig config_;
  std::shared_ptr<RoutingTable> routing_;
  std::shared_ptr<KnowledgeBase> kb_;
  std::unique_ptr<ChatPipeline> pipeline_;
  std::atomic<bool> store_known_{false};
  std::mutex ingest_mutex_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<std::uint64_t> next_conversation_{1};
};

nlohmann::json error_body(std::string_view code, std::string_view message);

}  // namespace ragqa
