#include "ragqa/service.hpp"

#include <charconv>
#include <fstream>

#include "httplib.h"
#include "ragqa/error.hpp"

namespace ragqa {

namespace fs = std::filesystem;
using nlohmann::json;

json error_body(std::string_view code, std::string_view message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

namespace {

HttpResult from_error(const Error& e) {
  int status = 500;
  switch (e.code()) {
    case ErrorCode::EmptyQuery:
    case ErrorCode::EmptyText:
    case ErrorCode::InvalidArgument: status = 400; break;
    case ErrorCode::UnknownStore: status = 404; break;
    case ErrorCode::DuplicateId: status = 409; break;
    case ErrorCode::SchemaError: status = 422; break;
    case ErrorCode::GeneratorFailure:
    case ErrorCode::BackendFailure: status = 502; break;
    default: break;
  }
  return {status, error_body(to_string(e.code()), e.what())};
}

json sources_json(const GateDecision& d) {
  json out = json::array();
  for (const auto& r : d.context) out.push_back({{"doc_id", r.doc_id}, {"similarity", r.similarity}});
  return out;
}

}  // namespace

Service::Service(AppConfig config, std::shared_ptr<Generator> generator) : config_(std::move(config)) {
  validate(config_);
  routing_ = make_routing(config_);
  store_known_ = fs::exists(config_.store_dir);
  kb_ = std::make_shared<KnowledgeBase>(store_known_ ? KnowledgeBase::open(config_.store_dir, routing_)
                                                     : KnowledgeBase(routing_));
  pipeline_ = std::make_unique<ChatPipeline>(kb_, generator ? std::move(generator) : make_generator(config_),
                                             load_templates(config_), config_.chat());
}

std::shared_ptr<Service::Session> Service::session_for(const std::string& id) {
  std::lock_guard lock(sessions_mutex_);
  auto& s = sessions_[id];
  if (!s) {
    s = std::make_shared<Session>();
    s->conv = pipeline_->new_conversation(id);
  }
  return s;
}

std::string Service::fresh_conversation_id() {
  std::lock_guard lock(sessions_mutex_);
  std::string id;
  do {
    id = "conv-" + std::to_string(next_conversation_.fetch_add(1));
  } while (sessions_.contains(id));
  return id;
}

std::optional<Conversation> Service::conversation(const std::string& id) const {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) return std::nullopt;
    s = it->second;
  }
  std::lock_guard lock(s->mutex);
  return s->conv;
}

HttpResult Service::handle_chat(const json& request) {
  if (!request.is_object()) return {422, error_body("SchemaError", "request body must be a JSON object")};
  if (!request.contains("message")) return {400, error_body("EmptyQuery", "message is required")};
  if (!request["message"].is_string()) return {422, error_body("SchemaError", "message must be a string")};
  const auto message = request["message"].get<std::string>();
  if (text::whitespace_spans(message).empty()) return {400, error_body("EmptyQuery", "message is empty")};
  std::string id;
  if (request.contains("conversation_id")) {
    if (!request["conversation_id"].is_string()) {
      return {422, error_body("SchemaError", "conversation_id must be a string")};
    }
    id = request["conversation_id"].get<std::string>();
  }
  if (id.empty()) id = fresh_conversation_id();
  if (!store_known_) {
    return {404, error_body("UnknownStore", "store '" + config_.store_dir.string() + "' does not exist")};
  }

  auto session = session_for(id);
  std::lock_guard lock(session->mutex);
  try {
    const auto result = pipeline_->turn(session->conv, message);
    return {200,
            {{"conversation_id", id},
             {"reply", result.reply},
             {"augmented", result.decision.augmented()},
             {"sources", sources_json(result.decision)},
             {"truncated", result.truncation.changed()}}};
  } catch (const Error& e) {
    return from_error(e);
  }
}

HttpResult Service::handle_ingest(const json& payload) {
  const json* docs = &payload;
  if (payload.is_object() && payload.contains("documents")) docs = &payload["documents"];
  if (!docs->is_array()) return {422, error_body("SchemaError", "expected {\"documents\": [...]} or an array")};

  std::lock_guard lock(ingest_mutex_);
  std::size_t added = 0;
  std::size_t ok = 0, duplicates = 0;
  json rejected = json::array();
  json per_doc = json::array();
  for (const auto& item : *docs) {
    SourceDocument doc;
    if (!item.is_object() || !item.contains("id") || !item["id"].is_string() || !item.contains("text") ||
        !item["text"].is_string()) {
      const auto id = item.is_object() && item.contains("id") && item["id"].is_string() ? item["id"].get<std::string>()
                                                                                         : std::string();
      rejected.push_back({{"id", id}, {"reason", "SchemaError: items need string fields id and text"}});
      continue;
    }
    doc.id = item["id"].get<std::string>();
    doc.text = item["text"].get<std::string>();
    if (item.contains("metadata")) {
      if (!item["metadata"].is_object()) {
        rejected.push_back({{"id", doc.id}, {"reason", "SchemaError: metadata must be an object of strings"}});
        continue;
      }
      bool bad = false;
      for (const auto& [k, v] : item["metadata"].items()) {
        if (!v.is_string()) {
          bad = true;
          break;
        }
        doc.metadata[k] = v.get<std::string>();
      }
      if (bad) {
        rejected.push_back({{"id", doc.id}, {"reason", "SchemaError: metadata must be an object of strings"}});
        continue;
      }
    }
    const auto outcome = kb_->ingest(doc, config_.chunking());
    if (outcome.error) {
      if (*outcome.error == ErrorCode::DuplicateId) ++duplicates;
      rejected.push_back({{"id", doc.id}, {"reason", outcome.reason}});
      continue;
    }
    ++ok;
    added += outcome.chunks_added;
    per_doc.push_back({{"id", doc.id}, {"chunks", outcome.chunks_added}});
  }
  if (ok > 0 || !store_known_) {
    try {
      kb_->save(config_.store_dir);
      store_known_ = true;
    } catch (const Error& e) {
      return from_error(e);
    }
  }
  json body = {{"added", added}, {"rejected", rejected}, {"documents", per_doc}};
  int status = 200;
  if (ok == 0 && !rejected.empty()) status = duplicates > 0 ? 409 : 422;
  return {status, body};
}

HttpResult Service::handle_search(std::string_view query, std::optional<std::string_view> k_param) const {
  if (text::whitespace_spans(query).empty()) return {400, error_body("EmptyQuery", "q is empty")};
  std::size_t k = config_.k;
  if (k_param) {
    std::size_t parsed = 0;
    const auto* end = k_param->data() + k_param->size();
    const auto [ptr, ec] = std::from_chars(k_param->data(), end, parsed);
    if (ec != std::errc() || ptr != end || parsed == 0) {
      return {400, error_body("InvalidArgument", "k must be a positive integer")};
    }
    k = parsed;
  }
  if (!store_known_) {
    return {404, error_body("UnknownStore", "store '" + config_.store_dir.string() + "' does not exist")};
  }
  try {
    json results = json::array();
    for (const auto& r : kb_->search(query, k)) {
      results.push_back({{"doc_id", r.doc_id}, {"similarity", r.similarity}, {"text", r.text}});
    }
    return {200, {{"results", results}}};
  } catch (const Error& e) {
    return from_error(e);
  }
}

HttpResult Service::handle_health() const {
  return {200, {{"status", "ok"}, {"documents", kb_->size()}, {"store", store_known_.load()}}};
}

HttpResult Service::handle_config() const { return {200, config_.redacted()}; }

void Service::register_routes(httplib::Server& server) {
  auto reply = [](httplib::Response& res, const HttpResult& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse = [](const httplib::Request& req, json& out) {
    try {
      out = json::parse(req.body);
      return true;
    } catch (const json::exception&) {
      return false;
    }
  };
  server.Post("/v1/chat", [this, reply, parse](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!parse(req, body)) return reply(res, {422, error_body("SchemaError", "body is not valid JSON")});
    reply(res, handle_chat(body));
  });
  server.Post("/v1/documents", [this, reply, parse](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!parse(req, body)) return reply(res, {422, error_body("SchemaError", "body is not valid JSON")});
    reply(res, handle_ingest(body));
  });
  server.Get("/v1/search", [this, reply](const httplib::Request& req, httplib::Response& res) {
    const auto q = req.has_param("q") ? req.get_param_value("q") : std::string();
    std::optional<std::string> k;
    if (req.has_param("k")) k = req.get_param_value("k");
    reply(res, handle_search(q, k ? std::optional<std::string_view>(*k) : std::nullopt));
  });
  server.Get("/v1/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, handle_health()); });
  server.Get("/v1/config", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, handle_config()); });
}

void Service::save_sessions(const fs::path& path) const {
  json convs = json::array();
  std::vector<std::pair<std::string, std::shared_ptr<Session>>> snapshot;
  {
    std::lock_guard lock(sessions_mutex_);
    snapshot.assign(sessions_.begin(), sessions_.end());
  }
  for (const auto& [id, s] : snapshot) {
    std::lock_guard lock(s->mutex);
    json turns = json::array();
    for (const auto& t : s->conv.turns) turns.push_back({{"role", to_string(t.role)}, {"text", t.text}});
    convs.push_back({{"id", id}, {"max_tokens", s->conv.max_tokens}, {"turns", turns}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << json{{"conversations", convs}}.dump(2) << '\n';
}

void Service::load_sessions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return;
  try {
    const auto j = json::parse(in);
    std::lock_guard lock(sessions_mutex_);
    for (const auto& c : j.at("conversations")) {
      auto s = std::make_shared<Session>();
      s->conv.id = c.at("id").get<std::string>();
      s->conv.max_tokens = c.value("max_tokens", config_.max_tokens);
      for (const auto& t : c.at("turns")) {
        s->conv.turns.push_back(make_turn(parse_role(t.at("role").get<std::string>()), t.at("text").get<std::string>(),
                                          pipeline_->tokenizer()));
      }
      sessions_[s->conv.id] = std::move(s);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
}

}  // namespace ragqa
