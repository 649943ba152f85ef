#include "ragqa/remote.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "ragqa/error.hpp"

namespace ragqa::remote {

using nlohmann::json;

const std::string_view kDefaultTransformerPrompt =
    "You are a domain expert in climate change and sustainability. Rewrite the answer below as a helpful, "
    "conversational reply to the question. Keep every fact from the answer and add nothing unsupported. "
    "Reply with the rewritten answer only.\n\nQuestion: {{question}}\nAnswer: {{answer}}\n";

const std::string_view kDefaultTranslatorPrompt =
    "You are an expert Arabic translator specialising in climate change and sustainability. Translate the "
    "following question and answer into Modern Standard Arabic, keeping their meaning and conversational tone. "
    "Reply with a JSON object {\"question\": \"...\", \"answer\": \"...\"} and nothing else.\n\n"
    "Question: {{question}}\nAnswer: {{answer}}\n";

const std::string_view kDefaultJudgePrompt =
    "You compare two responses against a ground-truth answer. Select the response that best semantically "
    "aligns with the ground truth. If neither response semantically matches it, say Neither. Reply with exactly "
    "one word: First, Second or Neither.\n\nGround truth: {{ground_truth}}\n\nFirst response: {{first}}\n\n"
    "Second response: {{second}}\n";

Url parse_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw Error(ErrorCode::InvalidArgument, "URL lacks a scheme: " + std::string(url));
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::InvalidArgument, "unsupported URL scheme: " + std::string(url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Url out;
  out.origin = std::string(url.substr(0, path_start));
  out.path = path_start == std::string_view::npos ? "/" : std::string(url.substr(path_start));
  if (out.origin.size() <= scheme_end + 3) throw Error(ErrorCode::InvalidArgument, "URL lacks a host: " + std::string(url));
  return out;
}

JsonClient::JsonClient(BackendSpec spec) : spec_(std::move(spec)), url_(parse_url(spec_.endpoint)) {}

json JsonClient::post(const json& body) const {
  httplib::Client client(url_.origin);
  const auto timeout = std::chrono::duration<double>(spec_.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!spec_.api_key_env.empty()) {
    const char* key = std::getenv(spec_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(ErrorCode::BackendFailure, "environment variable " + spec_.api_key_env + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = client.Post(url_.path, headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::BackendFailure, spec_.endpoint + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::BackendFailure, spec_.endpoint + " returned HTTP " + std::to_string(res->status));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendFailure, spec_.endpoint + " returned invalid JSON: " + e.what());
  }
}

std::string complete(const JsonClient& client, const std::string& prompt) {
  json body = {{"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  if (!client.spec().model.empty()) body["model"] = client.spec().model;
  const auto reply = client.post(body);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendFailure, std::string("unexpected completion shape: ") + e.what());
  }
}

std::string load_prompt(const BackendSpec& spec, std::string_view fallback) {
  if (spec.prompt_file.empty()) return std::string(fallback);
  std::ifstream in(spec.prompt_file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read prompt file " + spec.prompt_file);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string content = ss.str();
  // Lines starting with '#' are comments.
  std::string out;
  std::istringstream lines(content);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.starts_with("#")) continue;
    out += line;
    out += '\n';
  }
  return out;
}

std::string RemoteGenerator::generate(const AugmentedPrompt& prompt) { return complete(client_, prompt.render()); }

RemoteTransformer::RemoteTransformer(BackendSpec spec)
    : client_(spec), prompt_(load_prompt(spec, kDefaultTransformerPrompt)) {}

std::string RemoteTransformer::rewrite(std::string_view question, std::string_view answer) {
  const std::pair<std::string_view, std::string_view> vals[] = {{"question", question}, {"answer", answer}};
  return complete(client_, render_template(prompt_, vals));
}

RemoteTranslator::RemoteTranslator(BackendSpec spec)
    : client_(spec), prompt_(load_prompt(spec, kDefaultTranslatorPrompt)) {}

dataset::TranslatedPair RemoteTranslator::translate(std::string_view question, std::string_view answer) {
  const std::pair<std::string_view, std::string_view> vals[] = {{"question", question}, {"answer", answer}};
  auto content = complete(client_, render_template(prompt_, vals));
  const auto open = content.find('{');
  const auto close = content.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw Error(ErrorCode::TranslatorFailure, "translation reply holds no JSON object");
  }
  try {
    const auto j = json::parse(content.substr(open, close - open + 1));
    return {j.at("question").get<std::string>(), j.at("answer").get<std::string>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::TranslatorFailure, std::string("translation reply: ") + e.what());
  }
}

RemoteJudge::RemoteJudge(BackendSpec spec) : client_(spec), prompt_(load_prompt(spec, kDefaultJudgePrompt)) {}

eval::Verdict RemoteJudge::judge(std::string_view ground_truth, std::string_view first, std::string_view second) {
  const std::pair<std::string_view, std::string_view> vals[] = {
      {"ground_truth", ground_truth}, {"first", first}, {"second", second}};
  const auto reply = complete(client_, render_template(prompt_, vals));
  const auto words = text::normalized_words(reply);
  if (!words.empty()) {
    if (words.front() == "first") return eval::Verdict::First;
    if (words.front() == "second") return eval::Verdict::Second;
    if (words.front() == "neither") return eval::Verdict::Neither;
  }
  throw Error(ErrorCode::JudgeFailure, "unrecognised judge reply: " + reply.substr(0, 80));
}

RemoteEmbedder::RemoteEmbedder(EmbedderSpec spec, BackendSpec backend)
    : spec_(std::move(spec)), client_([&] {
        if (backend.model.empty()) backend.model = spec_.id;
        return backend;
      }()) {}

std::vector<double> RemoteEmbedder::embed_raw(std::string_view s) const {
  const std::string one[] = {std::string(s)};
  return std::move(embed_raw_many(one).front());
}

std::vector<std::vector<double>> RemoteEmbedder::embed_raw_many(std::span<const std::string> texts) const {
  const json body = {{"model", client_.spec().model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  const auto reply = client_.post(body);
  std::vector<std::vector<double>> out;
  try {
    for (const auto& item : reply.at("data")) out.push_back(item.at("embedding").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendFailure, std::string("unexpected embeddings shape: ") + e.what());
  }
  if (out.size() != texts.size()) {
    throw Error(ErrorCode::BackendFailure, "embedding service returned " + std::to_string(out.size()) +
                                               " vectors for " + std::to_string(texts.size()) + " inputs");
  }
  return out;
}

}  // namespace ragqa::remote
