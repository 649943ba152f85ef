#include "ragqa/config.hpp"

#include <fstream>
#include <set>

#include "ragqa/error.hpp"

namespace ragqa {

namespace fs = std::filesystem;
using nlohmann::json;

AppConfig default_config() {
  AppConfig c;
  c.embedders = {{Language::Arabic, "stsb-xlm-r-multilingual", 8, "stub", ""},
                 {Language::English, "all-MiniLM-L6-v2", 8, "stub", ""}};
  return c;
}

namespace {

const std::set<std::string> kTopLevelKeys = {
    "store_dir", "embedders", "threshold", "k", "max_tokens", "max_context", "template_dir", "generator",
    "transformer", "translator", "judge", "bind", "chunk_tokens", "chunk_overlap", "seed", "session_snapshot"};

const std::set<std::string> kCredentialKeys = {"api_key", "apikey", "key", "token", "secret", "password",
                                               "authorization", "credentials"};

class Collector {
 public:
  void add(std::string problem) { problems_.push_back(std::move(problem)); }
  bool empty() const { return problems_.empty(); }
  [[noreturn]] void raise() const {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems_) msg += "\n  - " + p;
    throw Error(ErrorCode::ConfigError, msg);
  }

 private:
  std::vector<std::string> problems_;
};

void scan_credentials(const json& j, const std::string& where, Collector& errors) {
  if (!j.is_object()) return;
  for (const auto& [key, value] : j.items()) {
    const auto lower = text::ascii_lower(key);
    const auto path = where.empty() ? key : where + "." + key;
    if (kCredentialKeys.contains(lower)) {
      errors.add(path + ": credentials must come from an environment variable (use api_key_env)");
    }
    if (value.is_object()) scan_credentials(value, path, errors);
    if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) scan_credentials(value[i], path + "[" + std::to_string(i) + "]", errors);
    }
  }
}

template <typename T>
void read_number(const json& j, const char* key, T& out, Collector& errors) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) return errors.add(std::string(key) + " must be a number");
    out = v.get<T>();
  } else {
    if (!v.is_number_integer()) return errors.add(std::string(key) + " must be an integer");
    if (v.get<std::int64_t>() < 0) return errors.add(std::string(key) + " must be non-negative");
    out = v.get<T>();
  }
}

void read_string(const json& j, const char* key, std::string& out, Collector& errors, const std::string& where = {}) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_string()) return errors.add(where + key + " must be a string");
  out = j.at(key).get<std::string>();
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

remote::BackendSpec read_backend(const json& j, const char* name, const fs::path& base, Collector& errors) {
  remote::BackendSpec spec;
  if (!j.contains(name)) return spec;
  const auto& b = j.at(name);
  const std::string where = std::string(name) + ".";
  if (!b.is_object()) {
    errors.add(std::string(name) + " must be an object");
    return spec;
  }
  read_string(b, "backend", spec.backend, errors, where);
  read_string(b, "endpoint", spec.endpoint, errors, where);
  read_string(b, "model", spec.model, errors, where);
  read_string(b, "api_key_env", spec.api_key_env, errors, where);
  read_string(b, "prompt_file", spec.prompt_file, errors, where);
  if (!spec.prompt_file.empty()) spec.prompt_file = resolve(spec.prompt_file, base).string();
  if (b.contains("timeout_seconds")) {
    if (b.at("timeout_seconds").is_number()) {
      spec.timeout_seconds = b.at("timeout_seconds").get<double>();
    } else {
      errors.add(where + "timeout_seconds must be a number");
    }
  }
  return spec;
}

void check_backend(const remote::BackendSpec& spec, const std::string& name, Collector& errors) {
  if (spec.backend != "stub" && spec.backend != "remote") {
    errors.add(name + ".backend must be \"stub\" or \"remote\", got \"" + spec.backend + "\"");
    return;
  }
  if (spec.is_remote()) {
    if (spec.endpoint.empty()) {
      errors.add(name + ".endpoint is required for the remote backend");
    } else {
      try {
        remote::parse_url(spec.endpoint);
      } catch (const Error& e) {
        errors.add(name + ".endpoint: " + e.what());
      }
    }
  }
  if (!(spec.timeout_seconds > 0.0)) errors.add(name + ".timeout_seconds must be positive");
}

void check(const AppConfig& c, Collector& errors) {
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) {
    errors.add("threshold must be within [0, 1], got " + std::to_string(c.threshold));
  }
  if (c.k < 1) errors.add("k must be at least 1");
  if (c.max_tokens < 1) errors.add("max_tokens must be at least 1");
  if (c.max_context < 1) errors.add("max_context must be at least 1");
  if (c.chunk_tokens < 1) errors.add("chunk_tokens must be at least 1");
  if (c.chunk_overlap >= c.chunk_tokens) errors.add("chunk_overlap must be smaller than chunk_tokens");
  if (c.store_dir.empty()) errors.add("store_dir must not be empty");

  std::size_t arabic = 0, english = 0;
  for (std::size_t i = 0; i < c.embedders.size(); ++i) {
    const auto& e = c.embedders[i];
    const auto where = "embedders[" + std::to_string(i) + "]";
    if (e.language == Language::Arabic) ++arabic;
    if (e.language == Language::English) ++english;
    if (e.language == Language::Unknown) errors.add(where + ".language must be arabic or english");
    if (e.model_id.empty()) errors.add(where + ".model_id must not be empty");
    if (e.dim < 1) errors.add(where + ".dim must be at least 1");
    if (e.endpoint != "stub" && !e.endpoint.empty()) {
      try {
        remote::parse_url(e.endpoint);
      } catch (const Error& ex) {
        errors.add(where + ".endpoint: " + ex.what());
      }
    }
  }
  if (arabic != 1) errors.add("exactly one arabic embedder is required, found " + std::to_string(arabic));
  if (english != 1) errors.add("exactly one english embedder is required, found " + std::to_string(english));
  for (std::size_t i = 0; i < c.embedders.size(); ++i) {
    for (std::size_t j = i + 1; j < c.embedders.size(); ++j) {
      const auto& a = c.embedders[i];
      const auto& b = c.embedders[j];
      if (a.model_id == b.model_id && (a.dim != b.dim || a.endpoint != b.endpoint)) {
        errors.add("embedders sharing model_id '" + a.model_id + "' must share dim and endpoint");
      }
    }
  }

  check_backend(c.generator, "generator", errors);
  check_backend(c.transformer, "transformer", errors);
  check_backend(c.translator, "translator", errors);
  check_backend(c.judge, "judge", errors);

  const auto colon = c.bind.rfind(':');
  bool bind_ok = colon != std::string::npos && colon > 0 && colon + 1 < c.bind.size();
  if (bind_ok) {
    try {
      std::size_t used = 0;
      const int port = std::stoi(c.bind.substr(colon + 1), &used);
      bind_ok = used == c.bind.size() - colon - 1 && port >= 0 && port <= 65535;
    } catch (const std::exception&) {
      bind_ok = false;
    }
  }
  if (!bind_ok) errors.add("bind must look like host:port, got \"" + c.bind + "\"");
}

}  // namespace

void validate(const AppConfig& config) {
  Collector errors;
  check(config, errors);
  if (!errors.empty()) errors.raise();
}

AppConfig config_from_json(const json& j, const fs::path& base_dir) {
  Collector errors;
  if (!j.is_object()) {
    errors.add("configuration must be a JSON object");
    errors.raise();
  }
  AppConfig c = default_config();
  for (const auto& [key, value] : j.items()) {
    if (!kTopLevelKeys.contains(key) && !kCredentialKeys.contains(text::ascii_lower(key))) {
      errors.add("unknown key \"" + key + "\"");
    }
  }
  scan_credentials(j, "", errors);

  if (j.contains("store_dir")) {
    std::string s;
    read_string(j, "store_dir", s, errors);
    c.store_dir = resolve(s, base_dir);
  } else {
    c.store_dir = resolve(c.store_dir, base_dir);
  }
  read_number(j, "threshold", c.threshold, errors);
  read_number(j, "k", c.k, errors);
  read_number(j, "max_tokens", c.max_tokens, errors);
  read_number(j, "max_context", c.max_context, errors);
  read_number(j, "chunk_tokens", c.chunk_tokens, errors);
  read_number(j, "chunk_overlap", c.chunk_overlap, errors);
  read_number(j, "seed", c.seed, errors);
  read_string(j, "bind", c.bind, errors);
  if (j.contains("template_dir")) {
    std::string s;
    read_string(j, "template_dir", s, errors);
    if (!s.empty()) c.template_dir = resolve(s, base_dir);
  }
  if (j.contains("session_snapshot")) {
    std::string s;
    read_string(j, "session_snapshot", s, errors);
    if (!s.empty()) c.session_snapshot = resolve(s, base_dir);
  }

  if (j.contains("embedders")) {
    const auto& list = j.at("embedders");
    if (!list.is_array()) {
      errors.add("embedders must be an array");
    } else {
      c.embedders.clear();
      for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& e = list[i];
        const auto where = "embedders[" + std::to_string(i) + "].";
        if (!e.is_object()) {
          errors.add("embedders[" + std::to_string(i) + "] must be an object");
          continue;
        }
        EmbedderEntry entry;
        std::string lang;
        read_string(e, "language", lang, errors, where);
        try {
          entry.language = parse_language(lang);
        } catch (const Error&) {
          errors.add(where + "language must be arabic or english, got \"" + lang + "\"");
        }
        read_string(e, "model_id", entry.model_id, errors, where);
        if (e.contains("dim")) {
          if (e.at("dim").is_number_integer() && e.at("dim").get<std::int64_t>() >= 0) {
            entry.dim = e.at("dim").get<std::size_t>();
          } else {
            errors.add(where + "dim must be a positive integer");
          }
        }
        read_string(e, "endpoint", entry.endpoint, errors, where);
        read_string(e, "api_key_env", entry.api_key_env, errors, where);
        c.embedders.push_back(std::move(entry));
      }
    }
  }

  c.generator = read_backend(j, "generator", base_dir, errors);
  c.transformer = read_backend(j, "transformer", base_dir, errors);
  c.translator = read_backend(j, "translator", base_dir, errors);
  c.judge = read_backend(j, "judge", base_dir, errors);

  check(c, errors);
  if (!errors.empty()) errors.raise();
  return c;
}

AppConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open configuration file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

namespace {

json backend_json(const remote::BackendSpec& s) {
  json j = {{"backend", s.backend}};
  if (s.is_remote()) {
    j["endpoint"] = s.endpoint;
    j["model"] = s.model;
    j["api_key_env"] = s.api_key_env;
    j["timeout_seconds"] = s.timeout_seconds;
  }
  if (!s.prompt_file.empty()) j["prompt_file"] = s.prompt_file;
  return j;
}

}  // namespace

json AppConfig::redacted() const {
  json embedders_json = json::array();
  for (const auto& e : embedders) {
    embedders_json.push_back({{"language", to_string(e.language)},
                              {"model_id", e.model_id},
                              {"dim", e.dim},
                              {"endpoint", e.endpoint},
                              {"api_key_env", e.api_key_env}});
  }
  return {{"store_dir", store_dir.string()},
          {"embedders", embedders_json},
          {"threshold", threshold},
          {"k", k},
          {"max_tokens", max_tokens},
          {"max_context", max_context},
          {"template_dir", template_dir ? json(template_dir->string()) : json(nullptr)},
          {"generator", backend_json(generator)},
          {"transformer", backend_json(transformer)},
          {"translator", backend_json(translator)},
          {"judge", backend_json(judge)},
          {"bind", bind},
          {"chunk_tokens", chunk_tokens},
          {"chunk_overlap", chunk_overlap},
          {"seed", seed}};
}

std::shared_ptr<RoutingTable> make_routing(const AppConfig& config) {
  auto table = std::make_shared<RoutingTable>();
  std::map<std::string, std::shared_ptr<const Embedder>> built;
  for (const auto& e : config.embedders) {
    auto& embedder = built[e.model_id];
    if (!embedder) {
      EmbedderSpec spec{e.model_id, e.language, e.dim, e.endpoint};
      if (e.endpoint.empty() || e.endpoint == "stub") {
        embedder = std::make_shared<HashedTokenEmbedder>(spec, config.seed);
      } else {
        remote::BackendSpec backend;
        backend.backend = "remote";
        backend.endpoint = e.endpoint;
        backend.model = e.model_id;
        backend.api_key_env = e.api_key_env;
        embedder = std::make_shared<remote::RemoteEmbedder>(spec, backend);
      }
    }
    // A shared model may serve both languages; register it under each.
    if (embedder->spec().language == e.language) {
      table->add(embedder);
    } else {
      struct Alias final : Embedder {
        Alias(std::shared_ptr<const Embedder> inner, Language lang) : inner_(std::move(inner)), spec_(inner_->spec()) {
          spec_.language = lang;
        }
        const EmbedderSpec& spec() const override { return spec_; }
        std::vector<double> embed_raw(std::string_view t) const override { return inner_->embed_raw(t); }
        std::vector<std::vector<double>> embed_raw_many(std::span<const std::string> t) const override {
          return inner_->embed_raw_many(t);
        }
        std::shared_ptr<const Embedder> inner_;
        EmbedderSpec spec_;
      };
      table->add(std::make_shared<Alias>(embedder, e.language));
    }
  }
  return table;
}

std::shared_ptr<Generator> make_generator(const AppConfig& config) {
  if (config.generator.is_remote()) return std::make_shared<remote::RemoteGenerator>(config.generator);
  return std::make_shared<StubGenerator>();
}

std::unique_ptr<dataset::Transformer> make_transformer(const AppConfig& config) {
  if (config.transformer.is_remote()) return std::make_unique<remote::RemoteTransformer>(config.transformer);
  return std::make_unique<dataset::MarkerTransformer>();
}

std::unique_ptr<dataset::Translator> make_translator(const AppConfig& config) {
  if (config.translator.is_remote()) return std::make_unique<remote::RemoteTranslator>(config.translator);
  return std::make_unique<dataset::WrappingTranslator>();
}

std::unique_ptr<eval::Judge> make_judge(const AppConfig& config) {
  if (config.judge.is_remote()) return std::make_unique<remote::RemoteJudge>(config.judge);
  return std::make_unique<eval::OverlapJudge>();
}

PromptTemplates load_templates(const AppConfig& config) {
  return config.template_dir ? PromptTemplates::load(*config.template_dir) : PromptTemplates::defaults();
}

}  // namespace ragqa
