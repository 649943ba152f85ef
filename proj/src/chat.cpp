#include "ragqa/chat.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ragqa/error.hpp"
#include "ragqa/random.hpp"

namespace ragqa {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view name) {
  if (name == "system") return Role::System;
  if (name == "user") return Role::User;
  if (name == "assistant") return Role::Assistant;
  throw Error(ErrorCode::InvalidArgument, "unknown role '" + std::string(name) + "'");
}

ConversationTurn make_turn(Role role, std::string s, const text::Tokenizer& tokenizer) {
  const auto count = tokenizer.count(s);
  return {role, std::move(s), count};
}

std::size_t Conversation::total_tokens() const {
  std::size_t total = 0;
  for (const auto& t : turns) total += t.token_count;
  return total;
}

namespace {

// Index of the turn that must survive eviction: the latest user turn, or
// the last turn when there is no user turn.
std::size_t protected_index(const Conversation& conv) {
  for (std::size_t i = conv.turns.size(); i-- > 0;) {
    if (conv.turns[i].role == Role::User) return i;
  }
  return conv.turns.size() - 1;
}

// Drops leading tokens until the conversation fits or the turn is empty.
bool head_truncate(Conversation& conv, std::size_t idx, const text::Tokenizer& tokenizer) {
  auto& turn = conv.turns[idx];
  bool changed = false;
  while (conv.total_tokens() > conv.max_tokens && turn.token_count > 0) {
    const std::size_t excess = conv.total_tokens() - conv.max_tokens;
    std::size_t keep = turn.token_count > excess ? turn.token_count - excess : 0;
    auto tail = tokenizer.keep_tail(turn.text, keep);
    auto count = tokenizer.count(tail);
    while (count >= turn.token_count && keep > 0) {
      tail = tokenizer.keep_tail(turn.text, --keep);
      count = tokenizer.count(tail);
    }
    if (count >= turn.token_count) {
      tail.clear();
      count = 0;
    }
    turn.text = std::move(tail);
    turn.token_count = count;
    changed = true;
  }
  return changed;
}

}  // namespace

TruncationReport truncate_context(Conversation& conv, const text::Tokenizer& tokenizer) {
  TruncationReport report;
  if (conv.turns.empty() || conv.total_tokens() <= conv.max_tokens) return report;

  const std::size_t first = conv.turns.front().role == Role::System ? 1 : 0;
  auto& turns = conv.turns;
  while (conv.total_tokens() > conv.max_tokens && first < protected_index(conv)) {
    turns.erase(turns.begin() + static_cast<std::ptrdiff_t>(first));
    ++report.evicted_turns;
    if (first < protected_index(conv) && turns[first].role == Role::Assistant) {
      turns.erase(turns.begin() + static_cast<std::ptrdiff_t>(first));
      ++report.evicted_turns;
    }
  }
  if (conv.total_tokens() <= conv.max_tokens) return report;

  const std::size_t keep = protected_index(conv);
  report.head_truncated |= head_truncate(conv, keep, tokenizer);
  for (std::size_t i = keep + 1; i < turns.size(); ++i) report.head_truncated |= head_truncate(conv, i, tokenizer);
  if (first == 1 && keep != 0) report.head_truncated |= head_truncate(conv, 0, tokenizer);
  return report;
}

GateDecision relevance_gate(std::span<const RetrievalResult> results, double threshold, std::size_t max_context) {
  GateDecision decision;
  decision.threshold_used = threshold;
  for (const auto& r : results) {
    if (r.similarity < threshold || decision.context.size() >= max_context) break;
    decision.context.push_back(r);
  }
  decision.kind = decision.context.empty() ? GateKind::PassThrough : GateKind::Augment;
  return decision;
}

std::string render_template(std::string_view tmpl,
                            std::span<const std::pair<std::string_view, std::string_view>> values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(tmpl.substr(i, open - i));
    const auto name = tmpl.substr(open + 2, close - open - 2);
    bool found = false;
    for (const auto& [key, value] : values) {
      if (key == name) {
        out.append(value);
        found = true;
        break;
      }
    }
    if (!found) out.append(tmpl.substr(open, close + 2 - open));
    i = close + 2;
  }
  out.append(tmpl.substr(i));
  return out;
}

PromptTemplates PromptTemplates::defaults() {
  return {
      "You are a helpful assistant for questions about climate change and sustainability. "
      "Answer in the language of the question.\n\n",
      "Context:\n{{entries}}\n",
      "[{{doc_id}}] {{text}}\n",
      "{{role}}: {{text}}\n",
      "USER: {{query}}\nASSISTANT:",
  };
}

namespace {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string role_label(Role role) {
  switch (role) {
    case Role::System: return "SYSTEM";
    case Role::User: return "USER";
    case Role::Assistant: return "ASSISTANT";
  }
  return "USER";
}

}  // namespace

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  return {read_text_file(dir / "system.txt"), read_text_file(dir / "context.txt"),
          read_text_file(dir / "context_entry.txt"), read_text_file(dir / "history_turn.txt"),
          read_text_file(dir / "query.txt")};
}

AugmentedPrompt build_prompt(const Conversation& history, std::string_view query, const GateDecision& decision,
                             const PromptTemplates& templates) {
  if (text::whitespace_spans(query).empty()) throw Error(ErrorCode::EmptyQuery, "query is empty");
  AugmentedPrompt prompt;
  prompt.query = std::string(query);
  prompt.system_preamble = templates.system;

  if (decision.augmented()) {
    std::string entries;
    for (const auto& r : decision.context) {
      char sim[32];
      std::snprintf(sim, sizeof sim, "%.4f", r.similarity);
      const std::pair<std::string_view, std::string_view> vals[] = {
          {"doc_id", r.doc_id}, {"similarity", sim}, {"text", r.text}};
      entries += render_template(templates.context_entry, vals);
    }
    const std::pair<std::string_view, std::string_view> vals[] = {{"entries", entries}};
    prompt.context_block = render_template(templates.context, vals);
  }

  for (const auto& turn : history.turns) {
    const auto label = role_label(turn.role);
    const std::pair<std::string_view, std::string_view> vals[] = {{"role", label}, {"text", turn.text}};
    prompt.history_block += render_template(templates.history_turn, vals);
  }

  const std::pair<std::string_view, std::string_view> vals[] = {{"query", query}};
  prompt.query_block = render_template(templates.query, vals);
  return prompt;
}

std::string prompt_digest(std::string_view rendered) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(rendered)));
  return buf;
}

std::string StubGenerator::generate(const AugmentedPrompt& prompt) { return "stub-reply " + prompt_digest(prompt.render()); }

ChatTurnResult chat_turn(Conversation& conv, std::string_view query, const KnowledgeBase* kb, Generator& generator,
                         const PromptTemplates& templates, const text::Tokenizer& tokenizer, const ChatConfig& config,
                         Retrieval retrieval) {
  if (text::whitespace_spans(query).empty()) throw Error(ErrorCode::EmptyQuery, "query is empty");

  ChatTurnResult result;
  result.decision.threshold_used = config.threshold;
  if (retrieval == Retrieval::Enabled && kb != nullptr) {
    const auto& embedder = kb->route(query);
    const auto& store = kb->store_for(embedder);
    if (store.dim() != embedder.spec().dim) {
      throw Error(ErrorCode::DimensionMismatch, "store dim " + std::to_string(store.dim()) + " vs embedder dim " +
                                                    std::to_string(embedder.spec().dim));
    }
    if (store.size() > 0) {
      const auto hits = store.search_top_k(embed_text(query, embedder), config.k);
      result.decision = relevance_gate(hits, config.threshold, config.max_context);
    }
  }

  Conversation work = conv;
  work.turns.push_back(make_turn(Role::User, std::string(query), tokenizer));
  result.truncation = truncate_context(work, tokenizer);

  Conversation history = work;
  history.turns.pop_back();
  const auto& user_text = work.turns.back().text;
  result.prompt = build_prompt(history, text::whitespace_spans(user_text).empty() ? query : user_text,
                               result.decision, templates);

  try {
    result.reply = generator.generate(result.prompt);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::GeneratorFailure, "generator '" + generator.id() + "' failed: " + e.what());
  }

  work.turns.push_back(make_turn(Role::Assistant, result.reply, tokenizer));
  const auto after = truncate_context(work, tokenizer);
  result.truncation.evicted_turns += after.evicted_turns;
  result.truncation.head_truncated |= after.head_truncated;
  conv = std::move(work);
  return result;
}

ChatPipeline::ChatPipeline(std::shared_ptr<const KnowledgeBase> kb, std::shared_ptr<Generator> generator,
                           PromptTemplates templates, ChatConfig config,
                           std::shared_ptr<const text::Tokenizer> tokenizer)
    : kb_(std::move(kb)),
      generator_(std::move(generator)),
      templates_(std::move(templates)),
      config_(config),
      tokenizer_(tokenizer ? std::move(tokenizer) : std::make_shared<text::WhitespaceTokenizer>()) {}

ChatTurnResult ChatPipeline::turn(Conversation& conv, std::string_view query, Retrieval retrieval) {
  auto result = chat_turn(conv, query, kb_.get(), *generator_, templates_, *tokenizer_, config_, retrieval);
  (result.decision.augmented() ? augment_ : pass_through_).fetch_add(1);
  return result;
}

Conversation ChatPipeline::new_conversation(std::string id) const { return {std::move(id), {}, config_.max_tokens}; }

}  // namespace ragqa
