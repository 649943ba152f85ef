#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ragqa/text.hpp"
#include "ragqa/vector_store.hpp"

namespace ragqa {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view name);

struct ConversationTurn {
  Role role = Role::User;
  std::string text;
  std::size_t token_count = 0;

  friend bool operator==(const ConversationTurn&, const ConversationTurn&) = default;
};

ConversationTurn make_turn(Role role, std::string text, const text::Tokenizer& tokenizer);

inline constexpr std::size_t kDefaultContextTokens = 1024;

struct Conversation {
  std::string id;
  std::vector<ConversationTurn> turns;
  std::size_t max_tokens = kDefaultContextTokens;

  std::size_t total_tokens() const;
  friend bool operator==(const Conversation&, const Conversation&) = default;
};

struct TruncationReport {
  std::size_t evicted_turns = 0;
  bool head_truncated = false;

  bool changed() const { return evicted_turns > 0 || head_truncated; }
};

// Brings the conversation under max_tokens. Whole non-system turns are
// evicted oldest first; the leading system turn and the latest user turn are
// never evicted. An assistant turn left at the front of the history is
// evicted with its user turn so roles keep alternating. If the protected
// turns alone overflow, text is head-truncated: the latest user turn first,
// then any turns after it, then the system turn.
TruncationReport truncate_context(Conversation& conv, const text::Tokenizer& tokenizer);

enum class GateKind { Augment, PassThrough };

struct GateDecision {
  GateKind kind = GateKind::PassThrough;
  std::vector<RetrievalResult> context;
  double threshold_used = 0.0;

  bool augmented() const { return kind == GateKind::Augment; }
};

// Augments with the leading results whose similarity reaches the threshold,
// at most max_context of them; passes through when none qualifies.
GateDecision relevance_gate(std::span<const RetrievalResult> results, double threshold, std::size_t max_context);

// Prompt sections, each loaded from its own file in the template directory.
// Placeholders use {{name}} syntax.
struct PromptTemplates {
  std::string system;         // system.txt
  std::string context;        // context.txt, {{entries}}
  std::string context_entry;  // context_entry.txt, {{doc_id}} {{similarity}} {{text}}
  std::string history_turn;   // history_turn.txt, {{role}} {{text}}
  std::string query;          // query.txt, {{query}}

  static PromptTemplates defaults();
  static PromptTemplates load(const std::filesystem::path& dir);
};

std::string render_template(std::string_view tmpl, std::span<const std::pair<std::string_view, std::string_view>> values);

struct AugmentedPrompt {
  std::string system_preamble;
  std::string context_block;
  std::string history_block;
  std::string query_block;
  std::string query;

  std::string render() const { return system_preamble + context_block + history_block + query_block; }
};

// `history` holds the turns preceding the query.
AugmentedPrompt build_prompt(const Conversation& history, std::string_view query, const GateDecision& decision,
                             const PromptTemplates& templates);

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string id() const = 0;
  virtual std::string generate(const AugmentedPrompt& prompt) = 0;
};

// 16 lowercase hex digits of the FNV-1a 64-bit hash of the rendered prompt.
std::string prompt_digest(std::string_view rendered);

// Deterministic stand-in: replies "stub-reply <digest of rendered prompt>".
class StubGenerator final : public Generator {
 public:
  std::string id() const override { return "stub"; }
  std::string generate(const AugmentedPrompt& prompt) override;
};

struct ChatConfig {
  double threshold = 0.7;
  std::size_t k = 4;
  std::size_t max_context = 4;
  std::size_t max_tokens = kDefaultContextTokens;
};

enum class Retrieval { Enabled, Disabled };

struct ChatTurnResult {
  std::string reply;
  GateDecision decision;
  TruncationReport truncation;
  AugmentedPrompt prompt;
};

// One full inference step: route, embed, search, gate, truncate, prompt,
// generate. `conv` is modified only when generation succeeds.
ChatTurnResult chat_turn(Conversation& conv, std::string_view query, const KnowledgeBase* kb, Generator& generator,
                         const PromptTemplates& templates, const text::Tokenizer& tokenizer, const ChatConfig& config,
                         Retrieval retrieval = Retrieval::Enabled);

struct DecisionCounts {
  std::size_t augment = 0;
  std::size_t pass_through = 0;
};

// Bundles the collaborators of chat_turn and counts gate decisions.
class ChatPipeline {
 public:
  ChatPipeline(std::shared_ptr<const KnowledgeBase> kb, std::shared_ptr<Generator> generator, PromptTemplates templates,
               ChatConfig config, std::shared_ptr<const text::Tokenizer> tokenizer = nullptr);

  ChatTurnResult turn(Conversation& conv, std::string_view query, Retrieval retrieval = Retrieval::Enabled);
  Conversation new_conversation(std::string id) const;

  DecisionCounts counts() const { return {augment_.load(), pass_through_.load()}; }
  const ChatConfig& config() const { return config_; }
  const text::Tokenizer& tokenizer() const { return *tokenizer_; }
  const KnowledgeBase* knowledge_base() const { return kb_.get(); }

 private:
  std::shared_ptr<const KnowledgeBase> kb_;
  std::shared_ptr<Generator> generator_;
  PromptTemplates templates_;
  ChatConfig config_;
  std::shared_ptr<const text::Tokenizer> tokenizer_;
  std::atomic<std::size_t> augment_{0};
  std::atomic<std::size_t> pass_through_{0};
};

}  // namespace ragqa
