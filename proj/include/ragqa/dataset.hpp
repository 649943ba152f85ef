#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ragqa/embedding.hpp"
#include "ragqa/text.hpp"

namespace ragqa::dataset {

enum class Source { CCMRC, ClimaBench, Other };
std::string_view to_string(Source s);
Source parse_source(std::string_view name);

struct QAPair {
  std::string id;
  std::string question;
  std::string answer;
  Source source = Source::Other;
};

enum class Stage { Ingested, Conversational, Translated, Filtered };
std::string_view to_string(Stage s);
Stage parse_stage(std::string_view name);

enum class RejectionKind { UndefinedSymbol, ResidualEnglish, CorruptedTranslation, ManualReject };
std::string_view to_string(RejectionKind k);
RejectionKind parse_rejection_kind(std::string_view name);

struct RejectionReason {
  RejectionKind kind = RejectionKind::ManualReject;
  std::string detail;

  friend bool operator==(const RejectionReason&, const RejectionReason&) = default;
};

struct InstructionRecord {
  std::string id;
  std::string qa_id;
  std::string question;
  std::string answer;
  Language language = Language::English;
  Stage stage = Stage::Ingested;
  std::optional<RejectionReason> rejection;  // set iff status is Rejected

  bool active() const { return !rejection.has_value(); }
  friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

// Stages only move forward; throws InvalidArgument otherwise.
void advance(InstructionRecord& record, Stage next);

nlohmann::json to_json(const InstructionRecord& r);
InstructionRecord record_from_json(const nlohmann::json& j);
std::vector<InstructionRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, std::span<const InstructionRecord> records);

enum class InputFormat { CSV, JSONL };
InputFormat parse_format(std::string_view name);

struct RowError {
  std::size_t row = 0;
  std::string reason;
};

struct IngestReport {
  std::vector<QAPair> pairs;
  std::vector<RowError> row_errors;
};

// Rows need non-empty question and answer fields; ids are "{source}-{row}"
// with the 0-based data-row index. CSV input needs a header naming both
// columns (SchemaError otherwise).
IngestReport ingest_qa_pairs(const std::filesystem::path& path, InputFormat format, Source source);
IngestReport parse_qa_csv(std::string_view content, Source source);
IngestReport parse_qa_jsonl(std::string_view content, Source source);

std::vector<InstructionRecord> to_records(std::span<const QAPair> pairs);

struct StageFailure {
  InstructionRecord record;  // unchanged input record
  std::string detail;
};

struct StageResult {
  std::vector<InstructionRecord> records;
  std::vector<StageFailure> failures;
};

// Rewrites a terse answer into a conversational one.
class Transformer {
 public:
  virtual ~Transformer() = default;
  virtual std::string id() const = 0;
  virtual std::string rewrite(std::string_view question, std::string_view answer) = 0;
};

// Appends the marker "«conv»" to the answer.
class MarkerTransformer final : public Transformer {
 public:
  std::string id() const override { return "stub"; }
  std::string rewrite(std::string_view question, std::string_view answer) override;
};

struct TranslatedPair {
  std::string question;
  std::string answer;
};

// Translates question and answer together, in a single call.
class Translator {
 public:
  virtual ~Translator() = default;
  virtual std::string id() const = 0;
  virtual TranslatedPair translate(std::string_view question, std::string_view answer) = 0;
};

// Wraps each field as "⟦ar:…⟧".
class WrappingTranslator final : public Translator {
 public:
  std::string id() const override { return "stub"; }
  TranslatedPair translate(std::string_view question, std::string_view answer) override;
};

StageResult to_conversational(std::span<const InstructionRecord> records, Transformer& transformer);
StageResult translate_records(std::span<const InstructionRecord> records, Translator& translator);

struct ResidualSpan {
  std::size_t byte_begin = 0;
  std::size_t byte_end = 0;
  std::size_t char_begin = 0;
  std::size_t char_end = 0;
  std::string text;

  friend bool operator==(const ResidualSpan&, const ResidualSpan&) = default;
};

// Maximal Latin-script runs. A run starts at a Latin letter, continues
// through Latin letters and printable ASCII, and stops at anything else;
// trailing characters that are neither Latin letters nor digits are trimmed.
std::vector<ResidualSpan> detect_residual_english(std::string_view text);

struct ResidualFlag {
  std::string record_id;
  std::string field;  // "question" or "answer"
  ResidualSpan span;
};

struct FilterResult {
  std::vector<InstructionRecord> kept;
  std::vector<InstructionRecord> rejected;    // rejection set
  std::vector<StageFailure> stage_failures;   // not yet translated
  std::vector<ResidualFlag> worklist;         // residual English in kept records
};

bool has_undefined_symbols(std::string_view text);

// Rejection rules, in order: undefined symbols (U+FFFD, invalid UTF-8, C0
// except TAB/LF, C1) and Arabic-tagged fields whose Latin-letter ratio
// exceeds 0.5. Accepts Translated and Filtered records; idempotent.
FilterResult filter_low_quality(std::span<const InstructionRecord> records);

// Seeded uniform sample without replacement, returned in input order.
std::vector<InstructionRecord> sample_for_review(std::span<const InstructionRecord> records, std::size_t n,
                                                 std::uint64_t seed);

struct DatasetStats {
  std::size_t total_instances = 0;
  std::size_t question_tokens = 0;
  std::size_t answer_tokens = 0;

  double avg_question_tokens() const;
  double avg_answer_tokens() const;
};

DatasetStats compute_stats(std::span<const InstructionRecord> records, const text::Tokenizer& tokenizer);
// Rows of (label, stats) in the Total Instances / Avg. Question / Avg. Answer layout.
std::string render_stats_table(std::span<const std::pair<std::string, DatasetStats>> rows);

inline constexpr std::string_view kOtherCategory = "Other";

struct Category {
  std::string name;
  std::vector<std::string> keywords;
};

struct CategoryTaxonomy {
  std::vector<Category> categories;  // "Other" is implicit

  // Throws SchemaError listing every problem (empty or non-lowercase keywords,
  // empty lists, a category named Other, duplicates).
  void validate() const;
  static CategoryTaxonomy from_json(const nlohmann::json& j);
  static CategoryTaxonomy load(const std::filesystem::path& path);
};

struct CategoryReport {
  std::vector<std::pair<std::string, std::size_t>> counts;  // taxonomy order, then Other
  std::map<std::string, std::vector<std::string>> tags;      // record id -> categories
};

// Multi-label: every category with a keyword among the record's normalized
// question+answer words; records without a hit get exactly {Other}. Only
// active records are counted.
CategoryReport categorize(std::span<const InstructionRecord> records, const CategoryTaxonomy& taxonomy);
std::string render_category_table(const CategoryReport& report);

}  // namespace ragqa::dataset
