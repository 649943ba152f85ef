#include "ragqa/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "ragqa/error.hpp"
#include "ragqa/random.hpp"

namespace ragqa::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Source s) {
  switch (s) {
    case Source::CCMRC: return "CCMRC";
    case Source::ClimaBench: return "ClimaBench";
    case Source::Other: return "Other";
  }
  return "Other";
}

Source parse_source(std::string_view name) {
  const auto lower = text::ascii_lower(name);
  if (lower == "ccmrc") return Source::CCMRC;
  if (lower == "climabench") return Source::ClimaBench;
  if (lower == "other") return Source::Other;
  throw Error(ErrorCode::InvalidArgument, "unknown source '" + std::string(name) + "'");
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Ingested: return "ingested";
    case Stage::Conversational: return "conversational";
    case Stage::Translated: return "translated";
    case Stage::Filtered: return "filtered";
  }
  return "ingested";
}

Stage parse_stage(std::string_view name) {
  for (auto s : {Stage::Ingested, Stage::Conversational, Stage::Translated, Stage::Filtered}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown stage '" + std::string(name) + "'");
}

std::string_view to_string(RejectionKind k) {
  switch (k) {
    case RejectionKind::UndefinedSymbol: return "undefined_symbol";
    case RejectionKind::ResidualEnglish: return "residual_english";
    case RejectionKind::CorruptedTranslation: return "corrupted_translation";
    case RejectionKind::ManualReject: return "manual_reject";
  }
  return "manual_reject";
}

RejectionKind parse_rejection_kind(std::string_view name) {
  for (auto k : {RejectionKind::UndefinedSymbol, RejectionKind::ResidualEnglish, RejectionKind::CorruptedTranslation,
                 RejectionKind::ManualReject}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown rejection kind '" + std::string(name) + "'");
}

void advance(InstructionRecord& record, Stage next) {
  if (static_cast<int>(next) <= static_cast<int>(record.stage)) {
    throw Error(ErrorCode::InvalidArgument, "record '" + record.id + "' cannot move from " +
                                                std::string(to_string(record.stage)) + " to " +
                                                std::string(to_string(next)));
  }
  record.stage = next;
}

json to_json(const InstructionRecord& r) {
  json j = {{"id", r.id},
            {"qa_id", r.qa_id},
            {"question", r.question},
            {"answer", r.answer},
            {"language", to_string(r.language)},
            {"stage", to_string(r.stage)},
            {"status", r.active() ? "active" : "rejected"},
            {"rejection", nullptr}};
  if (r.rejection) j["rejection"] = {{"kind", to_string(r.rejection->kind)}, {"detail", r.rejection->detail}};
  return j;
}

InstructionRecord record_from_json(const json& j) {
  InstructionRecord r;
  r.id = j.at("id").get<std::string>();
  r.qa_id = j.value("qa_id", r.id);
  r.question = j.at("question").get<std::string>();
  r.answer = j.at("answer").get<std::string>();
  r.language = parse_language(j.at("language").get<std::string>());
  r.stage = parse_stage(j.at("stage").get<std::string>());
  const auto status = j.value("status", std::string("active"));
  const auto& rej = j.contains("rejection") ? j.at("rejection") : json();
  if (status == "rejected") {
    if (!rej.is_object()) throw Error(ErrorCode::SchemaError, "rejected record '" + r.id + "' lacks a rejection");
    r.rejection = RejectionReason{parse_rejection_kind(rej.at("kind").get<std::string>()),
                                  rej.value("detail", std::string())};
  } else if (status != "active") {
    throw Error(ErrorCode::SchemaError, "record '" + r.id + "' has unknown status '" + status + "'");
  } else if (!rej.is_null()) {
    throw Error(ErrorCode::SchemaError, "active record '" + r.id + "' carries a rejection");
  }
  return r;
}

std::vector<InstructionRecord> read_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<InstructionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_records(const fs::path& path, std::span<const InstructionRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

InputFormat parse_format(std::string_view name) {
  const auto lower = text::ascii_lower(name);
  if (lower == "csv") return InputFormat::CSV;
  if (lower == "jsonl") return InputFormat::JSONL;
  throw Error(ErrorCode::InvalidArgument, "unknown input format '" + std::string(name) + "'");
}

namespace {

// RFC 4180 rows: quoted fields may contain separators, doubled quotes and
// newlines. A trailing newline does not start a new row.
std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool row_open = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    row_open = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      row_open = false;
    } else {
      field.push_back(c);
    }
  }
  if (row_open || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

bool blank(std::string_view s) { return text::whitespace_spans(s).empty(); }

std::string pair_id(Source source, std::size_t row) { return std::string(to_string(source)) + "-" + std::to_string(row); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

IngestReport parse_qa_csv(std::string_view content, Source source) {
  IngestReport report;
  auto rows = parse_csv(content);
  if (rows.empty()) return report;
  const auto& header = rows.front();
  std::optional<std::size_t> q_col, a_col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string name = text::ascii_lower(header[i]);
    if (i == 0 && name.starts_with("\xEF\xBB\xBF")) name.erase(0, 3);
    if (name == "question") q_col = i;
    if (name == "answer") a_col = i;
  }
  if (!q_col || !a_col) {
    std::string missing = !q_col && !a_col ? "question, answer" : !q_col ? "question" : "answer";
    throw Error(ErrorCode::SchemaError, "CSV header lacks column(s): " + missing);
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::size_t row = r - 1;
    const auto& fields = rows[r];
    if (fields.size() == 1 && fields[0].empty()) {
      report.row_errors.push_back({row, "empty line"});
      continue;
    }
    if (fields.size() != header.size()) {
      report.row_errors.push_back({row, "expected " + std::to_string(header.size()) + " fields, found " +
                                            std::to_string(fields.size())});
      continue;
    }
    const auto& q = fields[*q_col];
    const auto& a = fields[*a_col];
    if (blank(q) || blank(a)) {
      report.row_errors.push_back({row, blank(q) ? "empty question" : "empty answer"});
      continue;
    }
    report.pairs.push_back({pair_id(source, row), q, a, source});
  }
  return report;
}

IngestReport parse_qa_jsonl(std::string_view content, Source source) {
  IngestReport report;
  std::size_t row = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    auto line = content.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (blank(line)) continue;
    const std::size_t this_row = row++;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      report.row_errors.push_back({this_row, std::string("invalid JSON: ") + e.what()});
      continue;
    }
    if (!j.is_object() || !j.contains("question") || !j.contains("answer") || !j["question"].is_string() ||
        !j["answer"].is_string()) {
      report.row_errors.push_back({this_row, "missing string fields question/answer"});
      continue;
    }
    const auto q = j["question"].get<std::string>();
    const auto a = j["answer"].get<std::string>();
    if (blank(q) || blank(a)) {
      report.row_errors.push_back({this_row, blank(q) ? "empty question" : "empty answer"});
      continue;
    }
    report.pairs.push_back({pair_id(source, this_row), q, a, source});
  }
  return report;
}

IngestReport ingest_qa_pairs(const fs::path& path, InputFormat format, Source source) {
  const auto content = read_file(path);
  return format == InputFormat::CSV ? parse_qa_csv(content, source) : parse_qa_jsonl(content, source);
}

std::vector<InstructionRecord> to_records(std::span<const QAPair> pairs) {
  std::vector<InstructionRecord> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({p.id, p.id, p.question, p.answer, Language::English, Stage::Ingested, std::nullopt});
  }
  return out;
}

std::string MarkerTransformer::rewrite(std::string_view, std::string_view answer) {
  return std::string(answer) + "«conv»";
}

TranslatedPair WrappingTranslator::translate(std::string_view question, std::string_view answer) {
  return {"⟦ar:" + std::string(question) + "⟧", "⟦ar:" + std::string(answer) + "⟧"};
}

StageResult to_conversational(std::span<const InstructionRecord> records, Transformer& transformer) {
  StageResult result;
  for (const auto& r : records) {
    if (r.stage != Stage::Ingested || !r.active()) {
      result.failures.push_back({r, "record is not an active ingested record"});
      continue;
    }
    try {
      auto answer = transformer.rewrite(r.question, r.answer);
      if (blank(answer)) throw Error(ErrorCode::TransformerFailure, "empty rewrite");
      InstructionRecord out = r;
      out.answer = std::move(answer);
      out.language = Language::English;
      advance(out, Stage::Conversational);
      result.records.push_back(std::move(out));
    } catch (const std::exception& e) {
      result.failures.push_back({r, std::string("transformer '") + transformer.id() + "': " + e.what()});
    }
  }
  return result;
}

StageResult translate_records(std::span<const InstructionRecord> records, Translator& translator) {
  StageResult result;
  for (const auto& r : records) {
    if (r.stage != Stage::Conversational || !r.active()) {
      result.failures.push_back({r, "record is not an active conversational record"});
      continue;
    }
    try {
      auto translated = translator.translate(r.question, r.answer);
      if (blank(translated.question) || blank(translated.answer)) {
        throw Error(ErrorCode::TranslatorFailure, "empty translation");
      }
      InstructionRecord out = r;
      out.question = std::move(translated.question);
      out.answer = std::move(translated.answer);
      out.language = Language::Arabic;
      advance(out, Stage::Translated);
      result.records.push_back(std::move(out));
    } catch (const std::exception& e) {
      result.failures.push_back({r, std::string("translator '") + translator.id() + "': " + e.what()});
    }
  }
  return result;
}

std::vector<ResidualSpan> detect_residual_english(std::string_view s) {
  std::vector<ResidualSpan> spans;
  const auto cps = text::decode_utf8(s);
  auto latin = [&](std::size_t i) { return text::classify(cps[i].value) == text::CharClass::LatinLetter; };
  auto anchor = [&](std::size_t i) { return latin(i) || (cps[i].value >= '0' && cps[i].value <= '9'); };
  auto joins = [&](std::size_t i) { return latin(i) || (cps[i].value >= 0x20 && cps[i].value < 0x7F); };

  std::size_t i = 0;
  while (i < cps.size()) {
    if (!latin(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < cps.size() && joins(j)) ++j;
    std::size_t last = j - 1;
    while (!anchor(last)) --last;
    const auto byte_begin = cps[i].byte_offset;
    const auto byte_end = cps[last].byte_offset + cps[last].byte_length;
    spans.push_back({byte_begin, byte_end, i, last + 1, std::string(s.substr(byte_begin, byte_end - byte_begin))});
    i = j;
  }
  return spans;
}

bool has_undefined_symbols(std::string_view s) {
  for (const auto& cp : text::decode_utf8(s)) {
    if (cp.value == text::kReplacementChar || text::is_control(cp.value)) return true;
  }
  return false;
}

FilterResult filter_low_quality(std::span<const InstructionRecord> records) {
  FilterResult result;
  for (const auto& r : records) {
    if (!r.active()) {
      result.rejected.push_back(r);
      continue;
    }
    if (r.stage != Stage::Translated && r.stage != Stage::Filtered) {
      result.stage_failures.push_back({r, "record has not been translated"});
      continue;
    }
    InstructionRecord out = r;
    if (has_undefined_symbols(r.question) || has_undefined_symbols(r.answer)) {
      out.rejection = RejectionReason{RejectionKind::UndefinedSymbol,
                                      has_undefined_symbols(r.question) ? "question" : "answer"};
      result.rejected.push_back(std::move(out));
      continue;
    }
    if (r.language == Language::Arabic) {
      const auto q = text::count_scripts(r.question).latin_ratio();
      const auto a = text::count_scripts(r.answer).latin_ratio();
      if (q > 0.5 || a > 0.5) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%s Latin-letter ratio %.3f", q > 0.5 ? "question" : "answer", q > 0.5 ? q : a);
        out.rejection = RejectionReason{RejectionKind::CorruptedTranslation, buf};
        result.rejected.push_back(std::move(out));
        continue;
      }
    }
    out.stage = Stage::Filtered;
    for (const auto* field : {"question", "answer"}) {
      const auto& value = std::string_view(field) == "question" ? out.question : out.answer;
      for (auto& span : detect_residual_english(value)) result.worklist.push_back({out.id, field, std::move(span)});
    }
    result.kept.push_back(std::move(out));
  }
  return result;
}

std::vector<InstructionRecord> sample_for_review(std::span<const InstructionRecord> records, std::size_t n,
                                                 std::uint64_t seed) {
  if (n >= records.size()) return {records.begin(), records.end()};
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<InstructionRecord> out;
  out.reserve(n);
  for (auto i : idx) out.push_back(records[i]);
  return out;
}

double DatasetStats::avg_question_tokens() const {
  return total_instances == 0 ? 0.0 : static_cast<double>(question_tokens) / static_cast<double>(total_instances);
}

double DatasetStats::avg_answer_tokens() const {
  return total_instances == 0 ? 0.0 : static_cast<double>(answer_tokens) / static_cast<double>(total_instances);
}

DatasetStats compute_stats(std::span<const InstructionRecord> records, const text::Tokenizer& tokenizer) {
  DatasetStats stats;
  for (const auto& r : records) {
    if (!r.active()) continue;
    ++stats.total_instances;
    stats.question_tokens += tokenizer.count(r.question);
    stats.answer_tokens += tokenizer.count(r.answer);
  }
  return stats;
}

std::string render_stats_table(std::span<const std::pair<std::string, DatasetStats>> rows) {
  std::size_t width = 7;
  for (const auto& [label, s] : rows) width = std::max(width, label.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s | %15s | %28s | %26s\n", static_cast<int>(width), "Dataset", "Total Instances",
                "Avg. Question length (token)", "Avg. Answer length (token)");
  out += buf;
  for (const auto& [label, s] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s | %15zu | %28.2f | %26.2f\n", static_cast<int>(width), label.c_str(),
                  s.total_instances, s.avg_question_tokens(), s.avg_answer_tokens());
    out += buf;
  }
  return out;
}

void CategoryTaxonomy::validate() const {
  std::vector<std::string> problems;
  std::set<std::string> names;
  for (const auto& c : categories) {
    if (c.name.empty()) problems.push_back("category with empty name");
    if (c.name == kOtherCategory) problems.push_back("\"Other\" is implicit and cannot be declared");
    if (!names.insert(c.name).second) problems.push_back("duplicate category '" + c.name + "'");
    if (c.keywords.empty()) problems.push_back("category '" + c.name + "' has no keywords");
    for (const auto& k : c.keywords) {
      const auto spans = text::whitespace_spans(k);
      if (spans.size() != 1 || spans[0].end - spans[0].begin != k.size()) {
        problems.push_back("category '" + c.name + "' has a keyword that is not a single word: '" + k + "'");
      } else if (text::ascii_lower(k) != k) {
        problems.push_back("category '" + c.name + "' keyword '" + k + "' is not lowercase");
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid taxonomy:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw Error(ErrorCode::SchemaError, msg);
  }
}

CategoryTaxonomy CategoryTaxonomy::from_json(const json& j) {
  CategoryTaxonomy t;
  try {
    for (const auto& c : j.at("categories")) {
      t.categories.push_back({c.at("name").get<std::string>(), c.at("keywords").get<std::vector<std::string>>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("taxonomy: ") + e.what());
  }
  t.validate();
  return t;
}

CategoryTaxonomy CategoryTaxonomy::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("taxonomy: ") + e.what());
  }
}

CategoryReport categorize(std::span<const InstructionRecord> records, const CategoryTaxonomy& taxonomy) {
  CategoryReport report;
  for (const auto& c : taxonomy.categories) report.counts.emplace_back(c.name, 0);
  report.counts.emplace_back(std::string(kOtherCategory), 0);

  for (const auto& r : records) {
    if (!r.active()) continue;
    auto words = text::normalized_words(r.question);
    auto answer_words = text::normalized_words(r.answer);
    words.insert(words.end(), answer_words.begin(), answer_words.end());
    const std::set<std::string> vocab(words.begin(), words.end());

    std::vector<std::string> tags;
    for (std::size_t i = 0; i < taxonomy.categories.size(); ++i) {
      const auto& kws = taxonomy.categories[i].keywords;
      if (std::any_of(kws.begin(), kws.end(), [&](const std::string& k) { return vocab.contains(k); })) {
        tags.push_back(taxonomy.categories[i].name);
        ++report.counts[i].second;
      }
    }
    if (tags.empty()) {
      tags.emplace_back(kOtherCategory);
      ++report.counts.back().second;
    }
    report.tags[r.id] = std::move(tags);
  }
  return report;
}

std::string render_category_table(const CategoryReport& report) {
  std::size_t width = 10;
  for (const auto& [name, n] : report.counts) width = std::max(width, name.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s | %14s\n", static_cast<int>(width), "Categories", "Instance Count");
  out += buf;
  for (const auto& [name, n] : report.counts) {
    std::snprintf(buf, sizeof buf, "%-*s | %14zu\n", static_cast<int>(width), name.c_str(), n);
    out += buf;
  }
  return out;
}

}  // namespace ragqa::dataset
