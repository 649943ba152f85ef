#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include "oracles.hpp"
#include "ragqa/dataset.hpp"
#include "ragqa/error.hpp"

using namespace ragqa;
using namespace ragqa::dataset;
namespace fs = std::filesystem;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no ragqa::Error thrown";
  return ErrorCode::InvalidArgument;
}

InstructionRecord rec(std::string id, std::string q, std::string a, Language lang = Language::Arabic,
                      Stage stage = Stage::Translated) {
  return {id, id, std::move(q), std::move(a), lang, stage, std::nullopt};
}

class CountingTranslator final : public Translator {
 public:
  int calls = 0;
  std::string id() const override { return "counting"; }
  TranslatedPair translate(std::string_view q, std::string_view a) override {
    ++calls;
    if (q == "boom") throw std::runtime_error("rate limited");
    return {"س " + std::string(q), "ج " + std::string(a)};
  }
};

const text::WhitespaceTokenizer tok;

}  // namespace

TEST(Ingest, CsvWithQuotesAndBadRows) {
  const std::string csv =
      "id,question,answer\r\n"
      "1,\"What is CO2, exactly?\",\"A gas, \"\"carbon dioxide\"\".\"\r\n"
      "2,,missing question\r\n"
      "3,\"Multi\nline?\",Yes\r\n"
      "4,too,many,fields\r\n";
  const auto report = parse_qa_csv(csv, Source::CCMRC);
  ASSERT_EQ(report.pairs.size(), 2u);
  EXPECT_EQ(report.pairs[0].id, "CCMRC-0");
  EXPECT_EQ(report.pairs[0].question, "What is CO2, exactly?");
  EXPECT_EQ(report.pairs[0].answer, "A gas, \"carbon dioxide\".");
  EXPECT_EQ(report.pairs[1].id, "CCMRC-2");
  EXPECT_EQ(report.pairs[1].question, "Multi\nline?");
  ASSERT_EQ(report.row_errors.size(), 2u);
  EXPECT_EQ(report.row_errors[0].row, 1u);
  EXPECT_EQ(report.row_errors[1].row, 3u);
}

TEST(Ingest, CsvHeaderMustNameColumns) {
  EXPECT_EQ(code_of([] { parse_qa_csv("q,a\nx,y\n", Source::Other); }), ErrorCode::SchemaError);
  EXPECT_EQ(parse_qa_csv("Question,ANSWER\nx,y\n", Source::Other).pairs.size(), 1u);
}

TEST(Ingest, Jsonl) {
  const std::string jsonl =
      "{\"question\":\"q1\",\"answer\":\"a1\"}\n"
      "\n"
      "not json\n"
      "{\"question\":\"q3\"}\n"
      "{\"question\":\"q4\",\"answer\":\"a4\",\"extra\":1}\n";
  const auto report = parse_qa_jsonl(jsonl, Source::ClimaBench);
  ASSERT_EQ(report.pairs.size(), 2u);
  EXPECT_EQ(report.pairs[1].id, "ClimaBench-3");
  EXPECT_EQ(report.row_errors.size(), 2u);
  const auto records = to_records(report.pairs);
  EXPECT_EQ(records[0].stage, Stage::Ingested);
  EXPECT_EQ(records[0].qa_id, "ClimaBench-0");
}

TEST(Records, StagesOnlyAdvance) {
  auto r = rec("x", "q", "a", Language::English, Stage::Ingested);
  advance(r, Stage::Conversational);
  EXPECT_EQ(r.stage, Stage::Conversational);
  EXPECT_EQ(code_of([&] { advance(r, Stage::Ingested); }), ErrorCode::InvalidArgument);
}

TEST(Records, JsonRoundTripAndFile) {
  auto a = rec("r1", "سؤال", "جواب");
  auto b = rec("r2", "q", "a\nb");
  b.rejection = RejectionReason{RejectionKind::UndefinedSymbol, "answer"};
  EXPECT_EQ(to_json(b)["status"], "rejected");
  EXPECT_EQ(to_json(a)["status"], "active");
  EXPECT_EQ(record_from_json(to_json(a)), a);
  EXPECT_EQ(record_from_json(to_json(b)), b);

  const auto path = fs::temp_directory_path() / ("ragqa_records_" + std::to_string(::getpid()) + ".jsonl");
  const std::vector<InstructionRecord> recs = {a, b};
  write_records(path, recs);
  EXPECT_EQ(read_records(path), recs);
  fs::remove(path);
}

TEST(Stages, ConversationalThenTranslated) {
  const std::vector<InstructionRecord> in = {rec("a", "q", "ans", Language::English, Stage::Ingested),
                                             rec("b", "q", "ans", Language::English, Stage::Translated)};
  MarkerTransformer t;
  const auto conv = to_conversational(in, t);
  ASSERT_EQ(conv.records.size(), 1u);
  EXPECT_EQ(conv.records[0].answer, "ans«conv»");
  EXPECT_EQ(conv.records[0].stage, Stage::Conversational);
  ASSERT_EQ(conv.failures.size(), 1u);
  EXPECT_EQ(conv.failures[0].record, in[1]);

  WrappingTranslator w;
  const auto tr = translate_records(conv.records, w);
  ASSERT_EQ(tr.records.size(), 1u);
  EXPECT_EQ(tr.records[0].question, "⟦ar:q⟧");
  EXPECT_EQ(tr.records[0].language, Language::Arabic);
  EXPECT_EQ(tr.records[0].stage, Stage::Translated);
}

TEST(Stages, TranslatorCalledOncePerRecordAndFailuresIsolated) {
  std::vector<InstructionRecord> in;
  for (int i = 0; i < 5; ++i) in.push_back(rec("r" + std::to_string(i), i == 2 ? "boom" : "q", "a", Language::English,
                                               Stage::Conversational));
  CountingTranslator t;
  const auto out = translate_records(in, t);
  EXPECT_EQ(t.calls, 5);
  EXPECT_EQ(out.records.size(), 4u);
  ASSERT_EQ(out.failures.size(), 1u);
  EXPECT_EQ(out.failures[0].record.id, "r2");
  EXPECT_NE(out.failures[0].detail.find("rate limited"), std::string::npos);
}

TEST(Residual, SpansWithByteAndCharOffsets) {
  const std::string s = "انبعاثات CO2 emissions، ثم NASA.";
  const auto spans = detect_residual_english(s);
  ASSERT_EQ(spans.size(), 2u);
  EXPECT_EQ(spans[0].text, "CO2 emissions");
  EXPECT_EQ(s.substr(spans[0].byte_begin, spans[0].byte_end - spans[0].byte_begin), "CO2 emissions");
  EXPECT_EQ(spans[0].char_begin, 9u);
  EXPECT_EQ(spans[0].char_end, 22u);
  EXPECT_EQ(spans[1].text, "NASA");
  EXPECT_TRUE(detect_residual_english("كله عربي 2024").empty());
}

TEST(Filter, RulesAndConservation) {
  const std::vector<InstructionRecord> in = {
      rec("ok", "ما هو الاحتباس الحراري؟", "هو ارتفاع درجة حرارة الأرض بسبب CO2."),
      rec("fffd", "سؤال \xEF\xBF\xBD", "جواب"),
      rec("ctrl", "سؤال", "جواب \x07"),
      rec("c1", "سؤال", "جواب \xC2\x85"),
      rec("invalid", "سؤال \xFF", "جواب"),
      rec("english", "ما هو؟", "This answer was never translated into Arabic."),
      rec("tabs", "سؤال\tمع\nفواصل", "جواب"),
      rec("early", "q", "a", Language::English, Stage::Conversational),
  };
  const auto out = filter_low_quality(in);
  std::set<std::string> kept, rejected;
  for (const auto& r : out.kept) {
    kept.insert(r.id);
    EXPECT_EQ(r.stage, Stage::Filtered);
  }
  for (const auto& r : out.rejected) {
    rejected.insert(r.id);
    ASSERT_TRUE(r.rejection.has_value());
    const auto want = r.id == "english" ? RejectionKind::CorruptedTranslation : RejectionKind::UndefinedSymbol;
    EXPECT_EQ(r.rejection->kind, want) << r.id;
  }
  EXPECT_EQ(kept, (std::set<std::string>{"ok", "tabs"}));
  EXPECT_EQ(rejected, (std::set<std::string>{"fffd", "ctrl", "c1", "invalid", "english"}));
  ASSERT_EQ(out.stage_failures.size(), 1u);
  EXPECT_EQ(out.stage_failures[0].record.id, "early");
  EXPECT_EQ(out.kept.size() + out.rejected.size() + out.stage_failures.size(), in.size());
  ASSERT_EQ(out.worklist.size(), 1u);
  EXPECT_EQ(out.worklist[0].record_id, "ok");
  EXPECT_EQ(out.worklist[0].field, "answer");
  EXPECT_EQ(out.worklist[0].span.text, "CO2");
}

TEST(Filter, Idempotent) {
  const std::vector<InstructionRecord> in = {rec("a", "سؤال", "جواب"), rec("b", "سؤال \xEF\xBF\xBD", "جواب"),
                                             rec("c", "What?", "English only")};
  const auto once = filter_low_quality(in);
  std::vector<InstructionRecord> all = once.kept;
  all.insert(all.end(), once.rejected.begin(), once.rejected.end());
  const auto twice = filter_low_quality(all);
  EXPECT_EQ(twice.kept, once.kept);
  EXPECT_EQ(twice.rejected, once.rejected);
}

TEST(Sample, SeededSubsetInInputOrder) {
  std::vector<InstructionRecord> in;
  for (int i = 0; i < 50; ++i) in.push_back(rec("r" + std::to_string(i), "q", "a"));
  const auto a = sample_for_review(in, 10, 99);
  const auto b = sample_for_review(in, 10, 99);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 10u);
  std::set<std::string> ids;
  std::size_t last = 0;
  for (const auto& r : a) {
    ids.insert(r.id);
    const auto pos = static_cast<std::size_t>(std::stoi(r.id.substr(1)));
    EXPECT_GE(pos, last);
    last = pos;
  }
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_NE(sample_for_review(in, 10, 100), a);
  EXPECT_EQ(sample_for_review(in, 100, 1).size(), 50u);
}

TEST(Sample, RoughlyUniform) {
  std::vector<InstructionRecord> in;
  for (int i = 0; i < 10; ++i) in.push_back(rec("r" + std::to_string(i), "q", "a"));
  std::map<std::string, int> hits;
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    for (const auto& r : sample_for_review(in, 3, seed)) ++hits[r.id];
  }
  for (const auto& [id, n] : hits) EXPECT_NEAR(n, 1200, 150) << id;
}

TEST(Stats, AveragesSkipRejected) {
  std::vector<InstructionRecord> in = {rec("a", "one two", "one two three"), rec("b", "x", "y z w v")};
  auto dropped = rec("c", "ignored words here", "x");
  dropped.rejection = RejectionReason{RejectionKind::ManualReject, ""};
  in.push_back(dropped);
  const auto s = compute_stats(in, tok);
  EXPECT_EQ(s.total_instances, 2u);
  EXPECT_DOUBLE_EQ(s.avg_question_tokens(), 1.5);
  EXPECT_DOUBLE_EQ(s.avg_answer_tokens(), 3.5);
  const std::pair<std::string, DatasetStats> rows[] = {{"demo", s}};
  const auto table = render_stats_table(rows);
  EXPECT_NE(table.find("Total Instances"), std::string::npos);
  EXPECT_NE(table.find("1.50"), std::string::npos);
  EXPECT_EQ(compute_stats({}, tok).avg_answer_tokens(), 0.0);
}

TEST(Categories, MultiLabelAndOther) {
  const auto tax = CategoryTaxonomy::from_json(nlohmann::json::parse(R"({"categories":[
      {"name":"Temperature","keywords":["temperature","heat"]},
      {"name":"Oceanic","keywords":["ocean","sea"]}]})"));
  const std::vector<InstructionRecord> in = {rec("1", "Ocean heat?", "Yes."), rec("2", "What about the sea", "x"),
                                             rec("3", "Policy", "none")};
  const auto report = categorize(in, tax);
  ASSERT_EQ(report.counts.size(), 3u);
  EXPECT_EQ(report.counts[0], (std::pair<std::string, std::size_t>{"Temperature", 1}));
  EXPECT_EQ(report.counts[1].second, 2u);
  EXPECT_EQ(report.counts[2], (std::pair<std::string, std::size_t>{"Other", 1}));
  EXPECT_EQ(report.tags.at("1"), (std::vector<std::string>{"Temperature", "Oceanic"}));
  EXPECT_NE(render_category_table(report).find("Instance Count"), std::string::npos);
}

TEST(Categories, ValidationListsEveryProblem) {
  CategoryTaxonomy bad{{{"Other", {"x"}}, {"A", {}}, {"B", {"Upper", "two words"}}, {"B", {"ok"}}}};
  try {
    bad.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
    const std::string msg = e.what();
    for (const char* needle : {"Other", "no keywords", "lowercase", "single word", "duplicate"}) {
      EXPECT_NE(msg.find(needle), std::string::npos) << needle;
    }
  }
}

TEST(Categories, ShippedTaxonomyLoads) {
  const auto tax = CategoryTaxonomy::load(fs::path(RAGQA_SOURCE_DIR) / "data" / "taxonomy.json");
  EXPECT_EQ(tax.categories.size(), 10u);
  EXPECT_EQ(tax.categories.front().name, "Temperature");
  EXPECT_EQ(tax.categories.back().name, "Climate Policy / Laws");
}
