#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"
#include "ragqa/config.hpp"
#include "ragqa/dataset.hpp"
#include "ragqa/error.hpp"
#include "ragqa/evaluation.hpp"
#include "ragqa/service.hpp"

namespace {

using nlohmann::json;
namespace ds = ragqa::dataset;
namespace ev = ragqa::eval;

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ragqa::Error(ragqa::ErrorCode::IoFailure, "cannot open " + path);
  std::vector<json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ragqa::Error(ragqa::ErrorCode::SchemaError, path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::string& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ragqa::Error(ragqa::ErrorCode::IoFailure, "cannot write " + path);
  for (const auto& l : lines) out << l.dump() << '\n';
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

ragqa::AppConfig config_or_default(const std::string& path) {
  return path.empty() ? ragqa::default_config() : ragqa::load_config(path);
}

int emit(const ragqa::HttpResult& r) {
  std::cout << r.body.dump(2) << '\n';
  return r.status == 200 ? 0 : 1;
}

std::vector<ev::TestItem> read_test_set(const std::string& path) {
  std::vector<ev::TestItem> items;
  for (const auto& j : read_jsonl(path)) {
    items.push_back({j.at("question_id").get<std::string>(), j.value("question", std::string()),
                     j.value("ground_truth", std::string())});
  }
  return items;
}

ev::ResponseTable read_responses(const std::string& path) {
  ev::ResponseTable table;
  for (const auto& j : read_jsonl(path)) {
    table[j.at("question_id").get<std::string>()][j.at("model_id").get<std::string>()] = j.at("text").get<std::string>();
  }
  return table;
}

std::vector<json> failures_json(const std::vector<ds::StageFailure>& failures) {
  std::vector<json> out;
  for (const auto& f : failures) out.push_back({{"id", f.record.id}, {"detail", f.detail}});
  return out;
}

void report_failures(const std::vector<ds::StageFailure>& failures, const std::string& path) {
  if (!path.empty()) write_jsonl(path, failures_json(failures));
  for (const auto& f : failures) std::cerr << "failed: " << f.record.id << ": " << f.detail << '\n';
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented climate QA: service, ingestion, dataset pipeline and evaluation harness"};
  app.require_subcommand(1);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string serve_config;
  serve->add_option("--config", serve_config, "Configuration file")->required();

  // ingest / search / chat
  auto* ingest = app.add_subcommand("ingest", "Chunk, embed and store documents from a JSONL file");
  std::string store_dir, input, config_path;
  std::optional<std::size_t> chunk_tokens, overlap;
  ingest->add_option("--store", store_dir, "Store directory")->required();
  ingest->add_option("--input", input, "JSONL with {id, text, metadata?} per line")->required();
  ingest->add_option("--chunk-tokens", chunk_tokens, "Max whitespace tokens per chunk (default 200)");
  ingest->add_option("--overlap", overlap, "Tokens shared by consecutive chunks (default 20)");
  ingest->add_option("--config", config_path, "Configuration file");

  auto* search = app.add_subcommand("search", "Top-k similarity search");
  std::string query;
  std::optional<std::size_t> k;
  search->add_option("--store", store_dir, "Store directory")->required();
  search->add_option("--query", query, "Query text")->required();
  search->add_option("--k", k, "Number of results (default 4)");
  search->add_option("--config", config_path, "Configuration file");

  auto* chat = app.add_subcommand("chat", "Run one chat turn");
  std::string message, conversation_id, sessions_file;
  chat->add_option("--config", config_path, "Configuration file")->required();
  chat->add_option("--message", message, "User message")->required();
  chat->add_option("--conversation-id", conversation_id, "Conversation id");
  chat->add_option("--sessions", sessions_file, "Session snapshot to resume from and update");

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Instruction dataset pipeline");
  dataset->require_subcommand(1);
  std::string out, format = "jsonl", source = "Other", failures_path, rejected_path, worklist_path, taxonomy_path,
              tags_path, label = "dataset";
  std::size_t sample_n = 0;
  std::uint64_t seed = 0;
  bool as_json = false;

  auto* d_ingest = dataset->add_subcommand("ingest", "Extract QA pairs from CSV or JSONL");
  d_ingest->add_option("--input", input)->required();
  d_ingest->add_option("--format", format, "csv | jsonl");
  d_ingest->add_option("--source", source, "CCMRC | ClimaBench | Other");
  d_ingest->add_option("--out", out)->required();
  d_ingest->add_option("--errors", failures_path, "Write row errors as JSONL");

  auto* d_convert = dataset->add_subcommand("convert", "Rewrite answers conversationally");
  auto* d_translate = dataset->add_subcommand("translate", "Translate question and answer together");
  for (auto* sub : {d_convert, d_translate}) {
    sub->add_option("--input", input)->required();
    sub->add_option("--out", out)->required();
    sub->add_option("--failures", failures_path, "Write per-record failures as JSONL");
    sub->add_option("--config", config_path, "Configuration selecting the backend");
  }

  auto* d_filter = dataset->add_subcommand("filter", "Reject low-quality records");
  d_filter->add_option("--input", input)->required();
  d_filter->add_option("--out", out)->required();
  d_filter->add_option("--rejected", rejected_path, "Write rejected records");
  d_filter->add_option("--worklist", worklist_path, "Write residual English spans for manual translation");

  auto* d_sample = dataset->add_subcommand("sample", "Draw records for manual review");
  d_sample->add_option("--input", input)->required();
  d_sample->add_option("--out", out)->required();
  d_sample->add_option("--n", sample_n)->required();
  d_sample->add_option("--seed", seed);

  auto* d_stats = dataset->add_subcommand("stats", "Instance count and average lengths");
  d_stats->add_option("--input", input)->required();
  d_stats->add_option("--label", label, "Row label");
  d_stats->add_flag("--json", as_json);

  auto* d_categorize = dataset->add_subcommand("categorize", "Keyword categories and instance counts");
  d_categorize->add_option("--input", input)->required();
  d_categorize->add_option("--taxonomy", taxonomy_path)->required();
  d_categorize->add_option("--tags", tags_path, "Write per-record tags as JSONL");
  d_categorize->add_flag("--json", as_json);

  // eval
  auto* evalc = app.add_subcommand("eval", "Evaluation harness");
  evalc->require_subcommand(1);
  std::string test_set, responses, pair, judge_kind = "stub", verdict_files, models, key_path, choices_path,
              competitors;
  bool swap_guard = false;

  auto* e_judge = evalc->add_subcommand("judge", "Pairwise judgments of model A (first) vs model B (second)");
  e_judge->add_option("--test-set", test_set)->required();
  e_judge->add_option("--responses", responses)->required();
  e_judge->add_option("--pair", pair, "A,B")->required();
  e_judge->add_option("--judge", judge_kind, "stub | remote");
  e_judge->add_option("--config", config_path, "Configuration with the remote judge backend");
  e_judge->add_flag("--swap-guard", swap_guard, "Re-judge with swapped order and flag disagreement");
  e_judge->add_option("--out", out)->required();

  auto* e_report = evalc->add_subcommand("report", "Win-rate table from verdict files");
  std::vector<std::string> verdict_paths;
  e_report->add_option("--verdicts", verdict_paths)->required();
  e_report->add_flag("--json", as_json);

  auto* e_ballots = evalc->add_subcommand("ballots", "Anonymized five-way ballots");
  e_ballots->add_option("--test-set", test_set)->required();
  e_ballots->add_option("--responses", responses)->required();
  e_ballots->add_option("--models", models, "Five comma-separated model ids")->required();
  e_ballots->add_option("--seed", seed);
  e_ballots->add_option("--out", out, "Rater-facing export")->required();
  e_ballots->add_option("--key", key_path, "Hidden slot-to-model key")->required();

  auto* e_human = evalc->add_subcommand("human-report", "Per-model win percentages from rater choices");
  e_human->add_option("--key", key_path)->required();
  e_human->add_option("--choices", choices_path)->required();
  e_human->add_flag("--json", as_json);

  auto* e_suite = evalc->add_subcommand("suite", "Answer the test set (retrieval off) and judge against competitors");
  e_suite->add_option("--config", config_path)->required();
  e_suite->add_option("--test-set", test_set)->required();
  e_suite->add_option("--responses", responses, "Competitor responses")->required();
  e_suite->add_option("--competitors", competitors, "Comma-separated competitor model ids")->required();
  e_suite->add_flag("--swap-guard", swap_guard);
  e_suite->add_flag("--json", as_json);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      auto config = ragqa::load_config(serve_config);
      ragqa::Service service(config);
      if (config.session_snapshot) service.load_sessions(*config.session_snapshot);
      httplib::Server server;
      service.register_routes(server);
      const auto colon = config.bind.rfind(':');
      const auto host = config.bind.substr(0, colon);
      const int port = std::stoi(config.bind.substr(colon + 1));
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      if (!server.bind_to_port(host, port)) {
        std::cerr << "cannot bind " << config.bind << '\n';
        return 1;
      }
      std::cerr << "listening on " << config.bind << '\n';
      server.listen_after_bind();
      if (config.session_snapshot) service.save_sessions(*config.session_snapshot);
      return 0;
    }

    if (*ingest) {
      auto config = config_or_default(config_path);
      config.store_dir = store_dir;
      if (chunk_tokens) config.chunk_tokens = *chunk_tokens;
      if (overlap) config.chunk_overlap = *overlap;
      ragqa::Service service(config);
      const auto docs = read_jsonl(input);
      return emit(service.handle_ingest(json{{"documents", docs}}));
    }

    if (*search) {
      auto config = config_or_default(config_path);
      config.store_dir = store_dir;
      const ragqa::Service service(config);
      const auto k_text = k ? std::optional<std::string>(std::to_string(*k)) : std::nullopt;
      return emit(service.handle_search(query, k_text ? std::optional<std::string_view>(*k_text) : std::nullopt));
    }

    if (*chat) {
      ragqa::Service service(ragqa::load_config(config_path));
      if (!sessions_file.empty()) service.load_sessions(sessions_file);
      json req = {{"message", message}};
      if (!conversation_id.empty()) req["conversation_id"] = conversation_id;
      const auto result = service.handle_chat(req);
      if (!sessions_file.empty() && result.status == 200) service.save_sessions(sessions_file);
      return emit(result);
    }

    if (*d_ingest) {
      const auto report = ds::ingest_qa_pairs(input, ds::parse_format(format), ds::parse_source(source));
      ds::write_records(out, ds::to_records(report.pairs));
      std::vector<json> errors;
      for (const auto& e : report.row_errors) errors.push_back({{"row", e.row}, {"reason", e.reason}});
      if (!failures_path.empty()) write_jsonl(failures_path, errors);
      for (const auto& e : report.row_errors) std::cerr << "row " << e.row << ": " << e.reason << '\n';
      std::cout << json{{"pairs", report.pairs.size()}, {"row_errors", report.row_errors.size()}}.dump() << '\n';
      return 0;
    }

    if (*d_convert || *d_translate) {
      const auto config = config_or_default(config_path);
      const auto records = ds::read_records(input);
      ds::StageResult result;
      if (*d_convert) {
        auto transformer = ragqa::make_transformer(config);
        result = ds::to_conversational(records, *transformer);
      } else {
        auto translator = ragqa::make_translator(config);
        result = ds::translate_records(records, *translator);
      }
      ds::write_records(out, result.records);
      report_failures(result.failures, failures_path);
      std::cout << json{{"input", records.size()}, {"output", result.records.size()}, {"failures", result.failures.size()}}
                       .dump()
                << '\n';
      return 0;
    }

    if (*d_filter) {
      const auto records = ds::read_records(input);
      const auto result = ds::filter_low_quality(records);
      ds::write_records(out, result.kept);
      if (!rejected_path.empty()) ds::write_records(rejected_path, result.rejected);
      if (!worklist_path.empty()) {
        std::vector<json> lines;
        for (const auto& w : result.worklist) {
          lines.push_back({{"id", w.record_id},
                           {"field", w.field},
                           {"text", w.span.text},
                           {"byte_begin", w.span.byte_begin},
                           {"byte_end", w.span.byte_end},
                           {"char_begin", w.span.char_begin},
                           {"char_end", w.span.char_end}});
        }
        write_jsonl(worklist_path, lines);
      }
      report_failures(result.stage_failures, "");
      std::map<std::string, std::size_t> reasons;
      for (const auto& r : result.rejected) ++reasons[std::string(ds::to_string(r.rejection->kind))];
      std::cout << json{{"input", records.size()},
                        {"kept", result.kept.size()},
                        {"rejected", result.rejected.size()},
                        {"rejected_by_reason", reasons},
                        {"stage_failures", result.stage_failures.size()},
                        {"residual_spans", result.worklist.size()}}
                       .dump()
                << '\n';
      return 0;
    }

    if (*d_sample) {
      const auto records = ds::read_records(input);
      const auto sample = ds::sample_for_review(records, sample_n, seed);
      ds::write_records(out, sample);
      std::cout << json{{"input", records.size()}, {"sampled", sample.size()}}.dump() << '\n';
      return 0;
    }

    if (*d_stats) {
      const auto records = ds::read_records(input);
      const auto stats = ds::compute_stats(records, ragqa::text::default_tokenizer());
      if (as_json) {
        std::cout << json{{"total_instances", stats.total_instances},
                          {"avg_question_tokens", stats.avg_question_tokens()},
                          {"avg_answer_tokens", stats.avg_answer_tokens()}}
                         .dump()
                  << '\n';
      } else {
        const std::pair<std::string, ds::DatasetStats> rows[] = {{label, stats}};
        std::cout << ds::render_stats_table(rows);
      }
      return 0;
    }

    if (*d_categorize) {
      const auto records = ds::read_records(input);
      const auto report = ds::categorize(records, ds::CategoryTaxonomy::load(taxonomy_path));
      if (!tags_path.empty()) {
        std::vector<json> lines;
        for (const auto& [id, tags] : report.tags) lines.push_back({{"id", id}, {"categories", tags}});
        write_jsonl(tags_path, lines);
      }
      if (as_json) {
        json counts = json::array();
        for (const auto& [name, n] : report.counts) counts.push_back({{"category", name}, {"count", n}});
        std::cout << counts.dump() << '\n';
      } else {
        std::cout << ragqa::dataset::render_category_table(report);
      }
      return 0;
    }

    if (*e_judge) {
      const auto names = split_csv(pair);
      if (names.size() != 2 || names[0].empty() || names[1].empty()) {
        std::cerr << "--pair expects A,B\n";
        return 2;
      }
      auto config = config_or_default(config_path);
      if (judge_kind == "stub") {
        config.judge.backend = "stub";
      } else if (judge_kind != "remote" || !config.judge.is_remote()) {
        std::cerr << "--judge remote needs a remote judge backend in --config\n";
        return 2;
      }
      auto judge = ragqa::make_judge(config);
      const auto items = read_test_set(test_set);
      const auto table = read_responses(responses);
      std::vector<json> lines;
      std::size_t failures = 0;
      const std::string label_pair = names[0] + "," + names[1];
      for (const auto& item : items) {
        const auto it = table.find(item.question_id);
        if (it == table.end() || !it->second.contains(names[0]) || !it->second.contains(names[1])) {
          std::cerr << item.question_id << ": missing response\n";
          ++failures;
          continue;
        }
        try {
          const auto v = ev::judge_pair(item.question_id, item.ground_truth, it->second.at(names[0]),
                                        it->second.at(names[1]), *judge, swap_guard);
          json line = {{"question_id", v.question_id}, {"pair", label_pair}, {"verdict", ev::to_string(v.verdict)}};
          if (v.position_bias) line["position_bias"] = *v.position_bias;
          lines.push_back(line);
        } catch (const ragqa::Error& e) {
          std::cerr << item.question_id << ": " << e.what() << '\n';
          ++failures;
        }
      }
      write_jsonl(out, lines);
      std::cout << json{{"submitted", items.size()}, {"judged", lines.size()}, {"failures", failures}}.dump() << '\n';
      return 0;
    }

    if (*e_report) {
      std::map<std::string, std::vector<ev::JudgeVerdict>> by_pair;
      std::vector<std::string> order;
      for (const auto& path : verdict_paths) {
        for (const auto& j : read_jsonl(path)) {
          const auto p = j.value("pair", std::string("pair"));
          if (!by_pair.contains(p)) order.push_back(p);
          ev::JudgeVerdict v{j.at("question_id").get<std::string>(), ev::parse_verdict(j.at("verdict").get<std::string>()),
                             std::nullopt};
          if (j.contains("position_bias")) v.position_bias = j["position_bias"].get<bool>();
          by_pair[p].push_back(std::move(v));
        }
      }
      std::vector<ev::WinRateReport> reports;
      for (const auto& p : order) {
        const auto comma = p.find(',');
        reports.push_back(ev::aggregate_win_rates(by_pair[p], comma == std::string::npos ? p : p.substr(comma + 1)));
      }
      if (reports.empty()) throw ragqa::Error(ragqa::ErrorCode::EmptyInput, "no verdicts found");
      if (as_json) {
        json arr = json::array();
        for (const auto& r : reports) arr.push_back(ev::to_json(r));
        std::cout << arr.dump(2) << '\n';
      } else {
        std::cout << ev::render_win_rate_table(reports);
      }
      return 0;
    }

    if (*e_ballots) {
      const auto model_ids = split_csv(models);
      const auto items = read_test_set(test_set);
      std::vector<ev::BallotQuestion> questions;
      for (const auto& i : items) questions.push_back({i.question_id, i.question});
      const auto table = read_responses(responses);
      const auto ballots = ev::make_ballots(questions, table, model_ids, seed);
      write_jsonl(out, ev::rater_export(ballots, questions, table));
      write_jsonl(key_path, ev::key_export(ballots));
      std::cout << json{{"ballots", ballots.size()}}.dump() << '\n';
      return 0;
    }

    if (*e_human) {
      const auto key_lines = read_jsonl(key_path);
      auto ballots = ev::ballots_from_key(key_lines);
      ev::apply_choices(ballots, read_jsonl(choices_path));
      const auto report = ev::aggregate_human_eval(ballots);
      if (as_json) {
        std::cout << ev::to_json(report).dump(2) << '\n';
      } else {
        std::cout << ev::render_human_eval(report);
      }
      return 0;
    }

    if (*e_suite) {
      const auto config = ragqa::load_config(config_path);
      auto routing = ragqa::make_routing(config);
      auto kb = std::make_shared<ragqa::KnowledgeBase>(
          std::filesystem::exists(config.store_dir) ? ragqa::KnowledgeBase::open(config.store_dir, routing)
                                                    : ragqa::KnowledgeBase(routing));
      ragqa::ChatPipeline sut(kb, ragqa::make_generator(config), ragqa::load_templates(config), config.chat());
      auto judge = ragqa::make_judge(config);
      const auto items = read_test_set(test_set);
      const auto names = split_csv(competitors);
      const auto report = ev::run_pairwise_suite(items, sut, read_responses(responses), names, *judge, swap_guard);
      for (const auto& f : report.failures) std::cerr << f.competitor << "/" << f.question_id << ": " << f.reason << '\n';
      if (as_json) {
        json arr = json::array();
        for (const auto& r : report.reports) arr.push_back(ev::to_json(r));
        std::cout << json{{"reports", arr},
                          {"coverage", {{"judged", report.judged}, {"submitted", report.submitted}}},
                          {"augment_decisions", sut.counts().augment}}
                         .dump(2)
                  << '\n';
      } else {
        std::cout << ev::render_win_rate_table(report.reports);
        std::cout << "coverage: " << report.judged << "/" << report.submitted << " judged\n";
      }
      return 0;
    }
  } catch (const ragqa::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
