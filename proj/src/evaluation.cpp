#include "ragqa/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <unordered_map>

#include "ragqa/chat.hpp"
#include "ragqa/error.hpp"
#include "ragqa/random.hpp"
#include "ragqa/text.hpp"

namespace ragqa::eval {

using nlohmann::json;

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::First: return "first";
    case Verdict::Second: return "second";
    case Verdict::Neither: return "neither";
  }
  return "neither";
}

Verdict parse_verdict(std::string_view name) {
  const auto lower = text::ascii_lower(name);
  if (lower == "first") return Verdict::First;
  if (lower == "second") return Verdict::Second;
  if (lower == "neither") return Verdict::Neither;
  throw Error(ErrorCode::InvalidArgument, "unknown verdict '" + std::string(name) + "'");
}

double token_f1(std::string_view candidate, std::string_view reference) {
  const auto cand = text::normalized_words(candidate);
  const auto ref = text::normalized_words(reference);
  if (cand.empty() || ref.empty()) return 0.0;
  std::unordered_map<std::string, std::size_t> ref_counts;
  for (const auto& w : ref) ++ref_counts[w];
  std::size_t overlap = 0;
  for (const auto& w : cand) {
    auto it = ref_counts.find(w);
    if (it != ref_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(cand.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
  return 2.0 * precision * recall / (precision + recall);
}

Verdict OverlapJudge::judge(std::string_view ground_truth, std::string_view first, std::string_view second) {
  const double f1_first = token_f1(first, ground_truth);
  const double f1_second = token_f1(second, ground_truth);
  if (f1_first < kOverlapFloor && f1_second < kOverlapFloor) return Verdict::Neither;
  if (f1_first > f1_second) return Verdict::First;
  if (f1_second > f1_first) return Verdict::Second;
  return Verdict::Neither;
}

namespace {

Verdict unswap(Verdict v) {
  switch (v) {
    case Verdict::First: return Verdict::Second;
    case Verdict::Second: return Verdict::First;
    case Verdict::Neither: return Verdict::Neither;
  }
  return v;
}

Verdict call_judge(Judge& judge, std::string_view gt, std::string_view a, std::string_view b) {
  try {
    return judge.judge(gt, a, b);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::JudgeFailure) throw;
    throw Error(ErrorCode::JudgeFailure, "judge '" + judge.id() + "': " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::JudgeFailure, "judge '" + judge.id() + "': " + e.what());
  }
}

}  // namespace

JudgeVerdict judge_pair(std::string question_id, std::string_view ground_truth, std::string_view first,
                        std::string_view second, Judge& judge, bool swap_guard) {
  JudgeVerdict v{std::move(question_id), call_judge(judge, ground_truth, first, second), std::nullopt};
  if (swap_guard) v.position_bias = unswap(call_judge(judge, ground_truth, second, first)) != v.verdict;
  return v;
}

std::int64_t percent_hundredths(std::size_t count, std::size_t total) {
  if (total == 0) return 0;
  const auto num = static_cast<std::int64_t>(count) * 10000 * 2 + static_cast<std::int64_t>(total);
  return num / (2 * static_cast<std::int64_t>(total));
}

std::string format_percent(std::int64_t hundredths) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld%%", static_cast<long long>(hundredths / 100),
                static_cast<long long>(hundredths % 100));
  return buf;
}

WinRateReport aggregate_win_rates(std::span<const JudgeVerdict> verdicts, std::string pair_label) {
  if (verdicts.empty()) throw Error(ErrorCode::EmptyInput, "no verdicts to aggregate for '" + pair_label + "'");
  WinRateReport r;
  r.pair_label = std::move(pair_label);
  for (const auto& v : verdicts) {
    switch (v.verdict) {
      case Verdict::First: ++r.first; break;
      case Verdict::Second: ++r.second; break;
      case Verdict::Neither: ++r.neither; break;
    }
    if (v.position_bias.value_or(false)) ++r.position_bias_flags;
  }
  const auto total = r.total();
  r.first_pct = percent_hundredths(r.first, total);
  r.second_pct = percent_hundredths(r.second, total);
  r.neither_pct = percent_hundredths(r.neither, total);
  return r;
}

std::string render_win_rate_table(std::span<const WinRateReport> reports) {
  std::size_t width = 5;
  for (const auto& r : reports) width = std::max(width, r.pair_label.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s | %-18s | %-18s | %-18s\n", static_cast<int>(width), "Model", "Ours",
                "Competitor", "Neither");
  out += buf;
  auto cell = [](std::int64_t pct, std::size_t n) { return format_percent(pct) + " (" + std::to_string(n) + ")"; };
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-*s | %-18s | %-18s | %-18s\n", static_cast<int>(width), r.pair_label.c_str(),
                  cell(r.first_pct, r.first).c_str(), cell(r.second_pct, r.second).c_str(),
                  cell(r.neither_pct, r.neither).c_str());
    out += buf;
  }
  return out;
}

json to_json(const WinRateReport& r) {
  return {{"pair", r.pair_label},
          {"counts", {{"ours", r.first}, {"competitor", r.second}, {"neither", r.neither}}},
          {"percent",
           {{"ours", static_cast<double>(r.first_pct) / 100.0},
            {"competitor", static_cast<double>(r.second_pct) / 100.0},
            {"neither", static_cast<double>(r.neither_pct) / 100.0}}},
          {"total", r.total()},
          {"position_bias_flags", r.position_bias_flags}};
}

int Ballot::slot_of(std::string_view model_id) const {
  for (std::size_t i = 0; i < slot_models.size(); ++i) {
    if (slot_models[i] == model_id) return static_cast<int>(i) + 1;
  }
  return 0;
}

std::vector<Ballot> make_ballots(std::span<const BallotQuestion> questions, const ResponseTable& responses,
                                 std::span<const std::string> models, std::uint64_t seed) {
  if (models.size() != kBallotModels) {
    throw Error(ErrorCode::InvalidArgument, "ballots need exactly " + std::to_string(kBallotModels) + " models");
  }
  const std::set<std::string> distinct(models.begin(), models.end());
  if (distinct.size() != models.size()) throw Error(ErrorCode::InvalidArgument, "model ids must be distinct");

  std::vector<Ballot> ballots;
  ballots.reserve(questions.size());
  for (const auto& q : questions) {
    const auto it = responses.find(q.question_id);
    for (const auto& m : models) {
      if (it == responses.end() || !it->second.contains(m)) {
        throw Error(ErrorCode::MissingResponse, "question '" + q.question_id + "' lacks a response from '" + m + "'");
      }
    }
    Ballot b;
    b.question_id = q.question_id;
    std::copy(models.begin(), models.end(), b.slot_models.begin());
    SplitMix64 rng(mix_seed(seed, fnv1a64(q.question_id)));
    for (std::size_t i = b.slot_models.size() - 1; i > 0; --i) {
      std::swap(b.slot_models[i], b.slot_models[rng.below(i + 1)]);
    }
    ballots.push_back(std::move(b));
  }
  return ballots;
}

namespace {

// The placeholder holds no letters or digits, so it can never spell a model id.
constexpr std::string_view kScrubbed = "[***]";

std::string scrub(std::string s, std::span<const std::string> model_ids) {
  for (const auto& id : model_ids) {
    if (id.empty()) continue;
    const auto needle = text::ascii_lower(id);
    std::string lower = text::ascii_lower(s);
    std::size_t pos = 0;
    while ((pos = lower.find(needle, pos)) != std::string::npos) {
      s.replace(pos, needle.size(), kScrubbed);
      lower.replace(pos, needle.size(), kScrubbed);
      pos += kScrubbed.size();
    }
  }
  return s;
}

}  // namespace

std::vector<json> rater_export(std::span<const Ballot> ballots, std::span<const BallotQuestion> questions,
                               const ResponseTable& responses) {
  std::map<std::string, std::string> question_text;
  for (const auto& q : questions) question_text[q.question_id] = q.question;
  std::set<std::string> ids;
  for (const auto& b : ballots) ids.insert(b.slot_models.begin(), b.slot_models.end());
  std::vector<std::string> model_ids(ids.begin(), ids.end());
  // Longest first, so an id containing another is removed whole.
  std::stable_sort(model_ids.begin(), model_ids.end(),
                   [](const std::string& a, const std::string& b) { return a.size() > b.size(); });

  std::vector<json> lines;
  for (const auto& b : ballots) {
    json slots = json::array();
    for (std::size_t s = 0; s < b.slot_models.size(); ++s) {
      const auto& text = responses.at(b.question_id).at(b.slot_models[s]);
      slots.push_back({{"slot", s + 1}, {"text", scrub(text, model_ids)}});
    }
    lines.push_back(
        {{"question_id", b.question_id}, {"question", scrub(question_text[b.question_id], model_ids)}, {"slots", slots}});
  }
  return lines;
}

std::vector<json> key_export(std::span<const Ballot> ballots) {
  std::vector<json> lines;
  for (const auto& b : ballots) {
    json slots = json::object();
    for (std::size_t s = 0; s < b.slot_models.size(); ++s) slots[std::to_string(s + 1)] = b.slot_models[s];
    lines.push_back({{"question_id", b.question_id}, {"slots", slots}});
  }
  return lines;
}

std::vector<Ballot> ballots_from_key(std::span<const json> key_lines) {
  std::vector<Ballot> ballots;
  for (const auto& line : key_lines) {
    Ballot b;
    try {
      b.question_id = line.at("question_id").get<std::string>();
      for (std::size_t s = 0; s < kBallotModels; ++s) {
        b.slot_models[s] = line.at("slots").at(std::to_string(s + 1)).get<std::string>();
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaError, std::string("ballot key: ") + e.what());
    }
    const std::set<std::string> distinct(b.slot_models.begin(), b.slot_models.end());
    if (distinct.size() != kBallotModels) {
      throw Error(ErrorCode::SchemaError, "ballot key for '" + b.question_id + "' is not a bijection");
    }
    ballots.push_back(std::move(b));
  }
  return ballots;
}

void apply_choices(std::vector<Ballot>& ballots, std::span<const json> choice_lines) {
  std::map<std::string, Ballot*> by_id;
  for (auto& b : ballots) by_id[b.question_id] = &b;
  for (const auto& line : choice_lines) {
    const auto qid = line.value("question_id", std::string());
    const auto it = by_id.find(qid);
    if (it == by_id.end()) throw Error(ErrorCode::SchemaError, "choice for unknown question '" + qid + "'");
    if (!line.contains("choice")) throw Error(ErrorCode::SchemaError, "choice line for '" + qid + "' lacks 'choice'");
    const auto& c = line.at("choice");
    if (c.is_null()) {
      it->second->choice.reset();
    } else if (c.is_number_integer() && c.get<int>() >= 1 && c.get<int>() <= static_cast<int>(kBallotModels)) {
      it->second->choice = c.get<int>();
    } else {
      throw Error(ErrorCode::SchemaError, "choice for '" + qid + "' must be a slot 1..5 or null");
    }
    it->second->resolved = true;
  }
}

HumanEvalReport aggregate_human_eval(std::span<const Ballot> ballots) {
  if (ballots.empty()) throw Error(ErrorCode::EmptyInput, "no ballots to aggregate");
  std::map<std::string, std::size_t> wins;
  HumanEvalReport report;
  for (const auto& b : ballots) {
    if (!b.resolved) throw Error(ErrorCode::UnresolvedBallot, "ballot '" + b.question_id + "' has no recorded choice");
    for (const auto& m : b.slot_models) wins.try_emplace(m, 0);
    if (b.choice) {
      ++wins[b.slot_models.at(static_cast<std::size_t>(*b.choice - 1))];
    } else {
      ++report.none;
    }
  }
  report.total = ballots.size();
  for (const auto& [model, n] : wins) report.models.push_back({model, n, percent_hundredths(n, report.total)});
  report.none_pct = percent_hundredths(report.none, report.total);
  return report;
}

std::string render_human_eval(const HumanEvalReport& report) {
  std::size_t width = 5;
  for (const auto& m : report.models) width = std::max(width, m.model_id.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s | %-8s | %s\n", static_cast<int>(width), "Model", "Win %", "Wins");
  out += buf;
  for (const auto& m : report.models) {
    std::snprintf(buf, sizeof buf, "%-*s | %-8s | %zu\n", static_cast<int>(width), m.model_id.c_str(),
                  format_percent(m.pct).c_str(), m.wins);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-*s | %-8s | %zu\n", static_cast<int>(width), "(none)",
                format_percent(report.none_pct).c_str(), report.none);
  out += buf;
  std::snprintf(buf, sizeof buf, "total ballots: %zu\n", report.total);
  out += buf;
  return out;
}

json to_json(const HumanEvalReport& report) {
  json models = json::array();
  for (const auto& m : report.models) {
    models.push_back({{"model_id", m.model_id}, {"wins", m.wins}, {"percent", static_cast<double>(m.pct) / 100.0}});
  }
  return {{"models", models},
          {"none", {{"count", report.none}, {"percent", static_cast<double>(report.none_pct) / 100.0}}},
          {"total", report.total}};
}

SuiteReport run_pairwise_suite(std::span<const TestItem> test_set, ChatPipeline& system_under_test,
                               const ResponseTable& competitor_outputs, std::span<const std::string> competitors,
                               Judge& judge, bool swap_guard) {
  SuiteReport report;
  std::map<std::string, std::string> ours;
  std::map<std::string, std::string> generation_errors;
  for (const auto& item : test_set) {
    auto conv = system_under_test.new_conversation("suite-" + item.question_id);
    try {
      ours[item.question_id] = system_under_test.turn(conv, item.question, Retrieval::Disabled).reply;
    } catch (const std::exception& e) {
      generation_errors[item.question_id] = e.what();
    }
  }

  for (const auto& competitor : competitors) {
    auto& verdicts = report.verdicts[competitor];
    for (const auto& item : test_set) {
      ++report.submitted;
      if (auto err = generation_errors.find(item.question_id); err != generation_errors.end()) {
        report.failures.push_back({competitor, item.question_id, "generation failed: " + err->second});
        continue;
      }
      const auto q = competitor_outputs.find(item.question_id);
      if (q == competitor_outputs.end() || !q->second.contains(competitor)) {
        report.failures.push_back({competitor, item.question_id, "missing competitor response"});
        continue;
      }
      try {
        verdicts.push_back(judge_pair(item.question_id, item.ground_truth, ours.at(item.question_id),
                                      q->second.at(competitor), judge, swap_guard));
        ++report.judged;
      } catch (const Error& e) {
        report.failures.push_back({competitor, item.question_id, e.what()});
      }
    }
    if (!verdicts.empty()) report.reports.push_back(aggregate_win_rates(verdicts, competitor));
  }
  return report;
}

}  // namespace ragqa::eval
