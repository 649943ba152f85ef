#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ragqa {
class ChatPipeline;
}

namespace ragqa::eval {

enum class Verdict { First, Second, Neither };
std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view name);

struct JudgeVerdict {
  std::string question_id;
  Verdict verdict = Verdict::Neither;
  std::optional<bool> position_bias;  // set only when the swap guard ran

  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::string id() const = 0;
  virtual Verdict judge(std::string_view ground_truth, std::string_view first, std::string_view second) = 0;
};

// Token-overlap F1 over normalized words (bag-of-words, clipped counts).
double token_f1(std::string_view candidate, std::string_view reference);

inline constexpr double kOverlapFloor = 0.05;

// Reference judge for harness testing only: prefers the response with the
// higher token-overlap F1 against the ground truth; Neither when both fall
// below kOverlapFloor or the scores tie.
class OverlapJudge final : public Judge {
 public:
  std::string id() const override { return "stub"; }
  Verdict judge(std::string_view ground_truth, std::string_view first, std::string_view second) override;
};

// With swap_guard the judge also sees (second, first); disagreement after
// un-swapping sets position_bias. The reported verdict is the unswapped one.
// Judge exceptions surface as JudgeFailure.
JudgeVerdict judge_pair(std::string question_id, std::string_view ground_truth, std::string_view first,
                        std::string_view second, Judge& judge, bool swap_guard = false);

// Percentages are held as integer hundredths of a percent, rounded half up.
std::int64_t percent_hundredths(std::size_t count, std::size_t total);
std::string format_percent(std::int64_t hundredths);

struct WinRateReport {
  std::string pair_label;
  std::size_t first = 0;
  std::size_t second = 0;
  std::size_t neither = 0;
  std::int64_t first_pct = 0;
  std::int64_t second_pct = 0;
  std::int64_t neither_pct = 0;
  std::size_t position_bias_flags = 0;

  std::size_t total() const { return first + second + neither; }
};

WinRateReport aggregate_win_rates(std::span<const JudgeVerdict> verdicts, std::string pair_label);

// "Model | Ours | Competitor | Neither" rows with counts beside percentages.
std::string render_win_rate_table(std::span<const WinRateReport> reports);
nlohmann::json to_json(const WinRateReport& report);

inline constexpr std::size_t kBallotModels = 5;

struct BallotQuestion {
  std::string question_id;
  std::string question;
};

// question_id -> model_id -> response text
using ResponseTable = std::map<std::string, std::map<std::string, std::string>>;

struct Ballot {
  std::string question_id;
  std::array<std::string, kBallotModels> slot_models;  // slot s (1-based) shows slot_models[s - 1]
  std::optional<int> choice;                           // chosen slot; nullopt = "none of them"
  bool resolved = false;

  int slot_of(std::string_view model_id) const;
};

// Seeded per-question shuffle of the five models into display slots.
std::vector<Ballot> make_ballots(std::span<const BallotQuestion> questions, const ResponseTable& responses,
                                 std::span<const std::string> models, std::uint64_t seed);

// Rater-facing lines {question_id, question, slots:[{slot, text}]} with every
// model id scrubbed from the texts.
std::vector<nlohmann::json> rater_export(std::span<const Ballot> ballots, std::span<const BallotQuestion> questions,
                                         const ResponseTable& responses);
// Hidden key lines {question_id, slots:{"1": model_id, ...}}.
std::vector<nlohmann::json> key_export(std::span<const Ballot> ballots);
std::vector<Ballot> ballots_from_key(std::span<const nlohmann::json> key_lines);
// Applies rater choices {question_id, choice: slot | null}.
void apply_choices(std::vector<Ballot>& ballots, std::span<const nlohmann::json> choice_lines);

struct ModelShare {
  std::string model_id;
  std::size_t wins = 0;
  std::int64_t pct = 0;
};

struct HumanEvalReport {
  std::vector<ModelShare> models;  // sorted by model id
  std::size_t none = 0;
  std::int64_t none_pct = 0;
  std::size_t total = 0;
};

HumanEvalReport aggregate_human_eval(std::span<const Ballot> ballots);
std::string render_human_eval(const HumanEvalReport& report);
nlohmann::json to_json(const HumanEvalReport& report);

struct TestItem {
  std::string question_id;
  std::string question;
  std::string ground_truth;
};

struct SuiteFailure {
  std::string competitor;
  std::string question_id;
  std::string reason;
};

struct SuiteReport {
  std::vector<WinRateReport> reports;
  std::map<std::string, std::vector<JudgeVerdict>> verdicts;  // per competitor
  std::size_t submitted = 0;                                  // questions x competitors
  std::size_t judged = 0;
  std::vector<SuiteFailure> failures;
};

// Answers each question with a fresh conversation and retrieval disabled,
// then judges ours (First) against every competitor (Second).
SuiteReport run_pairwise_suite(std::span<const TestItem> test_set, ChatPipeline& system_under_test,
                               const ResponseTable& competitor_outputs, std::span<const std::string> competitors,
                               Judge& judge, bool swap_guard = false);

}  // namespace ragqa::eval
