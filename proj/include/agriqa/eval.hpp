#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agriqa/agent.hpp"

namespace agriqa::eval {

using Tokens = std::vector<std::string>;

/// Composite weights; alpha + beta + gamma = 1.
struct MetricWeights {
  double alpha = 0.4;
  double beta = 0.4;
  double gamma = 0.2;
  /// Throws Error(InvalidWeights).
  void validate() const;
};

/// ROUGE blend: (1 - lambda) * L + lambda * (omega1 * SU + omega2 * LS).
struct RougeParams {
  double lambda = 0.1;
  double omega1 = 0.5;
  double omega2 = 0.5;
  /// Maximum number of tokens skipped inside a skip-bigram.
  std::size_t skip_gap = 4;
  void validate() const;
};

struct ManualWeights {
  double accuracy = 0.5;
  double professionalism = 0.3;
  double fluency = 0.2;
  void validate() const;
};

// Metrics. All throw Error(InvalidReference) on an empty reference.

/// BP * mean over n = 1..max_n of clipped n-gram precision. Orders with no
/// candidate n-grams contribute 0; BP = exp(1 - r/c) when c < r.
double bleu(const Tokens& candidate, const Tokens& reference, int max_n = 4);

/// Mean over n = 1..max_n of 2 * match / (gen + ref).
double gleu(const Tokens& candidate, const Tokens& reference, int max_n = 4);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

/// Maximum over common subsequences of sum(run_length^2), where a run is a
/// block of matches consecutive in both sequences.
double weighted_lcs(const Tokens& a, const Tokens& b);

double rouge_l(const Tokens& candidate, const Tokens& reference);
double rouge_su(const Tokens& candidate, const Tokens& reference, std::size_t skip_gap = 4);
double rouge_ls(const Tokens& candidate, const Tokens& reference);

struct RougeBreakdown {
  double rouge_l = 0.0;
  double rouge_su = 0.0;
  double rouge_ls = 0.0;
  double blended = 0.0;
};

RougeBreakdown rouge_breakdown(const Tokens& candidate, const Tokens& reference, const RougeParams& params = {});
double rouge_blend(const Tokens& candidate, const Tokens& reference, const RougeParams& params = {});

/// Throws Error(InvalidWeights) or Error(InvalidScore) for inputs outside [0, 1].
double composite(double bleu, double rouge, double gleu, const MetricWeights& w = {});

/// Weighted manual score on the 0-10 scale. Throws Error(InvalidScore).
double manual_total(double accuracy, double professionalism, double fluency, const ManualWeights& w = {});

// ---------------------------------------------------------------------------
// Dataset and reports.

struct QAPair {
  std::string id;
  std::string question;
  std::string reference_answer;
  std::string category;
  std::string source;
};

/// JSON Lines, one object per line with id, question, reference_answer,
/// category, source. Throws Error(InvalidInput) on malformed records,
/// duplicate ids or empty question/reference.
std::vector<QAPair> parse_dataset(std::string_view contents);
std::vector<QAPair> load_dataset(const std::string& path);

/// JSON Lines of {"id": ..., "answer": ...}.
std::map<std::string, std::string> parse_answers(std::string_view contents);
std::map<std::string, std::string> load_answers(const std::string& path);

struct ItemScore {
  std::string id;
  double bleu = 0.0;
  double rouge = 0.0;
  double gleu = 0.0;
  double composite = 0.0;
};

struct ScoreReport {
  std::vector<ItemScore> per_item;
  ItemScore aggregate;
  std::string config_label;
};

/// Scores one candidate/reference pair after metric tokenization.
ItemScore score_pair(const std::string& id, std::string_view candidate, std::string_view reference,
                     const MetricWeights& weights = {}, const RougeParams& params = {});

using AnswerSource = std::function<std::string(const QAPair&)>;

ScoreReport run_eval(const std::vector<QAPair>& dataset, const AnswerSource& answers,
                     const MetricWeights& weights = {}, const RougeParams& params = {},
                     const std::string& label = "");

/// Throws Error(MissingAnswer) listing every dataset id without an answer.
ScoreReport run_eval(const std::vector<QAPair>& dataset, const std::map<std::string, std::string>& answers,
                     const MetricWeights& weights = {}, const RougeParams& params = {},
                     const std::string& label = "");

/// Answers each question with a fresh episode; a failed episode yields an
/// empty answer. Traces are appended to `traces` when given.
AnswerSource episode_answers(const agent::Orchestrator& orchestrator, const agent::AblationConfig& ablation,
                             const std::string& session_prefix, std::vector<agent::AgentTrace>* traces = nullptr);

struct AblationRow {
  std::string label;
  agent::AblationConfig ablation;
  ScoreReport report;
  std::vector<agent::AgentTrace> traces;
};

std::vector<AblationRow> run_ablation(const std::vector<QAPair>& dataset,
                                      const std::vector<std::pair<std::string, agent::AblationConfig>>& configs,
                                      const agent::Orchestrator& orchestrator, const MetricWeights& weights = {},
                                      const RougeParams& params = {});

nlohmann::json to_json(const ScoreReport& report);
nlohmann::json to_json(const std::vector<AblationRow>& rows);

/// Aligned text table: Model | BLEU | ROUGE | GLEU | Composite.
std::string render_report(const ScoreReport& report);
std::string render_ablation(const std::vector<AblationRow>& rows);

struct ManualScores {
  std::string label;
  double accuracy = 0.0;
  double professionalism = 0.0;
  double fluency = 0.0;
};

/// "label<TAB>accuracy<TAB>professionalism<TAB>fluency" lines.
std::vector<ManualScores> parse_manual_scores(std::string_view contents);
/// Aligned text table: label | Accuracy | Professionalism | Fluency | Total.
std::string render_manual(const std::vector<ManualScores>& rows, const ManualWeights& w = {});

}  // namespace agriqa::eval
