#include "agriqa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "agriqa/error.hpp"
#include "agriqa/text.hpp"

namespace agriqa::eval {

using nlohmann::json;

namespace {

constexpr double kSumTolerance = 1e-9;

void require_reference(const Tokens& reference) {
  if (reference.empty()) throw Error(ErrorCode::InvalidReference, "reference is empty");
}

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0) key.push_back('\x1f');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

std::size_t total(const NgramCounts& c) {
  std::size_t t = 0;
  for (const auto& [_, v] : c) t += v;
  return t;
}

std::size_t intersection(const NgramCounts& a, const NgramCounts& b) {
  std::size_t m = 0;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    if (it != b.end()) m += std::min(v, it->second);
  }
  return m;
}

double f1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

// Unigrams plus skip-bigrams with at most `gap` tokens between the pair.
NgramCounts skip_units(const Tokens& t, std::size_t gap) {
  NgramCounts units;
  for (std::size_t i = 0; i < t.size(); ++i) {
    ++units["1\x1f" + t[i]];
    for (std::size_t j = i + 1; j < t.size() && j - i <= gap + 1; ++j) {
      ++units["2\x1f" + t[i] + "\x1f" + t[j]];
    }
  }
  return units;
}

void check_weights(double a, double b, double c, const char* what) {
  if (!(a >= 0.0 && b >= 0.0 && c >= 0.0) || std::fabs(a + b + c - 1.0) > kSumTolerance) {
    throw Error(ErrorCode::InvalidWeights, std::string(what) + " must be non-negative and sum to 1");
  }
}

std::string pad(std::string s, std::size_t width) {
  auto len = text::utf8_length(s);
  if (len < width) s.append(width - len, ' ');
  return s;
}

std::string render_rows(const std::vector<std::pair<std::string, ItemScore>>& rows, const std::string& head) {
  std::size_t w = head.size();
  for (const auto& [label, _] : rows) w = std::max(w, text::utf8_length(label));
  std::string out = pad(head, w) + " | BLEU   | ROUGE  | GLEU   | Composite\n";
  out += std::string(w, '-') + "-+--------+--------+--------+----------\n";
  for (const auto& [label, s] : rows) {
    out += pad(label, w) + " | " + text::format_real(s.bleu, 4) + " | " + text::format_real(s.rouge, 4) + " | " +
           text::format_real(s.gleu, 4) + " | " + text::format_real(s.composite, 4) + "\n";
  }
  return out;
}

json item_json(const ItemScore& s) {
  return {{"id", s.id}, {"bleu", s.bleu}, {"rouge", s.rouge}, {"gleu", s.gleu}, {"composite", s.composite}};
}

}  // namespace

void MetricWeights::validate() const { check_weights(alpha, beta, gamma, "metric weights"); }

void ManualWeights::validate() const { check_weights(accuracy, professionalism, fluency, "manual weights"); }

void RougeParams::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidWeights, "lambda must be in [0, 1]");
  if (!(omega1 >= 0.0 && omega2 >= 0.0) || std::fabs(omega1 + omega2 - 1.0) > kSumTolerance) {
    throw Error(ErrorCode::InvalidWeights, "omega1 + omega2 must equal 1");
  }
}

double bleu(const Tokens& candidate, const Tokens& reference, int max_n) {
  require_reference(reference);
  if (candidate.empty() || max_n <= 0) return 0.0;
  double sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    auto c = ngrams(candidate, static_cast<std::size_t>(n));
    auto gen = total(c);
    if (gen == 0) continue;
    sum += static_cast<double>(intersection(c, ngrams(reference, static_cast<std::size_t>(n)))) /
           static_cast<double>(gen);
  }
  const double c_len = static_cast<double>(candidate.size());
  const double r_len = static_cast<double>(reference.size());
  const double bp = c_len >= r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
  return bp * sum / static_cast<double>(max_n);
}

double gleu(const Tokens& candidate, const Tokens& reference, int max_n) {
  require_reference(reference);
  if (max_n <= 0) return 0.0;
  double sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    auto c = ngrams(candidate, static_cast<std::size_t>(n));
    auto r = ngrams(reference, static_cast<std::size_t>(n));
    auto denom = total(c) + total(r);
    if (denom == 0) continue;
    sum += 2.0 * static_cast<double>(intersection(c, r)) / static_cast<double>(denom);
  }
  return sum / static_cast<double>(max_n);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double weighted_lcs(const Tokens& a, const Tokens& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0 || m == 0) return 0.0;
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  // 1-based tables with a zero border.
  auto idx = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
  std::vector<double> start(idx(n, m) + 1, kNone);  // best weight with a run starting at (i, j)
  std::vector<double> best(idx(n, m) + 1, 0.0);     // prefix maximum over alignments ending in [1..i]x[1..j]
  std::vector<std::size_t> run(idx(n, m) + 1, 0);   // diagonal match run length ending at (i, j)

  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      double end_here = kNone;
      if (a[i - 1] == b[j - 1]) {
        run[idx(i, j)] = run[idx(i - 1, j - 1)] + 1;
        // Predecessors exclude (i-1, j-1), which would extend the run instead.
        double before = 0.0;
        if (i >= 2) before = std::max(before, best[idx(i - 2, j - 1)]);
        if (j >= 2) before = std::max(before, best[idx(i - 1, j - 2)]);
        start[idx(i, j)] = before + 1.0;
        for (std::size_t k = 1; k <= run[idx(i, j)]; ++k) {
          double s = start[idx(i - k + 1, j - k + 1)];
          end_here = std::max(end_here, s + static_cast<double>(k * k) - 1.0);
        }
      }
      best[idx(i, j)] = std::max({best[idx(i - 1, j)], best[idx(i, j - 1)], end_here});
    }
  }
  return best[idx(n, m)];
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  require_reference(reference);
  if (candidate.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  return f1(lcs / static_cast<double>(candidate.size()), lcs / static_cast<double>(reference.size()));
}

double rouge_su(const Tokens& candidate, const Tokens& reference, std::size_t skip_gap) {
  require_reference(reference);
  auto c = skip_units(candidate, skip_gap);
  auto r = skip_units(reference, skip_gap);
  auto c_total = total(c), r_total = total(r);
  if (c_total == 0 || r_total == 0) return 0.0;
  const double m = static_cast<double>(intersection(c, r));
  return f1(m / static_cast<double>(c_total), m / static_cast<double>(r_total));
}

double rouge_ls(const Tokens& candidate, const Tokens& reference) {
  require_reference(reference);
  if (candidate.empty()) return 0.0;
  // f(k) = k^2, so f^-1(W / f(len)) = sqrt(W) / len.
  const double root = std::sqrt(weighted_lcs(candidate, reference));
  return f1(root / static_cast<double>(candidate.size()), root / static_cast<double>(reference.size()));
}

RougeBreakdown rouge_breakdown(const Tokens& candidate, const Tokens& reference, const RougeParams& params) {
  params.validate();
  RougeBreakdown b;
  b.rouge_l = rouge_l(candidate, reference);
  b.rouge_su = rouge_su(candidate, reference, params.skip_gap);
  b.rouge_ls = rouge_ls(candidate, reference);
  b.blended = (1.0 - params.lambda) * b.rouge_l + params.lambda * (b.rouge_su * params.omega1 + b.rouge_ls * params.omega2);
  return b;
}

double rouge_blend(const Tokens& candidate, const Tokens& reference, const RougeParams& params) {
  return rouge_breakdown(candidate, reference, params).blended;
}

double composite(double bleu_score, double rouge_score, double gleu_score, const MetricWeights& w) {
  w.validate();
  for (double v : {bleu_score, rouge_score, gleu_score}) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidScore, "metric score outside [0, 1]");
  }
  return w.alpha * bleu_score + w.beta * rouge_score + w.gamma * gleu_score;
}

double manual_total(double accuracy, double professionalism, double fluency, const ManualWeights& w) {
  w.validate();
  for (double v : {accuracy, professionalism, fluency}) {
    if (!(v >= 0.0 && v <= 10.0)) throw Error(ErrorCode::InvalidScore, "manual score outside [0, 10]");
  }
  return w.accuracy * accuracy + w.professionalism * professionalism + w.fluency * fluency;
}

std::vector<QAPair> parse_dataset(std::string_view contents) {
  std::vector<QAPair> out;
  std::set<std::string> ids;
  auto lines = text::split(contents, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = text::trim(lines[i]);
    if (line.empty()) continue;
    auto where = "dataset line " + std::to_string(i + 1);
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::InvalidInput, where + ": not a JSON object");
    QAPair p;
    try {
      p.id = j.at("id").get<std::string>();
      p.question = j.at("question").get<std::string>();
      p.reference_answer = j.at("reference_answer").get<std::string>();
      p.category = j.value("category", std::string());
      p.source = j.value("source", std::string());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidInput, where + ": " + e.what());
    }
    if (text::trim(p.question).empty() || text::trim(p.reference_answer).empty()) {
      throw Error(ErrorCode::InvalidInput, where + ": question and reference_answer must be non-empty");
    }
    if (!ids.insert(p.id).second) throw Error(ErrorCode::InvalidInput, where + ": duplicate id " + p.id);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<QAPair> load_dataset(const std::string& path) { return parse_dataset(text::read_file(path)); }

std::map<std::string, std::string> parse_answers(std::string_view contents) {
  std::map<std::string, std::string> out;
  auto lines = text::split(contents, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = text::trim(lines[i]);
    if (line.empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("answer") || !j["id"].is_string() ||
        !j["answer"].is_string()) {
      throw Error(ErrorCode::InvalidInput, "answers line " + std::to_string(i + 1) + ": expected {id, answer}");
    }
    out[j["id"].get<std::string>()] = j["answer"].get<std::string>();
  }
  return out;
}

std::map<std::string, std::string> load_answers(const std::string& path) {
  return parse_answers(text::read_file(path));
}

ItemScore score_pair(const std::string& id, std::string_view candidate, std::string_view reference,
                     const MetricWeights& weights, const RougeParams& params) {
  auto c = text::metric_tokens(candidate);
  auto r = text::metric_tokens(reference);
  ItemScore s;
  s.id = id;
  s.bleu = bleu(c, r);
  s.rouge = rouge_blend(c, r, params);
  s.gleu = gleu(c, r);
  s.composite = composite(s.bleu, s.rouge, s.gleu, weights);
  return s;
}

ScoreReport run_eval(const std::vector<QAPair>& dataset, const AnswerSource& answers, const MetricWeights& weights,
                     const RougeParams& params, const std::string& label) {
  if (dataset.empty()) throw Error(ErrorCode::InvalidInput, "dataset is empty");
  weights.validate();
  params.validate();
  ScoreReport report;
  report.config_label = label;
  for (const auto& item : dataset) {
    report.per_item.push_back(score_pair(item.id, answers(item), item.reference_answer, weights, params));
  }
  const double n = static_cast<double>(report.per_item.size());
  report.aggregate.id = "mean";
  for (const auto& s : report.per_item) {
    report.aggregate.bleu += s.bleu / n;
    report.aggregate.rouge += s.rouge / n;
    report.aggregate.gleu += s.gleu / n;
    report.aggregate.composite += s.composite / n;
  }
  return report;
}

ScoreReport run_eval(const std::vector<QAPair>& dataset, const std::map<std::string, std::string>& answers,
                     const MetricWeights& weights, const RougeParams& params, const std::string& label) {
  std::vector<std::string> missing;
  for (const auto& item : dataset) {
    if (answers.count(item.id) == 0) missing.push_back(item.id);
  }
  if (!missing.empty()) throw Error(ErrorCode::MissingAnswer, "no answer for: " + text::join(missing, ", "));
  return run_eval(
      dataset, [&](const QAPair& p) { return answers.at(p.id); }, weights, params, label);
}

AnswerSource episode_answers(const agent::Orchestrator& orchestrator, const agent::AblationConfig& ablation,
                             const std::string& session_prefix, std::vector<agent::AgentTrace>* traces) {
  return [&orchestrator, ablation, session_prefix, traces](const QAPair& item) {
    auto session = session_prefix + item.id;
    try {
      auto trace = orchestrator.run_episode(item.question, ablation, session);
      if (traces != nullptr) traces->push_back(trace);
      return trace.final_answer;
    } catch (const agent::EpisodeFailed& e) {
      if (traces != nullptr) traces->push_back(e.partial_trace());
      return std::string();
    }
  };
}

std::vector<AblationRow> run_ablation(const std::vector<QAPair>& dataset,
                                      const std::vector<std::pair<std::string, agent::AblationConfig>>& configs,
                                      const agent::Orchestrator& orchestrator, const MetricWeights& weights,
                                      const RougeParams& params) {
  if (configs.empty()) throw Error(ErrorCode::InvalidInput, "no ablation configurations");
  std::vector<AblationRow> rows;
  for (const auto& [label, ablation] : configs) {
    AblationRow row;
    row.label = label;
    row.ablation = ablation;
    row.report = run_eval(dataset, episode_answers(orchestrator, ablation, "ablation/" + label + "/", &row.traces),
                          weights, params, label);
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const ScoreReport& report) {
  json items = json::array();
  for (const auto& s : report.per_item) items.push_back(item_json(s));
  return {{"config_label", report.config_label}, {"per_item", items}, {"aggregate", item_json(report.aggregate)}};
}

json to_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    auto j = to_json(r.report);
    j["ablation"] = agent::to_json(r.ablation);
    out.push_back(std::move(j));
  }
  return out;
}

std::string render_report(const ScoreReport& report) {
  std::vector<std::pair<std::string, ItemScore>> rows;
  for (const auto& s : report.per_item) rows.emplace_back(s.id, s);
  rows.emplace_back(report.config_label.empty() ? "mean" : "mean (" + report.config_label + ")", report.aggregate);
  return render_rows(rows, "Item");
}

std::string render_ablation(const std::vector<AblationRow>& rows) {
  std::vector<std::pair<std::string, ItemScore>> out;
  for (const auto& r : rows) out.emplace_back(r.label, r.report.aggregate);
  return render_rows(out, "Configuration");
}

std::vector<ManualScores> parse_manual_scores(std::string_view contents) {
  std::vector<ManualScores> out;
  auto lines = text::split(contents, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line[0] == '#') continue;
    auto f = text::split(line, '\t');
    if (f.size() != 4) throw Error(ErrorCode::InvalidInput, "manual scores line " + std::to_string(i + 1));
    try {
      out.push_back({f[0], std::stod(f[1]), std::stod(f[2]), std::stod(f[3])});
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidInput, "manual scores line " + std::to_string(i + 1) + ": bad number");
    }
  }
  return out;
}

std::string render_manual(const std::vector<ManualScores>& rows, const ManualWeights& w) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, text::utf8_length(r.label));
  std::string out = pad("Model", width) + " | Accuracy | Professionalism | Fluency | Total\n";
  out += std::string(width, '-') + "-+----------+-----------------+---------+------\n";
  for (const auto& r : rows) {
    double t = manual_total(r.accuracy, r.professionalism, r.fluency, w);
    out += pad(r.label, width) + " | " + pad(text::format_real(r.accuracy, 1), 8) + " | " +
           pad(text::format_real(r.professionalism, 1), 15) + " | " + pad(text::format_real(r.fluency, 1), 7) +
           " | " + text::format_real(t, 2) + "\n";
  }
  return out;
}

}  // namespace agriqa::eval
