// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. argv[1] is the path of the agriqa CLI.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "agriqa/agent.hpp"
#include "agriqa/eval.hpp"
#include "agriqa/service.hpp"
#include "agriqa/text.hpp"
#include "oracles.hpp"

using namespace agriqa;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kData = AGRIQA_TEST_DATA_DIR;

// Tolerances.
constexpr double kManualTolerance = 0.005;
constexpr double kOracleTolerance = 1e-9;
constexpr double kCompositeTolerance = 1e-9;
constexpr double kRetrievalTolerance = 1e-9;
constexpr double kOracleSeconds = 10.0;
constexpr double kEndToEndSeconds = 60.0;
constexpr int kMetricPairs = 1500;
constexpr int kAdversarialTranscripts = 250;

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --- 1 ----------------------------------------------------------------------

Outcome manual_totals() {
  Outcome o;
  struct Table {
    std::string file;
    std::vector<double> published;
  };
  const std::vector<Table> tables = {
      {"manual_scores.tsv", {9.29, 9.26, 9.11, 8.94, 9.65}},
      {"ablation_scores.tsv", {9.65, 9.21, 9.37, 9.50, 9.44}},
  };
  int checked = 0;
  for (const auto& t : tables) {
    auto rows = eval::parse_manual_scores(text::read_file(kData + "/eval/" + t.file));
    if (rows.size() != t.published.size()) {
      o.fail(t.file + ": expected " + std::to_string(t.published.size()) + " rows");
      continue;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double total = eval::manual_total(rows[i].accuracy, rows[i].professionalism, rows[i].fluency,
                                        eval::ManualWeights{0.5, 0.3, 0.2});
      ++checked;
      if (std::fabs(total - t.published[i]) > kManualTolerance) {
        o.fail(rows[i].label + " total " + text::format_real(total, 4) + " vs " + text::format_real(t.published[i], 2));
      }
    }
  }
  if (o.pass) o.detail = std::to_string(checked) + " totals within 0.005";
  return o;
}

// --- 2 ----------------------------------------------------------------------

Outcome metric_oracles() {
  Outcome o;
  std::mt19937 rng(20240501);
  std::uniform_int_distribution<int> len(1, 12), sym(0, 4);
  auto random_seq = [&] {
    oracle::Seq s(static_cast<std::size_t>(len(rng)));
    for (auto& w : s) w = std::string(1, static_cast<char>('a' + sym(rng)));
    return s;
  };
  auto t0 = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < kMetricPairs; ++i) {
    auto c = random_seq(), r = random_seq();
    const std::array<std::pair<const char*, std::pair<double, double>>, 3> pairs = {{
        {"bleu", {eval::bleu(c, r), oracle::bleu(c, r)}},
        {"rouge_blend", {eval::rouge_blend(c, r), oracle::rouge_blend(c, r)}},
        {"gleu", {eval::gleu(c, r), oracle::gleu(c, r)}},
    }};
    for (const auto& [name, v] : pairs) {
      double d = std::fabs(v.first - v.second);
      worst = std::max(worst, d);
      if (d > kOracleTolerance) o.fail(std::string(name) + " differs by " + std::to_string(d) + " on pair " + std::to_string(i));
    }
    // Cross-check the weighted-LCS oracle against exhaustive chain enumeration.
    if (i % 10 == 0 && std::fabs(oracle::wlcs(c, r) - oracle::wlcs_exhaustive(c, r)) > 1e-12) {
      o.fail("weighted LCS oracles disagree on pair " + std::to_string(i));
    }
  }
  double secs = seconds_since(t0);
  if (secs > kOracleSeconds) o.fail("took " + std::to_string(secs) + " s");
  if (o.pass) {
    std::ostringstream ss;
    ss << kMetricPairs << " pairs, max diff " << worst << ", " << text::format_real(secs, 2) << " s";
    o.detail = ss.str();
  }
  return o;
}

// --- 3 ----------------------------------------------------------------------

Outcome composite_value() {
  Outcome o;
  double v = eval::composite(0.88, 0.79, 0.85, eval::MetricWeights{0.4, 0.4, 0.2});
  if (std::fabs(v - 0.838) > kCompositeTolerance) o.fail("composite = " + text::format_real(v, 12));
  if (o.pass) o.detail = "composite(0.88, 0.79, 0.85) = " + text::format_real(v, 6) + " (reported 0.923 is not derivable)";
  return o;
}

// --- 4 ----------------------------------------------------------------------

std::size_t count_tool_calls(const agent::AgentTrace& t, const std::string& tool, std::size_t* other) {
  std::size_t n = 0;
  for (const auto& s : t.steps) {
    if (s.action == agent::ActionKind::InvokeTool) {
      if (s.tool_name == tool) {
        ++n;
      } else {
        ++*other;
      }
    }
    for (const auto& c : s.children) n += count_tool_calls(c, tool, other);
  }
  return n;
}

Outcome promoter_routing(const System& sys) {
  Outcome o;
  // ACGTACGTGGCCAATT: 16 bases, 8 of them G or C, 2 "CG" steps out of 15.
  // 4 * 0.5 - 3 * 0.25 + 0.5 * 2 / 15 = 1.3166666...
  const std::string expected = "1.316667";
  auto r = sys.ask("Predict the promoter enrichment value of sequence ACGTACGTGGCCAATT", "acceptance-promoter");
  std::size_t other = 0;
  auto calls = count_tool_calls(r.trace, "promoter_enrichment", &other);
  if (calls != 1) o.fail(std::to_string(calls) + " promoter_enrichment invocations");
  if (other != 0) o.fail(std::to_string(other) + " other tool invocations");
  if (r.answer.find(expected) == std::string::npos) o.fail("answer lacks " + expected);
  if (o.pass) o.detail = "one InvokeTool(promoter_enrichment), answer contains " + expected;
  return o;
}

// --- 5 ----------------------------------------------------------------------

Outcome ablation_soundness(const System& sys) {
  Outcome o;
  auto dataset = sys.dataset();
  if (dataset.size() != 20) o.fail("dataset has " + std::to_string(dataset.size()) + " items");
  std::size_t episodes = 0;
  for (const auto& [label, ablation] : agent::standard_ablations()) {
    for (const auto& item : dataset) {
      auto trace = sys.orchestrator().run_episode(item.question, ablation, "acceptance/" + item.id);
      ++episodes;
      for (auto kind : agent::actions_taken(trace)) {
        if (!ablation.permits(kind)) {
          o.fail(label + " / " + item.id + " took disabled action " + std::string(agent::action_name(kind)));
        }
      }
    }
  }
  auto run = [&] {
    auto rows = eval::run_ablation(dataset, agent::standard_ablations(), sys.orchestrator(), sys.config().weights,
                                   sys.config().rouge);
    return std::make_pair(eval::render_ablation(rows), eval::to_json(rows).dump());
  };
  auto first = run(), second = run();
  if (first != second) o.fail("ablation report differs between runs");
  auto lines = std::count(first.first.begin(), first.first.end(), '\n');
  if (o.pass) o.detail = std::to_string(episodes) + " episodes clean, report identical (" + std::to_string(lines) + " lines)";
  return o;
}

// --- 6 ----------------------------------------------------------------------

Outcome retrieval_exactness() {
  Outcome o;
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> word(0, 149), len(6, 30);
  auto random_text = [&](int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + std::string("t") + std::to_string(word(rng));
    return s;
  };
  std::vector<std::string> texts;
  std::vector<retrieval::DocumentChunk> chunks;
  for (int i = 0; i < 50; ++i) {
    texts.push_back(random_text(len(rng)));
    char id[16];
    std::snprintf(id, sizeof(id), "doc%02d", i);
    auto c = retrieval::chunk_document(id, texts.back(), 64, 8);
    chunks.insert(chunks.end(), c.begin(), c.end());
  }
  retrieval::VectorIndex index;
  index.add(chunks);
  oracle::DenseTfIdf model(texts, retrieval::kDefaultDimension);
  std::vector<std::vector<double>> dense;
  for (const auto& t : texts) dense.push_back(model.vec(t));

  std::vector<std::string> queries;
  for (int q = 0; q < 20; ++q) queries.push_back(random_text(3 + q % 4));

  std::vector<std::vector<retrieval::RetrievalHit>> results;
  std::size_t tie_groups = 0;
  for (const auto& q : queries) {
    auto qv = model.vec(q);
    std::vector<std::pair<double, int>> ref;
    for (int i = 0; i < 50; ++i) ref.emplace_back(oracle::dot(qv, dense[static_cast<std::size_t>(i)]), i);
    std::stable_sort(ref.begin(), ref.end(), [](auto& a, auto& b) { return a.first > b.first; });
    auto hits = index.search(q, 5, 0.0);
    results.push_back(hits);
    if (hits.size() != 5) {
      o.fail("query '" + q + "' returned " + std::to_string(hits.size()) + " hits");
      continue;
    }
    for (std::size_t r = 0; r < 5; ++r) {
      int got = std::stoi(hits[r].chunk.doc_id.substr(3));
      if (std::fabs(hits[r].score - ref[r].first) > kRetrievalTolerance) o.fail("score mismatch for '" + q + "'");
      if (got == ref[r].second) continue;
      // Only acceptable when the oracle ranks both at the same score.
      double got_ref = oracle::dot(qv, dense[static_cast<std::size_t>(got)]);
      if (std::fabs(got_ref - ref[r].first) > 1e-12) {
        o.fail("rank " + std::to_string(r + 1) + " of '" + q + "' is " + hits[r].chunk.doc_id);
      } else {
        ++tie_groups;
      }
    }
  }

  auto dir = fs::temp_directory_path() / ("agriqa_accept_index_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  index.save(dir.string());
  auto loaded = retrieval::VectorIndex::load(dir.string());
  fs::remove_all(dir);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    auto again = loaded.search(queries[q], 5, 0.0);
    bool same = again.size() == results[q].size();
    for (std::size_t i = 0; same && i < again.size(); ++i) {
      same = again[i].chunk.doc_id == results[q][i].chunk.doc_id &&
             again[i].chunk.chunk_id == results[q][i].chunk.chunk_id && again[i].score == results[q][i].score;
    }
    if (!same) o.fail("save/load changed the results for query " + std::to_string(q));
  }
  if (o.pass) {
    o.detail = "20 queries match brute force";
    if (tie_groups > 0) o.detail += " (" + std::to_string(tie_groups) + " exact ties)";
    o.detail += ", save/load identical";
  }
  return o;
}

// --- 7 ----------------------------------------------------------------------

struct Modules {
  retrieval::VectorIndex index;
  kg::KnowledgeGraph graph;
  tools::ToolRegistry registry;
  tools::FixtureSearchConnector search{kData + "/search_fixtures"};

  Modules() {
    index.ingest_directory(kData + "/corpus");
    auto loaded = kg::KnowledgeGraph::from_files(kData + "/kg/triples.tsv", kData + "/kg/entities.tsv");
    graph.reload(loaded.triples(), loaded.entities());
    tools::register_default_tools(registry, std::make_shared<tools::PhenotypeModel>(tools::PhenotypeModel::builtin()),
                                  kData + "/tools/advisory");
  }
};

// Returns an empty string when the trace respects the step bound everywhere.
std::string check_bounds(const agent::AgentTrace& t, std::size_t max_steps, bool complete) {
  if (t.steps.size() > max_steps) return "trace has " + std::to_string(t.steps.size()) + " steps";
  if (complete) {
    if (t.steps.empty() || t.steps.back().action != agent::ActionKind::Answer) return "trace does not end in Answer";
    if (t.final_answer.empty()) return "empty final answer";
  }
  for (const auto& s : t.steps) {
    for (const auto& c : s.children) {
      if (c.depth != t.depth + 1 || c.depth > 1) return "bad child depth";
      // Children that failed are stored as partial traces.
      if (auto e = check_bounds(c, max_steps, false); !e.empty()) return e;
    }
  }
  return {};
}

Outcome episode_termination(const Modules& m) {
  Outcome o;
  const std::vector<std::string> replies = {
      "Thought: use the tool\nAction: InvokeTool\nAction Input: promoter_enrichment sequence=XYZXYZXYZ",
      "Action: maize_phenotype\nAction Input: markers=1,2,3,4,5,6,7,8",
      "Action: InvokeTool\nAction Input: no_such_tool x=1",
      "Action: InvokeTool\nAction Input: {broken json",
      "I am not following the format at all.",
      "Action: Dance\nAction Input: now",
      "Action: Retrieve\nAction Input: qqqq zzzz",
      "Action: QueryKG\nAction Input: unknownium",
      "Action: Search\nAction Input: no fixture for this query",
      "Action: Search\nAction Input: grain market outlook",
      "Action: Decompose\nAction Input: first part; second part",
      "Action: Decompose\nAction Input:",
      "Final: a short answer",
      "",
  };
  const std::vector<std::string> patterns = {
      "re:^Observation", "re:^Your last reply", "re:^Compose the final answer", "re:^Decompose into",
      "re:failed", "maize", "question", "re:^Use a domain", "re:\\bpart\\b"};
  const std::vector<std::string> questions = {
      "Predict the promoter enrichment value of sequence ACGTACGTAC", "Which pests attack maize?",
      "What is crop rotation?", "Latest grain market price?", "Compare nitrogen needs of maize and rice."};

  std::mt19937 rng(4242);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  std::size_t answered = 0, failed = 0, exhausted = 0;
  auto t0 = Clock::now();
  for (int i = 0; i < kAdversarialTranscripts; ++i) {
    std::vector<llm::ScriptedTranscript::Entry> entries;
    auto n = 1 + pick(6);
    for (std::size_t k = 0; k < n; ++k) entries.push_back({patterns[pick(patterns.size())], replies[pick(replies.size())]});
    bool catch_all = pick(4) != 0;
    if (catch_all) entries.push_back({"*", replies[pick(replies.size())]});

    llm::Gateway gateway;
    gateway.register_provider("mock", catch_all ? llm::ScriptedTranscript(entries)
                                                : llm::ScriptedTranscript::unchecked(entries));
    agent::AgentConfig cfg;
    cfg.max_steps = 2 + pick(7);
    agent::Orchestrator orch({&gateway, &m.index, &m.graph, &m.registry, &m.search, nullptr, nullptr}, cfg);
    agent::AblationConfig ablation{pick(2) == 0, pick(2) == 0, pick(2) == 0, pick(2) == 0};
    const auto& question = questions[pick(questions.size())];

    auto fut = std::async(std::launch::async, [&]() -> std::string {
      try {
        auto trace = orch.run_episode(question, ablation, "adv-" + std::to_string(i));
        ++answered;
        return check_bounds(trace, cfg.max_steps, true);
      } catch (const agent::EpisodeFailed& e) {
        ++failed;
        if (std::string(e.what()).find("no transcript entry") != std::string::npos) ++exhausted;
        return check_bounds(e.partial_trace(), cfg.max_steps, false);
      } catch (const std::exception& e) {
        return std::string("unexpected exception: ") + e.what();
      }
    });
    if (fut.wait_for(std::chrono::seconds(20)) != std::future_status::ready) {
      std::cout << "FAIL episode_termination: transcript " << i << " did not terminate\n" << std::flush;
      std::_Exit(1);
    }
    if (auto err = fut.get(); !err.empty()) o.fail("transcript " + std::to_string(i) + ": " + err);
  }
  if (answered + failed != static_cast<std::size_t>(kAdversarialTranscripts)) o.fail("episode count mismatch");
  if (o.pass) {
    o.detail = std::to_string(kAdversarialTranscripts) + " transcripts: " + std::to_string(answered) + " answered, " +
               std::to_string(failed) + " failed with partial trace (" + std::to_string(exhausted) +
               " script exhausted), " + text::format_real(seconds_since(t0), 2) + " s";
  }
  return o;
}

// --- 8 ----------------------------------------------------------------------

std::pair<int, std::string> run_command(const std::string& cmd) {
  std::string out;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return {-1, out};
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  int status = ::pclose(pipe);
  return {status, out};
}

Outcome cli_determinism(const std::string& cli) {
  Outcome o;
  if (cli.empty() || !fs::exists(cli)) {
    o.fail("CLI binary not given or missing");
    return o;
  }
  auto cmd = "'" + cli + "' --data-dir '" + kData + "' eval run 2>&1";
  double slowest = 0.0;
  std::vector<std::string> outputs;
  for (int i = 0; i < 2; ++i) {
    auto t0 = Clock::now();
    auto [status, out] = run_command(cmd);
    double secs = seconds_since(t0);
    slowest = std::max(slowest, secs);
    if (status != 0) o.fail("exit status " + std::to_string(status) + ": " + out.substr(0, 200));
    if (secs > kEndToEndSeconds) o.fail("run took " + std::to_string(secs) + " s");
    outputs.push_back(out);
  }
  if (outputs.size() == 2 && outputs[0] != outputs[1]) o.fail("reports differ between runs");
  if (outputs.front().find("mean") == std::string::npos) o.fail("report has no mean row");
  if (o.pass) {
    o.detail = std::to_string(outputs.front().size()) + "-byte report identical, slowest run " +
               text::format_real(slowest, 2) + " s";
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "";
  int failures = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << "\n" << std::flush;
    failures += o.pass ? 0 : 1;
  };

  report("manual_score_totals", manual_totals);
  report("metric_oracle_equivalence", metric_oracles);
  report("composite_formula", composite_value);

  std::unique_ptr<System> sys;
  try {
    sys = std::make_unique<System>(ServiceConfig::with_data_dir(kData));
  } catch (const std::exception& e) {
    std::cout << "error: cannot build the system: " << e.what() << "\n";
  }
  report("promoter_routing", [&] {
    if (!sys) throw std::runtime_error("no system");
    return promoter_routing(*sys);
  });
  report("ablation_soundness", [&] {
    if (!sys) throw std::runtime_error("no system");
    return ablation_soundness(*sys);
  });
  report("retrieval_exactness", retrieval_exactness);
  Modules modules;
  report("episode_termination", [&] { return episode_termination(modules); });
  report("offline_eval_determinism", [&] { return cli_determinism(cli); });

  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
