#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agriqa/error.hpp"
#include "agriqa/knowledge_graph.hpp"
#include "agriqa/llm_gateway.hpp"
#include "agriqa/query_analysis.hpp"
#include "agriqa/tools.hpp"
#include "agriqa/vector_retrieval.hpp"

namespace agriqa::agent {

enum class ActionKind { Answer, Search, Retrieve, QueryKG, InvokeTool, Decompose };

std::string_view action_name(ActionKind kind);
std::optional<ActionKind> parse_action_name(std::string_view name);

struct AblationConfig {
  bool rag_enabled = true;
  bool tools_enabled = true;
  bool kg_enabled = true;
  bool search_enabled = true;

  bool permits(ActionKind kind) const;
  friend bool operator==(const AblationConfig&, const AblationConfig&) = default;
};

/// The five ablation rows: "Full", "- RAG", "- Tools", "- AgriKG", "- Search".
std::vector<std::pair<std::string, AblationConfig>> standard_ablations();

struct AgentTrace;

struct AgentStep {
  std::size_t index = 0;
  std::string thought;
  ActionKind action = ActionKind::Answer;
  std::string action_input;
  /// InvokeTool only.
  std::string tool_name;
  tools::ToolArgs tool_args;
  std::string observation;
  bool ok = true;
  /// Sources produced by this step's module call.
  std::vector<std::string> sources;
  /// Decompose only: one nested episode per sub-question.
  std::vector<AgentTrace> children;
};

struct AgentTrace {
  std::string session_id;
  std::string question;
  std::vector<AgentStep> steps;
  std::string final_answer;
  std::vector<std::string> sources;
  AblationConfig ablation;
  bool truncated = false;
  int depth = 0;
};

/// Episode failure; carries the trace up to the failing call.
class EpisodeFailed : public Error {
 public:
  EpisodeFailed(const std::string& message, AgentTrace partial)
      : Error(ErrorCode::EpisodeFailed, message), partial_(std::move(partial)) {}
  const AgentTrace& partial_trace() const { return partial_; }

 private:
  AgentTrace partial_;
};

/// Result of parsing one LLM reply.
struct ParsedAction {
  std::string thought;
  ActionKind kind = ActionKind::Answer;
  std::string input;
  /// Set when the reply named a tool (directly or as InvokeTool's first word).
  std::string tool;
};

/// Line-anchored, case-insensitive "Thought: / Action: / Action Input:"
/// parser. "Final: x" and "Final Answer: x" mean Answer. An action equal to a
/// name in `tool_names` is InvokeTool for that tool.
std::optional<ParsedAction> parse_action(std::string_view reply, const std::set<std::string>& tool_names);

/// Numbered, bulleted, newline- or semicolon-separated list -> at most 4
/// non-empty sub-questions.
std::vector<std::string> parse_subquestions(std::string_view input);

/// Proposal returned by select_action, with tool arguments already bound.
struct Proposal {
  std::string thought;
  ActionKind kind = ActionKind::Answer;
  std::string input;
  std::string tool;
  tools::ToolArgs args;
  std::vector<std::string> sub_questions;
};

/// Key for the re-planning exclusion rule: (action kind, normalized input).
std::string exclusion_key(const Proposal& p);
std::string exclusion_key(const AgentStep& s);

struct AgentConfig {
  std::size_t max_steps = 8;
  std::string provider = "mock";
  double temperature = 0.0;
  int max_tokens = 1024;
  std::size_t retrieval_k = 5;
  double min_score = retrieval::kDefaultMinScore;
  std::size_t context_budget = 512;
  std::size_t fact_budget = 1500;
  std::size_t search_max_results = 5;
  /// Character budget for the evidence block of the synthesis prompt.
  std::size_t evidence_budget = 8000;
};

/// Non-owning views of the shared modules. Any of them may be null; the
/// corresponding action then fails with an observation instead of running.
struct Resources {
  const llm::Gateway* gateway = nullptr;
  const retrieval::VectorIndex* index = nullptr;
  const kg::KnowledgeGraph* graph = nullptr;
  const tools::ToolRegistry* registry = nullptr;
  const tools::SearchConnector* search = nullptr;
  const StopList* stoplist = nullptr;
  const IntentLexicon* lexicon = nullptr;
};

/// ReAct control loop. Stateless between episodes; run_episode may be called
/// concurrently.
class Orchestrator {
 public:
  Orchestrator(Resources resources, AgentConfig config);

  /// Throws Error(InvalidQuery) for a blank question and EpisodeFailed when
  /// the gateway fails.
  AgentTrace run_episode(const std::string& question, const AblationConfig& ablation,
                         const std::string& session_id) const;

  /// Asks the LLM for the next action. Disabled and previously failed
  /// actions are excluded; an invalid reply gets one repair re-prompt.
  /// Throws Error(ParseFailure) when the repaired reply is still unusable.
  Proposal select_action(const AnalyzedQuery& analyzed, const std::vector<AgentStep>& history,
                         const AblationConfig& ablation, int depth = 0) const;

  /// Asks the LLM to split a question. Empty when not decomposable.
  std::vector<std::string> decompose(const std::string& question) const;

  /// One LLM call over question + evidence, followed by a numbered source
  /// list. Throws Error(UpstreamError | ...) from the gateway, or
  /// Error(EpisodeFailed) for an empty reply.
  std::string synthesize_answer(const std::string& question, const std::vector<std::string>& evidence,
                                const std::vector<std::string>& sources) const;

  const AgentConfig& config() const { return config_; }

 private:
  AgentTrace run(const std::string& question, const AblationConfig& ablation, const std::string& session_id,
                 int depth) const;
  AnalyzedQuery analyze_text(std::string_view text) const;
  std::string complete(std::vector<llm::ChatMessage> messages) const;
  std::string system_prompt(const AblationConfig& ablation, int depth,
                            const std::set<std::string>& excluded) const;
  std::optional<Proposal> bind(const ParsedAction& parsed, const AnalyzedQuery& analyzed) const;
  std::string check_allowed(const Proposal& p, const AblationConfig& ablation, int depth,
                            const std::set<std::string>& failed) const;
  void execute(AgentStep& step, const AnalyzedQuery& analyzed, const AblationConfig& ablation,
               const std::string& session_id, int depth) const;

  Resources res_;
  AgentConfig config_;
  std::set<std::string> tool_names_;
};

nlohmann::json to_json(const AgentTrace& trace);
AgentTrace trace_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AblationConfig& a);
AblationConfig ablation_from_json(const nlohmann::json& j, const AblationConfig& defaults = {});

/// Writes `<dir>/<session_id>.json`, with '/' in the id replaced by '_'.
void write_trace(const AgentTrace& trace, const std::string& dir);

/// Action kinds taken anywhere in the trace, including nested episodes.
std::set<ActionKind> actions_taken(const AgentTrace& trace);

}  // namespace agriqa::agent
