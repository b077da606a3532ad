#include "agriqa/agent.hpp"

#include <algorithm>
#include <filesystem>

#include "agriqa/text.hpp"

namespace agriqa::agent {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kDigestLength = 160;

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && text::iequals(s.substr(0, prefix.size()), prefix);
}

std::string collapse_ws(std::string_view s) { return text::join(text::split_whitespace(s), " "); }

// Truncates to at most n code points, appending "..." when cut.
std::string clip(std::string_view s, std::size_t n) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
      if (count == n) return std::string(s.substr(0, i)) + "...";
      ++count;
    }
  }
  return std::string(s);
}

std::string strip_final_prefix(std::string s) {
  auto t = text::trim(s);
  for (std::string_view p : {"final answer:", "final:"}) {
    if (starts_with_ci(t, p)) return text::trim(t.substr(p.size()));
  }
  return t;
}

void push_unique(std::vector<std::string>& out, const std::string& v) {
  if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
}

std::string canonical_args(const tools::ToolArgs& args) {
  std::string out;
  for (const auto& [k, v] : args) {
    if (!out.empty()) out += ";";
    out += k + "=" + collapse_ws(v);
  }
  return out;
}

std::string make_key(ActionKind kind, const std::string& input, const std::string& tool,
                     const tools::ToolArgs& args) {
  std::string key(action_name(kind));
  if (kind == ActionKind::InvokeTool) return key + "|" + tool + "|" + canonical_args(args);
  return key + "|" + text::to_lower(collapse_ws(input));
}

std::string format_step(const AgentStep& s) {
  std::string input = s.action == ActionKind::InvokeTool
                          ? s.tool_name + (s.tool_args.empty() ? "" : " " + canonical_args(s.tool_args))
                          : s.action_input;
  return "Thought: " + s.thought + "\nAction: " + std::string(action_name(s.action)) + "\nAction Input: " + input;
}

std::string format_observation(const AgentStep& s) {
  std::string head = "Observation (" + std::string(action_name(s.action));
  if (s.action == ActionKind::InvokeTool) head += " " + s.tool_name;
  head += s.ok ? ", ok): " : ", failed): ";
  return head + s.observation;
}

// key=value tokens separated by whitespace; the value may itself contain '='.
std::optional<tools::ToolArgs> parse_key_values(std::string_view input) {
  auto tokens = text::split_whitespace(input);
  if (tokens.empty()) return tools::ToolArgs{};
  tools::ToolArgs args;
  for (const auto& tok : tokens) {
    auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) return std::nullopt;
    args[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return args;
}

}  // namespace

std::string_view action_name(ActionKind kind) {
  switch (kind) {
    case ActionKind::Answer: return "Answer";
    case ActionKind::Search: return "Search";
    case ActionKind::Retrieve: return "Retrieve";
    case ActionKind::QueryKG: return "QueryKG";
    case ActionKind::InvokeTool: return "InvokeTool";
    case ActionKind::Decompose: return "Decompose";
  }
  return "Answer";
}

std::optional<ActionKind> parse_action_name(std::string_view name) {
  auto n = text::to_lower(text::trim(name));
  n.erase(std::remove_if(n.begin(), n.end(), [](char c) { return c == '_' || c == ' ' || c == '-'; }), n.end());
  if (n == "answer" || n == "final" || n == "finalanswer" || n == "finish") return ActionKind::Answer;
  if (n == "search" || n == "websearch") return ActionKind::Search;
  if (n == "retrieve" || n == "retrieval" || n == "rag") return ActionKind::Retrieve;
  if (n == "querykg" || n == "kg" || n == "knowledgegraph") return ActionKind::QueryKG;
  if (n == "invoketool" || n == "tool" || n == "usetool") return ActionKind::InvokeTool;
  if (n == "decompose") return ActionKind::Decompose;
  return std::nullopt;
}

bool AblationConfig::permits(ActionKind kind) const {
  switch (kind) {
    case ActionKind::Answer: return true;
    case ActionKind::Decompose: return true;
    case ActionKind::Search: return search_enabled;
    case ActionKind::Retrieve: return rag_enabled;
    case ActionKind::QueryKG: return kg_enabled;
    case ActionKind::InvokeTool: return tools_enabled;
  }
  return false;
}

std::vector<std::pair<std::string, AblationConfig>> standard_ablations() {
  AblationConfig full;
  AblationConfig no_rag = full;
  no_rag.rag_enabled = false;
  AblationConfig no_tools = full;
  no_tools.tools_enabled = false;
  AblationConfig no_kg = full;
  no_kg.kg_enabled = false;
  AblationConfig no_search = full;
  no_search.search_enabled = false;
  return {{"Full", full}, {"- RAG", no_rag}, {"- Tools", no_tools}, {"- AgriKG", no_kg}, {"- Search", no_search}};
}

std::optional<ParsedAction> parse_action(std::string_view reply, const std::set<std::string>& tool_names) {
  auto lines = text::split(reply, '\n');
  ParsedAction out;
  std::optional<std::string> action;
  bool in_thought = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = text::trim(lines[i]);
    if (starts_with_ci(line, "final answer:") || starts_with_ci(line, "final:")) {
      auto colon = line.find(':');
      std::vector<std::string> rest{text::trim(line.substr(colon + 1))};
      for (std::size_t j = i + 1; j < lines.size(); ++j) rest.push_back(lines[j]);
      out.kind = ActionKind::Answer;
      out.input = text::trim(text::join(rest, "\n"));
      return out;
    }
    if (starts_with_ci(line, "action input:")) {
      std::vector<std::string> rest{text::trim(line.substr(13))};
      for (std::size_t j = i + 1; j < lines.size(); ++j) rest.push_back(lines[j]);
      out.input = text::trim(text::join(rest, "\n"));
      break;
    }
    if (starts_with_ci(line, "action:")) {
      action = text::trim(line.substr(7));
      in_thought = false;
      continue;
    }
    if (starts_with_ci(line, "thought:")) {
      out.thought = text::trim(line.substr(8));
      in_thought = true;
      continue;
    }
    if (in_thought && !line.empty()) out.thought += " " + line;
  }
  if (!action) return std::nullopt;

  auto name = text::trim(*action);
  while (!name.empty() && (name.back() == '.' || name.back() == ':')) name.pop_back();
  auto lowered = text::to_lower(name);
  if (tool_names.count(lowered) > 0) {
    out.kind = ActionKind::InvokeTool;
    out.tool = lowered;
    return out;
  }
  auto kind = parse_action_name(name);
  if (!kind) return std::nullopt;
  out.kind = *kind;
  if (out.kind == ActionKind::InvokeTool && !out.input.empty() && out.input[0] != '{') {
    // "tool_name rest" or "tool_name: rest".
    auto tokens = text::split_whitespace(out.input);
    auto first = tokens.front();
    if (!first.empty() && first.back() == ':') first.pop_back();
    out.tool = text::to_lower(first);
    auto pos = out.input.find(tokens.front()) + tokens.front().size();
    out.input = text::trim(out.input.substr(pos));
  }
  return out;
}

std::vector<std::string> parse_subquestions(std::string_view input) {
  std::vector<std::string> parts;
  auto lines = text::split(input, '\n');
  std::vector<std::string> nonblank;
  for (const auto& l : lines) {
    if (!text::trim(l).empty()) nonblank.push_back(l);
  }
  if (nonblank.size() == 1) nonblank = text::split(nonblank.front(), ';');
  for (auto item : nonblank) {
    item = text::trim(item);
    // Strip list markers: "1.", "2)", "-", "*".
    std::size_t p = 0;
    while (p < item.size() && std::isdigit(static_cast<unsigned char>(item[p]))) ++p;
    if (p > 0 && p < item.size() && (item[p] == '.' || item[p] == ')')) {
      item = text::trim(item.substr(p + 1));
    } else if (!item.empty() && (item[0] == '-' || item[0] == '*')) {
      item = text::trim(item.substr(1));
    }
    if (!item.empty()) parts.push_back(item);
    if (parts.size() == 4) break;
  }
  return parts;
}

std::string exclusion_key(const Proposal& p) { return make_key(p.kind, p.input, p.tool, p.args); }

std::string exclusion_key(const AgentStep& s) {
  return make_key(s.action, s.action_input, s.tool_name, s.tool_args);
}

Orchestrator::Orchestrator(Resources resources, AgentConfig config) : res_(resources), config_(std::move(config)) {
  if (config_.max_steps == 0) throw Error(ErrorCode::InvalidConfig, "max_steps must be positive");
  if (res_.registry != nullptr) {
    for (const auto& spec : res_.registry->list_tools()) tool_names_.insert(spec.name);
  }
}

AnalyzedQuery Orchestrator::analyze_text(std::string_view text) const {
  const auto& stop = res_.stoplist != nullptr ? *res_.stoplist : StopList::builtin();
  const auto& lex = res_.lexicon != nullptr ? *res_.lexicon : IntentLexicon::builtin();
  return analyze(text, stop, lex);
}

std::string Orchestrator::complete(std::vector<llm::ChatMessage> messages) const {
  if (res_.gateway == nullptr) throw Error(ErrorCode::ProviderNotFound, "no LLM gateway configured");
  for (auto& m : messages) {
    if (m.content.size() > llm::kDefaultMaxContent) {
      m.content = clip(m.content, llm::kDefaultMaxContent / 4);
    }
  }
  llm::CompletionRequest req;
  req.messages = std::move(messages);
  req.temperature = config_.temperature;
  req.max_tokens = config_.max_tokens;
  req.provider = config_.provider;
  return res_.gateway->complete(req);
}

std::string Orchestrator::system_prompt(const AblationConfig& ablation, int depth,
                                        const std::set<std::string>& excluded) const {
  std::string s =
      "You are an agricultural question-answering agent. Work step by step. Reply with exactly:\n"
      "Thought: <reasoning>\nAction: <action>\nAction Input: <input>\n"
      "Available actions:\n- Answer: finish with a final answer\n";
  if (ablation.search_enabled) s += "- Search: query web search for recent information\n";
  if (ablation.rag_enabled) s += "- Retrieve: search the agricultural literature base\n";
  if (ablation.kg_enabled) s += "- QueryKG: look up crop, climate, pest and region facts\n";
  if (ablation.tools_enabled && res_.registry != nullptr) {
    s += "- InvokeTool: call a domain model, input '<tool> key=value ...'. Tools:\n";
    for (const auto& spec : res_.registry->list_tools()) {
      s += "  * " + spec.name + ": " + spec.description + " Fields:";
      for (const auto& f : spec.input_schema) {
        s += " " + f.name + "(" + std::string(tools::field_type_name(f.type)) + (f.required ? "" : ", optional") + ")";
      }
      s += "\n";
    }
  }
  if (depth == 0) s += "- Decompose: split the question into at most 4 sub-questions, one per line\n";
  if (!excluded.empty()) {
    s += "These action/input pairs already failed and must not be repeated:\n";
    for (const auto& k : excluded) s += "- " + k + "\n";
  }
  return s;
}

std::optional<Proposal> Orchestrator::bind(const ParsedAction& parsed, const AnalyzedQuery& analyzed) const {
  Proposal p;
  p.thought = parsed.thought;
  p.kind = parsed.kind;
  p.input = parsed.input;
  const auto question = text::trim(analyzed.raw_text);

  switch (p.kind) {
    case ActionKind::Answer:
      return p;
    case ActionKind::Decompose:
      p.sub_questions = parse_subquestions(p.input);
      if (!p.sub_questions.empty()) p.input = text::join(p.sub_questions, "\n");
      return p;
    case ActionKind::Search:
    case ActionKind::Retrieve:
    case ActionKind::QueryKG:
      if (text::trim(p.input).empty()) p.input = question;
      return p;
    case ActionKind::InvokeTool:
      break;
  }

  p.tool = parsed.tool;
  auto raw = text::trim(p.input);
  if (!raw.empty() && raw[0] == '{') {
    auto j = json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    if (p.tool.empty() && j.contains("tool") && j["tool"].is_string()) p.tool = j["tool"].get<std::string>();
    const json& fields = j.contains("args") && j["args"].is_object() ? j["args"] : j;
    for (auto it = fields.begin(); it != fields.end(); ++it) {
      if (&fields == &j && it.key() == "tool") continue;
      p.args[it.key()] = it->is_string() ? it->get<std::string>() : it->dump();
    }
  } else if (auto kv = parse_key_values(raw)) {
    p.args = std::move(*kv);
  } else if (res_.registry != nullptr && res_.registry->has(p.tool)) {
    auto spec = res_.registry->spec(p.tool);
    const tools::FieldSpec* target = nullptr;
    std::size_t required = 0;
    for (const auto& f : spec.input_schema) {
      if (f.required) {
        ++required;
        target = &f;
      }
    }
    if (required != 1) return std::nullopt;
    p.args[target->name] = raw;
  }
  if (p.tool.empty()) return std::nullopt;

  // Fill unbound fields from the analyzed question.
  if (res_.registry != nullptr && res_.registry->has(p.tool)) {
    auto dna = analyzed.dna_sequences();
    for (const auto& f : res_.registry->spec(p.tool).input_schema) {
      if (p.args.count(f.name) > 0) continue;
      if (f.type == tools::FieldType::DnaSequence && !dna.empty()) {
        p.args[f.name] = text::to_upper(dna.front());
      } else if (f.type == tools::FieldType::Text && f.name == "query") {
        p.args[f.name] = question;
      }
    }
  }
  p.input = p.tool + (p.args.empty() ? "" : " " + canonical_args(p.args));
  return p;
}

std::string Orchestrator::check_allowed(const Proposal& p, const AblationConfig& ablation, int depth,
                                        const std::set<std::string>& failed) const {
  if (!ablation.permits(p.kind)) return "action " + std::string(action_name(p.kind)) + " is disabled";
  if (p.kind == ActionKind::Decompose && depth > 0) return "Decompose is not available for a sub-question";
  if (failed.count(exclusion_key(p)) > 0) {
    return "action " + std::string(action_name(p.kind)) + " with the same input already failed";
  }
  return {};
}

Proposal Orchestrator::select_action(const AnalyzedQuery& analyzed, const std::vector<AgentStep>& history,
                                     const AblationConfig& ablation, int depth) const {
  std::set<std::string> failed;
  for (const auto& s : history) {
    if (!s.ok) failed.insert(exclusion_key(s));
  }

  std::vector<llm::ChatMessage> messages{{llm::Role::System, system_prompt(ablation, depth, failed)},
                                         {llm::Role::User, analyzed.prompt}};
  for (const auto& s : history) {
    messages.push_back({llm::Role::Assistant, format_step(s)});
    messages.push_back({llm::Role::ToolResult, format_observation(s)});
  }

  std::string reason;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto reply = complete(messages);
    auto parsed = parse_action(reply, tool_names_);
    std::optional<Proposal> proposal;
    if (parsed) proposal = bind(*parsed, analyzed);
    if (!parsed) {
      reason = "the reply is not in the Thought/Action/Action Input format";
    } else if (!proposal) {
      reason = "the action input could not be bound to tool arguments";
    } else {
      reason = check_allowed(*proposal, ablation, depth, failed);
    }
    if (reason.empty()) return *proposal;

    messages.push_back({llm::Role::Assistant, reply});
    std::string allowed = "Answer";
    for (auto k : {ActionKind::Search, ActionKind::Retrieve, ActionKind::QueryKG, ActionKind::InvokeTool}) {
      if (ablation.permits(k)) allowed += ", " + std::string(action_name(k));
    }
    if (depth == 0) allowed += ", Decompose";
    messages.push_back({llm::Role::User, "Your last reply could not be used: " + reason + ". Allowed actions: " +
                                             allowed + ". Reply again using the format Thought / Action / Action Input."});
  }
  throw Error(ErrorCode::ParseFailure, reason);
}

std::vector<std::string> Orchestrator::decompose(const std::string& question) const {
  std::vector<llm::ChatMessage> messages{
      {llm::Role::System, "Split agricultural questions into independent sub-questions."},
      {llm::Role::User, "Decompose into at most 4 sub-questions, one per line:\n" + question}};
  try {
    return parse_subquestions(strip_final_prefix(complete(messages)));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseFailure) return {};
    throw;
  }
}

std::string Orchestrator::synthesize_answer(const std::string& question, const std::vector<std::string>& evidence,
                                            const std::vector<std::string>& sources) const {
  std::string prompt = "Compose the final answer to the question using the evidence.\nQuestion: " + question + "\n";
  if (evidence.empty()) {
    prompt += "No external evidence was gathered; answer from general knowledge.\n";
  } else {
    prompt += "Evidence:\n";
    std::size_t used = 0;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
      auto item = "[" + std::to_string(i + 1) + "] " + evidence[i] + "\n";
      if (used + item.size() > config_.evidence_budget) {
        prompt += clip(item, config_.evidence_budget > used ? config_.evidence_budget - used : 0) + "\n";
        break;
      }
      prompt += item;
      used += item.size();
    }
    prompt += "Cite evidence by its number in square brackets.\n";
  }
  std::vector<llm::ChatMessage> messages{
      {llm::Role::System, "You write concise, accurate answers for farmers and agronomists."},
      {llm::Role::User, prompt}};
  auto answer = strip_final_prefix(complete(messages));
  if (answer.empty()) throw Error(ErrorCode::EpisodeFailed, "the model returned an empty answer");

  if (!evidence.empty()) {
    answer += "\n\nEvidence:";
    for (std::size_t i = 0; i < evidence.size(); ++i) {
      answer += "\n(" + std::to_string(i + 1) + ") " + clip(collapse_ws(evidence[i]), kDigestLength);
    }
  }
  if (!sources.empty()) {
    answer += "\n\nSources:";
    for (std::size_t i = 0; i < sources.size(); ++i) {
      answer += "\n[" + std::to_string(i + 1) + "] " + sources[i];
    }
  }
  return answer;
}

void Orchestrator::execute(AgentStep& step, const AnalyzedQuery& analyzed, const AblationConfig& ablation,
                           const std::string& session_id, int depth) const {
  auto fail = [&](std::string why) {
    step.ok = false;
    step.observation = std::move(why);
  };
  try {
    switch (step.action) {
      case ActionKind::Search: {
        if (res_.search == nullptr) return fail("search connector is not configured");
        auto results = tools::web_search(*res_.search, step.action_input, config_.search_max_results);
        if (results.empty()) return fail("no search results");
        step.observation = tools::render_search_results(results);
        for (const auto& r : results) push_unique(step.sources, r.url);
        break;
      }
      case ActionKind::Retrieve: {
        if (res_.index == nullptr) return fail("document index is not configured");
        auto hits = res_.index->search(step.action_input, config_.retrieval_k, config_.min_score);
        if (hits.empty()) return fail("no relevant documents");
        step.observation = retrieval::assemble_context(hits, config_.context_budget);
        if (step.observation.empty()) return fail("no retrieved chunk fits the context budget");
        std::size_t used = 0;
        for (const auto& h : hits) {
          if (used + h.chunk.token_count > config_.context_budget) break;
          used += h.chunk.token_count;
          push_unique(step.sources, retrieval::citation(h.chunk));
        }
        break;
      }
      case ActionKind::QueryKG: {
        if (res_.graph == nullptr) return fail("knowledge graph is not configured");
        auto keywords = analyze_text(step.action_input).keywords;
        auto entities = res_.graph->link_entities(keywords);
        if (entities.empty()) return fail("no knowledge-graph entity matches the query terms");
        std::set<kg::Triple> facts;
        for (const auto& e : entities) {
          for (auto& t : res_.graph->neighborhood(e.id, 1)) facts.insert(std::move(t));
          step.sources.push_back("kg:" + e.id);
        }
        step.observation = kg::render_facts({facts.begin(), facts.end()}, config_.fact_budget);
        if (step.observation.empty()) return fail("linked entities have no facts");
        break;
      }
      case ActionKind::InvokeTool: {
        if (res_.registry == nullptr) return fail("tool registry is not configured");
        auto result = res_.registry->invoke(step.tool_name, step.tool_args);
        if (!result.ok) return fail("error: " + result.error_detail);
        step.observation = result.payload.empty() ? "(empty result)" : result.payload;
        step.sources.push_back("tool:" + step.tool_name);
        break;
      }
      case ActionKind::Decompose: {
        std::vector<std::string> subs = parse_subquestions(step.action_input);
        if (subs.empty()) subs = decompose(analyzed.raw_text);
        if (subs.empty()) return fail("the question could not be decomposed");
        bool any_ok = false;
        std::string obs;
        for (std::size_t i = 0; i < subs.size(); ++i) {
          auto child_id = session_id + "/" + std::to_string(step.index) + "." + std::to_string(i + 1);
          AgentTrace child;
          bool ok = true;
          try {
            child = run(subs[i], ablation, child_id, depth + 1);
          } catch (const EpisodeFailed& e) {
            child = e.partial_trace();
            ok = false;
          }
          if (!obs.empty()) obs += "\n\n";
          obs += "Sub-question " + std::to_string(i + 1) + ": " + subs[i] + "\n";
          obs += ok ? "Answer: " + child.final_answer : std::string("Answer: (failed)");
          if (ok) {
            any_ok = true;
            for (const auto& s : child.sources) push_unique(step.sources, s);
          }
          step.children.push_back(std::move(child));
        }
        step.observation = obs;
        step.ok = any_ok;
        break;
      }
      case ActionKind::Answer:
        break;
    }
  } catch (const EpisodeFailed&) {
    throw;
  } catch (const Error& e) {
    fail("error: " + std::string(error_code_name(e.code())) + ": " + e.what());
  } catch (const std::exception& e) {
    fail(std::string("error: ") + e.what());
  }
}

AgentTrace Orchestrator::run_episode(const std::string& question, const AblationConfig& ablation,
                                     const std::string& session_id) const {
  return run(question, ablation, session_id, 0);
}

AgentTrace Orchestrator::run(const std::string& question, const AblationConfig& ablation,
                             const std::string& session_id, int depth) const {
  auto analyzed = analyze_text(question);

  AgentTrace trace;
  trace.session_id = session_id;
  trace.question = question;
  trace.ablation = ablation;
  trace.depth = depth;

  while (true) {
    Proposal proposal;
    if (trace.steps.size() + 1 >= config_.max_steps) {
      proposal.kind = ActionKind::Answer;
      proposal.thought = "Step limit reached; answering with the evidence gathered so far.";
      trace.truncated = true;
    } else {
      try {
        proposal = select_action(analyzed, trace.steps, ablation, depth);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ParseFailure) throw EpisodeFailed(e.what(), trace);
        proposal = Proposal{};
        proposal.kind = ActionKind::Answer;
        proposal.thought = std::string("No usable action (") + e.what() + "); answering directly.";
      }
    }

    AgentStep step;
    step.index = trace.steps.size();
    step.thought = proposal.thought;
    step.action = proposal.kind;
    step.action_input = proposal.input;
    step.tool_name = proposal.tool;
    step.tool_args = proposal.args;

    if (proposal.kind == ActionKind::Answer) {
      std::vector<std::string> evidence;
      std::vector<std::string> sources;
      for (const auto& s : trace.steps) {
        if (!s.ok) continue;
        evidence.push_back(s.observation);
        for (const auto& src : s.sources) push_unique(sources, src);
      }
      trace.steps.push_back(std::move(step));
      try {
        trace.final_answer = synthesize_answer(question, evidence, sources);
      } catch (const Error& e) {
        throw EpisodeFailed(e.what(), trace);
      }
      trace.sources = std::move(sources);
      return trace;
    }

    execute(step, analyzed, ablation, session_id, depth);
    trace.steps.push_back(std::move(step));
  }
}

json to_json(const AblationConfig& a) {
  return {{"rag_enabled", a.rag_enabled},
          {"tools_enabled", a.tools_enabled},
          {"kg_enabled", a.kg_enabled},
          {"search_enabled", a.search_enabled}};
}

AblationConfig ablation_from_json(const json& j, const AblationConfig& defaults) {
  AblationConfig a = defaults;
  if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "ablation must be an object");
  auto get = [&](const char* key, bool& field) {
    if (!j.contains(key)) return;
    if (!j[key].is_boolean()) throw Error(ErrorCode::InvalidInput, std::string(key) + " must be a boolean");
    field = j[key].get<bool>();
  };
  get("rag_enabled", a.rag_enabled);
  get("tools_enabled", a.tools_enabled);
  get("kg_enabled", a.kg_enabled);
  get("search_enabled", a.search_enabled);
  return a;
}

json to_json(const AgentTrace& trace) {
  json steps = json::array();
  for (const auto& s : trace.steps) {
    json step{{"index", s.index},
              {"thought", s.thought},
              {"action", action_name(s.action)},
              {"action_input", s.action_input},
              {"observation", s.observation},
              {"ok", s.ok},
              {"sources", s.sources}};
    if (s.action == ActionKind::InvokeTool) {
      step["tool"] = s.tool_name;
      step["args"] = s.tool_args;
    }
    if (!s.children.empty()) {
      json children = json::array();
      for (const auto& c : s.children) children.push_back(to_json(c));
      step["children"] = std::move(children);
    }
    steps.push_back(std::move(step));
  }
  return {{"session_id", trace.session_id},
          {"question", trace.question},
          {"steps", std::move(steps)},
          {"final_answer", trace.final_answer},
          {"sources", trace.sources},
          {"ablation", to_json(trace.ablation)},
          {"truncated", trace.truncated},
          {"depth", trace.depth}};
}

AgentTrace trace_from_json(const json& j) {
  try {
    AgentTrace t;
    t.session_id = j.at("session_id").get<std::string>();
    t.question = j.at("question").get<std::string>();
    t.final_answer = j.at("final_answer").get<std::string>();
    t.sources = j.at("sources").get<std::vector<std::string>>();
    t.ablation = ablation_from_json(j.at("ablation"));
    t.truncated = j.value("truncated", false);
    t.depth = j.value("depth", 0);
    for (const auto& js : j.at("steps")) {
      AgentStep s;
      s.index = js.at("index").get<std::size_t>();
      s.thought = js.at("thought").get<std::string>();
      auto kind = parse_action_name(js.at("action").get<std::string>());
      if (!kind) throw Error(ErrorCode::InvalidInput, "unknown action in trace");
      s.action = *kind;
      s.action_input = js.at("action_input").get<std::string>();
      s.observation = js.at("observation").get<std::string>();
      s.ok = js.at("ok").get<bool>();
      s.sources = js.at("sources").get<std::vector<std::string>>();
      s.tool_name = js.value("tool", std::string());
      if (js.contains("args")) s.tool_args = js["args"].get<tools::ToolArgs>();
      if (js.contains("children")) {
        for (const auto& c : js["children"]) s.children.push_back(trace_from_json(c));
      }
      t.steps.push_back(std::move(s));
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("malformed trace: ") + e.what());
  }
}

void write_trace(const AgentTrace& trace, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::StorageError, "cannot create " + dir + ": " + ec.message());
  std::string name = trace.session_id.empty() ? "episode" : trace.session_id;
  for (char& c : name) {
    if (c == '/' || c == '\\' || c == ':') c = '_';
  }
  text::write_file((fs::path(dir) / (name + ".json")).string(), to_json(trace).dump(2) + "\n");
}

std::set<ActionKind> actions_taken(const AgentTrace& trace) {
  std::set<ActionKind> out;
  for (const auto& s : trace.steps) {
    out.insert(s.action);
    for (const auto& c : s.children) {
      auto nested = actions_taken(c);
      out.insert(nested.begin(), nested.end());
    }
  }
  return out;
}

}  // namespace agriqa::agent
