#include "agriqa/query_analysis.hpp"

#include <algorithm>

#include "agriqa/error.hpp"
#include "agriqa/text.hpp"
#include "builtin_data.hpp"

namespace agriqa {

namespace {

LexiconCategory parse_category(std::string_view name, std::size_t line_no) {
  auto lower = text::to_lower(text::trim(name));
  if (lower == "action") return LexiconCategory::Action;
  if (lower == "tool") return LexiconCategory::Tool;
  if (lower == "kg") return LexiconCategory::KnowledgeGraph;
  if (lower == "retrieval") return LexiconCategory::Retrieval;
  if (lower == "search") return LexiconCategory::Search;
  throw Error(ErrorCode::InvalidConfig,
              "lexicon line " + std::to_string(line_no) + ": unknown category '" + lower + "'");
}

void push_unique(std::vector<std::string>& out, const std::string& value) {
  if (std::find(out.begin(), out.end(), value) == out.end()) out.push_back(value);
}

// Slot names found in `{...}` placeholders, in pattern order.
std::vector<std::string> placeholders(std::string_view pattern) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while ((pos = pattern.find('{', pos)) != std::string_view::npos) {
    auto close = pattern.find('}', pos + 1);
    if (close == std::string_view::npos) break;
    auto name = pattern.substr(pos + 1, close - pos - 1);
    if (!name.empty() && name.find('{') == std::string_view::npos) {
      names.emplace_back(name);
    }
    pos = close + 1;
  }
  return names;
}

const PromptTemplate& template_for(Intent intent) {
  static const PromptTemplate generic = PromptTemplate::from_pattern(
      "generic", "Answer the agricultural question using general knowledge.\nKey terms: {keywords}\nQuestion: {question}");
  static const PromptTemplate search = PromptTemplate::from_pattern(
      "search", "Find the latest information from web search on: {keywords}\nRequested actions: {actions}\nQuestion: {question}");
  static const PromptTemplate retrieval = PromptTemplate::from_pattern(
      "retrieval", "Consult the agricultural literature base about: {keywords}\nRequested actions: {actions}\nQuestion: {question}");
  static const PromptTemplate kg = PromptTemplate::from_pattern(
      "knowledge_graph", "Look up structured facts in the knowledge graph for: {keywords}\nRequested actions: {actions}\nQuestion: {question}");
  static const PromptTemplate tool = PromptTemplate::from_pattern(
      "domain_tool", "Use a domain prediction model to {actions} for: {keywords}\nQuestion: {question}");
  switch (intent) {
    case Intent::Generic: return generic;
    case Intent::Search: return search;
    case Intent::Retrieval: return retrieval;
    case Intent::KnowledgeGraph: return kg;
    case Intent::DomainTool: return tool;
  }
  return generic;
}

}  // namespace

std::string_view intent_name(Intent intent) {
  switch (intent) {
    case Intent::Generic: return "Generic";
    case Intent::Search: return "Search";
    case Intent::Retrieval: return "Retrieval";
    case Intent::KnowledgeGraph: return "KnowledgeGraph";
    case Intent::DomainTool: return "DomainTool";
  }
  return "Generic";
}

IntentLexicon IntentLexicon::parse(std::string_view contents) {
  IntentLexicon lex;
  auto lines = text::split(contents, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = text::trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    auto fields = text::split(line, '\t');
    if (fields.size() != 2) {
      throw Error(ErrorCode::InvalidConfig,
                  "lexicon line " + std::to_string(i + 1) + ": expected term<TAB>category");
    }
    lex.add(text::to_lower(text::trim(fields[0])), parse_category(fields[1], i + 1));
  }
  return lex;
}

IntentLexicon IntentLexicon::from_file(const std::string& path) {
  return parse(text::read_file(path));
}

const IntentLexicon& IntentLexicon::builtin() {
  static const IntentLexicon lex = parse(builtin::kIntentLexicon);
  return lex;
}

void IntentLexicon::add(std::string term, LexiconCategory category) {
  terms_[std::move(term)].insert(category);
}

bool IntentLexicon::has(std::string_view term, LexiconCategory category) const {
  auto it = terms_.find(std::string(term));
  return it != terms_.end() && it->second.count(category) > 0;
}

StopList StopList::parse(std::string_view contents) {
  std::set<std::string> words;
  for (const auto& raw : text::split(contents, '\n')) {
    auto word = text::to_lower(text::trim(raw));
    if (!word.empty() && word[0] != '#') words.insert(std::move(word));
  }
  return StopList(std::move(words));
}

StopList StopList::from_file(const std::string& path) { return parse(text::read_file(path)); }

const StopList& StopList::builtin() {
  static const StopList list = parse(builtin::kStopList);
  return list;
}

std::vector<std::string> AnalyzedQuery::dna_sequences() const {
  std::vector<std::string> out;
  for (const auto& k : keywords) {
    if (text::is_dna_like(k)) out.push_back(k);
  }
  return out;
}

PromptTemplate::PromptTemplate(std::string name, std::string pattern,
                               std::vector<std::string> required_slots)
    : name_(std::move(name)), pattern_(std::move(pattern)), required_slots_(std::move(required_slots)) {
  auto found = placeholders(pattern_);
  for (const auto& slot : required_slots_) {
    auto n = std::count(found.begin(), found.end(), slot);
    if (n != 1) {
      throw Error(ErrorCode::InvalidInput, "template '" + name_ + "': slot '" + slot +
                                               "' must appear exactly once, found " + std::to_string(n));
    }
  }
}

PromptTemplate PromptTemplate::from_pattern(std::string name, std::string pattern) {
  std::vector<std::string> slots;
  for (auto& s : placeholders(pattern)) push_unique(slots, s);
  return PromptTemplate(std::move(name), std::move(pattern), std::move(slots));
}

std::string render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& slots) {
  for (const auto& slot : tmpl.required_slots()) {
    if (slots.find(slot) == slots.end()) throw Error(ErrorCode::MissingSlot, slot);
  }
  const auto& pattern = tmpl.pattern();
  std::string out;
  out.reserve(pattern.size());
  std::size_t pos = 0;
  while (pos < pattern.size()) {
    auto open = pattern.find('{', pos);
    if (open == std::string::npos) {
      out.append(pattern, pos);
      break;
    }
    auto close = pattern.find('}', open + 1);
    if (close == std::string::npos) {
      out.append(pattern, pos);
      break;
    }
    out.append(pattern, pos, open - pos);
    auto name = pattern.substr(open + 1, close - open - 1);
    auto it = slots.find(name);
    if (it != slots.end()) {
      out.append(it->second);
    } else {
      out.append(pattern, open, close - open + 1);
    }
    pos = close + 1;
  }
  return out;
}

std::vector<std::string> query_tokens(std::string_view question) {
  // word_tokens already keeps alphanumeric runs whole, so DNA runs survive as
  // single tokens.
  return text::word_tokens(question);
}

AnalyzedQuery analyze(std::string_view question, const StopList& stoplist, const IntentLexicon& lexicon) {
  auto trimmed = text::trim(question);
  if (trimmed.empty()) throw Error(ErrorCode::InvalidQuery, "question is empty");

  AnalyzedQuery q;
  q.raw_text = std::string(question);

  bool tool = false, kg = false, retrieval = false, search = false;
  for (const auto& tok : query_tokens(trimmed)) {
    if (stoplist.contains(tok)) continue;
    if (lexicon.is_action(tok)) {
      push_unique(q.action_words, tok);
    } else {
      push_unique(q.keywords, tok);
    }
    tool = tool || lexicon.has(tok, LexiconCategory::Tool) || text::is_dna_like(tok);
    kg = kg || lexicon.has(tok, LexiconCategory::KnowledgeGraph);
    retrieval = retrieval || lexicon.has(tok, LexiconCategory::Retrieval);
    search = search || lexicon.has(tok, LexiconCategory::Search);
  }

  if (tool) {
    q.intent = Intent::DomainTool;
  } else if (kg) {
    q.intent = Intent::KnowledgeGraph;
  } else if (retrieval) {
    q.intent = Intent::Retrieval;
  } else if (search) {
    q.intent = Intent::Search;
  } else {
    q.intent = Intent::Generic;
  }

  std::map<std::string, std::string> slots{
      {"question", trimmed},
      {"keywords", q.keywords.empty() ? std::string("(none)") : text::join(q.keywords, ", ")},
      {"actions", q.action_words.empty() ? std::string("answer") : text::join(q.action_words, ", ")},
  };
  q.prompt = render_prompt(template_for(q.intent), slots);
  return q;
}

}  // namespace agriqa
