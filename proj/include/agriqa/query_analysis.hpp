#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace agriqa {

enum class Intent { Generic, Search, Retrieval, KnowledgeGraph, DomainTool };

std::string_view intent_name(Intent intent);

/// Lexicon categories. A term may belong to several categories.
enum class LexiconCategory { Action, Tool, KnowledgeGraph, Retrieval, Search };

/// Term -> categories map loaded from "term<TAB>category" lines.
class IntentLexicon {
 public:
  IntentLexicon() = default;

  static IntentLexicon from_file(const std::string& path);
  static IntentLexicon parse(std::string_view contents);
  /// Agricultural default shipped with the library.
  static const IntentLexicon& builtin();

  void add(std::string term, LexiconCategory category);
  bool has(std::string_view term, LexiconCategory category) const;
  bool is_action(std::string_view term) const { return has(term, LexiconCategory::Action); }
  std::size_t size() const { return terms_.size(); }

 private:
  std::unordered_map<std::string, std::set<LexiconCategory>> terms_;
};

class StopList {
 public:
  StopList() = default;
  explicit StopList(std::set<std::string> words) : words_(std::move(words)) {}

  static StopList from_file(const std::string& path);
  static StopList parse(std::string_view contents);
  static const StopList& builtin();

  bool contains(std::string_view word) const { return words_.count(std::string(word)) > 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::set<std::string> words_;
};

struct AnalyzedQuery {
  std::string raw_text;
  std::vector<std::string> keywords;
  std::vector<std::string> action_words;
  Intent intent = Intent::Generic;
  std::string prompt;

  /// Keywords that look like DNA sequences (runs of ACGT, length >= 8).
  std::vector<std::string> dna_sequences() const;
};

class PromptTemplate {
 public:
  /// Placeholders are written `{slot}`. Throws Error(InvalidInput) if a
  /// required slot does not appear exactly once in the pattern.
  PromptTemplate(std::string name, std::string pattern, std::vector<std::string> required_slots);

  /// Required slots are inferred from the pattern's placeholders.
  static PromptTemplate from_pattern(std::string name, std::string pattern);

  const std::string& name() const { return name_; }
  const std::string& pattern() const { return pattern_; }
  const std::vector<std::string>& required_slots() const { return required_slots_; }

 private:
  std::string name_;
  std::string pattern_;
  std::vector<std::string> required_slots_;
};

/// Replaces every `{slot}` in the template. Throws Error(MissingSlot).
std::string render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& slots);

/// Rule-based analysis. Throws Error(InvalidQuery) on a blank question.
AnalyzedQuery analyze(std::string_view question, const StopList& stoplist, const IntentLexicon& lexicon);

inline AnalyzedQuery analyze(std::string_view question) {
  return analyze(question, StopList::builtin(), IntentLexicon::builtin());
}

/// Query tokens: word tokens, with DNA-like runs kept whole.
std::vector<std::string> query_tokens(std::string_view question);

}  // namespace agriqa
