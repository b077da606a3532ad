#pragma once

#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace agriqa::tools {

enum class OutputKind { Text, Number, Table };
enum class FieldType { Text, DnaSequence, NumberList, TraitMap };

std::string_view output_kind_name(OutputKind kind);
std::string_view field_type_name(FieldType type);

struct FieldSpec {
  std::string name;
  FieldType type = FieldType::Text;
  bool required = true;
};

struct ToolSpec {
  std::string name;
  std::string description;
  std::vector<FieldSpec> input_schema;
  OutputKind output_kind = OutputKind::Text;
};

struct ToolResult {
  std::string tool_name;
  bool ok = false;
  std::string payload;
  std::string error_detail;
};

using ToolArgs = std::map<std::string, std::string>;
using ToolHandler = std::function<std::string(const ToolArgs&)>;

/// Empty string when the value is acceptable, otherwise the reason.
std::string validate_field(const FieldSpec& field, std::string_view value);

class ToolRegistry {
 public:
  ToolRegistry() = default;
  ToolRegistry(const ToolRegistry&) = delete;
  ToolRegistry& operator=(const ToolRegistry&) = delete;

  /// Throws Error(DuplicateTool), or Error(InvalidInput) for a malformed
  /// spec (name not lowercase snake case, empty description).
  void register_tool(ToolSpec spec, ToolHandler handler);

  /// Validates args, runs the handler and folds every failure into an
  /// ok=false result. Throws Error(ToolNotFound) only.
  ToolResult invoke(const std::string& name, const ToolArgs& args) const;

  /// Registration order.
  std::vector<ToolSpec> list_tools() const;
  bool has(const std::string& name) const;
  /// Throws Error(ToolNotFound).
  ToolSpec spec(const std::string& name) const;

 private:
  struct Entry {
    ToolSpec spec;
    ToolHandler handler;
  };
  mutable std::shared_mutex mu_;
  std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Surrogate predictors. These stand in for trained models and keep the same
// call shape; their numeric scale is arbitrary.

/// enrichment = 4*gc - 3*gc^2 + 0.5*cpg, where gc is the G+C fraction and cpg
/// the number of "CG" dinucleotides divided by (length - 1). Case-insensitive.
/// Throws Error(InvalidSequence) for characters outside ACGT or length < 8.
double predict_promoter_enrichment(std::string_view sequence);

struct PhenotypeCoefficients {
  std::vector<double> markers;
  std::map<std::string, double> environment;
  double intercept = 0.0;
};

/// Linear phenotype surrogate: value = intercept + markers . coef +
/// sum(env[trait] * coef[trait]).
class PhenotypeModel {
 public:
  /// Lines "phenotype<TAB>coefficient list<TAB>intercept"; the list is
  /// comma-separated, bare numbers are marker coefficients in order and
  /// `trait=value` entries are environment coefficients.
  static PhenotypeModel parse(std::string_view contents);
  static PhenotypeModel from_file(const std::string& path);
  static const PhenotypeModel& builtin();

  /// Throws Error(InvalidInput) for non-finite values, an empty marker list,
  /// or more markers than coefficients.
  std::map<std::string, double> predict(const std::vector<double>& markers,
                                         const std::map<std::string, double>& environment) const;

  const std::map<std::string, PhenotypeCoefficients>& phenotypes() const { return phenotypes_; }

 private:
  std::map<std::string, PhenotypeCoefficients> phenotypes_;
};

std::vector<double> parse_number_list(std::string_view s);
std::map<std::string, double> parse_trait_map(std::string_view s);

// ---------------------------------------------------------------------------
// Web search.

struct SearchResult {
  std::string title;
  std::string snippet;
  std::string url;
  std::size_t rank = 0;
};

class SearchConnector {
 public:
  virtual ~SearchConnector() = default;
  /// Raw results, possibly with duplicate urls.
  virtual std::vector<SearchResult> fetch(const std::string& query) const = 0;
};

/// Lowercase, runs of non-alphanumerics collapsed to '_', trimmed.
std::string normalize_query(std::string_view query);

/// Serves `<dir>/<normalized query>.tsv` files of
/// "rank<TAB>title<TAB>url<TAB>snippet" lines. Missing file -> no results.
class FixtureSearchConnector final : public SearchConnector {
 public:
  explicit FixtureSearchConnector(std::string dir) : dir_(std::move(dir)) {}
  std::vector<SearchResult> fetch(const std::string& query) const override;

 private:
  std::string dir_;
};

/// Deduplicates by url (first occurrence wins), re-ranks 1..n and keeps at
/// most `max_results`. Throws Error(InvalidQuery) on an empty query.
std::vector<SearchResult> web_search(const SearchConnector& connector, const std::string& query,
                                     std::size_t max_results);

/// Summary injected into prompts: one "[rank] title: snippet (url)" line per
/// result.
std::string render_search_results(const std::vector<SearchResult>& results);

// ---------------------------------------------------------------------------

/// Tool names in registration order, mirroring the domain model list.
const std::vector<std::string>& default_tool_names();

/// Registers the eight domain tools. Advisory tools read
/// `<advisory_dir>/<tool>.tsv` ("keyword<TAB>advice", "*" default line).
void register_default_tools(ToolRegistry& registry, std::shared_ptr<const PhenotypeModel> phenotype,
                            const std::string& advisory_dir);

}  // namespace agriqa::tools
