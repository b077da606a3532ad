#include "agriqa/tools.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>

#include "agriqa/error.hpp"
#include "agriqa/text.hpp"
#include "builtin_data.hpp"

namespace agriqa::tools {

namespace fs = std::filesystem;

namespace {

bool is_snake_case(std::string_view name) {
  if (name.empty() || !(name[0] >= 'a' && name[0] <= 'z')) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

double parse_real(std::string_view s) {
  auto t = text::trim(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidInput, "not a number: '" + t + "'");
  }
  if (used != t.size()) throw Error(ErrorCode::InvalidInput, "not a number: '" + t + "'");
  if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "non-finite value: '" + t + "'");
  return v;
}

std::string format_table(const std::map<std::string, double>& values) {
  std::string out;
  for (const auto& [k, v] : values) {
    if (!out.empty()) out += "\n";
    out += k + "\t" + text::format_real(v);
  }
  return out;
}

// First advisory line whose keyword occurs in the query, else the "*" line.
std::string advise(const std::string& path, const std::string& query) {
  auto tokens = text::word_tokens(query);
  std::set<std::string> words(tokens.begin(), tokens.end());
  std::string fallback;
  for (const auto& line : text::read_lines(path)) {
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    auto key = text::to_lower(line.substr(0, tab));
    auto advice = line.substr(tab + 1);
    if (key == "*") {
      if (fallback.empty()) fallback = advice;
    } else if (words.count(key) > 0) {
      return advice;
    }
  }
  if (fallback.empty()) throw Error(ErrorCode::StorageError, path + ": no '*' advisory line");
  return fallback;
}

}  // namespace

std::string_view output_kind_name(OutputKind kind) {
  switch (kind) {
    case OutputKind::Text: return "text";
    case OutputKind::Number: return "number";
    case OutputKind::Table: return "table";
  }
  return "text";
}

std::string_view field_type_name(FieldType type) {
  switch (type) {
    case FieldType::Text: return "text";
    case FieldType::DnaSequence: return "dna_sequence";
    case FieldType::NumberList: return "number_list";
    case FieldType::TraitMap: return "trait_map";
  }
  return "text";
}

std::vector<double> parse_number_list(std::string_view s) {
  std::vector<double> out;
  if (text::trim(s).empty()) return out;
  for (const auto& part : text::split(s, ',')) out.push_back(parse_real(part));
  return out;
}

std::map<std::string, double> parse_trait_map(std::string_view s) {
  std::map<std::string, double> out;
  if (text::trim(s).empty()) return out;
  std::string normalized(s);
  std::replace(normalized.begin(), normalized.end(), ';', ',');
  for (const auto& part : text::split(normalized, ',')) {
    auto eq = part.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidInput, "expected trait=value, got '" + part + "'");
    auto key = text::to_lower(text::trim(part.substr(0, eq)));
    if (key.empty()) throw Error(ErrorCode::InvalidInput, "empty trait name in '" + part + "'");
    out[key] = parse_real(part.substr(eq + 1));
  }
  return out;
}

std::string validate_field(const FieldSpec& field, std::string_view value) {
  switch (field.type) {
    case FieldType::Text:
      if (text::trim(value).empty()) return "field '" + field.name + "': empty text";
      return {};
    case FieldType::DnaSequence: {
      auto seq = text::trim(value);
      for (std::size_t i = 0; i < seq.size(); ++i) {
        char c = static_cast<char>(std::toupper(static_cast<unsigned char>(seq[i])));
        if (c != 'A' && c != 'C' && c != 'G' && c != 'T') {
          return "field '" + field.name + "': invalid nucleotide '" + std::string(1, seq[i]) +
                 "' at position " + std::to_string(i);
        }
      }
      if (seq.size() < 8) {
        return "field '" + field.name + "': sequence length " + std::to_string(seq.size()) +
               " is below the minimum of 8";
      }
      return {};
    }
    case FieldType::NumberList:
      try {
        if (parse_number_list(value).empty()) return "field '" + field.name + "': empty number list";
      } catch (const Error& e) {
        return "field '" + field.name + "': " + e.what();
      }
      return {};
    case FieldType::TraitMap:
      try {
        parse_trait_map(value);
      } catch (const Error& e) {
        return "field '" + field.name + "': " + e.what();
      }
      return {};
  }
  return {};
}

void ToolRegistry::register_tool(ToolSpec spec, ToolHandler handler) {
  if (!is_snake_case(spec.name)) {
    throw Error(ErrorCode::InvalidInput, "tool name must be lowercase snake case: '" + spec.name + "'");
  }
  if (text::trim(spec.description).empty()) {
    throw Error(ErrorCode::InvalidInput, "tool '" + spec.name + "' needs a description");
  }
  if (!handler) throw Error(ErrorCode::InvalidInput, "tool '" + spec.name + "' has no handler");
  std::unique_lock lock(mu_);
  for (const auto& e : entries_) {
    if (e.spec.name == spec.name) throw Error(ErrorCode::DuplicateTool, spec.name);
  }
  entries_.push_back({std::move(spec), std::move(handler)});
}

ToolResult ToolRegistry::invoke(const std::string& name, const ToolArgs& args) const {
  std::optional<Entry> entry;
  {
    std::shared_lock lock(mu_);
    for (const auto& e : entries_) {
      if (e.spec.name == name) entry = e;
    }
  }
  if (!entry) throw Error(ErrorCode::ToolNotFound, name);

  ToolResult result;
  result.tool_name = name;
  auto fail = [&](std::string detail) {
    result.ok = false;
    result.error_detail = std::move(detail);
    return result;
  };

  for (const auto& [key, _] : args) {
    bool known = std::any_of(entry->spec.input_schema.begin(), entry->spec.input_schema.end(),
                             [&](const FieldSpec& f) { return f.name == key; });
    if (!known) return fail("unknown field '" + key + "'");
  }
  for (const auto& field : entry->spec.input_schema) {
    auto it = args.find(field.name);
    if (it == args.end()) {
      if (field.required) return fail("missing required field '" + field.name + "'");
      continue;
    }
    if (auto problem = validate_field(field, it->second); !problem.empty()) return fail(problem);
  }

  try {
    result.payload = entry->handler(args);
    result.ok = true;
  } catch (const std::exception& e) {
    return fail(e.what());
  } catch (...) {
    return fail("tool handler failed");
  }
  return result;
}

std::vector<ToolSpec> ToolRegistry::list_tools() const {
  std::shared_lock lock(mu_);
  std::vector<ToolSpec> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.spec);
  return out;
}

bool ToolRegistry::has(const std::string& name) const {
  std::shared_lock lock(mu_);
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.spec.name == name; });
}

ToolSpec ToolRegistry::spec(const std::string& name) const {
  std::shared_lock lock(mu_);
  for (const auto& e : entries_) {
    if (e.spec.name == name) return e.spec;
  }
  throw Error(ErrorCode::ToolNotFound, name);
}

double predict_promoter_enrichment(std::string_view sequence) {
  if (sequence.size() < 8) {
    throw Error(ErrorCode::InvalidSequence,
                "sequence length " + std::to_string(sequence.size()) + " is below the minimum of 8");
  }
  std::size_t gc = 0;
  std::size_t cg = 0;
  char prev = 0;
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    char c = static_cast<char>(std::toupper(static_cast<unsigned char>(sequence[i])));
    switch (c) {
      case 'G': case 'C': ++gc; break;
      case 'A': case 'T': break;
      default:
        throw Error(ErrorCode::InvalidSequence, "invalid nucleotide '" + std::string(1, sequence[i]) +
                                                    "' at position " + std::to_string(i));
    }
    if (prev == 'C' && c == 'G') ++cg;
    prev = c;
  }
  const double n = static_cast<double>(sequence.size());
  const double gc_frac = static_cast<double>(gc) / n;
  const double cpg = static_cast<double>(cg) / (n - 1.0);
  return 4.0 * gc_frac - 3.0 * gc_frac * gc_frac + 0.5 * cpg;
}

PhenotypeModel PhenotypeModel::parse(std::string_view contents) {
  PhenotypeModel model;
  auto lines = text::split(contents, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line[0] == '#') continue;
    auto f = text::split(line, '\t');
    if (f.size() != 3) {
      throw Error(ErrorCode::InvalidConfig, "phenotype coefficients line " + std::to_string(i + 1) +
                                                ": expected phenotype<TAB>coefficients<TAB>intercept");
    }
    PhenotypeCoefficients c;
    try {
      for (const auto& part : text::split(f[1], ',')) {
        if (text::trim(part).empty()) continue;
        auto eq = part.find('=');
        if (eq == std::string::npos) {
          c.markers.push_back(parse_real(part));
        } else {
          c.environment[text::to_lower(text::trim(part.substr(0, eq)))] = parse_real(part.substr(eq + 1));
        }
      }
      c.intercept = parse_real(f[2]);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig,
                  "phenotype coefficients line " + std::to_string(i + 1) + ": " + e.what());
    }
    model.phenotypes_[text::trim(f[0])] = std::move(c);
  }
  if (model.phenotypes_.count("yield_index") == 0) {
    throw Error(ErrorCode::InvalidConfig, "phenotype coefficients must define yield_index");
  }
  return model;
}

PhenotypeModel PhenotypeModel::from_file(const std::string& path) { return parse(text::read_file(path)); }

const PhenotypeModel& PhenotypeModel::builtin() {
  static const PhenotypeModel model = parse(builtin::kPhenotypeCoefficients);
  return model;
}

std::map<std::string, double> PhenotypeModel::predict(const std::vector<double>& markers,
                                                      const std::map<std::string, double>& environment) const {
  if (markers.empty()) throw Error(ErrorCode::InvalidInput, "marker list is empty");
  for (double m : markers) {
    if (!std::isfinite(m)) throw Error(ErrorCode::InvalidInput, "non-finite genotype marker");
  }
  for (const auto& [k, v] : environment) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "non-finite environment value for " + k);
  }
  std::map<std::string, double> out;
  for (const auto& [name, c] : phenotypes_) {
    if (markers.size() > c.markers.size()) {
      throw Error(ErrorCode::InvalidInput, "got " + std::to_string(markers.size()) + " markers, " + name +
                                               " has " + std::to_string(c.markers.size()) + " coefficients");
    }
    double value = c.intercept;
    for (std::size_t i = 0; i < markers.size(); ++i) value += c.markers[i] * markers[i];
    for (const auto& [trait, x] : environment) {
      auto it = c.environment.find(trait);
      if (it != c.environment.end()) value += it->second * x;
    }
    out[name] = value;
  }
  return out;
}

std::string normalize_query(std::string_view query) {
  std::string out;
  bool pending_sep = false;
  for (char ch : query) {
    auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u) != 0 || u >= 0x80) {
      if (pending_sep && !out.empty()) out.push_back('_');
      pending_sep = false;
      out.push_back(static_cast<char>(std::tolower(u)));
    } else {
      pending_sep = true;
    }
  }
  return out;
}

std::vector<SearchResult> FixtureSearchConnector::fetch(const std::string& query) const {
  auto path = fs::path(dir_) / (normalize_query(query) + ".tsv");
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return {};
  std::vector<SearchResult> out;
  for (const auto& line : text::read_lines(path.string())) {
    if (text::trim(line).empty() || line[0] == '#') continue;
    auto f = text::split(line, '\t');
    if (f.size() != 4) throw Error(ErrorCode::StorageError, path.string() + ": malformed fixture line");
    SearchResult r;
    try {
      r.rank = std::stoul(f[0]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::StorageError, path.string() + ": bad rank '" + f[0] + "'");
    }
    r.title = f[1];
    r.url = f[2];
    r.snippet = f[3];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SearchResult> web_search(const SearchConnector& connector, const std::string& query,
                                     std::size_t max_results) {
  if (text::trim(query).empty()) throw Error(ErrorCode::InvalidQuery, "search query is empty");
  if (max_results == 0) throw Error(ErrorCode::InvalidInput, "max_results must be positive");
  std::vector<SearchResult> out;
  std::set<std::string> seen;
  for (auto& r : connector.fetch(query)) {
    if (!seen.insert(r.url).second) continue;
    r.rank = out.size() + 1;
    out.push_back(std::move(r));
    if (out.size() == max_results) break;
  }
  return out;
}

std::string render_search_results(const std::vector<SearchResult>& results) {
  std::string out;
  for (const auto& r : results) {
    if (!out.empty()) out += "\n";
    out += "[" + std::to_string(r.rank) + "] " + r.title + ": " + r.snippet + " (" + r.url + ")";
  }
  return out;
}

const std::vector<std::string>& default_tool_names() {
  static const std::vector<std::string> names{
      "maize_phenotype", "promoter_enrichment", "crop_growth",     "variety_selection",
      "pest_disease",    "weather_warning",     "tech_consulting", "market_analysis",
  };
  return names;
}

void register_default_tools(ToolRegistry& registry, std::shared_ptr<const PhenotypeModel> phenotype,
                            const std::string& advisory_dir) {
  registry.register_tool(
      {"maize_phenotype",
       "Maize phenotype prediction model: predicts yield_index, plant height and flowering time from "
       "genotype markers and environment traits.",
       {{"markers", FieldType::NumberList, true}, {"environment", FieldType::TraitMap, false}},
       OutputKind::Table},
      [phenotype](const ToolArgs& args) {
        auto env_it = args.find("environment");
        auto env = env_it == args.end() ? std::map<std::string, double>{} : parse_trait_map(env_it->second);
        return format_table(phenotype->predict(parse_number_list(args.at("markers")), env));
      });
  registry.register_tool(
      {"promoter_enrichment",
       "Maize gene promoter enrichment value prediction model: scores a DNA promoter sequence.",
       {{"sequence", FieldType::DnaSequence, true}},
       OutputKind::Number},
      [](const ToolArgs& args) {
        return text::format_real(predict_promoter_enrichment(text::trim(args.at("sequence"))));
      });

  struct Advisory {
    const char* name;
    const char* description;
  };
  static const Advisory advisories[] = {
      {"crop_growth", "Crop growth prediction model: growth stage and development outlook."},
      {"variety_selection", "Crop variety selection model: recommends varieties for a region or stress."},
      {"pest_disease", "Pest and disease monitoring and control model: outbreak risk and control measures."},
      {"weather_warning", "Agricultural weather warning model: frost, heat and rain alerts."},
      {"tech_consulting", "Agricultural technology consulting model: cultivation and management practice."},
      {"market_analysis", "Crop market analysis model: price outlook and selling advice."},
  };
  for (const auto& a : advisories) {
    auto path = (fs::path(advisory_dir) / (std::string(a.name) + ".tsv")).string();
    registry.register_tool({a.name, a.description, {{"query", FieldType::Text, true}}, OutputKind::Text},
                           [path](const ToolArgs& args) { return advise(path, args.at("query")); });
  }
}

}  // namespace agriqa::tools
