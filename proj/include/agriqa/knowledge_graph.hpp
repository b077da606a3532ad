#pragma once

#include <map>
#include <set>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace agriqa::kg {

struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;
  std::string provenance;

  auto key() const { return std::tie(subject, predicate, object); }
  friend bool operator<(const Triple& a, const Triple& b) { return a.key() < b.key(); }
  friend bool operator==(const Triple& a, const Triple& b) {
    return a.key() == b.key() && a.provenance == b.provenance;
  }
};

struct EntityRecord {
  std::string id;
  std::string canonical_name;
  std::vector<std::string> aliases;
  std::string type_label;
};

/// In-process triple store with an alias table for entity linking.
///
/// Triples are unique on (subject, predicate, object); adding a duplicate
/// keeps the first provenance. Reads are concurrent; reload() replaces the
/// whole store under an exclusive lock.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  KnowledgeGraph(const KnowledgeGraph& other);
  KnowledgeGraph& operator=(const KnowledgeGraph&) = delete;

  /// "subject<TAB>predicate<TAB>object<TAB>provenance" lines.
  static std::vector<Triple> parse_triples(const std::string& contents);
  /// "id<TAB>canonical_name<TAB>alias1|alias2|...<TAB>type_label" lines.
  static std::vector<EntityRecord> parse_entities(const std::string& contents);

  static KnowledgeGraph from_files(const std::string& triples_path, const std::string& entities_path);

  /// Returns false when the triple was already present.
  bool add_triple(Triple t);
  /// Throws Error(InvalidInput) on a duplicate id. The canonical name is
  /// added to the aliases when missing.
  void add_entity(EntityRecord e);

  /// Replaces the store contents atomically.
  void reload(std::vector<Triple> triples, std::vector<EntityRecord> entities);

  std::vector<EntityRecord> link_entities(const std::vector<std::string>& keywords) const;

  /// depth 1: triples touching the entity; depth 2: plus depth-1 triples of
  /// every neighbour. Sorted by (subject, predicate, object). Throws
  /// Error(EntityNotFound) or Error(InvalidInput) for depth outside {1, 2}.
  std::vector<Triple> neighborhood(const std::string& entity_id, int depth) const;

  bool has_entity(const std::string& id) const;
  std::vector<Triple> triples() const;
  std::vector<EntityRecord> entities() const;
  std::size_t triple_count() const;
  std::size_t entity_count() const;

  std::string serialize_triples() const;
  std::string serialize_entities() const;
  void save(const std::string& triples_path, const std::string& entities_path) const;

 private:
  bool add_triple_locked(Triple t);
  void add_entity_locked(EntityRecord e);
  void collect_edges(const std::string& node, std::set<Triple>& out) const;

  mutable std::shared_mutex mu_;
  std::set<Triple> triples_;
  std::unordered_map<std::string, std::vector<const Triple*>> by_node_;
  std::map<std::string, EntityRecord> entities_;
  std::unordered_map<std::string, std::vector<std::string>> alias_index_;
};

/// "subject —predicate→ object [provenance]" lines in (subject, predicate,
/// object) order, cut at whole lines so the
/// output (joined by '\n') is at most `budget` code points.
std::string render_facts(const std::vector<Triple>& triples, std::size_t budget);

std::string render_fact(const Triple& t);

}  // namespace agriqa::kg
