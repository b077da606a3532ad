#include "agriqa/knowledge_graph.hpp"

#include <algorithm>
#include <mutex>

#include "agriqa/error.hpp"
#include "agriqa/text.hpp"

namespace agriqa::kg {

KnowledgeGraph::KnowledgeGraph(const KnowledgeGraph& other) {
  std::shared_lock lock(other.mu_);
  for (const auto& t : other.triples_) add_triple_locked(t);
  for (const auto& [_, e] : other.entities_) add_entity_locked(e);
}

std::vector<Triple> KnowledgeGraph::parse_triples(const std::string& contents) {
  std::vector<Triple> out;
  auto lines = text::split(contents, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line[0] == '#') continue;
    auto f = text::split(line, '\t');
    if (f.size() != 4) {
      throw Error(ErrorCode::InvalidConfig, "triples line " + std::to_string(i + 1) +
                                                ": expected 4 tab-separated fields");
    }
    if (f[0].empty() || f[1].empty()) {
      throw Error(ErrorCode::InvalidConfig,
                  "triples line " + std::to_string(i + 1) + ": empty subject or predicate");
    }
    out.push_back({f[0], f[1], f[2], f[3]});
  }
  return out;
}

std::vector<EntityRecord> KnowledgeGraph::parse_entities(const std::string& contents) {
  std::vector<EntityRecord> out;
  auto lines = text::split(contents, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line[0] == '#') continue;
    auto f = text::split(line, '\t');
    if (f.size() != 4 || f[0].empty()) {
      throw Error(ErrorCode::InvalidConfig, "entities line " + std::to_string(i + 1) +
                                                ": expected id<TAB>name<TAB>aliases<TAB>type");
    }
    EntityRecord e{f[0], f[1], {}, f[3]};
    for (auto& a : text::split(f[2], '|')) {
      auto alias = text::trim(a);
      if (!alias.empty()) e.aliases.push_back(alias);
    }
    out.push_back(std::move(e));
  }
  return out;
}

KnowledgeGraph KnowledgeGraph::from_files(const std::string& triples_path, const std::string& entities_path) {
  KnowledgeGraph g;
  g.reload(parse_triples(text::read_file(triples_path)), parse_entities(text::read_file(entities_path)));
  return g;
}

bool KnowledgeGraph::add_triple(Triple t) {
  std::unique_lock lock(mu_);
  return add_triple_locked(std::move(t));
}

bool KnowledgeGraph::add_triple_locked(Triple t) {
  if (t.subject.empty() || t.predicate.empty()) {
    throw Error(ErrorCode::InvalidInput, "triple subject and predicate must be non-empty");
  }
  auto [it, inserted] = triples_.insert(std::move(t));
  if (!inserted) return false;
  const Triple* p = &*it;
  by_node_[p->subject].push_back(p);
  if (p->object != p->subject) by_node_[p->object].push_back(p);
  return true;
}

void KnowledgeGraph::add_entity(EntityRecord e) {
  std::unique_lock lock(mu_);
  add_entity_locked(std::move(e));
}

void KnowledgeGraph::add_entity_locked(EntityRecord e) {
  if (entities_.count(e.id) > 0) throw Error(ErrorCode::InvalidInput, "duplicate entity id " + e.id);
  if (!e.canonical_name.empty() &&
      std::none_of(e.aliases.begin(), e.aliases.end(),
                   [&](const std::string& a) { return a == e.canonical_name; })) {
    e.aliases.insert(e.aliases.begin(), e.canonical_name);
  }
  for (const auto& a : e.aliases) {
    auto& ids = alias_index_[text::to_lower(a)];
    if (std::find(ids.begin(), ids.end(), e.id) == ids.end()) ids.push_back(e.id);
  }
  auto id = e.id;
  entities_.emplace(std::move(id), std::move(e));
}

void KnowledgeGraph::reload(std::vector<Triple> triples, std::vector<EntityRecord> entities) {
  KnowledgeGraph fresh;
  for (auto& t : triples) fresh.add_triple_locked(std::move(t));
  for (auto& e : entities) fresh.add_entity_locked(std::move(e));

  std::unique_lock lock(mu_);
  triples_.swap(fresh.triples_);
  by_node_.swap(fresh.by_node_);
  entities_.swap(fresh.entities_);
  alias_index_.swap(fresh.alias_index_);
}

std::vector<EntityRecord> KnowledgeGraph::link_entities(const std::vector<std::string>& keywords) const {
  std::shared_lock lock(mu_);
  std::vector<EntityRecord> out;
  std::set<std::string> seen;
  for (const auto& kw : keywords) {
    auto it = alias_index_.find(text::to_lower(kw));
    if (it == alias_index_.end()) continue;
    // Ties on one keyword resolve by entity id.
    auto ids = it->second;
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) {
      if (seen.insert(id).second) out.push_back(entities_.at(id));
    }
  }
  return out;
}

void KnowledgeGraph::collect_edges(const std::string& node, std::set<Triple>& out) const {
  auto it = by_node_.find(node);
  if (it == by_node_.end()) return;
  for (const Triple* t : it->second) out.insert(*t);
}

std::vector<Triple> KnowledgeGraph::neighborhood(const std::string& entity_id, int depth) const {
  if (depth != 1 && depth != 2) throw Error(ErrorCode::InvalidInput, "depth must be 1 or 2");
  std::shared_lock lock(mu_);
  if (entities_.count(entity_id) == 0 && by_node_.count(entity_id) == 0) {
    throw Error(ErrorCode::EntityNotFound, entity_id);
  }
  std::set<Triple> result;
  collect_edges(entity_id, result);
  if (depth == 2) {
    std::set<std::string> neighbours;
    for (const auto& t : result) {
      neighbours.insert(t.subject == entity_id ? t.object : t.subject);
    }
    for (const auto& n : neighbours) collect_edges(n, result);
  }
  return {result.begin(), result.end()};
}

bool KnowledgeGraph::has_entity(const std::string& id) const {
  std::shared_lock lock(mu_);
  return entities_.count(id) > 0;
}

std::vector<Triple> KnowledgeGraph::triples() const {
  std::shared_lock lock(mu_);
  return {triples_.begin(), triples_.end()};
}

std::vector<EntityRecord> KnowledgeGraph::entities() const {
  std::shared_lock lock(mu_);
  std::vector<EntityRecord> out;
  for (const auto& [_, e] : entities_) out.push_back(e);
  return out;
}

std::size_t KnowledgeGraph::triple_count() const {
  std::shared_lock lock(mu_);
  return triples_.size();
}

std::size_t KnowledgeGraph::entity_count() const {
  std::shared_lock lock(mu_);
  return entities_.size();
}

std::string KnowledgeGraph::serialize_triples() const {
  std::shared_lock lock(mu_);
  std::string out;
  for (const auto& t : triples_) {
    out += t.subject + "\t" + t.predicate + "\t" + t.object + "\t" + t.provenance + "\n";
  }
  return out;
}

std::string KnowledgeGraph::serialize_entities() const {
  std::shared_lock lock(mu_);
  std::string out;
  for (const auto& [_, e] : entities_) {
    out += e.id + "\t" + e.canonical_name + "\t" + text::join(e.aliases, "|") + "\t" + e.type_label + "\n";
  }
  return out;
}

void KnowledgeGraph::save(const std::string& triples_path, const std::string& entities_path) const {
  text::write_file(triples_path, serialize_triples());
  text::write_file(entities_path, serialize_entities());
}

std::string render_fact(const Triple& t) {
  return t.subject + " —" + t.predicate + "→ " + t.object + " [" + t.provenance + "]";
}

std::string render_facts(const std::vector<Triple>& triples, std::size_t budget) {
  if (budget == 0) throw Error(ErrorCode::InvalidInput, "fact budget must be positive");
  std::vector<Triple> ordered(triples);
  std::stable_sort(ordered.begin(), ordered.end());
  std::string out;
  std::size_t used = 0;
  for (const auto& t : ordered) {
    auto line = render_fact(t);
    std::size_t cost = text::utf8_length(line) + (out.empty() ? 0 : 1);
    if (used + cost > budget) break;
    if (!out.empty()) out += "\n";
    out += line;
    used += cost;
  }
  return out;
}

}  // namespace agriqa::kg
