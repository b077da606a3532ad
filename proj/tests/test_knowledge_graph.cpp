#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include "agriqa/error.hpp"
#include "agriqa/knowledge_graph.hpp"

using namespace agriqa;
using namespace agriqa::kg;
namespace fs = std::filesystem;

namespace {

const std::string kData = AGRIQA_TEST_DATA_DIR;

KnowledgeGraph shipped() {
  return KnowledgeGraph::from_files(kData + "/kg/triples.tsv", kData + "/kg/entities.tsv");
}

EntityRecord entity(std::string id, std::vector<std::string> aliases = {}, std::string type = "thing") {
  return {id, id, std::move(aliases), std::move(type)};
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an agriqa::Error");
  return ErrorCode::InvalidInput;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

TEST_CASE("alias linking") {
  KnowledgeGraph g;
  g.add_entity({"maize", "maize", {"corn", "maize"}, "crop"});
  g.add_entity({"rice", "rice", {}, "crop"});
  auto linked = g.link_entities({"corn"});
  REQUIRE(linked.size() == 1);
  CHECK(linked[0].id == "maize");
  CHECK(g.link_entities({"CORN", "Maize", "rice"}).size() == 2);
  CHECK(g.link_entities({"sorghum"}).empty());
  CHECK(code_of([&] { g.add_entity({"rice", "rice", {}, "crop"}); }) == ErrorCode::InvalidInput);
}

TEST_CASE("star graph neighbourhood") {
  KnowledgeGraph g;
  g.add_entity(entity("hub"));
  std::vector<Triple> expected;
  for (char c = 'a'; c <= 'e'; ++c) {
    std::string leaf(1, c);
    g.add_entity(entity(leaf));
    Triple t{"hub", "links", leaf, "test"};
    g.add_triple(t);
    expected.push_back(t);
  }
  g.add_triple({"a", "links", "b", "test"});
  auto one = g.neighborhood("hub", 1);
  CHECK(one == expected);
  auto leaf = g.neighborhood("c", 1);
  REQUIRE(leaf.size() == 1);
  CHECK(leaf[0].subject == "hub");
  CHECK(g.neighborhood("hub", 2).size() == 6);
}

TEST_CASE("chain depth") {
  KnowledgeGraph g;
  g.add_triple({"a", "next", "b", "p"});
  g.add_triple({"b", "next", "c", "p"});
  g.add_triple({"c", "next", "d", "p"});
  CHECK(g.neighborhood("a", 1).size() == 1);
  auto two = g.neighborhood("a", 2);
  REQUIRE(two.size() == 2);
  CHECK(two[1].object == "c");
  CHECK(code_of([&] { g.neighborhood("zzz", 1); }) == ErrorCode::EntityNotFound);
  CHECK(code_of([&] { g.neighborhood("a", 3); }) == ErrorCode::InvalidInput);
}

TEST_CASE("duplicate triples keep the first provenance") {
  KnowledgeGraph g;
  CHECK(g.add_triple({"s", "p", "o", "first"}));
  CHECK_FALSE(g.add_triple({"s", "p", "o", "second"}));
  REQUIRE(g.triple_count() == 1);
  CHECK(g.triples()[0].provenance == "first");
}

TEST_CASE("fact rendering and budget") {
  CHECK(render_fact({"maize", "suitable_climate", "temperate", "sample-kg"}) ==
        "maize —suitable_climate→ temperate [sample-kg]");
  std::vector<Triple> ts;
  for (int i = 9; i >= 0; --i) ts.push_back({"crop" + std::to_string(i), "p", "o", "k"});
  std::string line = render_fact(ts.back());
  std::size_t line_len = 0;
  for (unsigned char c : line) line_len += (c & 0xC0) != 0x80 ? 1 : 0;
  auto three = render_facts(ts, 3 * line_len + 2);
  CHECK(std::count(three.begin(), three.end(), '\n') == 2);
  CHECK(three.rfind("crop0 ", 0) == 0);
  CHECK(three.find("crop2") != std::string::npos);
  CHECK(render_facts(ts, 3 * line_len + 1).find("crop2") == std::string::npos);
  CHECK(render_facts(ts, line_len - 1).empty());
  CHECK(code_of([&] { render_facts(ts, 0); }) == ErrorCode::InvalidInput);
}

TEST_CASE("shipped graph loads and round-trips") {
  auto g = shipped();
  CHECK(g.triple_count() >= 150);
  CHECK(g.entity_count() >= 60);
  auto dir = fs::temp_directory_path() / ("agriqa_kg_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  g.save((dir / "t.tsv").string(), (dir / "e.tsv").string());
  auto back = KnowledgeGraph::from_files((dir / "t.tsv").string(), (dir / "e.tsv").string());
  CHECK(back.triples() == g.triples());
  CHECK(back.serialize_entities() == g.serialize_entities());
  fs::remove_all(dir);
  CHECK(code_of([] { KnowledgeGraph::from_files("/nonexistent/t.tsv", "/nonexistent/e.tsv"); }) ==
        ErrorCode::StorageError);
}

TEST_CASE("depth-1 is contained in depth-2 for every entity") {
  auto g = shipped();
  for (const auto& e : g.entities()) {
    auto d1 = g.neighborhood(e.id, 1);
    auto d2 = g.neighborhood(e.id, 2);
    CHECK(std::is_sorted(d2.begin(), d2.end()));
    CHECK(std::includes(d2.begin(), d2.end(), d1.begin(), d1.end()));
  }
}

TEST_CASE("linking agrees with an alias table built from the raw file") {
  std::ifstream in(kData + "/kg/entities.tsv");
  std::map<std::string, std::set<std::string>> table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    cols.resize(4);
    table[lower(cols[1])].insert(cols[0]);
    std::stringstream as(cols[2]);
    std::string alias;
    while (std::getline(as, alias, '|')) {
      if (!alias.empty()) table[lower(alias)].insert(cols[0]);
    }
  }
  auto expect = [&](const std::vector<std::string>& kws) {
    std::vector<std::string> out;
    for (const auto& k : kws) {
      auto it = table.find(lower(k));
      if (it == table.end()) continue;
      for (const auto& id : it->second) {
        if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
      }
    }
    return out;
  };

  auto g = shipped();
  const std::vector<std::vector<std::string>> cases = {
      {"corn"}, {"maize", "corn"}, {"armyworm"}, {"rice", "planthopper"}, {"wheat", "scab"},
      {"soybean", "yield"}, {"potato", "favorita"}, {"bollworm", "cotton"}, {"Borer"},
      {"nothing", "here"}, {"spodoptera", "maize"}, {"barley", "wheat", "rice"}, {"tomato"},
      {"sorghum", "aphids"}, {}};
  for (const auto& kws : cases) {
    std::vector<std::string> got;
    for (const auto& e : g.link_entities(kws)) got.push_back(e.id);
    CHECK(got == expect(kws));
  }
  CHECK(expect({"armyworm"}).size() == 2);
}
