#include <doctest.h>

#include <cmath>
#include <random>

#include "agriqa/error.hpp"
#include "agriqa/text.hpp"
#include "agriqa/tools.hpp"

using namespace agriqa;
using namespace agriqa::tools;

namespace {

const std::string kData = AGRIQA_TEST_DATA_DIR;

std::shared_ptr<const PhenotypeModel> shipped_model() {
  return std::make_shared<PhenotypeModel>(PhenotypeModel::from_file(kData + "/tools/phenotype_coefficients.tsv"));
}

void register_shipped(ToolRegistry& reg) { register_default_tools(reg, shipped_model(), kData + "/tools/advisory"); }

// Promoter score computed by hand from the documented formula.
double promoter_by_hand(double gc_fraction, double cg_pairs, double length) {
  return 4.0 * gc_fraction - 3.0 * gc_fraction * gc_fraction + 0.5 * cg_pairs / (length - 1.0);
}

class VectorConnector final : public SearchConnector {
 public:
  explicit VectorConnector(std::vector<SearchResult> r) : results_(std::move(r)) {}
  std::vector<SearchResult> fetch(const std::string&) const override { return results_; }

 private:
  std::vector<SearchResult> results_;
};

}  // namespace

TEST_CASE("promoter surrogate values") {
  CHECK(predict_promoter_enrichment("GGGGGGGG") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(predict_promoter_enrichment("AAAAAAAA") == 0.0);
  CHECK(predict_promoter_enrichment("ACGTACGT") == doctest::Approx(promoter_by_hand(0.5, 2, 8)).epsilon(1e-12));
  CHECK(text::format_real(predict_promoter_enrichment("ACGTACGT")) == "1.392857");
  CHECK(predict_promoter_enrichment("acgtacgt") == predict_promoter_enrichment("ACGTACGT"));
  CHECK(predict_promoter_enrichment("GGCCGGCC") == doctest::Approx(promoter_by_hand(1.0, 1, 8)).epsilon(1e-12));
  CHECK_THROWS_AS(predict_promoter_enrichment("ACGT"), Error);
  try {
    predict_promoter_enrichment("ACGTNACGT");
    FAIL("expected InvalidSequence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSequence);
  }
}

TEST_CASE("registry invocation folds failures into results") {
  ToolRegistry reg;
  register_shipped(reg);
  auto ok = reg.invoke("promoter_enrichment", {{"sequence", "GGCCGGCC"}});
  CHECK(ok.ok);
  CHECK(ok.payload == text::format_real(promoter_by_hand(1.0, 1, 8)));
  auto bad = reg.invoke("promoter_enrichment", {{"sequence", "XYZ"}});
  CHECK_FALSE(bad.ok);
  CHECK(bad.error_detail.find("invalid nucleotide") != std::string::npos);
  CHECK_FALSE(reg.invoke("promoter_enrichment", {}).ok);
  CHECK_FALSE(reg.invoke("promoter_enrichment", {{"sequence", "ACGTACGT"}, {"extra", "1"}}).ok);
  CHECK_FALSE(reg.invoke("maize_phenotype", {{"markers", "1,2,3,4,5,6"}}).ok);
  CHECK_THROWS_AS(reg.invoke("no_such_tool", {}), Error);
  try {
    reg.invoke("no_such_tool", {});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ToolNotFound);
  }
}

TEST_CASE("registration rules") {
  ToolRegistry reg;
  register_shipped(reg);
  auto specs = reg.list_tools();
  REQUIRE(specs.size() == 8);
  for (std::size_t i = 0; i < specs.size(); ++i) CHECK(specs[i].name == default_tool_names()[i]);
  CHECK(reg.spec("maize_phenotype").output_kind == OutputKind::Table);
  CHECK(reg.spec("promoter_enrichment").input_schema[0].type == FieldType::DnaSequence);
  auto handler = [](const ToolArgs&) { return std::string("x"); };
  try {
    reg.register_tool({"crop_growth", "again", {}, OutputKind::Text}, handler);
    FAIL("expected DuplicateTool");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateTool);
  }
  CHECK_THROWS_AS(reg.register_tool({"Bad-Name", "d", {}, OutputKind::Text}, handler), Error);
  CHECK_THROWS_AS(reg.register_tool({"fine", " ", {}, OutputKind::Text}, handler), Error);
  CHECK(reg.list_tools().size() == 8);
}

TEST_CASE("throwing handlers become failed results") {
  ToolRegistry reg;
  reg.register_tool({"boom", "always throws", {}, OutputKind::Text},
                    [](const ToolArgs&) -> std::string { throw std::runtime_error("kaboom"); });
  auto r = reg.invoke("boom", {});
  CHECK_FALSE(r.ok);
  CHECK(r.error_detail == "kaboom");
}

TEST_CASE("phenotype surrogate is linear") {
  auto model = shipped_model();
  auto zero = model->predict({0, 0, 0, 0, 0}, {});
  CHECK(zero.at("yield_index") == doctest::Approx(6.5));
  CHECK(zero.at("plant_height_cm") == doctest::Approx(180.0));
  CHECK(zero.at("flowering_days") == doctest::Approx(65.0));

  std::vector<double> a{1, 0, -1, 1, 0}, b{0.5, 2, 0, -1, 3};
  std::map<std::string, double> ea{{"temperature", 25}}, eb{{"rainfall", 600}, {"nitrogen", 200}};
  auto pa = model->predict(a, ea), pb = model->predict(b, eb);
  std::vector<double> sum(5);
  for (int i = 0; i < 5; ++i) sum[i] = a[i] + b[i];
  auto ps = model->predict(sum, {{"temperature", 25}, {"rainfall", 600}, {"nitrogen", 200}});
  for (const auto& [name, v] : ps) {
    CHECK(v - zero.at(name) == doctest::Approx((pa.at(name) - zero.at(name)) + (pb.at(name) - zero.at(name))));
  }
  CHECK_THROWS_AS(model->predict({}, {}), Error);
  CHECK_THROWS_AS(model->predict({1, 2, 3, 4, 5, 6}, {}), Error);
  CHECK_THROWS_AS(model->predict({NAN}, {}), Error);
  CHECK(model->predict({1}, {{"unknown_trait", 5}}).at("yield_index") == doctest::Approx(6.5 + 0.85));
}

TEST_CASE("phenotype surrogate matches a dot-product oracle") {
  // Coefficients transcribed from the shipped file.
  const std::vector<double> yield_markers{0.85, 0.42, -0.31, 0.27, 0.15};
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2, 2), env(0, 800);
  auto model = shipped_model();
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> m(5);
    for (auto& x : m) x = u(rng);
    double t = env(rng) / 20, r = env(rng), n = env(rng) / 3;
    double expected = 6.5 + 0.012 * t + 0.0009 * r + 0.004 * n;
    for (int i = 0; i < 5; ++i) expected += yield_markers[i] * m[i];
    auto got = model->predict(m, {{"temperature", t}, {"rainfall", r}, {"nitrogen", n}});
    CHECK(got.at("yield_index") == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("phenotype tool renders a table") {
  ToolRegistry reg;
  register_shipped(reg);
  auto r = reg.invoke("maize_phenotype", {{"markers", "0,0,0,0,0"}, {"environment", "temperature=0"}});
  REQUIRE(r.ok);
  CHECK(r.payload == "flowering_days\t65.000000\nplant_height_cm\t180.000000\nyield_index\t6.500000");
}

TEST_CASE("coefficient file errors") {
  CHECK_THROWS_AS(PhenotypeModel::parse("plant_height_cm\t1,2\t3\n"), Error);
  CHECK_THROWS_AS(PhenotypeModel::parse("yield_index\t1,x\t3\n"), Error);
  CHECK_THROWS_AS(PhenotypeModel::parse("yield_index\t1\n"), Error);
  CHECK(PhenotypeModel::builtin().phenotypes().count("yield_index") == 1);
}

TEST_CASE("parsers") {
  CHECK(parse_number_list("1, -2.5 ,3") == std::vector<double>{1, -2.5, 3});
  CHECK(parse_number_list(" ").empty());
  CHECK_THROWS_AS(parse_number_list("1,,2"), Error);
  auto traits = parse_trait_map("Temperature=25; rainfall = 600");
  CHECK(traits.at("temperature") == 25);
  CHECK(traits.at("rainfall") == 600);
  CHECK_THROWS_AS(parse_trait_map("temperature"), Error);
}

TEST_CASE("web search deduplicates and re-ranks") {
  VectorConnector conn({{"a", "s", "u1", 4}, {"b", "s", "u2", 9}, {"dup", "s", "u1", 1}, {"c", "s", "u3", 2}});
  auto results = web_search(conn, "anything", 10);
  REQUIRE(results.size() == 3);
  CHECK(results[0].title == "a");
  CHECK(results[1].title == "b");
  CHECK(results[2].title == "c");
  for (std::size_t i = 0; i < results.size(); ++i) CHECK(results[i].rank == i + 1);
  CHECK(web_search(conn, "anything", 2).size() == 2);
  CHECK_THROWS_AS(web_search(conn, "  ", 2), Error);
  CHECK_THROWS_AS(web_search(conn, "q", 0), Error);
  // Idempotent on its own output.
  VectorConnector again(results);
  auto twice = web_search(again, "q", 10);
  REQUIRE(twice.size() == results.size());
  for (std::size_t i = 0; i < twice.size(); ++i) CHECK(twice[i].url == results[i].url);
}

TEST_CASE("fixture connector") {
  CHECK(normalize_query("Grain  market: Outlook!") == "grain_market_outlook");
  CHECK(normalize_query("  weather warning: heat and drought ") == "weather_warning_heat_and_drought");
  FixtureSearchConnector conn(kData + "/search_fixtures");
  auto results = web_search(conn, "grain market outlook", 10);
  REQUIRE(results.size() == 3);
  CHECK(results[1].url == "https://example.org/markets/soy-crush");
  CHECK(render_search_results({results[0]}) ==
        "[1] Grain market weekly: maize prices firm on feed demand: Maize prices rose three percent this week "
        "as feed demand recovered and stocks in the north declined. (https://example.org/markets/maize-weekly)");
  CHECK(web_search(conn, "no fixture for this", 5).empty());
}

TEST_CASE("advisory tools pick the first matching keyword") {
  ToolRegistry reg;
  register_shipped(reg);
  auto armyworm = reg.invoke("pest_disease", {{"query", "Fall ARMYWORM in maize"}});
  REQUIRE(armyworm.ok);
  CHECK(armyworm.payload.rfind("Pest model: fall armyworm risk", 0) == 0);
  auto fallback = reg.invoke("pest_disease", {{"query", "something unrelated"}});
  REQUIRE(fallback.ok);
  CHECK_FALSE(fallback.payload.empty());
  CHECK(fallback.payload != armyworm.payload);
  CHECK_FALSE(reg.invoke("pest_disease", {{"query", "   "}}).ok);
  for (const auto& name : default_tool_names()) {
    if (name == "maize_phenotype" || name == "promoter_enrichment") continue;
    auto r = reg.invoke(name, {{"query", "general question"}});
    CHECK_MESSAGE(r.ok, name);
  }
}
