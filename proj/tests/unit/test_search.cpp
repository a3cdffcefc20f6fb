#include <doctest.h>

#include <map>

#include "../support/helpers.hpp"
#include "nat/core/error.hpp"
#include "nat/core/jsonl.hpp"
#include "nat/core/strings.hpp"
#include "nat/tools/search.hpp"
#include "nat/tools/toolset.hpp"

using namespace nat;
using namespace nat::tools;

namespace {

class ListClient final : public SearchClient {
public:
  explicit ListClient(std::vector<SearchResult> results, bool fail = false)
      : results_(std::move(results)), fail_(fail) {}
  std::vector<SearchResult> fetch(std::string_view) override {
    if (fail_) throw TransportError("down");
    return results_;
  }

private:
  std::vector<SearchResult> results_;
  bool fail_;
};

class TableEmbedder final : public Embedder {
public:
  explicit TableEmbedder(std::map<std::string, std::vector<double>> table, bool fail = false)
      : table_(std::move(table)), fail_(fail) {}
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
    if (fail_) throw TransportError("embedding endpoint down");
    std::vector<std::vector<double>> out;
    for (const auto& t : texts) out.push_back(table_.at(t));
    return out;
  }

private:
  std::map<std::string, std::vector<double>> table_;
  bool fail_;
};

}  // namespace

TEST_SUITE("search") {
  TEST_CASE("lexical score is the fraction of distinct query tokens present") {
    LexicalReranker r;
    std::vector<std::string> c{"Paris is the capital of France", "Berlin", "capital CAPITAL paris"};
    auto s = r.score("capital of France, capital", c);
    REQUIRE(s.size() == 3);
    CHECK(s[0] == doctest::Approx(1.0));
    CHECK(s[1] == 0.0);
    CHECK(s[2] == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("rerank is a stable descending sort") {
    LexicalReranker r;
    std::vector<std::string> c{"x", "apple", "y", "apple pie"};
    auto out = rerank("apple", c, r);
    REQUIRE(out.ranking.size() == 4);
    CHECK(out.ranking[0].first == 1);
    CHECK(out.ranking[1].first == 3);
    CHECK(out.ranking[2].first == 0);
    CHECK(out.ranking[3].first == 2);
    CHECK_FALSE(out.fallback_used);
  }

  TEST_CASE("embedding reranker clamps cosine into [0, 1]") {
    auto emb = std::make_shared<TableEmbedder>(std::map<std::string, std::vector<double>>{
        {"q", {1, 0}}, {"same", {2, 0}}, {"opposite", {-1, 0}}, {"diag", {1, 1}}});
    EmbeddingReranker r(emb);
    std::vector<std::string> c{"opposite", "diag", "same"};
    auto s = r.score("q", c);
    CHECK(s[0] == 0.0);
    CHECK(s[1] == doctest::Approx(std::sqrt(0.5)));
    CHECK(s[2] == doctest::Approx(1.0));
  }

  TEST_CASE("embedding failure falls back to lexical and is flagged") {
    auto emb = std::make_shared<TableEmbedder>(std::map<std::string, std::vector<double>>{}, true);
    EmbeddingReranker r(emb);
    std::vector<std::string> c{"nothing", "apple"};
    auto out = rerank("apple", c, r);
    CHECK(out.fallback_used);
    CHECK(out.fallback_reason.find("down") != std::string::npos);
    CHECK(out.ranking[0].first == 1);
  }

  TEST_CASE("cosine of a zero vector is zero") {
    std::vector<double> z{0, 0};
    std::vector<double> a{1, 2};
    CHECK(cosine_similarity(z, a) == 0.0);
  }

  TEST_CASE("search keeps top_k and formats with one-based indices") {
    ListClient client({{"A", "apple info", "u1"}, {"B", "banana", "u2"}, {"C", "apple apple", "u3"},
                       {"D", "apple", "u4"}});
    LexicalReranker r;
    auto results = search("apple", client, r, 2);
    REQUIRE(results.size() == 2);
    CHECK(results[0].title == "A");
    CHECK(results[1].title == "C");
    CHECK(format_results(results) == "[1] A \xE2\x80\x94 apple info\n[2] C \xE2\x80\x94 apple apple");
  }

  TEST_CASE("snippets are cut to 300 code points") {
    std::string longer;
    for (int i = 0; i < 400; ++i) longer += "\xC3\xA9";  // é
    std::vector<SearchResult> rs{{"T", longer, "u"}};
    auto text = format_results(rs);
    auto snippet = text.substr(text.find("\xE2\x80\x94 ") + 4);
    CHECK(snippet.size() == 600);
  }

  TEST_CASE("tool outputs for empty, failing and invalid searches") {
    LexicalReranker r;
    ListClient empty({});
    CHECK(search_tool("anything", empty, r).render() == "Observation: No results found.");
    ListClient down({}, true);
    auto failed = search_tool("anything", down, r);
    CHECK_FALSE(failed.is_ok());
    CHECK(failed.text() == "search unavailable");
    CHECK_FALSE(search_tool("   ", empty, r).is_ok());
  }

  TEST_CASE("serper responses parse the organic array") {
    auto rs = parse_serper_response(R"({"organic":[{"title":"T","snippet":"S","link":"L"},{"title":"U"}]})");
    REQUIRE(rs.size() == 2);
    CHECK(rs[0] == SearchResult{"T", "S", "L", 0.0});
    CHECK(rs[1].snippet.empty());
    CHECK(parse_serper_response("{}").empty());
    CHECK_THROWS_AS(parse_serper_response("not json"), TransportError);
  }

  TEST_CASE("fixture client reads <sha256(query)>.json") {
    nat::testing::TempDir dir;
    write_file_atomic(dir / FixtureSearchClient::fixture_name("who wrote hamlet"),
                      R"({"organic":[{"title":"Hamlet","snippet":"by William Shakespeare","link":"x"}]})");
    CHECK(FixtureSearchClient::fixture_name("q") == strings::sha256_hex("q") + ".json");
    FixtureSearchClient client(dir.path());
    auto rs = client.fetch("who wrote hamlet");
    REQUIRE(rs.size() == 1);
    CHECK(rs[0].title == "Hamlet");
    CHECK(client.fetch("unknown").empty());
  }

  TEST_CASE("toolset naming rules and unknown tools") {
    ToolSet t;
    t.add("echo", [](std::string_view a) { return ObservationResult::ok(std::string(a)); });
    CHECK_THROWS_AS(t.add("finish", nullptr), ConfigError);
    CHECK_THROWS_AS(t.add("Echo", nullptr), ConfigError);
    CHECK_THROWS_AS(t.add("echo", nullptr), ConfigError);
    CHECK(t.execute("echo", "hi").render() == "Observation: hi");
    auto unknown = t.execute("nope", "x");
    CHECK_FALSE(unknown.is_ok());
    CHECK(unknown.text() == "unknown tool 'nope'; available: echo");
  }
}
