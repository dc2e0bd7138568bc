#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "helpers.hpp"
#include "reasongr/corpus.hpp"
#include "reasongr/error.hpp"
#include "reasongr/synthetic.hpp"
#include "reasongr/text.hpp"

using namespace reasongr;
using namespace reasongr::corpus;

TEST_CASE("ingest parses company and year from the raw id") {
  auto docs = parse_corpus(
      R"([{"id":"ADI/2009/page_49.pdf-2","pre_text":["a"],"post_text":[],"table":[["h"]],
          "qa":{"question":"what?"}}])");
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].company == "ADI");
  CHECK(docs[0].year == "2009");
  CHECK(docs[0].question == std::optional<std::string>("what?"));
}

TEST_CASE("ingest edge cases") {
  CHECK(parse_corpus("[]").empty());

  SUBCASE("duplicate id") {
    const char* j = R"([{"id":"X/2001/p.pdf","pre_text":[],"post_text":[],"table":[]},
                        {"id":"X/2001/p.pdf","pre_text":[],"post_text":[],"table":[]}])";
    CHECK_THROWS_AS(parse_corpus(j), UniquenessError);
  }
  SUBCASE("malformed json reports a byte offset") {
    try {
      parse_corpus(R"([{"id": ])");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.byte_offset() > 0);
    }
  }
  SUBCASE("missing key names the key and element") {
    try {
      parse_corpus(R"([{"id":"A/2001/x","pre_text":[],"post_text":[],"table":[]},
                       {"id":"B/2002/x","pre_text":[],"table":[]}])");
      FAIL("expected a schema error");
    } catch (const SchemaError& e) {
      const std::string what = e.what();
      CHECK(what.find("post_text") != std::string::npos);
      CHECK(what.find("element 1") != std::string::npos);
    }
  }
  SUBCASE("ragged table") {
    CHECK_THROWS_AS(parse_corpus(R"([{"id":"A/2001/x","pre_text":[],"post_text":[],
                                      "table":[["a","b"],["c"]]}])"),
                    SchemaError);
  }
  SUBCASE("non-conforming id falls back with a warning") {
    std::vector<IngestWarning> warnings;
    auto docs = parse_corpus(R"([{"id":"weird.pdf","pre_text":[],"post_text":[],"table":[]}])",
                             &warnings);
    CHECK(docs[0].company == kUnknownCompany);
    CHECK(docs[0].year == kUnknownYear);
    CHECK(warnings.size() == 1);
  }
}

TEST_CASE("json round trip of documents") {
  auto docs = synthetic::generate_corpus({.documents = 5});
  auto back = parse_corpus(corpus::to_json(docs).dump());
  REQUIRE(back.size() == docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    CHECK(back[i].raw_id == docs[i].raw_id);
    CHECK(back[i].table == docs[i].table);
    CHECK(back[i].pre_text == docs[i].pre_text);
    CHECK(back[i].question == docs[i].question);
  }
}

TEST_CASE("flatten_table") {
  auto d = testutil::make_doc("A/2019/x", {}, {{"", "2019", "2018"}, {"revenue", "100", "90"}});
  auto segs = flatten_table(d);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].text == "revenue | 2019 | 100");
  CHECK(segs[1].text == "revenue | 2018 | 90");
  CHECK(segs[0].parent_raw_id == "A/2019/x");

  CHECK(flatten_table(testutil::make_doc("A/2019/x", {}, {{"h"}})).empty());
  auto d3 = testutil::make_doc("A/2019/x", {}, {{"", "a", "b"}, {"r1", "1", "2"}, {"r2", "3", "4"}});
  CHECK(flatten_table(d3).size() == 4);
}

TEST_CASE("flatten_table count law on random tables") {
  Rng rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = dim(rng), cols = dim(rng);
    std::vector<std::vector<std::string>> t(rows, std::vector<std::string>(cols));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) t[r][c] = "c" + std::to_string(r * cols + c);
    auto segs = flatten_table(testutil::make_doc("A/2000/x", {}, t));
    CHECK(segs.size() == (rows - 1) * (cols - 1));
    for (const auto& s : segs) {
      std::size_t n = 0;
      for (std::size_t p = s.text.find(" | "); p != std::string::npos; p = s.text.find(" | ", p + 1)) ++n;
      CHECK(n == 2);
    }
  }
}

TEST_CASE("keyword extraction") {
  std::vector<Document> docs{
      testutil::make_doc("A/2001/x", {"derivatives derivatives derivatives"}),
      testutil::make_doc("B/2002/x", {"hedging currency swaps and derivatives"}),
      testutil::make_doc("C/2003/x", {"currency risk in the currency markets"})};
  KeywordExtractor kx(docs);

  CHECK(kx.extract("derivatives derivatives", 1) == std::vector<std::string>{"derivatives"});
  CHECK(kx.extract("the swaps and a hedging", 10) == std::vector<std::string>{"swaps", "hedging"});
  CHECK(kx.extract("the of and", 3).empty());

  SUBCASE("brute-force tf-idf ranking on the mini corpus") {
    const std::string query = document_text(docs[2]);
    std::vector<std::string> toks;
    for (auto& t : text::word_tokens(query))
      if (!text::is_stopword(t)) toks.push_back(t);
    std::map<std::string, int> tf;
    std::vector<std::string> first;
    for (auto& t : toks)
      if (tf[t]++ == 0) first.push_back(t);
    auto df = [&](const std::string& t) {
      int n = 0;
      for (auto& d : docs) {
        auto dt = text::word_tokens(document_text(d));
        n += std::find(dt.begin(), dt.end(), t) != dt.end();
      }
      return n;
    };
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < first.size(); ++i) {
      double idf = std::log(4.0 / (df(first[i]) + 1.0)) + 1.0;
      scored.push_back({tf[first[i]] * idf, i});
    }
    std::stable_sort(scored.begin(), scored.end(), [](auto& a, auto& b) { return a.first > b.first; });
    std::vector<std::string> want{first[scored[0].second], first[scored[1].second]};
    CHECK(kx.extract(query, 2) == want);
    CHECK(want[0] == "currency");
    CHECK(kx.extract(query, 2) == kx.extract(query, 2));
  }
  CHECK(kx.idf("derivatives") == doctest::Approx(std::log(4.0 / 3.0) + 1.0));
}

TEST_CASE("build_docid join and collision rules") {
  auto d = testutil::make_doc("ADI/2009/x", {});
  CHECK(build_docid(d, {"hedge", "currency"}, {}).surface() == "adi-2009-hedge-currency");
  CHECK(build_docid(d, {"hedge", "currency"}, {"adi-2009-hedge-currency"}).surface() ==
        "adi-2009-hedge-currency-2");
  CHECK(build_docid(d, {"hedge"}, {"adi-2009-hedge", "adi-2009-hedge-2"}).surface() ==
        "adi-2009-hedge-3");
  CHECK(build_docid(d, {}, {}).surface() == "adi-2009");
  CHECK_THROWS_AS(build_docid(d, {"bad-kw"}, {}), SchemaError);
  auto empty = testutil::make_doc("!!/2009/x", {});
  CHECK_THROWS_AS(build_docid(empty, {}, {}), SchemaError);
  auto id = DocId::parse("adi-2009-hedge");
  CHECK(id.components == std::vector<std::string>{"adi", "2009", "hedge"});
}

TEST_CASE("registry trie shapes") {
  DocIdRegistry reg;
  reg.insert("r1", DocId::parse("a-b-c"));
  reg.insert("r2", DocId::parse("a-b-d"));
  const auto& trie = reg.trie();
  auto a = trie.child(trie.root(), "a");
  REQUIRE(a);
  auto ab = trie.child(*a, "b");
  REQUIRE(ab);
  CHECK(trie.node(*ab).children.size() == 2);
  CHECK_THROWS_AS(reg.insert("r3", DocId::parse("a-b-c")), UniquenessError);
  CHECK_THROWS_AS(reg.insert("r1", DocId::parse("x-y")), UniquenessError);

  auto one = DocIdRegistry::build(std::vector<Document>{testutil::make_doc("A/2001/x", {"hello world"})});
  CHECK(one.trie().terminal_count() == 1);
  CHECK(one.trie().enumerate().size() == 1);
}

TEST_CASE("registry properties on a synthetic corpus") {
  auto docs = synthetic::generate_corpus({.documents = 50, .companies = 10});
  auto reg = DocIdRegistry::build(docs, 3);
  REQUIRE(reg.size() == 50);
  std::set<std::string> surfaces;
  for (std::size_t i = 0; i < reg.size(); ++i) {
    const auto& id = reg.docid(i);
    surfaces.insert(id.surface());
    CHECK(DocId::parse(id.surface()) == id);
    CHECK(reg.raw_id_for(reg.docid_for(docs[i].raw_id).surface()) == docs[i].raw_id);
    for (const auto& c : id.components) {
      CHECK(!c.empty());
      CHECK(c.find('-') == std::string::npos);
      CHECK(c == text::to_lower(c));
    }
    CHECK(id.components[0] == text::normalize_component(docs[i].company));
    CHECK(id.components[1] == docs[i].year);
  }
  CHECK(surfaces.size() == 50);

  // Trie paths are exactly the registered sequences.
  std::set<std::vector<std::string>> paths;
  for (const auto& [path, payload] : reg.trie().enumerate()) {
    CHECK(reg.docid(payload).components == path);
    paths.insert(path);
  }
  CHECK(paths.size() == 50);

  auto restored = DocIdRegistry::from_json(reg.to_json());
  for (std::size_t i = 0; i < reg.size(); ++i) CHECK(restored.docid(i) == reg.docid(i));
  CHECK(reg.export_json().size() == 50);
}

TEST_CASE("ordinal suffixes resolve colliding documents") {
  std::vector<Document> docs{testutil::make_doc("A/2001/x", {"shared words"}),
                             testutil::make_doc("A/2001/y", {"shared words"}),
                             testutil::make_doc("A/2001/z", {"shared words"})};
  auto reg = DocIdRegistry::build(docs, 2);
  CHECK(reg.docid(0).surface() == "a-2001-shared-words");
  CHECK(reg.docid(1).surface() == "a-2001-shared-words-2");
  CHECK(reg.docid(2).surface() == "a-2001-shared-words-3");
}
