#include "doctest.h"

#include <set>

#include "helpers.hpp"
#include "reasongr/error.hpp"
#include "reasongr/synthetic.hpp"
#include "reasongr/tokenizer.hpp"

using namespace reasongr;
using namespace reasongr::tok;

TEST_CASE("vocab specials and docid components") {
  corpus::DocIdRegistry reg;
  reg.insert("r", corpus::DocId::parse("a-b"));
  auto v = Vocab::build({}, reg, {});
  CHECK(v.size() == 7);
  CHECK(v.token(kPad) == "<pad>");
  CHECK(v.token(kSep) == "=>");
  CHECK(v.id("a") == 5);
  CHECK(v.id("b") == 6);
  CHECK(v.id("zzz") == kUnk);
  CHECK_THROWS_AS(v.token(99), DimensionError);

  corpus::DocIdRegistry reg2;
  reg2.insert("r", corpus::DocId::parse("adi-2009-hedge"));
  auto v2 = Vocab::build({}, reg2, std::vector<std::string>{"hello ADI"});
  for (const char* t : {"adi", "2009", "hedge", "hello"}) CHECK(v2.contains(t));
  CHECK(encode("adi-2009-hedge", v2) == TokenSequence{v2.id("adi"), v2.id("2009"), v2.id("hedge")});
  CHECK(encode("", v2).empty());
  CHECK(encode("unseen", v2) == TokenSequence{kUnk});
  CHECK(encode("x => adi", v2) == TokenSequence{kUnk, kSep, v2.id("adi")});
}

TEST_CASE("vocab is deterministic and round-trips through json") {
  auto docs = synthetic::generate_corpus({.documents = 20});
  auto reg = corpus::DocIdRegistry::build(docs);
  auto a = Vocab::build(docs, reg, {});
  auto b = Vocab::build(docs, reg, {});
  CHECK(a == b);
  CHECK(Vocab::from_json(a.to_json()) == a);
  CHECK_THROWS(Vocab::from_json(nlohmann::json::array({"a", "b"})));

  std::set<TokenSequence> seqs;
  for (std::size_t i = 0; i < reg.size(); ++i) {
    const auto surface = reg.docid(i).surface();
    auto ids = encode(surface, a);
    CHECK(ids == encode_docid(reg.docid(i), a));
    CHECK(decode(ids, a, "-") == surface);
    seqs.insert(ids);
  }
  CHECK(seqs.size() == reg.size());
}

TEST_CASE("decode skips pad, bos and eos") {
  corpus::DocIdRegistry reg;
  reg.insert("r", corpus::DocId::parse("a-b"));
  auto v = Vocab::build({}, reg, {});
  CHECK(decode(TokenSequence{kBos, 5, kPad, 6, kEos}, v) == "a b");
  CHECK(decode(TokenSequence{5, kUnk}, v) == "a <unk>");
}
