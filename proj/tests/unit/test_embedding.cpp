#include "doctest.h"
#include "geoattack/embedding.hpp"
#include "toy.hpp"

using namespace geoattack;

TEST_CASE("load_embeddings fills found rows and zeros the rest") {
  const auto dir = toy::scratch("emb");
  toy::write(dir / "e.txt", "good 0.1 0.2\nother 1 1\n");
  const auto v = toy::vocab({"good", "bad"});
  EmbeddingCoverage cov;
  const EmbeddingTable t = load_embeddings(dir / "e.txt", *v, 2, &cov);
  CHECK(t.vocab_size() == 3);
  CHECK(t.row(v->id("good"))[0] == doctest::Approx(0.1));
  CHECK(t.row(v->id("good"))[1] == doctest::Approx(0.2));
  CHECK(t.row(v->oov_id())[0] == 0.0);
  CHECK(t.row(v->id("bad"))[1] == 0.0);
  CHECK(cov.found == 1);
  CHECK(cov.missing == 1);
  CHECK(cov.ratio() == doctest::Approx(0.5));
}

TEST_CASE("load_embeddings reports dimension mismatches by line") {
  const auto dir = toy::scratch("emb_bad");
  toy::write(dir / "e.txt", "good 0.1 0.2\nbad 0.3\n");
  const auto v = toy::vocab({"good", "bad"});
  try {
    load_embeddings(dir / "e.txt", *v, 2);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("dim mismatch at line 2") != std::string::npos);
  }
  CHECK_THROWS(load_embeddings(dir / "nope.txt", *v, 2));
}

TEST_CASE("lookup gathers rows") {
  EmbeddingTable t(3, 2);
  t.rows = toy::matrix(3, 2, {0, 0, 1, 2, 3, 4});
  const std::vector<TokenId> ids{2, 0, 1, 2};
  const Matrix m = lookup(t, ids);
  REQUIRE(m.rows == 4);
  for (std::size_t k = 0; k < ids.size(); ++k)
    for (std::size_t j = 0; j < 2; ++j) CHECK(m(k, j) == t.row(ids[k])[j]);
  CHECK(lookup(t, std::vector<TokenId>{}).rows == 0);
  CHECK(lookup(t, std::vector<TokenId>{0})(0, 1) == 0.0);
  CHECK_THROWS_AS(lookup(t, std::vector<TokenId>{3}), std::out_of_range);
}
