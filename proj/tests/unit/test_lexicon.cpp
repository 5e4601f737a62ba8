#include <doctest.h>

#include <sstream>

#include "sememe_rnn/lexicon.hpp"

using namespace sememe;

namespace {

SememeLexicon parse(const std::string& text) {
  std::istringstream in(text);
  return parse_lexicon(in, "test");
}

std::set<std::string> names(const SememeLexicon& lex, const std::string& word) {
  std::set<std::string> out;
  for (int id : *lex.find(word)) out.insert(lex.sememes[static_cast<std::size_t>(id)]);
  return out;
}

SememeLexicon ten_words() {
  std::string text;
  for (int i = 0; i < 10; ++i) {
    text += "w" + std::to_string(i) + "\ts" + std::to_string(i % 4) + ",s" +
            std::to_string((i + 1) % 4) + "\n";
  }
  return parse(text);
}

}  // namespace

TEST_CASE("parse_lexicon") {
  SUBCASE("empty input") {
    const auto lex = parse("");
    CHECK(lex.sememes.empty());
    CHECK(lex.annotations.empty());
  }
  SUBCASE("repeated word unions its sets") {
    const auto lex = parse("bank\tA\nbank\tB\n");
    CHECK(names(lex, "bank") == std::set<std::string>{"A", "B"});
  }
  SUBCASE("comments and blank lines are skipped") {
    const auto lex = parse("# header\n\ncat\tanimal,pet\n");
    CHECK(lex.annotated_words() == 1);
    CHECK(lex.sememes.size() == 2);
  }
  SUBCASE("malformed line reports its number") {
    try {
      (void)parse("cat\tanimal\ndog\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("unknown words are absent") {
    const auto lex = parse("cat\tanimal\n");
    CHECK(lex.find("dog") == nullptr);
  }
}

TEST_CASE("serialization round-trips to set-equal annotations") {
  const auto lex = parse("cat\tanimal,pet\ndog\tpet,animal,loyal\nfish\twater\n");
  std::ostringstream out;
  write_lexicon(out, lex);
  const auto back = parse(out.str());
  REQUIRE(back.annotated_words() == lex.annotated_words());
  for (const auto& [word, ids] : lex.annotations) CHECK(names(back, word) == names(lex, word));
}

TEST_CASE("knowledge_embedding") {
  const auto lex = parse("w\ta,b\nv\ta\n");
  ad::Matrix table(2, 2);
  table << 1, 0, 0, 1;
  const auto pi = knowledge_embedding("w", lex, table);
  CHECK(pi(0) == 0.5);
  CHECK(pi(1) == 0.5);
  const auto single = knowledge_embedding("v", lex, table);
  CHECK(single(0) == 1.0);
  CHECK(single(1) == 0.0);
  CHECK(knowledge_embedding("unknown", lex, table).isZero(0.0));
}

TEST_CASE("knowledge_embedding norm never exceeds the largest sememe norm") {
  const auto lex = parse("w\ta,b,c\n");
  ad::Matrix table(3, 4);
  table << 1, -2, 0.5, 3, -1, 0, 2, 2, 0.25, 0.5, -3, 1;
  const double largest = table.rowwise().norm().maxCoeff();
  CHECK(knowledge_embedding("w", lex, table).norm() <= largest);
}

TEST_CASE("averaging matrix reproduces knowledge embeddings") {
  const auto lex = parse("a\tx,y\nb\tz\n");
  const std::vector<std::string> words{"<unk>", "a", "b", "c"};
  const ad::Matrix avg = sememe_averaging_matrix(words, lex);
  ad::Matrix table(3, 2);
  table << 1, 2, 3, 4, 5, 6;
  const ad::Matrix pi = avg * table;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const Eigen::VectorXd expected = knowledge_embedding(words[w], lex, table);
    CHECK(pi.row(static_cast<Eigen::Index>(w)).transpose().isApprox(expected, 1e-15));
  }
  CHECK(avg.row(3).isZero(0.0));
}

TEST_CASE("word embeddings") {
  SUBCASE("two lines of dimension 3") {
    std::istringstream in("a 1 2 3\nb 4 5 6\n");
    const auto t = parse_word_embeddings(in, 3);
    CHECK(t.matrix.rows() == 2);
    CHECK(t.matrix.cols() == 3);
    CHECK_FALSE(t.trainable);
    CHECK(t.matrix(*t.find("b"), 1) == 5.0);
  }
  SUBCASE("short line is rejected at its number") {
    std::istringstream in("a 1 2 3\nb 4 5\n");
    try {
      (void)parse_word_embeddings(in, 3);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("duplicate word: last occurrence wins and is counted") {
    std::istringstream in("a 1 1\nb 2 2\na 3 3\n");
    const auto t = parse_word_embeddings(in, 2);
    CHECK(t.matrix.rows() == 2);
    CHECK(t.duplicates == 1);
    CHECK(t.matrix(*t.find("a"), 0) == 3.0);
  }
}

TEST_CASE("mask_coverage") {
  const auto lex = ten_words();
  SUBCASE("fraction 1 keeps everything") {
    const auto kept = mask_coverage(lex, 1.0, 3);
    CHECK(kept.annotations == lex.annotations);
    CHECK(kept.sememes == lex.sememes);
  }
  SUBCASE("fraction 0 empties the map") {
    CHECK(mask_coverage(lex, 0.0, 3).annotations.empty());
  }
  SUBCASE("fraction 0.5 keeps exactly half, reproducibly, with sets intact") {
    const auto a = mask_coverage(lex, 0.5, 3);
    const auto b = mask_coverage(lex, 0.5, 3);
    CHECK(a.annotated_words() == 5);
    CHECK(a.annotations == b.annotations);
    for (const auto& [word, ids] : a.annotations) CHECK(ids == lex.annotations.at(word));
    CHECK(lex.annotated_words() == 10);
  }
  SUBCASE("fraction out of range") {
    CHECK_THROWS(mask_coverage(lex, 1.5, 3));
  }
}

TEST_CASE("substitute_meaningless") {
  const auto lex = parse("a\tx,y,z\nb\tx\nc\ty,w\n");
  const auto sub = substitute_meaningless(lex, 8);
  CHECK(sub.sememes.size() == lex.sememes.size());
  for (const auto& s : sub.sememes) CHECK(s.rfind("label", 0) == 0);
  for (const auto& [word, ids] : lex.annotations) {
    CHECK(sub.annotations.at(word).size() == ids.size());
  }
  CHECK(substitute_meaningless(lex, 8).annotations == sub.annotations);
  CHECK(substitute_meaningless(SememeLexicon{}, 8).annotations.empty());

  SememeLexicon broken;
  broken.sememes = {"only"};
  broken.annotations["w"] = {0, 1, 2};
  CHECK_THROWS_AS(substitute_meaningless(broken, 1), std::logic_error);
}
