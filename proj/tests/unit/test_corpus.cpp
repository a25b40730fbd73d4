#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "interaction/corpus.hpp"
#include "interaction/random.hpp"

using namespace interaction;

namespace {

Quadruplet quad(std::string_view p, std::string_view h, Label l,
                std::initializer_list<std::string_view> exps) {
  Quadruplet q{tokenize(p), tokenize(h), l, {}};
  for (auto e : exps) q.explanations.push_back(tokenize(e));
  return q;
}

std::vector<std::size_t> flatten_indices(const std::vector<Batch>& batches) {
  std::vector<std::size_t> out;
  for (const auto& b : batches) out.insert(out.end(), b.indices.begin(), b.indices.end());
  return out;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits punctuation") {
  CHECK(tokenize("A Man, running!") == Tokens{"a", "man", ",", "running", "!"});
  CHECK(tokenize("  \t ") == Tokens{});
  CHECK(join_tokens({"a", "b"}) == "a b");
}

TEST_CASE("labels and splits") {
  CHECK(parse_label("neutral") == Label::neutral);
  CHECK_FALSE(parse_label("maybe").has_value());
  CHECK(label_word(Label::contradiction) == "contradiction");
  CHECK(explanations_per_record(Split::train) == 1);
  CHECK(explanations_per_record(Split::test) == 3);
  CHECK(parse_split("val") == Split::val);
}

TEST_CASE("jsonl ingestion") {
  std::istringstream train(
      R"({"premise":"a man runs","hypothesis":"a man moves","label":"entailment","explanation":"running is moving"})"
      "\n");
  const auto r = parse_quadruplets(train, Split::train, Schema{});
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].premise == Tokens{"a", "man", "runs"});
  CHECK(r.records[0].explanations.size() == 1);
  CHECK(r.records[0].label == Label::entailment);

  std::istringstream test(
      R"({"premise":"p","hypothesis":"h","label":"neutral","explanation_1":"x","explanation_2":"y","explanation_3":"z"})"
      "\n");
  const auto t = parse_quadruplets(test, Split::test, Schema{});
  REQUIRE(t.records.size() == 1);
  CHECK(t.records[0].explanations.size() == 3);
}

TEST_CASE("bad records are dropped with a diagnostic, too many fail the load") {
  std::ostringstream good;
  for (int i = 0; i < 199; ++i)
    good << R"({"premise":"p","hypothesis":"h","label":"entailment","explanation":"e"})" << "\n";
  const std::string bad = R"({"premise":"p","hypothesis":"h","label":"maybe","explanation":"e"})";
  {
    std::istringstream in(good.str() + bad + "\n");
    const auto r = parse_quadruplets(in, Split::train, Schema{});
    CHECK(r.records.size() == 199);
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].find("maybe") != std::string::npos);
  }
  {
    std::istringstream in(good.str() + bad + "\n" + bad + "\n" + bad + "\n");
    CHECK_THROWS_AS(parse_quadruplets(in, Split::train, Schema{}), DataError);
  }
  CHECK_THROWS_AS(load_quadruplets("/nonexistent/file.jsonl", Split::train, Schema{}), DataError);
}

TEST_CASE("quadruplet invariants") {
  CHECK_NOTHROW(validate_quadruplet(quad("a b", "c", Label::neutral, {"e"}), Split::train));
  CHECK_THROWS_AS(validate_quadruplet(quad("a b", "c", Label::neutral, {"e", "f", "g"}), Split::train), DataError);
  CHECK_THROWS_AS(validate_quadruplet(quad("a b", "c", Label::neutral, {"e"}), Split::val), DataError);
  CHECK_THROWS_AS(validate_quadruplet(quad("", "c", Label::neutral, {"e"}), Split::train), DataError);
  CHECK_THROWS_AS(validate_quadruplet(quad("a", "c", Label::neutral, {"e", "", "g"}), Split::test), DataError);
}

TEST_CASE("csv adapter with a column mapping") {
  CHECK(split_csv_line(R"(a,"b, c","say ""hi""",)", ',') ==
        std::vector<std::string>{"a", "b, c", "say \"hi\"", ""});
  std::istringstream in("Sentence1;Sentence2;gold;Expl\n\"a dog, barking\";a dog;entailment;dogs bark\n");
  Schema s;
  s.format = SourceFormat::csv;
  s.delimiter = ';';
  s.premise = "Sentence1";
  s.hypothesis = "Sentence2";
  s.label = "gold";
  s.explanation = "Expl";
  const auto r = parse_quadruplets(in, Split::train, s);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].premise == Tokens{"a", "dog", ",", "barking"});
}

TEST_CASE("vocabulary ordering, threshold and determinism") {
  std::vector<Quadruplet> corpus;
  for (int i = 0; i < 5; ++i) corpus.push_back(quad("the dog runs", "a dog", Label::entailment, {"zebra"}));
  corpus.push_back(quad("rare", "the", Label::neutral, {"b a"}));
  const auto v = Vocabulary::build(corpus, 3);
  CHECK(v.token(Vocabulary::pad) == "<pad>");
  CHECK(v.token(Vocabulary::eos) == "<eos>");
  CHECK(v.contains("dog"));
  CHECK_FALSE(v.contains("rare"));
  CHECK(v.id("rare") == Vocabulary::unk);
  // dog 10, a 6 = the 6, runs 5 = zebra 5; ties lexicographic
  CHECK(v.tokens() == std::vector<std::string>{"<pad>", "<unk>", "<bos>", "<eos>", "dog", "a", "the",
                                               "runs", "zebra"});

  auto shuffled = corpus;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(Vocabulary::build(shuffled, 3).tokens() == v.tokens());
  CHECK(Vocabulary::build(shuffled, 3).hash() == v.hash());
  CHECK_THROWS(Vocabulary::build({}, 1));

  const auto path = (std::filesystem::temp_directory_path() / "vocab_roundtrip.txt").string();
  v.save(path);
  const auto loaded = Vocabulary::load(path);
  CHECK(loaded.tokens() == v.tokens());
  CHECK(loaded.hash() == v.hash());
  std::filesystem::remove(path);
}

TEST_CASE("encode_sequence wraps, truncates and maps unknowns") {
  std::vector<Quadruplet> corpus{quad("w0 w1 w2 w3 w4 w5 w6 w7 w8 w9", "x", Label::entailment, {"y"})};
  const auto v = Vocabulary::build(corpus, 1);
  const auto ids = encode_sequence(v, corpus[0].premise, 25);
  CHECK(ids.size() == 12);
  CHECK(ids.front() == Vocabulary::bos);
  CHECK(ids.back() == Vocabulary::eos);
  CHECK(decode_sequence(v, ids) == corpus[0].premise);

  Tokens long_seq;
  for (int i = 0; i < 189; ++i) long_seq.push_back("w" + std::to_string(i % 10));
  const auto t = encode_sequence(v, long_seq, 25);
  CHECK(t.size() == 25);
  CHECK(t.back() == Vocabulary::eos);
  for (int max_len : {3, 4, 17})
    CHECK(encode_sequence(v, long_seq, max_len).size() == static_cast<std::size_t>(max_len));

  const auto u = encode_sequence(v, {"w1", "nope", "w2"}, 25);
  CHECK(u[2] == Vocabulary::unk);
  CHECK(decode_sequence(v, u) == Tokens{"w1", "<unk>", "w2"});
}

TEST_CASE("batching contract") {
  const auto corpus = synth_corpus(100, 3, {Split::val});
  const auto v = Vocabulary::build(corpus, 1);
  const auto a = make_batches(corpus, v, 16, 1000);
  REQUIRE(a.size() == 7);
  CHECK(a.back().size() == 4);

  auto idx = flatten_indices(a);
  CHECK(idx == flatten_indices(make_batches(corpus, v, 16, 1000)));
  CHECK(idx != flatten_indices(make_batches(corpus, v, 16, 2000)));
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < idx.size(); ++i) CHECK(idx[i] == i);

  for (const auto& b : a) {
    CHECK(b.explanations.size() == 3);
    for (const PaddedIds* m : {&b.premise, &b.hypothesis, &b.explanations[1]}) {
      CHECK(m->rows == b.size());
      for (int r = 0; r < m->rows; ++r) {
        const auto row = m->row(r);
        CHECK(row.front() == Vocabulary::bos);
        CHECK(row.back() == Vocabulary::eos);
        for (int c = 0; c < m->cols; ++c) {
          const bool real = c < static_cast<int>(row.size());
          CHECK(m->mask[r * m->cols + c] == (real ? 1 : 0));
          if (!real) CHECK(m->ids[r * m->cols + c] == Vocabulary::pad);
        }
      }
    }
    const auto ex = b.example(0);
    CHECK(ex.label == b.labels[0]);
  }
}

TEST_CASE("synthetic corpus properties") {
  const auto c30 = synth_corpus(30, 5);
  int counts[3] = {0, 0, 0};
  for (const auto& q : c30) ++counts[static_cast<int>(q.label)];
  CHECK(counts[0] == 10);
  CHECK(counts[1] == 10);
  CHECK(counts[2] == 10);

  const auto again = synth_corpus(30, 5);
  for (std::size_t i = 0; i < c30.size(); ++i) {
    CHECK(c30[i].premise == again[i].premise);
    CHECK(c30[i].explanations == again[i].explanations);
  }

  std::set<std::string> words;
  for (const auto& q : synth_corpus(300, 9, {Split::test})) {
    validate_quadruplet(q, Split::test);
    if (q.label != Label::entailment) continue;
    const std::string& verb = q.premise[3];
    for (const auto& e : q.explanations)
      CHECK(std::find(e.begin(), e.end(), verb) != e.end());
  }
  for (const auto& q : synth_corpus(2000, 1, {Split::test, 0.7}))
    for (const auto* s : {&q.premise, &q.hypothesis})
      words.insert(s->begin(), s->end());
  CHECK(words.size() >= 100);
  CHECK(words.size() <= 250);
}

TEST_CASE("artifacts plant a label cue at the requested rate") {
  const auto corpus = synth_corpus(3000, 2, {Split::train, 0.7});
  const char* cues[] = {"definitely", "never", "probably"};
  int cued = 0;
  for (const auto& q : corpus) {
    const auto& h = q.hypothesis;
    cued += std::find(h.begin(), h.end(), cues[static_cast<int>(q.label)]) != h.end();
  }
  CHECK(cued / 3000.0 == doctest::Approx(0.7).epsilon(0.05));
}

TEST_CASE("jsonl writer round trips") {
  const auto corpus = synth_corpus(12, 4, {Split::val});
  std::stringstream ss;
  write_quadruplets_jsonl(ss, corpus);
  const auto r = parse_quadruplets(ss, Split::val, Schema{});
  REQUIRE(r.records.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(r.records[i].hypothesis == corpus[i].hypothesis);
    CHECK(r.records[i].explanations == corpus[i].explanations);
    CHECK(r.records[i].label == corpus[i].label);
  }
}
