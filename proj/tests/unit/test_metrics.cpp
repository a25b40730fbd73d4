#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "interaction/metrics.hpp"
#include "oracles.hpp"

using namespace interaction;

namespace {

std::vector<Tokens> random_sentences(std::mt19937_64& rng, int count) {
  static const char* words[] = {"a", "b", "c", "d", "e"};
  std::uniform_int_distribution<int> len(1, 9), w(0, 4);
  std::vector<Tokens> out(count);
  for (auto& s : out) {
    const int n = len(rng);
    for (int i = 0; i < n; ++i) s.push_back(words[w(rng)]);
  }
  return out;
}

AnnotationRecord record(int index, std::vector<std::string> required,
                        std::array<std::vector<std::string>, 3> mentions) {
  AnnotationRecord r;
  r.example_index = index;
  r.required_args = std::move(required);
  r.annotators = std::move(mentions);
  return r;
}

}  // namespace

TEST_CASE("perplexity trivial cases") {
  const int vocab = 37;
  ReferenceLogProbs uniform(4, std::vector<std::vector<double>>(3, std::vector<double>(6, -std::log(vocab))));
  CHECK(perplexity(uniform) == doctest::Approx(37.0).epsilon(1e-12));
  ReferenceLogProbs certain{{{0.0, 0.0, 0.0}}};
  CHECK(perplexity(certain) == 1.0);
  // exp(-(ln 0.5 + ln 0.125) / 2) = sqrt(16); sqrt(8) needs 0.5 and 0.25.
  ReferenceLogProbs two{{{std::log(0.5), std::log(0.125)}}};
  CHECK(std::fabs(perplexity(two) - 4.0) < 1e-6);
  ReferenceLogProbs root8{{{std::log(0.5), std::log(0.25)}}};
  CHECK(std::fabs(perplexity(root8) - 2.8284271247) < 1e-6);
  CHECK_THROWS(perplexity({}));
}

TEST_CASE("perplexity with identical references equals the single reference") {
  const std::vector<double> ref{-0.3, -1.2, -2.5, -0.01};
  CHECK(perplexity({{ref, ref, ref}}) == doctest::Approx(perplexity({{ref}})).epsilon(1e-15));
}

TEST_CASE("bleu identical and disjoint corpora") {
  const std::vector<Tokens> hyps{{"a", "man", "is", "sleeping", "now"}, {"dogs", "run", "very", "fast"}};
  const std::vector<std::vector<Tokens>> refs{{{"x"}, hyps[0], {"y", "z"}}, {hyps[1]}};
  CHECK(bleu(hyps, refs) == doctest::Approx(100.0));
  const std::vector<std::vector<Tokens>> disjoint{{{"q", "r"}}, {{"s"}}};
  CHECK(bleu(hyps, disjoint) == 0.0);
}

TEST_CASE("bleu hand-worked cases") {
  // No 4-grams in a 3-token hypothesis, so unsmoothed BLEU-4 is 0.
  const std::vector<Tokens> h1{{"the", "cat", "sat"}};
  const std::vector<std::vector<Tokens>> r1{{{"the", "cat", "sat", "down"}}};
  CHECK(bleu(h1, r1) == 0.0);
  // Smoothed: every precision is 1, brevity penalty exp(1 - 4/3).
  CHECK(std::fabs(bleu(h1, r1, {4, true}) - 100.0 * std::exp(-1.0 / 3.0)) < 1e-6);

  // p1 = 5/6 (clipped "the"), p2 = 3/5, p3 = 2/4, p4 = 1/3, equal lengths.
  const std::vector<Tokens> h2{{"the", "cat", "sat", "on", "the", "mat"}};
  const std::vector<std::vector<Tokens>> r2{{{"the", "cat", "sat", "on", "a", "mat"}}};
  CHECK(std::fabs(bleu(h2, r2) - 100.0 * std::pow(1.0 / 12.0, 0.25)) < 1e-6);
  const auto stats = bleu_statistics(h2, r2);
  CHECK(stats.matches == std::vector<long>{5, 3, 2, 1});
  CHECK(stats.totals == std::vector<long>{6, 5, 4, 3});
}

TEST_CASE("bleu agrees with the reference implementation on random corpora") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto hyps = random_sentences(rng, 6);
    std::vector<std::vector<Tokens>> refs;
    for (int i = 0; i < 6; ++i) refs.push_back(random_sentences(rng, 3));
    for (bool smooth : {false, true})
      CHECK(bleu(hyps, refs, {4, smooth}) ==
            doctest::Approx(oracles::bleu(hyps, refs, smooth)).epsilon(1e-12));
  }
}

TEST_CASE("bleu is invariant to example order") {
  std::mt19937_64 rng(12);
  auto hyps = random_sentences(rng, 8);
  std::vector<std::vector<Tokens>> refs;
  for (int i = 0; i < 8; ++i) refs.push_back(random_sentences(rng, 3));
  const double before = bleu(hyps, refs, {4, true});
  std::vector<int> perm{3, 1, 7, 0, 5, 2, 6, 4};
  std::vector<Tokens> h2;
  std::vector<std::vector<Tokens>> r2;
  for (int p : perm) {
    h2.push_back(hyps[p]);
    r2.push_back(refs[p]);
  }
  CHECK(bleu(h2, r2, {4, true}) == doctest::Approx(before).epsilon(1e-14));
  CHECK_THROWS_AS(bleu(hyps, std::span(refs).first(3)), std::invalid_argument);
}

TEST_CASE("annotator partial credit and correct@k") {
  const auto r = record(0, {"cat", "mat"}, {{{"cat", "mat"}, {"mat"}, {}}});
  CHECK(annotator_score(r, 1) == 0.5);
  CHECK(annotator_score(r, 0) == 1.0);
  CHECK(annotator_score(r, 2) == 0.0);
  const std::vector<AnnotationRecord> one{r};
  CHECK(correct_at_k(one, 1) == doctest::Approx(50.0));

  std::vector<AnnotationRecord> perfect;
  for (int i = 0; i < 100; ++i) perfect.push_back(record(i, {"x"}, {{{"x"}, {"x"}, {"x"}}}));
  CHECK(correct_at_k(perfect) == 100.0);
  CHECK_THROWS_AS(correct_at_k(std::span(perfect).first(99)), DataError);

  // Only the first k examples by index count.
  perfect.push_back(record(-1, {"x"}, {{{}, {}, {}}}));
  CHECK(correct_at_k(perfect, 100) == doctest::Approx(99.0));
}

TEST_CASE("correct@k rejects malformed annotations") {
  CHECK_THROWS_AS(annotator_score(record(0, {}, {}), 0), DataError);
  CHECK_THROWS_AS(annotator_score(record(0, {"a"}, {{{"b"}, {}, {}}}), 0), DataError);
  std::istringstream missing(R"({"example_index": 0, "required_args": ["a"], "annotator_1": ["a"], "annotator_2": []})");
  CHECK_THROWS_AS(parse_annotations(missing), DataError);
  std::istringstream ok(R"({"example_index": 4, "required_args": ["a","b"], "annotator_1": ["a"], "annotator_2": [], "annotator_3": ["b","a"]})"
                        "\n\n");
  const auto parsed = parse_annotations(ok);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].example_index == 4);
  CHECK(correct_at_k(parsed, 1) == doctest::Approx(50.0));
}

TEST_CASE("correct@k grows with mentions") {
  auto r = record(0, {"a", "b", "c"}, {{{"a"}, {}, {"b"}}});
  std::vector<AnnotationRecord> v{r};
  const double before = correct_at_k(v, 1);
  v[0].annotators[1].push_back("c");
  CHECK(correct_at_k(v, 1) > before);
}

TEST_CASE("wilcoxon degenerate and all-positive cases") {
  const std::vector<double> a{1, 2, 3, 4, 5, 6};
  const auto same = wilcoxon_signed_rank(a, a);
  CHECK_FALSE(same.sufficient);
  CHECK(same.n == 0);

  std::vector<double> x, y;
  for (int i = 0; i < 10; ++i) {
    x.push_back(10.0 + i * 0.7);
    y.push_back(i * 0.3);
  }
  const auto res = wilcoxon_signed_rank(x, y);
  CHECK(res.sufficient);
  CHECK(res.exact);
  CHECK(res.w_plus == 55.0);
  CHECK(res.p_value == doctest::Approx(2.0 / 1024.0).epsilon(1e-12));
}

TEST_CASE("wilcoxon exact p-values match brute-force enumeration") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + trial % 8;  // 5..12
    std::vector<double> a(n), b(n, 0.0);
    // Rounded values force tied magnitudes and occasional zeros.
    std::uniform_int_distribution<int> v(-4, 4);
    for (int i = 0; i < n; ++i) a[i] = v(rng);
    const auto res = wilcoxon_signed_rank(a, b);
    if (!res.sufficient) continue;
    CHECK(res.p_value == doctest::Approx(oracles::wilcoxon_brute_force(a)).epsilon(1e-12));
  }
}

TEST_CASE("mid-ranks") {
  const std::vector<double> d{0.0, -2.0, 1.0, 2.0, 3.0};
  CHECK(signed_rank_magnitudes(d) == std::vector<double>{2.5, 1.0, 2.5, 4.0});
}

TEST_CASE("wilcoxon rejection rate is calibrated under the null") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g;
  for (int n : {15, 40}) {
    int rejections = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
      std::vector<double> a(n), b(n);
      for (int i = 0; i < n; ++i) {
        a[i] = g(rng);
        b[i] = g(rng);
      }
      rejections += wilcoxon_signed_rank(a, b).p_value < 0.05;
    }
    INFO("n = " << n << " rejections = " << rejections);
    CHECK(rejections >= 25);
    CHECK(rejections <= 75);
  }
}

TEST_CASE("seed aggregation") {
  const std::vector<SeedRun> runs{{3000, {{"accuracy", 80.0}}}, {1000, {{"accuracy", 78.0}}},
                                  {2000, {{"accuracy", 79.0}}}};
  const auto s = aggregate_seeds(runs).at("accuracy");
  CHECK(s.formatted == "79.00 (1.00)");
  CHECK(s.runs == 3);
  const std::vector<SeedRun> single{{1000, {{"bleu", 79.0}}}};
  const auto one = aggregate_seeds(single).at("bleu");
  CHECK(one.formatted == "79.00");
  CHECK_FALSE(one.stddev.has_value());
  std::vector<SeedRun> reversed(runs.rbegin(), runs.rend());
  CHECK(aggregate_seeds(reversed).at("accuracy").formatted == "79.00 (1.00)");
  CHECK_THROWS(aggregate_seeds({}));
}
