#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gradcheck.hpp"
#include "interaction/seq2seq.hpp"

using namespace interaction;

namespace {

ModelConfig small_config(int vocab = 30) {
  ModelConfig c;
  c.layers = 2;
  c.hidden = 16;
  c.heads = 2;
  c.ffn = 32;
  c.vocab_size = vocab;
  c.dropout = 0.0;
  return c;
}

Example example(std::vector<std::vector<int>> explanations) {
  Example e;
  e.premise = {2, 10, 11, 12, 3};
  e.hypothesis = {2, 10, 13, 3};
  e.explanations = std::move(explanations);
  return e;
}

void flatten_output(Seq2Seq& s, int favoured) {
  Var w = s.decoder().output().weight, b = s.decoder().output().bias;
  std::fill(w.mutable_value().data.begin(), w.mutable_value().data.end(), 0.0);
  std::fill(b.mutable_value().data.begin(), b.mutable_value().data.end(), 0.0);
  if (favoured >= 0) b.mutable_value()(0, favoured) = 1e3;
}

}  // namespace

TEST_CASE("uniform decoder gives ln V, a certain one gives 0") {
  ParameterStore store(1);
  Seq2Seq s(store, GenerationMode::full, small_config());
  flatten_output(s, -1);
  const std::vector<Example> batch{example({{2, 14, 15, 16, 3}}), example({{2, 17, 3}})};
  CHECK(s.generation_loss(batch, RunState{}).item() == doctest::Approx(std::log(30.0)).epsilon(1e-12));

  flatten_output(s, Vocabulary::eos);
  const std::vector<Example> stop{example({{2, 3}})};
  CHECK(s.generation_loss(stop, RunState{}).item() < 1e-12);
  CHECK(s.greedy_decode(stop[0].premise, stop[0].hypothesis, 25).empty());
}

TEST_CASE("three identical references give the single-reference loss") {
  ParameterStore store(2);
  Seq2Seq s(store, GenerationMode::full, small_config());
  const std::vector<int> ref{2, 14, 15, 16, 3};
  const std::vector<Example> one{example({ref}), example({{2, 17, 18, 3}})};
  const std::vector<Example> three{example({ref, ref, ref}),
                                   example({{2, 17, 18, 3}, {2, 17, 18, 3}, {2, 17, 18, 3}})};
  CHECK(std::fabs(s.generation_loss(three, RunState{}).item() -
                  s.generation_loss(one, RunState{}).item()) < 1e-12);
}

TEST_CASE("agnostic mode never reads the premise") {
  ParameterStore store(3);
  Seq2Seq s(store, GenerationMode::agnostic, small_config());
  auto a = example({{2, 14, 3}});
  auto b = a;
  b.premise = {2, 20, 21, 22, 23, 3};
  const std::vector<Example> ba{a}, bb{b};
  CHECK(s.generation_loss(ba, RunState{}).item() == s.generation_loss(bb, RunState{}).item());
  CHECK(s.greedy_decode(a.premise, a.hypothesis, 12) == s.greedy_decode(b.premise, b.hypothesis, 12));
  CHECK(s.reference_log_probs(a.premise, a.hypothesis, a.explanations[0]) ==
        s.reference_log_probs(b.premise, b.hypothesis, a.explanations[0]));

  ParameterStore full_store(3);
  Seq2Seq full(full_store, GenerationMode::full, small_config());
  CHECK(full.generation_loss(ba, RunState{}).item() != full.generation_loss(bb, RunState{}).item());
}

TEST_CASE("greedy decoding is bounded and deterministic") {
  ParameterStore store(4);
  Seq2Seq s(store, GenerationMode::full, small_config());
  const auto e = example({});
  for (int max_len : {1, 3, 25}) {
    const auto out = s.greedy_decode(e.premise, e.hypothesis, max_len);
    CHECK(static_cast<int>(out.size()) <= max_len);
    CHECK(out == s.greedy_decode(e.premise, e.hypothesis, max_len));
  }
}

TEST_CASE("reference log-probabilities agree with the loss") {
  ParameterStore store(5);
  Seq2Seq s(store, GenerationMode::full, small_config());
  const std::vector<int> ref{2, 14, 15, 3};
  const auto e = example({ref});
  const auto lp = s.reference_log_probs(e.premise, e.hypothesis, ref);
  REQUIRE(lp.size() == 3);
  double nll = 0.0;
  for (double v : lp) nll -= v;
  const std::vector<Example> batch{e};
  CHECK(s.generation_loss(batch, RunState{}).item() == doctest::Approx(nll / 3.0).epsilon(1e-12));
}

TEST_CASE("generation loss gradients") {
  ParameterStore store(6);
  Seq2Seq s(store, GenerationMode::full, small_config());
  const std::vector<Example> batch{example({{2, 14, 15, 3}}), example({{2, 16, 3}})};
  auto loss = [&] { return s.generation_loss(batch, RunState{}); };
  const auto errors = testing_support::pool_errors(
      testing_support::check_gradients(testing_support::all_parameters(store), loss, 1e-5, 6),
      testing_support::affine_group);
  for (const auto& [name, err] : errors) {
    INFO(name);
    CHECK(err.relative <= 1e-3);
  }
}
