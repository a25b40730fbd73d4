#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "interaction/classifiers.hpp"
#include "interaction/interaction.hpp"
#include "interaction/random.hpp"

using namespace interaction;

namespace {

ModelConfig small_config(int vocab = 30) {
  ModelConfig c;
  c.layers = 1;
  c.hidden = 16;
  c.heads = 2;
  c.ffn = 32;
  c.vocab_size = vocab;
  c.dropout = 0.0;
  return c;
}

CvaeConfig small_cvae() {
  CvaeConfig c;
  c.latent_dim = 8;
  return c;
}

Example example(std::vector<int> hypothesis, std::vector<std::vector<int>> explanations, int label) {
  Example e;
  e.premise = {2, 10, 11, 12, 3};
  e.hypothesis = std::move(hypothesis);
  e.explanations = std::move(explanations);
  e.label = label;
  return e;
}

NoiseSource fixed_noise() {
  return [](int dim) {
    std::mt19937_64 rng(31);
    Matrix m(1, dim);
    for (double& v : m.data) v = standard_normal(rng);
    return m;
  };
}

SequenceStates states(int rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix m(rows, 16);
  for (double& v : m.data) v = standard_normal(rng);
  SequenceStates s;
  s.values = Var::constant(m);
  s.mask.assign(rows, 1);
  return s;
}

const std::vector<Example> kBatch{example({2, 10, 13, 3}, {{2, 14, 15, 3}}, 0),
                                  example({2, 16, 3}, {{2, 17, 18, 19, 3}}, 2)};

}  // namespace

TEST_CASE("head widths per variant") {
  for (auto [v, width] : {std::pair{PredictorVariant::m1, 16}, {PredictorVariant::m2, 16},
                          {PredictorVariant::m3, 32}}) {
    ParameterStore store(1);
    InteractionModel m(store, small_config(), small_cvae(), v);
    CHECK(m.head_width() == width);
  }
  CHECK(parse_predictor_variant("m3") == PredictorVariant::m3);
}

TEST_CASE("predictor inputs per variant") {
  const auto x1 = states(5, 1), x2 = states(5, 2), y1 = states(4, 3), y2 = states(4, 4);
  ParameterStore s1(2), s2(2), s3(2);
  InteractionModel m1(s1, small_config(), small_cvae(), PredictorVariant::m1);
  InteractionModel m2(s2, small_config(), small_cvae(), PredictorVariant::m2);
  InteractionModel m3(s3, small_config(), small_cvae(), PredictorVariant::m3);

  CHECK(m1.predictor_logits(&x1, &y1).value().data == m1.predictor_logits(&x1, &y2).value().data);
  CHECK(m1.predictor_logits(&x1, nullptr).value().data == m1.predictor_logits(&x1, &y2).value().data);
  CHECK(m2.predictor_logits(&x1, &y1).value().data == m2.predictor_logits(&x2, &y1).value().data);
  CHECK(m3.predictor_logits(&x1, &y1).value().data != m3.predictor_logits(&x2, &y1).value().data);
  CHECK(m3.predictor_logits(&x1, &y1).value().data != m3.predictor_logits(&x1, &y2).value().data);

  CHECK_THROWS_AS(m1.predictor_logits(nullptr, &y1), std::invalid_argument);
  CHECK_THROWS_AS(m2.predictor_logits(&x1, nullptr), std::invalid_argument);
  CHECK_THROWS_AS(m3.predictor_logits(&x1, nullptr), std::invalid_argument);
}

TEST_CASE("joint loss composition") {
  ParameterStore store(3);
  InteractionModel m(store, small_config(), small_cvae(), PredictorVariant::m3);
  std::mt19937_64 rng(0);
  const RunState run{true, 0.0, &rng};
  const auto with = m.joint_loss(kBatch, run, 1.0, 1.0, fixed_noise());
  const auto without = m.joint_loss(kBatch, run, 1.0, 0.0, fixed_noise());
  CHECK(without.objective.item() == without.elbo.objective.item());
  CHECK(with.elbo.objective.item() == doctest::Approx(m.core().elbo_loss(kBatch, run, 1.0, fixed_noise()).objective.item()).epsilon(1e-12));
  CHECK(with.objective.item() ==
        doctest::Approx(with.elbo.objective.item() + with.classification.item()).epsilon(1e-12));
  const auto half = m.joint_loss(kBatch, run, 1.0, 0.5, fixed_noise());
  CHECK(half.objective.item() ==
        doctest::Approx(half.elbo.objective.item() + 0.5 * half.classification.item()).epsilon(1e-12));
}

TEST_CASE("predictor head gradient comes from the classification term alone") {
  ParameterStore store(4);
  InteractionModel m(store, small_config(), small_cvae(), PredictorVariant::m3);
  std::mt19937_64 rng(0);
  const RunState run{true, 0.0, &rng};
  const double lambda = 0.7;

  store.zero_grad();
  backward(m.joint_loss(kBatch, run, 1.0, lambda, fixed_noise()).objective);
  const Matrix joint = store.get("predictor.weight").grad();

  store.zero_grad();
  backward(ag::scale(m.joint_loss(kBatch, run, 1.0, lambda, fixed_noise()).classification, lambda));
  const Matrix ce_only = store.get("predictor.weight").grad();
  REQUIRE(joint.size() == ce_only.size());
  for (std::size_t i = 0; i < joint.size(); ++i)
    CHECK(joint.data[i] == doctest::Approx(ce_only.data[i]).epsilon(1e-12));
}

TEST_CASE("joint loss gradients for M1 and M2") {
  for (auto v : {PredictorVariant::m1, PredictorVariant::m2}) {
    ParameterStore store(5);
    InteractionModel m(store, small_config(), small_cvae(), v);
    std::mt19937_64 rng(0);
    const RunState run{true, 0.0, &rng};
    auto loss = [&] { return m.joint_loss(kBatch, run, 1.0, 1.0, fixed_noise()).objective; };
    const auto errors = testing_support::pool_errors(
        testing_support::check_gradients(testing_support::all_parameters(store), loss, 1e-5, 5),
        testing_support::affine_group);
    for (const auto& [name, err] : errors) {
      INFO(predictor_variant_name(v) << " " << name);
      CHECK(err.relative <= 1e-3);
    }
  }
}

TEST_CASE("variants share one generative core") {
  ParameterStore s1(6), s2(6), s3(6);
  InteractionModel m1(s1, small_config(), small_cvae(), PredictorVariant::m1);
  InteractionModel m2(s2, small_config(), small_cvae(), PredictorVariant::m2);
  InteractionModel m3(s3, small_config(), small_cvae(), PredictorVariant::m3);
  const double a = m1.core().elbo_loss(kBatch, RunState{}, 1.0).objective.item();
  CHECK(m2.core().elbo_loss(kBatch, RunState{}, 1.0).objective.item() == a);
  CHECK(m3.core().elbo_loss(kBatch, RunState{}, 1.0).objective.item() == a);
}

TEST_CASE("step one is deterministic and matches step two at k = 0") {
  for (auto v : {PredictorVariant::m1, PredictorVariant::m2, PredictorVariant::m3}) {
    ParameterStore store(7);
    InteractionModel m(store, small_config(), small_cvae(), v);
    const auto& e = kBatch[0];
    const auto a = m.step_one(e.premise, e.hypothesis);
    const auto b = m.step_one(e.premise, e.hypothesis);
    CHECK(a.label == b.label);
    CHECK(a.explanation == b.explanation);

    const auto five = m.step_two(e.premise, e.hypothesis, kDefaultKValues);
    REQUIRE(five.size() == 5);
    CHECK(five[2] == a.explanation);
    const double zero[] = {0.0};
    CHECK(m.step_two(e.premise, e.hypothesis, zero).front() == a.explanation);

    const auto out = m.explain(e.premise, e.hypothesis, kDefaultKValues);
    CHECK(out.diverse_explanations == five);
    CHECK(out.map_explanation == a.explanation);
    CHECK(out.label == a.label);
  }
}

TEST_CASE("posterior interpolation needs an explanation") {
  ParameterStore store(8);
  InteractionModel m(store, small_config(), small_cvae(), PredictorVariant::m1);
  const auto& e = kBatch[0];
  InterpolationOptions opt;
  opt.source = InterpolationOptions::Source::posterior;
  CHECK_THROWS_AS(m.step_two(e.premise, e.hypothesis, kDefaultKValues, opt), std::invalid_argument);
  CHECK(m.step_two(e.premise, e.hypothesis, kDefaultKValues, opt, e.explanations[0]).size() == 5);
}

TEST_CASE("interpolation points") {
  const LatentGaussian g{{1.0, -1.0, 0.5}, {0.0, std::log(2.0), std::log(0.5)}};
  const auto pts = interpolation_points(g, kDefaultKValues);
  REQUIRE(pts.size() == 5);
  CHECK(pts[2] == g.mean);
  CHECK(pts[4][0] == doctest::Approx(3.0));
  CHECK(pts[4][1] == doctest::Approx(3.0));
  CHECK(pts[0][2] == doctest::Approx(-0.5));

  const double ks[] = {-1.0, 1.0};
  const auto one_dim = interpolation_points(g, ks, 1);
  CHECK(one_dim[0][0] == 1.0);
  CHECK(one_dim[0][2] == 0.5);
  CHECK(one_dim[1][1] == doctest::Approx(1.0));
  CHECK_THROWS(interpolation_points(g, ks, 3));

  // A collapsed spread puts every point on the mean.
  const LatentGaussian collapsed{{0.3, 0.7}, {-800.0, -800.0}};
  for (const auto& p : interpolation_points(collapsed, kDefaultKValues)) CHECK(p == collapsed.mean);
}
