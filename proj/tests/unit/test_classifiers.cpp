#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gradcheck.hpp"
#include "interaction/classifiers.hpp"
#include "interaction/corpus.hpp"

using namespace interaction;

namespace {

ModelConfig small_config(int vocab = 40) {
  ModelConfig c;
  c.layers = 1;
  c.hidden = 16;
  c.heads = 2;
  c.ffn = 32;
  c.vocab_size = vocab;
  c.dropout = 0.0;
  return c;
}

const std::vector<int> kPremise{2, 10, 11, 12, 3};
const std::vector<int> kHypothesis{2, 10, 13, 3};

}  // namespace

TEST_CASE("concatenated pair layout") {
  std::vector<int> starts;
  const auto ids = concat_pair(kPremise, kHypothesis, &starts);
  CHECK(ids == std::vector<int>{2, 10, 11, 12, 3, 2, 10, 13, 3});
  CHECK(starts == std::vector<int>{0, 5});
  CHECK(ids[0] == Vocabulary::bos);
}

TEST_CASE("logit shapes for every variant") {
  for (auto kind : {ClassifierKind::separate, ClassifierKind::mixture, ClassifierKind::premise_agnostic}) {
    ParameterStore store(1);
    Classifier c(store, kind, small_config());
    const auto logits = c.logits(kPremise, kHypothesis, RunState{});
    CHECK(logits.rows() == 1);
    CHECK(logits.cols() == 3);
    CHECK(c.head_width() == (kind == ClassifierKind::separate ? 64 : 16));
    CHECK_THROWS(c.logits(kPremise, {}, RunState{}));
    if (kind != ClassifierKind::premise_agnostic) CHECK_THROWS(c.logits({}, kHypothesis, RunState{}));
  }
  CHECK(parse_classifier_kind("premise_agnostic") == ClassifierKind::premise_agnostic);
  CHECK_THROWS(parse_classifier_kind("cross"));
}

TEST_CASE("premise-agnostic logits ignore the premise") {
  ParameterStore store(2);
  Classifier c(store, ClassifierKind::premise_agnostic, small_config());
  const auto a = c.logits(kPremise, kHypothesis, RunState{}).value();
  const std::vector<int> other{2, 30, 31, 3};
  CHECK(c.logits(other, kHypothesis, RunState{}).value().data == a.data);
  CHECK(c.logits({}, kHypothesis, RunState{}).value().data == a.data);
}

TEST_CASE("separate features: u - v vanishes for identical inputs") {
  ParameterStore store(3);
  Classifier c(store, ClassifierKind::separate, small_config());
  // With premise == hypothesis the premise and hypothesis encoders still
  // differ, so u != v in general; tie them by copying the weights.
  const auto& entries = store.entries();
  for (const auto& e : entries) {
    if (e.name.rfind("premise_encoder.", 0) != 0) continue;
    Var dst = e.var;
    dst.mutable_value() = store.get("hypothesis_encoder." + e.name.substr(16)).value();
  }
  const auto before = c.logits(kHypothesis, kHypothesis, RunState{}).value();
  Var head = store.get("head.weight");
  for (int r = 32; r < 48; ++r)
    for (int k = 0; k < 3; ++k) head.mutable_value()(r, k) += 5.0;
  const auto after = c.logits(kHypothesis, kHypothesis, RunState{}).value();
  for (int k = 0; k < 3; ++k) CHECK(after(0, k) == doctest::Approx(before(0, k)).epsilon(1e-14));
  // The difference block does matter for distinct inputs.
  const auto distinct = c.logits(kPremise, kHypothesis, RunState{}).value();
  for (int r = 32; r < 48; ++r)
    for (int k = 0; k < 3; ++k) head.mutable_value()(r, k) -= 5.0;
  CHECK(c.logits(kPremise, kHypothesis, RunState{}).value().data != distinct.data);
}

TEST_CASE("classification loss") {
  Var uniform = Var::constant(Matrix(1, 3, 0.7));
  CHECK(classification_loss(uniform, 1).item() == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  Matrix sure(1, 3);
  sure.data = {10.0, -10.0, -10.0};
  CHECK(classification_loss(Var::constant(sure), 0).item() < 1e-4);
  CHECK(classification_loss(Var::constant(sure), 0).item() > 0.0);

  std::vector<Var> logits;
  const std::vector<int> labels{0, 2, 1};
  double mean = 0.0;
  for (int i = 0; i < 3; ++i) {
    Matrix m(1, 3);
    m.data = {0.1 * i, -0.3, 0.5 * i};
    logits.push_back(Var::constant(m));
    mean += classification_loss(logits.back(), labels[i]).item() / 3.0;
  }
  CHECK(mean_classification_loss(logits, labels).item() == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("argmax is shift invariant and breaks ties low") {
  Matrix m(1, 3);
  m.data = {0.2, 1.5, -0.1};
  CHECK(argmax_label(m) == 1);
  for (double& v : m.data) v += 123.0;
  CHECK(argmax_label(m) == 1);
  m.data = {1.0, 1.0, 1.0};
  CHECK(argmax_label(m) == 0);
}

TEST_CASE("separate is twice mixture up to the head width") {
  for (int vocab : {40, 100, 250}) {
    const auto cfg = small_config(vocab);
    ParameterStore s(1), m(1), a(1);
    Classifier sep(s, ClassifierKind::separate, cfg);
    Classifier mix(m, ClassifierKind::mixture, cfg);
    Classifier agn(a, ClassifierKind::premise_agnostic, cfg);
    const std::size_t h = cfg.hidden;
    const std::size_t head_sep = 4 * h * 3 + 3, head_mix = h * 3 + 3;
    CHECK(s.count() == 2 * param_count::encoder(cfg) + head_sep);
    CHECK(m.count() == param_count::encoder(cfg) + head_mix);
    CHECK(a.count() == m.count());
    CHECK(static_cast<long>(s.count()) - 2 * static_cast<long>(m.count()) ==
          static_cast<long>(6 * h - 3));
  }
}

TEST_CASE("absolute difference switch") {
  ParameterStore s1(4), s2(4);
  Classifier raw(s1, ClassifierKind::separate, small_config(), false);
  Classifier abs(s2, ClassifierKind::separate, small_config(), true);
  CHECK(raw.logits(kPremise, kHypothesis, RunState{}).value().data !=
        abs.logits(kPremise, kHypothesis, RunState{}).value().data);
}

TEST_CASE("classifier gradients match finite differences") {
  for (auto kind : {ClassifierKind::separate, ClassifierKind::mixture}) {
    ParameterStore store(5);
    Classifier c(store, kind, small_config());
    auto loss = [&] { return classification_loss(c.logits(kPremise, kHypothesis, RunState{}), 2); };
    const auto errors = testing_support::pool_errors(
        testing_support::check_gradients(testing_support::all_parameters(store), loss, 1e-5, 6),
        testing_support::affine_group);
    for (const auto& [name, err] : errors) {
      INFO(name);
      CHECK(err.relative <= 1e-3);
    }
  }
}
