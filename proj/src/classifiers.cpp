#include "interaction/classifiers.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "interaction/corpus.hpp"

namespace interaction {

std::string_view classifier_kind_name(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::separate:
      return "separate";
    case ClassifierKind::mixture:
      return "mixture";
    case ClassifierKind::premise_agnostic:
      return "premise_agnostic";
  }
  return "mixture";
}

ClassifierKind parse_classifier_kind(std::string_view name) {
  if (name == "separate") return ClassifierKind::separate;
  if (name == "mixture") return ClassifierKind::mixture;
  if (name == "premise_agnostic" || name == "agnostic") return ClassifierKind::premise_agnostic;
  throw std::invalid_argument("unknown classifier kind: " + std::string(name));
}

std::vector<int> concat_pair(std::span<const int> premise, std::span<const int> hypothesis,
                             std::vector<int>* segment_starts) {
  std::vector<int> ids(premise.begin(), premise.end());
  ids.insert(ids.end(), hypothesis.begin(), hypothesis.end());
  if (segment_starts) *segment_starts = {0, static_cast<int>(premise.size())};
  return ids;
}

Classifier::Classifier(ParameterStore& store, ClassifierKind kind, const ModelConfig& config,
                       bool absolute_difference)
    : kind_(kind), absolute_difference_(absolute_difference) {
  config.validate();
  if (kind == ClassifierKind::separate) {
    premise_encoder_ = Encoder(store, "premise_encoder", config);
    encoder_ = Encoder(store, "hypothesis_encoder", config);
    head_ = Affine(store, "head", 4 * config.hidden, kNumLabels);
  } else {
    encoder_ = Encoder(store, "encoder", config);
    head_ = Affine(store, "head", config.hidden, kNumLabels);
  }
}

Var Classifier::logits(std::span<const int> premise, std::span<const int> hypothesis,
                       const RunState& run) const {
  if (hypothesis.empty()) throw std::invalid_argument("classify: missing hypothesis");
  switch (kind_) {
    case ClassifierKind::separate: {
      if (premise.empty()) throw std::invalid_argument("classify: missing premise");
      const Var u = ag::slice_rows(premise_encoder_(premise, {0}, run).values, 0, 1);
      const Var v = ag::slice_rows(encoder_(hypothesis, {0}, run).values, 0, 1);
      Var diff = ag::sub(u, v);
      if (absolute_difference_) diff = ag::abs(diff);
      return head_(ag::concat_cols({u, v, diff, ag::mul(u, v)}));
    }
    case ClassifierKind::mixture: {
      if (premise.empty()) throw std::invalid_argument("classify: missing premise");
      std::vector<int> segments;
      const auto ids = concat_pair(premise, hypothesis, &segments);
      return head_(ag::slice_rows(encoder_(ids, segments, run).values, 0, 1));
    }
    case ClassifierKind::premise_agnostic:
      return head_(ag::slice_rows(encoder_(hypothesis, {0}, run).values, 0, 1));
  }
  throw std::logic_error("unreachable classifier kind");
}

Var classification_loss(const Var& logits, int label) {
  if (label < 0 || label >= kNumLabels) throw std::invalid_argument("label id out of range");
  const int target[1] = {label};
  return ag::cross_entropy_sum(logits, target);
}

Var mean_classification_loss(std::span<const Var> logits, std::span<const int> labels) {
  if (logits.size() != labels.size() || logits.empty())
    throw std::invalid_argument("mean_classification_loss: size mismatch");
  Var total = classification_loss(logits[0], labels[0]);
  for (std::size_t i = 1; i < logits.size(); ++i)
    total = ag::add(total, classification_loss(logits[i], labels[i]));
  return ag::scale(total, 1.0 / static_cast<double>(logits.size()));
}

int argmax_label(const Matrix& logits) {
  const auto row = logits.row(0);
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace interaction
