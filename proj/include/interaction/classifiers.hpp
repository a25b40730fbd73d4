#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "interaction/parameters.hpp"
#include "interaction/transformer.hpp"

namespace interaction {

enum class ClassifierKind { separate, mixture, premise_agnostic };

std::string_view classifier_kind_name(ClassifierKind kind);
ClassifierKind parse_classifier_kind(std::string_view name);

// Concatenates two <bos>...<eos> sequences and returns the segment starts.
std::vector<int> concat_pair(std::span<const int> premise, std::span<const int> hypothesis,
                             std::vector<int>* segment_starts);

// Label predictor over premise/hypothesis encodings:
//   separate         [u; v; u-v; u*v] from two encoders' <bos> outputs
//   mixture          <bos> output of one encoder over the concatenated pair
//   premise_agnostic <bos> output of an encoder over the hypothesis only
// followed by a single affine map to three logits.
class Classifier {
 public:
  Classifier(ParameterStore& store, ClassifierKind kind, const ModelConfig& config,
             bool absolute_difference = false);

  // `premise` may be empty only for premise_agnostic.
  Var logits(std::span<const int> premise, std::span<const int> hypothesis,
             const RunState& run) const;

  ClassifierKind kind() const { return kind_; }
  int head_width() const { return head_.in(); }

 private:
  ClassifierKind kind_;
  bool absolute_difference_;
  Encoder premise_encoder_;  // separate only
  Encoder encoder_;
  Affine head_;
};

// -log softmax(logits)[label] for a 1 x 3 logit row.
Var classification_loss(const Var& logits, int label);

// Mean of per-item classification losses.
Var mean_classification_loss(std::span<const Var> logits, std::span<const int> labels);

int argmax_label(const Matrix& logits);

}  // namespace interaction
