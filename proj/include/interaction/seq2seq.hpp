#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "interaction/corpus.hpp"
#include "interaction/parameters.hpp"
#include "interaction/transformer.hpp"

namespace interaction {

// Agnostic: hypothesis -> explanation. Full: premise + hypothesis -> explanation.
enum class GenerationMode { agnostic, full };

std::string_view generation_mode_name(GenerationMode mode);
GenerationMode parse_generation_mode(std::string_view name);

class Seq2Seq {
 public:
  Seq2Seq(ParameterStore& store, GenerationMode mode, const ModelConfig& config);

  SequenceStates memory(std::span<const int> premise, std::span<const int> hypothesis,
                        const RunState& run) const;

  // Token-averaged teacher-forced cross-entropy over the batch. With several
  // reference slots the per-slot losses are averaged.
  Var generation_loss(std::span<const Example> batch, const RunState& run) const;

  std::vector<int> greedy_decode(std::span<const int> premise, std::span<const int> hypothesis,
                                 int max_len = 25) const;

  // log p(token) for every predicted position of `target`.
  std::vector<double> reference_log_probs(std::span<const int> premise,
                                          std::span<const int> hypothesis,
                                          std::span<const int> target) const;

  GenerationMode mode() const { return mode_; }
  const Decoder& decoder() const { return decoder_; }

 private:
  GenerationMode mode_;
  Encoder encoder_;
  Decoder decoder_;
};

}  // namespace interaction
