#include "interaction/seq2seq.hpp"

#include <stdexcept>
#include <string>

#include "interaction/classifiers.hpp"

namespace interaction {

std::string_view generation_mode_name(GenerationMode mode) {
  return mode == GenerationMode::agnostic ? "agnostic" : "full";
}

GenerationMode parse_generation_mode(std::string_view name) {
  if (name == "agnostic") return GenerationMode::agnostic;
  if (name == "full") return GenerationMode::full;
  throw std::invalid_argument("unknown generation mode: " + std::string(name));
}

Seq2Seq::Seq2Seq(ParameterStore& store, GenerationMode mode, const ModelConfig& config)
    : mode_(mode) {
  config.validate();
  encoder_ = Encoder(store, "encoder", config);
  decoder_ = Decoder(store, "decoder", config);
}

SequenceStates Seq2Seq::memory(std::span<const int> premise, std::span<const int> hypothesis,
                               const RunState& run) const {
  if (mode_ == GenerationMode::agnostic) return encoder_(hypothesis, {0}, run);
  std::vector<int> segments;
  const auto ids = concat_pair(premise, hypothesis, &segments);
  return encoder_(ids, segments, run);
}

Var Seq2Seq::generation_loss(std::span<const Example> batch, const RunState& run) const {
  if (batch.empty()) throw std::invalid_argument("generation_loss: empty batch");
  const std::size_t refs = batch.front().explanations.size();
  if (refs == 0) throw std::invalid_argument("generation_loss: batch has no explanations");
  std::vector<Var> totals(refs);
  std::vector<int> tokens(refs, 0);
  for (const auto& ex : batch) {
    const auto mem = memory(ex.premise, ex.hypothesis, run);
    for (std::size_t r = 0; r < refs; ++r) {
      auto loss = teacher_forced_loss(decoder_, ex.explanations.at(r), mem, run);
      totals[r] = totals[r].defined() ? ag::add(totals[r], loss.total) : loss.total;
      tokens[r] += loss.tokens;
    }
  }
  Var result;
  for (std::size_t r = 0; r < refs; ++r) {
    Var slot = ag::scale(totals[r], 1.0 / tokens[r]);
    result = result.defined() ? ag::add(result, slot) : slot;
  }
  return refs == 1 ? result : ag::scale(result, 1.0 / static_cast<double>(refs));
}

std::vector<int> Seq2Seq::greedy_decode(std::span<const int> premise,
                                        std::span<const int> hypothesis, int max_len) const {
  NoGradGuard no_grad;
  const auto mem = memory(premise, hypothesis, RunState{});
  return interaction::greedy_decode(decoder_, mem, max_len);
}

std::vector<double> Seq2Seq::reference_log_probs(std::span<const int> premise,
                                                 std::span<const int> hypothesis,
                                                 std::span<const int> target) const {
  NoGradGuard no_grad;
  const RunState eval;
  const auto mem = memory(premise, hypothesis, eval);
  const Var logits = decoder_.logits(target.first(target.size() - 1), mem, eval);
  return target_log_probs(logits.value(), target.subspan(1));
}

}  // namespace interaction
