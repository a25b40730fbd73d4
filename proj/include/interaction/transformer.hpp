#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "interaction/autograd.hpp"
#include "interaction/parameters.hpp"

namespace interaction {

struct ModelConfig {
  int layers = 6;
  int hidden = 512;
  int heads = 8;
  int ffn = 2048;
  int max_pos = 25;
  int vocab_size = 0;
  double dropout = 0.1;

  // Base transformer sizes used for full-corpus runs.
  static ModelConfig base(int vocab_size);
  // Laptop-sized profile for synthetic corpora and the acceptance suite.
  static ModelConfig toy(int vocab_size);

  void validate() const;
  int head_dim() const { return hidden / heads; }
};

class SequenceTooLong : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Encoder-side activations of one sequence (possibly several concatenated
// segments). `mask[i]` is true for real tokens.
struct SequenceStates {
  Var values;  // L x hidden
  std::vector<std::uint8_t> mask;
  std::vector<int> segment_starts{0};

  int length() const { return values.rows(); }
};

// Position index of every token, restarting at each segment start.
std::vector<int> segment_positions(int length, std::span<const int> segment_starts, int max_pos);

// Additive attention masks (0 or -inf).
Matrix key_padding_mask(int queries, std::span<const std::uint8_t> key_mask);
Matrix causal_mask(int length);

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore& store, const std::string& name, const ModelConfig& config);

  // sqrt(hidden) * token embedding + learned position embedding.
  SequenceStates operator()(std::span<const int> ids, std::vector<int> segment_starts,
                            const RunState& run) const;

  Var tokens;     // vocab x hidden
  Var positions;  // max_pos x hidden

 private:
  double scale_ = 1.0;
  int max_pos_ = 0;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& name, int hidden, int heads);

  Var operator()(const Var& query, const Var& memory, const Matrix* mask) const;

 private:
  Affine q_, k_, v_, o_;
  int heads_ = 1;
};

class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(ParameterStore& store, const std::string& name, const ModelConfig& config);
  Var operator()(const Var& x, const Matrix& mask, const RunState& run) const;

 private:
  MultiHeadAttention self_attn_;
  LayerNorm norm1_, norm2_;
  Affine ff1_, ff2_;
};

class DecoderLayer {
 public:
  DecoderLayer() = default;
  DecoderLayer(ParameterStore& store, const std::string& name, const ModelConfig& config);
  Var operator()(const Var& x, const Var& memory, const Matrix& self_mask,
                 const Matrix& memory_mask, const RunState& run) const;

 private:
  MultiHeadAttention self_attn_, cross_attn_;
  LayerNorm norm1_, norm2_, norm3_;
  Affine ff1_, ff2_;
};

// Post-norm transformer encoder with its own embedding table.
class Encoder {
 public:
  Encoder() = default;
  Encoder(ParameterStore& store, const std::string& name, const ModelConfig& config);

  SequenceStates embed(std::span<const int> ids, std::vector<int> segment_starts,
                       const RunState& run) const;
  SequenceStates encode(const SequenceStates& states, const RunState& run) const;
  SequenceStates operator()(std::span<const int> ids, std::vector<int> segment_starts,
                            const RunState& run) const {
    return encode(embed(ids, std::move(segment_starts), run), run);
  }

  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  Embedding embedding_;
  std::vector<EncoderLayer> layers_;
};

// Causal transformer decoder with cross-attention and an output projection.
class Decoder {
 public:
  Decoder() = default;
  Decoder(ParameterStore& store, const std::string& name, const ModelConfig& config);

  // Row t holds next-token logits after prefix position t.
  Var logits(std::span<const int> prefix_ids, const SequenceStates& memory,
             const RunState& run) const;

  const Affine& output() const { return output_; }
  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  Embedding embedding_;
  std::vector<DecoderLayer> layers_;
  Affine output_;
};

// Teacher-forced token cross-entropy of `target` (<bos> ... <eos>) under the
// decoder; returns the summed loss and the number of predicted tokens.
struct TokenLoss {
  Var total;
  int tokens = 0;
};
TokenLoss teacher_forced_loss(const Decoder& decoder, std::span<const int> target,
                              const SequenceStates& memory, const RunState& run);

// Greedy decoding from <bos>: appends the argmax (lowest id on ties) until
// <eos> or `max_len` generated tokens. The returned ids exclude <bos>/<eos>.
std::vector<int> greedy_decode(const Decoder& decoder, const SequenceStates& memory, int max_len);

// Closed-form trainable scalar counts for the blocks above.
namespace param_count {
std::size_t embedding(const ModelConfig& c);
std::size_t attention(const ModelConfig& c);
std::size_t encoder_layer(const ModelConfig& c);
std::size_t decoder_layer(const ModelConfig& c);
std::size_t encoder(const ModelConfig& c);
std::size_t decoder(const ModelConfig& c);  // includes the vocabulary projection
}  // namespace param_count

}  // namespace interaction
