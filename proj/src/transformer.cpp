#include "interaction/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "interaction/corpus.hpp"

namespace interaction {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

ModelConfig ModelConfig::base(int vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  return c;
}

ModelConfig ModelConfig::toy(int vocab_size) {
  ModelConfig c;
  c.layers = 2;
  c.hidden = 64;
  c.heads = 2;
  c.ffn = 256;
  c.max_pos = 25;
  c.vocab_size = vocab_size;
  c.dropout = 0.1;
  return c;
}

void ModelConfig::validate() const {
  if (layers < 0) throw std::invalid_argument("layers must be >= 0");
  if (hidden < 1 || heads < 1) throw std::invalid_argument("hidden and heads must be positive");
  if (hidden % heads != 0) throw std::invalid_argument("hidden must be divisible by heads");
  if (ffn < 1) throw std::invalid_argument("ffn must be positive");
  if (max_pos < 3) throw std::invalid_argument("max_pos must be >= 3");
  if (vocab_size <= Vocabulary::num_special)
    throw std::invalid_argument("vocab_size must exceed the special token count");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
}

std::vector<int> segment_positions(int length, std::span<const int> segment_starts, int max_pos) {
  std::vector<int> pos(length);
  std::size_t seg = 0;
  int start = 0;
  for (int i = 0; i < length; ++i) {
    while (seg < segment_starts.size() && segment_starts[seg] <= i) start = segment_starts[seg++];
    pos[i] = i - start;
    if (pos[i] >= max_pos)
      throw SequenceTooLong("segment longer than the positional table (" +
                            std::to_string(max_pos) + " positions)");
  }
  return pos;
}

Matrix key_padding_mask(int queries, std::span<const std::uint8_t> key_mask) {
  const int keys = static_cast<int>(key_mask.size());
  Matrix m(queries, keys, 0.0);
  for (int i = 0; i < queries; ++i)
    for (int j = 0; j < keys; ++j)
      if (!key_mask[j]) m(i, j) = kNegInf;
  return m;
}

Matrix causal_mask(int length) {
  Matrix m(length, length, 0.0);
  for (int i = 0; i < length; ++i)
    for (int j = i + 1; j < length; ++j) m(i, j) = kNegInf;
  return m;
}

Embedding::Embedding(ParameterStore& store, const std::string& name, const ModelConfig& config)
    : tokens(store.create(name + ".tokens", config.vocab_size, config.hidden, Init::embedding_normal)),
      positions(store.create(name + ".positions", config.max_pos, config.hidden,
                             Init::embedding_normal)),
      scale_(std::sqrt(static_cast<double>(config.hidden))),
      max_pos_(config.max_pos) {}

SequenceStates Embedding::operator()(std::span<const int> ids, std::vector<int> segment_starts,
                                     const RunState& run) const {
  if (segment_starts.empty()) segment_starts.push_back(0);
  const auto pos = segment_positions(static_cast<int>(ids.size()), segment_starts, max_pos_);
  Var tok = ag::scale(ag::gather_rows(tokens, ids), scale_);
  Var x = ag::add(tok, ag::gather_rows(positions, pos));
  SequenceStates s;
  s.values = run.maybe_dropout(x);
  s.mask.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) s.mask[i] = ids[i] != Vocabulary::pad;
  s.segment_starts = std::move(segment_starts);
  return s;
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& name, int hidden,
                                       int heads)
    : q_(store, name + ".q", hidden, hidden),
      k_(store, name + ".k", hidden, hidden),
      v_(store, name + ".v", hidden, hidden),
      o_(store, name + ".o", hidden, hidden),
      heads_(heads) {}

Var MultiHeadAttention::operator()(const Var& query, const Var& memory, const Matrix* mask) const {
  const Var q = q_(query);
  const Var k = k_(memory);
  const Var v = v_(memory);
  const int dk = q.cols() / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Var> heads;
  heads.reserve(heads_);
  for (int h = 0; h < heads_; ++h) {
    const Var qh = ag::slice_cols(q, h * dk, dk);
    const Var kh = ag::slice_cols(k, h * dk, dk);
    const Var vh = ag::slice_cols(v, h * dk, dk);
    const Var scores = ag::scale(ag::matmul_nt(qh, kh), scale);
    heads.push_back(ag::matmul(ag::softmax_rows(scores, mask), vh));
  }
  return o_(heads.size() == 1 ? heads.front() : ag::concat_cols(heads));
}

EncoderLayer::EncoderLayer(ParameterStore& store, const std::string& name, const ModelConfig& c)
    : self_attn_(store, name + ".self_attn", c.hidden, c.heads),
      norm1_(store, name + ".norm1", c.hidden),
      norm2_(store, name + ".norm2", c.hidden),
      ff1_(store, name + ".ff1", c.hidden, c.ffn),
      ff2_(store, name + ".ff2", c.ffn, c.hidden) {}

Var EncoderLayer::operator()(const Var& x, const Matrix& mask, const RunState& run) const {
  Var h = norm1_(ag::add(x, run.maybe_dropout(self_attn_(x, x, &mask))));
  Var ff = ff2_(ag::relu(ff1_(h)));
  return norm2_(ag::add(h, run.maybe_dropout(ff)));
}

DecoderLayer::DecoderLayer(ParameterStore& store, const std::string& name, const ModelConfig& c)
    : self_attn_(store, name + ".self_attn", c.hidden, c.heads),
      cross_attn_(store, name + ".cross_attn", c.hidden, c.heads),
      norm1_(store, name + ".norm1", c.hidden),
      norm2_(store, name + ".norm2", c.hidden),
      norm3_(store, name + ".norm3", c.hidden),
      ff1_(store, name + ".ff1", c.hidden, c.ffn),
      ff2_(store, name + ".ff2", c.ffn, c.hidden) {}

Var DecoderLayer::operator()(const Var& x, const Var& memory, const Matrix& self_mask,
                             const Matrix& memory_mask, const RunState& run) const {
  Var h = norm1_(ag::add(x, run.maybe_dropout(self_attn_(x, x, &self_mask))));
  h = norm2_(ag::add(h, run.maybe_dropout(cross_attn_(h, memory, &memory_mask))));
  Var ff = ff2_(ag::relu(ff1_(h)));
  return norm3_(ag::add(h, run.maybe_dropout(ff)));
}

Encoder::Encoder(ParameterStore& store, const std::string& name, const ModelConfig& config)
    : config_(config), embedding_(store, name + ".embedding", config) {
  for (int i = 0; i < config.layers; ++i)
    layers_.emplace_back(store, name + ".layer" + std::to_string(i), config);
}

SequenceStates Encoder::embed(std::span<const int> ids, std::vector<int> segment_starts,
                              const RunState& run) const {
  return embedding_(ids, std::move(segment_starts), run);
}

SequenceStates Encoder::encode(const SequenceStates& states, const RunState& run) const {
  SequenceStates out = states;
  if (layers_.empty()) return out;
  const Matrix mask = key_padding_mask(states.length(), states.mask);
  Var x = states.values;
  for (const auto& layer : layers_) x = layer(x, mask, run);
  out.values = x;
  return out;
}

Decoder::Decoder(ParameterStore& store, const std::string& name, const ModelConfig& config)
    : config_(config), embedding_(store, name + ".embedding", config) {
  for (int i = 0; i < config.layers; ++i)
    layers_.emplace_back(store, name + ".layer" + std::to_string(i), config);
  output_ = Affine(store, name + ".output", config.hidden, config.vocab_size);
}

Var Decoder::logits(std::span<const int> prefix_ids, const SequenceStates& memory,
                    const RunState& run) const {
  if (prefix_ids.empty()) throw std::invalid_argument("decoder prefix must be non-empty");
  const SequenceStates emb = embedding_(prefix_ids, {0}, run);
  const int len = emb.length();
  const Matrix self_mask = causal_mask(len);
  const Matrix memory_mask = key_padding_mask(len, memory.mask);
  Var x = emb.values;
  for (const auto& layer : layers_) x = layer(x, memory.values, self_mask, memory_mask, run);
  return output_(x);
}

TokenLoss teacher_forced_loss(const Decoder& decoder, std::span<const int> target,
                              const SequenceStates& memory, const RunState& run) {
  if (target.size() < 2) throw std::invalid_argument("target needs at least <bos> and <eos>");
  const auto input = target.first(target.size() - 1);
  const auto expected = target.subspan(1);
  Var logits = decoder.logits(input, memory, run);
  return {ag::cross_entropy_sum(logits, expected), static_cast<int>(expected.size())};
}

std::vector<int> greedy_decode(const Decoder& decoder, const SequenceStates& memory, int max_len) {
  if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
  NoGradGuard no_grad;
  const RunState eval;
  std::vector<int> prefix{Vocabulary::bos};
  std::vector<int> out;
  const int max_pos = decoder.config().max_pos;
  while (static_cast<int>(out.size()) < max_len && static_cast<int>(prefix.size()) <= max_pos) {
    const Var logits = decoder.logits(prefix, memory, eval);
    const auto last = logits.value().row(logits.rows() - 1);
    const int next = static_cast<int>(std::max_element(last.begin(), last.end()) - last.begin());
    if (next == Vocabulary::eos) break;
    out.push_back(next);
    prefix.push_back(next);
  }
  return out;
}

namespace param_count {

std::size_t embedding(const ModelConfig& c) {
  return static_cast<std::size_t>(c.vocab_size) * c.hidden +
         static_cast<std::size_t>(c.max_pos) * c.hidden;
}

std::size_t attention(const ModelConfig& c) {
  const std::size_t h = c.hidden;
  return 4 * (h * h + h);
}

std::size_t encoder_layer(const ModelConfig& c) {
  const std::size_t h = c.hidden, f = c.ffn;
  return attention(c) + 2 * (2 * h) + (h * f + f) + (f * h + h);
}

std::size_t decoder_layer(const ModelConfig& c) {
  const std::size_t h = c.hidden, f = c.ffn;
  return 2 * attention(c) + 3 * (2 * h) + (h * f + f) + (f * h + h);
}

std::size_t encoder(const ModelConfig& c) {
  return embedding(c) + static_cast<std::size_t>(c.layers) * encoder_layer(c);
}

std::size_t decoder(const ModelConfig& c) {
  const std::size_t h = c.hidden, v = c.vocab_size;
  return embedding(c) + static_cast<std::size_t>(c.layers) * decoder_layer(c) + h * v + v;
}

}  // namespace param_count

}  // namespace interaction
