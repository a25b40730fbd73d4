#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace interaction {

// Raised for malformed input data. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Label : int { entailment = 0, contradiction = 1, neutral = 2 };
inline constexpr int kNumLabels = 3;

std::string_view label_word(Label label);
std::optional<Label> parse_label(std::string_view word);

enum class Split { train, val, test };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);
// 1 for train, 3 for val/test.
int explanations_per_record(Split split);

using Tokens = std::vector<std::string>;

// Lowercases and splits on whitespace and ASCII punctuation; punctuation
// characters become their own tokens.
Tokens tokenize(std::string_view text);
std::string join_tokens(const Tokens& tokens);

struct Quadruplet {
  Tokens premise;
  Tokens hypothesis;
  Label label = Label::entailment;
  std::vector<Tokens> explanations;
};

// Throws DataError describing the first violated invariant.
void validate_quadruplet(const Quadruplet& q, Split split);

enum class SourceFormat { jsonl, csv };

// Maps source fields (JSON keys or CSV header names) onto quadruplet fields.
struct Schema {
  SourceFormat format = SourceFormat::jsonl;
  char delimiter = ',';
  std::string premise = "premise";
  std::string hypothesis = "hypothesis";
  std::string label = "label";
  std::string explanation = "explanation";
  std::array<std::string, 3> explanations{"explanation_1", "explanation_2", "explanation_3"};
};

struct LoadResult {
  std::vector<Quadruplet> records;
  std::vector<std::string> diagnostics;  // one entry per rejected record
};

// Records are kept in source order. Invalid records are dropped with a
// diagnostic; more than 1% rejected raises DataError.
LoadResult load_quadruplets(const std::string& path, Split split, const Schema& schema);
LoadResult parse_quadruplets(std::istream& in, Split split, const Schema& schema,
                             const std::string& source_name = "<stream>");

// RFC 4180 style record splitting (quoted fields, doubled quotes).
std::vector<std::string> split_csv_line(std::string_view line, char delimiter);

class Vocabulary {
 public:
  static constexpr int pad = 0;
  static constexpr int unk = 1;
  static constexpr int bos = 2;
  static constexpr int eos = 3;
  static constexpr int num_special = 4;
  static constexpr std::array<std::string_view, 4> special_tokens{"<pad>", "<unk>", "<bos>",
                                                                  "<eos>"};

  // Tokens ordered by descending frequency, ties broken lexicographically.
  static Vocabulary build(std::span<const Quadruplet> corpus, int min_freq);
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int id(std::string_view token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  // FNV-1a over the id order; stored in checkpoints.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// <bos> ids <eos>, truncated to at most max_len entries while keeping <eos>.
std::vector<int> encode_sequence(const Vocabulary& vocab, const Tokens& tokens, int max_len);
// Inverse of encode_sequence, dropping special markers (<unk> is kept).
Tokens decode_sequence(const Vocabulary& vocab, std::span<const int> ids);

struct Example {
  std::vector<int> premise;
  std::vector<int> hypothesis;
  std::vector<std::vector<int>> explanations;
  int label = 0;
};

Example encode_example(const Vocabulary& vocab, const Quadruplet& q, int max_len);
std::vector<Example> encode_corpus(const Vocabulary& vocab, std::span<const Quadruplet> corpus,
                                   int max_len);

struct PaddedIds {
  int rows = 0;
  int cols = 0;
  std::vector<int> ids;            // rows x cols, row-major
  std::vector<std::uint8_t> mask;  // 1 = real token, 0 = <pad>

  static PaddedIds from_rows(const std::vector<const std::vector<int>*>& rows);
  std::vector<int> row(int r) const;  // unpadded
};

struct Batch {
  std::vector<std::size_t> indices;  // positions in the source corpus
  PaddedIds premise;
  PaddedIds hypothesis;
  std::vector<PaddedIds> explanations;  // one matrix per reference slot
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
  Example example(int i) const;
  std::vector<Example> examples() const;
};

// Shuffled with `seed`; the last batch may be short.
std::vector<Batch> make_batches(std::span<const Example> corpus, int batch_size,
                                std::uint64_t seed);
std::vector<Batch> make_batches(std::span<const Quadruplet> corpus, const Vocabulary& vocab,
                                int batch_size, std::uint64_t seed, int max_len = 25);

struct SynthOptions {
  Split split = Split::train;
  // Probability that a hypothesis carries a label-specific cue word.
  double artifact_strength = 0.0;
};

// Templated NLI records over a small closed vocabulary. Labels follow the
// slot that differs between premise and hypothesis: nothing (entailment),
// the verb (contradiction) or the subject (neutral).
std::vector<Quadruplet> synth_corpus(int n, std::uint64_t seed, const SynthOptions& options = {});

// JSONL in the native dataset format.
void write_quadruplets_jsonl(std::ostream& out, std::span<const Quadruplet> corpus);

}  // namespace interaction
