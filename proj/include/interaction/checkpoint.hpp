#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "interaction/parameters.hpp"

namespace interaction {

// Unreadable, corrupt or mismatched checkpoint. Maps to CLI exit code 3.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedArray {
  std::string name;
  Matrix value;
};

struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

// Binary layout (little-endian):
//   "IXCKPT\0\0" | u32 version | str model_kind | str config | u64 vocab_hash
//   | i64 seed | u32 epoch | f64 val_loss | u32 n | n x (str name | u32 rows | u32 cols
//   | rows*cols f64) | u8 has_optimizer [| u64 step | n x m | n x v]
// where str = u32 length + bytes.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  std::string model_kind;
  std::string config;  // resolved RunConfig text
  std::uint64_t vocab_hash = 0;
  std::int64_t seed = 0;
  std::uint32_t epoch = 0;
  double val_loss = 0.0;
  std::vector<NamedArray> parameters;
  std::optional<OptimizerState> optimizer;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::vector<NamedArray> snapshot_parameters(const ParameterStore& store);
// Copies values into `store`; names and shapes must match in order.
void restore_parameters(ParameterStore& store, const std::vector<NamedArray>& arrays);

}  // namespace interaction
