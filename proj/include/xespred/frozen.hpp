#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xespred/encoding.hpp"
#include "xespred/model.hpp"
#include "xespred/nn.hpp"

namespace xespred {

// File layout, all integers little-endian:
//   "XTFP" | u32 version | u64 metadata length | metadata (UTF-8 JSON)
//   | f64 tensor payloads in manifest order | u64 CRC-64/XZ of all prior bytes
inline constexpr char kFrozenMagic[4] = {'X', 'T', 'F', 'P'};
inline constexpr std::uint32_t kFrozenVersion = 1;

struct TrainingMetadata {
  std::string source_log;
  std::size_t epochs = 0;
  std::map<std::string, double> final_losses;

  bool operator==(const TrainingMetadata&) const = default;
};

struct FrozenModel {
  std::uint32_t version = kFrozenVersion;
  EncodingSchema schema;
  ModelConfig config;  // only architecture fields are persisted
  ModelParams params;
  TrainingMetadata metadata;
  /// Declared attribute types of the training log, used to interpret raw
  /// request values.
  std::map<std::string, AttributeType> event_attribute_types;
  std::map<std::string, AttributeType> trace_attribute_types;
};

/// Optimizer state appended to a frozen model to form a checkpoint.
struct CheckpointState {
  std::size_t epochs_completed = 0;
  std::uint64_t optimizer_steps = 0;
  double learning_rate = 0.0;
  std::vector<double> epoch_losses;
  std::vector<Matrix> first_slots;
  std::vector<Matrix> second_slots;
};

std::uint64_t crc64(std::span<const unsigned char> bytes);

std::string serialize_frozen(const FrozenModel& model, const CheckpointState* checkpoint = nullptr);

/// Validates magic, version, checksum and tensor shapes before returning.
FrozenModel deserialize_frozen(std::string_view bytes, CheckpointState* checkpoint = nullptr);

/// Writes through a temporary file and renames, so a crash never leaves a
/// partial file behind.
void save_frozen(const FrozenModel& model, const std::string& path,
                 const CheckpointState* checkpoint = nullptr);
FrozenModel load_frozen(const std::string& path, CheckpointState* checkpoint = nullptr);

/// Keeps only the architecture fields of a config.
ModelConfig architecture_fields(const ModelConfig& config);

}  // namespace xespred
