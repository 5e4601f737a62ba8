// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint container: a JSON configuration block followed by named
// tensors stored as raw little-endian doubles. Loading reproduces every value
// bit for bit.
//
//   magic "SMRNCKPT" | u32 version | u64 n | n bytes of JSON | u32 count |
//   count x (u32 name_len | name | u32 rank | rank x u64 dim | doubles)

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sememe_rnn/autodiff.hpp"
#include "sememe_rnn/models.hpp"

namespace sememe {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::string name;
  ad::Shape shape;
  ad::Matrix value;
};

struct Checkpoint {
  nlohmann::json config;
  std::vector<StoredTensor> tensors;

  const StoredTensor* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& config,
                     const std::vector<NamedTensor>& tensors);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies stored values into `targets` by name. Every target must be present
/// with an identical shape.
void restore_tensors(const Checkpoint& checkpoint, const std::vector<NamedTensor>& targets);

}  // namespace sememe
