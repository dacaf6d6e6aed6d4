#pragma once

// Binary checkpoint container. Layout (all integers little-endian):
//
//   magic     8 bytes  "GEOATKCP"
//   version   u32      kCheckpointVersion
//   kind      u32      EncoderKind
//   vocab     u64      Vocabulary::hash() of the training vocabulary
//   vocab_n   u64      vocabulary size
//   emb_dim   u64
//   hidden    u64      encoder output width
//   classes   u64
//   labels    classes x (u32 length, bytes)
//   widths    u64 count, count x u64       (conv filter widths; 0 otherwise)
//   filters   u64 count, count x u64       (filters per width)
//   tensors   u64 count, then per tensor: u32 name length, name,
//             u64 element count, elements as IEEE-754 f64
//   checksum  u64      FNV-1a of every preceding byte
//
// Tensor order: "embedding", encoder tensors in for_each_tensor order,
// "head.weight", "head.bias".

#include <filesystem>
#include <memory>

#include "geoattack/model.hpp"

namespace geoattack {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const Classifier& classifier, const std::filesystem::path& path);

/// Throws CheckpointError on a corrupt/truncated file, a version mismatch, or
/// when `vocab` is not the vocabulary the checkpoint was trained with.
Classifier load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const Vocabulary> vocab);

}  // namespace geoattack
