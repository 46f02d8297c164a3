#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gist/gan/hyperparameters.hpp"
#include "gist/gan/networks.hpp"

namespace gist::gan {

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;

  bool operator==(const NamedTensor&) const = default;
};

struct FidPoint {
  double kimg = 0.0;
  double fid = 0.0;

  bool operator==(const FidPoint&) const = default;
};

struct TrainingCheckpoint {
  NetworkConfig network;
  std::vector<NamedTensor> generator_state;
  std::vector<NamedTensor> discriminator_state;
  long long nimg = 0;   // real images shown so far
  long long steps = 0;  // optimiser steps so far
  std::vector<FidPoint> fid_history;
  Hyperparameters hyperparameters;
  std::optional<std::string> parent_checkpoint;
  std::string extractor_name;

  // Set by load_checkpoint; not serialised.
  std::optional<std::filesystem::path> loaded_from;

  double kimg_seen() const { return static_cast<double>(nimg) / 1000.0; }
  int resolution() const { return network.resolution; }
  int n_classes() const { return network.n_classes; }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Container layout: "GISTCKPT", u32 version, u64 metadata length, metadata
// JSON, u32 tensor count, then per tensor: u16 name length, name, u8 dtype
// (1 = f32), u32 rank, u32 dims[rank], little-endian data.
std::vector<std::uint8_t> serialize(const TrainingCheckpoint& ckpt);
TrainingCheckpoint deserialize(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const TrainingCheckpoint& ckpt, const std::filesystem::path& path);
TrainingCheckpoint load_checkpoint(const std::filesystem::path& path);

std::vector<NamedTensor> export_state(const std::vector<Param<float>*>& params);
void import_state(const std::vector<Param<float>*>& params, const std::vector<NamedTensor>& state);

Generator<float> restore_generator(const TrainingCheckpoint& ckpt);
Discriminator<float> restore_discriminator(const TrainingCheckpoint& ckpt);

// snapshot-000010.ckpt for kimg 10.x
std::filesystem::path snapshot_path(const std::filesystem::path& dir, double kimg);

}  // namespace gist::gan
