#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "gist/corpus.hpp"
#include "gist/gan/checkpoint.hpp"

namespace gist::synthesis {

// Image i depends only on (checkpoint, seeds[i], class_idx): each seed drives
// its own latent stream and the generator runs one image at a time.
std::vector<ImageRecord> generate(const gan::TrainingCheckpoint& ckpt, const std::vector<std::int64_t>& seeds,
                                  std::optional<int> class_idx);

// Same, reusing an already restored generator.
std::vector<ImageRecord> generate(gan::Generator<float>& gen, const std::vector<std::int64_t>& seeds,
                                  std::optional<int> class_idx);

// n_per_class images per class (or n_per_class total when unconditional),
// seeds seed, seed+1, ... in class-major order.
corpus::DatasetArchive emit_synthetic_dataset(const gan::TrainingCheckpoint& ckpt, int n_per_class, std::int64_t seed,
                                              const std::filesystem::path& out_path);

// Writes seed%06d[_c%d].png files; returns the written paths.
std::vector<std::filesystem::path> write_images(const std::vector<ImageRecord>& records, const std::filesystem::path& outdir);

}  // namespace gist::synthesis
