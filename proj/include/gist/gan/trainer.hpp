#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "gist/corpus.hpp"
#include "gist/fid.hpp"
#include "gist/gan/checkpoint.hpp"

namespace gist::gan {

struct TrainOptions {
  // Snapshots go to checkpoint_dir, metrics.csv and fid.csv to log_dir
  // (checkpoint_dir when empty).
  std::filesystem::path checkpoint_dir;
  std::filesystem::path log_dir;
  // Generated samples per FID evaluation.
  int fid_n_gen = 1024;
  // FID reference set; the training set when empty.
  std::vector<ImageRecord> fid_reference;
  // Called after every snapshot.
  std::function<void(const TrainingCheckpoint&)> on_snapshot;
};

TrainOptions options_for_run_dir(const std::filesystem::path& run_dir);

// Alternating D/G Adam steps on the non-saturating loss with lazy R1 every
// r1_interval D steps. Snapshots (checkpoint + FID against the reference
// set) are written at initialisation and every snapshot_kimg. Passing
// resume_from continues from its parameters and history and records it as
// the parent checkpoint.
TrainingCheckpoint train(const std::vector<ImageRecord>& dataset, const Hyperparameters& hp,
                         const std::optional<TrainingCheckpoint>& resume_from, const TrainOptions& options);

TrainingCheckpoint train(const corpus::DatasetArchive& dataset, const Hyperparameters& hp,
                         const std::optional<TrainingCheckpoint>& resume_from, const std::filesystem::path& run_dir);

// True iff the last `window` FID values exist and (max - min) / min <= rel_tol.
bool has_converged(const std::vector<FidPoint>& history, int window, double rel_tol);

// Packs images (scaled from [0,1] to [-1,1]) into a 1 x N x R x R batch.
FeatureMap<float> to_batch(const std::vector<const Image*>& images);
// Inverse of to_batch with clamping to [0,1].
std::vector<Image> from_batch(const FeatureMap<float>& batch);

// Draws `count` images from `gen` with latents from a normal stream seeded by
// `seed`; labels cycle through the classes when conditional.
std::vector<Image> sample_images(Generator<float>& gen, int count, std::uint64_t seed, int batch = 64);

}  // namespace gist::gan
