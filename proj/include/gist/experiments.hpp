#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gist/gan/checkpoint.hpp"
#include "gist/image.hpp"

namespace gist::experiments {

enum class SweepKind { Size, Grid, Transfer };

std::string to_string(SweepKind k);

struct SweepSpec {
  SweepKind kind = SweepKind::Size;
  std::vector<int> sizes;
  // Ordered by name so the cartesian product order is stable.
  std::map<std::string, std::vector<nlohmann::json>> grid;
  std::optional<std::filesystem::path> base_checkpoint;
  double budget_kimg = 50;
  std::uint64_t seed = 0;
  int repeats = 1;      // training seeds hp.seed, hp.seed+1, ... per point
  int fid_n_gen = 1024;
};

void validate(const SweepSpec& spec);

struct SweepRow {
  std::string run_id;
  SweepKind kind = SweepKind::Size;
  std::string point;  // "size=50" or "batch_size=16;gamma=1"
  int repeat = 0;
  std::uint64_t train_seed = 0;
  double budget_kimg = 0;
  double kimg = 0;  // final kimg_seen
  double converged_fid_min = 0;
  double final_fid = 0;
  std::vector<gan::FidPoint> curve;
  std::optional<std::string> parent_checkpoint;
};

using SweepTable = std::vector<SweepRow>;

// The size-s subset is the first s entries of seeded_permutation(n, spec.seed),
// so subsets nest. FID is measured against the full `dataset`.
SweepTable size_sweep(const std::vector<ImageRecord>& dataset, const SweepSpec& spec, const gan::Hyperparameters& hp,
                      const std::filesystem::path& work_dir);

// One run per point of the cartesian product of spec.grid (the base run for an
// empty grid).
SweepTable grid_sweep(const std::vector<ImageRecord>& dataset, const SweepSpec& spec, const gan::Hyperparameters& base_hp,
                      const std::filesystem::path& work_dir);

// Size sweep where every run resumes from `base`.
SweepTable transfer_sweep(const gan::TrainingCheckpoint& base, const std::vector<ImageRecord>& dataset,
                          const SweepSpec& spec, const gan::Hyperparameters& hp, const std::filesystem::path& work_dir);

// Cartesian product of the grid, in lexicographic key order.
std::vector<std::map<std::string, nlohmann::json>> grid_points(const std::map<std::string, std::vector<nlohmann::json>>& grid);

struct ReportFiles {
  std::filesystem::path sweep_csv;
  std::vector<std::filesystem::path> curves;
  std::optional<std::filesystem::path> plot;
};

// sweep.csv, curves/<run_id>.csv and, when `plot`, fid_curves.svg.
ReportFiles emit_report(const SweepTable& table, const std::filesystem::path& out_dir, bool plot = true);

std::string sweep_csv(const SweepTable& table);
std::string curve_csv(const SweepRow& row);

// sqrt(n) x sqrt(n) mosaic of generated images (seeds seed..seed+n-1; classes
// cycle for conditional checkpoints), written as PNG.
Image inspection_grid(const gan::TrainingCheckpoint& ckpt, int n, std::int64_t seed, const std::filesystem::path& out_path);

// Parses a sweep job file; see README for the schema.
struct SweepJob {
  SweepSpec spec;
  gan::Hyperparameters hyperparameters;
  std::optional<std::filesystem::path> dataset;  // archive; toy corpus when absent
  int toy_images = 2000;
  int toy_resolution = 32;
  int toy_classes = 2;
  std::uint64_t toy_seed = 0;
  std::filesystem::path out_dir = "sweep";
  bool plot = true;
};

SweepJob parse_sweep_job(const std::filesystem::path& path);
SweepJob sweep_job_from_json(const nlohmann::json& j);
SweepTable run_sweep_job(const SweepJob& job);

}  // namespace gist::experiments
