#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gist/corpus.hpp"
#include "gist/downstream.hpp"
#include "gist/gan/hyperparameters.hpp"

namespace gist::pipeline {

enum class Stage { Preprocess, Train, Generate, Evaluate };

inline constexpr Stage kStageOrder[] = {Stage::Preprocess, Stage::Train, Stage::Generate, Stage::Evaluate};

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);  // throws InvalidStageSet

struct ToySource {
  int images = 2000;
  int resolution = 32;
  int classes = 2;
  std::uint64_t seed = 0;
};

struct DatasetSource {
  std::optional<std::filesystem::path> directory;  // loose images / class subdirectories
  std::optional<std::filesystem::path> archive;    // packaged archive to re-preprocess
  std::optional<ToySource> toy;
};

struct PreprocessOptions {
  corpus::SquareMode square_mode = corpus::SquareMode::PadToMax;
  int resolution = 32;
  corpus::SplitSpec split;
  std::vector<int> classes;  // keep only these labels (remapped to 0..n-1); empty keeps all
};

struct TrainSpec {
  int fid_n_gen = 1024;
  std::optional<std::filesystem::path> resume_from;  // transfer learning parent
};

struct GenerateSpec {
  int n_per_class = 100;
  std::int64_t seed = 0;
  int grid = 16;  // inspection mosaic size; 0 disables
};

struct EvaluateSpec {
  int fid_n_gen = 1024;
  std::int64_t fid_seed = 7;
  std::vector<downstream::ClassifierSpec> classifiers{downstream::logistic_spec(), downstream::convnet_spec()};
  std::vector<downstream::Regime> regimes{downstream::kAllRegimes.begin(), downstream::kAllRegimes.end()};
  std::uint64_t seed = 0;
};

// Explicit paths that stand in for outputs of stages not run here.
struct Inputs {
  std::optional<std::filesystem::path> train_archive;
  std::optional<std::filesystem::path> test_archive;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> synthetic_archive;
};

struct PipelineConfig {
  std::string run_name = "run";
  std::vector<Stage> stages;  // canonical order, no duplicates
  DatasetSource dataset;
  PreprocessOptions preprocess;
  gan::Hyperparameters hyperparameters;
  TrainSpec train;
  GenerateSpec generate;
  EvaluateSpec evaluate;
  Inputs inputs;

  bool selected(Stage s) const;
};

// Unknown keys throw UnknownKey, malformed text ParseError, unsatisfiable
// stage selections InvalidStageSet.
PipelineConfig parse_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const nlohmann::json& j);

// Replaces the stage list (any order accepted) and revalidates.
void select_stages(PipelineConfig& cfg, const std::vector<std::string>& names);
void validate(const PipelineConfig& cfg);

struct StageStatus {
  Stage stage;
  std::string status;  // ok, skipped (resume), failed, not_run
  std::map<std::string, std::string> outputs;
  std::string error;
};

struct RunSummary {
  std::filesystem::path run_dir;
  std::vector<StageStatus> stages;
  std::optional<double> final_fid;
  bool success = true;

  nlohmann::json to_json() const;
};

struct RunOptions {
  std::optional<std::filesystem::path> runs_root;  // GIST_RUNS_DIR, then ./runs
  bool resume = false;
};

std::filesystem::path runs_root(const RunOptions& opts);

// Runs the selected stages in canonical order under runs/<run_name>/. A
// failing stage is recorded with its error and stops the run; the summary is
// also written to runs/<run_name>/manifest.json.
RunSummary run_pipeline(const PipelineConfig& cfg, const RunOptions& opts = {});

}  // namespace gist::pipeline
