#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "gist/image.hpp"

namespace gist::corpus {

enum class SquareMode { PadToMax, CropToMin };

struct DatasetArchive {
  std::filesystem::path path;
  int resolution = 0;
  int n_images = 0;
  int n_classes = 0;  // 0 means unlabeled
};

struct SplitSpec {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> test;
};

struct Dataset {
  DatasetArchive info;
  std::vector<ImageRecord> records;
};

// Name of the label manifest inside an archive; payload {"labels": [[file, label], ...]}.
inline constexpr const char* kManifestName = "dataset.json";
// Archive metadata entry (resolution, resampling, counts).
inline constexpr const char* kMetadataName = "gist_meta.json";

ImageRecord to_square(const ImageRecord& record, SquareMode mode);

// Throws NotPowerOfTwo / NotSquare.
ImageRecord resize_pow2(const ImageRecord& record, int target);

// Name of the i-th image entry: img000000.png, img000001.png, ...
std::string archive_entry_name(std::size_t index);

// n_classes defaults to max(label)+1 for labeled corpora. Pixels are stored as
// 8-bit PNG, so values are quantised to n/255.
DatasetArchive package_dataset(const std::vector<ImageRecord>& records, const std::filesystem::path& out_path,
                               std::optional<int> n_classes = std::nullopt);

Dataset read_dataset(const std::filesystem::path& path);

Split split_dataset(const std::vector<ImageRecord>& records, const SplitSpec& spec);

// Stable indices of a seeded permutation of [0, n). Prefixes of this order
// give nested subsets.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

// Keeps records whose label is in `classes` and remaps label classes[i] -> i.
std::vector<ImageRecord> filter_by_labels(const std::vector<ImageRecord>& records, const std::vector<int>& classes);

// Loads every PNG/JPEG below `dir`. Images directly in `dir` are unlabeled;
// images inside immediate subdirectories are labeled by the sorted index of
// the subdirectory name. Mixing both is rejected as PartialLabels.
std::vector<ImageRecord> ingest_directory(const std::filesystem::path& dir);

// Square + power-of-two resize + [0,1] clamp for every record.
std::vector<ImageRecord> preprocess(const std::vector<ImageRecord>& records, SquareMode mode, int resolution);

int count_classes(const std::vector<ImageRecord>& records);

// Procedural stand-in corpus: two bright capsules ("bones") separated by a
// joint gap whose width is set by the class. n_classes == 1 yields unlabeled
// records.
std::vector<ImageRecord> generate_toy_corpus(int n, int resolution, int n_classes, std::uint64_t seed);

// Row band around the joint where toy classes differ.
std::pair<int, int> toy_joint_rows(int resolution);

}  // namespace gist::corpus
