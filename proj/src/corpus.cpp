#include "gist/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "gist/error.hpp"
#include "gist/image_io.hpp"
#include "gist/zip_archive.hpp"

namespace gist::corpus {

using nlohmann::json;

ImageRecord to_square(const ImageRecord& record, SquareMode mode) {
  const Image& src = record.image;
  ImageRecord out = record;
  if (src.square()) return out;
  if (mode == SquareMode::PadToMax) {
    const int side = std::max(src.height, src.width);
    const int oy = (side - src.height) / 2;
    const int ox = (side - src.width) / 2;
    Image img(side, side, 0.0f);
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x) img.at(y + oy, x + ox) = src.at(y, x);
    out.image = std::move(img);
  } else {
    const int side = std::min(src.height, src.width);
    const int oy = (src.height - side) / 2;
    const int ox = (src.width - side) / 2;
    Image img(side, side);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) img.at(y, x) = src.at(y + oy, x + ox);
    out.image = std::move(img);
  }
  return out;
}

ImageRecord resize_pow2(const ImageRecord& record, int target) {
  if (!is_power_of_two(target))
    throw Error(Errc::NotPowerOfTwo, std::to_string(target) + " is not a power of two >= 4");
  if (!record.image.square())
    throw Error(Errc::NotSquare, "record " + record.id + " is " + std::to_string(record.image.width) + "x" +
                                     std::to_string(record.image.height));
  ImageRecord out = record;
  out.image = resize_bilinear(record.image, target, target);
  clamp_unit(out.image);
  return out;
}

std::string archive_entry_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img%06zu.png", index);
  return buf;
}

DatasetArchive package_dataset(const std::vector<ImageRecord>& records, const std::filesystem::path& out_path,
                               std::optional<int> n_classes) {
  if (records.empty()) throw Error(Errc::EmptyDataset, "cannot package an empty corpus");
  const int h = records.front().image.height;
  const int w = records.front().image.width;
  for (const auto& r : records) {
    if (r.image.height != h || r.image.width != w)
      throw Error(Errc::MixedResolution, "record " + r.id + " differs from " + std::to_string(w) + "x" +
                                             std::to_string(h));
  }
  if (h != w) throw Error(Errc::NotSquare, "archived images must be square");
  if (!is_power_of_two(h)) throw Error(Errc::NotPowerOfTwo, std::to_string(h) + " is not a power of two >= 4");

  const auto labeled = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.label.has_value(); });
  if (labeled != 0 && labeled != static_cast<long>(records.size()))
    throw Error(Errc::PartialLabels, std::to_string(labeled) + " of " + std::to_string(records.size()) +
                                         " records carry labels");
  int classes = 0;
  if (labeled) {
    int max_label = 0;
    for (const auto& r : records) {
      if (*r.label < 0) throw Error(Errc::InvalidArgument, "negative label on " + r.id);
      max_label = std::max(max_label, *r.label);
    }
    classes = n_classes.value_or(max_label + 1);
    if (max_label >= classes) throw Error(Errc::InvalidArgument, "label exceeds n_classes");
  }

  zip::Writer writer;
  json labels = json::array();
  json ids = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string name = archive_entry_name(i);
    writer.add(name, io::encode_png(records[i].image));
    if (labeled) labels.push_back(json::array({name, *records[i].label}));
    ids.push_back(records[i].id);
  }
  if (labeled) writer.add_text(kManifestName, json{{"labels", labels}}.dump());
  json meta = {{"format", "gist-dataset"},
               {"version", 1},
               {"resolution", h},
               {"n_images", records.size()},
               {"n_classes", classes},
               {"resampling", "bilinear"},
               {"pixel_format", "png-gray8"},
               {"source_ids", ids}};
  writer.add_text(kMetadataName, meta.dump());
  writer.finish_to(out_path);
  return DatasetArchive{out_path, h, static_cast<int>(records.size()), classes};
}

namespace {

bool image_entry(const std::string& name) {
  auto lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower.ends_with(".png") || lower.ends_with(".jpg") || lower.ends_with(".jpeg");
}

}  // namespace

Dataset read_dataset(const std::filesystem::path& path) {
  auto reader = zip::Reader::open(path);
  std::map<std::string, int> labels;
  bool labeled = false;
  if (reader.contains(kManifestName)) {
    json manifest;
    try {
      manifest = json::parse(reader.read_text(kManifestName));
    } catch (const json::exception& e) {
      throw Error(Errc::CorruptArchive, std::string("dataset.json: ") + e.what());
    }
    if (!manifest.is_object() || !manifest.contains("labels"))
      throw Error(Errc::CorruptArchive, "dataset.json lacks a \"labels\" key");
    if (!manifest["labels"].is_null()) {
      labeled = true;
      for (const auto& pair : manifest["labels"]) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_number_integer())
          throw Error(Errc::CorruptArchive, "dataset.json entries must be [filename, integer]");
        labels[pair[0].get<std::string>()] = pair[1].get<int>();
      }
    }
  }
  json meta;
  if (reader.contains(kMetadataName)) meta = json::parse(reader.read_text(kMetadataName));

  Dataset ds;
  ds.info.path = path;
  std::vector<std::string> source_ids;
  if (meta.contains("source_ids")) source_ids = meta["source_ids"].get<std::vector<std::string>>();
  int max_label = -1;
  for (const auto& name : reader.names()) {
    if (!image_entry(name)) continue;
    ImageRecord r;
    const std::size_t index = ds.records.size();
    r.id = index < source_ids.size() ? source_ids[index] : name;
    r.source_path = path.string() + "!" + name;
    r.image = io::decode_image(reader.read(name));
    if (labeled) {
      auto it = labels.find(name);
      if (it == labels.end()) throw Error(Errc::PartialLabels, "no label for " + name);
      r.label = it->second;
      max_label = std::max(max_label, it->second);
    }
    ds.records.push_back(std::move(r));
  }
  if (ds.records.empty()) throw Error(Errc::EmptyDataset, path.string() + " contains no images");
  const int res = ds.records.front().image.height;
  for (const auto& r : ds.records)
    if (r.image.height != res || r.image.width != res)
      throw Error(Errc::MixedResolution, path.string() + ": entry " + r.id + " is not " + std::to_string(res) + "^2");
  ds.info.resolution = res;
  ds.info.n_images = static_cast<int>(ds.records.size());
  ds.info.n_classes = labeled ? meta.value("n_classes", max_label + 1) : 0;
  return ds;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Split split_dataset(const std::vector<ImageRecord>& records, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
    throw Error(Errc::InvalidArgument, "test_fraction must lie in (0, 1)");
  if (records.size() < 2) throw Error(Errc::TooFewRecords, "splitting needs at least 2 records");

  // Group by label; unlabeled corpora form a single stratum.
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < records.size(); ++i) strata[records[i].label.value_or(-1)].push_back(i);

  const double n = static_cast<double>(records.size());
  const auto total_test = static_cast<std::size_t>(std::lround(spec.test_fraction * n));

  // Largest-remainder apportionment of total_test over strata.
  struct Quota {
    int key;
    std::size_t count;
    double remainder;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (const auto& [key, members] : strata) {
    const double exact = spec.test_fraction * static_cast<double>(members.size());
    const auto base = static_cast<std::size_t>(std::floor(exact));
    quotas.push_back({key, base, exact - static_cast<double>(base)});
    assigned += base;
  }
  std::vector<std::size_t> by_remainder(quotas.size());
  for (std::size_t i = 0; i < quotas.size(); ++i) by_remainder[i] = i;
  std::stable_sort(by_remainder.begin(), by_remainder.end(),
                   [&](std::size_t a, std::size_t b) { return quotas[a].remainder > quotas[b].remainder; });
  for (std::size_t i = 0; assigned < total_test && i < by_remainder.size(); ++i) {
    Quota& q = quotas[by_remainder[i]];
    if (q.count < strata[q.key].size()) {
      ++q.count;
      ++assigned;
    }
  }

  std::vector<bool> is_test(records.size(), false);
  std::mt19937_64 rng(spec.seed);
  for (const Quota& q : quotas) {
    std::vector<std::size_t> members = strata[q.key];
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < q.count; ++i) is_test[members[i]] = true;
  }
  Split split;
  for (std::size_t i = 0; i < records.size(); ++i) (is_test[i] ? split.test : split.train).push_back(records[i]);
  return split;
}

std::vector<ImageRecord> filter_by_labels(const std::vector<ImageRecord>& records, const std::vector<int>& classes) {
  std::vector<ImageRecord> out;
  for (const auto& r : records) {
    if (!r.label) continue;
    auto it = std::find(classes.begin(), classes.end(), *r.label);
    if (it == classes.end()) continue;
    ImageRecord copy = r;
    copy.label = static_cast<int>(it - classes.begin());
    out.push_back(std::move(copy));
  }
  return out;
}

std::vector<ImageRecord> ingest_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(Errc::Io, dir.string() + " is not a directory");
  std::vector<fs::path> top_files;
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
    else if (entry.is_regular_file() && image_entry(entry.path().filename().string())) top_files.push_back(entry.path());
  }
  std::sort(top_files.begin(), top_files.end());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (!top_files.empty() && !class_dirs.empty())
    throw Error(Errc::PartialLabels, dir.string() + " mixes loose images with class subdirectories");

  std::vector<ImageRecord> out;
  auto load = [&](const fs::path& p, std::optional<int> label) {
    ImageRecord r;
    r.id = fs::relative(p, dir).generic_string();
    r.source_path = p.string();
    r.image = io::load_image(p);
    r.label = label;
    out.push_back(std::move(r));
  };
  for (const auto& p : top_files) load(p, std::nullopt);
  for (std::size_t k = 0; k < class_dirs.size(); ++k) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(class_dirs[k]))
      if (entry.is_regular_file() && image_entry(entry.path().filename().string())) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) load(p, static_cast<int>(k));
  }
  if (out.empty()) throw Error(Errc::EmptyDataset, dir.string() + " contains no PNG or JPEG images");
  return out;
}

std::vector<ImageRecord> preprocess(const std::vector<ImageRecord>& records, SquareMode mode, int resolution) {
  std::vector<ImageRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(resize_pow2(to_square(r, mode), resolution));
  return out;
}

int count_classes(const std::vector<ImageRecord>& records) {
  int max_label = -1;
  for (const auto& r : records)
    if (r.label) max_label = std::max(max_label, *r.label);
  return max_label + 1;
}

}  // namespace gist::corpus
