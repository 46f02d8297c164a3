#include "gist/synthesis.hpp"

#include <random>

#include "gist/error.hpp"
#include "gist/gan/trainer.hpp"
#include "gist/image_io.hpp"

namespace gist::synthesis {

namespace {

std::string record_id(std::int64_t seed, std::optional<int> class_idx) {
  char buf[64];
  if (class_idx)
    std::snprintf(buf, sizeof buf, "seed%06lld_c%d", static_cast<long long>(seed), *class_idx);
  else
    std::snprintf(buf, sizeof buf, "seed%06lld", static_cast<long long>(seed));
  return buf;
}

}  // namespace

std::vector<ImageRecord> generate(gan::Generator<float>& gen, const std::vector<std::int64_t>& seeds,
                                  std::optional<int> class_idx) {
  const auto& cfg = gen.config();
  if (cfg.n_classes > 0 && !class_idx) throw Error(Errc::MissingClass, "conditional checkpoint needs --class");
  if (class_idx && (*class_idx < 0 || *class_idx >= std::max(cfg.n_classes, 1)))
    throw Error(Errc::ClassOutOfRange, "class " + std::to_string(*class_idx) + " outside [0, " +
                                           std::to_string(cfg.n_classes) + ")");
  if (cfg.n_classes == 0 && class_idx) throw Error(Errc::ClassOutOfRange, "unconditional checkpoint takes no class");

  std::vector<ImageRecord> out;
  out.reserve(seeds.size());
  gan::Mat<float> z(cfg.latent_dim, 1);
  std::vector<int> label;
  if (class_idx) label.push_back(*class_idx);
  for (std::int64_t seed : seeds) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::normal_distribution<float> normal;
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    ImageRecord r;
    r.id = record_id(seed, class_idx);
    r.image = std::move(gan::from_batch(gen.forward(z, label)).front());
    if (class_idx) r.label = *class_idx;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ImageRecord> generate(const gan::TrainingCheckpoint& ckpt, const std::vector<std::int64_t>& seeds,
                                  std::optional<int> class_idx) {
  auto gen = gan::restore_generator(ckpt);
  return generate(gen, seeds, class_idx);
}

corpus::DatasetArchive emit_synthetic_dataset(const gan::TrainingCheckpoint& ckpt, int n_per_class, std::int64_t seed,
                                              const std::filesystem::path& out_path) {
  if (n_per_class < 1) throw Error(Errc::InvalidArgument, "n_per_class must be >= 1");
  auto gen = gan::restore_generator(ckpt);
  const int k = ckpt.n_classes();
  std::vector<ImageRecord> all;
  std::int64_t next = seed;
  for (int c = 0; c < std::max(k, 1); ++c) {
    std::vector<std::int64_t> seeds;
    for (int i = 0; i < n_per_class; ++i) seeds.push_back(next++);
    auto part = generate(gen, seeds, k > 0 ? std::optional<int>(c) : std::nullopt);
    for (auto& r : part) all.push_back(std::move(r));
  }
  return corpus::package_dataset(all, out_path, k > 0 ? std::optional<int>(k) : std::nullopt);
}

std::vector<std::filesystem::path> write_images(const std::vector<ImageRecord>& records, const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  std::vector<std::filesystem::path> paths;
  for (const auto& r : records) {
    auto p = outdir / (r.id + ".png");
    io::save_png(r.image, p);
    paths.push_back(std::move(p));
  }
  return paths;
}

}  // namespace gist::synthesis
