#include "gist/gan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "gist/error.hpp"
#include "gist/gan/losses.hpp"

namespace gist::gan {

namespace {

constexpr std::uint64_t kFidLatentSalt = 0xF1D5EEDull;

// Appends rows to a CSV, writing the header when the file is new.
class CsvAppender {
 public:
  CsvAppender(const std::filesystem::path& path, const std::string& header) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    if (!out_) throw Error(Errc::Io, "cannot open " + path.string());
    if (fresh) out_ << header << '\n';
  }

  void row(const std::string& line) { out_ << line << '\n'; }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

}  // namespace

TrainOptions options_for_run_dir(const std::filesystem::path& run_dir) {
  TrainOptions o;
  o.checkpoint_dir = run_dir;
  o.log_dir = run_dir;
  return o;
}

FeatureMap<float> to_batch(const std::vector<const Image*>& images) {
  if (images.empty()) throw Error(Errc::EmptyDataset, "empty batch");
  const int res = images.front()->height;
  FeatureMap<float> batch(1, static_cast<int>(images.size()), res, res);
  float* dst = batch.data.data();
  for (const Image* img : images) {
    if (img->height != res || img->width != res) throw Error(Errc::ShapeMismatch, "batch images differ in size");
    for (float p : img->pixels) *dst++ = 2.0f * p - 1.0f;
  }
  return batch;
}

std::vector<Image> from_batch(const FeatureMap<float>& batch) {
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(batch.batch));
  const float* src = batch.data.data();
  for (int n = 0; n < batch.batch; ++n) {
    Image img(batch.height, batch.width);
    for (float& p : img.pixels) p = std::clamp(0.5f * (*src++ + 1.0f), 0.0f, 1.0f);
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<Image> sample_images(Generator<float>& gen, int count, std::uint64_t seed, int batch) {
  const auto& cfg = gen.config();
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal;
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int start = 0; start < count; start += batch) {
    const int n = std::min(batch, count - start);
    Mat<float> z(cfg.latent_dim, n);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    std::vector<int> labels;
    if (cfg.n_classes > 0)
      for (int i = 0; i < n; ++i) labels.push_back((start + i) % cfg.n_classes);
    for (auto& img : from_batch(gen.forward(z, labels))) out.push_back(std::move(img));
  }
  return out;
}

bool has_converged(const std::vector<FidPoint>& history, int window, double rel_tol) {
  if (window < 2) throw Error(Errc::InvalidArgument, "convergence window must be >= 2");
  if (history.size() < static_cast<std::size_t>(window)) return false;
  double lo = history[history.size() - window].fid, hi = lo;
  for (std::size_t i = history.size() - window; i < history.size(); ++i) {
    lo = std::min(lo, history[i].fid);
    hi = std::max(hi, history[i].fid);
  }
  if (lo <= 0.0) return hi <= 0.0;
  return (hi - lo) / lo <= rel_tol;
}

TrainingCheckpoint train(const std::vector<ImageRecord>& dataset, const Hyperparameters& hp,
                         const std::optional<TrainingCheckpoint>& resume_from, const TrainOptions& options) {
  validate(hp);
  if (dataset.empty()) throw Error(Errc::EmptyDataset, "training set is empty");
  const int res = dataset.front().image.height;
  for (const auto& r : dataset)
    if (r.image.height != res || r.image.width != res)
      throw Error(Errc::ResolutionMismatch, "training images must all be " + std::to_string(res) + "^2");
  const int n_classes = corpus::count_classes(dataset);
  for (const auto& r : dataset)
    if (n_classes > 0 && !r.label) throw Error(Errc::PartialLabels, "training set mixes labeled and unlabeled images");

  TrainingCheckpoint state;
  Generator<float> gen;
  Discriminator<float> disc;
  if (resume_from) {
    if (resume_from->resolution() != res)
      throw Error(Errc::ResolutionMismatch, "checkpoint resolution " + std::to_string(resume_from->resolution()) +
                                                " differs from dataset resolution " + std::to_string(res));
    if (resume_from->n_classes() != n_classes && !(resume_from->n_classes() > n_classes && n_classes > 0))
      throw Error(Errc::LabelVocabularyMismatch, "checkpoint class count differs from dataset");
    gen = restore_generator(*resume_from);
    disc = restore_discriminator(*resume_from);
    state.network = resume_from->network;
    state.nimg = resume_from->nimg;
    state.steps = resume_from->steps;
    state.fid_history = resume_from->fid_history;
    state.parent_checkpoint = resume_from->loaded_from ? resume_from->loaded_from->string()
                                                       : std::string("in-memory@kimg=") + fmt("%.3f", resume_from->kimg_seen());
  } else {
    auto nets = init_networks<float>(res, n_classes, hp.latent_dim, hp.seed);
    gen = std::move(nets.generator);
    disc = std::move(nets.discriminator);
    state.network = gen.config();
  }
  state.hyperparameters = hp;
  state.hyperparameters.latent_dim = state.network.latent_dim;

  const auto extractor = fid::desk_extractor(res);
  state.extractor_name = extractor.name;
  const std::vector<ImageRecord>& reference = options.fid_reference.empty() ? dataset : options.fid_reference;
  const fid::GaussianMoments reference_moments = fid::fit_gaussian(fid::extract_features(fid::images_of(reference), extractor));

  std::uint64_t stream_seed = hp.seed;
  if (!hp.deterministic) stream_seed ^= (static_cast<std::uint64_t>(std::random_device{}()) << 32) | std::random_device{}();
  std::mt19937_64 rng(stream_seed + static_cast<std::uint64_t>(state.steps));
  std::normal_distribution<float> normal;

  const auto log_dir = options.log_dir.empty() ? options.checkpoint_dir : options.log_dir;
  CsvAppender metrics(log_dir / "metrics.csv", "step,kimg,d_loss,g_loss,r1_penalty");
  CsvAppender fid_log(log_dir / "fid.csv", "kimg,fid,n_real,n_gen,extractor_name");
  std::filesystem::create_directories(options.checkpoint_dir);

  auto snapshot = [&]() {
    const double kimg = state.kimg_seen();
    const auto samples = sample_images(gen, options.fid_n_gen, hp.seed ^ kFidLatentSalt);
    const fid::GaussianMoments gen_moments = fid::fit_gaussian(fid::extract_features(samples, extractor));
    const double value = fid::frechet_distance(reference_moments, gen_moments);
    state.fid_history.push_back({kimg, value});
    state.generator_state = export_state(gen.params());
    state.discriminator_state = export_state(disc.params());
    fid_log.row(fmt("%.3f,%.6f,%zu,%d,", kimg, value, reference.size(), options.fid_n_gen) + extractor.name);
    fid_log.flush();
    metrics.flush();
    save_checkpoint(state, snapshot_path(options.checkpoint_dir, kimg));
    if (options.on_snapshot) options.on_snapshot(state);
  };

  if (state.fid_history.empty() || state.fid_history.back().kimg < state.kimg_seen()) snapshot();

  const long long target = state.nimg + static_cast<long long>(std::llround(hp.total_kimg * 1000.0));
  const auto snapshot_stride = static_cast<long long>(std::llround(hp.snapshot_kimg * 1000.0));
  long long next_snapshot = state.nimg + snapshot_stride;

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  const int batch = hp.batch_size;
  Mat<float> z(state.network.latent_dim, batch);
  std::vector<int> real_labels(n_classes > 0 ? batch : 0);
  std::vector<int> fake_labels(n_classes > 0 ? batch : 0);
  std::vector<const Image*> batch_images(static_cast<std::size_t>(batch));
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  nn::Adam<float> opt_g(hp.lr_g, hp.beta1, hp.beta2);
  nn::Adam<float> opt_d(hp.lr_d, hp.beta1, hp.beta2);

  auto fill_latents = [&]() {
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    for (auto& c : fake_labels) c = *dataset[pick(rng)].label;
  };

  while (state.nimg < target) {
    for (int i = 0; i < batch; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const auto& r = dataset[order[cursor++]];
      batch_images[static_cast<std::size_t>(i)] = &r.image;
      if (n_classes > 0) real_labels[static_cast<std::size_t>(i)] = *r.label;
    }
    const FeatureMap<float> real = to_batch(batch_images);

    fill_latents();
    disc.zero_grad();
    const bool apply_r1 = state.steps % hp.r1_interval == 0;
    const DLoss dl = d_loss(disc, gen, real, real_labels, z, fake_labels, hp.gamma, apply_r1, hp.r1_interval);
    opt_d.step(disc.params());

    fill_latents();
    gen.zero_grad();
    const double gl = g_loss(disc, gen, z, fake_labels);
    opt_g.step(gen.params());

    ++state.steps;
    state.nimg += batch;
    metrics.row(fmt("%lld,%.3f,%.9g,%.9g,%.9g", state.steps, state.kimg_seen(), dl.total, gl, dl.r1_penalty));

    if (state.nimg >= next_snapshot || state.nimg >= target) {
      snapshot();
      while (next_snapshot <= state.nimg) next_snapshot += snapshot_stride;
    }
  }
  return state;
}

TrainingCheckpoint train(const corpus::DatasetArchive& dataset, const Hyperparameters& hp,
                         const std::optional<TrainingCheckpoint>& resume_from, const std::filesystem::path& run_dir) {
  const corpus::Dataset ds = corpus::read_dataset(dataset.path);
  return train(ds.records, hp, resume_from, options_for_run_dir(run_dir));
}

}  // namespace gist::gan
