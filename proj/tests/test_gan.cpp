#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "gist/corpus.hpp"
#include "gist/error.hpp"
#include "gist/gan/checkpoint.hpp"
#include "gist/gan/losses.hpp"
#include "gist/gan/trainer.hpp"
#include "support.hpp"

using namespace gist;
using namespace gist::gan;
using gist::testing::TempDir;

namespace {

template <typename Net>
void zero_params(Net& net) {
  for (auto* p : net.params()) p->value.setZero();
}

template <typename Net>
std::vector<Eigen::MatrixXf> values(Net& net) {
  std::vector<Eigen::MatrixXf> out;
  for (auto* p : net.params()) out.push_back(p->value);
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Hyperparameters quick_hp() {
  Hyperparameters hp;
  hp.batch_size = 16;
  hp.total_kimg = 0.32;
  hp.snapshot_kimg = 0.16;
  hp.deterministic = true;
  hp.seed = 3;
  return hp;
}

TrainOptions quick_options(const std::filesystem::path& dir) {
  TrainOptions o = options_for_run_dir(dir);
  o.fid_n_gen = 64;
  return o;
}

}  // namespace

TEST(Networks, InitIsDeterministic) {
  auto a = init_networks<float>(32, 2, 64, 1);
  auto b = init_networks<float>(32, 2, 64, 1);
  auto va = values(a.generator), vb = values(b.generator);
  ASSERT_EQ(va.size(), vb.size());
  for (std::size_t i = 0; i < va.size(); ++i) EXPECT_EQ(va[i], vb[i]);
  auto da = values(a.discriminator), db = values(b.discriminator);
  for (std::size_t i = 0; i < da.size(); ++i) EXPECT_EQ(da[i], db[i]);
  auto c = init_networks<float>(32, 2, 64, 2);
  EXPECT_NE(values(c.generator)[0], va[0]);
}

TEST(Networks, Shapes) {
  auto nets = init_networks<float>(32, 0, 64, 1);
  Mat<float> z = Mat<float>::Random(64, 4);
  const auto img = nets.generator.forward(z, {});
  EXPECT_EQ(img.batch, 4);
  EXPECT_EQ(img.channels, 1);
  EXPECT_EQ(img.height, 32);
  EXPECT_EQ(img.width, 32);
  EXPECT_LE(img.data.maxCoeff(), 1.0f);
  EXPECT_GE(img.data.minCoeff(), -1.0f);
  const auto logits = nets.discriminator.forward(img, {});
  EXPECT_EQ(logits.rows(), 1);
  EXPECT_EQ(logits.cols(), 4);
}

TEST(Networks, ResolutionRange) {
  EXPECT_THROW(init_networks<float>(16, 0, 8, 0), Error);
  EXPECT_THROW(init_networks<float>(512, 0, 8, 0), Error);
  EXPECT_THROW(init_networks<float>(48, 0, 8, 0), Error);
  try {
    init_networks<float>(16, 0, 8, 0);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnsupportedResolution);
  }
  EXPECT_NO_THROW(init_networks<float>(256, 0, 8, 0));
}

TEST(Networks, ConditionalLabelsChecked) {
  auto nets = init_networks<float>(32, 3, 8, 0);
  Mat<float> z = Mat<float>::Random(8, 2);
  std::vector<int> bad{0, 3};
  EXPECT_THROW(nets.generator.forward(z, bad), Error);
  EXPECT_THROW(nets.generator.forward(z, {}), Error);
}

TEST(Networks, TinyConfigsStayUnderHundredParameters) {
  for (int k : {0, 2}) {
    Generator<double> g(gist::testing::tiny_config(k), 1);
    Discriminator<double> d(gist::testing::tiny_config(k), 1);
    EXPECT_LE(gist::testing::parameter_count(g), 100u);
    EXPECT_LE(gist::testing::parameter_count(d), 100u);
  }
}

TEST(Losses, ConstantZeroDiscriminator) {
  auto nets = init_networks<float>(32, 0, 16, 5);
  zero_params(nets.discriminator);
  Mat<float> z = Mat<float>::Random(16, 4);
  FeatureMap<float> real(1, 4, 32, 32);
  real.data.setRandom();
  const auto d0 = d_loss(nets.discriminator, nets.generator, real, {}, z, {}, 0.0, true);
  EXPECT_NEAR(d0.total, 2.0 * std::log(2.0), 1e-6);
  const auto d1 = d_loss(nets.discriminator, nets.generator, real, {}, z, {}, 10.0, true, 16);
  EXPECT_NEAR(d1.total, d0.total, 1e-12);
  EXPECT_EQ(d1.r1_penalty, 0.0);
  EXPECT_NEAR(g_loss(nets.discriminator, nets.generator, z, {}), std::log(2.0), 1e-6);
}

TEST(Losses, SaturatedDiscriminatorDrivesGeneratorLossToZero) {
  auto nets = init_networks<double>(32, 0, 8, 1);
  zero_params(nets.discriminator);
  for (auto* p : nets.discriminator.params())
    if (p->name == "d.head.bias") p->value(0, 0) = 60.0;
  Mat<double> z = Mat<double>::Random(8, 3);
  EXPECT_LT(g_loss(nets.discriminator, nets.generator, z, {}), 1e-20);
}

TEST(Losses, GammaZeroIsTheTwoSoftplusTerms) {
  auto t = gist::testing::tiny_problem(2, 4);
  const auto a = d_loss(t.disc, t.gen, t.real, t.real_labels, t.z, t.fake_labels, 0.0, true);
  EXPECT_DOUBLE_EQ(a.total, a.fake_term + a.real_term);
  const auto b = d_loss(t.disc, t.gen, t.real, t.real_labels, t.z, t.fake_labels, 0.0, false);
  EXPECT_DOUBLE_EQ(a.total, b.total);
}

TEST(Losses, ShapeMismatch) {
  auto nets = init_networks<float>(32, 0, 8, 1);
  FeatureMap<float> real(1, 3, 32, 32);
  Mat<float> z = Mat<float>::Random(8, 4);
  try {
    d_loss(nets.discriminator, nets.generator, real, {}, z, {}, 1.0, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
}

TEST(Losses, DiscriminatorGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    EXPECT_LE(gist::testing::d_loss_fd_error(0, seed, 0.0, false), 1e-4) << seed;
    EXPECT_LE(gist::testing::d_loss_fd_error(2, seed, 0.0, false), 1e-4) << seed;
  }
}

TEST(Losses, R1GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    EXPECT_LE(gist::testing::d_loss_fd_error(0, seed, 2.0, true), 1e-4) << seed;
    EXPECT_LE(gist::testing::d_loss_fd_error(2, seed, 0.7, true, 4), 1e-4) << seed;
  }
}

TEST(Losses, GeneratorGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    EXPECT_LE(gist::testing::g_loss_fd_error(0, seed), 1e-4) << seed;
    EXPECT_LE(gist::testing::g_loss_fd_error(2, seed), 1e-4) << seed;
  }
}

TEST(Losses, R1PenaltyMatchesInputFiniteDifferences) {
  // Penalty value itself: mean ||grad_x D||^2 with grad_x D by differences.
  auto t = gist::testing::tiny_problem(2, 9);
  const auto dl = d_loss(t.disc, t.gen, t.real, t.real_labels, t.z, t.fake_labels, 2.0, true);
  double penalty = 0.0;
  const double h = 1e-6;
  for (int n = 0; n < t.real.batch; ++n) {
    nn::FeatureMap<double> one(1, 1, 8, 8);
    one.data = t.real.data.middleCols(n * 64, 64);
    std::vector<int> lab{t.real_labels[static_cast<std::size_t>(n)]};
    for (int i = 0; i < 64; ++i) {
      double& v = one.data(0, i);
      const double saved = v;
      v = saved + h;
      const double up = t.disc.forward(one, lab)(0, 0);
      v = saved - h;
      const double down = t.disc.forward(one, lab)(0, 0);
      v = saved;
      const double g = (up - down) / (2 * h);
      penalty += g * g;
    }
  }
  penalty /= t.real.batch;
  EXPECT_NEAR(dl.r1_penalty, penalty, 1e-6 * std::max(1.0, penalty));
  EXPECT_NEAR(dl.r1_term, 1.0 * penalty, 1e-6 * std::max(1.0, penalty));
}

TEST(Losses, StepsOnlyTouchTheirOwnNetwork) {
  auto nets = init_networks<float>(32, 2, 16, 2);
  Mat<float> z = Mat<float>::Random(16, 4);
  FeatureMap<float> real(1, 4, 32, 32);
  real.data.setRandom();
  std::vector<int> labels{0, 1, 0, 1};
  nn::Adam<float> opt_d(1e-3, 0.0, 0.99), opt_g(1e-3, 0.0, 0.99);

  const auto g_before = values(nets.generator);
  nets.discriminator.zero_grad();
  nets.generator.zero_grad();
  d_loss(nets.discriminator, nets.generator, real, labels, z, labels, 1.0, true);
  for (auto* p : nets.generator.params()) EXPECT_EQ(p->grad.squaredNorm(), 0.0f) << p->name;
  opt_d.step(nets.discriminator.params());
  const auto g_after = values(nets.generator);
  for (std::size_t i = 0; i < g_before.size(); ++i) EXPECT_EQ(g_before[i], g_after[i]);

  const auto d_before = values(nets.discriminator);
  nets.discriminator.zero_grad();
  g_loss(nets.discriminator, nets.generator, z, labels);
  for (auto* p : nets.discriminator.params()) EXPECT_EQ(p->grad.squaredNorm(), 0.0f) << p->name;
  opt_g.step(nets.generator.params());
  const auto d_after = values(nets.discriminator);
  for (std::size_t i = 0; i < d_before.size(); ++i) EXPECT_EQ(d_before[i], d_after[i]);
  EXPECT_NE(values(nets.generator)[0], g_after[0]);
}

TEST(Hyperparameters, Validation) {
  Hyperparameters hp;
  EXPECT_NO_THROW(validate(hp));
  hp.batch_size = 0;
  EXPECT_THROW(validate(hp), Error);
  hp = {};
  hp.r1_interval = 0;
  EXPECT_THROW(validate(hp), Error);
  hp = {};
  hp.snapshot_kimg = hp.total_kimg + 1;
  EXPECT_THROW(validate(hp), Error);
}

TEST(Hyperparameters, JsonRoundTripAndUnknownKeys) {
  Hyperparameters hp;
  hp.gamma = 0.25;
  hp.batch_size = 8;
  hp.deterministic = true;
  EXPECT_EQ(hyperparameters_from_json(to_json(hp)), hp);
  try {
    hyperparameters_from_json(nlohmann::json{{"gama", 1.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownKey);
  }
  try {
    set_hyperparameter(hp, "momentum", 0.9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownHyperparameter);
  }
  set_hyperparameter(hp, "lr_d", 1e-3);
  EXPECT_DOUBLE_EQ(hp.lr_d, 1e-3);
}

TEST(Convergence, Examples) {
  auto h = [](std::vector<double> v) {
    std::vector<FidPoint> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back({static_cast<double>(i), v[i]});
    return out;
  };
  EXPECT_FALSE(has_converged(h({100, 80, 60}), 3, 0.05));
  EXPECT_TRUE(has_converged(h({61, 60, 60.5}), 3, 0.05));
  EXPECT_FALSE(has_converged(h({61, 60}), 3, 0.05));
  EXPECT_TRUE(has_converged(h({300, 61, 60, 60.5}), 3, 0.05));
  EXPECT_THROW(has_converged(h({1, 1}), 1, 0.05), Error);
}

TEST(Checkpoint, SaveLoadSaveIsByteStable) {
  TempDir dir;
  auto nets = init_networks<float>(32, 2, 16, 7);
  TrainingCheckpoint c;
  c.network = nets.generator.config();
  c.generator_state = export_state(nets.generator.params());
  c.discriminator_state = export_state(nets.discriminator.params());
  c.nimg = 12345;
  c.steps = 386;
  c.fid_history = {{0.0, 120.5}, {10.016, 80.25}};
  c.hyperparameters.gamma = 0.5;
  c.parent_checkpoint = "base.ckpt";
  c.extractor_name = "desk-thumb16-hist16";
  save_checkpoint(c, dir / "a.ckpt");
  const auto loaded = load_checkpoint(dir / "a.ckpt");
  save_checkpoint(loaded, dir / "b.ckpt");
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
  EXPECT_EQ(loaded.fid_history, c.fid_history);
  EXPECT_EQ(loaded.hyperparameters, c.hyperparameters);
  EXPECT_EQ(loaded.parent_checkpoint, c.parent_checkpoint);
  EXPECT_EQ(loaded.generator_state, c.generator_state);
  EXPECT_EQ(loaded.network, c.network);
  EXPECT_EQ(loaded.loaded_from, dir / "a.ckpt");

  auto g = restore_generator(loaded);
  Mat<float> z = Mat<float>::Random(16, 2);
  std::vector<int> lab{0, 1};
  EXPECT_EQ(g.forward(z, lab).data, nets.generator.forward(z, lab).data);
}

TEST(Checkpoint, CorruptInputRejected) {
  auto nets = init_networks<float>(32, 0, 8, 7);
  TrainingCheckpoint c;
  c.network = nets.generator.config();
  c.generator_state = export_state(nets.generator.params());
  c.discriminator_state = export_state(nets.discriminator.params());
  auto bytes = serialize(c);
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  EXPECT_THROW(deserialize(truncated), Error);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  try {
    deserialize(bad_magic);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CorruptCheckpoint);
  }
}

TEST(Training, SchedulingAndLogs) {
  TempDir dir;
  const auto data = corpus::generate_toy_corpus(64, 32, 2, 1);
  Hyperparameters hp = quick_hp();
  hp.total_kimg = 1;
  hp.snapshot_kimg = 1;
  hp.batch_size = 32;
  const auto ckpt = train(data, hp, std::nullopt, quick_options(dir.path()));
  // initial snapshot + exactly one more
  ASSERT_EQ(ckpt.fid_history.size(), 2u);
  EXPECT_EQ(ckpt.fid_history[0].kimg, 0.0);
  EXPECT_NEAR(ckpt.kimg_seen(), 1.0, 0.032);
  EXPECT_TRUE(std::filesystem::exists(snapshot_path(dir.path(), 0)));
  EXPECT_TRUE(std::filesystem::exists(snapshot_path(dir.path(), ckpt.kimg_seen())));
  std::ifstream metrics(dir / "metrics.csv");
  std::string header;
  std::getline(metrics, header);
  EXPECT_EQ(header, "step,kimg,d_loss,g_loss,r1_penalty");
  int rows = 0;
  for (std::string line; std::getline(metrics, line);) ++rows;
  EXPECT_EQ(rows, ckpt.steps);
  std::ifstream fid(dir / "fid.csv");
  std::getline(fid, header);
  EXPECT_EQ(header.rfind("kimg,fid", 0), 0u);
}

TEST(Training, DeterministicModeReproducesLogs) {
  TempDir a, b;
  const auto data = corpus::generate_toy_corpus(48, 32, 2, 2);
  const auto hp = quick_hp();
  const auto ca = train(data, hp, std::nullopt, quick_options(a.path()));
  const auto cb = train(data, hp, std::nullopt, quick_options(b.path()));
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "fid.csv"), slurp(b / "fid.csv"));
  EXPECT_EQ(ca.generator_state, cb.generator_state);
}

TEST(Training, ResumeContinuesHistory) {
  TempDir a, b;
  const auto data = corpus::generate_toy_corpus(48, 32, 0 + 1, 2);
  const auto hp = quick_hp();
  const auto first = train(data, hp, std::nullopt, quick_options(a.path()));
  const auto loaded = load_checkpoint(snapshot_path(a.path(), first.kimg_seen()));
  const auto second = train(data, hp, loaded, quick_options(b.path()));
  EXPECT_NEAR(second.kimg_seen(), first.kimg_seen() + hp.total_kimg, hp.batch_size / 1000.0);
  ASSERT_TRUE(second.parent_checkpoint.has_value());
  EXPECT_NE(second.parent_checkpoint->find("snapshot-"), std::string::npos);
  for (std::size_t i = 1; i < second.fid_history.size(); ++i)
    EXPECT_LT(second.fid_history[i - 1].kimg, second.fid_history[i].kimg);
  EXPECT_EQ(second.fid_history.size(), first.fid_history.size() + 2);
}

TEST(Training, Errors) {
  TempDir dir;
  try {
    train(std::vector<ImageRecord>{}, quick_hp(), std::nullopt, quick_options(dir.path()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyDataset);
  }
  const auto data = corpus::generate_toy_corpus(8, 32, 1, 0);
  const auto ckpt = train(data, quick_hp(), std::nullopt, quick_options(dir.path()));
  const auto big = corpus::generate_toy_corpus(8, 64, 1, 0);
  try {
    train(big, quick_hp(), ckpt, quick_options(dir.path()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ResolutionMismatch);
  }
  auto mixed = data;
  mixed.push_back(big.front());
  try {
    train(mixed, quick_hp(), std::nullopt, quick_options(dir.path()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ResolutionMismatch);
  }
}
