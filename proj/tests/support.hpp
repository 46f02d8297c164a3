#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "gist/gan/losses.hpp"
#include "gist/gan/networks.hpp"

namespace gist::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "gist-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// 8x8 networks with one channel: at most 100 parameters per network for
// latent_dim 2 and two classes.
inline gan::NetworkConfig tiny_config(int n_classes, int latent_dim = 2) { return {8, latent_dim, n_classes, {1}}; }

template <typename Net>
std::size_t parameter_count(Net& net) {
  std::size_t n = 0;
  for (auto* p : net.params()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

struct TinyProblem {
  gan::Generator<double> gen;
  gan::Discriminator<double> disc;
  nn::FeatureMap<double> real;
  Eigen::MatrixXd z;
  std::vector<int> real_labels, fake_labels;
};

inline TinyProblem tiny_problem(int n_classes, std::uint64_t seed, int batch = 3) {
  const auto cfg = tiny_config(n_classes);
  TinyProblem t{gan::Generator<double>(cfg, seed), gan::Discriminator<double>(cfg, seed), {}, {}, {}, {}};
  std::mt19937_64 rng(seed + 17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> n;
  t.real = nn::FeatureMap<double>(1, batch, 8, 8);
  for (Eigen::Index i = 0; i < t.real.data.size(); ++i) t.real.data.data()[i] = u(rng);
  t.z.resize(cfg.latent_dim, batch);
  for (Eigen::Index i = 0; i < t.z.size(); ++i) t.z.data()[i] = n(rng);
  for (int i = 0; i < batch && n_classes > 0; ++i) {
    t.real_labels.push_back(i % n_classes);
    t.fake_labels.push_back((i + 1) % n_classes);
  }
  return t;
}

// d_loss gradient w.r.t. discriminator parameters vs central differences.
inline double d_loss_fd_error(int n_classes, std::uint64_t seed, double gamma, bool apply_r1, int r1_interval = 1) {
  auto t = tiny_problem(n_classes, seed);
  t.disc.zero_grad();
  gan::d_loss(t.disc, t.gen, t.real, t.real_labels, t.z, t.fake_labels, gamma, apply_r1, r1_interval);
  // Snapshot analytic grads, then evaluate the loss on scratch copies so the
  // stored gradients stay intact.
  auto params = t.disc.params();
  std::vector<Eigen::MatrixXd> grads;
  for (auto* p : params) grads.push_back(p->grad);
  auto loss = [&]() {
    const auto r = gan::d_loss(t.disc, t.gen, t.real, t.real_labels, t.z, t.fake_labels, gamma, apply_r1, r1_interval);
    return r.total;
  };
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k]->value.size(); ++i) {
      double& w = params[k]->value.data()[i];
      const double saved = w;
      w = saved + h;
      const double up = loss();
      w = saved - h;
      const double down = loss();
      w = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[k].data()[i];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  return worst;
}

// g_loss gradient w.r.t. generator parameters vs central differences.
inline double g_loss_fd_error(int n_classes, std::uint64_t seed) {
  auto t = tiny_problem(n_classes, seed);
  t.gen.zero_grad();
  gan::g_loss(t.disc, t.gen, t.z, t.fake_labels);
  auto params = t.gen.params();
  std::vector<Eigen::MatrixXd> grads;
  for (auto* p : params) grads.push_back(p->grad);
  auto loss = [&]() { return gan::g_loss(t.disc, t.gen, t.z, t.fake_labels); };
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k]->value.size(); ++i) {
      double& w = params[k]->value.data()[i];
      const double saved = w;
      w = saved + h;
      const double up = loss();
      w = saved - h;
      const double down = loss();
      w = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[k].data()[i];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  return worst;
}

// Brute-force sum_i (x_i - mu)(x_i - mu)^T / (n - 1).
inline Eigen::MatrixXd brute_covariance(const Eigen::MatrixXd& x) {
  const auto n = x.rows(), d = x.cols();
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) mu(j) += x(i, j);
  mu /= static_cast<double>(n);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) s(a, b) += (x(i, a) - mu(a)) * (x(i, b) - mu(b));
  return s / static_cast<double>(n - 1);
}

// Sum over axes of the 1-D Frechet distance (mu1 - mu2)^2 + (s1 - s2)^2 for
// diagonal covariances.
inline double per_axis_frechet(const Eigen::VectorXd& mu1, const Eigen::VectorXd& var1, const Eigen::VectorXd& mu2,
                               const Eigen::VectorXd& var2) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < mu1.size(); ++i) {
    const double dm = mu1(i) - mu2(i);
    const double ds = std::sqrt(var1(i)) - std::sqrt(var2(i));
    total += dm * dm + ds * ds;
  }
  return total;
}

// B B^T for a random dim x dim B.
inline Eigen::MatrixXd random_psd(int dim, std::mt19937_64& rng, int rank = -1) {
  std::normal_distribution<double> n;
  const int r = rank < 0 ? dim : rank;
  Eigen::MatrixXd b(dim, r);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = n(rng);
  return b * b.transpose();
}

}  // namespace gist::testing

#include "gist/gan/checkpoint.hpp"

namespace gist::testing {

// Checkpoint straight from initialisation.
inline gan::TrainingCheckpoint fresh_checkpoint(int resolution, int n_classes, std::uint64_t seed, int latent_dim = 16) {
  auto nets = gan::init_networks<float>(resolution, n_classes, latent_dim, seed);
  gan::TrainingCheckpoint c;
  c.network = nets.generator.config();
  c.generator_state = gan::export_state(nets.generator.params());
  c.discriminator_state = gan::export_state(nets.discriminator.params());
  c.hyperparameters.latent_dim = latent_dim;
  return c;
}

}  // namespace gist::testing
