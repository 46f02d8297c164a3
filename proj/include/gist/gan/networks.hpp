#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gist/error.hpp"
#include "gist/nn/layers.hpp"

namespace gist::gan {

using nn::FeatureMap;
using nn::Mat;
using nn::Param;

// Architecture of the compact DCGAN-style pair. `channels[i]` is the width
// at spatial size 4*2^i; the generator walks it upwards from 4x4 and the
// discriminator mirrors it downwards.
struct NetworkConfig {
  int resolution = 32;
  int latent_dim = 64;
  int n_classes = 0;
  std::vector<int> channels;

  bool operator==(const NetworkConfig&) const = default;
};

// Channel widths clamp(256 / size, 8, 64) for sizes 4, 8, ..., resolution/2.
std::vector<int> default_channels(int resolution);

// Checks resolution in [32, 256] (power of two) and fills default channels.
NetworkConfig make_network_config(int resolution, int n_classes, int latent_dim);

// Structural validation shared by all configurations, including toy ones
// smaller than the production range.
void validate(const NetworkConfig& cfg);

int upsampling_blocks(int resolution);

template <typename T>
class Generator {
 public:
  Generator() = default;
  Generator(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    validate(cfg);
    const int blocks = upsampling_blocks(cfg.resolution);
    fc_ = nn::Linear<T>("g.fc", cfg.latent_dim + cfg.n_classes, 16 * cfg.channels[0]);
    for (int i = 0; i < blocks; ++i) {
      const int in = cfg.channels[i];
      const int out = i + 1 < blocks ? cfg.channels[i + 1] : 1;
      ups_.emplace_back("g.up" + std::to_string(i), in, out, 4, 2, 1);
    }
    std::mt19937_64 rng(seed);
    fc_.init(rng, nn::leaky_gain());
    for (std::size_t i = 0; i < ups_.size(); ++i) ups_[i].init(rng, i + 1 < ups_.size() ? nn::leaky_gain() : 1.0);
    slopes_.resize(ups_.size());
  }

  const NetworkConfig& config() const { return cfg_; }

  // z: latent_dim x N. Returns 1 x N x R x R images in [-1, 1].
  FeatureMap<T> forward(const Mat<T>& z, std::span<const int> labels) {
    if (z.rows() != cfg_.latent_dim) throw Error(Errc::ShapeMismatch, "latent rows differ from latent_dim");
    const auto n = static_cast<int>(z.cols());
    Mat<T> input(cfg_.latent_dim + cfg_.n_classes, n);
    input.topRows(cfg_.latent_dim) = z;
    if (cfg_.n_classes > 0) {
      if (labels.size() != static_cast<std::size_t>(n)) throw Error(Errc::MissingClass, "conditional generator needs one label per latent");
      input.bottomRows(cfg_.n_classes).setZero();
      for (int i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= cfg_.n_classes) throw Error(Errc::ClassOutOfRange, "label out of range");
        input(cfg_.latent_dim + labels[i], i) = T(1);
      }
    }
    FeatureMap<T> h(cfg_.channels[0], n, 4, 4);
    h.flat() = fc_.forward(input);
    nn::leaky_relu_forward(h.data, fc_slope_);
    for (std::size_t i = 0; i < ups_.size(); ++i) {
      h = ups_[i].forward(h);
      if (i + 1 < ups_.size()) nn::leaky_relu_forward(h.data, slopes_[i]);
    }
    h.data = h.data.array().tanh().matrix();
    output_ = h.data;
    return h;
  }

  // dimg: gradient w.r.t. the last forward output. Accumulates parameter grads.
  void backward(const FeatureMap<T>& dimg) {
    FeatureMap<T> d = dimg;
    d.data.array() *= (T(1) - output_.array().square());
    for (std::size_t i = ups_.size(); i-- > 0;) {
      if (i + 1 < ups_.size()) d.data.array() *= slopes_[i].array();
      d = ups_[i].backward(d);
    }
    d.data.array() *= fc_slope_.array();
    fc_.backward(Mat<T>(d.flat()));
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out = fc_.params();
    for (auto& u : ups_)
      for (auto* p : u.params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

 private:
  NetworkConfig cfg_;
  nn::Linear<T> fc_;
  std::vector<nn::ConvTranspose2d<T>> ups_;
  Mat<T> fc_slope_;
  std::vector<Mat<T>> slopes_;
  Mat<T> output_;
};

// Strided-convolution stack to a 4x4 feature, then a linear logit plus a
// projection term <embed[c], h> for class-conditional configurations.
template <typename T>
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    validate(cfg);
    const int blocks = upsampling_blocks(cfg.resolution);
    for (int i = 0; i < blocks; ++i) {
      // Mirror: the conv producing spatial size 4*2^j has channels[j].
      const int j = blocks - 1 - i;
      const int in = i == 0 ? 1 : cfg.channels[j + 1];
      convs_.emplace_back("d.down" + std::to_string(i), in, cfg.channels[j], 4, 2, 1);
    }
    features_ = 16 * cfg.channels[0];
    head_ = Param<T>("d.head.weight", {1, features_}, features_, 1);
    head_bias_ = Param<T>("d.head.bias", {1}, 1, 1);
    if (cfg.n_classes > 0) embed_ = Param<T>("d.embed.weight", {cfg.n_classes, features_}, features_, cfg.n_classes);
    std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
    for (auto& c : convs_) c.init(rng, nn::leaky_gain());
    nn::init_normal(head_.value, 1.0 / std::sqrt(static_cast<double>(features_)), rng);
    if (cfg.n_classes > 0) nn::init_normal(embed_.value, 1.0 / std::sqrt(static_cast<double>(features_)), rng);
    slopes_.resize(convs_.size());
  }

  const NetworkConfig& config() const { return cfg_; }

  // x: 1 x N x R x R. Returns 1 x N logits.
  Mat<T> forward(const FeatureMap<T>& x, std::span<const int> labels) {
    if (x.channels != 1 || x.height != cfg_.resolution || x.width != cfg_.resolution)
      throw Error(Errc::ShapeMismatch, "discriminator input must be 1 x R x R");
    labels_.assign(labels.begin(), labels.end());
    if (cfg_.n_classes > 0) {
      if (labels_.size() != static_cast<std::size_t>(x.batch)) throw Error(Errc::MissingClass, "conditional discriminator needs labels");
      for (int c : labels_)
        if (c < 0 || c >= cfg_.n_classes) throw Error(Errc::ClassOutOfRange, "label out of range");
    }
    FeatureMap<T> h = x;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      h = convs_[i].forward(h);
      nn::leaky_relu_forward(h.data, slopes_[i]);
    }
    last_shape_ = h;
    last_shape_.data.resize(0, 0);
    features_cache_ = h.flat();
    Mat<T> logits = head_.value.transpose() * features_cache_;
    logits.array() += head_bias_.value(0, 0);
    if (cfg_.n_classes > 0)
      for (int n = 0; n < x.batch; ++n) logits(0, n) += embed_.value.col(labels_[n]).dot(features_cache_.col(n));
    return logits;
  }

  // dlogits: 1 x N. Returns the input gradient; parameter grads are only
  // accumulated when `accumulate` is set.
  FeatureMap<T> backward(const Mat<T>& dlogits, bool accumulate = true) {
    if (accumulate) {
      head_.grad.noalias() += features_cache_ * dlogits.transpose();
      head_bias_.grad(0, 0) += dlogits.sum();
      if (cfg_.n_classes > 0)
        for (Eigen::Index n = 0; n < dlogits.cols(); ++n) embed_.grad.col(labels_[n]) += dlogits(0, n) * features_cache_.col(n);
    }
    return backward_data(dlogits, accumulate, nullptr);
  }

  // Adds weight * d/dtheta mean_n ||grad_x D(x_n)||^2 for the cached batch and
  // returns the penalty mean_n ||grad_x D(x_n)||^2. Exact for this network:
  // leaky-ReLU slopes are locally constant, so grad_x D is a linear chain in
  // the weights and its parameter derivative follows by one forward sweep of
  // the adjoint through the same layers.
  double r1_accumulate(T weight) {
    const auto n = static_cast<int>(features_cache_.cols());
    const Mat<T> ones = Mat<T>::Ones(1, n);
    std::vector<FeatureMap<T>> dpre(convs_.size());
    const FeatureMap<T> g = backward_data(ones, false, &dpre);

    double penalty = 0.0;
    for (Eigen::Index i = 0; i < g.data.size(); ++i) penalty += static_cast<double>(g.data.data()[i]) * g.data.data()[i];
    penalty /= n;

    FeatureMap<T> a = g;
    a.data *= weight * T(2) / static_cast<T>(n);
    Mat<T> col;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      FeatureMap<T> next = convs_[i].forward_linear(a, col);
      convs_[i].accumulate_weight_grad(col, dpre[i]);
      next.data.array() *= slopes_[i].array();
      a = std::move(next);
    }
    const auto a_h = a.flat();
    head_.grad.col(0) += a_h.rowwise().sum();
    if (cfg_.n_classes > 0)
      for (int k = 0; k < n; ++k) embed_.grad.col(labels_[k]) += a_h.col(k);
    return penalty;
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& c : convs_)
      for (auto* p : c.params()) out.push_back(p);
    out.push_back(&head_);
    out.push_back(&head_bias_);
    if (cfg_.n_classes > 0) out.push_back(&embed_);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

 private:
  FeatureMap<T> backward_data(const Mat<T>& dlogits, bool accumulate, std::vector<FeatureMap<T>>* dpre_out) {
    const auto n = dlogits.cols();
    FeatureMap<T> d(last_shape_.channels, static_cast<int>(n), last_shape_.height, last_shape_.width);
    auto flat = d.flat();
    for (Eigen::Index k = 0; k < n; ++k) {
      flat.col(k) = dlogits(0, k) * head_.value.col(0);
      if (cfg_.n_classes > 0) flat.col(k) += dlogits(0, k) * embed_.value.col(labels_[k]);
    }
    for (std::size_t i = convs_.size(); i-- > 0;) {
      d.data.array() *= slopes_[i].array();
      if (dpre_out) (*dpre_out)[i] = d;
      d = convs_[i].backward(d, accumulate);
    }
    return d;
  }

  NetworkConfig cfg_;
  std::vector<nn::Conv2d<T>> convs_;
  int features_ = 0;
  Param<T> head_, head_bias_, embed_;
  std::vector<Mat<T>> slopes_;
  std::vector<int> labels_;
  FeatureMap<T> last_shape_;
  Mat<T> features_cache_;
};

template <typename T>
struct NetworkPair {
  Generator<T> generator;
  Discriminator<T> discriminator;
};

// Deterministic given seed. Throws UnsupportedResolution outside [32, 256].
template <typename T>
NetworkPair<T> init_networks(int resolution, int n_classes, int latent_dim, std::uint64_t seed) {
  NetworkConfig cfg = make_network_config(resolution, n_classes, latent_dim);
  return {Generator<T>(cfg, seed), Discriminator<T>(cfg, seed)};
}

// Copies parameter values between networks of identical architecture.
template <typename Dst, typename Src>
void copy_params(Dst& dst, Src& src) {
  auto d = dst.params();
  auto s = src.params();
  if (d.size() != s.size()) throw Error(Errc::ShapeMismatch, "parameter lists differ");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i]->value.rows() != s[i]->value.rows() || d[i]->value.cols() != s[i]->value.cols())
      throw Error(Errc::ShapeMismatch, "parameter " + d[i]->name + " differs in shape");
    d[i]->value = s[i]->value.template cast<typename std::remove_reference_t<decltype(d[i]->value)>::Scalar>();
  }
}

}  // namespace gist::gan
