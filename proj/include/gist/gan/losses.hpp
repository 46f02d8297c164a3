#pragma once

#include <span>

#include "gist/gan/networks.hpp"

namespace gist::gan {

struct DLoss {
  double total = 0.0;
  double fake_term = 0.0;     // mean softplus(D(G(z)))
  double real_term = 0.0;     // mean softplus(-D(x))
  double r1_penalty = 0.0;    // mean ||grad_x D(x)||^2 (0 when not applied)
  double r1_term = 0.0;       // (gamma/2) * r1_penalty * r1_interval
};

// Non-saturating discriminator loss with optional lazy R1 penalty.
// Accumulates gradients into the discriminator only; the generator is run
// forward without touching its gradients.
template <typename T>
DLoss d_loss(Discriminator<T>& disc, Generator<T>& gen, const FeatureMap<T>& real, std::span<const int> real_labels,
             const Mat<T>& z, std::span<const int> fake_labels, double gamma, bool apply_r1, int r1_interval = 1) {
  FeatureMap<T> fake = gen.forward(z, fake_labels);
  if (!fake.same_shape(real)) throw Error(Errc::ShapeMismatch, "real and generated batches differ in shape");
  DLoss out;

  const Mat<T> fake_logits = disc.forward(fake, fake_labels);
  const auto nf = static_cast<double>(fake_logits.cols());
  Mat<T> dfake(1, fake_logits.cols());
  for (Eigen::Index i = 0; i < fake_logits.cols(); ++i) {
    out.fake_term += static_cast<double>(nn::softplus(fake_logits(0, i)));
    dfake(0, i) = static_cast<T>(nn::sigmoid(static_cast<double>(fake_logits(0, i))) / nf);
  }
  out.fake_term /= nf;
  disc.backward(dfake, true);

  const Mat<T> real_logits = disc.forward(real, real_labels);
  const auto nr = static_cast<double>(real_logits.cols());
  Mat<T> dreal(1, real_logits.cols());
  for (Eigen::Index i = 0; i < real_logits.cols(); ++i) {
    out.real_term += static_cast<double>(nn::softplus(-real_logits(0, i)));
    dreal(0, i) = static_cast<T>(-nn::sigmoid(-static_cast<double>(real_logits(0, i))) / nr);
  }
  out.real_term /= nr;
  disc.backward(dreal, true);

  if (apply_r1 && gamma > 0.0) {
    const double weight = 0.5 * gamma * r1_interval;
    out.r1_penalty = disc.r1_accumulate(static_cast<T>(weight));
    out.r1_term = weight * out.r1_penalty;
  }
  out.total = out.fake_term + out.real_term + out.r1_term;
  return out;
}

// Non-saturating generator loss mean softplus(-D(G(z))). Accumulates
// gradients into the generator only.
template <typename T>
double g_loss(Discriminator<T>& disc, Generator<T>& gen, const Mat<T>& z, std::span<const int> labels) {
  FeatureMap<T> fake = gen.forward(z, labels);
  const Mat<T> logits = disc.forward(fake, labels);
  const auto n = static_cast<double>(logits.cols());
  double loss = 0.0;
  Mat<T> dlogits(1, logits.cols());
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    loss += static_cast<double>(nn::softplus(-logits(0, i)));
    dlogits(0, i) = static_cast<T>(-nn::sigmoid(-static_cast<double>(logits(0, i))) / n);
  }
  gen.backward(disc.backward(dlogits, false));
  return loss / n;
}

}  // namespace gist::gan
