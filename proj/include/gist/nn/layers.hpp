#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gist/nn/tensor.hpp"

namespace gist::nn {

inline constexpr double kLeakySlope = 0.2;

// He-style gain for leaky ReLU.
inline double leaky_gain() { return std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope)); }

template <typename T, typename Rng>
void init_normal(Mat<T>& m, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

// Applies leaky ReLU in place and records the local slope of every element.
template <typename T>
void leaky_relu_forward(Mat<T>& x, Mat<T>& slope) {
  slope.resize(x.rows(), x.cols());
  const T a = static_cast<T>(kLeakySlope);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool pos = x.data()[i] > T(0);
    slope.data()[i] = pos ? T(1) : a;
    if (!pos) x.data()[i] *= a;
  }
}

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in, int out)
      : in_(in), out_(out), weight_(name + ".weight", {out, in}, out, in), bias_(name + ".bias", {out}, out, 1) {}

  template <typename Rng>
  void init(Rng& rng, double gain) { init_normal(weight_.value, gain / std::sqrt(static_cast<double>(in_)), rng); }

  // x: in x N.
  Mat<T> forward(const Mat<T>& x) {
    input_ = x;
    Mat<T> y = weight_.value * x;
    y.colwise() += bias_.value.col(0);
    return y;
  }

  Mat<T> backward(const Mat<T>& dy, bool accumulate = true) {
    if (accumulate) {
      weight_.grad.noalias() += dy * input_.transpose();
      bias_.grad.col(0) += dy.rowwise().sum();
    }
    return weight_.value.transpose() * dy;
  }

  std::vector<Param<T>*> params() { return {&weight_, &bias_}; }
  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_ = 0, out_ = 0;
  Param<T> weight_, bias_;
  Mat<T> input_;
};

// Strided convolution; weight is out x (k*k*in) with columns ordered (ky, kx, c).
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in, int out, int kernel, int stride, int pad)
      : in_(in), out_(out), kernel_(kernel), stride_(stride), pad_(pad),
        weight_(name + ".weight", {out, kernel, kernel, in}, out, kernel * kernel * in),
        bias_(name + ".bias", {out}, out, 1) {}

  template <typename Rng>
  void init(Rng& rng, double gain) {
    init_normal(weight_.value, gain / std::sqrt(static_cast<double>(kernel_ * kernel_ * in_)), rng);
  }

  PatchGeometry geometry(int h, int w) const {
    return {h, w, (h + 2 * pad_ - kernel_) / stride_ + 1, (w + 2 * pad_ - kernel_) / stride_ + 1, kernel_, stride_, pad_};
  }

  FeatureMap<T> forward(const FeatureMap<T>& x) {
    geom_ = geometry(x.height, x.width);
    batch_ = x.batch;
    im2col(x.data, in_, x.batch, geom_, col_);
    FeatureMap<T> y;
    y.channels = out_;
    y.batch = x.batch;
    y.height = geom_.small_h;
    y.width = geom_.small_w;
    y.data.noalias() = weight_.value * col_;
    y.data.colwise() += bias_.value.col(0);
    return y;
  }

  FeatureMap<T> backward(const FeatureMap<T>& dy, bool accumulate = true) {
    if (accumulate) {
      weight_.grad.noalias() += dy.data * col_.transpose();
      bias_.grad.col(0) += dy.data.rowwise().sum();
    }
    Mat<T> dcol = weight_.value.transpose() * dy.data;
    FeatureMap<T> dx;
    dx.channels = in_;
    dx.batch = batch_;
    dx.height = geom_.large_h;
    dx.width = geom_.large_w;
    col2im(dcol, in_, batch_, geom_, dx.data);
    return dx;
  }

  // Bias-free application of the layer; also returns the patch matrix of `a`.
  FeatureMap<T> forward_linear(const FeatureMap<T>& a, Mat<T>& col) const {
    const PatchGeometry g = geometry(a.height, a.width);
    im2col(a.data, in_, a.batch, g, col);
    FeatureMap<T> y;
    y.channels = out_;
    y.batch = a.batch;
    y.height = g.small_h;
    y.width = g.small_w;
    y.data.noalias() = weight_.value * col;
    return y;
  }

  // weight.grad += scale * dy * col^T
  void accumulate_weight_grad(const Mat<T>& col, const FeatureMap<T>& dy, T scale = T(1)) {
    weight_.grad.noalias() += scale * (dy.data * col.transpose());
  }

  std::vector<Param<T>*> params() { return {&weight_, &bias_}; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

 private:
  int in_ = 0, out_ = 0, kernel_ = 4, stride_ = 2, pad_ = 1;
  Param<T> weight_, bias_;
  PatchGeometry geom_{};
  int batch_ = 0;
  Mat<T> col_;
};

// Transposed convolution (adjoint of Conv2d's data path); weight is
// (k*k*out) x in with rows ordered (ky, kx, c_out).
template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(std::string name, int in, int out, int kernel, int stride, int pad)
      : in_(in), out_(out), kernel_(kernel), stride_(stride), pad_(pad),
        weight_(name + ".weight", {kernel, kernel, out, in}, kernel * kernel * out, in),
        bias_(name + ".bias", {out}, out, 1) {}

  template <typename Rng>
  void init(Rng& rng, double gain) {
    // Each output pixel receives in * (k/s)^2 contributions.
    const double fan_in = static_cast<double>(in_) * (kernel_ / stride_) * (kernel_ / stride_);
    init_normal(weight_.value, gain / std::sqrt(fan_in), rng);
  }

  FeatureMap<T> forward(const FeatureMap<T>& x) {
    input_ = x.data;
    batch_ = x.batch;
    geom_ = {(x.height - 1) * stride_ - 2 * pad_ + kernel_, (x.width - 1) * stride_ - 2 * pad_ + kernel_,
             x.height, x.width, kernel_, stride_, pad_};
    Mat<T> col = weight_.value * x.data;
    FeatureMap<T> y;
    y.channels = out_;
    y.batch = x.batch;
    y.height = geom_.large_h;
    y.width = geom_.large_w;
    col2im(col, out_, x.batch, geom_, y.data);
    y.data.colwise() += bias_.value.col(0);
    return y;
  }

  FeatureMap<T> backward(const FeatureMap<T>& dy, bool accumulate = true) {
    Mat<T> dcol;
    im2col(dy.data, out_, batch_, geom_, dcol);
    if (accumulate) {
      weight_.grad.noalias() += dcol * input_.transpose();
      bias_.grad.col(0) += dy.data.rowwise().sum();
    }
    FeatureMap<T> dx;
    dx.channels = in_;
    dx.batch = batch_;
    dx.height = geom_.small_h;
    dx.width = geom_.small_w;
    dx.data.noalias() = weight_.value.transpose() * dcol;
    return dx;
  }

  std::vector<Param<T>*> params() { return {&weight_, &bias_}; }

 private:
  int in_ = 0, out_ = 0, kernel_ = 4, stride_ = 2, pad_ = 1;
  Param<T> weight_, bias_;
  PatchGeometry geom_{};
  int batch_ = 0;
  Mat<T> input_;
};

// Adam with bias correction.
template <typename T>
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps = 1e-8) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Param<T>*>& params) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T step = static_cast<T>(lr_ / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(eps_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& g = params[i]->grad;
      m_[i] = b1 * m_[i] + (T(1) - b1) * g;
      v_[i] = b2 * v_[i] + (T(1) - b2) * g.cwiseProduct(g);
      params[i]->value.array() -= step * m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
    }
  }

  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Mat<T>> m_, v_;
};

template <typename T>
T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace gist::nn
