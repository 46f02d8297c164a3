#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace gist::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

// Batch of feature maps. `data` is channels x (batch*height*width); column
// index ((n*height)+y)*width+x, so the memory layout is NHWC.
template <typename T>
struct FeatureMap {
  int channels = 0;
  int batch = 0;
  int height = 0;
  int width = 0;
  Mat<T> data;

  FeatureMap() = default;
  FeatureMap(int c, int n, int h, int w) : channels(c), batch(n), height(h), width(w), data(Mat<T>::Zero(c, n * h * w)) {}

  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && batch == o.batch && height == o.height && width == o.width;
  }

  // Per-sample flattened view: (channels*height*width) x batch.
  Eigen::Map<const Mat<T>> flat() const { return {data.data(), channels * height * width, batch}; }
  Eigen::Map<Mat<T>> flat() { return {data.data(), channels * height * width, batch}; }
};

template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  Mat<T> value;
  Mat<T> grad;

  Param() = default;
  Param(std::string n, std::vector<int> s, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), shape(std::move(s)), value(Mat<T>::Zero(rows, cols)), grad(Mat<T>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

// Patch geometry between a "large" map and a "small" map for kernel k,
// stride s and padding p: small(oy, ox) reads large(oy*s - p + ky, ox*s - p + kx).
struct PatchGeometry {
  int large_h, large_w, small_h, small_w, kernel, stride, pad;
};

// Gathers patches of `large` (C x N*large_h*large_w) into `col`
// ((k*k*C) x N*small_h*small_w), rows ordered (ky, kx, c).
template <typename T>
void im2col(const Mat<T>& large, int channels, int batch, const PatchGeometry& g, Mat<T>& col) {
  const int k = g.kernel;
  col.setZero(static_cast<Eigen::Index>(k) * k * channels, static_cast<Eigen::Index>(batch) * g.small_h * g.small_w);
  const T* src = large.data();
  for (int n = 0; n < batch; ++n) {
    for (int oy = 0; oy < g.small_h; ++oy) {
      for (int ox = 0; ox < g.small_w; ++ox) {
        T* dst = col.data() + col.rows() * ((static_cast<Eigen::Index>(n) * g.small_h + oy) * g.small_w + ox);
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.large_h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.large_w) continue;
            const T* s = src + static_cast<Eigen::Index>(channels) * ((static_cast<Eigen::Index>(n) * g.large_h + iy) * g.large_w + ix);
            T* d = dst + (ky * k + kx) * channels;
            for (int c = 0; c < channels; ++c) d[c] = s[c];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-and-adds `col` back onto a zeroed large map.
template <typename T>
void col2im(const Mat<T>& col, int channels, int batch, const PatchGeometry& g, Mat<T>& large) {
  const int k = g.kernel;
  large.setZero(channels, static_cast<Eigen::Index>(batch) * g.large_h * g.large_w);
  T* dst = large.data();
  for (int n = 0; n < batch; ++n) {
    for (int oy = 0; oy < g.small_h; ++oy) {
      for (int ox = 0; ox < g.small_w; ++ox) {
        const T* src = col.data() + col.rows() * ((static_cast<Eigen::Index>(n) * g.small_h + oy) * g.small_w + ox);
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.large_h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.large_w) continue;
            T* d = dst + static_cast<Eigen::Index>(channels) * ((static_cast<Eigen::Index>(n) * g.large_h + iy) * g.large_w + ix);
            const T* s = src + (ky * k + kx) * channels;
            for (int c = 0; c < channels; ++c) d[c] += s[c];
          }
        }
      }
    }
  }
}

}  // namespace gist::nn
