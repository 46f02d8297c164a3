#include "gist/image.hpp"

#include <algorithm>
#include <cmath>

namespace gist {

bool is_power_of_two(long long value) { return value >= 4 && (value & (value - 1)) == 0; }

Image resize_bilinear(const Image& src, int out_height, int out_width) {
  if (out_height == src.height && out_width == src.width) return src;
  Image out(out_height, out_width);
  const double sy = static_cast<double>(src.height) / out_height;
  const double sx = static_cast<double>(src.width) / out_width;
  for (int y = 0; y < out_height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, src.height - 1);
    double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, src.width - 1);
      double wx = fx - x0;
      double top = src.at(y0, x0) * (1.0 - wx) + src.at(y0, x1) * wx;
      double bottom = src.at(y1, x0) * (1.0 - wx) + src.at(y1, x1) * wx;
      out.at(y, x) = static_cast<float>(top * (1.0 - wy) + bottom * wy);
    }
  }
  return out;
}

Image rotate90(const Image& src) {
  Image out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) out.at(x, src.height - 1 - y) = src.at(y, x);
  return out;
}

void clamp_unit(Image& img) {
  for (float& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
}

void quantize8(Image& img) {
  for (float& v : img.pixels) v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
}

}  // namespace gist
