#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace gist {

// Single-channel image, row-major, intensities nominally in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, float fill = 0.0f)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

  float& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  bool square() const { return height == width; }
  bool operator==(const Image&) const = default;
};

struct ImageRecord {
  std::string id;
  Image image;
  std::optional<std::string> source_path;
  std::optional<int> label;
};

bool is_power_of_two(long long value);

// Bilinear resampling with half-pixel centres and edge clamping. Same-size
// requests return an exact copy.
Image resize_bilinear(const Image& src, int out_height, int out_width);

Image rotate90(const Image& src);

void clamp_unit(Image& img);

// Rounds every pixel to the nearest multiple of 1/255, the precision kept by
// 8-bit archives.
void quantize8(Image& img);

}  // namespace gist
