#include <algorithm>
#include <cmath>
#include <random>

#include "gist/corpus.hpp"
#include "gist/error.hpp"

namespace gist::corpus {

namespace {

// Distance from point p to the segment [a, b].
double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double t = std::clamp(((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

double gap_fraction(int label, int n_classes) {
  if (n_classes < 2) return 0.15;
  return 0.04 + 0.26 * static_cast<double>(label) / static_cast<double>(n_classes - 1);
}

Image render_joint(int res, std::mt19937_64& rng, double gap_frac) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const double scale = res / 32.0;
  const double background = between(0.05, 0.12);
  const double brightness = between(0.70, 0.90);
  const double angle = between(-0.12, 0.12);
  const double cx = res / 2.0 + between(-1.5, 1.5) * scale;
  const double cy = res / 2.0 + between(-1.5, 1.5) * scale;
  const double radius = between(0.10, 0.13) * res;
  const double gap = (gap_frac + between(-0.01, 0.01)) * res;
  const double noise_sigma = 0.02;

  // Bone axis direction (mostly vertical).
  const double dx = std::sin(angle), dy = std::cos(angle);
  const double tip = gap / 2.0 + radius;
  const double far = 1.5 * res;
  const double upper_ax = cx - dx * tip, upper_ay = cy - dy * tip;
  const double upper_bx = cx - dx * far, upper_by = cy - dy * far;
  const double lower_ax = cx + dx * tip, lower_ay = cy + dy * tip;
  const double lower_bx = cx + dx * far, lower_by = cy + dy * far;

  std::normal_distribution<double> noise(0.0, noise_sigma);
  Image img(res, res);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double d = std::min(segment_distance(px, py, upper_ax, upper_ay, upper_bx, upper_by),
                                segment_distance(px, py, lower_ax, lower_ay, lower_bx, lower_by));
      const double coverage = std::clamp(radius - d + 0.5, 0.0, 1.0);
      // Cortical shell slightly brighter than the medulla.
      const double rel = std::min(d / radius, 1.0);
      const double bone = brightness * (0.85 + 0.15 * rel * rel);
      const double v = background + coverage * (bone - background) + noise(rng);
      img.at(y, x) = static_cast<float>(v);
    }
  }
  quantize8(img);
  return img;
}

}  // namespace

std::pair<int, int> toy_joint_rows(int resolution) {
  const int half_band = std::max(1, static_cast<int>(std::lround(0.1 * resolution)));
  return {resolution / 2 - half_band, resolution / 2 + half_band};
}

std::vector<ImageRecord> generate_toy_corpus(int n, int resolution, int n_classes, std::uint64_t seed) {
  if (!is_power_of_two(resolution) || resolution < 32)
    throw Error(Errc::NotPowerOfTwo, "toy corpus resolution must be a power of two >= 32");
  if (n_classes != 1 && n_classes != 2 && n_classes != 5)
    throw Error(Errc::InvalidArgument, "toy corpus supports 1, 2 or 5 classes");
  if (n < 0) throw Error(Errc::InvalidArgument, "negative corpus size");
  std::vector<ImageRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    ImageRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "toy%06d", i);
    r.id = id;
    const int label = n_classes > 1 ? i % n_classes : 0;
    if (n_classes > 1) r.label = label;
    r.image = render_joint(resolution, rng, gap_fraction(label, n_classes));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace gist::corpus
