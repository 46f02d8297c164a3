#include "gist/gan/networks.hpp"

#include <algorithm>

#include "gist/image.hpp"

namespace gist::gan {

int upsampling_blocks(int resolution) {
  int blocks = 0;
  for (int r = 4; r < resolution; r *= 2) ++blocks;
  return blocks;
}

std::vector<int> default_channels(int resolution) {
  std::vector<int> out;
  for (int size = 4; size < resolution; size *= 2) out.push_back(std::clamp(256 / size, 8, 64));
  return out;
}

void validate(const NetworkConfig& cfg) {
  if (!is_power_of_two(cfg.resolution) || cfg.resolution < 8)
    throw Error(Errc::UnsupportedResolution, "resolution must be a power of two >= 8");
  if (cfg.latent_dim < 1) throw Error(Errc::InvalidArgument, "latent_dim must be positive");
  if (cfg.n_classes < 0) throw Error(Errc::InvalidArgument, "n_classes must be non-negative");
  if (static_cast<int>(cfg.channels.size()) != upsampling_blocks(cfg.resolution))
    throw Error(Errc::InvalidArgument, "channel list must have one entry per size 4 .. resolution/2");
  for (int c : cfg.channels)
    if (c < 1) throw Error(Errc::InvalidArgument, "channel widths must be positive");
}

NetworkConfig make_network_config(int resolution, int n_classes, int latent_dim) {
  if (!is_power_of_two(resolution) || resolution < 32 || resolution > 256)
    throw Error(Errc::UnsupportedResolution,
                std::to_string(resolution) + " is outside the supported power-of-two range [32, 256]");
  NetworkConfig cfg{resolution, latent_dim, n_classes, default_channels(resolution)};
  validate(cfg);
  return cfg;
}

}  // namespace gist::gan
