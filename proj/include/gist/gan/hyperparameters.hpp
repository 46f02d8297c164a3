#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gist::gan {

struct Hyperparameters {
  int batch_size = 32;
  double gamma = 1.0;         // R1 weight
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.99;
  int latent_dim = 64;
  int r1_interval = 16;       // discriminator steps between R1 applications
  double total_kimg = 200;    // thousands of real images shown
  double snapshot_kimg = 10;
  std::uint64_t seed = 0;
  bool deterministic = false;

  bool operator==(const Hyperparameters&) const = default;
};

// Throws InvalidArgument when an invariant is violated.
void validate(const Hyperparameters& hp);

nlohmann::json to_json(const Hyperparameters& hp);
// Missing keys keep their defaults; unknown keys throw UnknownKey.
Hyperparameters hyperparameters_from_json(const nlohmann::json& j, Hyperparameters base = {});

// Overrides one field by name; throws UnknownHyperparameter.
void set_hyperparameter(Hyperparameters& hp, const std::string& name, const nlohmann::json& value);

const std::vector<std::string>& hyperparameter_names();

}  // namespace gist::gan
