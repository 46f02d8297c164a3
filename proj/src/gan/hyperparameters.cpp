#include "gist/gan/hyperparameters.hpp"

#include "gist/error.hpp"

namespace gist::gan {

using nlohmann::json;

void validate(const Hyperparameters& hp) {
  if (hp.batch_size < 1) throw Error(Errc::InvalidArgument, "batch_size must be >= 1");
  if (hp.r1_interval < 1) throw Error(Errc::InvalidArgument, "r1_interval must be >= 1");
  if (hp.gamma < 0.0) throw Error(Errc::InvalidArgument, "gamma must be non-negative");
  if (!(hp.lr_g > 0.0) || !(hp.lr_d > 0.0)) throw Error(Errc::InvalidArgument, "learning rates must be positive");
  if (hp.latent_dim < 1) throw Error(Errc::InvalidArgument, "latent_dim must be >= 1");
  if (!(hp.total_kimg > 0.0)) throw Error(Errc::InvalidArgument, "total_kimg must be positive");
  if (!(hp.snapshot_kimg > 0.0) || hp.snapshot_kimg > hp.total_kimg)
    throw Error(Errc::InvalidArgument, "snapshot_kimg must lie in (0, total_kimg]");
  if (hp.beta1 < 0.0 || hp.beta1 >= 1.0 || hp.beta2 < 0.0 || hp.beta2 >= 1.0)
    throw Error(Errc::InvalidArgument, "Adam betas must lie in [0, 1)");
}

json to_json(const Hyperparameters& hp) {
  return json{{"batch_size", hp.batch_size}, {"gamma", hp.gamma},       {"lr_g", hp.lr_g},
              {"lr_d", hp.lr_d},             {"beta1", hp.beta1},       {"beta2", hp.beta2},
              {"latent_dim", hp.latent_dim}, {"r1_interval", hp.r1_interval}, {"total_kimg", hp.total_kimg},
              {"snapshot_kimg", hp.snapshot_kimg}, {"seed", hp.seed},   {"deterministic", hp.deterministic}};
}

const std::vector<std::string>& hyperparameter_names() {
  static const std::vector<std::string> names = {"batch_size", "gamma",      "lr_g",          "lr_d",
                                                 "beta1",      "beta2",      "latent_dim",    "r1_interval",
                                                 "total_kimg", "snapshot_kimg", "seed",       "deterministic"};
  return names;
}

void set_hyperparameter(Hyperparameters& hp, const std::string& name, const json& value) {
  try {
    if (name == "batch_size") hp.batch_size = value.get<int>();
    else if (name == "gamma") hp.gamma = value.get<double>();
    else if (name == "lr_g") hp.lr_g = value.get<double>();
    else if (name == "lr_d") hp.lr_d = value.get<double>();
    else if (name == "beta1") hp.beta1 = value.get<double>();
    else if (name == "beta2") hp.beta2 = value.get<double>();
    else if (name == "latent_dim") hp.latent_dim = value.get<int>();
    else if (name == "r1_interval") hp.r1_interval = value.get<int>();
    else if (name == "total_kimg") hp.total_kimg = value.get<double>();
    else if (name == "snapshot_kimg") hp.snapshot_kimg = value.get<double>();
    else if (name == "seed") hp.seed = value.get<std::uint64_t>();
    else if (name == "deterministic") hp.deterministic = value.get<bool>();
    else throw Error(Errc::UnknownHyperparameter, "no hyperparameter named '" + name + "'");
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, "hyperparameter '" + name + "': " + e.what());
  }
}

Hyperparameters hyperparameters_from_json(const json& j, Hyperparameters base) {
  if (!j.is_object()) throw Error(Errc::ParseError, "hyperparameters must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      set_hyperparameter(base, key, value);
    } catch (const Error& e) {
      if (e.code() == Errc::UnknownHyperparameter) throw Error(Errc::UnknownKey, "hyperparameters." + key);
      throw;
    }
  }
  return base;
}

}  // namespace gist::gan
