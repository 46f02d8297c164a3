#include "gist/gan/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>

#include <nlohmann/json.hpp>

#include "gist/error.hpp"
#include "gist/image_io.hpp"

namespace gist::gan {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

template <typename U>
void put_int(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Cursor {
 public:
  explicit Cursor(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void get_floats(std::vector<float>& out, std::size_t n) {
    need(n * sizeof(float));
    out.resize(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(Errc::CorruptCheckpoint, "truncated checkpoint");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[8] = {'G', 'I', 'S', 'T', 'C', 'K', 'P', 'T'};

void write_tensor(std::vector<std::uint8_t>& out, const NamedTensor& t) {
  put_int<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
  out.insert(out.end(), t.name.begin(), t.name.end());
  put_u8(out, 1);
  put_int<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
  for (int d : t.shape) put_int<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  const auto* raw = reinterpret_cast<const std::uint8_t*>(t.values.data());
  out.insert(out.end(), raw, raw + t.values.size() * sizeof(float));
}

NamedTensor read_tensor(Cursor& in) {
  NamedTensor t;
  t.name = in.get_string(in.get<std::uint16_t>());
  if (in.get<std::uint8_t>() != 1) throw Error(Errc::CorruptCheckpoint, "unsupported tensor dtype for " + t.name);
  const auto rank = in.get<std::uint32_t>();
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.shape.push_back(static_cast<int>(in.get<std::uint32_t>()));
    count *= static_cast<std::size_t>(t.shape.back());
  }
  in.get_floats(t.values, count);
  return t;
}

json network_json(const NetworkConfig& n) {
  return json{{"resolution", n.resolution}, {"latent_dim", n.latent_dim}, {"n_classes", n.n_classes},
              {"channels", n.channels}};
}

}  // namespace

std::vector<std::uint8_t> serialize(const TrainingCheckpoint& ckpt) {
  json history = json::array();
  for (const auto& p : ckpt.fid_history) history.push_back(json::array({p.kimg, p.fid}));
  json meta = {{"format", "gist-checkpoint"},
               {"version", kCheckpointVersion},
               {"network", network_json(ckpt.network)},
               {"nimg", ckpt.nimg},
               {"steps", ckpt.steps},
               {"fid_history", history},
               {"hyperparameters", to_json(ckpt.hyperparameters)},
               {"parent_checkpoint", ckpt.parent_checkpoint ? json(*ckpt.parent_checkpoint) : json(nullptr)},
               {"extractor_name", ckpt.extractor_name},
               {"tensors", {{"generator", ckpt.generator_state.size()}, {"discriminator", ckpt.discriminator_state.size()}}}};
  const std::string text = meta.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_int<std::uint32_t>(out, kCheckpointVersion);
  put_int<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  put_int<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.generator_state.size() + ckpt.discriminator_state.size()));
  for (const auto& t : ckpt.generator_state) write_tensor(out, t);
  for (const auto& t : ckpt.discriminator_state) write_tensor(out, t);
  return out;
}

TrainingCheckpoint deserialize(const std::vector<std::uint8_t>& bytes) {
  Cursor in(bytes);
  if (in.get_string(8) != std::string(kMagic, 8)) throw Error(Errc::CorruptCheckpoint, "not a gist checkpoint");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw Error(Errc::CorruptCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  json meta;
  try {
    meta = json::parse(in.get_string(in.get<std::uint64_t>()));
    TrainingCheckpoint ckpt;
    const auto& net = meta.at("network");
    ckpt.network.resolution = net.at("resolution").get<int>();
    ckpt.network.latent_dim = net.at("latent_dim").get<int>();
    ckpt.network.n_classes = net.at("n_classes").get<int>();
    ckpt.network.channels = net.at("channels").get<std::vector<int>>();
    ckpt.nimg = meta.at("nimg").get<long long>();
    ckpt.steps = meta.at("steps").get<long long>();
    for (const auto& p : meta.at("fid_history")) ckpt.fid_history.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    ckpt.hyperparameters = hyperparameters_from_json(meta.at("hyperparameters"));
    if (!meta.at("parent_checkpoint").is_null()) ckpt.parent_checkpoint = meta.at("parent_checkpoint").get<std::string>();
    ckpt.extractor_name = meta.at("extractor_name").get<std::string>();
    const auto n_gen = meta.at("tensors").at("generator").get<std::size_t>();
    const auto n_disc = meta.at("tensors").at("discriminator").get<std::size_t>();
    const auto count = in.get<std::uint32_t>();
    if (count != n_gen + n_disc) throw Error(Errc::CorruptCheckpoint, "tensor count disagrees with metadata");
    for (std::size_t i = 0; i < n_gen; ++i) ckpt.generator_state.push_back(read_tensor(in));
    for (std::size_t i = 0; i < n_disc; ++i) ckpt.discriminator_state.push_back(read_tensor(in));
    if (!in.done()) throw Error(Errc::CorruptCheckpoint, "trailing bytes after tensors");
    validate(ckpt.network);
    return ckpt;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptCheckpoint, std::string("metadata: ") + e.what());
  }
}

void save_checkpoint(const TrainingCheckpoint& ckpt, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize(ckpt));
}

TrainingCheckpoint load_checkpoint(const std::filesystem::path& path) {
  TrainingCheckpoint ckpt;
  try {
    ckpt = deserialize(io::read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
  ckpt.loaded_from = path;
  return ckpt;
}

std::vector<NamedTensor> export_state(const std::vector<Param<float>*>& params) {
  std::vector<NamedTensor> out;
  for (const auto* p : params) {
    NamedTensor t{p->name, p->shape, std::vector<float>(p->value.data(), p->value.data() + p->value.size())};
    out.push_back(std::move(t));
  }
  return out;
}

void import_state(const std::vector<Param<float>*>& params, const std::vector<NamedTensor>& state) {
  if (params.size() != state.size()) throw Error(Errc::CorruptCheckpoint, "parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    const auto& t = state[i];
    if (t.name != p->name || t.shape != p->shape || t.values.size() != static_cast<std::size_t>(p->value.size()))
      throw Error(Errc::CorruptCheckpoint, "tensor " + t.name + " does not match parameter " + p->name);
    std::memcpy(p->value.data(), t.values.data(), t.values.size() * sizeof(float));
  }
}

Generator<float> restore_generator(const TrainingCheckpoint& ckpt) {
  Generator<float> g(ckpt.network, 0);
  import_state(g.params(), ckpt.generator_state);
  return g;
}

Discriminator<float> restore_discriminator(const TrainingCheckpoint& ckpt) {
  Discriminator<float> d(ckpt.network, 0);
  import_state(d.params(), ckpt.discriminator_state);
  return d;
}

std::filesystem::path snapshot_path(const std::filesystem::path& dir, double kimg) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "snapshot-%06lld.ckpt", static_cast<long long>(std::floor(kimg + 1e-9)));
  return dir / buf;
}

}  // namespace gist::gan
