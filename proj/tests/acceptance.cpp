// Prints one PASS/FAIL line per acceptance criterion; exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "gist/blindtest/server.hpp"
#include "gist/blindtest/service.hpp"
#include "gist/blindtest/session.hpp"
#include "gist/corpus.hpp"
#include "gist/downstream.hpp"
#include "gist/experiments.hpp"
#include "gist/fid.hpp"
#include "gist/gan/checkpoint.hpp"
#include "gist/gan/losses.hpp"
#include "gist/gan/trainer.hpp"
#include "gist/image_io.hpp"
#include "gist/synthesis.hpp"
#include "gist/zip_archive.hpp"
#include "support.hpp"

// After Eigen: resolv.h, pulled in here, defines a _res macro.
#include <httplib.h>

using namespace gist;
using gist::testing::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Collects failed conditions with a short description of each.
struct Check {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string cli_path;

// Trained model shared by criteria 3 and 5.
struct Trained {
  std::vector<ImageRecord> data;
  gan::TrainingCheckpoint final_ckpt;
  gan::TrainingCheckpoint init_ckpt;
};
std::optional<Trained> trained;
TempDir* scratch = nullptr;

void criterion1(Check& c) {
  auto nets = gan::init_networks<float>(32, 0, 16, 5);
  for (auto* p : nets.discriminator.params()) p->value.setZero();
  nn::Mat<float> z = nn::Mat<float>::Random(16, 8);
  nn::FeatureMap<float> real(1, 8, 32, 32);
  real.data.setRandom();
  const double d = gan::d_loss(nets.discriminator, nets.generator, real, {}, z, {}, 0.0, true).total;
  const double g = gan::g_loss(nets.discriminator, nets.generator, z, {});
  c.expect(std::abs(d - 2 * std::log(2.0)) <= 1e-6, "d_loss " + fmt("%.9f", d));
  c.expect(std::abs(g - std::log(2.0)) <= 1e-6, "g_loss " + fmt("%.9f", g));

  double worst = 0;
  for (int k : {0, 2}) {
    for (std::uint64_t seed : {1, 2, 3}) {
      worst = std::max(worst, gist::testing::d_loss_fd_error(k, seed, 0.0, false));
      worst = std::max(worst, gist::testing::d_loss_fd_error(k, seed, 2.0, true, 4));
      worst = std::max(worst, gist::testing::g_loss_fd_error(k, seed));
    }
  }
  c.expect(worst <= 1e-4, "gradient relative error " + fmt("%.3g", worst));
  c.note("max relative gradient error " + fmt("%.2e", worst));
}

void criterion2(Check& c) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> var(0.01, 4.0);
  // 1-D and diagonal closed forms.
  double worst_closed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = trial < 20 ? 1 : 1 + trial % 16;
    Eigen::VectorXd m1(dim), m2(dim), v1(dim), v2(dim);
    for (int i = 0; i < dim; ++i) {
      m1(i) = n(rng);
      m2(i) = n(rng);
      v1(i) = var(rng);
      v2(i) = var(rng);
    }
    const double got = fid::frechet_distance({m1, v1.asDiagonal()}, {m2, v2.asDiagonal()});
    worst_closed = std::max(worst_closed, std::abs(got - gist::testing::per_axis_frechet(m1, v1, m2, v2)));
  }
  c.expect(worst_closed <= 1e-8, "closed-form error " + fmt("%.3g", worst_closed));

  double worst_sqrt = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 1 + trial % 16;
    const Eigen::MatrixXd s = gist::testing::random_psd(dim, rng, trial % 7 == 0 ? std::max(1, dim / 2) : -1);
    const Eigen::MatrixXd r = fid::matrix_sqrt_psd(s);
    worst_sqrt = std::max(worst_sqrt, (r * r - s).norm() / s.norm());
  }
  c.expect(worst_sqrt <= 1e-6, "sqrt residual " + fmt("%.3g", worst_sqrt));

  const auto toy = corpus::generate_toy_corpus(300, 32, 2, 9);
  const auto ex = fid::desk_extractor();
  const double self = fid::compute_fid(toy, toy, ex).fid;
  c.expect(std::abs(self) <= 1e-10, "FID(X,X) " + fmt("%.3g", self));

  double worst_sym = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + trial % 16;
    fid::GaussianMoments a{Eigen::VectorXd::NullaryExpr(dim, [&] { return n(rng); }), gist::testing::random_psd(dim, rng)};
    fid::GaussianMoments b{Eigen::VectorXd::NullaryExpr(dim, [&] { return n(rng); }), gist::testing::random_psd(dim, rng)};
    worst_sym = std::max(worst_sym, std::abs(fid::frechet_distance(a, b) - fid::frechet_distance(b, a)));
  }
  const auto half_a = std::vector<ImageRecord>(toy.begin(), toy.begin() + 150);
  const auto half_b = std::vector<ImageRecord>(toy.begin() + 150, toy.end());
  worst_sym = std::max(worst_sym, std::abs(fid::compute_fid(half_a, half_b, ex).fid - fid::compute_fid(half_b, half_a, ex).fid));
  c.expect(worst_sym <= 1e-8, "asymmetry " + fmt("%.3g", worst_sym));
  c.note("closed form " + fmt("%.1e", worst_closed) + ", sqrt " + fmt("%.1e", worst_sqrt) + ", self " +
         fmt("%.1e", self) + ", asym " + fmt("%.1e", worst_sym));
}

void criterion3(Check& c) {
  Trained t;
  t.data = corpus::generate_toy_corpus(2000, 32, 2, 0);
  gan::Hyperparameters hp;
  hp.deterministic = true;
  gan::TrainOptions opts;
  opts.checkpoint_dir = scratch->path() / "c3" / "checkpoints";
  opts.log_dir = scratch->path() / "c3";
  t.final_ckpt = gan::train(t.data, hp, std::nullopt, opts);
  t.init_ckpt = gan::load_checkpoint(gan::snapshot_path(opts.checkpoint_dir, 0.0));
  const auto& h = t.final_ckpt.fid_history;
  c.expect(h.size() >= 2, "fewer than two FID snapshots");
  if (h.size() >= 2) {
    c.expect(h.back().fid <= 0.5 * h.front().fid, "final FID " + fmt("%.4f", h.back().fid) + " vs first " +
                                                    fmt("%.4f", h.front().fid));
    c.note("FID " + fmt("%.4f", h.front().fid) + " @" + fmt("%.1f", h.front().kimg) + " kimg -> " +
           fmt("%.4f", h.back().fid) + " @" + fmt("%.1f", h.back().kimg) + " kimg");
  }
  const auto ex = fid::desk_extractor();
  const std::vector<ImageRecord> a(t.data.begin(), t.data.begin() + 1000), b(t.data.begin() + 1000, t.data.end());
  const double halves = fid::compute_fid(a, b, ex).fid;
  auto init_gen = gan::restore_generator(t.init_ckpt);
  const auto init_imgs = gan::sample_images(init_gen, 1000, 77);
  const double vs_init = fid::compute_fid(fid::images_of(t.data), init_imgs, ex).fid;
  c.expect(halves < vs_init, "FID(halfA, halfB) " + fmt("%.4f", halves) + " >= FID(toy, init) " + fmt("%.4f", vs_init));
  c.note("halves " + fmt("%.4f", halves) + " < init " + fmt("%.4f", vs_init));
  trained = std::move(t);
}

void criterion4(Check& c) {
  const auto data = corpus::generate_toy_corpus(2000, 32, 2, 0);
  experiments::SweepSpec spec;
  spec.kind = experiments::SweepKind::Size;
  spec.sizes = {50, 200, 1000};
  spec.budget_kimg = 100;
  gan::Hyperparameters hp;
  hp.deterministic = true;
  const auto table = experiments::size_sweep(data, spec, hp, scratch->path() / "c4");
  const double f50 = table[0].converged_fid_min, f200 = table[1].converged_fid_min, f1000 = table[2].converged_fid_min;
  c.expect(f1000 <= f200, "fid_min(1000) " + fmt("%.4f", f1000) + " > fid_min(200) " + fmt("%.4f", f200));
  c.expect(f200 <= 1.2 * f50, "fid_min(200) " + fmt("%.4f", f200) + " > 1.2 x fid_min(50) " + fmt("%.4f", f50));
  c.note("converged_fid_min 50/200/1000 = " + fmt("%.4f", f50) + "/" + fmt("%.4f", f200) + "/" + fmt("%.4f", f1000) +
         " at 100 kimg");
}

void criterion5(Check& c) {
  if (!trained) {
    c.expect(false, "no trained model");
    return;
  }
  const auto eval = corpus::generate_toy_corpus(400, 32, 2, 4242);
  const auto synth_info = synthesis::emit_synthetic_dataset(trained->final_ckpt, 500, 0, scratch->path() / "c5.zip");
  const auto synth = corpus::read_dataset(synth_info.path).records;
  const auto reports = downstream::run_protocol(trained->data, eval, &synth,
                                                {downstream::logistic_spec(), downstream::convnet_spec()}, 0);
  std::string summary;
  for (const auto& r : reports) {
    const std::string tag = r.classifier_name + "/" + downstream::to_string(r.regime);
    if (r.regime == downstream::Regime::Base)
      c.expect(r.accuracy >= 0.9, tag + " accuracy " + fmt("%.4f", r.accuracy));
    else
      c.expect(r.accuracy > 0.5, tag + " accuracy " + fmt("%.4f", r.accuracy));
    summary += tag + "=" + fmt("%.3f", r.accuracy) + " ";

    // Per-sample recount of the macro metrics.
    const int k = static_cast<int>(r.confusion.rows());
    std::vector<std::pair<int, int>> samples;
    for (int a = 0; a < k; ++a)
      for (int p = 0; p < k; ++p)
        for (int i = 0; i < r.confusion(a, p); ++i) samples.emplace_back(a, p);
    double correct = 0, prec = 0, rec = 0;
    for (auto [a, p] : samples) correct += a == p;
    for (int cls = 0; cls < k; ++cls) {
      double tp = 0, pred = 0, act = 0;
      for (auto [a, p] : samples) {
        tp += a == cls && p == cls;
        pred += p == cls;
        act += a == cls;
      }
      prec += pred > 0 ? tp / pred : 0;
      rec += act > 0 ? tp / act : 0;
    }
    const auto m = downstream::classification_metrics(r.confusion);
    c.expect(m.accuracy == correct / static_cast<double>(samples.size()) && std::abs(m.precision - prec / k) < 1e-15 &&
                 std::abs(m.recall - rec / k) < 1e-15 && m.accuracy == r.accuracy,
             tag + " metrics differ from recount");
  }
  c.note(summary);
}

void criterion6(Check& c) {
  Eigen::Matrix2i conf;
  conf << 29, 21, 24, 26;
  const auto r = blindtest::report_from_confusion(conf);
  c.expect(r.accuracy == 55.0 / 100.0 && r.precision == 29.0 / 53.0 && r.recall == 29.0 / 50.0, "crafted case");

  const auto real = corpus::generate_toy_corpus(40, 32, 2, 1), synth = corpus::generate_toy_corpus(40, 32, 2, 2);
  blindtest::SessionConfig cfg;
  cfg.n_real = 50;
  cfg.n_synth = 50;
  cfg.n_orientation = 0;
  auto big = blindtest::create_session(corpus::generate_toy_corpus(60, 32, 2, 1), corpus::generate_toy_corpus(60, 32, 2, 2), cfg);
  for (const auto& i : big.items) blindtest::submit_response(big, i.item_id, blindtest::Truth::Real);
  const auto all_real = blindtest::score_session(big);
  c.expect(all_real.accuracy == 0.5 && all_real.precision == 0.5 && all_real.recall == 1.0, "all-real rater");

  blindtest::BlindTestService service(real, synth);
  blindtest::BlindTestServer server(service);
  const int port = server.bind("127.0.0.1", 0);
  std::thread th([&] { server.listen(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  std::string leaked;
  auto scan = [&](const std::string& where, const httplib::Result& res) {
    if (!res) {
      leaked += where + " (no response) ";
      return;
    }
    std::string lower = res->body;
    for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    for (const auto& [k, v] : res->headers) lower += "\n" + k + ":" + v;
    for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    for (const char* word : {"real", "synth", "truth"})
      if (lower.find(word) != std::string::npos) leaked += where + " ";
  };
  auto res = client.Post("/sessions", R"({"n_real":5,"n_synth":5,"n_orientation":4,"seed":3})", "application/json");
  scan("create", res);
  const std::string id = json::parse(res->body).at("session_id");
  for (const auto& o : json::parse(res->body).at("orientation_ids")) {
    auto img = client.Get("/sessions/" + id + "/items/" + o.get<std::string>() + "/image");
    c.expect(img && img->status == 200, "orientation image");
  }
  for (int i = 0; i < 10; ++i) {
    auto nx = client.Get("/sessions/" + id + "/next");
    scan("next", nx);
    const std::string item = json::parse(nx->body).at("item_id");
    auto img = client.Get("/sessions/" + id + "/items/" + item + "/image");
    c.expect(img && img->status == 200 && img->get_header_value("Content-Type") == "image/png", "item image");
    for (const auto& [k, v] : img->headers) {
      std::string h = k + ":" + v;
      for (auto& ch : h) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      if (h.find("real") != std::string::npos || h.find("synth") != std::string::npos) leaked += "image-header ";
    }
    scan("status", client.Get("/sessions/" + id));
    if (i < 9) {
      auto early = client.Get("/sessions/" + id + "/report");
      c.expect(early && early->status == 403, "report before completion not refused");
    }
    auto ack = client.Post("/sessions/" + id + "/responses", json{{"item_id", item}, {"label", "real"}}.dump(),
                           "application/json");
    if (i < 9) scan("respond", ack);
  }
  auto rep = client.Get("/sessions/" + id + "/report");
  c.expect(rep && rep->status == 200, "report after completion");
  server.stop();
  th.join();
  c.expect(leaked.empty(), "truth-bearing payloads: " + leaked);
}

void criterion7(Check& c) {
  const fs::path dir = scratch->path() / "c7";
  fs::create_directories(dir);
  auto records = corpus::generate_toy_corpus(40, 32, 2, 5);
  const auto info = corpus::package_dataset(records, dir / "a.zip");
  const auto back = corpus::read_dataset(info.path).records;
  bool exact = back.size() == records.size();
  for (std::size_t i = 0; exact && i < back.size(); ++i) {
    Image q = records[i].image;
    quantize8(q);
    exact = back[i].image == q && back[i].label == records[i].label;
  }
  c.expect(exact, "archive round trip");

  const auto z = zip::Reader::open(dir / "a.zip");
  const auto manifest = json::parse(z.read_text(corpus::kManifestName));
  bool schema = manifest.is_object() && manifest.size() == 1 && manifest.contains("labels") && manifest["labels"].is_array() &&
                manifest["labels"].size() == records.size();
  if (schema)
    for (const auto& e : manifest["labels"])
      schema = schema && e.is_array() && e.size() == 2 && e[0].is_string() && e[1].is_number_integer() &&
               z.contains(e[0].get<std::string>());
  c.expect(schema, "dataset.json schema");

  corpus::package_dataset(records, dir / "b.zip");
  c.expect(io::read_file(dir / "a.zip") == io::read_file(dir / "b.zip"), "archive bytes");

  const auto s1 = corpus::split_dataset(records, {0.25, 3}), s2 = corpus::split_dataset(records, {0.25, 3});
  bool same_split = s1.train.size() == s2.train.size() && s1.test.size() == s2.test.size();
  for (std::size_t i = 0; same_split && i < s1.train.size(); ++i) same_split = s1.train[i].id == s2.train[i].id;
  for (std::size_t i = 0; same_split && i < s1.test.size(); ++i) same_split = s1.test[i].id == s2.test[i].id;
  c.expect(same_split, "split");

  const auto t1 = corpus::generate_toy_corpus(50, 64, 5, 8), t2 = corpus::generate_toy_corpus(50, 64, 5, 8);
  bool same_toy = true;
  for (std::size_t i = 0; i < t1.size(); ++i) same_toy = same_toy && t1[i].image == t2[i].image && t1[i].label == t2[i].label;
  c.expect(same_toy, "toy corpus");

  const auto ckpt = gist::testing::fresh_checkpoint(32, 2, 6);
  const auto g1 = synthesis::generate(ckpt, {1, 2, 3, 99}, 1), g2 = synthesis::generate(ckpt, {1, 2, 3, 99}, 1);
  bool same_gen = true;
  for (std::size_t i = 0; i < g1.size(); ++i) same_gen = same_gen && g1[i].image == g2[i].image;
  c.expect(same_gen, "generation");

  gan::Hyperparameters hp;
  hp.batch_size = 16;
  hp.latent_dim = 16;
  hp.total_kimg = 0.4;
  hp.snapshot_kimg = 0.2;
  hp.r1_interval = 4;
  hp.deterministic = true;
  std::vector<std::vector<std::uint8_t>> finals;
  for (const char* run : {"r1", "r2"}) {
    gan::TrainOptions o;
    o.checkpoint_dir = dir / run / "ckpt";
    o.log_dir = dir / run;
    o.fid_n_gen = 64;
    auto ckpt = gan::train(records, hp, std::nullopt, o);
    ckpt.loaded_from.reset();
    ckpt.parent_checkpoint.reset();
    finals.push_back(gan::serialize(ckpt));
  }
  for (const char* f : {"metrics.csv", "fid.csv"})
    c.expect(io::read_file(dir / "r1" / f) == io::read_file(dir / "r2" / f), std::string("training log ") + f);
  c.expect(finals[0] == finals[1], "final checkpoint");
}

void criterion8(Check& c) {
  const fs::path dir = scratch->path() / "c8";
  fs::create_directories(dir);
  const json cfg = json::parse(R"({
    "run_name": "full",
    "dataset": {"toy": {"images": 400, "resolution": 32, "classes": 2, "seed": 1}},
    "preprocess": {"resolution": 32, "split": {"test_fraction": 0.25, "seed": 0}},
    "hyperparameters": {"batch_size": 16, "latent_dim": 32, "total_kimg": 2, "snapshot_kimg": 1, "deterministic": true},
    "train": {"fid_n_gen": 256},
    "generate": {"n_per_class": 50, "grid": 16},
    "evaluate": {"fid_n_gen": 256}
  })");
  std::ofstream(dir / "full.json") << cfg.dump(2);
  json partial = cfg;
  partial["run_name"] = "partial";
  std::ofstream(dir / "partial.json") << partial.dump(2);

  const std::string runs = (dir / "runs").string();
  const int full = std::system((cli_path + " run --config " + (dir / "full.json").string() + " --runs-dir " + runs + " > " +
                                (dir / "full.log").string() + " 2>&1")
                                   .c_str());
  c.expect(full == 0, "full run exit status " + std::to_string(full));
  const fs::path r = dir / "runs" / "full";
  for (const char* f : {"manifest.json", "dataset/train.zip", "dataset/test.zip", "dataset/manifest.json",
                        "checkpoints/final.ckpt", "checkpoints/manifest.json", "logs/metrics.csv", "logs/fid.csv",
                        "samples/synthetic.zip", "samples/grid.png", "samples/manifest.json", "eval/fid.txt",
                        "eval/gan_train_test.csv", "eval/reports.json", "eval/manifest.json"})
    c.expect(fs::exists(r / f), std::string("missing ") + f);

  const int part = std::system((cli_path + " run --config " + (dir / "partial.json").string() +
                                " --stages preprocess,train --runs-dir " + runs + " > " + (dir / "partial.log").string() +
                                " 2>&1")
                                   .c_str());
  c.expect(part == 0, "partial run exit status " + std::to_string(part));
  const fs::path p = dir / "runs" / "partial";
  c.expect(fs::exists(p / "checkpoints" / "final.ckpt"), "partial run has no checkpoint");
  c.expect(!fs::exists(p / "samples") && !fs::exists(p / "eval"), "partial run produced generation/evaluation outputs");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: gist_acceptance <path to gist cli> [criteria, e.g. 1,2,7]\n");
    return 2;
  }
  cli_path = argv[1];
  TempDir tmp;
  scratch = &tmp;
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
      {"1 loss analytics and gradients", criterion1},
      {"2 FID oracles", criterion2},
      {"3 training signal", criterion3},
      {"4 size-sweep trend", criterion4},
      {"5 gan-train/gan-test protocol", criterion5},
      {"6 blind-test scoring and blinding", criterion6},
      {"7 format contracts and reproducibility", criterion7},
      {"8 pipeline orchestration", criterion8},
  };
  // Optional subset; criterion 5 reuses the model trained by criterion 3.
  const std::string only = argc > 2 ? std::string(",") + argv[2] + "," : "";
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && only.find("," + name.substr(0, name.find(' ')) + ",") == std::string::npos) continue;
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string detail;
    for (const auto& n : c.notes) detail += (detail.empty() ? "" : "; ") + n;
    for (const auto& f : c.failures) detail += (detail.empty() ? "" : "; ") + f;
    std::printf("%s criterion %s (%.1fs)%s%s\n", c.failures.empty() ? "PASS" : "FAIL", name.c_str(), secs,
                detail.empty() ? "" : ": ", detail.c_str());
    std::fflush(stdout);
    failed += !c.failures.empty();
  }
  return failed == 0 ? 0 : 1;
}
