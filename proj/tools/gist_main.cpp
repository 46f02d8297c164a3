#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "gist/blindtest/server.hpp"
#include "gist/corpus.hpp"
#include "gist/error.hpp"
#include "gist/experiments.hpp"
#include "gist/fid.hpp"
#include "gist/pipeline.hpp"
#include "gist/synthesis.hpp"

namespace {

// "1,4,10-15" -> 1 4 10 11 12 13 14 15
std::vector<std::int64_t> parse_seeds(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    const auto dash = part.find('-', 1);
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoll(part));
      } else {
        const auto a = std::stoll(part.substr(0, dash)), b = std::stoll(part.substr(dash + 1));
        if (b < a) throw gist::Error(gist::Errc::InvalidArgument, "empty seed range " + part);
        for (auto s = a; s <= b; ++s) out.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw gist::Error(gist::Errc::InvalidArgument, "bad seed '" + part + "'");
    }
  }
  if (out.empty()) throw gist::Error(gist::Errc::InvalidArgument, "no seeds given");
  return out;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ','))
    if (!part.empty()) out.push_back(part);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gist: GAN training, synthesis and evaluation for grayscale image corpora"};
  app.require_subcommand(1);

  std::string config_path, stages, runs_dir;
  bool resume = false;
  auto* run = app.add_subcommand("run", "run pipeline stages from a config file");
  run->add_option("--config", config_path, "pipeline config (JSON)")->required();
  run->add_option("--stages", stages, "comma-separated stage subset, overrides the config");
  run->add_flag("--resume", resume, "skip stages whose manifests are complete");
  run->add_option("--runs-dir", runs_dir, "runs root (default $GIST_RUNS_DIR or ./runs)");

  std::string checkpoint, seeds, outdir;
  int class_idx = -1;
  auto* generate = app.add_subcommand("generate", "generate images from a checkpoint");
  generate->add_option("--checkpoint", checkpoint)->required();
  generate->add_option("--seeds", seeds, "e.g. 1,2,10-20")->required();
  generate->add_option("--class", class_idx, "class index for conditional checkpoints");
  generate->add_option("--outdir", outdir)->required();

  std::string real_path, gen_path;
  auto* fid_cmd = app.add_subcommand("fid", "FID between two dataset archives");
  fid_cmd->add_option("--real", real_path)->required();
  fid_cmd->add_option("--gen", gen_path)->required();

  std::string spec_path;
  auto* sweep = app.add_subcommand("sweep", "run a size/grid/transfer sweep");
  sweep->add_option("--spec", spec_path, "sweep job (JSON)")->required();

  std::string serve_config;
  auto* blind = app.add_subcommand("blindtest", "blind-test service");
  auto* serve = blind->add_subcommand("serve", "serve the HTTP API");
  serve->add_option("--config", serve_config)->required();
  blind->require_subcommand(1);

  int toy_n = 2000, toy_res = 32, toy_classes = 2;
  std::uint64_t toy_seed = 0;
  std::string toy_out;
  auto* toy = app.add_subcommand("toy", "write the procedural toy corpus as an archive");
  toy->add_option("--n", toy_n);
  toy->add_option("--resolution", toy_res);
  toy->add_option("--classes", toy_classes);
  toy->add_option("--seed", toy_seed);
  toy->add_option("--out", toy_out)->required();

  int grid_n = 16;
  std::int64_t grid_seed = 0;
  std::string grid_out;
  auto* grid = app.add_subcommand("grid", "inspection mosaic from a checkpoint");
  grid->add_option("--checkpoint", checkpoint)->required();
  grid->add_option("--n", grid_n);
  grid->add_option("--seed", grid_seed);
  grid->add_option("--out", grid_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = gist::pipeline::parse_config(config_path);
      if (!stages.empty()) gist::pipeline::select_stages(cfg, split_commas(stages));
      gist::pipeline::RunOptions opts;
      opts.resume = resume;
      if (!runs_dir.empty()) opts.runs_root = runs_dir;
      const auto summary = gist::pipeline::run_pipeline(cfg, opts);
      std::cout << summary.to_json().dump(2) << "\n";
      for (const auto& s : summary.stages)
        if (s.status == "failed") std::cerr << "error: " << s.error << "\n";
      return summary.success ? 0 : 1;
    }
    if (*generate) {
      const auto ckpt = gist::gan::load_checkpoint(checkpoint);
      const auto records = gist::synthesis::generate(ckpt, parse_seeds(seeds),
                                                     class_idx >= 0 ? std::optional<int>(class_idx) : std::nullopt);
      for (const auto& p : gist::synthesis::write_images(records, outdir)) std::cout << p.string() << "\n";
      return 0;
    }
    if (*fid_cmd) {
      const auto real = gist::corpus::read_dataset(real_path);
      const auto gen = gist::corpus::read_dataset(gen_path);
      const auto report = gist::fid::compute_fid(real.records, gen.records, gist::fid::desk_extractor(real.info.resolution));
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << gist::fid::to_record(report);
      return 0;
    }
    if (*sweep) {
      const auto job = gist::experiments::parse_sweep_job(spec_path);
      const auto table = gist::experiments::run_sweep_job(job);
      std::cout << gist::experiments::sweep_csv(table);
      return 0;
    }
    if (*serve) return gist::blindtest::serve(gist::blindtest::parse_serve_config(serve_config));
    if (*toy) {
      const auto records = gist::corpus::generate_toy_corpus(toy_n, toy_res, toy_classes, toy_seed);
      const auto info = gist::corpus::package_dataset(records, toy_out);
      std::cout << info.path.string() << ": " << info.n_images << " images, " << info.resolution << "px, " << info.n_classes
                << " classes\n";
      return 0;
    }
    if (*grid) {
      gist::experiments::inspection_grid(gist::gan::load_checkpoint(checkpoint), grid_n, grid_seed, grid_out);
      std::cout << grid_out << "\n";
      return 0;
    }
  } catch (const gist::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
