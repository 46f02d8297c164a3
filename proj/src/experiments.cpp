#include "gist/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gist/corpus.hpp"
#include "gist/error.hpp"
#include "gist/gan/trainer.hpp"
#include "gist/image_io.hpp"
#include "gist/synthesis.hpp"

namespace gist::experiments {

using nlohmann::json;

namespace {

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

std::string json_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) {
    std::ostringstream os;
    os << v.get<double>();
    return os.str();
  }
  return v.dump();
}

SweepRow run_one(const std::vector<ImageRecord>& subset, const std::vector<ImageRecord>& reference,
                 gan::Hyperparameters hp, const SweepSpec& spec, const std::optional<gan::TrainingCheckpoint>& resume,
                 const std::filesystem::path& run_dir) {
  hp.total_kimg = spec.budget_kimg;
  hp.snapshot_kimg = std::min(hp.snapshot_kimg, spec.budget_kimg);
  std::filesystem::remove_all(run_dir);
  gan::TrainOptions opts;
  opts.checkpoint_dir = run_dir / "checkpoints";
  opts.log_dir = run_dir;
  opts.fid_n_gen = spec.fid_n_gen;
  opts.fid_reference = reference;
  const auto final_ckpt = gan::train(subset, hp, resume, opts);

  SweepRow row;
  row.kind = spec.kind;
  row.train_seed = hp.seed;
  row.budget_kimg = spec.budget_kimg;
  row.kimg = final_ckpt.kimg_seen();
  const double start = resume ? resume->kimg_seen() : -1.0;
  for (const auto& p : final_ckpt.fid_history)
    if (p.kimg > start) row.curve.push_back(p);
  if (row.curve.empty()) throw Error(Errc::EmptyTable, "run produced no FID points");
  row.final_fid = row.curve.back().fid;
  row.converged_fid_min = row.final_fid;
  for (const auto& p : row.curve) row.converged_fid_min = std::min(row.converged_fid_min, p.fid);
  row.parent_checkpoint = final_ckpt.parent_checkpoint;
  return row;
}

SweepTable sized_runs(const std::vector<ImageRecord>& dataset, const SweepSpec& spec, const gan::Hyperparameters& hp,
                      const std::optional<gan::TrainingCheckpoint>& base, const std::filesystem::path& work_dir) {
  validate(spec);
  const int largest = spec.sizes.empty() ? 0 : spec.sizes.back();
  if (static_cast<std::size_t>(largest) > dataset.size())
    throw Error(Errc::SizeExceedsDataset, "size " + std::to_string(largest) + " exceeds dataset of " +
                                              std::to_string(dataset.size()));
  const auto order = corpus::seeded_permutation(dataset.size(), spec.seed);
  const char* prefix = spec.kind == SweepKind::Transfer ? "transfer" : "size";
  SweepTable table;
  for (int size : spec.sizes) {
    std::vector<ImageRecord> subset;
    subset.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) subset.push_back(dataset[order[static_cast<std::size_t>(i)]]);
    for (int r = 0; r < spec.repeats; ++r) {
      gan::Hyperparameters run_hp = hp;
      run_hp.seed = hp.seed + static_cast<std::uint64_t>(r);
      const std::string id = fmt("%s-%06d-r%d", prefix, size, r);
      SweepRow row = run_one(subset, dataset, run_hp, spec, base, work_dir / id);
      row.run_id = id;
      row.point = "size=" + std::to_string(size);
      row.repeat = r;
      table.push_back(std::move(row));
    }
  }
  return table;
}

}  // namespace

std::string to_string(SweepKind k) {
  switch (k) {
    case SweepKind::Size: return "size";
    case SweepKind::Grid: return "grid";
    case SweepKind::Transfer: return "transfer";
  }
  return "?";
}

void validate(const SweepSpec& spec) {
  if (spec.budget_kimg <= 0) throw Error(Errc::InvalidArgument, "budget_kimg must be positive");
  if (spec.repeats < 1) throw Error(Errc::InvalidArgument, "repeats must be >= 1");
  if (spec.kind == SweepKind::Grid) {
    const auto& names = gan::hyperparameter_names();
    for (const auto& [key, values] : spec.grid) {
      if (std::find(names.begin(), names.end(), key) == names.end())
        throw Error(Errc::UnknownHyperparameter, "'" + key + "' is not a hyperparameter");
      if (values.empty()) throw Error(Errc::InvalidArgument, "grid values for '" + key + "' are empty");
    }
    return;
  }
  if (spec.sizes.empty()) throw Error(Errc::InvalidArgument, "sizes must be nonempty");
  for (std::size_t i = 0; i < spec.sizes.size(); ++i) {
    if (spec.sizes[i] < 1) throw Error(Errc::InvalidArgument, "sizes must be positive");
    if (i > 0 && spec.sizes[i] <= spec.sizes[i - 1]) throw Error(Errc::InvalidArgument, "sizes must be strictly increasing");
  }
}

SweepTable size_sweep(const std::vector<ImageRecord>& dataset, const SweepSpec& spec, const gan::Hyperparameters& hp,
                      const std::filesystem::path& work_dir) {
  SweepSpec s = spec;
  s.kind = SweepKind::Size;
  return sized_runs(dataset, s, hp, std::nullopt, work_dir);
}

SweepTable transfer_sweep(const gan::TrainingCheckpoint& base, const std::vector<ImageRecord>& dataset,
                          const SweepSpec& spec, const gan::Hyperparameters& hp, const std::filesystem::path& work_dir) {
  if (!dataset.empty() && dataset.front().image.height != base.resolution())
    throw Error(Errc::ResolutionMismatch, "base checkpoint resolution differs from the dataset");
  SweepSpec s = spec;
  s.kind = SweepKind::Transfer;
  return sized_runs(dataset, s, hp, base, work_dir);
}

std::vector<std::map<std::string, json>> grid_points(const std::map<std::string, std::vector<json>>& grid) {
  std::vector<std::map<std::string, json>> points{{}};
  for (const auto& [key, values] : grid) {
    std::vector<std::map<std::string, json>> next;
    for (const auto& p : points)
      for (const auto& v : values) {
        auto q = p;
        q[key] = v;
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  return points;
}

SweepTable grid_sweep(const std::vector<ImageRecord>& dataset, const SweepSpec& spec, const gan::Hyperparameters& base_hp,
                      const std::filesystem::path& work_dir) {
  SweepSpec s = spec;
  s.kind = SweepKind::Grid;
  validate(s);
  if (dataset.empty()) throw Error(Errc::EmptyDataset, "grid sweep needs a dataset");
  const auto points = grid_points(s.grid);
  std::vector<gan::Hyperparameters> settings;
  for (const auto& p : points) {
    gan::Hyperparameters hp = base_hp;
    for (const auto& [key, value] : p) gan::set_hyperparameter(hp, key, value);
    hp.total_kimg = s.budget_kimg;
    hp.snapshot_kimg = std::min(hp.snapshot_kimg, s.budget_kimg);
    gan::validate(hp);
    settings.push_back(hp);
  }
  SweepTable table;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::string label;
    for (const auto& [key, value] : points[i]) label += (label.empty() ? "" : ";") + key + "=" + json_scalar(value);
    for (int r = 0; r < s.repeats; ++r) {
      gan::Hyperparameters hp = settings[i];
      hp.seed = settings[i].seed + static_cast<std::uint64_t>(r);
      const std::string id = fmt("grid-%03zu-r%d", i, r);
      SweepRow row = run_one(dataset, dataset, hp, s, std::nullopt, work_dir / id);
      row.run_id = id;
      row.point = label.empty() ? "base" : label;
      row.repeat = r;
      table.push_back(std::move(row));
    }
  }
  return table;
}

std::string sweep_csv(const SweepTable& table) {
  std::map<std::string, std::vector<double>> by_point;
  for (const auto& r : table) by_point[r.point].push_back(r.converged_fid_min);
  std::string out =
      "run_id,kind,point,repeat,train_seed,budget_kimg,kimg,converged_fid_min,final_fid,point_mean_fid_min,"
      "point_std_fid_min,parent_checkpoint\n";
  for (const auto& r : table) {
    const auto& v = by_point[r.point];
    double mean = 0.0, var = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    out += fmt("%s,%s,%s,%d,%llu,%g,%.3f,%.6f,%.6f,%.6f,%.6f,", r.run_id.c_str(), to_string(r.kind).c_str(),
               r.point.c_str(), r.repeat, static_cast<unsigned long long>(r.train_seed), r.budget_kimg, r.kimg,
               r.converged_fid_min, r.final_fid, mean, sd);
    out += r.parent_checkpoint.value_or("") + "\n";
  }
  return out;
}

std::string curve_csv(const SweepRow& row) {
  std::string out = "kimg,fid\n";
  for (const auto& p : row.curve) out += fmt("%.3f,%.6f\n", p.kimg, p.fid);
  return out;
}

namespace {

std::string render_svg(const SweepTable& table) {
  const double w = 640, h = 400, left = 60, right = 160, top = 20, bottom = 40;
  double kmin = 1e300, kmax = -1e300, fmax = 0;
  for (const auto& r : table)
    for (const auto& p : r.curve) {
      kmin = std::min(kmin, p.kimg);
      kmax = std::max(kmax, p.kimg);
      fmax = std::max(fmax, p.fid);
    }
  if (kmax <= kmin) kmax = kmin + 1;
  if (fmax <= 0) fmax = 1;
  auto sx = [&](double k) { return left + (k - kmin) / (kmax - kmin) * (w - left - right); };
  auto sy = [&](double f) { return top + (1.0 - f / fmax) * (h - top - bottom); };
  static const char* colours[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::string s = fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" font-family=\"sans-serif\" "
                      "font-size=\"11\">\n",
                      w, h);
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += fmt("<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", left, h - bottom, w - right, h - bottom);
  s += fmt("<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", left, top, left, h - bottom);
  s += fmt("<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">kimg</text>\n", (left + w - right) / 2, h - 8);
  s += fmt("<text x=\"14\" y=\"%g\" transform=\"rotate(-90 14 %g)\" text-anchor=\"middle\">FID</text>\n", (top + h - bottom) / 2,
           (top + h - bottom) / 2);
  s += fmt("<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%g</text>\n", left, h - bottom + 14, kmin);
  s += fmt("<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%g</text>\n", w - right, h - bottom + 14, kmax);
  s += fmt("<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.3g</text>\n", left - 4, top + 4, fmax);
  s += fmt("<text x=\"%g\" y=\"%g\" text-anchor=\"end\">0</text>\n", left - 4, h - bottom);
  for (std::size_t i = 0; i < table.size(); ++i) {
    const char* c = colours[i % 8];
    std::string pts;
    for (const auto& p : table[i].curve) pts += fmt("%.2f,%.2f ", sx(p.kimg), sy(p.fid));
    s += fmt("<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\" points=\"%s\"/>\n", c, pts.c_str());
    const double ly = top + 14.0 * static_cast<double>(i);
    s += fmt("<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\" stroke-width=\"2\"/>\n", w - right + 8, ly, w - right + 24,
             ly, c);
    s += fmt("<text x=\"%g\" y=\"%g\">%s</text>\n", w - right + 28, ly + 4, table[i].run_id.c_str());
  }
  return s + "</svg>\n";
}

}  // namespace

ReportFiles emit_report(const SweepTable& table, const std::filesystem::path& out_dir, bool plot) {
  if (table.empty()) throw Error(Errc::EmptyTable, "sweep table is empty");
  std::filesystem::create_directories(out_dir / "curves");
  ReportFiles files;
  files.sweep_csv = out_dir / "sweep.csv";
  io::write_text_atomic(files.sweep_csv, sweep_csv(table));
  for (const auto& r : table) {
    auto p = out_dir / "curves" / (r.run_id + ".csv");
    io::write_text_atomic(p, curve_csv(r));
    files.curves.push_back(std::move(p));
  }
  if (plot) {
    files.plot = out_dir / "fid_curves.svg";
    io::write_text_atomic(*files.plot, render_svg(table));
  }
  return files;
}

Image inspection_grid(const gan::TrainingCheckpoint& ckpt, int n, std::int64_t seed, const std::filesystem::path& out_path) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(std::max(n, 0)))));
  if (n < 1 || side * side != n) throw Error(Errc::NotPerfectSquare, std::to_string(n) + " is not a perfect square");
  if (n > 64) throw Error(Errc::InvalidArgument, "inspection grids hold at most 64 images");
  auto gen = gan::restore_generator(ckpt);
  const int res = ckpt.resolution();
  const int k = ckpt.n_classes();
  Image mosaic(side * res, side * res);
  for (int i = 0; i < n; ++i) {
    const auto cls = k > 0 ? std::optional<int>(i % k) : std::nullopt;
    const auto img = synthesis::generate(gen, {seed + i}, cls).front().image;
    const int oy = (i / side) * res, ox = (i % side) * res;
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x) mosaic.at(oy + y, ox + x) = img.at(y, x);
  }
  if (!out_path.empty()) {
    if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
    io::save_png(mosaic, out_path);
  }
  return mosaic;
}

SweepJob sweep_job_from_json(const json& j) {
  static const std::set<std::string> known{"kind",    "sizes",      "grid",    "base_checkpoint", "budget_kimg",
                                           "seed",    "repeats",    "fid_n_gen", "hyperparameters", "dataset",
                                           "toy",     "out_dir",    "plot"};
  if (!j.is_object()) throw Error(Errc::ParseError, "sweep job must be an object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw Error(Errc::UnknownKey, "unknown sweep key '" + key + "'");
  SweepJob job;
  try {
    const std::string kind = j.value("kind", std::string("size"));
    if (kind == "size")
      job.spec.kind = SweepKind::Size;
    else if (kind == "grid")
      job.spec.kind = SweepKind::Grid;
    else if (kind == "transfer")
      job.spec.kind = SweepKind::Transfer;
    else
      throw Error(Errc::ParseError, "unknown sweep kind '" + kind + "'");
    if (j.contains("sizes")) job.spec.sizes = j.at("sizes").get<std::vector<int>>();
    if (j.contains("grid"))
      for (const auto& [key, values] : j.at("grid").items()) {
        if (!values.is_array()) throw Error(Errc::ParseError, "grid values for '" + key + "' must be a list");
        job.spec.grid[key] = values.get<std::vector<json>>();
      }
    if (j.contains("base_checkpoint")) job.spec.base_checkpoint = j.at("base_checkpoint").get<std::string>();
    job.spec.budget_kimg = j.value("budget_kimg", job.spec.budget_kimg);
    job.spec.seed = j.value("seed", job.spec.seed);
    job.spec.repeats = j.value("repeats", job.spec.repeats);
    job.spec.fid_n_gen = j.value("fid_n_gen", job.spec.fid_n_gen);
    if (j.contains("hyperparameters")) job.hyperparameters = gan::hyperparameters_from_json(j.at("hyperparameters"));
    if (j.contains("dataset")) job.dataset = j.at("dataset").get<std::string>();
    if (j.contains("toy")) {
      static const std::set<std::string> toy_keys{"images", "resolution", "classes", "seed"};
      const auto& t = j.at("toy");
      for (const auto& [key, _] : t.items())
        if (!toy_keys.count(key)) throw Error(Errc::UnknownKey, "unknown toy key '" + key + "'");
      job.toy_images = t.value("images", job.toy_images);
      job.toy_resolution = t.value("resolution", job.toy_resolution);
      job.toy_classes = t.value("classes", job.toy_classes);
      job.toy_seed = t.value("seed", job.toy_seed);
    }
    if (j.contains("out_dir")) job.out_dir = j.at("out_dir").get<std::string>();
    job.plot = j.value("plot", job.plot);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  if (job.spec.kind == SweepKind::Transfer && !job.spec.base_checkpoint)
    throw Error(Errc::InvalidArgument, "transfer sweeps need base_checkpoint");
  validate(job.spec);
  return job;
}

SweepJob parse_sweep_job(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  return sweep_job_from_json(j);
}

SweepTable run_sweep_job(const SweepJob& job) {
  const std::vector<ImageRecord> data =
      job.dataset ? corpus::read_dataset(*job.dataset).records
                  : corpus::generate_toy_corpus(job.toy_images, job.toy_resolution, job.toy_classes, job.toy_seed);
  const auto runs_dir = job.out_dir / "runs";
  SweepTable table;
  switch (job.spec.kind) {
    case SweepKind::Size: table = size_sweep(data, job.spec, job.hyperparameters, runs_dir); break;
    case SweepKind::Grid: table = grid_sweep(data, job.spec, job.hyperparameters, runs_dir); break;
    case SweepKind::Transfer:
      table = transfer_sweep(gan::load_checkpoint(*job.spec.base_checkpoint), data, job.spec, job.hyperparameters, runs_dir);
      break;
  }
  emit_report(table, job.out_dir, job.plot);
  return table;
}

}  // namespace gist::experiments
