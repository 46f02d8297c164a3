#include "gist/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "gist/error.hpp"
#include "gist/experiments.hpp"
#include "gist/fid.hpp"
#include "gist/gan/trainer.hpp"
#include "gist/image_io.hpp"
#include "gist/synthesis.hpp"

namespace gist::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(Errc::ParseError, where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw Error(Errc::UnknownKey, "unknown key '" + key + "' in " + where);
}

std::optional<fs::path> opt_path(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return fs::path(j.at(key).get<std::string>());
}

downstream::ClassifierSpec classifier_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "logreg" || s == "logreg-desk") return downstream::logistic_spec();
    if (s == "convnet" || s == "convnet2") return downstream::convnet_spec();
    if (s.rfind("constant:", 0) == 0) return downstream::constant_spec(std::stoi(s.substr(9)));
    throw Error(Errc::ParseError, "unknown classifier '" + s + "'");
  }
  check_keys(j, {"kind", "name", "epochs", "learning_rate", "l2", "batch_size", "constant_class"}, "classifier");
  const auto kind = j.value("kind", std::string("logreg"));
  downstream::ClassifierSpec spec;
  if (kind == "logreg")
    spec = downstream::logistic_spec();
  else if (kind == "convnet")
    spec = downstream::convnet_spec();
  else if (kind == "constant")
    spec = downstream::constant_spec(j.value("constant_class", 0));
  else
    throw Error(Errc::ParseError, "unknown classifier kind '" + kind + "'");
  spec.name = j.value("name", spec.name);
  spec.epochs = j.value("epochs", spec.epochs);
  spec.learning_rate = j.value("learning_rate", spec.learning_rate);
  spec.l2 = j.value("l2", spec.l2);
  spec.batch_size = j.value("batch_size", spec.batch_size);
  return spec;
}

json read_json(const fs::path& path) {
  const auto bytes = io::read_file(path);
  return json::parse(bytes.begin(), bytes.end());
}

// Resolved locations flowing between stages.
struct Context {
  std::optional<fs::path> train_archive, test_archive, checkpoint, synthetic_archive;
  std::optional<double> last_training_fid;
  std::optional<double> eval_fid;
};

struct StageDirs {
  fs::path root, dataset, checkpoints, samples, eval, logs;
};

fs::path manifest_path(const StageDirs& d, Stage s) {
  switch (s) {
    case Stage::Preprocess: return d.dataset / "manifest.json";
    case Stage::Train: return d.checkpoints / "manifest.json";
    case Stage::Generate: return d.samples / "manifest.json";
    case Stage::Evaluate: return d.eval / "manifest.json";
  }
  return {};
}

void write_manifest(const StageDirs& d, Stage s, const std::map<std::string, std::string>& outputs, const json& extra) {
  json j{{"stage", to_string(s)}, {"complete", true}, {"outputs", outputs}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  io::write_text_atomic(manifest_path(d, s), j.dump(2) + "\n");
}

// A complete manifest whose outputs all exist, or nullopt.
std::optional<json> complete_manifest(const StageDirs& d, Stage s) {
  const auto p = manifest_path(d, s);
  if (!fs::exists(p)) return std::nullopt;
  try {
    json j = read_json(p);
    if (!j.value("complete", false)) return std::nullopt;
    for (const auto& [_, v] : j.at("outputs").items())
      if (!fs::exists(v.get<std::string>())) return std::nullopt;
    return j;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void absorb(Context& ctx, Stage s, const json& manifest) {
  const auto& out = manifest.at("outputs");
  auto get = [&](const char* key) -> std::optional<fs::path> {
    if (out.contains(key)) return fs::path(out.at(key).get<std::string>());
    return std::nullopt;
  };
  switch (s) {
    case Stage::Preprocess:
      ctx.train_archive = get("train_archive");
      ctx.test_archive = get("test_archive");
      break;
    case Stage::Train:
      ctx.checkpoint = get("checkpoint");
      if (manifest.contains("final_fid")) ctx.last_training_fid = manifest.at("final_fid").get<double>();
      break;
    case Stage::Generate: ctx.synthetic_archive = get("synthetic_archive"); break;
    case Stage::Evaluate:
      if (manifest.contains("fid")) ctx.eval_fid = manifest.at("fid").get<double>();
      break;
  }
}

std::string abs_str(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

std::map<std::string, std::string> run_preprocess(const PipelineConfig& cfg, const StageDirs& d, json& extra) {
  std::vector<ImageRecord> records;
  const auto& src = cfg.dataset;
  if (src.directory)
    records = corpus::ingest_directory(*src.directory);
  else if (src.archive)
    records = corpus::read_dataset(*src.archive).records;
  else
    records = corpus::generate_toy_corpus(src.toy->images, src.toy->resolution, src.toy->classes, src.toy->seed);
  records = corpus::preprocess(records, cfg.preprocess.square_mode, cfg.preprocess.resolution);
  if (!cfg.preprocess.classes.empty()) records = corpus::filter_by_labels(records, cfg.preprocess.classes);
  const auto split = corpus::split_dataset(records, cfg.preprocess.split);

  fs::remove_all(d.dataset);
  fs::create_directories(d.dataset);
  const auto full = corpus::package_dataset(records, d.dataset / "dataset.zip");
  corpus::package_dataset(split.train, d.dataset / "train.zip");
  corpus::package_dataset(split.test, d.dataset / "test.zip");
  extra = {{"n_images", full.n_images},
           {"n_train", split.train.size()},
           {"n_test", split.test.size()},
           {"n_classes", full.n_classes},
           {"resolution", full.resolution}};
  return {{"dataset_archive", abs_str(d.dataset / "dataset.zip")},
          {"train_archive", abs_str(d.dataset / "train.zip")},
          {"test_archive", abs_str(d.dataset / "test.zip")}};
}

std::map<std::string, std::string> run_train(const PipelineConfig& cfg, const Context& ctx, const StageDirs& d, json& extra) {
  const auto train = corpus::read_dataset(*ctx.train_archive);
  std::optional<gan::TrainingCheckpoint> parent;
  if (cfg.train.resume_from) parent = gan::load_checkpoint(*cfg.train.resume_from);
  fs::remove_all(d.checkpoints);
  fs::remove_all(d.logs);
  gan::TrainOptions opts;
  opts.checkpoint_dir = d.checkpoints;
  opts.log_dir = d.logs;
  opts.fid_n_gen = cfg.train.fid_n_gen;
  const auto final_ckpt = gan::train(train.records, cfg.hyperparameters, parent, opts);
  const auto final_path = d.checkpoints / "final.ckpt";
  gan::save_checkpoint(final_ckpt, final_path);
  extra = {{"kimg", final_ckpt.kimg_seen()}, {"snapshots", final_ckpt.fid_history.size()}};
  if (!final_ckpt.fid_history.empty()) extra["final_fid"] = final_ckpt.fid_history.back().fid;
  return {{"checkpoint", abs_str(final_path)},
          {"metrics_csv", abs_str(d.logs / "metrics.csv")},
          {"fid_csv", abs_str(d.logs / "fid.csv")}};
}

std::map<std::string, std::string> run_generate(const PipelineConfig& cfg, const Context& ctx, const StageDirs& d, json& extra) {
  const auto ckpt = gan::load_checkpoint(*ctx.checkpoint);
  fs::remove_all(d.samples);
  fs::create_directories(d.samples);
  const auto archive = synthesis::emit_synthetic_dataset(ckpt, cfg.generate.n_per_class, cfg.generate.seed,
                                                         d.samples / "synthetic.zip");
  std::map<std::string, std::string> out{{"synthetic_archive", abs_str(archive.path)}};
  if (cfg.generate.grid > 0) {
    experiments::inspection_grid(ckpt, cfg.generate.grid, cfg.generate.seed, d.samples / "grid.png");
    out["inspection_grid"] = abs_str(d.samples / "grid.png");
  }
  extra = {{"n_images", archive.n_images}, {"n_classes", archive.n_classes}};
  return out;
}

std::map<std::string, std::string> run_evaluate(const PipelineConfig& cfg, const Context& ctx, const StageDirs& d, json& extra) {
  fs::remove_all(d.eval);
  fs::create_directories(d.eval);
  const auto train = corpus::read_dataset(*ctx.train_archive).records;
  const auto test = corpus::read_dataset(*ctx.test_archive).records;
  std::optional<std::vector<ImageRecord>> synth;
  if (ctx.synthetic_archive) synth = corpus::read_dataset(*ctx.synthetic_archive).records;

  // FID of fid_n_gen fresh samples when a checkpoint is at hand, otherwise of
  // the synthetic archive; the reference is always the real training set.
  const auto extractor = fid::desk_extractor();
  std::vector<Image> gen_images;
  if (ctx.checkpoint) {
    auto gen = gan::restore_generator(gan::load_checkpoint(*ctx.checkpoint));
    gen_images = gan::sample_images(gen, cfg.evaluate.fid_n_gen, static_cast<std::uint64_t>(cfg.evaluate.fid_seed));
  } else {
    gen_images = fid::images_of(*synth);
  }
  const auto report = fid::compute_fid(fid::images_of(train), gen_images, extractor);
  io::write_text_atomic(d.eval / "fid.txt", fid::to_record(report));
  extra = {{"fid", report.fid}};

  std::map<std::string, std::string> out{{"fid_record", abs_str(d.eval / "fid.txt")}};
  if (!cfg.evaluate.classifiers.empty() && !cfg.evaluate.regimes.empty()) {
    const auto reports = downstream::run_protocol(train, test, synth ? &*synth : nullptr, cfg.evaluate.classifiers,
                                                  cfg.evaluate.seed, cfg.evaluate.regimes);
    downstream::write_protocol_csv(reports, d.eval / "gan_train_test.csv");
    json rows = json::array();
    for (const auto& r : reports) {
      json conf = json::array();
      for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) row.push_back(r.confusion(i, j));
        conf.push_back(row);
      }
      rows.push_back({{"classifier", r.classifier_name},
                      {"regime", downstream::to_string(r.regime)},
                      {"accuracy", r.accuracy},
                      {"precision", r.precision},
                      {"recall", r.recall},
                      {"f1", r.f1},
                      {"confusion", conf},
                      {"n_train", r.n_train},
                      {"n_eval", r.n_eval}});
    }
    io::write_text_atomic(d.eval / "reports.json", rows.dump(2) + "\n");
    out["gan_train_test_csv"] = abs_str(d.eval / "gan_train_test.csv");
    out["reports_json"] = abs_str(d.eval / "reports.json");
  }
  return out;
}

}  // namespace

std::string to_string(Stage s) {
  switch (s) {
    case Stage::Preprocess: return "preprocess";
    case Stage::Train: return "train";
    case Stage::Generate: return "generate";
    case Stage::Evaluate: return "evaluate";
  }
  return "?";
}

Stage stage_from_string(const std::string& s) {
  for (Stage st : kStageOrder)
    if (to_string(st) == s) return st;
  throw Error(Errc::InvalidStageSet, "unknown stage '" + s + "'");
}

bool PipelineConfig::selected(Stage s) const { return std::find(stages.begin(), stages.end(), s) != stages.end(); }

void select_stages(PipelineConfig& cfg, const std::vector<std::string>& names) {
  std::set<Stage> chosen;
  for (const auto& n : names)
    if (!chosen.insert(stage_from_string(n)).second) throw Error(Errc::InvalidStageSet, "stage '" + n + "' listed twice");
  cfg.stages.clear();
  for (Stage s : kStageOrder)
    if (chosen.count(s)) cfg.stages.push_back(s);
  validate(cfg);
}

void validate(const PipelineConfig& cfg) {
  if (cfg.stages.empty()) throw Error(Errc::InvalidStageSet, "no stages selected");
  if (cfg.run_name.empty() || cfg.run_name.find('/') != std::string::npos || cfg.run_name == "." || cfg.run_name == "..")
    throw Error(Errc::InvalidArgument, "run_name must be a plain directory name");
  const bool pre = cfg.selected(Stage::Preprocess), train = cfg.selected(Stage::Train);
  const bool gen = cfg.selected(Stage::Generate), eval = cfg.selected(Stage::Evaluate);
  if (pre) {
    const int sources = cfg.dataset.directory.has_value() + cfg.dataset.archive.has_value() + cfg.dataset.toy.has_value();
    if (sources != 1) throw Error(Errc::InvalidStageSet, "preprocess needs exactly one dataset source (directory, archive or toy)");
  }
  if (train && !pre && !cfg.inputs.train_archive)
    throw Error(Errc::InvalidStageSet, "train needs the preprocess stage or inputs.train_archive");
  if (gen && !train && !cfg.inputs.checkpoint)
    throw Error(Errc::InvalidStageSet, "generate needs the train stage or inputs.checkpoint");
  if (eval) {
    if (!pre && !(cfg.inputs.train_archive && cfg.inputs.test_archive))
      throw Error(Errc::InvalidStageSet, "evaluate needs the preprocess stage or inputs.train_archive and inputs.test_archive");
    const bool has_synth = gen || cfg.inputs.synthetic_archive;
    const bool has_ckpt = train || cfg.inputs.checkpoint;
    const bool needs_synth = std::any_of(cfg.evaluate.regimes.begin(), cfg.evaluate.regimes.end(),
                                         [](downstream::Regime r) { return r != downstream::Regime::Base; });
    if (needs_synth && !cfg.evaluate.classifiers.empty() && !has_synth)
      throw Error(Errc::InvalidStageSet, "gan_train/gan_test need the generate stage or inputs.synthetic_archive");
    if (!has_synth && !has_ckpt)
      throw Error(Errc::InvalidStageSet, "evaluate needs a checkpoint or a synthetic archive for FID");
  }
  gan::validate(cfg.hyperparameters);
  if (cfg.train.fid_n_gen < 2 || cfg.evaluate.fid_n_gen < 2) throw Error(Errc::InvalidArgument, "fid_n_gen must be >= 2");
  if (cfg.generate.n_per_class < 1) throw Error(Errc::InvalidArgument, "n_per_class must be >= 1");
}

PipelineConfig config_from_json(const json& j) {
  check_keys(j, {"run_name", "stages", "dataset", "preprocess", "hyperparameters", "train", "generate", "evaluate", "inputs"},
             "config");
  PipelineConfig cfg;
  try {
    cfg.run_name = j.value("run_name", cfg.run_name);
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      check_keys(d, {"directory", "archive", "toy"}, "dataset");
      cfg.dataset.directory = opt_path(d, "directory");
      cfg.dataset.archive = opt_path(d, "archive");
      if (d.contains("toy") && !d.at("toy").is_null()) {
        const auto& t = d.at("toy");
        check_keys(t, {"images", "resolution", "classes", "seed"}, "dataset.toy");
        ToySource toy;
        toy.images = t.value("images", toy.images);
        toy.resolution = t.value("resolution", toy.resolution);
        toy.classes = t.value("classes", toy.classes);
        toy.seed = t.value("seed", toy.seed);
        cfg.dataset.toy = toy;
      }
    }
    if (j.contains("preprocess")) {
      const auto& p = j.at("preprocess");
      check_keys(p, {"square_mode", "resolution", "split", "classes"}, "preprocess");
      const auto mode = p.value("square_mode", std::string("pad"));
      if (mode == "pad")
        cfg.preprocess.square_mode = corpus::SquareMode::PadToMax;
      else if (mode == "crop")
        cfg.preprocess.square_mode = corpus::SquareMode::CropToMin;
      else
        throw Error(Errc::ParseError, "square_mode must be pad or crop");
      cfg.preprocess.resolution = p.value("resolution", cfg.preprocess.resolution);
      if (p.contains("split")) {
        const auto& s = p.at("split");
        check_keys(s, {"test_fraction", "seed"}, "preprocess.split");
        cfg.preprocess.split.test_fraction = s.value("test_fraction", cfg.preprocess.split.test_fraction);
        cfg.preprocess.split.seed = s.value("seed", cfg.preprocess.split.seed);
      }
      if (p.contains("classes")) cfg.preprocess.classes = p.at("classes").get<std::vector<int>>();
    }
    if (j.contains("hyperparameters")) cfg.hyperparameters = gan::hyperparameters_from_json(j.at("hyperparameters"));
    if (j.contains("train")) {
      const auto& t = j.at("train");
      check_keys(t, {"fid_n_gen", "resume_from"}, "train");
      cfg.train.fid_n_gen = t.value("fid_n_gen", cfg.train.fid_n_gen);
      cfg.train.resume_from = opt_path(t, "resume_from");
    }
    if (j.contains("generate")) {
      const auto& g = j.at("generate");
      check_keys(g, {"n_per_class", "seed", "grid"}, "generate");
      cfg.generate.n_per_class = g.value("n_per_class", cfg.generate.n_per_class);
      cfg.generate.seed = g.value("seed", cfg.generate.seed);
      cfg.generate.grid = g.value("grid", cfg.generate.grid);
    }
    if (j.contains("evaluate")) {
      const auto& e = j.at("evaluate");
      check_keys(e, {"fid_n_gen", "fid_seed", "classifiers", "regimes", "seed"}, "evaluate");
      cfg.evaluate.fid_n_gen = e.value("fid_n_gen", cfg.evaluate.fid_n_gen);
      cfg.evaluate.fid_seed = e.value("fid_seed", cfg.evaluate.fid_seed);
      cfg.evaluate.seed = e.value("seed", cfg.evaluate.seed);
      if (e.contains("classifiers")) {
        cfg.evaluate.classifiers.clear();
        for (const auto& c : e.at("classifiers")) cfg.evaluate.classifiers.push_back(classifier_from_json(c));
      }
      if (e.contains("regimes")) {
        cfg.evaluate.regimes.clear();
        for (const auto& r : e.at("regimes")) {
          try {
            cfg.evaluate.regimes.push_back(downstream::regime_from_string(r.get<std::string>()));
          } catch (const Error& err) {
            throw Error(Errc::ParseError, err.what());
          }
        }
      }
    }
    if (j.contains("inputs")) {
      const auto& in = j.at("inputs");
      check_keys(in, {"train_archive", "test_archive", "checkpoint", "synthetic_archive"}, "inputs");
      cfg.inputs.train_archive = opt_path(in, "train_archive");
      cfg.inputs.test_archive = opt_path(in, "test_archive");
      cfg.inputs.checkpoint = opt_path(in, "checkpoint");
      cfg.inputs.synthetic_archive = opt_path(in, "synthetic_archive");
    }
    std::vector<std::string> names;
    if (j.contains("stages"))
      names = j.at("stages").get<std::vector<std::string>>();
    else
      names = {"preprocess", "train", "generate", "evaluate"};
    select_stages(cfg, names);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  return cfg;
}

PipelineConfig parse_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(Errc::Io, path.string() + " does not exist");
  json j;
  try {
    j = read_json(path);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

json RunSummary::to_json() const {
  json stages_json = json::array();
  for (const auto& s : stages) {
    json e{{"stage", pipeline::to_string(s.stage)}, {"status", s.status}, {"outputs", s.outputs}};
    if (!s.error.empty()) e["error"] = s.error;
    stages_json.push_back(e);
  }
  json j{{"run_dir", run_dir.string()}, {"success", success}, {"stages", stages_json}};
  j["final_fid"] = final_fid ? json(*final_fid) : json(nullptr);
  return j;
}

fs::path runs_root(const RunOptions& opts) {
  if (opts.runs_root) return *opts.runs_root;
  if (const char* env = std::getenv("GIST_RUNS_DIR"); env && *env) return env;
  return "runs";
}

RunSummary run_pipeline(const PipelineConfig& cfg, const RunOptions& opts) {
  validate(cfg);
  const fs::path run_dir = fs::absolute(runs_root(opts) / cfg.run_name);
  const StageDirs d{run_dir, run_dir / "dataset", run_dir / "checkpoints", run_dir / "samples", run_dir / "eval", run_dir / "logs"};
  fs::create_directories(run_dir);

  Context ctx;
  ctx.train_archive = cfg.inputs.train_archive;
  ctx.test_archive = cfg.inputs.test_archive;
  ctx.checkpoint = cfg.inputs.checkpoint;
  ctx.synthetic_archive = cfg.inputs.synthetic_archive;

  RunSummary summary;
  summary.run_dir = run_dir;
  bool failed = false;
  for (Stage s : cfg.stages) {
    StageStatus st{s, "not_run", {}, {}};
    if (failed) {
      summary.stages.push_back(st);
      continue;
    }
    if (opts.resume) {
      if (auto m = complete_manifest(d, s)) {
        absorb(ctx, s, *m);
        st.status = "skipped";
        for (const auto& [k, v] : m->at("outputs").items()) st.outputs[k] = v.get<std::string>();
        summary.stages.push_back(st);
        continue;
      }
    }
    try {
      json extra = json::object();
      switch (s) {
        case Stage::Preprocess: st.outputs = run_preprocess(cfg, d, extra); break;
        case Stage::Train: st.outputs = run_train(cfg, ctx, d, extra); break;
        case Stage::Generate: st.outputs = run_generate(cfg, ctx, d, extra); break;
        case Stage::Evaluate: st.outputs = run_evaluate(cfg, ctx, d, extra); break;
      }
      write_manifest(d, s, st.outputs, extra);
      json m{{"outputs", st.outputs}};
      for (const auto& [k, v] : extra.items()) m[k] = v;
      absorb(ctx, s, m);
      st.status = "ok";
    } catch (const std::exception& e) {
      st.status = "failed";
      st.error = to_string(s) + ": " + e.what();
      failed = true;
    }
    summary.stages.push_back(st);
  }
  summary.success = !failed;
  if (ctx.eval_fid)
    summary.final_fid = ctx.eval_fid;
  else
    summary.final_fid = ctx.last_training_fid;
  io::write_text_atomic(run_dir / "manifest.json", summary.to_json().dump(2) + "\n");
  return summary;
}

}  // namespace gist::pipeline
