#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "shapeinv/checkpoint.hpp"
#include "shapeinv/cli.hpp"
#include "shapeinv/degradation.hpp"
#include "shapeinv/gradsuite.hpp"
#include "shapeinv/inversion.hpp"
#include "shapeinv/io.hpp"
#include "shapeinv/metrics.hpp"
#include "shapeinv/sampling.hpp"
#include "shapeinv/shapes.hpp"
#include "shapeinv/trainer.hpp"

namespace fs = std::filesystem;

namespace shapeinv::cli {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::BadArgument:
    case ErrorCode::KTooLarge:
    case ErrorCode::CountTooLarge:
    case ErrorCode::BadStart:
    case ErrorCode::NonPositiveEpsilon:
      return kUsage;
    case ErrorCode::ParseError:
    case ErrorCode::EmptyCloud:
    case ErrorCode::NonFinite:
    case ErrorCode::CloudTooSmall:
    case ErrorCode::SizeMismatch:
    case ErrorCode::ShapeMismatch:
      return kBadInput;
    case ErrorCode::CheckpointError:
    case ErrorCode::ArchMismatch:
      return kBadCheckpoint;
    case ErrorCode::Diverged:
      return kDiverged;
    case ErrorCode::NoCandidates:
    case ErrorCode::EmptyMask:
      return kNoCandidates;
    case ErrorCode::IoError:
      return kIo;
  }
  return kFailure;
}

namespace {

void write_json(const fs::path& path, const Json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

std::string required(const Json& cfg, const std::string& key) {
  std::string v = get_string(cfg, key);
  if (v.empty()) throw Error(ErrorCode::ConfigError, "'" + key + "' is required");
  return v;
}

// Empty "checkpoint" falls back to the environment's checkpoint directory;
// the resolved path is written back so it lands in config.json.
fs::path checkpoint_path(Json& cfg) {
  std::string p = get_string(cfg, "checkpoint");
  if (p.empty()) {
    const char* dir = std::getenv(kCheckpointDirEnv);
    if (dir == nullptr || *dir == '\0') {
      throw Error(ErrorCode::ConfigError,
                  std::string("no --checkpoint given and ") + kCheckpointDirEnv + " is unset");
    }
    p = (fs::path(dir) / kCheckpointFile).string();
    cfg["checkpoint"] = p;
  }
  return p;
}

template <class Fn>
void run_jobs(std::size_t n, std::size_t jobs, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t extra = std::min(std::max<std::size_t>(jobs, 1), n);
    for (std::size_t t = 1; t < extra; ++t) pool.emplace_back(worker);
    worker();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<fs::path> cloud_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".xyz" || ext == ".ply")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// A directory written by `complete` stands for its completed cloud.
fs::path cloud_in(const fs::path& p) {
  return fs::is_directory(p) ? p / "completed.xyz" : p;
}

fs::path result_in(const fs::path& p) {
  return fs::is_directory(p) ? p / "result.sinv" : p;
}

Vec read_latent(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<double> v;
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::getline(in, tok);
      continue;
    }
    char* end = nullptr;
    const double x = std::strtod(tok.c_str(), &end);
    if (*end != '\0') throw Error(ErrorCode::ParseError, path.string() + ": bad number '" + tok + "'");
    v.push_back(x);
  }
  if (v.empty()) throw Error(ErrorCode::ParseError, path.string() + ": no values");
  return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string stop_name(StopReason s) {
  switch (s) {
    case StopReason::Completed: return "completed";
    case StopReason::Diverged: return "diverged";
    case StopReason::EmptyMask: return "empty_mask";
  }
  return "unknown";
}

Json breakdown_json(const LossBreakdown& b) {
  return {{"cd", b.cd}, {"fd", b.fd}, {"uhd", b.uhd}, {"total", b.total}, {"selected", b.selected}};
}

std::string inversion_history(const InversionResult& r, const InversionSchedule& schedule) {
  std::string out;
  std::size_t stage = 0;
  std::size_t stage_end = schedule.stages.empty() ? 0 : schedule.stages[0].iterations;
  for (std::size_t t = 0; t < r.history.size(); ++t) {
    while (t > stage_end && stage + 1 < schedule.stages.size()) stage_end += schedule.stages[++stage].iterations;
    Json line = breakdown_json(r.history[t]);
    line["iteration"] = t;
    line["stage"] = stage;
    out += line.dump() + "\n";
  }
  return out;
}

InversionOptions inversion_options(const Json& cfg) {
  InversionOptions o;
  const std::string mask = get_string(cfg, "mask");
  if (mask == "kmask") {
    o.kind = KMask{get_size(cfg, "k")};
  } else if (mask == "taumask") {
    o.kind = TauMask{get_double(cfg, "tau")};
  } else if (mask == "voxelmask") {
    o.kind = VoxelMask{get_size(cfg, "resolution")};
  } else {
    throw Error(ErrorCode::ConfigError, "mask must be kmask, taumask or voxelmask, not '" + mask + "'");
  }
  validate(o.kind);
  o.weights = {get_double(cfg, "cd_weight"), get_double(cfg, "fd_weight"), get_double(cfg, "uhd_weight")};
  const std::string preset = get_string(cfg, "schedule_preset");
  if (preset == "thin") {
    o.schedule = InversionSchedule::thin();
  } else if (preset == "bulk") {
    o.schedule = InversionSchedule::bulk();
  } else {
    throw Error(ErrorCode::ConfigError, "schedule_preset must be thin or bulk, not '" + preset + "'");
  }
  if (const std::size_t n = get_size(cfg, "iterations"); n > 0) {
    o.schedule = InversionSchedule::with_iterations(n);
  }
  if (const std::string rates = get_string(cfg, "theta_rates"); !rates.empty()) {
    std::vector<double> v;
    std::istringstream in(rates);
    for (std::string item; std::getline(in, item, ',');) {
      double r = 0.0;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), r);
      if (ec != std::errc() || ptr != item.data() + item.size() || !(r > 0.0)) {
        throw Error(ErrorCode::ConfigError, "theta_rates: '" + item + "' is not a positive number");
      }
      v.push_back(r);
    }
    if (v.size() != o.schedule.stages.size()) {
      throw Error(ErrorCode::ConfigError, "theta_rates needs one rate per stage (" +
                                              std::to_string(o.schedule.stages.size()) + ")");
    }
    for (std::size_t i = 0; i < v.size(); ++i) o.schedule.stages[i].alpha_theta = v[i];
  }
  o.schedule.init_samples = get_size(cfg, "init_samples");
  o.schedule.select_best_iterate = !get_bool(cfg, "last_iterate");
  o.seed = get_u64(cfg, "seed");
  if (const std::string plant = get_string(cfg, "plant"); !plant.empty()) {
    o.planted.push_back(read_latent(plant));
  }
  return o;
}

std::vector<Param> inversion_params() {
  return {
      {"inputs", Json::array(), "partial clouds (.xyz or .ply)", true},
      {"checkpoint", "", "trained model (default: $SINV_CHECKPOINT_DIR/checkpoint.sinv)"},
      {"out", "", "output directory"},
      {"mask", "kmask", "degradation: kmask, taumask or voxelmask"},
      {"k", 5, "neighbours per input point for kmask"},
      {"tau", 0.03, "distance threshold for taumask"},
      {"resolution", 10, "voxels per axis for voxelmask"},
      {"cd_weight", 1.0, "weight of the chamfer term"},
      {"fd_weight", 1.0, "weight of the feature-distance term"},
      {"uhd_weight", 0.0, "weight of the one-sided Hausdorff term"},
      {"schedule_preset", "thin", "thin (200 iterations per stage) or bulk (30)"},
      {"iterations", 0, "iterations per stage, overriding the preset when > 0"},
      {"theta_rates", "", "comma-separated generator learning rate per stage, replacing the preset's"},
      {"init_samples", 256, "latent samples scored before fine-tuning"},
      {"last_iterate", false, "return the last iterate instead of the best one"},
      {"plant", "", "text file with a latent code added to the candidate pool"},
      {"seed", 0, "random seed"},
      {"jobs", 1, "inputs processed concurrently"},
  };
}

std::vector<std::string> unique_stems(const std::vector<std::string>& inputs) {
  std::vector<std::string> stems;
  for (const auto& in : inputs) {
    std::string s = fs::path(in).stem().string();
    if (std::find(stems.begin(), stems.end(), s) != stems.end()) {
      throw Error(ErrorCode::ConfigError, "two inputs share the name '" + s + "'");
    }
    stems.push_back(std::move(s));
  }
  return stems;
}

void write_result(const fs::path& dir, const InversionResult& r, const Model& model,
                  const InversionSchedule& schedule) {
  make_dirs(dir);
  write_cloud(dir / "completed.xyz", r.x_c_star);
  write_file_atomic(dir / "history.jsonl", inversion_history(r, schedule));
  save_checkpoint(dir / "result.sinv", result_checkpoint(r, model));
}

Json result_summary(const InversionResult& r) {
  return {{"init_loss", r.init_loss},
          {"final_loss", r.final_loss},
          {"best_iteration", r.best_iteration},
          {"iterations", r.history.empty() ? 0 : r.history.size() - 1},
          {"stop", stop_name(r.stop)}};
}

// ---------------------------------------------------------------- commands

int cmd_gen_data(Json& cfg) {
  const fs::path out = required(cfg, "out");
  ShapeFamily fam;
  fam.kind = family_from_name(get_string(cfg, "family"));
  fam.points = get_size(cfg, "points");
  fam.seed = get_u64(cfg, "seed");
  const std::size_t count = get_size(cfg, "count");
  const double cut = get_double(cfg, "cut");
  if (count == 0 || fam.points == 0) throw Error(ErrorCode::ConfigError, "count and points must be positive");
  if (!(cut >= 0.0 && cut < 1.0)) throw Error(ErrorCode::ConfigError, "cut must be in [0, 1)");

  const auto shapes = synth_dataset(fam, count);
  make_dirs(out / "shapes");
  if (cut > 0.0) make_dirs(out / "partials");
  Json manifest = {{"family", family_name(fam.kind)}, {"points", fam.points}, {"seed", fam.seed},
                   {"cut", cut}, {"shapes", Json::array()}, {"partials", Json::array()}};
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "shape_%04zu.xyz", i);
    write_cloud(out / "shapes" / name, shapes[i]);
    manifest["shapes"].push_back(std::string("shapes/") + name);
    if (cut > 0.0) {
      Rng rng = derive_rng(fam.seed, 0xC07 + i);
      write_cloud(out / "partials" / name, half_space_cut(shapes[i], random_direction(rng), cut));
      manifest["partials"].push_back(std::string("partials/") + name);
    }
  }
  write_json(out / "manifest.json", manifest);
  write_json(out / "config.json", cfg);
  std::cout << "wrote " << count << " shapes to " << out.string() << "\n";
  return kOk;
}

std::vector<PointCloud> load_dataset(const fs::path& data, std::size_t points) {
  std::vector<fs::path> files;
  if (fs::is_directory(data)) {
    const fs::path sub = data / "shapes";
    files = cloud_files(fs::is_directory(sub) ? sub : data);
  } else if (data.extension() == ".json") {
    const Json m = load_config_file(data);
    for (const auto& s : get_strings(m, "shapes")) files.push_back(data.parent_path() / s);
  } else {
    throw Error(ErrorCode::ConfigError, data.string() + " is neither a directory nor a manifest");
  }
  std::vector<PointCloud> out;
  for (const auto& f : files) {
    PointCloud c = read_cloud(f);
    if (c.size() < points) {
      throw Error(ErrorCode::CloudTooSmall, f.string() + " has fewer than " + std::to_string(points) + " points");
    }
    if (c.size() > points) c = gather(c, farthest_point_sample(c, points).selected);
    out.push_back(std::move(c));
  }
  return out;
}

int cmd_train(Json& cfg) {
  std::string out_s = get_string(cfg, "out");
  if (out_s.empty()) {
    const char* dir = std::getenv(kCheckpointDirEnv);
    if (dir == nullptr || *dir == '\0') {
      throw Error(ErrorCode::ConfigError, std::string("no --out given and ") + kCheckpointDirEnv + " is unset");
    }
    out_s = dir;
    cfg["out"] = out_s;
  }
  const fs::path out = out_s;

  TrainConfig tc;
  tc.epochs = get_size(cfg, "epochs");
  tc.batch_size = get_size(cfg, "batch_size");
  tc.steps_per_epoch = get_size(cfg, "steps_per_epoch");
  tc.lr_g = get_double(cfg, "lr_g");
  tc.lr_d = get_double(cfg, "lr_d");
  tc.adam_g.beta1 = tc.adam_d.beta1 = get_double(cfg, "beta1");
  tc.adam_g.beta2 = tc.adam_d.beta2 = get_double(cfg, "beta2");
  tc.critic_steps = get_size(cfg, "critic_steps");
  tc.gp_weight = get_double(cfg, "gp_weight");
  tc.uniformity = uniformity_from_name(get_string(cfg, "uniformity"));
  tc.uniform_weight = get_double(cfg, "uniform_weight");
  tc.patch.n_patches = get_size(cfg, "patches");
  tc.patch.pts_per_patch = get_size(cfg, "patch_points");
  tc.repulsion_radius = get_double(cfg, "repulsion_radius");
  tc.generator.latent_dim = get_size(cfg, "latent_dim");
  tc.generator.points = get_size(cfg, "points");
  tc.seed = get_u64(cfg, "seed");

  std::vector<PointCloud> data;
  if (const std::string d = get_string(cfg, "data"); !d.empty()) {
    data = load_dataset(d, tc.generator.points);
  } else {
    ShapeFamily fam;
    fam.kind = family_from_name(get_string(cfg, "family"));
    fam.points = tc.generator.points;
    fam.seed = tc.seed;
    data = synth_dataset(fam, get_size(cfg, "count"));
  }

  make_dirs(out);
  const fs::path ckpt_path = out / kCheckpointFile;
  const fs::path hist_path = out / "history.jsonl";
  std::optional<Checkpoint> resume;
  std::vector<std::string> history;
  if (fs::exists(ckpt_path)) {
    if (!get_bool(cfg, "resume")) {
      throw Error(ErrorCode::ConfigError, ckpt_path.string() + " exists; pass --resume to continue it");
    }
    resume = load_checkpoint(ckpt_path);
    if (fs::exists(hist_path)) {
      std::istringstream in(read_file(hist_path));
      for (std::string line; std::getline(in, line) && history.size() < resume->epochs_done;) {
        if (!line.empty()) history.push_back(line);
      }
    }
  }
  write_json(out / "config.json", cfg);

  const TrainResult r = train_gan(data, tc, resume ? &*resume : nullptr,
                                  [&](const EpochRecord& e, const Checkpoint& c) {
    const Json line = {{"epoch", e.epoch},
                       {"critic_loss", e.critic_loss},
                       {"wasserstein", e.wasserstein},
                       {"gradient_penalty", e.gradient_penalty},
                       {"generator_adv", e.generator_adv},
                       {"uniform", e.uniform},
                       {"patch_variance", e.patch_var}};
    history.push_back(line.dump());
    std::string text;
    for (const auto& h : history) text += h + "\n";
    write_file_atomic(hist_path, text);
    save_checkpoint(ckpt_path, c);
    std::cout << "epoch " << e.epoch << "  W " << e.wasserstein << "  gp " << e.gradient_penalty
              << "  pv " << e.patch_var << "\n";
  });
  save_checkpoint(ckpt_path, r.checkpoint);
  if (r.diverged) {
    std::cerr << "shapeinv: training diverged; kept the checkpoint after epoch "
              << r.checkpoint.epochs_done << "\n";
    return kDiverged;
  }
  return kOk;
}

int cmd_complete(Json& cfg) {
  const fs::path out = required(cfg, "out");
  const auto inputs = get_strings(cfg, "inputs");
  if (inputs.empty()) throw Error(ErrorCode::ConfigError, "no input clouds given");
  const auto stems = unique_stems(inputs);
  const Model model = Model::from_checkpoint(load_checkpoint(checkpoint_path(cfg)));
  const InversionOptions opts = inversion_options(cfg);

  std::vector<InversionResult> results(inputs.size());
  run_jobs(inputs.size(), get_size(cfg, "jobs"), [&](std::size_t i) {
    const PointCloud x_in = read_cloud(inputs[i]);
    results[i] = invert(x_in, model, opts);
    const fs::path dir = out / stems[i];
    write_result(dir, results[i], model, opts.schedule);
    Json one = cfg;
    one["inputs"] = Json::array({inputs[i]});
    write_json(dir / "config.json", one);
    Json summary = result_summary(results[i]);
    summary["input"] = inputs[i];
    write_json(dir / "summary.json", summary);
  });

  int rc = kOk;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& r = results[i];
    std::cout << stems[i] << "\tinit " << r.init_loss << "\tfinal " << r.final_loss << "\t"
              << stop_name(r.stop) << "\n";
    if (r.stop == StopReason::Diverged) rc = kDiverged;
    if (r.stop == StopReason::EmptyMask && rc == kOk) rc = kNoCandidates;
  }
  return rc;
}

int cmd_multi(Json& cfg) {
  const fs::path out = required(cfg, "out");
  const auto inputs = get_strings(cfg, "inputs");
  if (inputs.empty()) throw Error(ErrorCode::ConfigError, "no input clouds given");
  const auto stems = unique_stems(inputs);
  const Model model = Model::from_checkpoint(load_checkpoint(checkpoint_path(cfg)));
  const InversionOptions opts = inversion_options(cfg);
  const std::size_t outputs = get_size(cfg, "outputs");
  const double thr = get_double(cfg, "loss_threshold");
  const std::optional<double> threshold = thr > 0.0 ? std::optional<double>(thr) : std::nullopt;

  std::vector<MultiResult> results(inputs.size());
  run_jobs(inputs.size(), get_size(cfg, "jobs"), [&](std::size_t i) {
    const PointCloud x_in = read_cloud(inputs[i]);
    results[i] = multi_invert(x_in, model, opts, outputs, threshold);
    const fs::path dir = out / stems[i];
    Json summary = {{"input", inputs[i]},
                    {"loss_threshold", results[i].loss_threshold},
                    {"admitted", results[i].admitted},
                    {"results", Json::array()}};
    for (std::size_t j = 0; j < results[i].results.size(); ++j) {
      const auto& r = results[i].results[j];
      write_result(dir / ("result_" + std::to_string(j)), r, model, opts.schedule);
      Json s = result_summary(r);
      const Candidate& start = results[i].starts[results[i].start_of[j]];
      s["start_loss"] = start.loss;
      s["start_pool_index"] = start.pool_index;
      summary["results"].push_back(s);
    }
    Json one = cfg;
    one["inputs"] = Json::array({inputs[i]});
    write_json(dir / "config.json", one);
    write_json(dir / "summary.json", summary);
  });
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::cout << stems[i] << "\t" << results[i].results.size() << " results\t"
              << results[i].admitted << " admitted below " << results[i].loss_threshold << "\n";
  }
  return kOk;
}

int cmd_jitter(Json& cfg) {
  const fs::path out = required(cfg, "out");
  const auto inputs = get_strings(cfg, "inputs");
  if (inputs.size() != 1) throw Error(ErrorCode::ConfigError, "jitter takes exactly one result");
  const InversionResult r = result_from_checkpoint(load_checkpoint(result_in(inputs[0])));
  const auto clouds = jitter(r, get_double(cfg, "magnitude"), get_size(cfg, "count"), get_u64(cfg, "seed"));
  make_dirs(out);
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    write_cloud(out / ("jitter_" + std::to_string(i) + ".xyz"), clouds[i]);
  }
  write_json(out / "config.json", cfg);
  return kOk;
}

int cmd_morph(Json& cfg) {
  const fs::path out = required(cfg, "out");
  const auto inputs = get_strings(cfg, "inputs");
  if (inputs.size() != 2) throw Error(ErrorCode::ConfigError, "morph takes exactly two results");
  const InversionResult a = result_from_checkpoint(load_checkpoint(result_in(inputs[0])));
  const InversionResult b = result_from_checkpoint(load_checkpoint(result_in(inputs[1])));
  const auto clouds = morph(a, b, get_size(cfg, "steps"));
  make_dirs(out);
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    write_cloud(out / ("morph_" + std::to_string(i) + ".xyz"), clouds[i]);
  }
  write_json(out / "config.json", cfg);
  return kOk;
}

struct EvalRow {
  std::string name;
  double cd = 0.0;
  double f1 = 0.0;
};

std::string eval_table(const std::vector<EvalRow>& rows) {
  std::ostringstream os;
  os.precision(6);
  os << "name\tCD(x1e4)\tF1(x100)\n";
  double cd = 0.0, f1 = 0.0;
  for (const auto& r : rows) {
    os << r.name << "\t" << r.cd * 1e4 << "\t" << r.f1 * 100.0 << "\n";
    cd += r.cd;
    f1 += r.f1;
  }
  const auto n = static_cast<double>(std::max<std::size_t>(rows.size(), 1));
  os << "mean\t" << cd / n * 1e4 << "\t" << f1 / n * 100.0 << "\n";
  return os.str();
}

int cmd_eval(Json& cfg) {
  const auto inputs = get_strings(cfg, "inputs");
  const auto gt = get_strings(cfg, "gt");
  if (inputs.empty() || inputs.size() != gt.size()) {
    throw Error(ErrorCode::ConfigError, "eval needs one --gt cloud per output");
  }
  const double eps = get_double(cfg, "epsilon");
  std::vector<EvalRow> rows(inputs.size());
  run_jobs(inputs.size(), get_size(cfg, "jobs"), [&](std::size_t i) {
    const PointCloud pred = read_cloud(cloud_in(inputs[i]));
    const PointCloud truth = read_cloud(gt[i]);
    const fs::path p = inputs[i];
    rows[i] = {fs::is_directory(p) ? p.filename().string() : p.stem().string(),
               chamfer_cd_t(pred, truth).value, f1_score(pred, truth, eps).f1};
  });
  std::string table = eval_table(rows);
  if (const auto refs = get_strings(cfg, "reference"); !refs.empty()) {
    std::vector<PointCloud> generated, reference;
    for (const auto& p : inputs) generated.push_back(read_cloud(cloud_in(p)));
    for (const auto& p : refs) reference.push_back(read_cloud(p));
    const double mmd =
        mmd_emd(generated, reference, normalization_from_name(get_string(cfg, "normalization")));
    std::ostringstream os;
    os.precision(6);
    os << "MMD-EMD(x1e3)\t" << mmd * 1e3 << "\n";
    table += os.str();
  }
  if (const std::string out = get_string(cfg, "out"); !out.empty()) {
    write_file_atomic(out, table);
  }
  std::cout << table;
  return kOk;
}

int cmd_gradcheck(Json& cfg) {
  SuiteOptions o;
  o.configs = get_size(cfg, "configs");
  o.seed = get_u64(cfg, "seed");
  o.tolerance = get_double(cfg, "tolerance");
  o.step = get_double(cfg, "step");
  const auto entries = run_gradient_suite(o);
  bool ok = true;
  std::printf("%-20s %8s %10s %8s %12s  %s\n", "term", "configs", "checked", "skipped", "worst", "result");
  for (const auto& e : entries) {
    std::printf("%-20s %8zu %10zu %8zu %12.3e  %s\n", e.name.c_str(), e.configs, e.checked, e.skipped,
                e.worst, e.pass ? "PASS" : "FAIL");
    ok = ok && e.pass;
  }
  return ok ? kOk : kCheckFailed;
}

int ablate_fixture(const Json& cfg) {
  const LegRetention r = chair_leg_retention(get_size(cfg, "fixture_points"),
                                             get_double(cfg, "leg_offset"),
                                             get_double(cfg, "leg_radius"), get_size(cfg, "k"),
                                             get_double(cfg, "tau"), get_size(cfg, "resolution"),
                                             get_u64(cfg, "seed"));
  std::ostringstream os;
  os << "mask\tleg_points_kept(%)\n";
  os << "kmask(" << get_size(cfg, "k") << ")\t" << r.k_mask * 100.0 << "\n";
  os << "taumask(" << get_double(cfg, "tau") << ")\t" << r.tau_mask * 100.0 << "\n";
  os << "voxelmask(" << get_size(cfg, "resolution") << ")\t" << r.voxel_mask * 100.0 << "\n";
  if (const std::string out = get_string(cfg, "out"); !out.empty()) {
    make_dirs(out);
    write_file_atomic(fs::path(out) / "table.tsv", os.str());
    write_json(fs::path(out) / "config.json", cfg);
  }
  std::cout << os.str();
  return kOk;
}

int cmd_ablate_masks(Json& cfg) {
  const std::string fixture = get_string(cfg, "fixture");
  if (fixture == "chair") return ablate_fixture(cfg);
  if (!fixture.empty()) throw Error(ErrorCode::ConfigError, "unknown fixture '" + fixture + "'");

  const auto inputs = get_strings(cfg, "inputs");
  const auto gt = get_strings(cfg, "gt");
  if (inputs.empty()) throw Error(ErrorCode::ConfigError, "no input clouds given");
  if (!gt.empty() && gt.size() != inputs.size()) {
    throw Error(ErrorCode::ConfigError, "give one --gt cloud per input or none");
  }
  const Model model = Model::from_checkpoint(load_checkpoint(checkpoint_path(cfg)));
  const std::vector<std::string> masks = {"kmask", "taumask", "voxelmask"};

  std::ostringstream os;
  os.precision(6);
  os << "mask\tfit_CD(x1e4)" << (gt.empty() ? "" : "\tCD(x1e4)\tF1(x100)") << "\n";
  for (const auto& mask : masks) {
    Json mc = cfg;
    mc["mask"] = mask;
    const InversionOptions opts = inversion_options(mc);
    std::vector<double> fit(inputs.size()), cd(inputs.size()), f1(inputs.size());
    run_jobs(inputs.size(), get_size(cfg, "jobs"), [&](std::size_t i) {
      const PointCloud x_in = read_cloud(inputs[i]);
      const InversionResult r = invert(x_in, model, opts);
      fit[i] = r.history[r.best_iteration].cd;
      if (!gt.empty()) {
        const PointCloud truth = read_cloud(gt[i]);
        cd[i] = chamfer_cd_t(r.x_c_star, truth).value;
        f1[i] = f1_score(r.x_c_star, truth).f1;
      }
    });
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    os << describe(opts.kind) << "\t" << mean(fit) * 1e4;
    if (!gt.empty()) os << "\t" << mean(cd) * 1e4 << "\t" << mean(f1) * 100.0;
    os << "\n";
  }
  if (const std::string out = get_string(cfg, "out"); !out.empty()) {
    make_dirs(out);
    write_file_atomic(fs::path(out) / "table.tsv", os.str());
    write_json(fs::path(out) / "config.json", cfg);
  }
  std::cout << os.str();
  return kOk;
}

// ---------------------------------------------------------------- table

struct Command {
  std::string name;
  std::string help;
  std::vector<Param> params;
  std::function<int(Json&)> fn;
};

std::vector<Param> with(std::vector<Param> base, std::vector<Param> extra) {
  base.insert(base.end(), extra.begin(), extra.end());
  return base;
}

std::vector<Command> commands() {
  std::vector<Command> c;
  c.push_back({"gen-data", "write a synthetic shape family (and optional cut partials)",
               {{"out", "", "output directory"},
                {"family", "sphere", "sphere, box, cylinder or lamp"},
                {"count", 64, "number of shapes"},
                {"points", 256, "points per shape"},
                {"cut", 0.0, "fraction removed by a random half-space cut; 0 writes no partials"},
                {"seed", 0, "random seed"}},
               cmd_gen_data});
  c.push_back({"train", "train the generator and critic on a shape set",
               {{"data", "", "directory of clouds or a gen-data manifest"},
                {"family", "sphere", "family synthesised when no data is given"},
                {"count", 256, "shapes synthesised when no data is given"},
                {"out", "", "output directory (default: $SINV_CHECKPOINT_DIR)"},
                {"resume", false, "continue the checkpoint found in the output directory"},
                {"epochs", 300, "epochs"},
                {"batch_size", 32, "clouds per batch"},
                {"steps_per_epoch", 0, "generator steps per epoch; 0 is one pass over the data"},
                {"lr_g", 5e-4, "generator learning rate"},
                {"lr_d", 5e-4, "critic learning rate"},
                {"beta1", 0.5, "Adam first-moment decay"},
                {"beta2", 0.9, "Adam second-moment decay"},
                {"critic_steps", 5, "critic updates per generator update"},
                {"gp_weight", 10.0, "gradient-penalty weight"},
                {"uniformity", "patch_variance", "none, patch_variance or repulsion"},
                {"uniform_weight", 1.0, "weight of the uniformity term"},
                {"patches", 100, "patch count for patch_variance"},
                {"patch_points", 30, "neighbours per patch"},
                {"repulsion_radius", 0.07, "radius of the repulsion loss"},
                {"latent_dim", 96, "latent dimension"},
                {"points", 256, "points per generated cloud"},
                {"seed", 0, "random seed"}},
               cmd_train});
  c.push_back({"complete", "complete partial clouds by inverting the generator", inversion_params(),
               cmd_complete});
  c.push_back({"multi", "several diverse completions per partial cloud",
               with(inversion_params(),
                    {{"outputs", 4, "completions per input"},
                     {"loss_threshold", 0.0, "admission threshold; 0 means 1.5x the best initial loss"}}),
               cmd_multi});
  c.push_back({"jitter", "sample around an inverted latent code",
               {{"inputs", Json::array(), "result.sinv or a complete output directory", true},
                {"out", "", "output directory"},
                {"magnitude", 0.1, "standard deviation of the latent perturbation"},
                {"count", 8, "clouds to write"},
                {"seed", 0, "random seed"}},
               cmd_jitter});
  c.push_back({"morph", "interpolate between two inversion results",
               {{"inputs", Json::array(), "two result.sinv files or output directories", true},
                {"out", "", "output directory"},
                {"steps", 8, "clouds along the path, endpoints included"}},
               cmd_morph});
  c.push_back({"eval", "chamfer distance and F-score against ground truth",
               {{"inputs", Json::array(), "completed clouds or complete output directories", true},
                {"gt", Json::array(), "ground-truth clouds, one per input"},
                {"epsilon", 0.03, "F-score distance threshold"},
                {"reference", Json::array(), "reference clouds; adds MMD-EMD of the inputs against them"},
                {"normalization", "none", "cloud normalization before MMD-EMD: none, bbox or sphere"},
                {"out", "", "also write the table to this file"},
                {"jobs", 1, "pairs evaluated concurrently"}},
               cmd_eval});
  c.push_back({"gradcheck", "finite-difference check of every analytic gradient",
               {{"configs", 50, "random configurations per term"},
                {"seed", 1, "random seed"},
                {"tolerance", 1e-5, "largest accepted relative error"},
                {"step", 1e-6, "central-difference step"}},
               cmd_gradcheck});
  c.push_back({"ablate-masks", "compare the three degradations on the same inputs",
               with(inversion_params(),
                    {{"gt", Json::array(), "ground-truth clouds, one per input (optional)"},
                     {"fixture", "", "'chair': leg retention on a chair with displaced legs"},
                     {"fixture_points", 2048, "points per fixture chair"},
                     {"leg_offset", 0.03, "leg displacement along x and z in the fixture"},
                     {"leg_radius", 0.003, "leg radius of the fixture chair"}}),
               cmd_ablate_masks});
  return c;
}

}  // namespace

LegRetention chair_leg_retention(std::size_t points, double leg_offset, double leg_radius,
                                 std::size_t k, double tau, std::size_t resolution,
                                 std::uint64_t seed) {
  Rng rng_in = derive_rng(seed, 1);
  Rng rng_c = derive_rng(seed, 2);
  const PointCloud full = chair(2 * points, 0.0, rng_in, nullptr, leg_radius);
  const PointCloud x_in = half_space_cut(full, Vec3::UnitY(), 0.5);
  std::vector<unsigned char> is_leg;
  const PointCloud x_c = chair(points, leg_offset, rng_c, &is_leg, leg_radius);

  LegRetention r;
  for (unsigned char f : is_leg) r.leg_points += f;
  if (r.leg_points == 0) throw Error(ErrorCode::BadArgument, "fixture has no leg points");
  auto kept = [&](const MaskResult& m) {
    std::size_t n = 0;
    for (std::size_t i : m.selected.indices) n += is_leg[i];
    return static_cast<double>(n) / static_cast<double>(r.leg_points);
  };
  r.k_mask = kept(k_mask(x_in, x_c, k));
  r.tau_mask = kept(tau_mask(x_in, x_c, tau));
  r.voxel_mask = kept(voxel_mask(x_in, x_c, resolution));
  return r;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Point-cloud shape completion by generator inversion", "shapeinv"};
  app.require_subcommand(1);

  struct Bound {
    Command cmd;
    CLI::App* sub = nullptr;
    std::unique_ptr<ParamTable> table;
    std::string config;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (Command& c : commands()) {
    auto b = std::make_unique<Bound>();
    b->cmd = std::move(c);
    b->sub = app.add_subcommand(b->cmd.name, b->cmd.help);
    b->table = std::make_unique<ParamTable>(*b->sub, b->cmd.params);
    b->sub->add_option("--config", b->config, "JSON file of parameter values (flags override it)");
    bound.push_back(std::move(b));
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  for (const auto& b : bound) {
    if (!b->sub->parsed()) continue;
    try {
      const Json file = b->config.empty() ? Json::object() : load_config_file(b->config);
      Json cfg = b->table->resolve(file);
      return b->cmd.fn(cfg);
    } catch (const Error& e) {
      std::cerr << "shapeinv " << b->cmd.name << ": " << e.what() << "\n";
      return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
      std::cerr << "shapeinv " << b->cmd.name << ": IoError: " << e.what() << "\n";
      return kIo;
    } catch (const std::exception& e) {
      std::cerr << "shapeinv " << b->cmd.name << ": " << e.what() << "\n";
      return kFailure;
    }
  }
  return kUsage;
}

int run(int argc, const char* const* argv) {
  return run(std::vector<std::string>(argv, argv + argc));
}

}  // namespace shapeinv::cli
