#include "cppf/commands.hpp"

#include "cppf/io.hpp"
#include "cppf/mesh.hpp"
#include "cppf/mlp.hpp"
#include "cppf/parallel.hpp"
#include "cppf/pipeline.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#ifndef CPPF_VERSION
#define CPPF_VERSION "unknown"
#endif

namespace fs = std::filesystem;

namespace cppf::cli {

namespace {

constexpr int kModelPoints = 2000;
constexpr int kMaxViewAttempts = 32;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <class... Rest>
std::uint64_t mix(std::uint64_t a, Rest... rest) {
  std::uint64_t h = splitmix(a);
  ((h = splitmix(h ^ static_cast<std::uint64_t>(rest))), ...);
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(line);
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_real(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::runtime_error(where + ": bad number '" + s + "'");
  return v;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

// Reasons go into a CSV cell.
std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ' ';
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + mid));
}

std::string symmetry_field(const std::optional<Vec3>& axis) {
  if (!axis) return "none";
  return fmt_real(axis->x()) + " " + fmt_real(axis->y()) + " " + fmt_real(axis->z());
}

class StageTimer {
 public:
  void start(std::string name) {
    stop();
    name_ = std::move(name);
    t0_ = std::chrono::steady_clock::now();
  }
  void stop() {
    if (name_.empty()) return;
    const auto dt = std::chrono::steady_clock::now() - t0_;
    stages_.emplace_back(name_, std::chrono::duration<double, std::milli>(dt).count());
    name_.clear();
  }
  const std::vector<std::pair<std::string, double>>& stages() const { return stages_; }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
  std::vector<std::pair<std::string, double>> stages_;
};

SceneSample render_view(const Mesh& mesh, std::uint64_t seed, const RunConfig& cfg, const NoiseConfig& noise) {
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < kMaxViewAttempts; ++attempt) {
    const Pose9D pose = random_pose(mesh, rng);
    try {
      SceneSample s = sample_view(mesh, pose, CameraIntrinsics{}, cfg.pipeline.normal_k);
      s = corrupt(s, noise, mix(seed, 1), CameraIntrinsics{}, cfg.pipeline.normal_k);
      s.category = mesh.name;
      return s;
    } catch (const EmptyViewError&) {
    }
  }
  throw std::runtime_error("mesh " + mesh.name + " never produced a visible view");
}

struct PredictorSpec {
  std::string label;
  bool oracle = false;
  double sigma = 0.0;
  std::shared_ptr<MlpPredictor> mlp;
};

}  // namespace

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_checksum(const std::string& path) { return fnv1a(read_file(path)); }

std::string samples_dir(const std::string& dataset) { return (fs::path(dataset) / "samples").string(); }

std::string model_path(const std::string& dataset, const std::string& mesh) {
  return (fs::path(dataset) / "models" / (mesh + ".ply")).string();
}

std::vector<DatasetEntry> read_index(const std::string& dataset) {
  const std::string path = (fs::path(dataset) / "index.csv").string();
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  if (line != "id,mesh,category,symmetry") throw std::runtime_error(path + ": unexpected header");
  std::vector<DatasetEntry> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 4) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 4 fields");
    DatasetEntry e{f[0], f[1], f[2], std::nullopt};
    if (f[3] != "none") {
      const auto xyz = split(f[3], ' ');
      if (xyz.size() != 3) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad symmetry axis");
      e.symmetry_axis = Vec3(parse_real(xyz[0], path), parse_real(xyz[1], path), parse_real(xyz[2], path));
    }
    out.push_back(std::move(e));
  }
  return out;
}

int cmd_gen(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  try {
    cfg.validate(false);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  const fs::path root(cfg.output);
  fs::create_directories(root / "samples");
  fs::create_directories(root / "models");
  int status = kOk;
  StageTimer timer;
  std::vector<std::string> written;
  std::string index = "id,mesh,category,symmetry\n";
  std::set<std::string> names;

  for (std::size_t mi = 0; mi < cfg.meshes.size(); ++mi) {
    timer.start("load_meshes");
    Mesh mesh;
    try {
      mesh = resolve_mesh(cfg.meshes[mi]);
    } catch (const std::exception& e) {
      const std::string what = e.what();
      err << "error: " << (what.find(cfg.meshes[mi]) == std::string::npos ? cfg.meshes[mi] + ": " : "") << what << "\n";
      status = kUnreadable;
      continue;
    }
    std::string name = mesh.name;
    if (!names.insert(name).second) name += "_" + std::to_string(mi);

    timer.start("write_models");
    StoredCloud model;
    model.cloud.points = mesh.sample_surface(kModelPoints, mix(cfg.pipeline.seed, mi, 0x6d6f64ULL));
    const std::string mpath = model_path(cfg.output, name);
    write_ply(mpath, model);
    written.push_back(mpath);

    timer.start("render_views");
    const auto views = static_cast<std::size_t>(cfg.views);
    std::vector<std::string> ids(views);
    for (std::size_t v = 0; v < views; ++v) {
      std::ostringstream id;
      id << name << '_' << std::setw(4) << std::setfill('0') << v;
      ids[v] = id.str();
    }
    std::vector<std::string> failures(views);
    parallel_chunks(views, resolve_workers(cfg.pipeline.workers), [&](int, std::size_t b, std::size_t e) {
      for (std::size_t v = b; v < e; ++v) {
        try {
          const SceneSample s = render_view(mesh, mix(cfg.pipeline.seed, mi, v), cfg, cfg.noise);
          write_sample(samples_dir(cfg.output), ids[v], s);
        } catch (const std::exception& ex) {
          failures[v] = ex.what();
        }
      }
    });
    for (std::size_t v = 0; v < views; ++v) {
      if (!failures[v].empty()) {
        err << "error: " << ids[v] << ": " << failures[v] << "\n";
        status = kUnreadable;
        continue;
      }
      index += ids[v] + "," + name + "," + mesh.name + "," + symmetry_field(mesh.symmetry_axis) + "\n";
      written.push_back((fs::path(samples_dir(cfg.output)) / (ids[v] + ".ply")).string());
      written.push_back((fs::path(samples_dir(cfg.output)) / (ids[v] + ".pose.txt")).string());
    }
    log << "gen: " << name << " " << views << " views\n";
  }

  timer.start("write_index");
  const std::string index_path = (root / "index.csv").string();
  write_file(index_path, index);
  written.push_back(index_path);

  timer.start("checksums");
  std::ostringstream sums;
  for (const auto& p : written) sums << fs::relative(p, root).generic_string() << " = " << hex64(file_checksum(p)) << "\n";
  timer.stop();

  std::ostringstream manifest;
  manifest << "# dataset manifest\n[versions]\ncppf = " << CPPF_VERSION << "\neigen = " << EIGEN_WORLD_VERSION << "."
           << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION << "\ncompiler = " << __VERSION__ << "\n\n"
           << "[config]\n" << dump_config(cfg) << "\n[timing_ms]\n";
  for (const auto& [stage, ms] : timer.stages()) manifest << stage << " = " << fmt_real(ms) << "\n";
  manifest << "\n[checksums]\n" << sums.str();
  write_file((root / "manifest.txt").string(), manifest.str());
  return status;
}

int cmd_train(const RunConfig& cfg, const TrainOptions& opt, std::ostream& log, std::ostream& err) {
  try {
    cfg.validate(false);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  if (opt.checkpoint.empty()) {
    err << "error: no checkpoint path\n";
    return kUsage;
  }

  std::vector<SceneSample> views;
  try {
    const auto entries = read_index(opt.dataset);
    for (const auto& e : entries) {
      SceneSample s = read_sample(samples_dir(opt.dataset), e.id);
      if (s.canonical.size() != s.size()) throw std::runtime_error(e.id + ": no canonical coordinates");
      if (static_cast<int>(s.size()) < cfg.pipeline.tuple_size) {
        err << "warning: " << e.id << ": fewer than " << cfg.pipeline.tuple_size << " points, skipped\n";
        continue;
      }
      views.push_back(std::move(s));
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUnreadable;
  }
  if (views.empty()) {
    err << "error: dataset " << opt.dataset << " has no usable views\n";
    return kUnreadable;
  }
  const int workers = resolve_workers(cfg.pipeline.workers);
  parallel_chunks(views.size(), workers, [&](int, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) prepare_cloud(views[i].cloud, cfg.pipeline);
  });

  const int dim = feature_dim(cfg.pipeline.tuple_size, cfg.pipeline.descriptor.dim());
  Mlp model;
  if (opt.resume) {
    try {
      model = Mlp::load(opt.checkpoint);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kUnreadable;
    }
  } else {
    model = Mlp(dim, cfg.predictor);
  }
  if (model.input_dim() != dim) {
    err << "error: dimension mismatch: checkpoint " << opt.checkpoint << " expects " << model.input_dim()
        << " features, config produces " << dim << " (N=" << cfg.pipeline.tuple_size
        << ", descriptor=" << cfg.pipeline.descriptor.dim() << ")\n";
    return kDimension;
  }

  PipelineConfig draw = cfg.pipeline;
  draw.tuples = cfg.train.tuples_per_view;
  TrainingSet current;
  int held = -1;
  const EpochData provider = [&](int epoch) -> const TrainingSet& {
    if (epoch == held) return current;
    std::vector<std::vector<TupleSample>> per_view(views.size());
    parallel_chunks(views.size(), workers, [&](int, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) per_view[i] = make_tuples(views[i], draw, mix(draw.seed, epoch, i));
    });
    current = TrainingSet{};
    for (const auto& t : per_view) current.append(t);
    held = epoch;
    return current;
  };

  TrainCallbacks callbacks;
  callbacks.on_epoch = [&log](int epoch, double loss, double lr) {
    log << "epoch " << epoch << " loss " << fmt_real(loss) << " lr " << fmt_real(lr) << "\n" << std::flush;
  };
  try {
    train(model, provider, cfg.predictor, callbacks);
  } catch (const TrainingDiverged& e) {
    err << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const DimensionMismatch& e) {
    err << "error: " << e.what() << "\n";
    return kDimension;
  }

  try {
    model.save(opt.checkpoint);
    std::string csv = "epoch,loss\n";
    for (std::size_t i = 0; i < model.loss_history.size(); ++i)
      csv += std::to_string(i) + "," + fmt_real(model.loss_history[i]) + "\n";
    write_file(opt.checkpoint + ".loss.csv", csv);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUnreadable;
  }
  log << "train: " << views.size() << " views, " << model.epochs_done << " epochs, checkpoint " << opt.checkpoint << "\n";
  return kOk;
}

std::string predictions_header() {
  return "id,status,reason,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz,sx,sy,sz,azimuth_ambiguous,final_lcoord,"
         "chosen_model";
}

std::string format_prediction(const PredictionRow& row) {
  std::ostringstream out;
  out << row.id << ',' << (row.ok ? "ok" : "failed") << ',' << sanitize(row.reason);
  if (row.ok) {
    const auto& r = row.pose.rotation.matrix();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out << ',' << fmt_real(r(i, j));
    for (int i = 0; i < 3; ++i) out << ',' << fmt_real(row.pose.translation(i));
    for (int i = 0; i < 3; ++i) out << ',' << fmt_real(row.pose.scale(i));
    out << ',' << (row.azimuth_ambiguous ? 1 : 0) << ',' << fmt_real(row.final_lcoord);
  } else {
    out << std::string(17, ',');
  }
  out << ',' << sanitize(row.chosen_model);
  return out.str();
}

std::vector<PredictionRow> read_predictions(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  if (line != predictions_header()) throw std::runtime_error(path + ": unexpected header");
  std::vector<PredictionRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto f = split(line, ',');
    if (f.size() != 21) throw std::runtime_error(where + ": expected 21 fields");
    PredictionRow row;
    row.id = f[0];
    row.reason = f[2];
    row.chosen_model = f[20];
    if (f[1] == "ok") {
      row.ok = true;
      Mat3 r;
      for (int k = 0; k < 9; ++k) r(k / 3, k % 3) = parse_real(f[3 + k], where);
      try {
        row.pose.rotation = Rotation(r);
      } catch (const std::exception& e) {
        throw std::runtime_error(where + ": " + e.what());
      }
      for (int i = 0; i < 3; ++i) row.pose.translation(i) = parse_real(f[12 + i], where);
      for (int i = 0; i < 3; ++i) row.pose.scale(i) = parse_real(f[15 + i], where);
      row.azimuth_ambiguous = f[18] == "1";
      row.final_lcoord = parse_real(f[19], where);
    } else if (f[1] != "failed") {
      throw std::runtime_error(where + ": status must be ok or failed");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_infer(const RunConfig& cfg, const InferOptions& opt, std::ostream& log, std::ostream& err) {
  try {
    cfg.validate(false);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  struct Scene {
    std::string id, dir;
  };
  std::vector<Scene> scenes;
  if (!opt.dataset.empty()) {
    try {
      for (const auto& e : read_index(opt.dataset)) scenes.push_back({e.id, samples_dir(opt.dataset)});
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kUnreadable;
    }
  } else {
    for (const auto& p : opt.scenes) {
      const fs::path path(p);
      if (path.extension() != ".ply") {
        err << "error: scene files must be .ply: " << p << "\n";
        return kUsage;
      }
      scenes.push_back({path.stem().string(), path.has_parent_path() ? path.parent_path().string() : "."});
    }
  }
  if (scenes.empty()) {
    err << "error: no scenes\n";
    return kUsage;
  }

  const std::vector<std::string> specs = opt.ensemble.empty() ? std::vector<std::string>{opt.predictor} : opt.ensemble;
  const int dim = feature_dim(cfg.pipeline.tuple_size, cfg.pipeline.descriptor.dim());
  std::vector<PredictorSpec> predictors;
  for (const auto& s : specs) {
    PredictorSpec p;
    p.label = s;
    if (s == "oracle" || s.rfind("oracle:", 0) == 0) {
      p.oracle = true;
      p.sigma = cfg.oracle.coord_noise_sigma;
      if (s.size() > 7) {
        try {
          p.sigma = parse_real(s.substr(7), "predictor " + s);
        } catch (const std::exception& e) {
          err << "error: " << e.what() << "\n";
          return kUsage;
        }
      }
    } else {
      try {
        p.mlp = std::make_shared<MlpPredictor>(Mlp::load(s), s);
      } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUnreadable;
      }
      if (p.mlp->model().input_dim() != dim) {
        err << "error: dimension mismatch: checkpoint " << s << " expects " << p.mlp->model().input_dim()
            << " features, config produces " << dim << "\n";
        return kDimension;
      }
    }
    predictors.push_back(std::move(p));
  }
  const bool needs_truth = std::any_of(predictors.begin(), predictors.end(), [](const auto& p) { return p.oracle; });

  PipelineConfig pc = cfg.pipeline;
  pc.workers = 1;
  std::vector<PredictionRow> rows(scenes.size());
  std::vector<char> unreadable(scenes.size(), 0);
  parallel_chunks(scenes.size(), resolve_workers(cfg.pipeline.workers), [&](int, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      PredictionRow& row = rows[i];
      row.id = scenes[i].id;
      const std::uint64_t id_hash = fnv1a(row.id);
      SceneSample sample;
      try {
        sample = read_sample(scenes[i].dir, scenes[i].id);
      } catch (const std::exception& ex) {
        row.reason = std::string("unreadable: ") + ex.what();
        unreadable[i] = 1;
        continue;
      }
      if (sample.size() == 0) {
        row.reason = "empty view";
        continue;
      }
      if (static_cast<int>(sample.size()) < pc.tuple_size) {
        row.reason = "fewer than " + std::to_string(pc.tuple_size) + " points";
        continue;
      }
      if (needs_truth && sample.canonical.size() != sample.size()) {
        row.reason = "oracle needs canonical coordinates";
        continue;
      }
      try {
        prepare_cloud(sample.cloud, pc);
        PipelineConfig scene_cfg = pc;
        scene_cfg.seed = mix(pc.seed, id_hash);
        std::vector<std::unique_ptr<OraclePredictor>> oracles;
        std::vector<const CanonicalPredictor*> used;
        for (std::size_t k = 0; k < predictors.size(); ++k) {
          if (predictors[k].oracle) {
            OraclePredictorConfig oc = cfg.oracle;
            oc.coord_noise_sigma = predictors[k].sigma;
            oc.seed = mix(cfg.oracle.seed, id_hash, k);
            oracles.push_back(std::make_unique<OraclePredictor>(oc));
            used.push_back(oracles.back().get());
          } else {
            used.push_back(predictors[k].mlp.get());
          }
        }
        const EnsembleEstimate ens = estimate_pose_ensemble(sample, used, scene_cfg);
        const Pose9D& pose = ens.estimate.pose;
        if (!pose.translation.allFinite() || !pose.scale.allFinite() || !pose.rotation.matrix().allFinite()) {
          row.reason = "non-finite pose";
          continue;
        }
        row.ok = true;
        row.pose = pose;
        row.azimuth_ambiguous = ens.estimate.azimuth_ambiguous;
        row.final_lcoord = ens.estimate.final_lcoord;
        row.chosen_model = predictors[ens.chosen].label;
      } catch (const std::exception& ex) {
        row.reason = ex.what();
      }
    }
  });

  std::string csv = predictions_header() + "\n";
  long failed = 0;
  for (const auto& r : rows) {
    csv += format_prediction(r) + "\n";
    failed += r.ok ? 0 : 1;
  }
  try {
    if (const fs::path parent = fs::path(opt.output).parent_path(); !parent.empty()) fs::create_directories(parent);
    write_file(opt.output, csv);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUnreadable;
  }
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!rows[i].ok) err << "warning: " << rows[i].id << ": " << rows[i].reason << "\n";
  log << "infer: " << rows.size() << " scenes, " << failed << " failed, written to " << opt.output << "\n";
  return std::any_of(unreadable.begin(), unreadable.end(), [](char c) { return c != 0; }) ? kUnreadable : kOk;
}

int cmd_eval(const EvalOptions& opt, std::ostream& log, std::ostream& err) {
  std::vector<DatasetEntry> entries;
  std::vector<PredictionRow> preds;
  try {
    entries = read_index(opt.dataset);
    preds = read_predictions(opt.predictions);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUnreadable;
  }

  std::map<std::string, const PredictionRow*> by_id;
  std::set<std::string> known;
  for (const auto& e : entries) known.insert(e.id);
  std::vector<std::string> orphans, duplicates;
  for (const auto& p : preds) {
    if (!known.count(p.id)) orphans.push_back(p.id);
    else if (!by_id.emplace(p.id, &p).second) duplicates.push_back(p.id);
  }
  if (!orphans.empty() || !duplicates.empty()) {
    err << "error: prediction ids do not match the ground truth\n";
    for (const auto& id : orphans) err << "  orphan: " << id << "\n";
    for (const auto& id : duplicates) err << "  duplicate: " << id << "\n";
    return kIdMismatch;
  }

  std::map<std::string, std::vector<Vec3>> models;
  std::vector<SampleScore> scores;
  try {
    for (const auto& e : entries) {
      auto it = models.find(e.mesh);
      if (it == models.end()) it = models.emplace(e.mesh, read_ply(model_path(opt.dataset, e.mesh)).cloud.points).first;
      const Pose9D gt = read_pose((fs::path(samples_dir(opt.dataset)) / (e.id + ".pose.txt")).string());
      std::optional<Pose9D> pred;
      if (const auto p = by_id.find(e.id); p != by_id.end() && p->second->ok) pred = p->second->pose;
      scores.push_back(score_sample(e.id, pred, gt, it->second, e.symmetry_axis));
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUnreadable;
  }
  if (scores.empty()) {
    err << "error: dataset " << opt.dataset << " is empty\n";
    return kUnreadable;
  }

  const EvalReport report = aggregate(scores);
  try {
    fs::create_directories(opt.output_dir);
    const fs::path dir(opt.output_dir);
    write_file((dir / "report.csv").string(), report_csv(report));
    write_file((dir / "report.txt").string(), report_table(report));
    write_file((dir / "curve.csv").string(), curve_csv(scores));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUnreadable;
  }
  log << report_table(report);
  return kOk;
}

double BenchCell::median_rot_deg() const {
  std::vector<double> v;
  for (const auto& e : errors) v.push_back(e.rot_deg);
  return median(v);
}

double BenchCell::median_trans_cm() const {
  std::vector<double> v;
  for (const auto& e : errors) v.push_back(e.trans_cm);
  return median(v);
}

double BenchCell::clutter_share() const {
  return discarded > 0 ? static_cast<double>(discarded_clutter) / static_cast<double>(discarded) : 0.0;
}

BenchCell run_bench_cell(const RunConfig& cfg, double coord_noise_sigma, double clutter_fraction, bool filtering) {
  cfg.validate(false);
  BenchCell cell;
  cell.coord_noise_sigma = coord_noise_sigma;
  cell.clutter_fraction = clutter_fraction;
  cell.filtering = filtering;

  std::vector<Mesh> meshes;
  std::vector<std::vector<Vec3>> model_points;
  for (std::size_t mi = 0; mi < cfg.meshes.size(); ++mi) {
    meshes.push_back(resolve_mesh(cfg.meshes[mi]));
    model_points.push_back(meshes.back().sample_surface(500, mix(cfg.pipeline.seed, mi, 0x6d6f64ULL)));
  }
  NoiseConfig noise = cfg.noise;
  noise.clutter_fraction = clutter_fraction;
  PipelineConfig pc = cfg.pipeline;
  pc.workers = 1;
  pc.filter.enabled = filtering;

  struct Run {
    std::optional<PoseError> error;
    SampleScore score;
    long discarded = 0, clutter = 0;
  };
  const std::size_t views = static_cast<std::size_t>(cfg.views);
  std::vector<Run> runs(meshes.size() * views);
  parallel_chunks(runs.size(), resolve_workers(cfg.pipeline.workers), [&](int, std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      const std::size_t mi = j / views, v = j % views;
      const Mesh& mesh = meshes[mi];
      const std::string id = mesh.name + "_" + std::to_string(v);
      SceneSample s;
      try {
        s = render_view(mesh, mix(cfg.pipeline.seed, mi, v), cfg, noise);
        prepare_cloud(s.cloud, pc);
        OraclePredictorConfig oc = cfg.oracle;
        oc.coord_noise_sigma = coord_noise_sigma;
        oc.seed = mix(cfg.oracle.seed, mi, v);
        PipelineConfig run_cfg = pc;
        run_cfg.seed = mix(pc.seed, mi, v, 2);
        const PoseEstimate est = estimate_pose(s, OraclePredictor(oc), run_cfg);
        runs[j].error = pose_error(est.pose, s.gt_pose, mesh.symmetry_axis);
        runs[j].score = score_sample(id, est.pose, s.gt_pose, model_points[mi], mesh.symmetry_axis, 20000);
        for (const auto& r : est.records) {
          if (r.kept) continue;
          ++runs[j].discarded;
          if (s.noise_mask[r.index1] || s.noise_mask[r.index2]) ++runs[j].clutter;
        }
      } catch (const std::exception&) {
        runs[j].score = score_sample(id, std::nullopt, s.gt_pose, model_points[mi], mesh.symmetry_axis, 20000);
      }
    }
  });
  for (const auto& r : runs) {
    if (r.error) cell.errors.push_back(*r.error);
    else ++cell.failures;
    cell.scores.push_back(r.score);
    cell.discarded += r.discarded;
    cell.discarded_clutter += r.clutter;
  }
  return cell;
}

int cmd_bench(const RunConfig& cfg, const BenchOptions& opt, std::ostream& log, std::ostream& err) {
  try {
    cfg.validate(true);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  if (opt.coord_noise_sigmas.empty() || opt.clutter_fractions.empty()) {
    err << "error: empty sweep\n";
    return kUsage;
  }
  std::string csv =
      "coord_noise_sigma,clutter_fraction,filtering,runs,failures,median_rot_deg,median_trans_cm,ap_10deg_5cm,"
      "discarded,clutter_share\n";
  std::ostringstream table;
  table << std::left << std::setw(8) << "sigma" << std::setw(9) << "clutter" << std::setw(7) << "filter"
        << std::setw(10) << "rot_deg" << std::setw(10) << "trans_cm" << std::setw(9) << "ap10_5" << "clutter_share\n";
  for (double sigma : opt.coord_noise_sigmas) {
    for (double clutter : opt.clutter_fractions) {
      for (bool filtering : {true, false}) {
        BenchCell cell;
        try {
          cell = run_bench_cell(cfg, sigma, clutter, filtering);
        } catch (const std::exception& e) {
          err << "error: " << e.what() << "\n";
          return kUnreadable;
        }
        double ap = 0.0;
        for (const auto& e : aggregate(cell.scores).pose_ap)
          if (e.rot_deg == 10.0 && e.trans_cm == 5.0) ap = e.value;
        csv += fmt_real(sigma) + "," + fmt_real(clutter) + "," + (filtering ? "on" : "off") + "," +
               std::to_string(cell.scores.size()) + "," + std::to_string(cell.failures) + "," +
               fmt_real(cell.median_rot_deg()) + "," + fmt_real(cell.median_trans_cm()) + "," + fmt_real(ap) + "," +
               std::to_string(cell.discarded) + "," + fmt_real(cell.clutter_share()) + "\n";
        table << std::fixed << std::setprecision(3) << std::setw(8) << sigma << std::setw(9) << clutter << std::setw(7)
              << (filtering ? "on" : "off") << std::setw(10) << cell.median_rot_deg() << std::setw(10)
              << cell.median_trans_cm() << std::setw(9) << ap << cell.clutter_share() << "\n";
      }
    }
  }
  try {
    write_file(opt.output, csv);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUnreadable;
  }
  log << table.str();
  return kOk;
}

}  // namespace cppf::cli
