#pragma once

#include "cppf/config.hpp"
#include "cppf/metrics.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cppf::cli {

/// Process exit codes. Each error path maps to exactly one code.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,          // bad flags or config
  kUnreadable = 2,     // mesh, scene, dataset or checkpoint could not be read
  kDiverged = 3,       // training produced a non-finite loss
  kDimension = 4,      // feature dimension differs from the checkpoint
  kIdMismatch = 5,     // predictions name ids missing from the ground truth
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t file_checksum(const std::string& path);

/// One row of <dataset>/index.csv.
struct DatasetEntry {
  std::string id;
  std::string mesh;
  std::string category;
  std::optional<Vec3> symmetry_axis;
};

/// Reads <dataset>/index.csv. Throws std::runtime_error naming the file.
std::vector<DatasetEntry> read_index(const std::string& dataset);
std::string samples_dir(const std::string& dataset);
std::string model_path(const std::string& dataset, const std::string& mesh);

/// Writes <output>/samples/<mesh>_<view>.{ply,pose.txt}, index.csv, models/<mesh>.ply
/// and manifest.txt. Unreadable meshes are reported and skipped; exit 2 if any.
int cmd_gen(const RunConfig& cfg, std::ostream& log, std::ostream& err);

struct TrainOptions {
  std::string dataset;
  std::string checkpoint;
  /// Continue from an existing checkpoint instead of starting fresh.
  bool resume = false;
};

/// Trains on tuples drawn fresh from every stored view each epoch. Writes the
/// checkpoint and <checkpoint>.loss.csv.
int cmd_train(const RunConfig& cfg, const TrainOptions& opt, std::ostream& log, std::ostream& err);

struct InferOptions {
  /// Generated dataset; every indexed sample is processed.
  std::string dataset;
  /// Explicit scene PLY files, used when `dataset` is empty. The id is the file stem.
  std::vector<std::string> scenes;
  /// "oracle", "oracle:<coord sigma>" or a checkpoint path.
  std::string predictor = "oracle";
  /// Two or more predictor specs; overrides `predictor`.
  std::vector<std::string> ensemble;
  std::string output = "predictions.csv";
};

/// One CSV row per scene in input order. Scenes that cannot be estimated get a
/// failure row with a reason.
int cmd_infer(const RunConfig& cfg, const InferOptions& opt, std::ostream& log, std::ostream& err);

/// Parsed prediction row.
struct PredictionRow {
  std::string id;
  bool ok = false;
  std::string reason;
  Pose9D pose;
  bool azimuth_ambiguous = false;
  double final_lcoord = 0.0;
  std::string chosen_model;
};

std::string predictions_header();
std::string format_prediction(const PredictionRow& row);
std::vector<PredictionRow> read_predictions(const std::string& path);

struct EvalOptions {
  std::string predictions;
  std::string dataset;
  std::string output_dir = "report";
};

/// Scores predictions against the dataset ground truth. Dataset samples with no
/// row count as misses; rows naming unknown ids are orphans and exit 5.
/// Writes report.csv, report.txt and curve.csv.
int cmd_eval(const EvalOptions& opt, std::ostream& log, std::ostream& err);

/// Result of one robustness cell: oracle predictor on freshly rendered views.
struct BenchCell {
  double coord_noise_sigma = 0.0;
  double clutter_fraction = 0.0;
  bool filtering = true;
  std::vector<PoseError> errors;
  std::vector<SampleScore> scores;
  long discarded = 0;
  long discarded_clutter = 0;
  long failures = 0;

  double median_rot_deg() const;
  double median_trans_cm() const;
  /// Share of discarded records with a clutter endpoint; 0 when nothing was discarded.
  double clutter_share() const;
};

/// Runs `cfg.views` views per mesh. Scenes depend only on the seed, so cells
/// that differ only in `filtering` see identical inputs.
BenchCell run_bench_cell(const RunConfig& cfg, double coord_noise_sigma, double clutter_fraction, bool filtering);

struct BenchOptions {
  std::vector<double> coord_noise_sigmas{0.0, 0.02, 0.05};
  std::vector<double> clutter_fractions{0.0, 0.3};
  std::string output = "bench.csv";
};

/// Sweeps coord noise x clutter with filtering on and off; writes a CSV and prints a table.
int cmd_bench(const RunConfig& cfg, const BenchOptions& opt, std::ostream& log, std::ostream& err);

}  // namespace cppf::cli
