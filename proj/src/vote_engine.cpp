#include "cppf/vote_engine.hpp"

#include "cppf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace cppf {

void FilterConfig::validate() const {
  if (!(tau >= 0.0 && tau < 1.0)) throw std::invalid_argument("FilterConfig: tau must be in [0, 1)");
  if (eta < 0.0) throw std::invalid_argument("FilterConfig: eta must be nonnegative");
  if (sigma_samples < 1 || theta_samples < 1) throw std::invalid_argument("FilterConfig: sample counts must be positive");
}

CenterGrid CenterGrid::covering(const std::vector<Vec3>& points, double voxel, double padding) {
  if (!(voxel > 0.0)) throw std::invalid_argument("CenterGrid: voxel must be positive");
  if (points.empty()) throw std::invalid_argument("CenterGrid: no points");
  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double pad = padding * (hi - lo).maxCoeff();
  lo.array() -= pad;
  hi.array() += pad;
  CenterGrid g;
  g.origin = lo;
  g.voxel = voxel;
  for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<long>(std::floor((hi[a] - lo[a]) / voxel)) + 1;
  g.counts.assign(static_cast<std::size_t>(g.cell_count()), 0.0);
  return g;
}

long CenterGrid::index_of(const Vec3& p) const {
  long idx[3];
  for (int a = 0; a < 3; ++a) {
    const double r = (p[a] - origin[a]) / voxel;
    if (!(r >= 0.0)) return -1;
    idx[a] = static_cast<long>(r);
    if (idx[a] >= dims[a]) return -1;
  }
  return (idx[2] * dims[1] + idx[1]) * dims[0] + idx[0];
}

Vec3 CenterGrid::center_of(long index) const {
  const long ix = index % dims[0];
  const long iy = (index / dims[0]) % dims[1];
  const long iz = index / (dims[0] * dims[1]);
  return origin + voxel * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
}

OrientationGrid::OrientationGrid(double res) : resolution_deg(res) {
  if (!(res > 0.0)) throw std::invalid_argument("OrientationGrid: resolution must be positive");
  rows = static_cast<int>(std::ceil(180.0 / res));
  cols = static_cast<int>(std::ceil(360.0 / res));
  counts.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  const double step = res * std::numbers::pi / 180.0;
  row_weight.resize(rows);
  for (int r = 0; r < rows; ++r) {
    const double incl = (r + 0.5) * step;
    row_weight[r] = 1.0 / std::max(std::sin(std::min(incl, std::numbers::pi)), std::sin(step));
  }
}

long OrientationGrid::index_of(const Vec3& u) const {
  const double step = resolution_deg * std::numbers::pi / 180.0;
  const double incl = std::acos(std::clamp(u.z(), -1.0, 1.0));
  double azim = std::atan2(u.y(), u.x());
  if (azim < 0.0) azim += 2.0 * std::numbers::pi;
  const int r = std::min(rows - 1, static_cast<int>(incl / step));
  const int c = std::min(cols - 1, static_cast<int>(azim / step));
  return static_cast<long>(r) * cols + c;
}

Vec3 OrientationGrid::direction_of(long index) const {
  const double step = resolution_deg * std::numbers::pi / 180.0;
  const double incl = std::min((index / cols + 0.5) * step, std::numbers::pi);
  const double azim = (index % cols + 0.5) * step;
  return Vec3(std::sin(incl) * std::cos(azim), std::sin(incl) * std::sin(azim), std::cos(incl));
}

std::pair<CenterTargets, OrientationTargets> derive_pair_targets(const Vec3& canonical1, const Vec3& canonical2,
                                                                 const Vec3& scale) {
  const Vec3 q1 = canonical1.cwiseProduct(scale);
  const Vec3 q2 = canonical2.cwiseProduct(scale);
  const CenterTargets c = center_targets(Vec3::Zero(), q1, q2);
  const OrientationTargets o =
      orientation_targets(UnitVec3::trusted(kCanonicalUp), UnitVec3::trusted(kCanonicalRight), q1, q2);
  return {c, o};
}

std::vector<PairVoteRecord> build_records(const PointCloud& cloud, std::span<const TupleSample> tuples,
                                          std::span<const CanonicalPrediction> predictions, DecodeMode mode,
                                          std::uint64_t seed, int* dropped) {
  if (tuples.size() != predictions.size()) throw std::invalid_argument("build_records: size mismatch");
  std::mt19937_64 rng(seed);
  std::vector<PairVoteRecord> out;
  out.reserve(tuples.size());
  int lost = 0;
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    const auto& t = tuples[i];
    PairVoteRecord r;
    r.tuple = static_cast<int>(i);
    r.index1 = t.indices[0];
    r.index2 = t.indices[1];
    r.p1 = cloud.points[r.index1];
    r.p2 = cloud.points[r.index2];
    r.canonical = decode_coordinates(predictions[i], mode, &rng);
    r.scale = predictions[i].scale;
    r.metric_canonical = {r.canonical[0].cwiseProduct(r.scale), r.canonical[1].cwiseProduct(r.scale)};
    try {
      pair_direction(r.p1, r.p2);
      std::tie(r.center, r.orientation) = derive_pair_targets(r.canonical[0], r.canonical[1], r.scale);
    } catch (const GeometryError&) {
      ++lost;
      continue;
    }
    out.push_back(r);
  }
  if (dropped) *dropped = lost;
  return out;
}

namespace {

struct Trig {
  std::vector<double> c, s;
  explicit Trig(int samples) : c(samples), s(samples) {
    for (int k = 0; k < samples; ++k) {
      const double a = 2.0 * std::numbers::pi * k / samples;
      c[k] = std::cos(a);
      s[k] = std::sin(a);
    }
  }
};

// Accumulates per-worker partial grids over contiguous record chunks and
// merges them in worker order.
template <typename CastFn>
void accumulate(std::vector<double>& counts, std::size_t n, int workers, CastFn&& cast) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    cast(counts, std::size_t{0}, n);
    return;
  }
  std::vector<std::vector<double>> partial(static_cast<std::size_t>(workers));
  parallel_chunks(n, workers, [&](int w, std::size_t begin, std::size_t end) {
    auto& grid = partial[static_cast<std::size_t>(w)];
    grid.assign(counts.size(), 0.0);
    cast(grid, begin, end);
  });
  for (const auto& grid : partial) {
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += grid[i];
  }
}

long argmax(const std::vector<double>& counts) {
  long best = -1;
  double top = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > top) {
      top = counts[i];
      best = static_cast<long>(i);
    }
  }
  return best;
}

}  // namespace

CenterVote vote_center(const std::vector<PairVoteRecord>& records, CenterGrid& grid, const FilterConfig& cfg,
                       int workers) {
  cfg.validate();
  if (records.empty()) throw std::invalid_argument("vote_center: no records");
  const Trig trig(cfg.sigma_samples);
  accumulate(grid.counts, records.size(), workers, [&](std::vector<double>& counts, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto& r = records[i];
      if (!r.kept || r.weight <= 0.0) continue;
      const PairFrame f = PairFrame::of(r.p1, r.p2);
      const Vec3 foot = r.p1 + r.center.mu * f.d;
      const Vec3 u = r.center.nu * f.perp;
      const Vec3 v = r.center.nu * f.binormal;
      for (int k = 0; k < cfg.sigma_samples; ++k) {
        const long cell = grid.index_of(foot + trig.c[k] * u + trig.s[k] * v);
        if (cell >= 0) counts[static_cast<std::size_t>(cell)] += r.weight;
      }
    }
  });
  CenterVote out;
  out.cell = argmax(grid.counts);
  if (out.cell < 0) throw std::runtime_error("vote_center: no vote landed inside the grid");
  out.center = grid.center_of(out.cell);
  return out;
}

void filter_noisy_pairs(std::vector<PairVoteRecord>& records, const Vec3& center, const FilterConfig& cfg) {
  cfg.validate();
  for (auto& r : records) {
    const CenterTargets observed = center_targets(center, r.p1, r.p2);
    r.epsilon = std::hypot(observed.mu - r.center.mu, observed.nu - r.center.nu);
    r.kept = true;
  }
  const auto discard = static_cast<std::size_t>(std::ceil(cfg.tau * static_cast<double>(records.size()) - 1e-9));
  if (discard == 0) return;
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].epsilon > records[b].epsilon; });
  for (std::size_t i = 0; i < discard && i < order.size(); ++i) records[order[i]].kept = false;
}

void reweight(std::vector<PairVoteRecord>& records, double eta) {
  std::unordered_map<int, int> uses;
  for (const auto& r : records) {
    if (!r.kept) continue;
    ++uses[r.index1];
    ++uses[r.index2];
  }
  for (auto& r : records) {
    if (!r.kept) {
      r.weight = 0.0;
      continue;
    }
    r.weight = 1.0 / (uses[r.index1] + eta) / (uses[r.index2] + eta);
  }
}

Rotation rotation_from_axes(const Vec3& up, const Vec3& right) {
  const Vec3 y = up.normalized();
  Vec3 x = right - right.dot(y) * y;
  if (x.norm() < 1e-9) x = orthogonal_unit(y);
  x.normalize();
  Mat3 m;
  m.col(0) = x;
  m.col(1) = y;
  m.col(2) = x.cross(y);
  return Rotation::nearest(m);
}

OrientationVote vote_orientation(const std::vector<PairVoteRecord>& records, OrientationGrid& up_grid,
                                 OrientationGrid& right_grid, const FilterConfig& cfg, int workers) {
  cfg.validate();
  const Trig trig(cfg.theta_samples);
  const auto cast_cone = [&](OrientationGrid& grid, bool use_alpha) {
    accumulate(grid.counts, records.size(), workers, [&](std::vector<double>& counts, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const auto& r = records[i];
        if (!r.kept || r.weight <= 0.0) continue;
        const double cosine = std::clamp(use_alpha ? r.orientation.alpha : r.orientation.beta, -1.0, 1.0);
        const PairFrame f = PairFrame::of(r.p1, r.p2);
        const double radial = std::sqrt(std::max(0.0, 1.0 - cosine * cosine));
        const Vec3 axial = cosine * f.d;
        for (int k = 0; k < cfg.theta_samples; ++k) {
          const Vec3 u = axial + radial * (trig.c[k] * f.perp + trig.s[k] * f.binormal);
          const long cell = grid.index_of(u);
          counts[static_cast<std::size_t>(cell)] += r.weight * grid.row_weight[static_cast<std::size_t>(cell / grid.cols)];
        }
      }
    });
  };

  OrientationVote out;
  cast_cone(up_grid, true);
  out.e1_cell = argmax(up_grid.counts);
  if (out.e1_cell < 0) throw std::runtime_error("vote_orientation: no kept records");
  out.e1 = up_grid.direction_of(out.e1_cell);

  if (cfg.use_beta) {
    cast_cone(right_grid, false);
    std::vector<long> order(right_grid.counts.size());
    std::iota(order.begin(), order.end(), 0L);
    std::stable_sort(order.begin(), order.end(), [&](long a, long b) {
      return right_grid.counts[static_cast<std::size_t>(a)] > right_grid.counts[static_cast<std::size_t>(b)];
    });
    for (long cell : order) {
      if (right_grid.counts[static_cast<std::size_t>(cell)] <= 0.0) break;
      const Vec3 cand = right_grid.direction_of(cell);
      if (std::abs(cand.dot(out.e1)) < 1.0 - 1e-6) {
        out.e2_cell = cell;
        out.e2 = cand;
        break;
      }
    }
    double sum = 0.0;
    long nonzero = 0;
    for (double c : right_grid.counts) {
      if (c > 0.0) {
        sum += c;
        ++nonzero;
      }
    }
    if (out.e2_cell >= 0 && nonzero > 0) {
      out.e2_peak_to_mean = right_grid.counts[static_cast<std::size_t>(out.e2_cell)] / (sum / nonzero);
    }
  }
  if (out.e2_cell < 0) out.e2 = orthogonal_unit(out.e1);
  out.azimuth_ambiguous = out.e2_peak_to_mean < 1.5;
  out.rotation = rotation_from_axes(out.e1, out.e2);
  out.e2 = out.rotation.axis(0);
  return out;
}

Vec3 vote_scale(const std::vector<PairVoteRecord>& records) {
  const auto first = std::find_if(records.begin(), records.end(), [](const PairVoteRecord& r) { return r.kept; });
  if (first == records.end()) throw std::invalid_argument("vote_scale: no kept records");
  // Offsets from a reference keep a constant input exact.
  const Vec3 ref = first->scale;
  Vec3 sum = Vec3::Zero(), plain = Vec3::Zero();
  double total = 0.0;
  long kept = 0;
  for (const auto& r : records) {
    if (!r.kept) continue;
    sum += r.weight * (r.scale - ref);
    total += r.weight;
    plain += r.scale - ref;
    ++kept;
  }
  return ref + (total > 0.0 ? Vec3(sum / total) : Vec3(plain / static_cast<double>(kept)));
}

void write_records_csv(const std::string& path, const std::vector<PairVoteRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "tuple,index1,index2,mu,nu,alpha,beta,epsilon,kept,weight,sx,sy,sz\n";
  for (const auto& r : records) {
    out << r.tuple << ',' << r.index1 << ',' << r.index2 << ',' << r.center.mu << ',' << r.center.nu << ','
        << r.orientation.alpha << ',' << r.orientation.beta << ',' << r.epsilon << ',' << (r.kept ? 1 : 0) << ','
        << r.weight << ',' << r.scale.x() << ',' << r.scale.y() << ',' << r.scale.z() << '\n';
  }
}

void write_grid_binary(const std::string& path, const std::vector<long>& dims, const std::vector<double>& counts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const auto rank = static_cast<std::int64_t>(dims.size());
  out.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
  for (long d : dims) {
    const auto v = static_cast<std::int64_t>(d);
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  out.write(reinterpret_cast<const char*>(counts.data()), static_cast<std::streamsize>(counts.size() * sizeof(double)));
}

}  // namespace cppf
