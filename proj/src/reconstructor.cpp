#include "sparsefoot/reconstructor.hpp"

#include "sparsefoot/error.hpp"
#include "sparsefoot/io.hpp"
#include "sparsefoot/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

namespace sparsefoot {

namespace {

constexpr double kCell = kMapCellM;
// Carving starts this far before each return so that range noise (a few
// centimeters) cannot carve below a true surface.
constexpr double kFreeBackoffM = 0.08;
constexpr double kTightBackoffM = 2e-3;
constexpr double kBinNudgeM = 1e-5;
// A stored height this far above the free-space ceiling is contradicted.
constexpr double kCarveMarginM = 0.03;
// Height window and minimum support of a per-frame surface cluster.
constexpr double kClusterM = 0.06;
constexpr int kMinReturns = 3;
// Rays crossing a cell this far below a candidate height refute it once
// there are enough of them; a few overshoots are expected from noise.
constexpr double kPassBackoffM = 0.01;
constexpr int kMinRefutations = 3;
constexpr double kSpillDepth = 0.72;

Eigen::Matrix2d rot2(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

// Odometry-frame point to lattice-aligned coordinates.
Eigen::Vector2d to_lattice(const ReconstructorState& s, const Eigen::Vector2d& odom) {
  return rot2(-s.lattice_yaw) * odom;
}

// Memory cell holding a lattice-aligned point, or (-1, -1).
Eigen::Vector2i lattice_cell(const ReconstructorState& s, const Eigen::Vector2d& q) {
  const double fa = std::floor((q.x() - s.lattice_corner.x()) / kCell);
  const double fb = std::floor((q.y() - s.lattice_corner.y()) / kCell);
  if (!(fa >= 0.0 && fb >= 0.0 && fa < kMemoryRows && fb < kMemoryCols)) return {-1, -1};
  return {int(fa), int(fb)};
}

// Corner placing the base inside cell (kMemoryBaseRow, kMemoryBaseCol).
Eigen::Vector2d corner_for(const Eigen::Vector2d& base_lattice) {
  return {(std::floor(base_lattice.x() / kCell) - kMemoryBaseRow) * kCell,
          (std::floor(base_lattice.y() / kCell) - kMemoryBaseCol) * kCell};
}

void recenter(ReconstructorState& s) {
  if (std::abs(wrap_angle(s.est_yaw - s.lattice_yaw)) > s.config.yaw_resample_rad) {
    // Rotate onto a lattice aligned with the current yaw by nearest-cell resampling.
    ReconstructorState old = s;
    s.lattice_yaw = s.est_yaw;
    s.lattice_corner = corner_for(to_lattice(s, s.est_position.head<2>()));
    s.valid.setConstant(false);
    s.ceiling.setConstant(std::numeric_limits<double>::infinity());
    s.tight_ceiling.setConstant(std::numeric_limits<double>::infinity());
    const Eigen::Matrix2d to_odom = rot2(s.lattice_yaw);
    for (int a = 0; a < kMemoryRows; ++a) {
      for (int b = 0; b < kMemoryCols; ++b) {
        const Eigen::Vector2d center = s.lattice_corner + kCell * Eigen::Vector2d(a + 0.5, b + 0.5);
        const Eigen::Vector2i src = lattice_cell(old, to_lattice(old, to_odom * center));
        if (src.x() < 0) continue;
        s.ceiling(a, b) = old.ceiling(src.x(), src.y());
        s.tight_ceiling(a, b) = old.tight_ceiling(src.x(), src.y());
        if (!old.valid(src.x(), src.y())) continue;
        s.memory(a, b) = old.memory(src.x(), src.y());
        s.range(a, b) = old.range(src.x(), src.y());
        s.age(a, b) = old.age(src.x(), src.y());
        s.valid(a, b) = true;
      }
    }
    return;
  }
  const Eigen::Vector2d corner = corner_for(to_lattice(s, s.est_position.head<2>()));
  const long da = std::lround((corner.x() - s.lattice_corner.x()) / kCell);
  const long db = std::lround((corner.y() - s.lattice_corner.y()) / kCell);
  if (da == 0 && db == 0) return;
  const MemoryArray<double> memory = s.memory;
  const MemoryArray<double> range = s.range;
  const MemoryArray<bool> valid = s.valid;
  const MemoryArray<std::int32_t> age = s.age;
  const MemoryArray<double> ceiling = s.ceiling;
  const MemoryArray<double> tight = s.tight_ceiling;
  s.valid.setConstant(false);
  s.ceiling.setConstant(std::numeric_limits<double>::infinity());
  s.tight_ceiling.setConstant(std::numeric_limits<double>::infinity());
  for (int a = 0; a < kMemoryRows; ++a) {
    for (int b = 0; b < kMemoryCols; ++b) {
      const long sa = a + da, sb = b + db;
      if (sa < 0 || sb < 0 || sa >= kMemoryRows || sb >= kMemoryCols) continue;
      s.ceiling(a, b) = ceiling(sa, sb);
      s.tight_ceiling(a, b) = tight(sa, sb);
      if (!valid(sa, sb)) continue;
      s.memory(a, b) = memory(sa, sb);
      s.range(a, b) = range(sa, sb);
      s.age(a, b) = age(sa, sb);
      s.valid(a, b) = true;
    }
  }
  s.lattice_corner += kCell * Eigen::Vector2d(double(da), double(db));
}

// One depth return landing in a memory cell.
struct Return {
  double z = 0.0;
  double range = 0.0;
  // Position across the cell on each axis: 0 at the side facing the
  // camera, 1 at the far side.
  Eigen::Vector2d depth = Eigen::Vector2d::Zero();
  bool operator<(const Return& o) const { return z < o.z; }
};

struct Cluster {
  long median = -1;  // index into the sorted returns, -1 when none
  std::size_t lo = 0, n = 0;
  Eigen::Vector2d depth = Eigen::Vector2d::Zero();  // mean over the cluster
};

// Densest height cluster among one cell's returns in one frame: horizontal
// surfaces give tight clusters, walls and range-noise spray give thin ones.
Cluster densest_cluster(const std::vector<Return>& pts) {
  Cluster c;
  for (std::size_t lo = 0, hi = 0; lo < pts.size(); ++lo) {
    while (hi < pts.size() && pts[hi].z <= pts[lo].z + kClusterM) ++hi;
    if (hi - lo >= c.n) {  // >= keeps the highest of equal clusters
      c.n = hi - lo;
      c.lo = lo;
    }
  }
  // A wall spreads its returns over many windows; a floor puts most in one.
  if (c.n < std::size_t(kMinReturns) || 2 * c.n < pts.size()) return c;
  for (std::size_t i = c.lo; i < c.lo + c.n; ++i) c.depth += pts[i].depth;
  c.depth /= double(c.n);
  c.median = long(c.lo + (c.n - 1) / 2);
  return c;
}

void fuse(ReconstructorState& s, const DepthImage& frame, const RobotPose& pose) {
  const CameraModel& cam = frame.camera;
  // Gravity-aligned, yaw-locked base frame -> lattice-aligned odometry frame.
  const Eigen::Matrix3d level_from_cam = pose.attitude() * base_from_camera(cam).linear();
  const Eigen::Vector3d cam_origin = pose.attitude() * cam.mount_offset;
  const Eigen::Matrix2d lattice_from_level = rot2(s.est_yaw - s.lattice_yaw);
  const Eigen::Vector2d cam_lattice =
      to_lattice(s, rot2(s.est_yaw) * cam_origin.head<2>() + s.est_position.head<2>());
  // Camera position in cell units relative to the lattice corner.
  const Eigen::Vector2d cam_cells = (cam_lattice - s.lattice_corner) / kCell;
  const double cam_z = cam_origin.z() + s.est_position.z();
  constexpr std::size_t kCells = std::size_t(kMemoryRows * kMemoryCols);
  auto cell_index = [](const Eigen::Vector2d& cells) -> long {
    const double fa = std::floor(cells.x()), fb = std::floor(cells.y());
    if (!(fa >= 0.0 && fb >= 0.0 && fa < kMemoryRows && fb < kMemoryCols)) return -1;
    return long(fa) * kMemoryCols + long(fb);
  };

  struct Ray {
    Eigen::Vector2d dir_cells;  // horizontal direction, cells per meter
    double dir_z;
    double range;
  };
  std::vector<Ray> rays;
  rays.reserve(std::size_t(cam.width_px * cam.height_px));
  std::vector<std::vector<Return>> returns(kCells);
  for (int v = 0; v < cam.height_px; ++v) {
    for (int u = 0; u < cam.width_px; ++u) {
      if (frame.is_sentinel(v, u)) continue;
      const double r = frame.ranges(v, u);
      const Eigen::Vector3d dir = level_from_cam * pixel_ray(cam, u, v);
      const Ray ray{lattice_from_level * dir.head<2>() / kCell, dir.z(), r};
      rays.push_back(ray);
      // Bin a hair short of the return: one on a face along a cell boundary
      // then sits in front of it, as range noise would put it.
      const Eigen::Vector2d hit = cam_cells + (r - kBinNudgeM) * ray.dir_cells;
      const long c = cell_index(hit);
      if (c < 0) continue;
      const Eigen::Vector2d local = hit - hit.array().floor().matrix();
      const Eigen::Vector2d view = hit - cam_cells;
      const Eigen::Vector2d depth(view.x() > 0 ? local.x() : 1.0 - local.x(),
                                  view.y() > 0 ? local.y() : 1.0 - local.y());
      returns[std::size_t(c)].push_back({cam_z + r * ray.dir_z, r, depth});
    }
  }

  std::vector<Cluster> cluster(kCells);
  for (std::size_t idx = 0; idx < kCells; ++idx) {
    std::sort(returns[idx].begin(), returns[idx].end());
    cluster[idx] = densest_cluster(returns[idx]);
  }
  auto cluster_height = [&](std::size_t idx) { return returns[idx][std::size_t(cluster[idx].median)].z; };

  // Candidate height per cell, after dropping spill.
  std::vector<long> pick(kCells, -1);
  for (int a = 0; a < kMemoryRows; ++a) {
    for (int b = 0; b < kMemoryCols; ++b) {
      const std::size_t idx = std::size_t(a * kMemoryCols + b);
      if (cluster[idx].median < 0) continue;
      // Range noise pushes the returns of an edge or wall a little way
      // toward the camera. In the cell they spill into they crowd against
      // the far side, and the cell nearer the camera has nothing at that
      // height (a floor sampled by sparse pixel rows has).
      const Eigen::Vector2d view = Eigen::Vector2d(a + 0.5, b + 0.5) - cam_cells;
      const double h = cluster_height(idx);
      auto matches = [&](int na, int nb) {
        if (na < 0 || nb < 0 || na >= kMemoryRows || nb >= kMemoryCols) return false;
        const std::size_t n = std::size_t(na * kMemoryCols + nb);
        return cluster[n].median >= 0 && std::abs(cluster_height(n) - h) <= kClusterM;
      };
      const int sa = view.x() > 0 ? 1 : -1, sb = view.y() > 0 ? 1 : -1;
      if ((cluster[idx].depth.x() > kSpillDepth && !matches(a - sa, b)) ||
          (cluster[idx].depth.y() > kSpillDepth && !matches(a, b - sb)))
        continue;
      pick[idx] = cluster[idx].median;
    }
  }

  // Walk every ray back from its return. Free space well before the hit
  // bounds each cell crossed; the tight bound starts right at the return and
  // only steers hole filling. Crossings well below a candidate or a stored
  // height count against it.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> test_new(kCells, -inf), test_old(kCells, -inf);
  for (std::size_t idx = 0; idx < kCells; ++idx) {
    if (pick[idx] >= 0) test_new[idx] = returns[idx][std::size_t(pick[idx])].z - kCarveMarginM;
    const int a = int(idx) / kMemoryCols, b = int(idx) % kMemoryCols;
    if (s.valid(a, b)) test_old[idx] = s.memory(a, b) - kCarveMarginM;
  }
  std::vector<int> below_new(kCells, 0), below_old(kCells, 0);
  double* tight = s.tight_ceiling.data();
  double* loose = s.ceiling.data();
  constexpr double kStep = 0.5 * kCell;
  for (const Ray& ray : rays) {
    const double top = cam_z + ray.range * ray.dir_z + kCeilingSpanM;
    // Clip the walk to the stretch of the ray above the memory window; the
    // samples stay on the lattice t = range - backoff - k * step.
    double t_lo = 0.0, t_hi = ray.range;
    for (int axis = 0; axis < 2; ++axis) {
      const double o = cam_cells[axis], d = ray.dir_cells[axis];
      const double extent = axis == 0 ? kMemoryRows : kMemoryCols;
      if (d == 0.0) {
        if (o < 0.0 || o >= extent) t_hi = -1.0;
        continue;
      }
      const double t0 = (0.0 - o) / d, t1 = (extent - o) / d;
      t_lo = std::max(t_lo, std::min(t0, t1));
      t_hi = std::min(t_hi, std::max(t0, t1));
    }
    if (t_hi < t_lo) continue;
    const double t_first = ray.range - kTightBackoffM;
    const double skip = std::max(0.0, std::floor((t_first - t_hi) / kStep));
    for (double t = t_first - skip * kStep; t > 0.0 && t >= t_lo - kStep; t -= kStep) {
      const double z = cam_z + t * ray.dir_z;
      if (z > top) break;
      const long c = cell_index(cam_cells + t * ray.dir_cells);
      if (c < 0) continue;
      // Memory arrays are column-major.
      const int a = int(c / kMemoryCols), b = int(c % kMemoryCols);
      const std::size_t m = std::size_t(b) * kMemoryRows + std::size_t(a);
      tight[m] = std::min(tight[m], z);
      if (t <= ray.range - kFreeBackoffM) loose[m] = std::min(loose[m], z);
      if (t <= ray.range - kPassBackoffM) {
        below_new[std::size_t(c)] += z < test_new[std::size_t(c)];
        below_old[std::size_t(c)] += z < test_old[std::size_t(c)];
      }
    }
  }

  for (int a = 0; a < kMemoryRows; ++a) {
    for (int b = 0; b < kMemoryCols; ++b) {
      const std::size_t idx = std::size_t(a * kMemoryCols + b);
      const auto& pts = returns[idx];
      const double ceil = s.ceiling(a, b) + kCarveMarginM;
      const long quorum = std::max<long>(kMinRefutations, long(pts.size()) / 4);
      const bool old_refuted = s.valid(a, b) && (s.memory(a, b) > ceil || below_old[idx] >= quorum);
      const long k = pick[idx];
      const bool new_ok = k >= 0 && !(pts[std::size_t(k)].z > ceil || below_new[idx] >= quorum);
      if (new_ok && !(s.valid(a, b) && !old_refuted && pts[std::size_t(k)].range > s.range(a, b))) {
        s.memory(a, b) = pts[std::size_t(k)].z;
        s.range(a, b) = pts[std::size_t(k)].range;
        s.valid(a, b) = true;
        s.age(a, b) = 0;
      } else if (old_refuted) {
        // Rays have since passed below it: the stored height was spray.
        s.valid(a, b) = false;
      }
    }
  }
}

}  // namespace

bool ReconstructorState::operator==(const ReconstructorState& o) const {
  return config.camera == o.config.camera && config.max_age_ticks == o.config.max_age_ticks &&
         (valid == o.valid).all() && (age == o.age).all() &&
         (valid.select(memory, 0.0) == o.valid.select(o.memory, 0.0)).all() &&
         (valid.select(range, 0.0) == o.valid.select(o.range, 0.0)).all() && (ceiling == o.ceiling).all() &&
         (tight_ceiling == o.tight_ceiling).all() &&
         lattice_yaw == o.lattice_yaw && lattice_corner == o.lattice_corner &&
         est_position == o.est_position && est_yaw == o.est_yaw &&
         last_fused_timestamp == o.last_fused_timestamp && fused_any == o.fused_any &&
         last_pose == o.last_pose;
}

OdometryDelta odometry_between(const RobotPose& from, const RobotPose& to) {
  OdometryDelta d;
  const Eigen::Vector3d world = to.position - from.position;
  d.translation.head<2>() = rot2(-from.yaw_rad) * world.head<2>();
  d.translation.z() = world.z();
  d.yaw_delta_rad = wrap_angle(to.yaw_rad - from.yaw_rad);
  return d;
}

OdometryDelta perturb(const OdometryDelta& delta, const OdometryNoise& noise, std::int64_t tick) {
  if (noise.translation_sigma_m <= 0.0 && noise.yaw_sigma_rad <= 0.0) return delta;
  Rng rng(hash_combine(substream(noise.seed, "odometry"), std::uint64_t(tick)));
  OdometryDelta out = delta;
  out.translation.x() += noise.translation_sigma_m * rng.normal();
  out.translation.y() += noise.translation_sigma_m * rng.normal();
  out.yaw_delta_rad += noise.yaw_sigma_rad * rng.normal();
  return out;
}

ReconstructorState init_state(const RobotPose& pose, const ReconstructorConfig& config) {
  config.camera.validate();
  ReconstructorState s;
  s.config = config;
  s.est_position = pose.position;
  s.est_yaw = pose.yaw_rad;
  s.lattice_yaw = pose.yaw_rad;
  s.lattice_corner = corner_for(to_lattice(s, pose.position.head<2>()));
  s.last_pose = pose;
  return s;
}

UpdateResult update(ReconstructorState state, std::span<const DepthImage> frames,
                    const OdometryDelta& delta, const RobotPose& pose) {
  for (const DepthImage& f : frames) {
    if (!(f.camera == state.config.camera))
      throw Error(ErrorCode::CameraMismatch, "depth frame camera differs from the configured model");
  }
  state.est_position.head<2>() += rot2(state.est_yaw) * delta.translation.head<2>();
  state.est_position.z() += delta.translation.z();
  state.est_yaw = wrap_angle(state.est_yaw + delta.yaw_delta_rad);
  recenter(state);

  state.age += 1;
  for (const DepthImage& f : frames) {
    if (state.fused_any && f.timestamp_s <= state.last_fused_timestamp) continue;
    fuse(state, f, pose);
    state.last_fused_timestamp = f.timestamp_s;
    state.fused_any = true;
  }
  if (state.config.max_age_ticks > 0)
    state.valid = state.valid && (state.age <= state.config.max_age_ticks);
  state.last_pose = pose;

  UpdateResult result{std::move(state), {}};
  result.rough = read_local_map(result.state, pose);
  return result;
}

LocalHeightmap read_local_map(const ReconstructorState& s, const RobotPose& frame) {
  LocalHeightmap map;
  map.frame = frame;
  const Eigen::Matrix2d odom_from_level = rot2(s.est_yaw);
  for (int i = 0; i < kMapRows; ++i) {
    for (int j = 0; j < kMapCols; ++j) {
      const Eigen::Vector2d odom =
          odom_from_level * LocalHeightmap::cell_center(i, j) + s.est_position.head<2>();
      const Eigen::Vector2i c = lattice_cell(s, to_lattice(s, odom));
      if (c.x() < 0) continue;
      map.ceiling(i, j) = s.tight_ceiling(c.x(), c.y()) - s.est_position.z();
      if (!s.valid(c.x(), c.y())) continue;
      map.heights(i, j) = s.memory(c.x(), c.y()) - s.est_position.z();
      map.valid(i, j) = true;
    }
  }
  return map;
}

LocalHeightmap refine(const LocalHeightmap& rough) {
  // Fill single-cell holes bracketed by two valid cells on one axis. Wider
  // holes next to an edge are usually shadowed drops and stay unknown.
  LocalHeightmap filled = rough;
  auto ok = [&](int a, int b) { return a >= 0 && b >= 0 && a < kMapRows && b < kMapCols && rough.valid(a, b); };
  for (int i = 0; i < kMapRows; ++i) {
    for (int j = 0; j < kMapCols; ++j) {
      if (rough.valid(i, j)) continue;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [di, dj] : {std::pair{1, 0}, std::pair{0, 1}}) {
        if (!ok(i - di, j - dj) || !ok(i + di, j + dj)) continue;
        const double h0 = rough.heights(i - di, j - dj), h1 = rough.heights(i + di, j + dj);
        if (std::abs(h0 - h1) <= kDiscontinuityM) best = std::min(best, std::min(h0, h1));
      }
      if (!std::isfinite(best)) continue;
      // A ray that passed below the neighbors' level saw a drop here.
      if (rough.ceiling(i, j) < best - kShadowMarginM) continue;
      filled.heights(i, j) = best;
      filled.valid(i, j) = true;
    }
  }

  // Center-weighted median: the center counts three times, so isolated
  // spikes vanish while block corners survive.
  LocalHeightmap median = filled;
  std::array<double, 11> window{};
  for (int i = 0; i < kMapRows; ++i) {
    for (int j = 0; j < kMapCols; ++j) {
      if (!filled.valid(i, j)) continue;
      std::size_t n = 0;
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const int a = i + di, b = j + dj;
          if (a < 0 || b < 0 || a >= kMapRows || b >= kMapCols || !filled.valid(a, b)) continue;
          const int copies = (di == 0 && dj == 0) ? 3 : 1;
          for (int k = 0; k < copies; ++k) window[n++] = filled.heights(a, b);
        }
      }
      std::nth_element(window.begin(), window.begin() + (n - 1) / 2, window.begin() + n);
      median.heights(i, j) = window[(n - 1) / 2];
    }
  }

  LocalHeightmap out = median;
  for (int i = 0; i < kMapRows; ++i) {
    for (int j = 0; j < kMapCols; ++j) {
      if (!median.valid(i, j)) continue;
      double lo = median.heights(i, j), hi = lo;
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const int a = i + di, b = j + dj;
          if (a < 0 || b < 0 || a >= kMapRows || b >= kMapCols || !median.valid(a, b)) continue;
          lo = std::min(lo, median.heights(a, b));
          hi = std::max(hi, median.heights(a, b));
        }
      }
      if (hi - lo <= kDiscontinuityM) continue;
      const double h = median.heights(i, j);
      out.heights(i, j) = (hi - h <= h - lo) ? hi : lo;
    }
  }
  return out;
}

double mae(const LocalHeightmap& recon, const LocalHeightmap& gt) {
  const MapMask joint = recon.valid && gt.valid;
  const auto n = joint.count();
  if (n == 0) throw Error(ErrorCode::NoValidCells, "no cell is valid in both maps");
  const double sum = joint.select((recon.heights - gt.heights).abs(), 0.0).sum();
  return 100.0 * sum / double(n);
}

void write_state_snapshot(std::ostream& memory_csv, std::ostream& valid_csv,
                          std::ostream& age_csv, const ReconstructorState& state) {
  write_csv_grid(memory_csv, state.memory);
  write_csv_grid(valid_csv, state.valid);
  write_csv_grid(age_csv, state.age);
}

}  // namespace sparsefoot
