#pragma once

// Deterministic local terrain reconstruction from depth frames and
// odometry. A rolling elevation memory, locked to the robot's yaw, keeps
// terrain that has left the camera's view (beneath and behind the base).

#include "sparsefoot/localmap.hpp"
#include "sparsefoot/sensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

namespace sparsefoot {

/// Margin around the local map window kept in memory.
inline constexpr int kMemoryMarginCells = 10;
inline constexpr int kMemoryRows = kMapRows + 2 * kMemoryMarginCells;
inline constexpr int kMemoryCols = kMapCols + 2 * kMemoryMarginCells;
/// Memory row/column holding the base.
inline constexpr int kMemoryBaseRow = kMemoryMarginCells + int(kMapBackM / kMapCellM + 0.5);
inline constexpr int kMemoryBaseCol = kMemoryMarginCells + kMapCols / 2;

template <typename Scalar>
using MemoryArray = Eigen::Array<Scalar, kMemoryRows, kMemoryCols>;

/// Incremental base motion expressed in the previous yaw-aligned base frame.
struct OdometryDelta {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double yaw_delta_rad = 0.0;
};

struct OdometryNoise {
  /// Per-axis sigma added to each horizontal translation component.
  double translation_sigma_m = 0.0;
  double yaw_sigma_rad = 0.0;
  std::uint64_t seed = 0;
};

/// Exact motion between two poses.
OdometryDelta odometry_between(const RobotPose& from, const RobotPose& to);

/// Deterministic per-tick perturbation of a delta.
OdometryDelta perturb(const OdometryDelta& delta, const OdometryNoise& noise, std::int64_t tick);

struct ReconstructorConfig {
  CameraModel camera;
  /// Cells older than this are forgotten; 0 keeps them forever.
  int max_age_ticks = 0;
  /// Memory is resampled onto a new lattice once the estimated yaw drifts
  /// this far from the lattice axes.
  double yaw_resample_rad = 0.02;
};

struct ReconstructorState {
  ReconstructorConfig config;
  /// Fused heights in the odometry frame.
  MemoryArray<double> memory = MemoryArray<double>::Zero();
  /// Range of the observation currently held by each cell.
  MemoryArray<double> range = MemoryArray<double>::Zero();
  MemoryArray<bool> valid = MemoryArray<bool>::Constant(false);
  MemoryArray<std::int32_t> age = MemoryArray<std::int32_t>::Zero();
  /// Lowest free-space ray sample seen in each cell (odometry-frame z),
  /// counting only samples well before their return; contradicts spray.
  MemoryArray<double> ceiling = MemoryArray<double>::Constant(std::numeric_limits<double>::infinity());
  /// Same, counting samples up to the return; tells holes from shadows.
  MemoryArray<double> tight_ceiling = MemoryArray<double>::Constant(std::numeric_limits<double>::infinity());

  /// Lattice axes: yaw in the odometry frame and the corner of cell (0, 0)
  /// in lattice-aligned coordinates (always a multiple of the cell size).
  double lattice_yaw = 0.0;
  Eigen::Vector2d lattice_corner = Eigen::Vector2d::Zero();

  /// Dead-reckoned base pose in the odometry frame (the init pose's frame).
  Eigen::Vector3d est_position = Eigen::Vector3d::Zero();
  double est_yaw = 0.0;

  double last_fused_timestamp = 0.0;
  bool fused_any = false;
  RobotPose last_pose;

  bool operator==(const ReconstructorState& other) const;
};

ReconstructorState init_state(const RobotPose& pose, const ReconstructorConfig& config = {});

struct UpdateResult {
  ReconstructorState state;
  LocalHeightmap rough;
};

/// Shifts memory by `delta`, fuses frames not fused before (oldest first,
/// each treated as captured at this update), and reads out the rough map.
/// Throws CameraMismatch when a frame's camera differs from the configured one.
UpdateResult update(ReconstructorState state, std::span<const DepthImage> frames,
                    const OdometryDelta& delta, const RobotPose& pose);

/// Central window of the memory at the current estimated pose.
LocalHeightmap read_local_map(const ReconstructorState& state, const RobotPose& frame);

/// Rays are walked back this far above their hit to bound the cells they cross.
inline constexpr double kCeilingSpanM = 0.6;

/// A ray that crossed a hole this far below the fill height proves a drop.
inline constexpr double kShadowMarginM = 0.01;

/// Hole fill, center-weighted 3x3 median and edge snapping. A single-cell
/// hole is filled when both neighbors along a row or column are valid and
/// agree to within kDiscontinuityM (the lower one wins), unless a ray passed
/// more than kShadowMarginM below that height.
LocalHeightmap refine(const LocalHeightmap& rough);

/// Mean absolute error in centimeters over jointly valid cells.
/// Throws NoValidCells when no cell is valid in both.
double mae(const LocalHeightmap& recon, const LocalHeightmap& gt);

/// Memory, valid and age grids as CSV blocks.
void write_state_snapshot(std::ostream& memory_csv, std::ostream& valid_csv,
                          std::ostream& age_csv, const ReconstructorState& state);

}  // namespace sparsefoot
