#pragma once

// Forward-looking depth camera simulated by ray marching the heightfield.
//
// Frames: the base frame is x forward, y left, z up. The camera frame shares
// those axes before the mount pitch is applied, so an unpitched camera looks
// along base +x. Pixel (u, v) has u along image columns (left to right) and
// v along rows (top to bottom). Ranges are distances along the pixel ray,
// not z-depth.

#include "sparsefoot/grid.hpp"
#include "sparsefoot/terrain.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <numbers>
#include <vector>

namespace sparsefoot {

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct CameraModel {
  int width_px = 96;
  int height_px = 64;
  double hfov_rad = deg_to_rad(87.0);
  double vfov_rad = deg_to_rad(58.0);
  Eigen::Vector3d mount_offset{0.20, 0.0, 0.05};
  /// Downward positive.
  double mount_pitch_rad = deg_to_rad(30.0);
  double min_range_m = 0.1;
  double max_range_m = 3.0;

  /// Throws InvalidSpec.
  void validate() const;
  bool operator==(const CameraModel&) const = default;
};

struct RobotPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw_rad = 0.0;
  double pitch_rad = 0.0;
  double roll_rad = 0.0;

  /// World-from-base rotation, R = Rz(yaw) * Ry(pitch) * Rx(roll).
  Eigen::Matrix3d rotation() const;
  /// Gravity-aligned part, Ry(pitch) * Rx(roll).
  Eigen::Matrix3d attitude() const;
  Eigen::Isometry3d world_from_base() const;
  bool operator==(const RobotPose&) const = default;
};

struct DepthImage {
  CameraModel camera;
  /// height_px x width_px, indexed (v, u).
  GridXd ranges;
  double timestamp_s = 0.0;

  bool is_sentinel(Eigen::Index v, Eigen::Index u) const {
    return ranges(v, u) >= camera.max_range_m;
  }
};

struct NoiseModel {
  double gaussian_sigma_m = 0.0;
  double dropout_prob = 0.0;
  std::uint64_t seed = 0;
};

struct RenderOptions {
  /// March step along the ray; 0 selects cell_m / 2.
  double march_step_m = 0.0;
  double bisection_tol_m = 1e-6;
};

/// Unit ray direction of pixel (u, v) in the camera frame (pinhole model).
Eigen::Vector3d pixel_ray(const CameraModel& cam, int u, int v);

/// Pose of the camera in the base frame (mount offset and pitch).
Eigen::Isometry3d base_from_camera(const CameraModel& cam);

/// Throws InvalidPose when the base or the camera sits below the terrain.
DepthImage render_depth(const HeightField& hf, const RobotPose& pose, const CameraModel& cam,
                        double timestamp_s = 0.0, const RenderOptions& options = {});

/// Additive Gaussian range noise plus dropout, deterministic per
/// (seed, timestamp, pixel). No-hit pixels stay at the sentinel.
DepthImage apply_noise(const DepthImage& img, const NoiseModel& noise);

struct ClockTick {
  std::int64_t tick = 0;
  bool has_new_depth = false;
  bool operator==(const ClockTick&) const = default;
};

/// Policy ticks [0, n_ticks) flagged with fresh depth frames. Throws
/// RateMismatch unless depth_rate_hz divides policy_rate_hz.
std::vector<ClockTick> sensor_clock(std::int64_t n_ticks, int policy_rate_hz = 50,
                                    int depth_rate_hz = 10);

}  // namespace sparsefoot
